// Copyright 2026 The medner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "medner/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "medner/error.hpp"
#include "medner/random.hpp"

namespace medner {
namespace {

constexpr binio::Magic kEmbeddingMagic = {'M', 'N', 'E', 'R', 'E', 'M', 'B', 'D'};
constexpr std::uint32_t kEmbeddingVersion = 1;

void normalize_rows(nn::Matrix<float>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const float n = m.row(r).norm();
    if (n > 0.0f) m.row(r) /= n;
  }
}

std::vector<std::vector<std::string>> tokenized_lower(const std::vector<std::string>& corpus) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.size());
  for (const auto& line : corpus) {
    std::vector<std::string> words;
    for (const auto& t : tokenize(line)) words.push_back(lowercase_ascii(t.text));
    out.push_back(std::move(words));
  }
  return out;
}

// Vocabulary sorted by descending count, then lexicographically.
std::vector<std::pair<std::string, std::size_t>> build_vocab(
    const std::vector<std::vector<std::string>>& sentences, int min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& w : s) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> vocab;
  for (auto& [w, c] : counts)
    if (c >= static_cast<std::size_t>(std::max(1, min_count))) vocab.emplace_back(w, c);
  std::stable_sort(vocab.begin(), vocab.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return vocab;
}

}  // namespace

StaticEmbeddingTable::StaticEmbeddingTable(std::vector<std::string> words, nn::Matrix<float> vectors,
                                           bool normalize)
    : words_(std::move(words)), vectors_(std::move(vectors)), normalized_(normalize) {
  if (static_cast<std::size_t>(vectors_.rows()) != words_.size() + 1)
    throw InvalidArgument("embedding table needs one row per word plus UNK");
  if (vectors_.cols() < 1) throw InvalidArgument("embedding dimension must be >= 1");
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (!index_.emplace(words_[i], i).second) throw InvalidArgument("duplicate word '" + words_[i] + "'");
  if (!vectors_.allFinite()) throw InvalidArgument("embedding table has non-finite entries");
  if (normalized_) normalize_rows(vectors_);
}

StaticEmbeddingTable StaticEmbeddingTable::restore(std::vector<std::string> words,
                                                   nn::Matrix<float> vectors, bool normalized) {
  StaticEmbeddingTable table(std::move(words), std::move(vectors), false);
  table.normalized_ = normalized;
  return table;
}

std::optional<std::size_t> StaticEmbeddingTable::index(std::string_view word) const {
  const auto it = index_.find(lowercase_ascii(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t StaticEmbeddingTable::index_or_unk(std::string_view word) const {
  return index(word).value_or(unk_index());
}

std::span<const float> StaticEmbeddingTable::row(std::size_t i) const {
  return {vectors_.data() + static_cast<std::ptrdiff_t>(i) * vectors_.cols(),
          static_cast<std::size_t>(vectors_.cols())};
}

std::span<const float> StaticEmbeddingTable::lookup(std::string_view word) const {
  return row(index_or_unk(word));
}

bool StaticEmbeddingTable::operator==(const StaticEmbeddingTable& other) const {
  return words_ == other.words_ && normalized_ == other.normalized_ &&
         vectors_.rows() == other.vectors_.rows() && vectors_.cols() == other.vectors_.cols() &&
         vectors_ == other.vectors_;
}

void validate(const SkipGramConfig& c) {
  if (c.dim < 1 || c.window < 1 || c.negative < 1 || c.epochs < 1)
    throw InvalidArgument("skip-gram config requires dim, window, negative, epochs >= 1");
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("skip-gram learning rate must be positive");
}

StaticEmbeddingTable train_static_embeddings(const std::vector<std::string>& corpus,
                                             const SkipGramConfig& config) {
  validate(config);
  if (corpus.empty()) throw InvalidArgument("cannot train embeddings on an empty corpus");
  const auto sentences = tokenized_lower(corpus);
  const auto vocab = build_vocab(sentences, config.min_count);
  if (vocab.empty()) throw InvalidArgument("corpus has no word above min_count");

  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> words;
  for (const auto& [w, c] : vocab) {
    index.emplace(w, words.size());
    words.push_back(w);
  }
  std::vector<std::vector<std::size_t>> ids;
  std::size_t total_tokens = 0;
  for (const auto& s : sentences) {
    std::vector<std::size_t> row;
    for (const auto& w : s) {
      const auto it = index.find(w);
      if (it != index.end()) row.push_back(it->second);
    }
    total_tokens += row.size();
    ids.push_back(std::move(row));
  }

  // Unigram^0.75 noise distribution.
  std::vector<double> cumulative(vocab.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    acc += std::pow(static_cast<double>(vocab[i].second), 0.75);
    cumulative[i] = acc;
  }
  Rng rng(config.seed);
  auto sample_noise = [&]() {
    const double u = uniform01(rng) * acc;
    return static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                    cumulative.begin()) % vocab.size();
  };

  const int dim = config.dim;
  const std::size_t v = words.size();
  nn::Matrix<float> in(v, dim);
  nn::Matrix<float> out = nn::Matrix<float>::Zero(v, dim);
  for (Eigen::Index i = 0; i < in.size(); ++i)
    in.data()[i] = static_cast<float>(uniform(rng, -0.5, 0.5) / dim);

  std::vector<float> d_center(dim), d_context(dim);
  std::vector<std::vector<float>> d_neg(config.negative, std::vector<float>(dim));
  std::vector<std::size_t> negatives(config.negative);
  const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(std::max<std::size_t>(total_tokens, 1));
  double step = 0.0;

  auto row_of = [dim](nn::Matrix<float>& m, std::size_t r) { return m.data() + r * dim; };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& sent : ids) {
      for (std::size_t i = 0; i < sent.size(); ++i, step += 1.0) {
        const float lr = static_cast<float>(config.learning_rate * std::max(1e-4, 1.0 - step / total_steps));
        const std::size_t reduced = 1 + uniform_index(rng, static_cast<std::uint64_t>(config.window));
        const std::size_t lo = i >= reduced ? i - reduced : 0;
        const std::size_t hi = std::min(sent.size() - 1, i + reduced);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const std::size_t center = sent[i];
          const std::size_t context = sent[j];
          std::vector<std::span<const float>> neg_vecs;
          std::vector<float*> neg_grads;
          for (int k = 0; k < config.negative; ++k) {
            std::size_t n = sample_noise();
            negatives[k] = n;
            if (n == context) continue;
            neg_vecs.emplace_back(row_of(out, n), dim);
            std::fill(d_neg[k].begin(), d_neg[k].end(), 0.0f);
            neg_grads.push_back(d_neg[k].data());
          }
          std::fill(d_center.begin(), d_center.end(), 0.0f);
          std::fill(d_context.begin(), d_context.end(), 0.0f);
          sgns_pair_loss<float>({row_of(in, center), static_cast<std::size_t>(dim)},
                                {row_of(out, context), static_cast<std::size_t>(dim)}, neg_vecs,
                                d_center.data(), d_context.data(), neg_grads);
          float* ctx = row_of(out, context);
          for (int d = 0; d < dim; ++d) ctx[d] -= lr * d_context[d];
          std::size_t g = 0;
          for (int k = 0; k < config.negative; ++k) {
            if (negatives[k] == context) continue;
            float* nv = row_of(out, negatives[k]);
            for (int d = 0; d < dim; ++d) nv[d] -= lr * d_neg[k][d];
            ++g;
          }
          float* cv = row_of(in, center);
          for (int d = 0; d < dim; ++d) cv[d] -= lr * d_center[d];
        }
      }
    }
  }

  nn::Matrix<float> table(v + 1, dim);
  table.topRows(static_cast<Eigen::Index>(v)) = in;
  normalize_rows(table);
  table.row(static_cast<Eigen::Index>(v)) = table.topRows(static_cast<Eigen::Index>(v)).colwise().mean();
  if (table.row(static_cast<Eigen::Index>(v)).norm() == 0.0f) table(static_cast<Eigen::Index>(v), 0) = 1.0f;
  return StaticEmbeddingTable(std::move(words), std::move(table), true);
}

StaticEmbeddingTable seed_table(const StaticEmbeddingTable& source, const std::vector<std::string>& corpus,
                                int min_count, std::uint64_t seed) {
  if (corpus.empty()) throw InvalidArgument("cannot seed a table from an empty corpus");
  const auto vocab = build_vocab(tokenized_lower(corpus), min_count);
  const int dim = source.dim();
  std::vector<std::string> words;
  nn::Matrix<float> table(vocab.size() + 1, dim);
  Rng rng(seed);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    words.push_back(vocab[i].first);
    if (const auto j = source.index(vocab[i].first)) {
      const auto r = source.row(*j);
      for (int d = 0; d < dim; ++d) table(static_cast<Eigen::Index>(i), d) = r[d];
    } else {
      for (int d = 0; d < dim; ++d) table(static_cast<Eigen::Index>(i), d) = static_cast<float>(normal(rng));
    }
  }
  const auto unk = source.row(source.unk_index());
  for (int d = 0; d < dim; ++d) table(static_cast<Eigen::Index>(vocab.size()), d) = unk[d];
  return StaticEmbeddingTable(std::move(words), std::move(table), true);
}

std::array<float, kShapeFeatures> shape_features(std::string_view token) {
  std::array<float, kShapeFeatures> f{0.0f, 0.0f, 0.0f};
  if (token.empty()) return f;
  if (token[0] >= 'A' && token[0] <= 'Z') f[0] = 1.0f;
  bool all_punct = true;
  for (char c : token) {
    if (c >= '0' && c <= '9') f[1] = 1.0f;
    const auto u = static_cast<unsigned char>(c);
    if (!(u < 0x80 && std::ispunct(u))) all_punct = false;
  }
  f[2] = all_punct ? 1.0f : 0.0f;
  return f;
}

nn::Matrix<float> static_inputs(const StaticEmbeddingTable& table, std::span<const Token> tokens) {
  const int dim = table.dim();
  nn::Matrix<float> x(static_cast<Eigen::Index>(tokens.size()), dim + kShapeFeatures);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto r = table.lookup(tokens[i].text);
    float* out = x.data() + static_cast<std::ptrdiff_t>(i) * x.cols();
    std::copy(r.begin(), r.end(), out);
    const auto shape = shape_features(tokens[i].text);
    std::copy(shape.begin(), shape.end(), out + dim);
  }
  return x;
}

void write_embeddings(const StaticEmbeddingTable& table, binio::Writer& out) {
  out.magic(kEmbeddingMagic);
  out.u32(kEmbeddingVersion);
  out.u32(static_cast<std::uint32_t>(table.dim()));
  out.u32(static_cast<std::uint32_t>(table.vocab_size()));
  out.u8(table.normalized() ? 1 : 0);
  for (const auto& w : table.words()) out.string(w);
  out.matrix(table.vectors());
}

StaticEmbeddingTable read_embeddings(binio::Reader& in) {
  in.expect_magic(kEmbeddingMagic, "embedding");
  const std::uint32_t version = in.u32();
  if (version != kEmbeddingVersion)
    throw FormatError("embedding format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kEmbeddingVersion) + ")");
  const std::uint32_t dim = in.u32();
  const std::uint32_t vocab = in.u32();
  const bool normalized = in.u8() != 0;
  std::vector<std::string> words;
  words.reserve(vocab);
  for (std::uint32_t i = 0; i < vocab; ++i) words.push_back(in.string());
  auto vectors = in.matrix(vocab + 1, dim, "embedding table");
  return StaticEmbeddingTable::restore(std::move(words), std::move(vectors), normalized);
}

void save_embeddings(const StaticEmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  binio::Writer w(out);
  write_embeddings(table, w);
}

StaticEmbeddingTable load_embeddings(const std::filesystem::path& path, std::optional<int> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  binio::Reader r(in);
  try {
    auto table = read_embeddings(r);
    r.expect_end("embedding file");
    if (expected_dim && table.dim() != *expected_dim)
      throw FormatError("embedding dimension " + std::to_string(table.dim()) + " does not match expected " +
                        std::to_string(*expected_dim));
    return table;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace medner
