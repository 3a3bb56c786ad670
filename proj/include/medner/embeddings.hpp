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

#pragma once

// Static word embeddings: skip-gram with negative sampling over a raw
// corpus, plus the lookup table the encoder and tagger read from.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medner/binio.hpp"
#include "medner/corpus.hpp"
#include "medner/nn.hpp"

namespace medner {

// Word -> vector map. Keys are ASCII-lowercased; the last row is UNK and
// out-of-vocabulary lookups resolve to it.
class StaticEmbeddingTable {
 public:
  StaticEmbeddingTable() = default;
  // `vectors` must have words.size() + 1 rows. When `normalize` is set every
  // row is scaled to unit length.
  StaticEmbeddingTable(std::vector<std::string> words, nn::Matrix<float> vectors, bool normalize);

  // Rebuilds a table from stored rows without touching them; `normalized`
  // only records how they were produced.
  static StaticEmbeddingTable restore(std::vector<std::string> words, nn::Matrix<float> vectors,
                                      bool normalized);

  int dim() const { return static_cast<int>(vectors_.cols()); }
  std::size_t vocab_size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const nn::Matrix<float>& vectors() const { return vectors_; }
  bool normalized() const { return normalized_; }

  std::size_t unk_index() const { return words_.size(); }
  std::optional<std::size_t> index(std::string_view word) const;
  std::size_t index_or_unk(std::string_view word) const;
  std::span<const float> row(std::size_t index) const;
  std::span<const float> lookup(std::string_view word) const;

  bool operator==(const StaticEmbeddingTable& other) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  nn::Matrix<float> vectors_;
  bool normalized_ = false;
};

struct SkipGramConfig {
  int dim = 64;
  int window = 5;
  int negative = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  int min_count = 1;
  std::uint64_t seed = 0;
};

void validate(const SkipGramConfig& config);

// Single-threaded SGNS; deterministic for a fixed seed. Words seen fewer than
// min_count times fold into UNK. Throws InvalidArgument on an empty corpus.
StaticEmbeddingTable train_static_embeddings(const std::vector<std::string>& corpus,
                                             const SkipGramConfig& config);

// Builds a table over the corpus vocabulary whose rows are copied from
// `source` where the word exists there and drawn at random otherwise.
StaticEmbeddingTable seed_table(const StaticEmbeddingTable& source,
                                const std::vector<std::string>& corpus, int min_count,
                                std::uint64_t seed);

// Negative-sampling loss for one (center, context) pair:
//   -log sigmoid(context . center) - sum_n log sigmoid(-negative_n . center)
// Gradients are accumulated into the non-null outputs.
template <typename S>
S sgns_pair_loss(std::span<const S> center, std::span<const S> context,
                 const std::vector<std::span<const S>>& negatives, S* d_center, S* d_context,
                 const std::vector<S*>& d_negatives) {
  auto dot = [](std::span<const S> a, std::span<const S> b) {
    S s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto sigmoid = [](S x) { return S(1) / (S(1) + std::exp(-x)); };
  auto log_sigmoid = [](S x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); };

  const std::size_t d = center.size();
  const S pos = dot(context, center);
  S loss = -log_sigmoid(pos);
  const S g_pos = sigmoid(pos) - S(1);
  for (std::size_t i = 0; i < d; ++i) {
    if (d_center) d_center[i] += g_pos * context[i];
    if (d_context) d_context[i] += g_pos * center[i];
  }
  for (std::size_t n = 0; n < negatives.size(); ++n) {
    const S s = dot(negatives[n], center);
    loss -= log_sigmoid(-s);
    const S g = sigmoid(s);
    for (std::size_t i = 0; i < d; ++i) {
      if (d_center) d_center[i] += g * negatives[n][i];
      if (n < d_negatives.size() && d_negatives[n]) d_negatives[n][i] += g * center[i];
    }
  }
  return loss;
}

// Shape features appended to every static lookup: capitalised, has digit,
// all punctuation.
inline constexpr int kShapeFeatures = 3;
std::array<float, kShapeFeatures> shape_features(std::string_view token);

// One row per token: [static vector | shape features].
nn::Matrix<float> static_inputs(const StaticEmbeddingTable& table, std::span<const Token> tokens);

void write_embeddings(const StaticEmbeddingTable& table, binio::Writer& out);
StaticEmbeddingTable read_embeddings(binio::Reader& in);

void save_embeddings(const StaticEmbeddingTable& table, const std::filesystem::path& path);
// Throws FormatError on bad magic, version mismatch, truncation, or when
// `expected_dim` is given and differs from the stored dimension.
StaticEmbeddingTable load_embeddings(const std::filesystem::path& path,
                                     std::optional<int> expected_dim = std::nullopt);

}  // namespace medner
