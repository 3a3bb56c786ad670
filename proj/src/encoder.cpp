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

#include "medner/encoder.hpp"

#include <fstream>
#include <limits>
#include <numeric>

#include "medner/error.hpp"
#include "medner/random.hpp"

namespace medner {
namespace {

constexpr binio::Magic kEncoderMagic = {'M', 'N', 'E', 'R', 'E', 'N', 'C', 'D'};
constexpr std::uint32_t kEncoderVersion = 1;

struct PretrainSentence {
  nn::Matrix<float> inputs;
  std::vector<std::optional<std::size_t>> targets;  // seed-table row, none for UNK
};

}  // namespace

nn::Matrix<float> ContextualEncoder::encode_inputs(const nn::Matrix<float>& inputs) const {
  if (inputs.rows() == 0) return nn::Matrix<float>(0, dim());
  const Segment whole{0, inputs.rows()};
  return net_.forward(inputs, std::span<const Segment>(&whole, 1), {}, nullptr);
}

bool ContextualEncoder::operator==(const ContextualEncoder& other) const {
  if (!(config() == other.config())) return false;
  const auto a = net_.params();
  const auto b = other.net_.params();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i]->value != b[i]->value) return false;
  return true;
}

void validate(const PretrainConfig& c) {
  if (c.epochs < 1) throw InvalidArgument("pretraining needs epochs >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
  if (c.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (c.depth < 0 || c.window < 1) throw InvalidArgument("encoder needs depth >= 0 and window >= 1");
  if (!(c.mask_rate > 0.0 && c.mask_rate <= 1.0)) throw InvalidArgument("mask rate must lie in (0, 1]");
  if (c.patience < 1) throw InvalidArgument("patience must be >= 1");
}

std::pair<ContextualEncoder, PretrainReport> pretrain_contextual(const std::vector<std::string>& corpus,
                                                                 const StaticEmbeddingTable& seeds,
                                                                 const PretrainConfig& config) {
  validate(config);
  if (corpus.empty()) throw InvalidArgument("cannot pretrain on an empty corpus");
  if (config.dim != 0 && config.dim != seeds.dim())
    throw InvalidArgument("encoder dim " + std::to_string(config.dim) + " does not match seed vectors of dim " +
                          std::to_string(seeds.dim()));
  const auto started = std::chrono::steady_clock::now();

  std::vector<PretrainSentence> sentences;
  for (const auto& line : corpus) {
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    PretrainSentence s;
    s.inputs = static_inputs(seeds, tokens);
    for (const auto& t : tokens) s.targets.push_back(seeds.index(t.text));
    sentences.push_back(std::move(s));
  }
  if (sentences.empty()) throw InvalidArgument("cannot pretrain on an empty corpus");

  const EncoderConfig ec{seeds.dim(), seeds.dim(), config.depth, config.window};
  EncoderNet<float> net(ec);
  Rng rng(config.seed);
  net.initialize(rng);
  nn::Adam<float> adam(nn::AdamConfig{config.learning_rate});
  const int width = net.input_width();
  const auto dim = static_cast<std::size_t>(seeds.dim());

  PretrainReport report;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      Eigen::Index rows = 0;
      for (std::size_t k = b; k < e; ++k) rows += sentences[order[k]].inputs.rows();
      nn::Matrix<float> x(rows, width);
      std::vector<Segment> segments;
      std::vector<bool> masked(static_cast<std::size_t>(rows), false);
      std::vector<std::pair<Eigen::Index, std::size_t>> targets;  // (row, seed row)
      Eigen::Index offset = 0;
      for (std::size_t k = b; k < e; ++k) {
        const auto& s = sentences[order[k]];
        const Eigen::Index n = s.inputs.rows();
        x.middleRows(offset, n) = s.inputs;
        segments.push_back({offset, n});
        std::vector<Eigen::Index> known;
        for (Eigen::Index i = 0; i < n; ++i)
          if (s.targets[static_cast<std::size_t>(i)]) known.push_back(i);
        bool any = false;
        for (Eigen::Index i : known) {
          if (bernoulli(rng, config.mask_rate)) {
            masked[static_cast<std::size_t>(offset + i)] = true;
            targets.emplace_back(offset + i, *s.targets[static_cast<std::size_t>(i)]);
            any = true;
          }
        }
        if (!any && !known.empty()) {
          const Eigen::Index i = known[uniform_index(rng, known.size())];
          masked[static_cast<std::size_t>(offset + i)] = true;
          targets.emplace_back(offset + i, *s.targets[static_cast<std::size_t>(i)]);
        }
        offset += n;
      }
      if (targets.empty()) continue;
      if (config.dropout > 0.0) x.array() *= nn::dropout_mask<float>(x.rows(), x.cols(), config.dropout, rng).array();

      EncoderNet<float>::Cache cache;
      const nn::Matrix<float> y = net.forward(x, segments, masked, &cache);
      nn::Matrix<float> dy = nn::Matrix<float>::Zero(y.rows(), y.cols());
      const float scale = 1.0f / static_cast<float>(targets.size());
      for (const auto& [row, seed_row] : targets) {
        const float loss = lmao_loss<float>(config.loss, {y.data() + row * y.cols(), dim}, seeds.row(seed_row),
                                            dy.data() + row * dy.cols());
        dy.row(row) *= scale;
        loss_sum += loss;
        ++loss_count;
      }
      net.zero_grad();
      net.backward(cache, dy);
      adam.step(net.params());
    }
    const double mean = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    report.epoch_loss.push_back(mean);
    report.stopped_epoch = epoch;
    if (mean < best - config.min_delta) {
      best = mean;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {ContextualEncoder(std::move(net)), std::move(report)};
}

std::vector<std::vector<float>> encode(const ContextualEncoder& encoder, const StaticEmbeddingTable& seeds,
                                       std::span<const Token> tokens) {
  if (encoder.config().input_dim != seeds.dim())
    throw InvalidArgument("encoder expects seed vectors of dim " + std::to_string(encoder.config().input_dim));
  std::vector<std::vector<float>> out;
  if (tokens.empty()) return out;
  const auto y = encoder.encode_inputs(static_inputs(seeds, tokens));
  out.reserve(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    out.emplace_back(y.data() + i * y.cols(), y.data() + (i + 1) * y.cols());
  return out;
}

void write_encoder(const ContextualEncoder& encoder, binio::Writer& out) {
  const auto& c = encoder.config();
  out.magic(kEncoderMagic);
  out.u32(kEncoderVersion);
  out.u32(static_cast<std::uint32_t>(c.input_dim));
  out.u32(static_cast<std::uint32_t>(c.dim));
  out.u32(static_cast<std::uint32_t>(c.depth));
  out.u32(static_cast<std::uint32_t>(c.window));
  for (const auto* p : encoder.net().params()) out.matrix(p->value);
}

ContextualEncoder read_encoder(binio::Reader& in) {
  in.expect_magic(kEncoderMagic, "encoder");
  const std::uint32_t version = in.u32();
  if (version != kEncoderVersion)
    throw FormatError("encoder format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kEncoderVersion) + ")");
  EncoderConfig c;
  c.input_dim = static_cast<int>(in.u32());
  c.dim = static_cast<int>(in.u32());
  c.depth = static_cast<int>(in.u32());
  c.window = static_cast<int>(in.u32());
  if (c.input_dim < 1 || c.dim < 1 || c.window < 1 || c.depth > 64 || c.input_dim > 65536 || c.dim > 65536)
    throw FormatError("corrupt encoder config block");
  EncoderNet<float> net(c);
  for (auto* p : net.params()) p->value = in.matrix(p->value.rows(), p->value.cols(), "encoder");
  return ContextualEncoder(std::move(net));
}

void save_encoder(const ContextualEncoder& encoder, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  binio::Writer w(out);
  write_encoder(encoder, w);
}

ContextualEncoder load_encoder(const std::filesystem::path& path, std::optional<int> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  binio::Reader r(in);
  try {
    auto enc = read_encoder(r);
    r.expect_end("encoder file");
    if (expected_dim && enc.dim() != *expected_dim)
      throw FormatError("encoder dimension " + std::to_string(enc.dim()) + " does not match expected " +
                        std::to_string(*expected_dim));
    return enc;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace medner
