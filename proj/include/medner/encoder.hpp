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

// Contextual token encoder and its approximate-output pretraining.
//
// Architecture: per-token input projection of [static vector | shape
// features], then `depth` residual convolution layers each reading
// `window` neighbours on either side, then a linear projection back to the
// static-vector dimension. A token's output therefore depends only on tokens
// within depth * window positions.
//
// Pretraining hides a token (its input row is replaced by a learned mask
// vector) and trains the encoder output at that position to point in the
// direction of the token's static vector.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medner/binio.hpp"
#include "medner/embeddings.hpp"
#include "medner/nn.hpp"

namespace medner {

struct EncoderConfig {
  int input_dim = 64;  // static vector dimension
  int dim = 64;        // hidden and output width
  int depth = 4;
  int window = 1;

  int receptive_field() const { return depth * window; }
  bool operator==(const EncoderConfig&) const = default;
};

// A contiguous run of rows belonging to one sentence inside a batch matrix.
struct Segment {
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

template <typename S>
class EncoderNet {
 public:
  using Mat = nn::Matrix<S>;

  EncoderNet() = default;
  explicit EncoderNet(const EncoderConfig& config) : config_(config) {
    const int in = config.input_dim + kShapeFeatures;
    const int k = (2 * config.window + 1) * config.dim;
    w_in_ = nn::Param<S>(config.dim, in);
    b_in_ = nn::Param<S>(1, config.dim);
    for (int l = 0; l < config.depth; ++l) {
      w_conv_.emplace_back(config.dim, k);
      b_conv_.emplace_back(1, config.dim);
    }
    w_out_ = nn::Param<S>(config.input_dim, config.dim);
    b_out_ = nn::Param<S>(1, config.input_dim);
    mask_ = nn::Param<S>(1, in);
  }

  void initialize(Rng& rng) {
    nn::glorot_uniform(w_in_.value, rng);
    for (auto& w : w_conv_) nn::glorot_uniform(w.value, rng);
    nn::glorot_uniform(w_out_.value, rng);
    nn::normal_fill(mask_.value, rng, 0.1);
  }

  const EncoderConfig& config() const { return config_; }
  int input_width() const { return config_.input_dim + kShapeFeatures; }

  std::vector<nn::Param<S>*> params() {
    std::vector<nn::Param<S>*> out{&w_in_, &b_in_};
    for (int l = 0; l < config_.depth; ++l) {
      out.push_back(&w_conv_[l]);
      out.push_back(&b_conv_[l]);
    }
    out.push_back(&w_out_);
    out.push_back(&b_out_);
    out.push_back(&mask_);
    return out;
  }
  std::vector<const nn::Param<S>*> params() const {
    std::vector<const nn::Param<S>*> out;
    for (auto* p : const_cast<EncoderNet*>(this)->params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  template <typename T>
  EncoderNet<T> cast() const {
    EncoderNet<T> out(config_);
    auto dst = out.params();
    auto src = params();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<T>();
    return out;
  }

  struct Cache {
    Mat input;               // after masking and dropout
    std::vector<bool> masked;
    Mat h0;                  // tanh(input projection)
    std::vector<Mat> unfolded;
    std::vector<Mat> act;    // tanh(conv) per layer
    std::vector<Mat> hidden; // residual stream after each layer
    std::vector<Segment> segments;
  };

  // `input` has one row per token. Rows with masked[i] set are replaced by the
  // mask vector. `cache` may be null when no backward pass follows.
  Mat forward(const Mat& input, std::span<const Segment> segments, const std::vector<bool>& masked,
              Cache* cache) const {
    Mat x = input;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (!masked.empty() && masked[static_cast<std::size_t>(i)]) x.row(i) = mask_.value;
    Mat h = ((x * w_in_.value.transpose()).rowwise() + b_in_.value.row(0)).array().tanh().matrix();
    if (cache) {
      cache->input = x;
      cache->masked = masked;
      cache->h0 = h;
      cache->segments.assign(segments.begin(), segments.end());
      cache->unfolded.clear();
      cache->act.clear();
      cache->hidden.clear();
    }
    for (int l = 0; l < config_.depth; ++l) {
      Mat u = unfold(h, segments);
      Mat a = ((u * w_conv_[l].value.transpose()).rowwise() + b_conv_[l].value.row(0)).array().tanh().matrix();
      h += a;
      if (cache) {
        cache->unfolded.push_back(std::move(u));
        cache->act.push_back(std::move(a));
        cache->hidden.push_back(h);
      }
    }
    return (h * w_out_.value.transpose()).rowwise() + b_out_.value.row(0);
  }

  // Accumulates parameter gradients given d loss / d output.
  void backward(const Cache& cache, const Mat& d_out) {
    const Mat& h_last = config_.depth > 0 ? cache.hidden.back() : cache.h0;
    w_out_.grad += d_out.transpose() * h_last;
    b_out_.grad += d_out.colwise().sum();
    Mat dh = d_out * w_out_.value;
    for (int l = config_.depth - 1; l >= 0; --l) {
      const Mat& a = cache.act[l];
      Mat dz = (dh.array() * (S(1) - a.array().square())).matrix();
      w_conv_[l].grad += dz.transpose() * cache.unfolded[l];
      b_conv_[l].grad += dz.colwise().sum();
      Mat du = dz * w_conv_[l].value;
      dh += fold(du, cache.segments);
    }
    Mat dz0 = (dh.array() * (S(1) - cache.h0.array().square())).matrix();
    w_in_.grad += dz0.transpose() * cache.input;
    b_in_.grad += dz0.colwise().sum();
    if (!cache.masked.empty()) {
      Mat dx = dz0 * w_in_.value;
      for (Eigen::Index i = 0; i < dx.rows(); ++i)
        if (cache.masked[static_cast<std::size_t>(i)]) mask_.grad.row(0) += dx.row(i);
    }
  }

 private:
  template <typename>
  friend class EncoderNet;
  friend class ContextualEncoder;

  // Row i becomes [h[i-w] .. h[i] .. h[i+w]] with zeros outside the segment.
  Mat unfold(const Mat& h, std::span<const Segment> segments) const {
    const Eigen::Index d = h.cols();
    const int w = config_.window;
    Mat u = Mat::Zero(h.rows(), (2 * w + 1) * d);
    for (const Segment& s : segments) {
      for (Eigen::Index i = 0; i < s.length; ++i) {
        for (int o = -w; o <= w; ++o) {
          const Eigen::Index j = i + o;
          if (j < 0 || j >= s.length) continue;
          u.block(s.offset + i, (o + w) * d, 1, d) = h.row(s.offset + j);
        }
      }
    }
    return u;
  }

  // Adjoint of unfold.
  Mat fold(const Mat& du, std::span<const Segment> segments) const {
    const int w = config_.window;
    const Eigen::Index d = du.cols() / (2 * w + 1);
    Mat dh = Mat::Zero(du.rows(), d);
    for (const Segment& s : segments) {
      for (Eigen::Index i = 0; i < s.length; ++i) {
        for (int o = -w; o <= w; ++o) {
          const Eigen::Index j = i + o;
          if (j < 0 || j >= s.length) continue;
          dh.row(s.offset + j) += du.block(s.offset + i, (o + w) * d, 1, d);
        }
      }
    }
    return dh;
  }

  EncoderConfig config_;
  nn::Param<S> w_in_, b_in_;
  std::vector<nn::Param<S>> w_conv_, b_conv_;
  nn::Param<S> w_out_, b_out_;
  nn::Param<S> mask_;
};

// Trained float encoder. Immutable after training; safe to share across
// threads for encode().
class ContextualEncoder {
 public:
  ContextualEncoder() = default;
  explicit ContextualEncoder(EncoderNet<float> net) : net_(std::move(net)) {}

  const EncoderConfig& config() const { return net_.config(); }
  int dim() const { return net_.config().input_dim; }
  const EncoderNet<float>& net() const { return net_; }

  // One output row per input row; `inputs` comes from static_inputs().
  nn::Matrix<float> encode_inputs(const nn::Matrix<float>& inputs) const;

  bool operator==(const ContextualEncoder& other) const;

 private:
  EncoderNet<float> net_;
};

enum class PretrainLoss { kCosine, kL2 };

struct PretrainConfig {
  int epochs = 100;
  int patience = 10;          // epochs without improvement before stopping
  double min_delta = 1e-4;    // improvement threshold for patience
  double dropout = 0.2;
  double learning_rate = 1e-3;
  int batch_size = 32;        // sentences per update
  double mask_rate = 0.15;    // at least one position per sentence is masked
  PretrainLoss loss = PretrainLoss::kCosine;
  int dim = 0;                // 0: use the seed table dimension
  int depth = 4;
  int window = 1;
  std::uint64_t seed = 0;
};

void validate(const PretrainConfig& config);

struct PretrainReport {
  std::vector<double> epoch_loss;  // mean loss over masked positions
  int stopped_epoch = 0;
  double seconds = 0.0;
};

// Throws InvalidArgument on an empty corpus or when config.dim disagrees with
// the seed table.
std::pair<ContextualEncoder, PretrainReport> pretrain_contextual(
    const std::vector<std::string>& corpus, const StaticEmbeddingTable& seeds,
    const PretrainConfig& config);

// One vector (of length seeds.dim()) per token.
std::vector<std::vector<float>> encode(const ContextualEncoder& encoder,
                                       const StaticEmbeddingTable& seeds,
                                       std::span<const Token> tokens);

// Per-position loss for the configured objective, used by training and tests.
template <typename S>
S lmao_loss(PretrainLoss kind, std::span<const S> pred, std::span<const S> target, S* grad) {
  return kind == PretrainLoss::kCosine ? nn::cosine_loss(pred, target, grad)
                                       : nn::l2_loss(pred, target, grad);
}

void write_encoder(const ContextualEncoder& encoder, binio::Writer& out);
ContextualEncoder read_encoder(binio::Reader& in);
void save_encoder(const ContextualEncoder& encoder, const std::filesystem::path& path);
// `expected_dim`, when given, must match the encoder's output dimension.
ContextualEncoder load_encoder(const std::filesystem::path& path,
                               std::optional<int> expected_dim = std::nullopt);

}  // namespace medner
