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

// Transition-constrained BILOU tagger.
//
// Each token is represented by a window of static vectors, shape features
// and (optionally) the contextual encoder output. A feed-forward scorer maps
// that representation plus an embedding of the previous action to one score
// per action; decoding takes the best legal action left to right.
//
// The token-to-vector components are frozen while the scorer trains.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "medner/bilou.hpp"
#include "medner/binio.hpp"
#include "medner/corpus.hpp"
#include "medner/embeddings.hpp"
#include "medner/encoder.hpp"
#include "medner/nn.hpp"

namespace medner {

struct ScorerConfig {
  int hidden = 64;
  int action_dim = 8;
  int context = 1;  // static-vector window radius

  bool operator==(const ScorerConfig&) const = default;
};

template <typename S>
class ScorerNet {
 public:
  using Mat = nn::Matrix<S>;

  ScorerNet() = default;
  ScorerNet(int feature_dim, int num_actions, const ScorerConfig& config)
      : feature_dim_(feature_dim),
        w1_(config.hidden, feature_dim + config.action_dim),
        b1_(1, config.hidden),
        w2_(num_actions, config.hidden),
        b2_(1, num_actions),
        action_emb_(num_actions + 1, config.action_dim) {}

  void initialize(Rng& rng) {
    nn::glorot_uniform(w1_.value, rng);
    nn::glorot_uniform(w2_.value, rng);
    nn::normal_fill(action_emb_.value, rng, 0.1);
  }

  int feature_dim() const { return feature_dim_; }
  int num_actions() const { return static_cast<int>(w2_.value.rows()); }
  int hidden() const { return static_cast<int>(w1_.value.rows()); }
  int action_dim() const { return static_cast<int>(action_emb_.value.cols()); }

  nn::Param<S>& w1() { return w1_; }
  nn::Param<S>& b1() { return b1_; }
  nn::Param<S>& w2() { return w2_; }
  nn::Param<S>& b2() { return b2_; }
  // Row 0 is the start-of-sentence history; row a + 1 embeds action a.
  nn::Param<S>& action_embedding() { return action_emb_; }
  const nn::Param<S>& w1() const { return w1_; }
  const nn::Param<S>& b1() const { return b1_; }
  const nn::Param<S>& w2() const { return w2_; }
  const nn::Param<S>& b2() const { return b2_; }
  const nn::Param<S>& action_embedding() const { return action_emb_; }

  std::vector<nn::Param<S>*> params() { return {&w1_, &b1_, &w2_, &b2_, &action_emb_}; }
  std::vector<const nn::Param<S>*> params() const { return {&w1_, &b1_, &w2_, &b2_, &action_emb_}; }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  void set_feature_dim(int f) { feature_dim_ = f; }

  template <typename T>
  ScorerNet<T> cast() const {
    ScorerNet<T> out;
    out.set_feature_dim(feature_dim_);
    auto dst = out.params();
    auto src = params();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<T>();
    return out;
  }

  struct Cache {
    Mat input;  // [features | previous-action embedding]
    Mat hidden;
    std::vector<int> prev;
  };

  // Batched forward used in training. prev[i] is the previous action of row
  // i, or -1 at the start of a sentence.
  Mat forward(const Mat& features, std::span<const int> prev, Cache* cache) const {
    const Eigen::Index n = features.rows();
    Mat input(n, w1_.value.cols());
    input.leftCols(feature_dim_) = features;
    for (Eigen::Index i = 0; i < n; ++i)
      input.block(i, feature_dim_, 1, action_dim()) = action_emb_.value.row(prev[static_cast<std::size_t>(i)] + 1);
    Mat hid = ((input * w1_.value.transpose()).rowwise() + b1_.value.row(0)).array().tanh().matrix();
    Mat scores = (hid * w2_.value.transpose()).rowwise() + b2_.value.row(0);
    if (cache) {
      cache->input = std::move(input);
      cache->hidden = std::move(hid);
      cache->prev.assign(prev.begin(), prev.end());
    }
    return scores;
  }

  void backward(const Cache& cache, const Mat& d_scores) {
    w2_.grad += d_scores.transpose() * cache.hidden;
    b2_.grad += d_scores.colwise().sum();
    Mat dh = d_scores * w2_.value;
    Mat dz = (dh.array() * (S(1) - cache.hidden.array().square())).matrix();
    w1_.grad += dz.transpose() * cache.input;
    b1_.grad += dz.colwise().sum();
    Mat d_input = dz * w1_.value.rightCols(action_dim());
    for (Eigen::Index i = 0; i < d_input.rows(); ++i)
      action_emb_.grad.row(cache.prev[static_cast<std::size_t>(i)] + 1) += d_input.row(i);
  }

  // Single-position scoring with a fixed summation order, so that a score
  // depends only on its own weight row. Used by decoding.
  void score(std::span<const S> features, int prev, std::span<S> hidden_buf, std::span<S> out) const {
    const int h_n = hidden();
    const int in_n = static_cast<int>(w1_.value.cols());
    const S* emb = action_emb_.value.data() + static_cast<Eigen::Index>(prev + 1) * action_dim();
    for (int h = 0; h < h_n; ++h) {
      const S* w = w1_.value.data() + static_cast<Eigen::Index>(h) * in_n;
      S acc = b1_.value(0, h);
      for (int f = 0; f < feature_dim_; ++f) acc += w[f] * features[f];
      for (int a = 0; a < action_dim(); ++a) acc += w[feature_dim_ + a] * emb[a];
      hidden_buf[h] = std::tanh(acc);
    }
    for (int a = 0; a < num_actions(); ++a) {
      const S* w = w2_.value.data() + static_cast<Eigen::Index>(a) * h_n;
      S acc = b2_.value(0, a);
      for (int h = 0; h < h_n; ++h) acc += w[h] * hidden_buf[h];
      out[a] = acc;
    }
  }

 private:
  int feature_dim_ = 0;
  nn::Param<S> w1_, b1_, w2_, b2_, action_emb_;
};

// Mean softmax cross-entropy restricted to legal actions. `masks` holds
// num_actions bytes per row. Writes d loss / d scores when `d_scores` is set.
template <typename S>
S masked_cross_entropy(const nn::Matrix<S>& scores, std::span<const std::uint8_t> masks,
                       std::span<const int> gold, nn::Matrix<S>* d_scores) {
  const Eigen::Index n = scores.rows();
  const Eigen::Index k = scores.cols();
  if (d_scores) d_scores->setZero(n, k);
  S total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint8_t* m = masks.data() + i * k;
    S mx = -std::numeric_limits<S>::infinity();
    for (Eigen::Index a = 0; a < k; ++a)
      if (m[a]) mx = std::max(mx, scores(i, a));
    S z = 0;
    for (Eigen::Index a = 0; a < k; ++a)
      if (m[a]) z += std::exp(scores(i, a) - mx);
    const int g = gold[static_cast<std::size_t>(i)];
    total += -(scores(i, g) - mx - std::log(z));
    if (d_scores) {
      for (Eigen::Index a = 0; a < k; ++a)
        if (m[a]) (*d_scores)(i, a) = std::exp(scores(i, a) - mx) / z / static_cast<S>(n);
      (*d_scores)(i, g) -= S(1) / static_cast<S>(n);
    }
  }
  return total / static_cast<S>(n);
}

class NerModel {
 public:
  NerModel() = default;

  const LabelScheme& scheme() const { return scheme_; }
  const ScorerConfig& config() const { return config_; }
  const StaticEmbeddingTable& table() const { return *table_; }
  std::shared_ptr<const StaticEmbeddingTable> shared_table() const { return table_; }
  const ContextualEncoder* encoder() const { return encoder_.get(); }
  std::shared_ptr<const ContextualEncoder> shared_encoder() const { return encoder_; }
  const ScorerNet<float>& scorer() const { return scorer_; }
  ScorerNet<float>& mutable_scorer() { return scorer_; }

  // Width of the per-token representation fed to the scorer.
  int feature_dim() const;

  // Token representations, one row per token.
  nn::Matrix<float> featurize(std::span<const Token> tokens) const;

  bool operator==(const NerModel& other) const;

 private:
  friend NerModel blank_model(LabelScheme, std::shared_ptr<const StaticEmbeddingTable>, const ScorerConfig&,
                              std::uint64_t);
  friend NerModel attach_encoder(const NerModel&, std::shared_ptr<const ContextualEncoder>);
  friend NerModel extend_labels(const NerModel&, const std::vector<std::string>&, std::uint64_t);
  friend NerModel read_model(binio::Reader&);

  LabelScheme scheme_;
  ScorerConfig config_;
  std::shared_ptr<const StaticEmbeddingTable> table_;
  std::shared_ptr<const ContextualEncoder> encoder_;
  ScorerNet<float> scorer_;
};

// Randomly initialised scorer over `scheme` with no contextual encoder.
NerModel blank_model(LabelScheme scheme, std::shared_ptr<const StaticEmbeddingTable> table,
                     const ScorerConfig& config, std::uint64_t seed);

// Adds the encoder output to the token representation. The new input
// columns start at zero, so scores are unchanged until training.
NerModel attach_encoder(const NerModel& model, std::shared_ptr<const ContextualEncoder> encoder);

// Grows the output layer by four actions per new label. Existing rows are
// copied verbatim and new rows drawn from `seed`.
NerModel extend_labels(const NerModel& base, const std::vector<std::string>& new_labels, std::uint64_t seed);

struct TrainConfig {
  int iterations = 100;
  double dropout = 0.2;
  int batch_size = 32;  // documents per update
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

void validate(const TrainConfig& config);

// Teacher-forced training over gold action histories. Returns a new model;
// `base` is not modified.
NerModel train(const NerModel& base, const Dataset& data, const TrainConfig& config);

// extend_labels followed by train. Throws if any new label is already known.
NerModel fine_tune_extend(const NerModel& base, const std::vector<std::string>& new_labels,
                          const Dataset& data, const TrainConfig& config);

// Index of the highest-scoring legal action; ties go to the lowest index.
int masked_argmax(std::span<const float> scores, std::span<const std::uint8_t> mask);

// Greedy legal decoding over a precomputed (n x num_actions) score matrix.
std::vector<int> greedy_actions(const nn::Matrix<float>& scores, const LabelScheme& scheme);

// Action scores for every position under a given action history (-1 = start).
nn::Matrix<float> score_sequence(const NerModel& model, const nn::Matrix<float>& features,
                                 std::span<const int> prev);

std::vector<int> decode_actions(const NerModel& model, std::span<const Token> tokens);
std::vector<EntitySpan> decode_greedy(const NerModel& model, std::span<const Token> tokens);

// Copies the dataset with every document's spans replaced by predictions.
Dataset predict(const NerModel& model, const Dataset& dataset);

void write_model(const NerModel& model, binio::Writer& out);
NerModel read_model(binio::Reader& in);
void save_model(const NerModel& model, const std::filesystem::path& path);
NerModel load_model(const std::filesystem::path& path);

}  // namespace medner
