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

// Small dense-network toolkit shared by the encoder and the tagger scorer.
//
// Layers are templates over the scalar type: models train and ship in float,
// while the gradient tests instantiate the same code in double.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "medner/random.hpp"

namespace medner::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A trainable tensor and its gradient accumulator. Biases are 1 x n.
template <typename S>
struct Param {
  Matrix<S> value;
  Matrix<S> grad;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix<S>::Zero(rows, cols)), grad(Matrix<S>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }

  template <typename T>
  Param<T> cast() const {
    Param<T> out;
    out.value = value.template cast<T>();
    out.grad = Matrix<T>::Zero(value.rows(), value.cols());
    return out;
  }
};

template <typename S>
void glorot_uniform(Matrix<S>& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(uniform(rng, -limit, limit));
}

template <typename S>
void normal_fill(Matrix<S>& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(normal(rng, 0.0, stddev));
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed, ordered list of parameters. The list must be the same
// (same order, same shapes) on every call.
template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Param<S>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Matrix<S>::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix<S>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const S lr = static_cast<S>(config_.learning_rate * std::sqrt(c2) / c1);
    const S b1 = static_cast<S>(config_.beta1);
    const S b2 = static_cast<S>(config_.beta2);
    const S eps = static_cast<S>(config_.epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      const Eigen::Index n = p.value.size();
      S* w = p.value.data();
      const S* g = p.grad.data();
      S* md = m.data();
      S* vd = v.data();
      for (Eigen::Index i = 0; i < n; ++i) {
        md[i] = b1 * md[i] + (S(1) - b1) * g[i];
        vd[i] = b2 * vd[i] + (S(1) - b2) * g[i] * g[i];
        w[i] -= lr * md[i] / (std::sqrt(vd[i]) + eps);
      }
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<Matrix<S>> m_, v_;
};

// 1 - cos(pred, target). Writes d loss / d pred into `grad` (may be null).
template <typename S>
S cosine_loss(std::span<const S> pred, std::span<const S> target, S* grad) {
  S dot = 0, pp = 0, tt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    dot += pred[i] * target[i];
    pp += pred[i] * pred[i];
    tt += target[i] * target[i];
  }
  const S eps = static_cast<S>(1e-12);
  const S np = std::sqrt(pp) + eps;
  const S nt = std::sqrt(tt) + eps;
  const S cos = dot / (np * nt);
  if (grad != nullptr) {
    for (std::size_t i = 0; i < pred.size(); ++i)
      grad[i] = -(target[i] / (np * nt) - cos * pred[i] / (np * np));
  }
  return S(1) - cos;
}

// Squared Euclidean distance. Writes d loss / d pred into `grad` (may be null).
template <typename S>
S l2_loss(std::span<const S> pred, std::span<const S> target, S* grad) {
  S loss = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const S d = pred[i] - target[i];
    loss += d * d;
    if (grad != nullptr) grad[i] = S(2) * d;
  }
  return loss;
}

// Inverted dropout mask: entries are 0 or 1/(1-rate).
template <typename S>
Matrix<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<S> mask(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = bernoulli(rng, rate) ? S(0) : keep;
  return mask;
}

}  // namespace medner::nn
