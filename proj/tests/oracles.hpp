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

// Independent checks shared by the unit suites and the acceptance runner.
// Nothing here calls the library's own validity or gradient code paths when
// judging them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "medner/bilou.hpp"
#include "medner/embeddings.hpp"
#include "medner/encoder.hpp"
#include "medner/random.hpp"
#include "medner/tagger.hpp"

namespace oracle {

using medner::Rng;

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-7, std::abs(analytic) + std::abs(numeric));
}

// Central differences over every entry of every parameter. `loss(true)`
// must zero and refill the analytic gradients; `loss(false)` only evaluates.
template <typename ParamList>
double worst_param_error(ParamList params, const std::function<double(bool)>& loss, double h = 1e-6) {
  loss(true);
  std::vector<medner::nn::Matrix<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params[k]->value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      v.data()[i] = orig + h;
      const double up = loss(false);
      v.data()[i] = orig - h;
      const double down = loss(false);
      v.data()[i] = orig;
      worst = std::max(worst, rel_error(analytic[k].data()[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

// Skip-gram negative sampling over a 5-word vocabulary.
inline double sgns_gradient_error(std::uint64_t seed, int dim = 6) {
  Rng rng(seed);
  const int vocab = 5;
  std::vector<std::vector<double>> in(vocab, std::vector<double>(dim)), out(vocab, std::vector<double>(dim));
  for (auto* m : {&in, &out})
    for (auto& row : *m)
      for (auto& x : row) x = medner::normal(rng, 0.0, 0.7);
  const int center = 0, context = 1;
  const std::vector<int> negs = {2, 3, 4};

  auto loss = [&](std::vector<double>* d_center, std::vector<double>* d_context,
                  std::vector<std::vector<double>>* d_negs) {
    std::vector<std::span<const double>> neg_spans;
    std::vector<double*> d_neg_ptrs;
    for (std::size_t n = 0; n < negs.size(); ++n) {
      neg_spans.emplace_back(out[negs[n]]);
      d_neg_ptrs.push_back(d_negs ? (*d_negs)[n].data() : nullptr);
    }
    return medner::sgns_pair_loss<double>(in[center], out[context], neg_spans,
                                          d_center ? d_center->data() : nullptr,
                                          d_context ? d_context->data() : nullptr, d_neg_ptrs);
  };

  std::vector<double> dc(dim, 0.0), dx(dim, 0.0);
  std::vector<std::vector<double>> dn(negs.size(), std::vector<double>(dim, 0.0));
  loss(&dc, &dx, &dn);

  const double h = 1e-6;
  double worst = 0.0;
  auto probe = [&](std::vector<double>& vec, const std::vector<double>& grad) {
    for (int i = 0; i < dim; ++i) {
      const double orig = vec[i];
      vec[i] = orig + h;
      const double up = loss(nullptr, nullptr, nullptr);
      vec[i] = orig - h;
      const double down = loss(nullptr, nullptr, nullptr);
      vec[i] = orig;
      worst = std::max(worst, rel_error(grad[i], (up - down) / (2 * h)));
    }
  };
  probe(in[center], dc);
  probe(out[context], dx);
  for (std::size_t n = 0; n < negs.size(); ++n) probe(out[negs[n]], dn[n]);
  return worst;
}

// Two sentences through a depth-2 encoder, cosine or L2 loss at masked rows.
inline double encoder_gradient_error(std::uint64_t seed, medner::PretrainLoss kind) {
  Rng rng(seed);
  medner::EncoderConfig c;
  c.input_dim = 4;
  c.dim = 6;
  c.depth = 2;
  c.window = 1;
  medner::EncoderNet<double> net(c);
  net.initialize(rng);
  for (auto* p : net.params())
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.3 * medner::normal(rng);
  const int rows = 7, in_cols = c.input_dim + medner::kShapeFeatures;
  medner::nn::Matrix<double> x(rows, in_cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = medner::normal(rng);
  medner::nn::Matrix<double> target(rows, c.input_dim);
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = medner::normal(rng);
  const std::vector<medner::Segment> segs = {{0, 4}, {4, 3}};
  std::vector<bool> masked(rows, false);
  masked[1] = masked[5] = true;

  auto loss = [&](bool with_grad) {
    typename medner::EncoderNet<double>::Cache cache;
    const auto y = net.forward(x, segs, masked, with_grad ? &cache : nullptr);
    medner::nn::Matrix<double> dy = medner::nn::Matrix<double>::Zero(rows, c.input_dim);
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
      if (!masked[r]) continue;
      total += medner::lmao_loss<double>(kind, {y.data() + r * c.input_dim, static_cast<std::size_t>(c.input_dim)},
                                         {target.data() + r * c.input_dim, static_cast<std::size_t>(c.input_dim)},
                                         dy.data() + r * c.input_dim);
    }
    if (with_grad) {
      net.zero_grad();
      net.backward(cache, dy);
    }
    return total;
  };
  return worst_param_error(net.params(), loss);
}

// Masked cross-entropy through the transition scorer.
inline double scorer_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  const int features = 5, labels = 2, actions = 4 * labels + 1, n = 6;
  medner::ScorerConfig cfg;
  cfg.hidden = 7;
  cfg.action_dim = 3;
  medner::ScorerNet<double> net(features, actions, cfg);
  net.initialize(rng);
  for (auto* p : net.params())
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.2 * medner::normal(rng);
  medner::nn::Matrix<double> x(n, features);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = medner::normal(rng);
  std::vector<int> prev(n), gold(n);
  std::vector<std::uint8_t> masks(static_cast<std::size_t>(n * actions));
  for (int i = 0; i < n; ++i) {
    prev[i] = static_cast<int>(medner::uniform_index(rng, actions + 1)) - 1;
    gold[i] = static_cast<int>(medner::uniform_index(rng, actions));
    for (int a = 0; a < actions; ++a) masks[i * actions + a] = medner::bernoulli(rng, 0.6);
    masks[i * actions + gold[i]] = 1;
  }
  auto loss = [&](bool with_grad) {
    typename medner::ScorerNet<double>::Cache cache;
    const auto scores = net.forward(x, prev, with_grad ? &cache : nullptr);
    medner::nn::Matrix<double> d;
    const double l = medner::masked_cross_entropy<double>(scores, masks, gold, with_grad ? &d : nullptr);
    if (with_grad) {
      net.zero_grad();
      net.backward(cache, d);
    }
    return l;
  };
  return worst_param_error(net.params(), loss);
}

// BILOU well-formedness written directly from the tag rules: after B or I the
// next tag must be I or L of the same label, the sequence must not end inside
// an entity, and L/I never start one.
inline bool bilou_well_formed(const std::vector<int>& actions, int num_labels) {
  int open = -1;
  for (int a : actions) {
    if (a < 0 || a >= 4 * num_labels + 1) return false;
    const int move = a == 0 ? 0 : (a - 1) % 4 + 1;  // 1 B, 2 I, 3 L, 4 U
    const int label = a == 0 ? -1 : (a - 1) / 4;
    if (open >= 0) {
      if ((move != 2 && move != 3) || label != open) return false;
      if (move == 3) open = -1;
    } else {
      if (move == 2 || move == 3) return false;
      if (move == 1) open = label;
    }
  }
  return open < 0;
}

inline std::vector<std::string> label_names(int n) {
  static const std::vector<std::string> all = {"CHEMICAL", "DISEASE", "SYMPTOM", "DOSAGE", "ROUTE", "FREQ"};
  return {all.begin(), all.begin() + n};
}

// Fraction of fuzzed greedy decodes that are well formed.
inline double fuzz_decodes(std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t ok = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const int labels = 1 + static_cast<int>(medner::uniform_index(rng, 4));
    const int len = 1 + static_cast<int>(medner::uniform_index(rng, 12));
    const medner::LabelScheme scheme(label_names(labels));
    medner::nn::Matrix<float> scores(len, scheme.num_actions());
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      // Some ties on purpose.
      scores.data()[i] = medner::bernoulli(rng, 0.1) ? 0.5f : static_cast<float>(medner::normal(rng, 0.0, 3.0));
    }
    const auto actions = medner::greedy_actions(scores, scheme);
    if (static_cast<int>(actions.size()) == len && bilou_well_formed(actions, labels)) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(trials);
}

// Random tokenised sentence with random non-overlapping token-aligned spans.
struct Layout {
  std::vector<medner::Token> tokens;
  std::vector<medner::EntitySpan> spans;
};

inline Layout random_layout(Rng& rng, const std::vector<std::string>& labels) {
  Layout out;
  const int n = 1 + static_cast<int>(medner::uniform_index(rng, 15));
  std::string text;
  for (int i = 0; i < n; ++i) {
    if (i) text += ' ';
    const std::size_t start = text.size();
    text += "w" + std::to_string(medner::uniform_index(rng, 1000));
    out.tokens.push_back({text.substr(start), start, text.size()});
  }
  int i = 0;
  while (i < n) {
    if (medner::bernoulli(rng, 0.4)) {
      const int len = 1 + static_cast<int>(medner::uniform_index(rng, std::min(4, n - i)));
      const auto& label = labels[medner::uniform_index(rng, labels.size())];
      out.spans.push_back({out.tokens[i].start, out.tokens[i + len - 1].end, label});
      i += len;
    } else {
      ++i;
    }
  }
  return out;
}

// Count of layouts that survive spans -> actions -> spans unchanged.
inline std::size_t round_trip_layouts(std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  const auto labels = label_names(4);
  const medner::LabelScheme scheme(labels);
  std::size_t ok = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Layout l = random_layout(rng, labels);
    const auto actions = medner::gold_actions(l.tokens, l.spans, scheme);
    if (medner::actions_to_spans(l.tokens, actions, scheme) == l.spans) ++ok;
  }
  return ok;
}

inline std::shared_ptr<const medner::StaticEmbeddingTable> random_table(const std::vector<std::string>& words,
                                                                         int dim, std::uint64_t seed) {
  Rng rng(seed);
  medner::nn::Matrix<float> m(static_cast<Eigen::Index>(words.size()) + 1, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(medner::normal(rng));
  return std::make_shared<const medner::StaticEmbeddingTable>(words, m, true);
}

// Number of random inputs (out of `trials`) on which the extended model's
// old-action scores equal the base model's bit for bit.
inline std::size_t preserved_inputs(std::size_t trials, std::uint64_t seed) {
  const std::vector<std::string> words = {"aspirin", "fever", "mg", "with", "patient", "cough", "5"};
  auto table = random_table(words, 8, seed);
  const auto base = medner::blank_model(medner::LabelScheme({"DISEASE", "CHEMICAL"}), table, {}, seed + 1);
  const auto ext = medner::extend_labels(base, {"SYMPTOM", "DOSAGE"}, seed + 2);
  const int old_actions = base.scheme().num_actions();
  Rng rng(seed + 3);
  std::size_t ok = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const int len = 1 + static_cast<int>(medner::uniform_index(rng, 10));
    std::string text;
    for (int i = 0; i < len; ++i) {
      if (i) text += ' ';
      // Out-of-vocabulary words on purpose now and then.
      text += medner::bernoulli(rng, 0.2) ? "zz" + std::to_string(i) : words[medner::uniform_index(rng, words.size())];
    }
    const auto tokens = medner::tokenize(text);
    std::vector<int> prev(tokens.size());
    for (auto& p : prev) p = static_cast<int>(medner::uniform_index(rng, old_actions + 1)) - 1;
    const auto a = medner::score_sequence(base, base.featurize(tokens), prev);
    const auto b = medner::score_sequence(ext, ext.featurize(tokens), prev);
    bool same = b.cols() == old_actions + 8;
    for (Eigen::Index r = 0; same && r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < old_actions; ++c)
        if (a(r, c) != b(r, c)) same = false;
    if (same) ++ok;
  }
  return ok;
}

}  // namespace oracle
