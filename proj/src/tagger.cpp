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

#include "medner/tagger.hpp"

#include <fstream>
#include <numeric>

#include "medner/error.hpp"
#include "medner/random.hpp"

namespace medner {
namespace {

constexpr binio::Magic kModelMagic = {'M', 'N', 'E', 'R', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

struct PreparedDoc {
  nn::Matrix<float> features;
  std::vector<int> gold;
  std::vector<int> prev;
  std::vector<std::uint8_t> masks;
};

PreparedDoc prepare(const NerModel& model, const Document& doc) {
  const LabelScheme& scheme = model.scheme();
  PreparedDoc p;
  p.features = model.featurize(doc.tokens);
  p.gold = gold_actions(doc.tokens, doc.spans, scheme);
  const std::size_t n = doc.tokens.size();
  const auto k = static_cast<std::size_t>(scheme.num_actions());
  p.masks.assign(n * k, 0);
  p.prev.resize(n);
  TransitionState state;
  for (std::size_t i = 0; i < n; ++i) {
    const bool last = i + 1 == n;
    p.prev[i] = i == 0 ? -1 : p.gold[i - 1];
    valid_action_mask(state, scheme.num_labels(), last, std::span<std::uint8_t>(p.masks.data() + i * k, k));
    state = apply_action(state, scheme, p.gold[i], last);
  }
  return p;
}

}  // namespace

int NerModel::feature_dim() const {
  const int d = table_ ? table_->dim() : 0;
  return (2 * config_.context + 1) * d + kShapeFeatures + (encoder_ ? encoder_->dim() : 0);
}

nn::Matrix<float> NerModel::featurize(std::span<const Token> tokens) const {
  const int d = table_->dim();
  const int c = config_.context;
  const auto n = static_cast<Eigen::Index>(tokens.size());
  nn::Matrix<float> f = nn::Matrix<float>::Zero(n, feature_dim());
  if (n == 0) return f;
  const nn::Matrix<float> x = static_inputs(*table_, tokens);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int o = -c; o <= c; ++o) {
      const Eigen::Index j = i + o;
      if (j < 0 || j >= n) continue;
      f.block(i, (o + c) * d, 1, d) = x.block(j, 0, 1, d);
    }
    f.block(i, (2 * c + 1) * d, 1, kShapeFeatures) = x.block(i, d, 1, kShapeFeatures);
  }
  if (encoder_) f.rightCols(encoder_->dim()) = encoder_->encode_inputs(x);
  return f;
}

bool NerModel::operator==(const NerModel& other) const {
  if (!(scheme_ == other.scheme_) || !(config_ == other.config_)) return false;
  if (!table_ || !other.table_ || !(*table_ == *other.table_)) return false;
  if (static_cast<bool>(encoder_) != static_cast<bool>(other.encoder_)) return false;
  if (encoder_ && !(*encoder_ == *other.encoder_)) return false;
  if (scorer_.feature_dim() != other.scorer_.feature_dim()) return false;
  const auto a = scorer_.params();
  const auto b = other.scorer_.params();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->value.rows() != b[i]->value.rows() || a[i]->value.cols() != b[i]->value.cols()) return false;
    if (a[i]->value != b[i]->value) return false;
  }
  return true;
}

NerModel blank_model(LabelScheme scheme, std::shared_ptr<const StaticEmbeddingTable> table,
                     const ScorerConfig& config, std::uint64_t seed) {
  if (!table) throw InvalidArgument("a blank model needs a static embedding table");
  if (scheme.num_labels() == 0) throw InvalidArgument("a model needs at least one entity label");
  if (config.hidden < 1 || config.action_dim < 1 || config.context < 0)
    throw InvalidArgument("scorer config requires hidden >= 1, action_dim >= 1, context >= 0");
  NerModel m;
  m.scheme_ = std::move(scheme);
  m.config_ = config;
  m.table_ = std::move(table);
  m.scorer_ = ScorerNet<float>(m.feature_dim(), m.scheme_.num_actions(), config);
  Rng rng(seed);
  m.scorer_.initialize(rng);
  return m;
}

NerModel attach_encoder(const NerModel& model, std::shared_ptr<const ContextualEncoder> encoder) {
  if (!encoder) throw InvalidArgument("no encoder given");
  if (model.encoder_) throw InvalidArgument("model already has a contextual encoder");
  if (encoder->config().input_dim != model.table().dim())
    throw InvalidArgument("encoder expects static vectors of dim " + std::to_string(encoder->config().input_dim) +
                          ", model table has dim " + std::to_string(model.table().dim()));
  NerModel m = model;
  m.encoder_ = std::move(encoder);
  const int old_f = model.scorer_.feature_dim();
  const int new_f = m.feature_dim();
  const int a = model.scorer_.action_dim();
  const auto& w1 = model.scorer_.w1().value;
  nn::Matrix<float> grown = nn::Matrix<float>::Zero(w1.rows(), new_f + a);
  grown.leftCols(old_f) = w1.leftCols(old_f);
  grown.rightCols(a) = w1.rightCols(a);
  m.scorer_.w1().value = std::move(grown);
  m.scorer_.w1().zero_grad();
  m.scorer_.set_feature_dim(new_f);
  return m;
}

NerModel extend_labels(const NerModel& base, const std::vector<std::string>& new_labels, std::uint64_t seed) {
  if (new_labels.empty()) throw InvalidArgument("no new labels given");
  NerModel m = base;
  m.scheme_ = base.scheme_.extended(new_labels);
  const auto& old = base.scorer_;
  ScorerNet<float> s(old.feature_dim(), m.scheme_.num_actions(), base.config_);
  const Eigen::Index old_a = old.num_actions();
  const Eigen::Index new_a = s.num_actions();
  Rng rng(seed);

  s.w1().value = old.w1().value;
  s.b1().value = old.b1().value;

  nn::Matrix<float> fresh(new_a - old_a, old.hidden());
  nn::glorot_uniform(fresh, rng);
  s.w2().value.topRows(old_a) = old.w2().value;
  s.w2().value.bottomRows(new_a - old_a) = fresh;
  s.b2().value.leftCols(old_a) = old.b2().value;

  nn::Matrix<float> emb(new_a - old_a, old.action_dim());
  nn::normal_fill(emb, rng, 0.1);
  s.action_embedding().value.topRows(old_a + 1) = old.action_embedding().value;
  s.action_embedding().value.bottomRows(new_a - old_a) = emb;
  for (auto* p : s.params()) p->zero_grad();
  m.scorer_ = std::move(s);
  return m;
}

void validate(const TrainConfig& c) {
  if (c.iterations < 1) throw InvalidArgument("training needs iterations >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
  if (c.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
}

NerModel train(const NerModel& base, const Dataset& data, const TrainConfig& config) {
  validate(config);
  if (data.empty()) throw InvalidArgument("cannot train on an empty dataset");
  for (const Document& d : data.documents)
    for (const EntitySpan& s : d.spans)
      if (!base.scheme().label_index(s.label))
        throw InvalidArgument("document '" + d.id + "': label '" + s.label + "' is not in the model scheme");

  std::vector<PreparedDoc> docs;
  docs.reserve(data.size());
  for (const Document& d : data.documents)
    if (!d.tokens.empty()) docs.push_back(prepare(base, d));
  if (docs.empty()) throw InvalidArgument("training data has no tokens");

  NerModel model = base;
  ScorerNet<float>& net = model.mutable_scorer();
  for (auto* p : net.params()) p->zero_grad();
  nn::Adam<float> adam(nn::AdamConfig{config.learning_rate});
  Rng rng(config.seed);
  const int f = net.feature_dim();
  const int k = net.num_actions();

  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Matrix<float> features;
  std::vector<int> prev, gold;
  std::vector<std::uint8_t> masks;
  nn::Matrix<float> d_scores;
  ScorerNet<float>::Cache cache;

  for (int it = 0; it < config.iterations; ++it) {
    if (config.shuffle) shuffle(order, rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      Eigen::Index rows = 0;
      for (std::size_t i = b; i < e; ++i) rows += docs[order[i]].features.rows();
      features.resize(rows, f);
      prev.clear();
      gold.clear();
      masks.clear();
      Eigen::Index offset = 0;
      for (std::size_t i = b; i < e; ++i) {
        const PreparedDoc& p = docs[order[i]];
        features.middleRows(offset, p.features.rows()) = p.features;
        offset += p.features.rows();
        prev.insert(prev.end(), p.prev.begin(), p.prev.end());
        gold.insert(gold.end(), p.gold.begin(), p.gold.end());
        masks.insert(masks.end(), p.masks.begin(), p.masks.end());
      }
      if (config.dropout > 0.0)
        features.array() *= nn::dropout_mask<float>(rows, f, config.dropout, rng).array();
      const nn::Matrix<float> scores = net.forward(features, prev, &cache);
      masked_cross_entropy<float>(scores, masks, gold, &d_scores);
      net.zero_grad();
      net.backward(cache, d_scores);
      adam.step(net.params());
    }
  }
  (void)k;
  for (auto* p : net.params()) p->zero_grad();
  return model;
}

NerModel fine_tune_extend(const NerModel& base, const std::vector<std::string>& new_labels, const Dataset& data,
                          const TrainConfig& config) {
  const NerModel extended = extend_labels(base, new_labels, derive_seed(config.seed, 0xE7E7));
  return train(extended, data, config);
}

int masked_argmax(std::span<const float> scores, std::span<const std::uint8_t> mask) {
  int best = -1;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (!mask[a]) continue;
    if (best < 0 || scores[a] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  }
  return best;
}

std::vector<int> greedy_actions(const nn::Matrix<float>& scores, const LabelScheme& scheme) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (scores.cols() != scheme.num_actions()) throw InvalidArgument("score matrix width must equal action count");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(scheme.num_actions()));
  std::vector<int> actions;
  actions.reserve(n);
  TransitionState state;
  for (std::size_t i = 0; i < n; ++i) {
    const bool last = i + 1 == n;
    valid_action_mask(state, scheme.num_labels(), last, mask);
    const int a = masked_argmax({scores.data() + i * scores.cols(), static_cast<std::size_t>(scores.cols())}, mask);
    actions.push_back(a);
    state = apply_action(state, scheme, a, last);
  }
  return actions;
}

nn::Matrix<float> score_sequence(const NerModel& model, const nn::Matrix<float>& features, std::span<const int> prev) {
  const auto& net = model.scorer();
  nn::Matrix<float> out(features.rows(), net.num_actions());
  std::vector<float> hidden(static_cast<std::size_t>(net.hidden()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    net.score({features.data() + i * features.cols(), static_cast<std::size_t>(features.cols())},
              prev[static_cast<std::size_t>(i)], hidden,
              {out.data() + i * out.cols(), static_cast<std::size_t>(out.cols())});
  }
  return out;
}

std::vector<int> decode_actions(const NerModel& model, std::span<const Token> tokens) {
  std::vector<int> actions;
  if (tokens.empty()) return actions;
  const LabelScheme& scheme = model.scheme();
  const auto& net = model.scorer();
  const nn::Matrix<float> features = model.featurize(tokens);
  std::vector<float> hidden(static_cast<std::size_t>(net.hidden()));
  std::vector<float> scores(static_cast<std::size_t>(net.num_actions()));
  std::vector<std::uint8_t> mask(scores.size());
  TransitionState state;
  int prev = -1;
  actions.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool last = i + 1 == tokens.size();
    net.score({features.data() + static_cast<Eigen::Index>(i) * features.cols(), static_cast<std::size_t>(features.cols())},
              prev, hidden, scores);
    valid_action_mask(state, scheme.num_labels(), last, mask);
    const int a = masked_argmax(scores, mask);
    actions.push_back(a);
    state = apply_action(state, scheme, a, last);
    prev = a;
  }
  return actions;
}

std::vector<EntitySpan> decode_greedy(const NerModel& model, std::span<const Token> tokens) {
  const auto actions = decode_actions(model, tokens);
  return actions_to_spans(tokens, actions, model.scheme());
}

Dataset predict(const NerModel& model, const Dataset& dataset) {
  Dataset out = dataset;
  for (const auto& l : model.scheme().labels()) out.label_set.insert(l);
  for (Document& d : out.documents) d.spans = decode_greedy(model, d.tokens);
  return out;
}

void write_model(const NerModel& model, binio::Writer& out) {
  out.magic(kModelMagic);
  out.u32(kModelVersion);
  out.u32(static_cast<std::uint32_t>(model.scheme().num_labels()));
  for (const auto& l : model.scheme().labels()) out.string(l);
  out.u32(static_cast<std::uint32_t>(model.config().hidden));
  out.u32(static_cast<std::uint32_t>(model.config().action_dim));
  out.u32(static_cast<std::uint32_t>(model.config().context));
  write_embeddings(model.table(), out);
  out.u8(model.encoder() ? 1 : 0);
  if (model.encoder()) write_encoder(*model.encoder(), out);
  out.u32(static_cast<std::uint32_t>(model.scorer().feature_dim()));
  for (const auto* p : model.scorer().params()) out.matrix(p->value);
}

NerModel read_model(binio::Reader& in) {
  in.expect_magic(kModelMagic, "model");
  const std::uint32_t version = in.u32();
  if (version != kModelVersion)
    throw FormatError("model format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kModelVersion) + ")");
  const std::uint32_t n_labels = in.u32();
  if (n_labels == 0 || n_labels > 4096) throw FormatError("corrupt scheme block");
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < n_labels; ++i) labels.push_back(in.string());
  NerModel m;
  try {
    m.scheme_ = LabelScheme(labels);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("corrupt scheme block: ") + e.what());
  }
  m.config_.hidden = static_cast<int>(in.u32());
  m.config_.action_dim = static_cast<int>(in.u32());
  m.config_.context = static_cast<int>(in.u32());
  if (m.config_.hidden < 1 || m.config_.hidden > 65536 || m.config_.action_dim < 1 || m.config_.action_dim > 65536 ||
      m.config_.context < 0 || m.config_.context > 64)
    throw FormatError("corrupt scorer config");
  m.table_ = std::make_shared<const StaticEmbeddingTable>(read_embeddings(in));
  const std::uint8_t has_encoder = in.u8();
  if (has_encoder > 1) throw FormatError("corrupt representation block");
  if (has_encoder) {
    auto enc = read_encoder(in);
    if (enc.config().input_dim != m.table_->dim()) throw FormatError("encoder does not match the embedding table");
    m.encoder_ = std::make_shared<const ContextualEncoder>(std::move(enc));
  }
  const auto feature_dim = static_cast<int>(in.u32());
  if (feature_dim != m.feature_dim()) throw FormatError("scorer feature width does not match representation");
  m.scorer_ = ScorerNet<float>(feature_dim, m.scheme_.num_actions(), m.config_);
  for (auto* p : m.scorer_.params()) p->value = in.matrix(p->value.rows(), p->value.cols(), "scorer");
  return m;
}

void save_model(const NerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  binio::Writer w(out);
  write_model(model, w);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

NerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  binio::Reader r(in);
  try {
    NerModel m = read_model(r);
    r.expect_end("model file");
    return m;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace medner
