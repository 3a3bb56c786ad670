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

#include "medner/config.hpp"

#include <functional>
#include <map>

#include "medner/error.hpp"

namespace medner {
namespace {

// Applies `j` key by key through the handlers; anything unhandled is an error.
void apply(const Json& j, const std::string& what,
           const std::map<std::string, std::function<void(const Json&)>>& handlers) {
  if (!j.is_object()) throw InvalidArgument(what + " config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw InvalidArgument("unknown " + what + " config key '" + key + "'");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception&) {
      throw InvalidArgument(what + " config key '" + key + "' has the wrong type");
    }
  }
}

template <typename T>
std::function<void(const Json&)> set(T& field) {
  return [&field](const Json& v) {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw nlohmann::json::type_error::create(302, "not an integer", nullptr);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw nlohmann::json::type_error::create(302, "not a number", nullptr);
    }
    field = v.get<T>();
  };
}

std::string loss_name(PretrainLoss l) { return l == PretrainLoss::kCosine ? "cosine" : "l2"; }

PretrainLoss parse_loss(const std::string& s) {
  if (s == "cosine") return PretrainLoss::kCosine;
  if (s == "l2" || s == "L2") return PretrainLoss::kL2;
  throw InvalidArgument("pretrain loss must be 'cosine' or 'l2', got '" + s + "'");
}

}  // namespace

Json to_json(const SkipGramConfig& c) {
  return {{"dim", c.dim},           {"window", c.window},   {"negative", c.negative},
          {"epochs", c.epochs},     {"learning_rate", c.learning_rate}, {"min_count", c.min_count},
          {"seed", c.seed}};
}

Json to_json(const PretrainConfig& c) {
  return {{"epochs", c.epochs},     {"patience", c.patience},     {"min_delta", c.min_delta},
          {"dropout", c.dropout},   {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"mask_rate", c.mask_rate}, {"loss", loss_name(c.loss)}, {"dim", c.dim},
          {"depth", c.depth},       {"window", c.window},         {"seed", c.seed}};
}

Json to_json(const ScorerConfig& c) {
  return {{"hidden", c.hidden}, {"action_dim", c.action_dim}, {"context", c.context}};
}

Json to_json(const TrainConfig& c) {
  return {{"iterations", c.iterations}, {"dropout", c.dropout},   {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"seed", c.seed}, {"shuffle", c.shuffle}};
}

Json to_json(const SynthSpec& s) {
  Json counts = Json::object();
  for (const auto& [k, v] : s.label_counts) counts[k] = v;
  return {{"documents", s.documents},
          {"label_counts", counts},
          {"annotate", std::vector<std::string>(s.annotate.begin(), s.annotate.end())},
          {"raw_sentences", s.raw_sentences},
          {"zipf_exponent", s.zipf_exponent},
          {"cue_frame_rate", s.cue_frame_rate},
          {"ambiguous_rate", s.ambiguous_rate},
          {"id_prefix", s.id_prefix},
          {"seed", s.seed}};
}

Json to_json(const ExperimentSpec& s) {
  std::vector<std::string> methods;
  for (Method m : s.methods) methods.push_back(method_name(m));
  return {{"methods", methods},
          {"fractions", s.fractions},
          {"seeds", s.seeds},
          {"target_path", s.target_path.string()},
          {"source_path", s.source_path.string()},
          {"corpus_path", s.corpus_path.string()},
          {"data_seed", s.data_seed},
          {"test_ratio", s.test_ratio},
          {"split_seed", s.split_seed},
          {"source_labels", s.source_labels},
          {"source_holdout", s.source_holdout},
          {"source_gate", s.source_gate},
          {"embeddings", to_json(s.embeddings)},
          {"pretrain", to_json(s.pretrain)},
          {"scorer", to_json(s.scorer)},
          {"train", to_json(s.train)},
          {"source_train", to_json(s.source_train)},
          {"threads", s.threads}};
}

SkipGramConfig skipgram_from_json(const Json& j, SkipGramConfig c) {
  apply(j, "embeddings",
        {{"dim", set(c.dim)},       {"window", set(c.window)},   {"negative", set(c.negative)},
         {"epochs", set(c.epochs)}, {"learning_rate", set(c.learning_rate)}, {"min_count", set(c.min_count)},
         {"seed", set(c.seed)}});
  return c;
}

PretrainConfig pretrain_from_json(const Json& j, PretrainConfig c) {
  apply(j, "pretrain",
        {{"epochs", set(c.epochs)},
         {"patience", set(c.patience)},
         {"min_delta", set(c.min_delta)},
         {"dropout", set(c.dropout)},
         {"learning_rate", set(c.learning_rate)},
         {"batch_size", set(c.batch_size)},
         {"mask_rate", set(c.mask_rate)},
         {"loss", [&](const Json& v) { c.loss = parse_loss(v.get<std::string>()); }},
         {"dim", set(c.dim)},
         {"depth", set(c.depth)},
         {"window", set(c.window)},
         {"seed", set(c.seed)}});
  return c;
}

ScorerConfig scorer_from_json(const Json& j, ScorerConfig c) {
  apply(j, "scorer", {{"hidden", set(c.hidden)}, {"action_dim", set(c.action_dim)}, {"context", set(c.context)}});
  return c;
}

TrainConfig train_from_json(const Json& j, TrainConfig c) {
  apply(j, "train",
        {{"iterations", set(c.iterations)}, {"dropout", set(c.dropout)}, {"batch_size", set(c.batch_size)},
         {"learning_rate", set(c.learning_rate)}, {"seed", set(c.seed)}, {"shuffle", set(c.shuffle)}});
  return c;
}

SynthSpec synth_from_json(const Json& j, SynthSpec s) {
  apply(j, "synth",
        {{"documents", set(s.documents)},
         {"label_counts",
          [&](const Json& v) {
            s.label_counts.clear();
            for (const auto& [k, n] : v.items()) s.label_counts[k] = n.get<std::size_t>();
          }},
         {"annotate",
          [&](const Json& v) {
            auto labels = v.get<std::vector<std::string>>();
            s.annotate = std::set<std::string>(labels.begin(), labels.end());
          }},
         {"raw_sentences", set(s.raw_sentences)},
         {"zipf_exponent", set(s.zipf_exponent)},
         {"cue_frame_rate", set(s.cue_frame_rate)},
         {"ambiguous_rate", set(s.ambiguous_rate)},
         {"id_prefix", set(s.id_prefix)},
         {"seed", set(s.seed)}});
  return s;
}

ExperimentSpec experiment_from_json(const Json& j, ExperimentSpec s) {
  auto path = [](std::filesystem::path& p) {
    return [&p](const Json& v) { p = v.get<std::string>(); };
  };
  apply(j, "experiment",
        {{"methods",
          [&](const Json& v) {
            s.methods.clear();
            for (const auto& m : v) s.methods.push_back(parse_method(m.get<std::string>()));
          }},
         {"fractions", set(s.fractions)},
         {"seeds", set(s.seeds)},
         {"target_path", path(s.target_path)},
         {"source_path", path(s.source_path)},
         {"corpus_path", path(s.corpus_path)},
         {"data_seed", set(s.data_seed)},
         {"test_ratio", set(s.test_ratio)},
         {"split_seed", set(s.split_seed)},
         {"source_labels", set(s.source_labels)},
         {"source_holdout", set(s.source_holdout)},
         {"source_gate", set(s.source_gate)},
         {"embeddings", [&](const Json& v) { s.embeddings = skipgram_from_json(v, s.embeddings); }},
         {"pretrain", [&](const Json& v) { s.pretrain = pretrain_from_json(v, s.pretrain); }},
         {"scorer", [&](const Json& v) { s.scorer = scorer_from_json(v, s.scorer); }},
         {"train", [&](const Json& v) { s.train = train_from_json(v, s.train); }},
         {"source_train", [&](const Json& v) { s.source_train = train_from_json(v, s.source_train); }},
         {"threads", set(s.threads)}});
  return s;
}

}  // namespace medner
