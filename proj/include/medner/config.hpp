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

// JSON forms of the training configs. Readers reject unknown keys and
// wrong types so that a typo in a config file fails loudly.

#include <json.hpp>

#include "medner/embeddings.hpp"
#include "medner/encoder.hpp"
#include "medner/harness.hpp"
#include "medner/synth.hpp"
#include "medner/tagger.hpp"

namespace medner {

using Json = nlohmann::ordered_json;

Json to_json(const SkipGramConfig& c);
Json to_json(const PretrainConfig& c);
Json to_json(const ScorerConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const SynthSpec& s);
Json to_json(const ExperimentSpec& s);

// Each reader starts from `base` and overrides the keys present in `j`.
// Throws InvalidArgument naming the offending key.
SkipGramConfig skipgram_from_json(const Json& j, SkipGramConfig base = {});
PretrainConfig pretrain_from_json(const Json& j, PretrainConfig base = {});
ScorerConfig scorer_from_json(const Json& j, ScorerConfig base = {});
TrainConfig train_from_json(const Json& j, TrainConfig base = {});
SynthSpec synth_from_json(const Json& j, SynthSpec base = {});
ExperimentSpec experiment_from_json(const Json& j, ExperimentSpec base = default_experiment_spec());

}  // namespace medner
