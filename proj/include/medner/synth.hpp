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

// Templated pseudo-clinical text with known entity annotations.
//
// Mentions are drawn from fixed per-label lexicons and placed into clause
// templates. A set of ambiguous words reads as DISEASE or SYMPTOM depending
// on a cue verb a few tokens to the left ("diagnosed last year with X" versus
// "complained last week with X"), so resolving them needs more than the
// immediate neighbours.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "medner/corpus.hpp"

namespace medner {

struct SynthSpec {
  std::size_t documents = 100;
  // Exact number of mentions to place per label. DOSAGE mentions attach to
  // CHEMICAL mentions where possible.
  std::map<std::string, std::size_t> label_counts = {
      {"CHEMICAL", 40}, {"DISEASE", 30}, {"SYMPTOM", 60}, {"DOSAGE", 10}};
  // Labels that receive spans; other mentions stay in the text unannotated.
  // Empty means every label.
  std::set<std::string> annotate;
  std::size_t raw_sentences = 0;
  // Lexicon entries are drawn with probability proportional to
  // 1 / rank^zipf_exponent; 0 is uniform.
  double zipf_exponent = 1.0;
  // Share of DISEASE and SYMPTOM mentions placed in a cue frame, and the
  // share of those that use an ambiguous word.
  double cue_frame_rate = 0.35;
  double ambiguous_rate = 0.6;
  std::string id_prefix = "syn";
  std::uint64_t seed = 0;
};

struct SynthCorpus {
  std::vector<std::string> raw;  // unannotated sentences
  Dataset dataset;
};

// Deterministic in the spec. Throws InvalidArgument when documents == 0 or a
// label has no lexicon.
SynthCorpus generate_synthetic_corpus(const SynthSpec& spec);

// Lexicon of a label ("AMBIGUOUS" for the cue-dependent words).
const std::vector<std::string>& synth_lexicon(const std::string& label);
const std::vector<std::string>& synth_labels();

// Target benchmark: 900 documents with mention counts in the proportions of
// the four-label clinical set, Zipf-skewed lexicon use.
SynthSpec benchmark_target_spec(std::uint64_t seed);
// Source domain: DISEASE and CHEMICAL annotated, uniform lexicon coverage.
SynthSpec benchmark_source_spec(std::uint64_t seed);

}  // namespace medner
