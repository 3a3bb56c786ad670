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

// Learning-curve experiment grid: methods x training fractions x seeds.
//
//   blank              fresh scorer over the target labels, static vectors only
//   transfer           source model extended with the missing labels, retrained
//   transfer+pretrain  as transfer, with the pretrained contextual encoder attached
//
// Every cell trains from scratch on take_fraction(train, f, seed) and is
// scored on the same test split.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medner/corpus.hpp"
#include "medner/embeddings.hpp"
#include "medner/encoder.hpp"
#include "medner/eval.hpp"
#include "medner/tagger.hpp"

namespace medner {

enum class Method { kBlank, kTransfer, kTransferPretrain };

std::string method_name(Method m);
Method parse_method(std::string_view name);

struct ExperimentSpec {
  std::vector<Method> methods = {Method::kBlank, Method::kTransfer, Method::kTransferPretrain};
  std::vector<double> fractions = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // Inputs. When target_path is empty the synthetic benchmark is generated
  // from data_seed instead, and the source/corpus paths are ignored.
  std::filesystem::path target_path;  // annotated JSONL, split below
  std::filesystem::path source_path;  // annotated JSONL with the source labels
  std::filesystem::path corpus_path;  // raw sentences
  std::uint64_t data_seed = 2019;
  double test_ratio = 0.3;
  std::uint64_t split_seed = 17;

  std::vector<std::string> source_labels = {"DISEASE", "CHEMICAL"};
  double source_holdout = 0.2;
  double source_gate = 0.8;  // minimum held-out F1 of the source model

  SkipGramConfig embeddings;
  PretrainConfig pretrain;
  ScorerConfig scorer;
  TrainConfig train;
  TrainConfig source_train;

  int threads = 0;  // 0: hardware concurrency
};

// Throws InvalidArgument for an empty method or seed list, fractions outside
// (0, 1] or not strictly increasing.
void validate(const ExperimentSpec& spec);

// Desk-scale settings used by the acceptance suite and `curve` defaults.
ExperimentSpec default_experiment_spec();

struct ExperimentData {
  Dataset train;
  Dataset test;
  Dataset source_train;
  Dataset source_heldout;
  std::vector<std::string> corpus;
};

ExperimentData load_experiment_data(const ExperimentSpec& spec);

// Shared, read-only resources for one seed.
struct SeedResources {
  std::uint64_t seed = 0;
  std::shared_ptr<const StaticEmbeddingTable> table;
  std::shared_ptr<const NerModel> source;
  double source_f1 = 0.0;
  std::shared_ptr<const ContextualEncoder> encoder;  // null unless a method needs it
  PretrainReport pretrain;
  double seconds = 0.0;
};

// Trains the source-label model on data.source_train and checks its held-out
// F1 against spec.source_gate (throws Error when below).
std::pair<NerModel, double> build_source_model(const ExperimentSpec& spec, const ExperimentData& data,
                                               std::shared_ptr<const StaticEmbeddingTable> table,
                                               std::uint64_t seed);

SeedResources build_seed_resources(const ExperimentSpec& spec, const ExperimentData& data, std::uint64_t seed);

// Trains one cell's model.
NerModel train_cell(const ExperimentSpec& spec, const ExperimentData& data, const SeedResources& res,
                    Method method, double fraction);

struct CellResult {
  Method method = Method::kBlank;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  EvalReport report;
  std::string test_fingerprint;
  double seconds = 0.0;
};

struct Aggregate {
  Method method = Method::kBlank;
  double fraction = 1.0;
  double precision = 0.0;  // means over seeds
  double recall = 0.0;
  double f1 = 0.0;
  double f1_sd = 0.0;      // sample standard deviation
  std::map<std::string, double> label_f1;
};

struct GridResult {
  std::vector<CellResult> cells;  // method-major, then fraction, then seed
  std::vector<SeedResources> seeds;
  std::string test_fingerprint;
  std::vector<std::string> labels;
  double seconds = 0.0;

  const Aggregate& aggregate(Method m, double fraction) const;
  std::vector<Aggregate> aggregates;  // fraction-major, method order of the spec
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs every (method, fraction, seed) cell. Cells run concurrently on
// spec.threads workers; each cell is single-threaded and deterministic.
GridResult run_grid(const ExperimentSpec& spec, const ExperimentData& data, const ProgressFn& progress = {});
GridResult run_grid(const ExperimentSpec& spec, const ProgressFn& progress = {});

struct HeadlineCheck {
  bool passed = false;
  double pretrain_half = 0.0;  // mean F1, transfer+pretrain at 0.5
  double blank_full = 0.0;     // mean F1, blank at 1.0
  double margin = 0.0;
};

// Mean F1(transfer+pretrain, 0.5) >= mean F1(blank, 1.0). Throws when either
// cell is missing.
HeadlineCheck headline_check(const GridResult& result);
HeadlineCheck headline_check(double pretrain_half, double blank_full);

// Mean F1 at fraction 1.0: transfer+pretrain >= transfer >= blank.
bool ordering_check(const GridResult& result, std::string* detail = nullptr);
// Per method, mean F1 never drops by more than `slack` between consecutive fractions.
bool trend_check(const GridResult& result, double slack, std::string* detail = nullptr);

// curve.csv, label_f1.csv, curve.json and manifest.json under out_dir.
void emit_reports(const GridResult& result, const ExperimentSpec& spec, const std::filesystem::path& out_dir);

std::string curve_csv(const GridResult& result);
std::string label_f1_csv(const GridResult& result);
std::string curve_json(const GridResult& result);

}  // namespace medner
