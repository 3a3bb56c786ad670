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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Criteria 2-4 and the synthetic half of 8 share one full benchmark
// grid run.

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <set>
#include <thread>

#include <unistd.h>

#include "medner/binio.hpp"
#include "medner/error.hpp"
#include "medner/eval.hpp"
#include "medner/harness.hpp"
#include "medner/service.hpp"
#include "oracles.hpp"
#include "quick.hpp"
#include "reference_values.hpp"

using namespace medner;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kF1Tolerance = reference::kRoundingTolerance;  // 0.0005
constexpr double kMetricBudgetSeconds = 1.0;
constexpr std::size_t kMinSeeds = 5;
constexpr std::size_t kMinTrainDocs = 600;
constexpr double kHeadlineMinMargin = 0.0;
constexpr double kTrendSlack = 0.02;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 10.0;
constexpr std::size_t kFuzzDecodes = 10000;
constexpr std::size_t kRoundTripLayouts = 1000;
constexpr std::size_t kPreservationInputs = 100;
constexpr double kDegenerateLoss = 0.01;
constexpr int kDegenerateEpochs = 20;
constexpr int kConcurrentSavers = 32;
constexpr int kContestedRevisions = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string num(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

Outcome metric_oracle() {
  const auto t = Clock::now();
  double worst = 0.0;
  for (const auto& row : reference::kCurve) worst = std::max(worst, std::abs(f1_score(row.precision, row.recall) - row.f1));
  const double secs = since(t);
  return {worst <= kF1Tolerance && secs < kMetricBudgetSeconds,
          std::to_string(reference::kCurve.size()) + " rows, worst |F1 - reference| " + num(worst, 5) + " (tol " +
              num(kF1Tolerance, 4) + "), " + num(secs, 4) + " s"};
}

Outcome gradients() {
  const auto t = Clock::now();
  double sg = 0, enc = 0, sc = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    sg = std::max(sg, oracle::sgns_gradient_error(seed));
    for (auto kind : {PretrainLoss::kCosine, PretrainLoss::kL2})
      enc = std::max(enc, oracle::encoder_gradient_error(seed, kind));
    sc = std::max(sc, oracle::scorer_gradient_error(seed));
  }
  const double secs = since(t);
  return {sg < kGradTolerance && enc < kGradTolerance && sc < kGradTolerance && secs < kGradBudgetSeconds,
          "worst rel. error skip-gram " + num(sg, 10) + ", encoder " + num(enc, 10) + ", scorer " + num(sc, 10) +
              " (tol 1e-4), " + num(secs, 2) + " s"};
}

Outcome transitions() {
  const double valid = oracle::fuzz_decodes(kFuzzDecodes, 20191);
  const std::size_t trips = oracle::round_trip_layouts(kRoundTripLayouts, 20192);
  return {valid == 1.0 && trips == kRoundTripLayouts,
          num(100.0 * valid, 2) + "% of " + std::to_string(kFuzzDecodes) + " fuzzed decodes well formed; " +
              std::to_string(trips) + "/" + std::to_string(kRoundTripLayouts) + " layouts round-trip"};
}

Outcome preservation() {
  const std::size_t ok = oracle::preserved_inputs(kPreservationInputs, 77);
  return {ok == kPreservationInputs, std::to_string(ok) + "/" + std::to_string(kPreservationInputs) +
                                         " inputs with bitwise-equal old-action scores"};
}

Outcome pretraining(const GridResult& grid) {
  const std::vector<std::string> corpus(64, "ok");
  SkipGramConfig sc;
  sc.dim = 8;
  sc.epochs = 1;
  const auto table = train_static_embeddings(corpus, sc);
  PretrainConfig pc;
  pc.epochs = kDegenerateEpochs;
  pc.patience = kDegenerateEpochs;
  pc.depth = 2;
  pc.learning_rate = 1e-2;
  pc.seed = 1;
  const auto [enc, report] = pretrain_contextual(corpus, table, pc);
  const double best = *std::min_element(report.epoch_loss.begin(), report.epoch_loss.end());
  bool ok = best < kDegenerateLoss;

  std::string per_seed;
  for (const auto& s : grid.seeds) {
    const auto& loss = s.pretrain.epoch_loss;
    const bool falls = loss.size() >= 10 && loss[9] < loss[0];
    ok = ok && falls;
    per_seed += " s" + std::to_string(s.seed) + ":" + (loss.size() >= 10 ? num(loss[0], 3) + "->" + num(loss[9], 3) : "short");
  }
  ok = ok && grid.seeds.size() >= kMinSeeds;
  return {ok, "one-token corpus min loss " + num(best, 5) + " in " + std::to_string(report.epoch_loss.size()) +
                  " epochs; synthetic epoch 1->10:" + per_seed};
}

std::string model_bytes(const NerModel& m) {
  std::ostringstream out;
  binio::Writer w(out);
  write_model(m, w);
  return out.str();
}

Outcome determinism() {
  const auto spec = quick::spec();
  const auto data = quick::data(spec);
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Splits.
  const auto target = generate_synthetic_corpus(quick::scaled(benchmark_target_spec(4), 60, 0)).dataset;
  auto dump = [](const Dataset& d, DocumentFormat f) {
    std::ostringstream s;
    write_documents(d, s, f);
    return s.str();
  };
  const auto s1 = split_train_test(target, {0.3, 1.0, 9});
  const auto s2 = split_train_test(target, {0.3, 1.0, 9});
  check(dump(s1.first, DocumentFormat::kJsonLines) == dump(s2.first, DocumentFormat::kJsonLines) &&
            dump(s1.second, DocumentFormat::kJsonLines) == dump(s2.second, DocumentFormat::kJsonLines),
        "split");

  // Models.
  const auto table = std::make_shared<const StaticEmbeddingTable>(train_static_embeddings(data.corpus, spec.embeddings));
  const auto table2 = train_static_embeddings(data.corpus, spec.embeddings);
  TrainConfig tc = spec.train;
  tc.seed = 7;
  const std::vector<std::string> labels(data.train.label_set.begin(), data.train.label_set.end());
  const auto m1 = train(blank_model(LabelScheme(labels), table, spec.scorer, 1), data.train, tc);
  const auto m2 = train(blank_model(LabelScheme(labels), table, spec.scorer, 1), data.train, tc);
  check(model_bytes(m1) == model_bytes(m2), "model bytes");

  // Grid CSVs.
  const auto g1 = run_grid(spec, data);
  const auto g2 = run_grid(spec, data);
  check(curve_csv(g1) == curve_csv(g2) && label_f1_csv(g1) == label_f1_csv(g2) && curve_json(g1) == curve_json(g2),
        "grid csv");

  // File round-trips.
  const fs::path dir = fs::temp_directory_path() / ("medner-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  save_embeddings(*table, dir / "e.bin");
  const auto e_back = load_embeddings(dir / "e.bin", table->dim());
  check(e_back == *table && table2 == *table, "embeddings");

  PretrainConfig pc = spec.pretrain;
  pc.seed = 3;
  const auto enc = pretrain_contextual(data.corpus, *table, pc).first;
  save_encoder(enc, dir / "c.bin");
  check(load_encoder(dir / "c.bin", table->dim()) == enc, "encoder round-trip");

  save_model(m1, dir / "m.bin");
  const auto m_back = load_model(dir / "m.bin");
  check(model_bytes(m_back) == model_bytes(m1) && predict(m_back, data.test) == predict(m1, data.test),
        "model round-trip");

  for (auto f : {DocumentFormat::kJsonLines, DocumentFormat::kColumns}) {
    save_documents(data.train, dir / "d.txt", f);
    auto back = load_documents(dir / "d.txt", f);
    back.label_set = data.train.label_set;
    check(back == data.train, "dataset round-trip");
  }

  AnnotationStore store;
  const auto p = store.create_project("rt", clinical_label_template());
  std::set<std::string> texts;
  std::vector<UploadFile> files;
  std::vector<const Document*> kept;
  for (const auto& d : data.test.documents)
    if (texts.insert(d.text).second) {  // uploads dedupe by content
      files.push_back({d.id, d.text});
      kept.push_back(&d);
    }
  const auto recs = store.upload_documents(p.id, files);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    store.save_spans(recs[i].document.id, kept[i]->spans, 0, "a");
    store.set_status(recs[i].document.id, DocStatus::kReviewed, "r");
  }
  std::istringstream exported(store.export_dataset(p.id, {}));
  auto imported = read_documents(exported, DocumentFormat::kJsonLines);
  imported.label_set = store.export_records(p.id, false).label_set;
  check(imported == store.export_records(p.id, false), "service export round-trip");
  fs::remove_all(dir);

  std::string detail = "splits, models, grid CSVs reproducible; embeddings/encoder/model/dataset/export round-trips";
  if (!failures.empty()) {
    detail = "mismatch:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

Outcome service_contract() {
  AnnotationStore store;
  const auto p = store.create_project("accept", clinical_label_template());
  const auto id = store.upload_documents(p.id, {{"a.txt", "fever after aspirin 5 mg"}})[0].document.id;

  // Suggest before any training.
  bool prescribed = false;
  try {
    store.suggest(id);
  } catch (const Conflict& e) {
    prescribed = e.code() == "no_model" && std::string(e.what()).find("train first") != std::string::npos;
  }

  // Contested saves.
  bool one_winner = true;
  for (std::uint64_t rev = 0; rev < kContestedRevisions; ++rev) {
    std::atomic<int> wins{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> threads;
    for (int t = 0; t < kConcurrentSavers; ++t)
      threads.emplace_back([&, t] {
        while (!go) std::this_thread::yield();
        try {
          std::vector<EntitySpan> spans;
          if (t % 2) spans.push_back({0, 5, "SYMPTOM"});
          store.save_spans(id, spans, rev, "t" + std::to_string(t));
          ++wins;
        } catch (const Conflict&) {
        }
      });
    go = true;
    for (auto& th : threads) th.join();
    one_winner = one_winner && wins == 1 && store.document(id).revision == rev + 1;
  }

  // Status machine: everything reachable from fresh, review only via annotated.
  std::set<DocStatus> seen = {DocStatus::kFresh};
  std::deque<DocStatus> queue = {DocStatus::kFresh};
  bool review_only_from_annotated = true;
  while (!queue.empty()) {
    const DocStatus s = queue.front();
    queue.pop_front();
    for (auto e : {StatusEvent::kSuggest, StatusEvent::kSave, StatusEvent::kReview}) {
      const auto n = next_status(s, e);
      if (!n) continue;
      if (*n == DocStatus::kReviewed && s != DocStatus::kReviewed && s != DocStatus::kAnnotated)
        review_only_from_annotated = false;
      if (seen.insert(*n).second) queue.push_back(*n);
    }
  }
  const bool reachable = seen.size() == 4 && review_only_from_annotated;

  return {prescribed && one_winner && reachable,
          std::string("suggest-before-train ") + (prescribed ? "no_model" : "WRONG") + "; " +
              std::to_string(kConcurrentSavers) + " concurrent saves x " + std::to_string(kContestedRevisions) +
              " revisions: " + (one_winner ? "1 winner each" : "NOT exactly one winner") + "; statuses reachable " +
              std::to_string(seen.size()) + "/4"};
}

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  // acceptance [--threads N] [--only 5,6,9]
  ExperimentSpec spec = default_experiment_spec();
  std::set<int> only;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--threads") {
      spec.threads = std::atoi(argv[i + 1]);
    } else if (flag == "--only") {
      std::istringstream ids(argv[i + 1]);
      for (std::string id; std::getline(ids, id, ',');) only.insert(std::stoi(id));
    } else {
      std::cerr << "unknown flag " << flag << '\n';
      return 2;
    }
  }
  auto wanted = [&](int id) { return only.empty() || only.contains(id); };
  bool all = true;
  auto emit = [&](int id, const std::string& name, const std::function<Outcome()>& run) {
    if (!wanted(id)) return;
    const Outcome o = run();
    report(id, name, o);
    all = all && o.pass;
  };

  emit(1, "metric oracle vs reference curve", [] { return guarded(metric_oracle); });

  // One benchmark run for 2, 3, 4 and 8.
  GridResult grid;
  std::string grid_error;
  ExperimentData data;
  const bool need_grid = wanted(2) || wanted(3) || wanted(4) || wanted(8);
  const auto t = Clock::now();
  if (need_grid) try {
    data = load_experiment_data(spec);
    grid = run_grid(spec, data, [](const std::string& line) { std::cerr << line << '\n'; });
  } catch (const std::exception& e) {
    grid_error = e.what();
  }
  const double grid_secs = since(t);
  auto with_grid = [&](const std::function<Outcome()>& f) {
    if (!grid_error.empty()) return Outcome{false, "grid failed: " + grid_error};
    return guarded(f);
  };

  emit(2, "headline: transfer+pretrain@0.5 >= blank@1.0", [&] { return with_grid([&] {
         const auto h = headline_check(grid);
         const bool sized = data.train.size() >= kMinTrainDocs && data.train.label_set.size() == 4 &&
                            spec.source_labels.size() == 2 && spec.seeds.size() >= kMinSeeds;
         return Outcome{h.passed && h.margin >= kHeadlineMinMargin && sized,
                        num(h.pretrain_half) + " vs " + num(h.blank_full) + ", margin " +
                            (h.margin >= 0 ? "+" : "") + num(h.margin) + " over " + std::to_string(spec.seeds.size()) +
                            " seeds, " + std::to_string(data.train.size()) + " train docs, " +
                            num(grid_secs, 0) + " s"};
       }); });
  emit(3, "method ordering at fraction 1.0", [&] { return with_grid([&] {
         std::string detail;
         const bool ok = ordering_check(grid, &detail);
         return Outcome{ok, detail};
       }); });
  emit(4, "non-decreasing trend, slack 0.02", [&] { return with_grid([&] {
         std::string detail;
         const bool ok = trend_check(grid, kTrendSlack, &detail);
         return Outcome{ok, detail};
       }); });
  emit(5, "gradient suite vs central differences", [] { return guarded(gradients); });
  emit(6, "transition validity", [] { return guarded(transitions); });
  emit(7, "fine-tune preservation", [] { return guarded(preservation); });
  emit(8, "pretraining sanity", [&] { return with_grid([&] { return pretraining(grid); }); });
  emit(9, "determinism and round-trips", [] { return guarded(determinism); });
  emit(10, "service contract", [] { return guarded(service_contract); });

  if (need_grid && grid_error.empty()) {
    std::cout << "\nlearning curve (mean over " << spec.seeds.size() << " seeds)\n" << curve_csv(grid);
    std::cout << "\nper-label F1 at 1.0\n" << label_f1_csv(grid);
  }
  return all ? 0 : 1;
}
