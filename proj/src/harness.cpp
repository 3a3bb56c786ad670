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

#include "medner/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "medner/config.hpp"
#include "medner/error.hpp"
#include "medner/random.hpp"
#include "medner/synth.hpp"

namespace medner {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double x, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

bool same_fraction(double a, double b) { return std::abs(a - b) < 1e-9; }

// Runs job(i) for i in [0, n) on up to `threads` workers. The first failure
// is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  if (error) std::rethrow_exception(error);
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<std::string> target_new_labels(const ExperimentSpec& spec, const Dataset& train) {
  std::vector<std::string> out;
  for (const auto& l : train.label_set)
    if (std::find(spec.source_labels.begin(), spec.source_labels.end(), l) == spec.source_labels.end())
      out.push_back(l);
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kBlank: return "blank";
    case Method::kTransfer: return "transfer";
    case Method::kTransferPretrain: return "transfer+pretrain";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "blank") return Method::kBlank;
  if (name == "transfer") return Method::kTransfer;
  if (name == "transfer+pretrain" || name == "pretrain") return Method::kTransferPretrain;
  throw InvalidArgument("unknown method '" + std::string(name) + "' (expected blank, transfer, transfer+pretrain)");
}

void validate(const ExperimentSpec& spec) {
  if (spec.methods.empty()) throw InvalidArgument("experiment needs at least one method");
  if (spec.seeds.empty()) throw InvalidArgument("experiment needs at least one seed");
  if (spec.fractions.empty()) throw InvalidArgument("experiment needs at least one training fraction");
  for (std::size_t i = 0; i < spec.fractions.size(); ++i) {
    const double f = spec.fractions[i];
    if (!(f > 0.0 && f <= 1.0)) throw InvalidArgument("training fraction " + fmt(f) + " is outside (0, 1]");
    if (i && !(f > spec.fractions[i - 1])) throw InvalidArgument("training fractions must be strictly increasing");
  }
  if (!(spec.test_ratio > 0.0 && spec.test_ratio < 1.0)) throw InvalidArgument("test ratio must lie in (0, 1)");
  if (!(spec.source_holdout > 0.0 && spec.source_holdout < 1.0))
    throw InvalidArgument("source holdout must lie in (0, 1)");
  if (spec.source_labels.empty()) throw InvalidArgument("source label set is empty");
  medner::validate(spec.embeddings);
  medner::validate(spec.pretrain);
  medner::validate(spec.train);
  medner::validate(spec.source_train);
}

ExperimentSpec default_experiment_spec() {
  ExperimentSpec s;
  // Short sentences: a narrower skip-gram window keeps the cue verbs apart.
  s.embeddings.window = 3;
  return s;
}

ExperimentData load_experiment_data(const ExperimentSpec& spec) {
  validate(spec);
  ExperimentData data;
  Dataset target;
  Dataset source;
  if (spec.target_path.empty()) {
    auto tgt = generate_synthetic_corpus(benchmark_target_spec(spec.data_seed));
    auto src = generate_synthetic_corpus(benchmark_source_spec(spec.data_seed));
    target = std::move(tgt.dataset);
    source = std::move(src.dataset);
    data.corpus = std::move(tgt.raw);
  } else {
    target = load_documents(spec.target_path, DocumentFormat::kJsonLines);
    if (spec.source_path.empty()) throw InvalidArgument("a target dataset path needs a source dataset path");
    if (spec.corpus_path.empty()) throw InvalidArgument("a target dataset path needs a raw corpus path");
    source = load_documents(spec.source_path, DocumentFormat::kJsonLines);
    data.corpus = load_raw_corpus(spec.corpus_path);
  }
  std::tie(data.train, data.test) = split_train_test(target, {spec.test_ratio, 1.0, spec.split_seed});
  std::tie(data.source_train, data.source_heldout) =
      split_train_test(source, {spec.source_holdout, 1.0, derive_seed(spec.split_seed, 0x5C)});
  std::set<std::string> src_labels(spec.source_labels.begin(), spec.source_labels.end());
  for (const auto& l : data.source_train.label_set)
    if (!src_labels.contains(l)) throw ValidationError("source dataset has label '" + l + "' outside the source label set");
  return data;
}

std::pair<NerModel, double> build_source_model(const ExperimentSpec& spec, const ExperimentData& data,
                                               std::shared_ptr<const StaticEmbeddingTable> table,
                                               std::uint64_t seed) {
  TrainConfig tc = spec.source_train;
  tc.seed = derive_seed(seed, 0x50);
  NerModel blank = blank_model(LabelScheme(spec.source_labels), std::move(table), spec.scorer, derive_seed(seed, 0x51));
  NerModel model = train(blank, data.source_train, tc);
  const double f1 = compute_report(data.source_heldout, predict(model, data.source_heldout)).overall_prf().f1;
  if (!(f1 > spec.source_gate))
    throw Error("source model held-out F1 " + fmt(f1) + " is not above the gate " + fmt(spec.source_gate) +
                " (seed " + std::to_string(seed) + ")");
  return {std::move(model), f1};
}

SeedResources build_seed_resources(const ExperimentSpec& spec, const ExperimentData& data, std::uint64_t seed) {
  const auto started = Clock::now();
  SeedResources r;
  r.seed = seed;
  SkipGramConfig sg = spec.embeddings;
  sg.seed = derive_seed(seed, 0xE1);
  r.table = std::make_shared<const StaticEmbeddingTable>(train_static_embeddings(data.corpus, sg));
  const bool needs_source = std::any_of(spec.methods.begin(), spec.methods.end(),
                                        [](Method m) { return m != Method::kBlank; });
  if (needs_source) {
    auto [model, f1] = build_source_model(spec, data, r.table, seed);
    r.source = std::make_shared<const NerModel>(std::move(model));
    r.source_f1 = f1;
  }
  if (std::find(spec.methods.begin(), spec.methods.end(), Method::kTransferPretrain) != spec.methods.end()) {
    PretrainConfig pc = spec.pretrain;
    pc.seed = derive_seed(seed, 0xE2);
    auto [encoder, report] = pretrain_contextual(data.corpus, *r.table, pc);
    r.encoder = std::make_shared<const ContextualEncoder>(std::move(encoder));
    r.pretrain = std::move(report);
  }
  r.seconds = seconds_since(started);
  return r;
}

NerModel train_cell(const ExperimentSpec& spec, const ExperimentData& data, const SeedResources& res,
                    Method method, double fraction) {
  const Dataset subset = take_fraction(data.train, fraction, derive_seed(res.seed, 0xF0));
  TrainConfig tc = spec.train;
  tc.seed = derive_seed(res.seed, 0x7A);
  const std::uint64_t init_seed = derive_seed(res.seed, 0xE7E7);
  if (method == Method::kBlank) {
    const std::vector<std::string> labels(data.train.label_set.begin(), data.train.label_set.end());
    return train(blank_model(LabelScheme(labels), res.table, spec.scorer, init_seed), subset, tc);
  }
  if (!res.source) throw Error("no source model was built for this seed");
  NerModel base = *res.source;
  if (method == Method::kTransferPretrain) {
    if (!res.encoder) throw Error("no pretrained encoder was built for this seed");
    base = attach_encoder(base, res.encoder);
  }
  const auto new_labels = target_new_labels(spec, data.train);
  if (new_labels.empty()) return train(base, subset, tc);
  return fine_tune_extend(base, new_labels, subset, tc);
}

const Aggregate& GridResult::aggregate(Method m, double fraction) const {
  for (const auto& a : aggregates)
    if (a.method == m && same_fraction(a.fraction, fraction)) return a;
  throw NotFound("grid has no cell for " + method_name(m) + " at fraction " + fmt(fraction, 2));
}

GridResult run_grid(const ExperimentSpec& spec, const ProgressFn& progress) {
  return run_grid(spec, load_experiment_data(spec), progress);
}

GridResult run_grid(const ExperimentSpec& spec, const ExperimentData& data, const ProgressFn& progress) {
  validate(spec);
  const auto started = Clock::now();
  const int threads = resolve_threads(spec.threads);
  std::mutex log_mu;
  auto log = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard lock(log_mu);
    progress(msg);
  };

  GridResult result;
  result.test_fingerprint = dataset_fingerprint(data.test);
  result.labels.assign(data.test.label_set.begin(), data.test.label_set.end());

  result.seeds.resize(spec.seeds.size());
  parallel_for(spec.seeds.size(), threads, [&](std::size_t i) {
    try {
      result.seeds[i] = build_seed_resources(spec, data, spec.seeds[i]);
    } catch (const Error& e) {
      throw Error("seed " + std::to_string(spec.seeds[i]) + ": " + e.what());
    }
    const auto& r = result.seeds[i];
    log("seed " + std::to_string(r.seed) + ": resources ready in " + fmt(r.seconds, 1) + "s (source F1 " +
        fmt(r.source_f1) + ", pretrain epochs " + std::to_string(r.pretrain.stopped_epoch) + ")");
  });

  struct Job {
    Method method;
    double fraction;
    std::size_t seed_index;
  };
  std::vector<Job> jobs;
  for (Method m : spec.methods)
    for (double f : spec.fractions)
      for (std::size_t s = 0; s < spec.seeds.size(); ++s) jobs.push_back({m, f, s});
  result.cells.resize(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const SeedResources& res = result.seeds[job.seed_index];
    const auto t0 = Clock::now();
    CellResult cell;
    cell.method = job.method;
    cell.fraction = job.fraction;
    cell.seed = res.seed;
    try {
      const NerModel model = train_cell(spec, data, res, job.method, job.fraction);
      cell.report = compute_report(data.test, predict(model, data.test));
    } catch (const Error& e) {
      throw Error("cell (" + method_name(job.method) + ", " + fmt(job.fraction, 2) + ", seed " +
                  std::to_string(res.seed) + "): " + e.what());
    }
    cell.test_fingerprint = result.test_fingerprint;
    cell.seconds = seconds_since(t0);
    log("cell " + method_name(job.method) + " f=" + fmt(job.fraction, 2) + " seed=" + std::to_string(res.seed) +
        " F1=" + fmt(cell.report.overall_prf().f1) + " (" + fmt(cell.seconds, 1) + "s)");
    result.cells[i] = std::move(cell);
  });

  for (double f : spec.fractions) {
    for (Method m : spec.methods) {
      Aggregate a;
      a.method = m;
      a.fraction = f;
      std::vector<double> p, r, f1;
      std::map<std::string, std::vector<double>> per_label;
      for (const auto& c : result.cells) {
        if (c.method != m || !same_fraction(c.fraction, f)) continue;
        const Prf x = c.report.overall_prf();
        p.push_back(x.precision);
        r.push_back(x.recall);
        f1.push_back(x.f1);
        for (const auto& label : result.labels) per_label[label].push_back(c.report.label_prf(label).f1);
      }
      a.precision = mean(p);
      a.recall = mean(r);
      a.f1 = mean(f1);
      a.f1_sd = sample_sd(f1);
      for (const auto& [label, v] : per_label) a.label_f1[label] = mean(v);
      result.aggregates.push_back(std::move(a));
    }
  }
  result.seconds = seconds_since(started);
  return result;
}

HeadlineCheck headline_check(double pretrain_half, double blank_full) {
  HeadlineCheck h;
  h.pretrain_half = pretrain_half;
  h.blank_full = blank_full;
  h.margin = pretrain_half - blank_full;
  h.passed = pretrain_half >= blank_full;
  return h;
}

HeadlineCheck headline_check(const GridResult& result) {
  return headline_check(result.aggregate(Method::kTransferPretrain, 0.5).f1,
                        result.aggregate(Method::kBlank, 1.0).f1);
}

bool ordering_check(const GridResult& result, std::string* detail) {
  const double p = result.aggregate(Method::kTransferPretrain, 1.0).f1;
  const double t = result.aggregate(Method::kTransfer, 1.0).f1;
  const double b = result.aggregate(Method::kBlank, 1.0).f1;
  if (detail) *detail = "transfer+pretrain " + fmt(p, 4) + " >= transfer " + fmt(t, 4) + " >= blank " + fmt(b, 4);
  return p >= t && t >= b;
}

bool trend_check(const GridResult& result, double slack, std::string* detail) {
  std::vector<Method> methods;
  std::vector<double> fractions;
  for (const auto& a : result.aggregates) {
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) methods.push_back(a.method);
    if (std::none_of(fractions.begin(), fractions.end(), [&](double f) { return same_fraction(f, a.fraction); }))
      fractions.push_back(a.fraction);
  }
  bool ok = true;
  double worst = 0.0;
  std::string where;
  for (Method m : methods) {
    for (std::size_t i = 1; i < fractions.size(); ++i) {
      const double drop = result.aggregate(m, fractions[i - 1]).f1 - result.aggregate(m, fractions[i]).f1;
      if (drop > worst) {
        worst = drop;
        where = method_name(m) + " " + fmt(fractions[i - 1], 1) + "->" + fmt(fractions[i], 1);
      }
      if (drop > slack) ok = false;
    }
  }
  if (detail) *detail = worst > 0.0 ? "largest drop " + fmt(worst, 4) + " at " + where : "no drops";
  return ok;
}

std::string curve_csv(const GridResult& result) {
  std::ostringstream out;
  out << "method,fraction,precision,recall,f1,f1_sd\n";
  for (const auto& a : result.aggregates)
    out << method_name(a.method) << ',' << fmt(a.fraction, 2) << ',' << fmt(a.precision) << ',' << fmt(a.recall)
        << ',' << fmt(a.f1) << ',' << fmt(a.f1_sd) << '\n';
  return out.str();
}

std::string label_f1_csv(const GridResult& result) {
  std::vector<const Aggregate*> full;
  for (const auto& a : result.aggregates)
    if (same_fraction(a.fraction, 1.0)) full.push_back(&a);
  std::ostringstream out;
  out << "label";
  for (const auto* a : full) out << ',' << method_name(a->method);
  out << '\n';
  for (const auto& label : result.labels) {
    out << label;
    for (const auto* a : full) out << ',' << fmt(a->label_f1.at(label));
    out << '\n';
  }
  return out.str();
}

std::string curve_json(const GridResult& result) {
  Json series = Json::array();
  std::vector<Method> methods;
  for (const auto& a : result.aggregates)
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) methods.push_back(a.method);
  for (Method m : methods) {
    Json points = Json::array();
    for (const auto& a : result.aggregates)
      if (a.method == m) points.push_back({{"fraction", a.fraction}, {"f1", a.f1}, {"f1_sd", a.f1_sd}});
    series.push_back({{"method", method_name(m)}, {"points", points}});
  }
  return Json{{"metric", "f1"}, {"series", series}}.dump(2) + "\n";
}

void emit_reports(const GridResult& result, const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);
  if (result.aggregates.empty()) throw InvalidArgument("grid result is empty");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "curve.csv", curve_csv(result));
  write_file(out_dir / "label_f1.csv", label_f1_csv(result));
  write_file(out_dir / "curve.json", curve_json(result));

  Json seeds = Json::array();
  for (const auto& r : result.seeds)
    seeds.push_back({{"seed", r.seed},
                     {"source_f1", r.source_f1},
                     {"pretrain_epochs", r.pretrain.stopped_epoch},
                     {"pretrain_loss", r.pretrain.epoch_loss},
                     {"seconds", r.seconds}});
  Json cells = Json::array();
  for (const auto& c : result.cells)
    cells.push_back({{"method", method_name(c.method)},
                     {"fraction", c.fraction},
                     {"seed", c.seed},
                     {"f1", c.report.overall_prf().f1},
                     {"seconds", c.seconds}});
  const HeadlineCheck h = [&] {
    try {
      return headline_check(result);
    } catch (const Error&) {
      return HeadlineCheck{};
    }
  }();
  Json manifest = {{"subcommand", "curve"},
                   {"spec", to_json(spec)},
                   {"test_fingerprint", result.test_fingerprint},
                   {"headline", {{"passed", h.passed}, {"margin", h.margin}}},
                   {"seeds", seeds},
                   {"cells", cells},
                   {"seconds", result.seconds}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace medner
