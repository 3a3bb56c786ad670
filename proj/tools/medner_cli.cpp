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

#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "medner/config.hpp"
#include "medner/corpus.hpp"
#include "medner/embeddings.hpp"
#include "medner/encoder.hpp"
#include "medner/error.hpp"
#include "medner/eval.hpp"
#include "medner/harness.hpp"
#include "medner/random.hpp"
#include "medner/service.hpp"
#include "medner/synth.hpp"
#include "medner/tagger.hpp"
#include "medner/utf8.hpp"

// After Eigen: <resolv.h> defines _res, which Eigen uses as a parameter name.
#include <httplib.h>

namespace fs = std::filesystem;
using medner::Json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kAssertion = 3;

struct AssertionFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw medner::IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_hash(const fs::path& path) {
  const std::string bytes = read_file(path);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(medner::fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

// Shared state for every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  Json config = Json::object();
  std::string started;

  void load() {
    started = iso_now();
    if (config_path.empty()) return;
    try {
      config = Json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw medner::InvalidArgument("config " + config_path + " is not valid JSON: " + e.what());
    }
    if (!config.is_object()) throw medner::InvalidArgument("config " + config_path + " must be a JSON object");
    static const std::set<std::string> known = {"embeddings", "pretrain", "scorer", "train",
                                                "source_train", "synth", "experiment", "split"};
    for (const auto& [key, value] : config.items())
      if (!known.contains(key)) throw medner::InvalidArgument("unknown config section '" + key + "'");
  }

  Json section(const std::string& name) const { return config.contains(name) ? config[name] : Json::object(); }
};

void write_manifest(const fs::path& path, const std::string& subcommand, const Common& common, Json resolved,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  Json in = Json::object(), out = Json::object();
  for (const auto& p : inputs) in[p.string()] = file_hash(p);
  for (const auto& p : outputs) out[p.string()] = file_hash(p);
  Json m = {{"subcommand", subcommand},
            {"tool_version", kVersion},
            {"config_file", common.config_path},
            {"config", std::move(resolved)},
            {"seed", common.seed ? Json(*common.seed) : Json(nullptr)},
            {"inputs", in},
            {"artifacts", out},
            {"started", common.started},
            {"finished", iso_now()}};
  std::ofstream f(path, std::ios::binary);
  f << m.dump(2) << '\n';
  if (!f) throw medner::IoError("cannot write manifest " + path.string());
}

fs::path manifest_beside(const fs::path& artifact) {
  fs::path m = artifact;
  m += ".manifest.json";
  return m;
}

medner::DocumentFormat format_of(const fs::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".conll" || ext == ".tsv" || ext == ".cols") ? medner::DocumentFormat::kColumns
                                                               : medner::DocumentFormat::kJsonLines;
}

medner::Dataset load_any(const fs::path& path) { return medner::load_documents(path, format_of(path)); }

// Raw sentences from plain-text corpora and the texts of annotated files.
std::vector<std::string> gather_corpus(const std::vector<std::string>& corpus_files,
                                       const std::vector<std::string>& dataset_files) {
  std::vector<std::string> out;
  for (const auto& f : corpus_files) {
    auto lines = medner::load_raw_corpus(f);
    out.insert(out.end(), lines.begin(), lines.end());
  }
  for (const auto& f : dataset_files)
    for (const auto& d : load_any(f).documents) out.push_back(d.text);
  if (out.empty()) throw medner::InvalidArgument("no input sentences; pass --corpus or --data");
  return out;
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

httplib::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medner: clinical named entity recognition toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "seed override");
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert text or column files to JSONL records");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out, ingest_from = "text", ingest_prefix = "doc";
  ingest->add_option("inputs", ingest_inputs, "input files")->required()->check(CLI::ExistingFile);
  ingest->add_option("-o,--output", ingest_out, "output JSONL")->required();
  ingest->add_option("--from", ingest_from, "text (one record per line) or columns")
      ->check(CLI::IsMember({"text", "columns"}));
  ingest->add_option("--id-prefix", ingest_prefix, "id prefix for text records");
  add_common(ingest);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated dataset and raw corpus");
  std::string synth_preset = "target", synth_dir;
  std::optional<std::size_t> synth_docs;
  synth->add_option("--preset", synth_preset, "target, source or custom (config 'synth' section)")
      ->check(CLI::IsMember({"target", "source", "custom"}));
  synth->add_option("-o,--output-dir", synth_dir, "output directory")->required();
  synth->add_option("--documents", synth_docs, "document count override");
  add_common(synth);

  // split
  auto* split = app.add_subcommand("split", "seeded train/test split");
  std::string split_in, split_train, split_test;
  std::optional<double> split_ratio, split_fraction;
  split->add_option("input", split_in, "annotated file")->required()->check(CLI::ExistingFile);
  split->add_option("--train-out", split_train, "train output")->required();
  split->add_option("--test-out", split_test, "test output")->required();
  split->add_option("--test-ratio", split_ratio, "test share")->check(CLI::Range(0.0, 1.0));
  split->add_option("--fraction", split_fraction, "share of the train part kept")->check(CLI::Range(0.0, 1.0));
  add_common(split);

  // embed
  auto* embed = app.add_subcommand("embed", "train static skip-gram embeddings");
  std::vector<std::string> embed_corpus, embed_data;
  std::string embed_out;
  std::optional<int> embed_dim, embed_epochs, embed_window;
  embed->add_option("--corpus", embed_corpus, "raw sentence files")->check(CLI::ExistingFile);
  embed->add_option("--data", embed_data, "annotated files whose texts are added")->check(CLI::ExistingFile);
  embed->add_option("-o,--output", embed_out, "embedding file")->required();
  embed->add_option("--dim", embed_dim);
  embed->add_option("--epochs", embed_epochs);
  embed->add_option("--window", embed_window);
  add_common(embed);

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "pretrain the contextual encoder");
  std::vector<std::string> pre_corpus, pre_data;
  std::string pre_emb, pre_out, pre_loss;
  std::optional<int> pre_epochs;
  pretrain->add_option("--corpus", pre_corpus, "raw sentence files")->check(CLI::ExistingFile);
  pretrain->add_option("--data", pre_data, "annotated files whose texts are added")->check(CLI::ExistingFile);
  pretrain->add_option("--embeddings", pre_emb, "static embedding file")->required()->check(CLI::ExistingFile);
  pretrain->add_option("-o,--output", pre_out, "encoder file")->required();
  pretrain->add_option("--epochs", pre_epochs);
  pretrain->add_option("--loss", pre_loss)->check(CLI::IsMember({"cosine", "l2"}));
  add_common(pretrain);

  // train
  auto* trainc = app.add_subcommand("train", "train a tagger from scratch");
  std::string tr_data, tr_emb, tr_enc, tr_out;
  std::vector<std::string> tr_labels;
  std::optional<int> tr_iters;
  trainc->add_option("--data", tr_data, "annotated training file")->required()->check(CLI::ExistingFile);
  trainc->add_option("--embeddings", tr_emb, "static embedding file")->required()->check(CLI::ExistingFile);
  trainc->add_option("--encoder", tr_enc, "pretrained encoder file")->check(CLI::ExistingFile);
  trainc->add_option("--labels", tr_labels, "label order (default: sorted labels of the data)");
  trainc->add_option("-o,--output", tr_out, "model file")->required();
  trainc->add_option("--iterations", tr_iters);
  add_common(trainc);

  // finetune
  auto* finetune = app.add_subcommand("finetune", "extend a trained model with the new labels of a dataset");
  std::string ft_base, ft_data, ft_enc, ft_out;
  std::optional<int> ft_iters;
  finetune->add_option("--base", ft_base, "base model file")->required()->check(CLI::ExistingFile);
  finetune->add_option("--data", ft_data, "annotated training file")->required()->check(CLI::ExistingFile);
  finetune->add_option("--encoder", ft_enc, "attach a pretrained encoder first")->check(CLI::ExistingFile);
  finetune->add_option("-o,--output", ft_out, "model file")->required();
  finetune->add_option("--iterations", ft_iters);
  add_common(finetune);

  // eval
  auto* evalc = app.add_subcommand("eval", "span-level precision, recall and F1");
  std::string ev_gold, ev_pred, ev_model, ev_out, ev_tsv, ev_avg = "micro", ev_pred_out;
  evalc->add_option("--gold", ev_gold, "gold file")->required()->check(CLI::ExistingFile);
  evalc->add_option("--pred", ev_pred, "predicted file")->check(CLI::ExistingFile);
  evalc->add_option("--model", ev_model, "model to run over the gold texts")->check(CLI::ExistingFile);
  evalc->add_option("--averaging", ev_avg)->check(CLI::IsMember({"micro", "macro"}));
  evalc->add_option("-o,--output", ev_out, "write the JSON report here");
  evalc->add_option("--tsv", ev_tsv, "write a TSV report here");
  evalc->add_option("--predictions-out", ev_pred_out, "save predictions made with --model");
  add_common(evalc);

  // curve
  auto* curve = app.add_subcommand("curve", "run the learning-curve grid and write tables");
  std::string cv_dir, cv_target, cv_source, cv_corpus;
  std::optional<int> cv_seeds, cv_threads;
  std::vector<double> cv_fractions;
  std::vector<std::string> cv_methods;
  bool cv_assert = false;
  curve->add_option("-o,--output-dir", cv_dir, "output directory")->required();
  curve->add_option("--seeds", cv_seeds, "number of seeds (1..N)")->check(CLI::PositiveNumber);
  curve->add_option("--threads", cv_threads, "worker threads (0: all cores)");
  curve->add_option("--fractions", cv_fractions);
  curve->add_option("--methods", cv_methods);
  curve->add_option("--target", cv_target, "annotated target dataset")->check(CLI::ExistingFile);
  curve->add_option("--source", cv_source, "annotated source dataset")->check(CLI::ExistingFile);
  curve->add_option("--corpus", cv_corpus, "raw sentence corpus")->check(CLI::ExistingFile);
  curve->add_flag("--assert-headline", cv_assert, "exit 3 unless the headline property holds");
  add_common(curve);

  // serve
  auto* serve = app.add_subcommand("serve", "run the annotation service");
  std::string sv_host = "127.0.0.1", sv_data, sv_token;
  int sv_port = 8080;
  serve->add_option("--host", sv_host);
  serve->add_option("--port", sv_port)->check(CLI::Range(0, 65535));
  serve->add_option("--data-dir", sv_data, "persist state here (default: memory only)");
  serve->add_option("--token", sv_token, "require this X-Auth-Token");
  add_common(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << '\n';
    return kUsage;
  }

  try {
    common.load();

    if (*ingest) {
      medner::Dataset out;
      if (ingest_from == "columns") {
        std::vector<medner::Document> docs;
        std::set<std::string> labels;
        for (const auto& f : ingest_inputs) {
          auto d = medner::load_documents(f, medner::DocumentFormat::kColumns);
          docs.insert(docs.end(), d.documents.begin(), d.documents.end());
          labels.insert(d.label_set.begin(), d.label_set.end());
        }
        out = medner::make_dataset(std::move(docs), std::move(labels));
      } else {
        std::vector<medner::Document> docs;
        for (const auto& f : ingest_inputs)
          for (auto& line : medner::load_raw_corpus(f)) {
            if (!medner::utf8::is_valid(line)) throw medner::ValidationError(f + ": line is not valid UTF-8");
            docs.push_back(medner::make_document(ingest_prefix + "-" + std::to_string(docs.size()), line, {}));
          }
        out = medner::make_dataset(std::move(docs));
      }
      ensure_parent(ingest_out);
      medner::save_documents(out, ingest_out, medner::DocumentFormat::kJsonLines);
      write_manifest(manifest_beside(ingest_out), "ingest", common,
                     {{"from", ingest_from}, {"id_prefix", ingest_prefix}, {"documents", out.size()}},
                     as_paths(ingest_inputs), {ingest_out});
      std::cout << "wrote " << out.size() << " records to " << ingest_out << '\n';
    }

    else if (*synth) {
      const std::uint64_t seed = common.seed.value_or(2019);
      medner::SynthSpec spec = synth_preset == "source" ? medner::benchmark_source_spec(seed)
                               : synth_preset == "target" ? medner::benchmark_target_spec(seed)
                                                          : medner::SynthSpec{};
      spec = medner::synth_from_json(common.section("synth"), spec);
      if (common.seed && synth_preset == "custom") spec.seed = *common.seed;
      if (synth_docs) spec.documents = *synth_docs;
      const auto corpus = medner::generate_synthetic_corpus(spec);
      const fs::path dir = synth_dir;
      fs::create_directories(dir);
      medner::save_documents(corpus.dataset, dir / "dataset.jsonl", medner::DocumentFormat::kJsonLines);
      std::vector<fs::path> outputs = {dir / "dataset.jsonl"};
      if (!corpus.raw.empty()) {
        medner::save_raw_corpus(corpus.raw, dir / "corpus.txt");
        outputs.push_back(dir / "corpus.txt");
      }
      write_manifest(dir / "manifest.json", "synth", common, {{"preset", synth_preset}, {"synth", to_json(spec)}},
                     {}, outputs);
      std::cout << "wrote " << corpus.dataset.size() << " documents and " << corpus.raw.size() << " sentences to "
                << dir.string() << '\n';
    }

    else if (*split) {
      medner::SplitSpec s;
      const Json sec = common.section("split");
      for (const auto& [k, v] : sec.items()) {
        if (k == "test_ratio") s.test_ratio = v.get<double>();
        else if (k == "fraction") s.fraction = v.get<double>();
        else if (k == "seed") s.seed = v.get<std::uint64_t>();
        else throw medner::InvalidArgument("unknown split config key '" + k + "'");
      }
      if (split_ratio) s.test_ratio = *split_ratio;
      if (split_fraction) s.fraction = *split_fraction;
      if (common.seed) s.seed = *common.seed;
      auto [train, test] = medner::split_train_test(load_any(split_in), s);
      ensure_parent(split_train);
      ensure_parent(split_test);
      medner::save_documents(train, split_train, format_of(split_train));
      medner::save_documents(test, split_test, format_of(split_test));
      write_manifest(manifest_beside(split_train), "split", common,
                     {{"test_ratio", s.test_ratio}, {"fraction", s.fraction}, {"seed", s.seed}}, {split_in},
                     {split_train, split_test});
      std::cout << "train " << train.size() << ", test " << test.size() << '\n';
    }

    else if (*embed) {
      auto cfg = medner::skipgram_from_json(common.section("embeddings"));
      if (embed_dim) cfg.dim = *embed_dim;
      if (embed_epochs) cfg.epochs = *embed_epochs;
      if (embed_window) cfg.window = *embed_window;
      if (common.seed) cfg.seed = *common.seed;
      medner::validate(cfg);
      const auto corpus = gather_corpus(embed_corpus, embed_data);
      const auto table = medner::train_static_embeddings(corpus, cfg);
      ensure_parent(embed_out);
      medner::save_embeddings(table, embed_out);
      auto inputs = as_paths(embed_corpus);
      for (const auto& d : embed_data) inputs.push_back(d);
      write_manifest(manifest_beside(embed_out), "embed", common, medner::to_json(cfg), inputs, {embed_out});
      std::cout << "vocabulary " << table.vocab_size() << ", dim " << table.dim() << '\n';
    }

    else if (*pretrain) {
      auto cfg = medner::pretrain_from_json(common.section("pretrain"));
      if (pre_epochs) cfg.epochs = *pre_epochs;
      if (!pre_loss.empty()) cfg.loss = pre_loss == "l2" ? medner::PretrainLoss::kL2 : medner::PretrainLoss::kCosine;
      if (common.seed) cfg.seed = *common.seed;
      medner::validate(cfg);
      const auto table = medner::load_embeddings(pre_emb);
      const auto corpus = gather_corpus(pre_corpus, pre_data);
      auto [encoder, report] = medner::pretrain_contextual(corpus, table, cfg);
      ensure_parent(pre_out);
      medner::save_encoder(encoder, pre_out);
      auto inputs = as_paths(pre_corpus);
      for (const auto& d : pre_data) inputs.push_back(d);
      inputs.push_back(pre_emb);
      Json resolved = medner::to_json(cfg);
      resolved["epoch_loss"] = report.epoch_loss;
      resolved["stopped_epoch"] = report.stopped_epoch;
      write_manifest(manifest_beside(pre_out), "pretrain", common, resolved, inputs, {pre_out});
      for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
        std::cout << "epoch " << e + 1 << " loss " << report.epoch_loss[e] << '\n';
    }

    else if (*trainc) {
      auto scorer = medner::scorer_from_json(common.section("scorer"));
      auto cfg = medner::train_from_json(common.section("train"));
      if (tr_iters) cfg.iterations = *tr_iters;
      if (common.seed) cfg.seed = *common.seed;
      medner::validate(cfg);
      const auto data = load_any(tr_data);
      std::vector<std::string> labels = tr_labels;
      if (labels.empty()) labels.assign(data.label_set.begin(), data.label_set.end());
      auto table = std::make_shared<const medner::StaticEmbeddingTable>(medner::load_embeddings(tr_emb));
      auto model = medner::blank_model(medner::LabelScheme(labels), table, scorer, medner::derive_seed(cfg.seed, 1));
      std::vector<fs::path> inputs = {tr_data, tr_emb};
      if (!tr_enc.empty()) {
        auto enc = std::make_shared<const medner::ContextualEncoder>(medner::load_encoder(tr_enc, table->dim()));
        model = medner::attach_encoder(model, enc);
        inputs.push_back(tr_enc);
      }
      model = medner::train(model, data, cfg);
      ensure_parent(tr_out);
      medner::save_model(model, tr_out);
      write_manifest(manifest_beside(tr_out), "train", common,
                     {{"labels", labels}, {"scorer", medner::to_json(scorer)}, {"train", medner::to_json(cfg)}},
                     inputs, {tr_out});
      std::cout << "trained on " << data.size() << " documents, labels " << labels.size() << '\n';
    }

    else if (*finetune) {
      auto cfg = medner::train_from_json(common.section("train"));
      if (ft_iters) cfg.iterations = *ft_iters;
      if (common.seed) cfg.seed = *common.seed;
      medner::validate(cfg);
      auto base = medner::load_model(ft_base);
      const auto data = load_any(ft_data);
      std::vector<fs::path> inputs = {ft_base, ft_data};
      if (!ft_enc.empty()) {
        auto enc = std::make_shared<const medner::ContextualEncoder>(medner::load_encoder(ft_enc, base.table().dim()));
        base = medner::attach_encoder(base, enc);
        inputs.push_back(ft_enc);
      }
      std::vector<std::string> fresh;
      for (const auto& l : data.label_set)
        if (!base.scheme().label_index(l)) fresh.push_back(l);
      const auto model = medner::fine_tune_extend(base, fresh, data, cfg);
      ensure_parent(ft_out);
      medner::save_model(model, ft_out);
      write_manifest(manifest_beside(ft_out), "finetune", common,
                     {{"new_labels", fresh}, {"labels", model.scheme().labels()}, {"train", medner::to_json(cfg)}},
                     inputs, {ft_out});
      std::cout << "added " << fresh.size() << " labels; model has " << model.scheme().num_labels() << '\n';
    }

    else if (*evalc) {
      if (ev_pred.empty() == ev_model.empty()) throw medner::InvalidArgument("pass exactly one of --pred or --model");
      const auto gold = load_any(ev_gold);
      medner::Dataset pred;
      if (!ev_model.empty()) {
        pred = medner::predict(medner::load_model(ev_model), gold);
        if (!ev_pred_out.empty()) medner::save_documents(pred, ev_pred_out, format_of(ev_pred_out));
      } else {
        pred = load_any(ev_pred);
      }
      const auto avg = ev_avg == "macro" ? medner::Averaging::kMacro : medner::Averaging::kMicro;
      const auto report = medner::compute_report(gold, pred);
      const std::string json = medner::report_json(report, avg);
      std::cout << json << '\n';
      if (!ev_out.empty()) {
        ensure_parent(ev_out);
        std::ofstream(ev_out) << json << '\n';
      }
      if (!ev_tsv.empty()) {
        ensure_parent(ev_tsv);
        std::ofstream f(ev_tsv);
        medner::write_report_tsv(report, f, avg);
      }
    }

    else if (*curve) {
      auto spec = medner::experiment_from_json(common.section("experiment"));
      if (cv_seeds) {
        spec.seeds.clear();
        for (int s = 1; s <= *cv_seeds; ++s) spec.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      if (cv_threads) spec.threads = *cv_threads;
      if (!cv_fractions.empty()) spec.fractions = cv_fractions;
      if (!cv_methods.empty()) {
        spec.methods.clear();
        for (const auto& m : cv_methods) spec.methods.push_back(medner::parse_method(m));
      }
      if (!cv_target.empty()) spec.target_path = cv_target;
      if (!cv_source.empty()) spec.source_path = cv_source;
      if (!cv_corpus.empty()) spec.corpus_path = cv_corpus;
      if (common.seed) spec.data_seed = *common.seed;
      medner::validate(spec);
      const auto result = medner::run_grid(spec, [](const std::string& line) { std::cerr << line << '\n'; });
      medner::emit_reports(result, spec, cv_dir);
      std::cout << medner::curve_csv(result);
      if (cv_assert) {
        const auto h = medner::headline_check(result);
        std::cout << "headline: transfer+pretrain@0.5 " << h.pretrain_half << " vs blank@1.0 " << h.blank_full
                  << " margin " << h.margin << '\n';
        if (!h.passed) throw AssertionFailed("headline property failed, margin " + std::to_string(h.margin));
      }
    }

    else if (*serve) {
      medner::StoreOptions so;
      so.data_dir = sv_data;
      medner::AnnotationStore store(so);
      auto server = medner::make_http_server(store, {sv_token});
      g_server = server.get();
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      if (!server->bind_to_port(sv_host, sv_port))
        throw medner::IoError("cannot bind " + sv_host + ":" + std::to_string(sv_port));
      std::cout << "listening on " << sv_host << ":" << sv_port << std::endl;
      server->listen_after_bind();
      g_server = nullptr;
    }
  } catch (const AssertionFailed& e) {
    std::cerr << "error[assertion]: " << e.what() << '\n';
    return kAssertion;
  } catch (const medner::InvalidArgument& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << '\n';
    return kUsage;
  } catch (const medner::Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << '\n';
    return kRuntime;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error[invalid_argument]: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
