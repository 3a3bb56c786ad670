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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "medner/config.hpp"
#include "medner/error.hpp"
#include "medner/harness.hpp"
#include "quick.hpp"

using namespace medner;
namespace fs = std::filesystem;

namespace {

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

GridResult fake_grid(const std::vector<std::vector<double>>& f1_by_method, const std::vector<double>& fractions) {
  GridResult g;
  const std::vector<Method> methods = {Method::kBlank, Method::kTransfer, Method::kTransferPretrain};
  for (std::size_t fi = 0; fi < fractions.size(); ++fi)
    for (std::size_t m = 0; m < f1_by_method.size(); ++m) {
      Aggregate a;
      a.method = methods[m];
      a.fraction = fractions[fi];
      a.f1 = f1_by_method[m][fi];
      g.aggregates.push_back(a);
    }
  return g;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("medner-" + tag)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Harness, MethodNames) {
  for (Method m : {Method::kBlank, Method::kTransfer, Method::kTransferPretrain})
    EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("bert"), InvalidArgument);
}

TEST(Harness, DefaultGridShape) {
  const auto s = default_experiment_spec();
  EXPECT_EQ(s.methods.size() * s.fractions.size(), 18u);
  EXPECT_EQ(s.train.iterations, 100);
  EXPECT_DOUBLE_EQ(s.train.dropout, 0.2);
  EXPECT_EQ(s.pretrain.epochs, 100);
  EXPECT_GE(s.seeds.size(), 5u);
}

TEST(Harness, ValidateRejectsBadSpecs) {
  auto s = quick::spec();
  s.methods.clear();
  EXPECT_THROW(validate(s), InvalidArgument);
  s = quick::spec();
  s.fractions = {0.6, 0.5};
  EXPECT_THROW(validate(s), InvalidArgument);
  s.fractions = {0.0};
  EXPECT_THROW(validate(s), InvalidArgument);
  s = quick::spec();
  s.seeds.clear();
  EXPECT_THROW(validate(s), InvalidArgument);
}

TEST(Harness, HeadlineArithmetic) {
  const auto h = headline_check(0.734, 0.704);
  EXPECT_TRUE(h.passed);
  EXPECT_NEAR(h.margin, 0.030, 1e-12);
  const auto tie = headline_check(0.7, 0.7);
  EXPECT_TRUE(tie.passed);
  EXPECT_EQ(tie.margin, 0.0);
  EXPECT_FALSE(headline_check(0.69, 0.7).passed);
}

TEST(Harness, OrderingAndTrendChecks) {
  const std::vector<double> fr = {0.5, 1.0};
  EXPECT_TRUE(ordering_check(fake_grid({{0.6, 0.70}, {0.6, 0.75}, {0.7, 0.78}}, fr)));
  EXPECT_TRUE(ordering_check(fake_grid({{0.6, 0.75}, {0.6, 0.75}, {0.7, 0.75}}, fr)));  // ties pass
  EXPECT_FALSE(ordering_check(fake_grid({{0.6, 0.76}, {0.6, 0.75}, {0.7, 0.78}}, fr)));

  const std::vector<double> six = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::string detail;
  // Mirrors the reference curve: a 0.003 dip at 0.8 -> 0.9 for transfer.
  EXPECT_TRUE(trend_check(fake_grid({{.571, .605, .647, .667, .679, .704},
                                     {.700, .721, .748, .748, .745, .749},
                                     {.734, .749, .750, .767, .757, .785}},
                                    six),
                          0.02, &detail));
  EXPECT_NE(detail.find("0.0100"), std::string::npos) << detail;
  EXPECT_FALSE(trend_check(fake_grid({{.6, .7, .65, .7, .7, .7}, {.7, .7, .7, .7, .7, .7}, {.8, .8, .8, .8, .8, .8}},
                                     six),
                           0.02));
}

TEST(Harness, SourceModelGate) {
  auto s = quick::spec();
  s.embeddings.dim = 32;
  s.embeddings.epochs = 3;
  s.scorer.hidden = 32;
  s.source_train.iterations = 60;
  s.source_gate = 0.6;
  const auto d = quick::data(s);
  SkipGramConfig sg = s.embeddings;
  auto table = std::make_shared<const StaticEmbeddingTable>(train_static_embeddings(d.corpus, sg));
  const auto [model, f1] = build_source_model(s, d, table, 1);
  EXPECT_EQ(model.scheme().num_actions(), 9);
  EXPECT_GT(f1, 0.6);
  const auto [again, f1b] = build_source_model(s, d, table, 1);
  EXPECT_TRUE(again == model);
  EXPECT_EQ(f1, f1b);
  s.source_gate = 0.999999;
  EXPECT_THROW(build_source_model(s, d, table, 1), Error);
}

TEST(Harness, SingleCellGrid) {
  auto s = quick::spec();
  s.methods = {Method::kBlank};
  s.fractions = {1.0};
  const auto r = run_grid(s, quick::data(s));
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.aggregates.size(), 1u);
  EXPECT_EQ(r.cells[0].report.documents, quick::data(s).test.size());
}

TEST(Harness, GridIsReproducibleAndReportsHaveShape) {
  auto s = quick::spec();
  const auto d = quick::data(s);
  const auto a = run_grid(s, d);
  s.threads = 2;  // worker count must not change results
  const auto b = run_grid(s, d);
  EXPECT_EQ(curve_csv(a), curve_csv(b));
  EXPECT_EQ(label_f1_csv(a), label_f1_csv(b));
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].report.overall, b.cells[i].report.overall);
    EXPECT_EQ(a.cells[i].test_fingerprint, a.test_fingerprint);  // one shared test split
  }
  EXPECT_EQ(lines(curve_csv(a)), 19u);  // header + 18
  EXPECT_EQ(lines(label_f1_csv(a)), 1u + a.labels.size());
  const auto fig = nlohmann::json::parse(curve_json(a));
  ASSERT_EQ(fig["series"].size(), 3u);
  for (const auto& series : fig["series"]) EXPECT_EQ(series["points"].size(), 6u);

  TempDir out("harness-out");
  emit_reports(a, s, out.path);
  for (const char* f : {"curve.csv", "label_f1.csv", "curve.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(out.path / f)) << f;
  std::ifstream m(out.path / "manifest.json");
  const auto manifest = nlohmann::json::parse(m);
  EXPECT_EQ(manifest["test_fingerprint"], a.test_fingerprint);
}

TEST(Harness, EmitRejectsEmptyMethodsBeforeWriting) {
  auto s = quick::spec();
  s.methods = {Method::kBlank};
  s.fractions = {1.0};
  const auto r = run_grid(s, quick::data(s));
  s.methods.clear();
  TempDir out("harness-empty");
  EXPECT_THROW(emit_reports(r, s, out.path), InvalidArgument);
  EXPECT_FALSE(fs::exists(out.path));
}

TEST(Config, RoundTripAndRejections) {
  auto s = quick::spec();
  const auto back = experiment_from_json(to_json(s));
  EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
  EXPECT_THROW(experiment_from_json(Json{{"methodz", Json::array()}}), InvalidArgument);
  EXPECT_THROW(experiment_from_json(Json{{"train", {{"iterations", "many"}}}}), InvalidArgument);
  EXPECT_THROW(experiment_from_json(Json{{"pretrain", {{"loss", "huber"}}}}), InvalidArgument);
  const auto partial = experiment_from_json(Json{{"train", {{"iterations", 7}}}, {"methods", {"pretrain"}}});
  EXPECT_EQ(partial.train.iterations, 7);
  EXPECT_EQ(partial.train.dropout, default_experiment_spec().train.dropout);
  EXPECT_EQ(partial.methods, std::vector<Method>{Method::kTransferPretrain});
}
