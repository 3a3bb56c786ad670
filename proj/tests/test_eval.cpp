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

#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "medner/error.hpp"
#include "medner/eval.hpp"
#include "reference_values.hpp"

using namespace medner;

TEST(Metrics, HandEnumeratedMatch) {
  const std::vector<EntitySpan> gold = {{0, 5, "CHEMICAL"}, {10, 14, "DISEASE"}};
  const std::vector<EntitySpan> pred = {{0, 5, "CHEMICAL"}, {10, 13, "DISEASE"}};
  SpanCounts total;
  for (const auto& [label, c] : match_spans(gold, pred)) total += c;
  EXPECT_EQ(total, (SpanCounts{1, 1, 1}));
  const Prf p = prf(total);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 0.5);
  EXPECT_DOUBLE_EQ(p.f1, 0.5);
}

TEST(Metrics, LabelMismatchIsBothErrors) {
  const std::vector<EntitySpan> gold = {{0, 5, "CHEMICAL"}};
  const std::vector<EntitySpan> pred = {{0, 5, "DISEASE"}};
  const auto m = match_spans(gold, pred);
  EXPECT_EQ(m.at("CHEMICAL"), (SpanCounts{0, 0, 1}));
  EXPECT_EQ(m.at("DISEASE"), (SpanCounts{0, 1, 0}));
}

TEST(Metrics, IdentityAndEmpty) {
  const std::vector<EntitySpan> gold = {{0, 5, "CHEMICAL"}, {6, 9, "DOSAGE"}};
  SpanCounts same;
  for (const auto& [l, c] : match_spans(gold, gold)) same += c;
  EXPECT_DOUBLE_EQ(prf(same).f1, 1.0);
  SpanCounts none;
  for (const auto& [l, c] : match_spans(gold, {})) none += c;
  EXPECT_EQ(prf(none).precision, 0.0);
  EXPECT_EQ(prf(none).recall, 0.0);
  EXPECT_EQ(prf(none).f1, 0.0);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
}

TEST(Metrics, ReferenceCurveArithmetic) {
  for (const auto& row : reference::kCurve)
    EXPECT_NEAR(f1_score(row.precision, row.recall), row.f1, reference::kRoundingTolerance)
        << row.method << " at " << row.fraction;
  EXPECT_NEAR(f1_score(0.724, 0.685), 0.704, reference::kRoundingTolerance);
  EXPECT_NEAR(f1_score(0.711, 0.759), 0.734, reference::kRoundingTolerance);
  EXPECT_NEAR(f1_score(0.776, 0.794), 0.785, reference::kRoundingTolerance);
}

namespace {

Dataset two_docs(std::vector<EntitySpan> first, std::vector<EntitySpan> second) {
  return make_dataset({make_document("a", "aspirin for fever", std::move(first)),
                       make_document("b", "fever and cough", std::move(second))},
                      {"CHEMICAL", "SYMPTOM"});
}

}  // namespace

TEST(Report, MicroAndMacro) {
  const auto gold = two_docs({{0, 7, "CHEMICAL"}, {12, 17, "SYMPTOM"}}, {{0, 5, "SYMPTOM"}, {10, 15, "SYMPTOM"}});
  const auto pred = two_docs({{0, 7, "CHEMICAL"}}, {{0, 5, "SYMPTOM"}, {10, 15, "CHEMICAL"}});
  const auto r = compute_report(gold, pred);
  EXPECT_EQ(r.documents, 2u);
  EXPECT_EQ(r.overall, (SpanCounts{2, 1, 2}));
  EXPECT_NEAR(r.overall_prf().f1, f1_score(2.0 / 3, 0.5), 1e-12);
  // Macro: CHEMICAL P=.5 R=1, SYMPTOM P=1 R=1/3.
  const Prf macro = r.overall_prf(Averaging::kMacro);
  EXPECT_NEAR(macro.precision, 0.75, 1e-12);
  EXPECT_NEAR(macro.recall, (1.0 + 1.0 / 3) / 2, 1e-12);
  EXPECT_NEAR(macro.f1, (f1_score(0.5, 1.0) + f1_score(1.0, 1.0 / 3)) / 2, 1e-12);
}

TEST(Report, RejectsMismatchedDocuments) {
  const auto gold = two_docs({}, {});
  auto pred = gold;
  pred.documents[1].id = "zzz";
  EXPECT_THROW(compute_report(gold, pred), ValidationError);
  pred.documents.pop_back();
  EXPECT_THROW(compute_report(gold, pred), ValidationError);
}

TEST(Report, JsonAndTsv) {
  const auto gold = two_docs({{0, 7, "CHEMICAL"}}, {});
  const auto r = compute_report(gold, gold);
  const auto j = nlohmann::json::parse(report_json(r));
  EXPECT_EQ(j["overall"]["f1"].get<double>(), 1.0);
  EXPECT_TRUE(j["labels"].contains("SYMPTOM"));  // present in the label set, no spans
  std::ostringstream tsv;
  write_report_tsv(r, tsv);
  EXPECT_EQ(tsv.str(),
            "label\ttp\tfp\tfn\tprecision\trecall\tf1\n"
            "CHEMICAL\t1\t0\t0\t1.000\t1.000\t1.000\n"
            "SYMPTOM\t0\t0\t0\t0.000\t0.000\t0.000\n"
            "overall\t1\t0\t0\t1.000\t1.000\t1.000\n");
}
