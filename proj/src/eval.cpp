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

#include "medner/eval.hpp"

#include <cstdio>
#include <ostream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "medner/error.hpp"

namespace medner {

double precision_of(const SpanCounts& c) {
  const std::size_t d = c.tp + c.fp;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(d);
}

double recall_of(const SpanCounts& c) {
  const std::size_t d = c.tp + c.fn;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(d);
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s <= 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

Prf prf(const SpanCounts& c) {
  const double p = precision_of(c);
  const double r = recall_of(c);
  return {p, r, f1_score(p, r)};
}

std::map<std::string, SpanCounts> match_spans(std::span<const EntitySpan> gold,
                                              std::span<const EntitySpan> pred) {
  std::map<std::string, SpanCounts> out;
  std::multiset<EntitySpan> unmatched(gold.begin(), gold.end());
  for (const auto& p : pred) {
    auto it = unmatched.find(p);
    if (it != unmatched.end()) {
      ++out[p.label].tp;
      unmatched.erase(it);
    } else {
      ++out[p.label].fp;
    }
  }
  for (const auto& g : unmatched) ++out[g.label].fn;
  return out;
}

Prf EvalReport::overall_prf(Averaging averaging) const {
  if (averaging == Averaging::kMicro || per_label.empty()) return prf(overall);
  Prf m;
  for (const auto& [label, c] : per_label) {
    const Prf x = prf(c);
    m.precision += x.precision;
    m.recall += x.recall;
    m.f1 += x.f1;
  }
  const double n = static_cast<double>(per_label.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

Prf EvalReport::label_prf(const std::string& label) const {
  auto it = per_label.find(label);
  return it == per_label.end() ? Prf{} : prf(it->second);
}

EvalReport compute_report(const Dataset& gold, const Dataset& pred) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : pred.documents) by_id.emplace(d.id, &d);
  if (by_id.size() != gold.documents.size())
    throw ValidationError("prediction set has " + std::to_string(pred.documents.size()) +
                          " documents, gold has " + std::to_string(gold.documents.size()));
  EvalReport report;
  for (const auto& label : gold.label_set) report.per_label[label];
  for (const auto& g : gold.documents) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw ValidationError("document '" + g.id + "' has no prediction");
    for (const auto& [label, c] : match_spans(g.spans, it->second->spans)) {
      report.per_label[label] += c;
      report.overall += c;
    }
  }
  report.documents = gold.documents.size();
  return report;
}

std::string report_json(const EvalReport& report, Averaging averaging) {
  auto entry = [](const SpanCounts& c, const Prf& x) {
    return nlohmann::ordered_json{{"tp", c.tp},          {"fp", c.fp},        {"fn", c.fn},
                                  {"precision", x.precision}, {"recall", x.recall}, {"f1", x.f1}};
  };
  nlohmann::ordered_json j;
  j["averaging"] = averaging == Averaging::kMicro ? "micro" : "macro";
  j["documents"] = report.documents;
  j["overall"] = entry(report.overall, report.overall_prf(averaging));
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [label, c] : report.per_label) labels[label] = entry(c, prf(c));
  j["labels"] = std::move(labels);
  return j.dump(2);
}

void write_report_tsv(const EvalReport& report, std::ostream& out, Averaging averaging) {
  auto row = [&](const std::string& name, const SpanCounts& c, const Prf& x) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "\t%.3f\t%.3f\t%.3f\n", x.precision, x.recall, x.f1);
    out << name << '\t' << c.tp << '\t' << c.fp << '\t' << c.fn << buf;
  };
  out << "label\ttp\tfp\tfn\tprecision\trecall\tf1\n";
  for (const auto& [label, c] : report.per_label) row(label, c, prf(c));
  row("overall", report.overall, report.overall_prf(averaging));
}

}  // namespace medner
