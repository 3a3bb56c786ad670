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

// Exact-span evaluation: a prediction counts only when start, end and label
// all match a gold span.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>

#include "medner/corpus.hpp"

namespace medner {

struct SpanCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  SpanCounts& operator+=(const SpanCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const SpanCounts&) const = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Zero denominators give 0.
double precision_of(const SpanCounts& c);
double recall_of(const SpanCounts& c);
double f1_score(double precision, double recall);
Prf prf(const SpanCounts& c);

// Counts per label. Each span is matched at most once.
std::map<std::string, SpanCounts> match_spans(std::span<const EntitySpan> gold,
                                              std::span<const EntitySpan> pred);

enum class Averaging { kMicro, kMacro };

struct EvalReport {
  std::map<std::string, SpanCounts> per_label;
  SpanCounts overall;  // sum of per_label
  std::size_t documents = 0;

  // Micro pools the counts; macro averages per-label P, R and F1.
  Prf overall_prf(Averaging averaging = Averaging::kMicro) const;
  Prf label_prf(const std::string& label) const;
};

// Documents are paired by id; both datasets must hold the same ids.
EvalReport compute_report(const Dataset& gold, const Dataset& pred);

std::string report_json(const EvalReport& report, Averaging averaging = Averaging::kMicro);
// label, tp, fp, fn, precision, recall, f1 rows followed by an overall row.
void write_report_tsv(const EvalReport& report, std::ostream& out,
                      Averaging averaging = Averaging::kMicro);

}  // namespace medner
