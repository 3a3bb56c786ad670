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

// Annotated-document data model, tokenization, dataset splitting and file I/O.
//
// All offsets are Unicode scalar-value indices into Document::text (which is
// stored as UTF-8). Spans are half-open [start, end).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace medner {

struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;

  auto operator<=>(const EntitySpan&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<Token> tokens;
  std::vector<EntitySpan> spans;  // sorted by start

  bool operator==(const Document&) const = default;
};

struct Dataset {
  std::vector<Document> documents;
  std::set<std::string> label_set;

  bool empty() const { return documents.empty(); }
  std::size_t size() const { return documents.size(); }
  bool operator==(const Dataset&) const = default;
};

// Whitespace split, then leading and trailing ASCII punctuation detached one
// character at a time. Internal punctuation (hyphens, decimal points) stays.
std::vector<Token> tokenize(std::string_view text);

// Tokenizes, sorts spans and checks every invariant. Throws ValidationError
// naming the document id when a span is empty, overlaps another, runs past
// the text, or does not fall on token boundaries.
Document make_document(std::string id, std::string text, std::vector<EntitySpan> spans);
void validate_document(const Document& doc);

// Builds a dataset. When `labels` is empty the label set is the union of span
// labels; otherwise every span label must belong to it.
Dataset make_dataset(std::vector<Document> documents, std::set<std::string> labels = {});

// Same label set, chosen documents (in the given order).
Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

struct SplitSpec {
  double test_ratio = 0.2;
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

// Seeded shuffle, then the last round(n * test_ratio) documents become the
// test set. Returns (train, test).
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, const SplitSpec& spec);

// First floor(fraction * n) documents of a seeded shuffle. Results for the
// same seed are prefixes of each other.
Dataset take_fraction(const Dataset& train, double fraction, std::uint64_t seed);

struct CorpusStats {
  std::size_t documents = 0;
  std::size_t tokens = 0;
  std::map<std::string, std::size_t> label_counts;

  std::size_t spans() const;
};

CorpusStats dataset_stats(const Dataset& dataset);

enum class DocumentFormat { kJsonLines, kColumns };

DocumentFormat parse_document_format(std::string_view name);

Dataset read_documents(std::istream& in, DocumentFormat format);
void write_documents(const Dataset& dataset, std::ostream& out, DocumentFormat format);
Dataset load_documents(const std::filesystem::path& path, DocumentFormat format);
void save_documents(const Dataset& dataset, const std::filesystem::path& path,
                    DocumentFormat format);

// Raw corpus: one sentence per line, blank lines skipped.
std::vector<std::string> load_raw_corpus(const std::filesystem::path& path);
void save_raw_corpus(const std::vector<std::string>& sentences, const std::filesystem::path& path);

// Stable 64-bit content hash of a dataset (hex), independent of file format.
std::string dataset_fingerprint(const Dataset& dataset);

std::string lowercase_ascii(std::string_view s);

}  // namespace medner
