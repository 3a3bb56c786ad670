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

#include "medner/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "medner/bilou.hpp"
#include "medner/error.hpp"
#include "medner/random.hpp"
#include "medner/utf8.hpp"

namespace medner {
namespace {

bool is_ascii_punct(char32_t c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string span_str(const EntitySpan& s) {
  return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + ") " + s.label;
}

constexpr std::string_view kIdPrefix = "# id = ";
constexpr std::string_view kTextPrefix = "# text = ";

}  // namespace

std::string lowercase_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  const std::u32string cps = utf8::decode(text);
  const auto offsets = utf8::byte_offsets(text);
  std::vector<Token> tokens;
  auto emit = [&](std::size_t a, std::size_t b) {
    tokens.push_back(Token{std::string(text.substr(offsets[a], offsets[b] - offsets[a])), a, b});
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    if (utf8::is_space(cps[i])) {
      ++i;
      continue;
    }
    std::size_t a = i;
    std::size_t b = i;
    while (b < cps.size() && !utf8::is_space(cps[b])) ++b;
    i = b;

    while (a < b && is_ascii_punct(cps[a])) {
      emit(a, a + 1);
      ++a;
    }
    std::size_t e = b;
    while (e > a && is_ascii_punct(cps[e - 1])) --e;
    if (a < e) emit(a, e);
    for (std::size_t k = e; k < b; ++k) emit(k, k + 1);
  }
  return tokens;
}

void validate_document(const Document& doc) {
  const std::size_t n = utf8::length(doc.text);
  std::unordered_set<std::size_t> starts, ends;
  for (const Token& t : doc.tokens) {
    starts.insert(t.start);
    ends.insert(t.end);
  }
  const EntitySpan* prev = nullptr;
  for (const EntitySpan& s : doc.spans) {
    auto fail = [&](const std::string& why) {
      throw ValidationError("document '" + doc.id + "': span " + span_str(s) + " " + why);
    };
    if (s.start >= s.end) fail("has end <= start");
    if (s.end > n) fail("runs past the end of the text");
    if (s.label.empty()) fail("has an empty label");
    if (prev != nullptr && s.start < prev->end) fail("overlaps " + span_str(*prev));
    if (!starts.count(s.start) || !ends.count(s.end)) fail("is not aligned to token boundaries");
    prev = &s;
  }
}

Document make_document(std::string id, std::string text, std::vector<EntitySpan> spans) {
  if (!utf8::is_valid(text)) throw ValidationError("document '" + id + "': text is not UTF-8");
  Document doc;
  doc.id = std::move(id);
  doc.tokens = tokenize(text);
  doc.text = std::move(text);
  std::sort(spans.begin(), spans.end());
  doc.spans = std::move(spans);
  validate_document(doc);
  return doc;
}

Dataset make_dataset(std::vector<Document> documents, std::set<std::string> labels) {
  const bool derive = labels.empty();
  std::unordered_set<std::string> ids;
  for (const Document& d : documents) {
    if (!ids.insert(d.id).second) throw ValidationError("duplicate document id '" + d.id + "'");
    for (const EntitySpan& s : d.spans) {
      if (derive) {
        labels.insert(s.label);
      } else if (!labels.count(s.label)) {
        throw ValidationError("document '" + d.id + "': label '" + s.label +
                              "' is not in the label set");
      }
    }
  }
  return Dataset{std::move(documents), std::move(labels)};
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.label_set = dataset.label_set;
  out.documents.reserve(indices.size());
  for (std::size_t i : indices) out.documents.push_back(dataset.documents.at(i));
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, const SplitSpec& spec) {
  if (dataset.empty()) throw InvalidArgument("cannot split an empty dataset");
  if (!(spec.test_ratio > 0.0 && spec.test_ratio < 1.0))
    throw InvalidArgument("test_ratio must lie in (0, 1)");
  const std::size_t total = dataset.size();
  const auto test_n = static_cast<std::size_t>(std::llround(static_cast<double>(total) * spec.test_ratio));
  const auto order = seeded_permutation(total, spec.seed);
  const std::size_t train_n = total - test_n;
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<long>(train_n));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<long>(train_n), order.end());
  return {subset(dataset, train_idx), subset(dataset, test_idx)};
}

Dataset take_fraction(const Dataset& train, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("fraction must lie in (0, 1]");
  const std::size_t n = train.size();
  // The epsilon keeps e.g. 0.7 * 10 from landing on 6.999...
  const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  auto order = seeded_permutation(n, seed);
  order.resize(std::min(keep, n));
  return subset(train, order);
}

std::size_t CorpusStats::spans() const {
  std::size_t total = 0;
  for (const auto& [label, count] : label_counts) total += count;
  return total;
}

CorpusStats dataset_stats(const Dataset& dataset) {
  CorpusStats stats;
  for (const auto& label : dataset.label_set) stats.label_counts[label] = 0;
  stats.documents = dataset.size();
  for (const Document& d : dataset.documents) {
    stats.tokens += d.tokens.size();
    for (const EntitySpan& s : d.spans) ++stats.label_counts[s.label];
  }
  return stats;
}

DocumentFormat parse_document_format(std::string_view name) {
  if (name == "jsonl" || name == "json-lines") return DocumentFormat::kJsonLines;
  if (name == "columns" || name == "column" || name == "conll") return DocumentFormat::kColumns;
  throw InvalidArgument("unknown document format '" + std::string(name) + "'");
}

namespace {

Dataset read_jsonl(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) -> void {
      throw FormatError("line " + std::to_string(line_no) + ": " + why);
    };
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    try {
      if (!rec.is_object()) fail("record is not an object");
      const std::string id = rec.at("id").get<std::string>();
      const std::string text = rec.at("text").get<std::string>();
      std::vector<EntitySpan> spans;
      if (rec.contains("spans")) {
        for (const auto& s : rec.at("spans")) {
          const auto start = s.at("start").get<std::int64_t>();
          const auto end = s.at("end").get<std::int64_t>();
          if (start < 0 || end < 0) fail("document '" + id + "': negative offset");
          spans.push_back(EntitySpan{static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                                     s.at("label").get<std::string>()});
        }
      }
      if (!ids.insert(id).second) fail("duplicate document id '" + id + "'");
      docs.push_back(make_document(id, text, std::move(spans)));
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("bad record: ") + e.what());
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  }
  return make_dataset(std::move(docs));
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
  for (const Document& d : dataset.documents) {
    nlohmann::ordered_json rec;
    rec["id"] = d.id;
    rec["text"] = d.text;
    rec["spans"] = nlohmann::ordered_json::array();
    for (const EntitySpan& s : d.spans)
      rec["spans"].push_back({{"start", s.start}, {"end", s.end}, {"label", s.label}});
    out << rec.dump() << '\n';
  }
}

Dataset read_columns(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;

  std::optional<std::string> id, text;
  std::vector<std::string> words, tags;
  std::size_t block_start = 1;

  auto flush = [&]() {
    if (words.empty() && !id && !text) return;
    const std::string where = "line " + std::to_string(block_start) + ": ";
    std::string doc_id = id ? *id : "doc-" + std::to_string(docs.size() + 1);
    std::string doc_text;
    if (text) {
      doc_text = *text;
    } else {
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) doc_text += ' ';
        doc_text += words[i];
      }
    }
    std::vector<Token> tokens = tokenize(doc_text);
    bool same = tokens.size() == words.size();
    for (std::size_t i = 0; same && i < words.size(); ++i) same = tokens[i].text == words[i];
    if (!same) throw FormatError(where + "document '" + doc_id + "': token rows do not match text");
    std::vector<EntitySpan> spans;
    try {
      spans = tags_to_spans(tokens, tags);
      docs.push_back(make_document(doc_id, doc_text, std::move(spans)));
    } catch (const Error& e) {
      throw FormatError(where + "document '" + doc_id + "': " + e.what());
    }
    id.reset();
    text.reset();
    words.clear();
    tags.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      block_start = line_no + 1;
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw FormatError("line " + std::to_string(line_no) + ": " + why);
    };
    if (words.empty() && !id && !text) block_start = line_no;
    if (line.starts_with(kIdPrefix)) {
      id = line.substr(kIdPrefix.size());
      continue;
    }
    if (line.starts_with(kTextPrefix)) {
      try {
        text = nlohmann::json::parse(line.substr(kTextPrefix.size())).get<std::string>();
      } catch (const nlohmann::json::exception&) {
        fail("malformed text header");
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos)
      fail("expected 'token<TAB>tag'");
    words.push_back(line.substr(0, tab));
    tags.push_back(line.substr(tab + 1));
  }
  flush();
  return make_dataset(std::move(docs));
}

void write_columns(const Dataset& dataset, std::ostream& out) {
  for (const Document& d : dataset.documents) {
    out << kIdPrefix << d.id << '\n';
    out << kTextPrefix << nlohmann::json(d.text).dump() << '\n';
    const auto tags = spans_to_tags(d.tokens, d.spans);
    for (std::size_t i = 0; i < d.tokens.size(); ++i) out << d.tokens[i].text << '\t' << tags[i] << '\n';
    out << '\n';
  }
}

}  // namespace

Dataset read_documents(std::istream& in, DocumentFormat format) {
  return format == DocumentFormat::kJsonLines ? read_jsonl(in) : read_columns(in);
}

void write_documents(const Dataset& dataset, std::ostream& out, DocumentFormat format) {
  if (format == DocumentFormat::kJsonLines)
    write_jsonl(dataset, out);
  else
    write_columns(dataset, out);
}

Dataset load_documents(const std::filesystem::path& path, DocumentFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_documents(in, format);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_documents(const Dataset& dataset, const std::filesystem::path& path,
                    DocumentFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_documents(dataset, out, format);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> load_raw_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!utf8::is_valid(line))
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": invalid UTF-8");
    lines.push_back(line);
  }
  return lines;
}

void save_raw_corpus(const std::vector<std::string>& sentences, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : sentences) out << s << '\n';
}

std::string dataset_fingerprint(const Dataset& dataset) {
  std::ostringstream os;
  write_jsonl(dataset, os);
  for (const auto& l : dataset.label_set) os << l << '\n';
  const std::string bytes = os.str();
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace medner
