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

#include "medner/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "medner/config.hpp"
#include "medner/error.hpp"
#include "medner/eval.hpp"
#include "medner/random.hpp"
#include "medner/utf8.hpp"

namespace medner {
namespace {

using Json = nlohmann::ordered_json;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json spans_json(const std::vector<EntitySpan>& spans) {
  Json a = Json::array();
  for (const auto& s : spans) a.push_back({{"start", s.start}, {"end", s.end}, {"label", s.label}});
  return a;
}

std::vector<EntitySpan> spans_from_json(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("spans must be an array");
  std::vector<EntitySpan> out;
  for (const auto& s : j) {
    if (!s.is_object() || !s.contains("start") || !s.contains("end") || !s.contains("label"))
      throw InvalidArgument("each span needs start, end and label");
    if (!s["start"].is_number_unsigned() || !s["end"].is_number_unsigned() || !s["label"].is_string())
      throw InvalidArgument("span start/end must be non-negative integers and label a string");
    out.push_back({s["start"].get<std::size_t>(), s["end"].get<std::size_t>(), s["label"].get<std::string>()});
  }
  return out;
}

Json labels_json(const std::vector<LabelDef>& labels) {
  Json a = Json::array();
  for (const auto& l : labels) a.push_back({{"label", l.label}, {"hotkey", l.hotkey}, {"color", l.color}});
  return a;
}

std::vector<LabelDef> labels_from_json(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("labels must be an array");
  std::vector<LabelDef> out;
  for (const auto& l : j) {
    LabelDef d;
    d.label = l.value("label", "");
    d.hotkey = l.value("hotkey", "");
    d.color = l.value("color", "");
    out.push_back(std::move(d));
  }
  return out;
}

bool is_hex_color(const std::string& c) {
  if (c.size() != 7 || c[0] != '#') return false;
  return std::all_of(c.begin() + 1, c.end(), [](char ch) { return std::isxdigit(static_cast<unsigned char>(ch)); });
}

void validate_labels(const std::vector<LabelDef>& labels) {
  if (labels.empty()) throw ValidationError("a project needs at least one label");
  std::set<std::string> names, keys;
  for (const auto& l : labels) {
    if (l.label.empty()) throw ValidationError("label names must be non-empty");
    if (utf8::length(l.hotkey) != 1) throw ValidationError("hotkey for '" + l.label + "' must be one character");
    if (!is_hex_color(l.color)) throw ValidationError("color for '" + l.label + "' must look like #rrggbb");
    if (!names.insert(l.label).second) throw ValidationError("duplicate label '" + l.label + "'");
    if (!keys.insert(l.hotkey).second) throw ValidationError("duplicate hotkey '" + l.hotkey + "'");
  }
}

// Snapshot goes through a temp file and rename; only then is the journal cut.
void write_snapshot(const std::filesystem::path& dir, const Json& state) {
  const auto tmp = dir / "snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << state.dump() << '\n';
    if (!out) throw IoError("cannot write snapshot in " + dir.string());
  }
  std::filesystem::rename(tmp, dir / "snapshot.json");
  std::ofstream(dir / "journal.jsonl", std::ios::trunc | std::ios::binary);
}

}  // namespace

std::vector<LabelDef> clinical_label_template() {
  return {{"CHEMICAL", "C", "#4e79a7"}, {"DISEASE", "D", "#e15759"}, {"SYMPTOM", "S", "#f28e2b"},
          {"DOSAGE", "G", "#59a14f"}};
}

std::string status_name(DocStatus s) {
  switch (s) {
    case DocStatus::kFresh: return "fresh";
    case DocStatus::kSuggested: return "suggested";
    case DocStatus::kAnnotated: return "annotated";
    case DocStatus::kReviewed: return "reviewed";
  }
  return "?";
}

DocStatus parse_status(std::string_view name) {
  if (name == "fresh") return DocStatus::kFresh;
  if (name == "suggested") return DocStatus::kSuggested;
  if (name == "annotated") return DocStatus::kAnnotated;
  if (name == "reviewed") return DocStatus::kReviewed;
  throw InvalidArgument("unknown status '" + std::string(name) + "'");
}

std::optional<DocStatus> next_status(DocStatus current, StatusEvent event) {
  switch (event) {
    case StatusEvent::kSuggest:
      return current == DocStatus::kFresh ? DocStatus::kSuggested : current;
    case StatusEvent::kSave:
      return current == DocStatus::kReviewed ? DocStatus::kReviewed : DocStatus::kAnnotated;
    case StatusEvent::kReview:
      if (current == DocStatus::kAnnotated || current == DocStatus::kReviewed) return DocStatus::kReviewed;
      return std::nullopt;
  }
  return std::nullopt;
}

std::string job_state_name(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "?";
}

Json to_json(const AnnotationRecord& r, bool full) {
  Json j = {{"id", r.document.id},
            {"project_id", r.project_id},
            {"name", r.name},
            {"status", status_name(r.status)},
            {"revision", r.revision},
            {"last_editor", r.last_editor}};
  if (!full) return j;
  j["text"] = r.document.text;
  Json tokens = Json::array();
  for (const auto& t : r.document.tokens) tokens.push_back({{"text", t.text}, {"start", t.start}, {"end", t.end}});
  j["tokens"] = std::move(tokens);
  j["spans"] = spans_json(r.document.spans);
  j["suggestions"] = spans_json(r.suggestions);
  j["suggestion_version"] = r.suggestion_version;
  return j;
}

Json to_json(const Project& p) {
  return {{"id", p.id},
          {"name", p.name},
          {"labels", labels_json(p.labels)},
          {"documents", p.document_ids.size()},
          {"model_version", p.model_version}};
}

Json to_json(const TrainJob& j) {
  return {{"id", j.id},
          {"project_id", j.project_id},
          {"state", job_state_name(j.state)},
          {"model_version", j.model_version},
          {"metrics", j.metrics.is_null() ? Json::object() : j.metrics},
          {"error", j.error},
          {"queued_ms", j.queued_ms},
          {"started_ms", j.started_ms},
          {"finished_ms", j.finished_ms}};
}

// ---------------------------------------------------------------- store

AnnotationStore::AnnotationStore(StoreOptions options) : options_(std::move(options)) {
  if (!options_.data_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options_.data_dir / "models", ec);
    if (ec) throw IoError("cannot create " + options_.data_dir.string() + ": " + ec.message());
    load();
  }
}

AnnotationStore::~AnnotationStore() {
  std::vector<std::jthread> workers;
  {
    std::lock_guard lock(job_mu_);
    workers.swap(workers_);
  }
  workers.clear();  // joins
}

Project& AnnotationStore::project_locked(const std::string& id) {
  auto it = projects_.find(id);
  if (it == projects_.end()) throw NotFound("no project '" + id + "'");
  return it->second;
}

const Project& AnnotationStore::project_locked(const std::string& id) const {
  auto it = projects_.find(id);
  if (it == projects_.end()) throw NotFound("no project '" + id + "'");
  return it->second;
}

AnnotationRecord& AnnotationStore::record_locked(const std::string& doc_id) {
  auto it = records_.find(doc_id);
  if (it == records_.end()) throw NotFound("no document '" + doc_id + "'");
  return it->second;
}

const AnnotationRecord& AnnotationStore::record_locked(const std::string& doc_id) const {
  auto it = records_.find(doc_id);
  if (it == records_.end()) throw NotFound("no document '" + doc_id + "'");
  return it->second;
}

// Every mutation goes through apply(), both live and on journal replay.
void AnnotationStore::apply(const Json& e) {
  const std::string op = e.at("op");
  if (op == "project") {
    Project p;
    p.id = e.at("id");
    p.name = e.at("name");
    p.labels = labels_from_json(e.at("labels"));
    projects_[p.id] = std::move(p);
    project_counter_ = std::max(project_counter_, e.at("counter").get<int>());
  } else if (op == "document") {
    AnnotationRecord r;
    r.project_id = e.at("project");
    r.name = e.at("name");
    r.document = make_document(e.at("id"), e.at("text"), {});
    project_locked(r.project_id).document_ids.push_back(r.document.id);
    records_[r.document.id] = std::move(r);
  } else if (op == "spans") {
    AnnotationRecord& r = record_locked(e.at("doc"));
    r.document = make_document(r.document.id, r.document.text, spans_from_json(e.at("spans")));
    r.status = *next_status(r.status, StatusEvent::kSave);
    r.last_editor = e.at("editor");
    ++r.revision;
  } else if (op == "suggest") {
    AnnotationRecord& r = record_locked(e.at("doc"));
    r.suggestions = spans_from_json(e.at("spans"));
    r.suggestion_version = e.at("version");
    r.status = *next_status(r.status, StatusEvent::kSuggest);
    ++r.revision;
  } else if (op == "status") {
    AnnotationRecord& r = record_locked(e.at("doc"));
    r.status = parse_status(e.at("status").get<std::string>());
    r.last_editor = e.at("editor");
    ++r.revision;
  } else if (op == "model") {
    Project& p = project_locked(e.at("project"));
    p.model_version = e.at("version");
    p.model_counter = e.at("counter");
    if (e.contains("path")) models_[p.id] = std::make_shared<const NerModel>(load_model(e.at("path").get<std::string>()));
  } else {
    throw FormatError("unknown journal operation '" + op + "'");
  }
}

void AnnotationStore::commit(const Json& event) {
  apply(event);
  if (options_.data_dir.empty()) return;
  {
    std::ofstream out(options_.data_dir / "journal.jsonl", std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to journal in " + options_.data_dir.string());
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw IoError("journal write failed");
  }
  if (++journal_entries_ >= options_.snapshot_every) {
    write_snapshot(options_.data_dir, state_json());
    journal_entries_ = 0;
  }
}

AnnotationStore::Json AnnotationStore::state_json() const {
  Json projects = Json::array();
  for (const auto& [id, p] : projects_) {
    Json pj = {{"id", p.id},
               {"name", p.name},
               {"labels", labels_json(p.labels)},
               {"document_ids", p.document_ids},
               {"model_version", p.model_version},
               {"model_counter", p.model_counter}};
    projects.push_back(std::move(pj));
  }
  Json records = Json::array();
  for (const auto& [id, r] : records_)
    records.push_back({{"id", id},
                       {"project", r.project_id},
                       {"name", r.name},
                       {"text", r.document.text},
                       {"spans", spans_json(r.document.spans)},
                       {"status", status_name(r.status)},
                       {"suggestions", spans_json(r.suggestions)},
                       {"suggestion_version", r.suggestion_version},
                       {"revision", r.revision},
                       {"last_editor", r.last_editor}});
  return {{"version", 1}, {"project_counter", project_counter_}, {"projects", projects}, {"records", records}};
}

void AnnotationStore::snapshot() {
  std::unique_lock lock(mu_);
  if (options_.data_dir.empty()) return;
  write_snapshot(options_.data_dir, state_json());
  journal_entries_ = 0;
}

void AnnotationStore::load() {
  const auto snap = options_.data_dir / "snapshot.json";
  if (std::filesystem::exists(snap)) {
    std::ifstream in(snap, std::ios::binary);
    Json s;
    try {
      s = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(snap.string() + ": " + e.what());
    }
    project_counter_ = s.at("project_counter");
    for (const auto& pj : s.at("projects")) {
      Project p;
      p.id = pj.at("id");
      p.name = pj.at("name");
      p.labels = labels_from_json(pj.at("labels"));
      p.document_ids = pj.at("document_ids").get<std::vector<std::string>>();
      p.model_version = pj.at("model_version");
      p.model_counter = pj.at("model_counter");
      if (!p.model_version.empty()) {
        const auto path = options_.data_dir / "models" / p.id / (p.model_version + ".bin");
        models_[p.id] = std::make_shared<const NerModel>(load_model(path));
      }
      projects_[p.id] = std::move(p);
    }
    for (const auto& rj : s.at("records")) {
      AnnotationRecord r;
      r.project_id = rj.at("project");
      r.name = rj.at("name");
      r.document = make_document(rj.at("id"), rj.at("text"), spans_from_json(rj.at("spans")));
      r.status = parse_status(rj.at("status").get<std::string>());
      r.suggestions = spans_from_json(rj.at("suggestions"));
      r.suggestion_version = rj.at("suggestion_version");
      r.revision = rj.at("revision");
      r.last_editor = rj.at("last_editor");
      records_[r.document.id] = std::move(r);
    }
  }
  const auto journal = options_.data_dir / "journal.jsonl";
  if (!std::filesystem::exists(journal)) return;
  std::ifstream in(journal, std::ios::binary);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Json e;
    try {
      e = Json::parse(lines[i]);
    } catch (const nlohmann::json::exception&) {
      if (i + 1 == lines.size()) break;  // torn final write
      throw FormatError(journal.string() + ": line " + std::to_string(i + 1) + " is not valid JSON");
    }
    apply(e);
    ++journal_entries_;
  }
}

Project AnnotationStore::create_project(const std::string& name, std::vector<LabelDef> labels) {
  if (name.empty()) throw ValidationError("project name must be non-empty");
  validate_labels(labels);
  std::unique_lock lock(mu_);
  const int counter = project_counter_ + 1;
  const std::string id = "p" + std::to_string(counter);
  commit({{"op", "project"}, {"id", id}, {"name", name}, {"labels", labels_json(labels)}, {"counter", counter}});
  return projects_.at(id);
}

Project AnnotationStore::project(const std::string& id) const {
  std::shared_lock lock(mu_);
  return project_locked(id);
}

std::vector<Project> AnnotationStore::projects() const {
  std::shared_lock lock(mu_);
  std::vector<Project> out;
  for (const auto& [id, p] : projects_) out.push_back(p);
  return out;
}

std::vector<AnnotationRecord> AnnotationStore::upload_documents(const std::string& project_id,
                                                                const std::vector<UploadFile>& files) {
  for (const auto& f : files) {
    if (f.content.empty()) throw ValidationError("file '" + f.name + "' is empty");
    if (!utf8::is_valid(f.content)) throw ValidationError("file '" + f.name + "' is not valid UTF-8");
  }
  std::unique_lock lock(mu_);
  project_locked(project_id);
  std::vector<AnnotationRecord> out;
  for (const auto& f : files) {
    const std::string id = project_id + "-" + hex64(fnv1a64(f.content.data(), f.content.size()));
    if (!records_.contains(id))
      commit({{"op", "document"}, {"id", id}, {"project", project_id}, {"name", f.name}, {"text", f.content}});
    out.push_back(records_.at(id));
  }
  return out;
}

std::vector<AnnotationRecord> AnnotationStore::documents(const std::string& project_id,
                                                         std::optional<DocStatus> status) const {
  std::shared_lock lock(mu_);
  std::vector<AnnotationRecord> out;
  for (const auto& id : project_locked(project_id).document_ids) {
    const auto& r = records_.at(id);
    if (!status || r.status == *status) out.push_back(r);
  }
  return out;
}

AnnotationRecord AnnotationStore::document(const std::string& doc_id) const {
  std::shared_lock lock(mu_);
  return record_locked(doc_id);
}

AnnotationRecord AnnotationStore::save_spans(const std::string& doc_id, std::vector<EntitySpan> spans,
                                             std::uint64_t expected_revision, const std::string& editor) {
  std::unique_lock lock(mu_);
  AnnotationRecord& r = record_locked(doc_id);
  if (r.revision != expected_revision)
    throw Conflict("document '" + doc_id + "' is at revision " + std::to_string(r.revision) + ", not " +
                       std::to_string(expected_revision) + "; refetch and retry",
                   "revision_conflict");
  const Project& p = project_locked(r.project_id);
  for (const auto& s : spans)
    if (std::none_of(p.labels.begin(), p.labels.end(), [&](const LabelDef& l) { return l.label == s.label; }))
      throw ValidationError("label '" + s.label + "' is not defined in project '" + p.id + "'");
  make_document(r.document.id, r.document.text, spans);  // validates alignment and overlap
  commit({{"op", "spans"}, {"doc", doc_id}, {"spans", spans_json(spans)}, {"editor", editor}});
  return r;
}

AnnotationRecord AnnotationStore::suggest(const std::string& doc_id) {
  std::shared_ptr<const NerModel> model;
  std::string version;
  Document doc;
  {
    std::shared_lock lock(mu_);
    const AnnotationRecord& r = record_locked(doc_id);
    const Project& p = project_locked(r.project_id);
    auto it = models_.find(p.id);
    if (it == models_.end())
      throw Conflict("project '" + p.id + "' has no trained model; train first (POST /projects/" + p.id + "/train)",
                     "no_model");
    model = it->second;
    version = p.model_version;
    doc = r.document;
  }
  const std::vector<EntitySpan> spans = decode_greedy(*model, doc.tokens);
  std::unique_lock lock(mu_);
  commit({{"op", "suggest"}, {"doc", doc_id}, {"spans", spans_json(spans)}, {"version", version}});
  return record_locked(doc_id);
}

AnnotationRecord AnnotationStore::set_status(const std::string& doc_id, DocStatus status, const std::string& editor) {
  if (status != DocStatus::kReviewed) throw InvalidArgument("only 'reviewed' can be set directly");
  std::unique_lock lock(mu_);
  AnnotationRecord& r = record_locked(doc_id);
  if (!next_status(r.status, StatusEvent::kReview))
    throw Conflict("document '" + doc_id + "' is " + status_name(r.status) + "; save annotations before review",
                   "invalid_transition");
  commit({{"op", "status"}, {"doc", doc_id}, {"status", status_name(DocStatus::kReviewed)}, {"editor", editor}});
  return r;
}

Dataset AnnotationStore::export_records(const std::string& project_id, bool include_annotated) const {
  std::shared_lock lock(mu_);
  const Project& p = project_locked(project_id);
  std::vector<Document> docs;
  for (const auto& id : p.document_ids) {
    const auto& r = records_.at(id);
    if (r.status == DocStatus::kReviewed || (include_annotated && r.status == DocStatus::kAnnotated))
      docs.push_back(r.document);
  }
  std::set<std::string> labels;
  for (const auto& l : p.labels) labels.insert(l.label);
  return make_dataset(std::move(docs), std::move(labels));
}

std::string AnnotationStore::export_dataset(const std::string& project_id, const ExportOptions& options) const {
  const Dataset d = export_records(project_id, options.include_annotated);
  if (d.empty())
    throw Conflict("project '" + project_id + "' has no " +
                       std::string(options.include_annotated ? "annotated or reviewed" : "reviewed") + " documents",
                   "empty_export");
  std::ostringstream out;
  write_documents(d, out, options.format);
  return out.str();
}

std::shared_ptr<const NerModel> AnnotationStore::active_model(const std::string& project_id) const {
  std::shared_lock lock(mu_);
  project_locked(project_id);
  auto it = models_.find(project_id);
  return it == models_.end() ? nullptr : it->second;
}

TrainJob AnnotationStore::start_train_job(const std::string& project_id, const TrainRequest& request) {
  validate(request.train);
  validate(request.embeddings);
  {
    std::shared_lock lock(mu_);
    project_locked(project_id);
  }
  std::lock_guard lock(job_mu_);
  for (const auto& [id, j] : jobs_)
    if (j.project_id == project_id && (j.state == JobState::kQueued || j.state == JobState::kRunning))
      throw Conflict("project '" + project_id + "' already has job " + id + " in progress", "job_running");
  TrainJob job;
  job.id = "j" + std::to_string(++job_counter_);
  job.project_id = project_id;
  job.queued_ms = now_ms();
  jobs_[job.id] = job;
  workers_.emplace_back([this, id = job.id, project_id, request] { run_job(id, project_id, request); });
  return job;
}

void AnnotationStore::run_job(std::string job_id, std::string project_id, TrainRequest request) {
  auto update = [&](auto&& fn) {
    {
      std::lock_guard lock(job_mu_);
      fn(jobs_.at(job_id));
    }
    job_cv_.notify_all();
  };
  update([](TrainJob& j) {
    j.state = JobState::kRunning;
    j.started_ms = std::max(now_ms(), j.queued_ms);
  });
  try {
    const Dataset data = export_records(project_id, request.include_annotated);
    if (data.empty()) throw InvalidArgument("project has no annotated documents to train on");
    std::vector<std::string> corpus;
    std::vector<std::string> labels;
    {
      std::shared_lock lock(mu_);
      const Project& p = project_locked(project_id);
      for (const auto& id : p.document_ids) corpus.push_back(records_.at(id).document.text);
      for (const auto& l : p.labels) labels.push_back(l.label);
    }
    Dataset train_set = data;
    Dataset held_out = data;
    if (data.size() >= 5) std::tie(train_set, held_out) = split_train_test(data, {request.holdout, 1.0, request.train.seed});
    auto table = std::make_shared<const StaticEmbeddingTable>(train_static_embeddings(corpus, request.embeddings));
    NerModel model = train(blank_model(LabelScheme(labels), table, request.scorer, request.train.seed), train_set,
                           request.train);
    const EvalReport report = compute_report(held_out, predict(model, held_out));
    const Prf prf_all = report.overall_prf();
    Json metrics = {{"train_documents", train_set.size()},
                    {"heldout_documents", held_out.size()},
                    {"precision", prf_all.precision},
                    {"recall", prf_all.recall},
                    {"f1", prf_all.f1}};

    std::string version;
    {
      std::unique_lock lock(mu_);
      Project& p = project_locked(project_id);
      const int counter = p.model_counter + 1;
      version = "v" + std::to_string(counter);
      Json event = {{"op", "model"}, {"project", project_id}, {"version", version}, {"counter", counter}};
      auto shared = std::make_shared<const NerModel>(std::move(model));
      if (!options_.data_dir.empty()) {
        const auto dir = options_.data_dir / "models" / project_id;
        std::filesystem::create_directories(dir);
        save_model(*shared, dir / (version + ".bin"));
        event["path"] = (dir / (version + ".bin")).string();
      }
      // Replay reloads from the path; live we install the trained object.
      Json live = event;
      live.erase("path");
      apply(live);
      models_[project_id] = shared;
      if (!options_.data_dir.empty()) {
        std::ofstream out(options_.data_dir / "journal.jsonl", std::ios::app | std::ios::binary);
        out << event.dump() << '\n';
        if (!out) throw IoError("journal write failed");
        ++journal_entries_;
      }
    }
    update([&](TrainJob& j) {
      j.state = JobState::kDone;
      j.model_version = version;
      j.metrics = metrics;
      j.finished_ms = std::max(now_ms(), j.started_ms);
    });
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    update([&](TrainJob& j) {
      j.state = JobState::kFailed;
      j.error = msg;
      j.finished_ms = std::max(now_ms(), j.started_ms);
    });
  }
}

TrainJob AnnotationStore::job(const std::string& job_id) const {
  std::lock_guard lock(job_mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFound("no job '" + job_id + "'");
  return it->second;
}

TrainJob AnnotationStore::wait_for_job(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(job_mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFound("no job '" + job_id + "'");
  job_cv_.wait_for(lock, timeout, [&] {
    const JobState s = jobs_.at(job_id).state;
    return s == JobState::kDone || s == JobState::kFailed;
  });
  return jobs_.at(job_id);
}

// ---------------------------------------------------------------- HTTP

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"code", code}, {"message", message}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("request body is not valid JSON: ") + e.what());
  }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Conflict& e) {
      send_error(res, 409, e.code(), e.what());
    } catch (const NotFound& e) {
      send_error(res, 404, e.kind(), e.what());
    } catch (const IoError& e) {
      send_error(res, 500, e.kind(), e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(AnnotationStore& store, const ServerOptions& options) {
  auto server = std::make_unique<httplib::Server>();
  auto& s = *server;

  if (!options.auth_token.empty()) {
    s.set_pre_routing_handler([token = options.auth_token](const httplib::Request& req, httplib::Response& res) {
      if (req.path == "/health" || req.get_header_value("X-Auth-Token") == token)
        return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, 401, "unauthorized", "missing or wrong X-Auth-Token header");
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });

  s.Post("/projects", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    std::vector<LabelDef> labels;
    if (body.contains("labels"))
      labels = labels_from_json(body["labels"]);
    else if (body.value("template", "") == "clinical")
      labels = clinical_label_template();
    send_json(res, 201, to_json(store.create_project(body.value("name", ""), std::move(labels))));
  }));

  s.Get("/projects", guarded([&store](const httplib::Request&, httplib::Response& res) {
    Json a = Json::array();
    for (const auto& p : store.projects()) a.push_back(to_json(p));
    send_json(res, 200, {{"projects", a}});
  }));

  s.Get(R"(/projects/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(store.project(req.matches[1])));
  }));

  s.Post(R"(/projects/([^/]+)/documents)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    std::vector<UploadFile> files;
    const std::string type = req.get_header_value("Content-Type");
    if (type.rfind("text/plain", 0) == 0) {
      files.push_back({req.has_param("name") ? req.get_param_value("name") : "upload.txt", req.body});
    } else {
      const Json body = parse_body(req);
      const Json list = body.contains("documents") ? body["documents"] : Json::array({body});
      for (const auto& d : list) files.push_back({d.value("name", "upload.txt"), d.value("text", "")});
    }
    const std::size_t before = store.project(req.matches[1]).document_ids.size();
    const auto records = store.upload_documents(req.matches[1], files);
    const std::size_t created = store.project(req.matches[1]).document_ids.size() - before;
    Json a = Json::array();
    for (const auto& r : records) a.push_back(to_json(r, false));
    send_json(res, created ? 201 : 200, {{"created", created}, {"count", records.size()}, {"documents", a}});
  }));

  s.Get(R"(/projects/([^/]+)/documents)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    std::optional<DocStatus> status;
    if (req.has_param("status") && !req.get_param_value("status").empty())
      status = parse_status(req.get_param_value("status"));
    Json a = Json::array();
    for (const auto& r : store.documents(req.matches[1], status)) a.push_back(to_json(r, false));
    send_json(res, 200, {{"documents", a}});
  }));

  s.Get(R"(/documents/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(store.document(req.matches[1])));
  }));

  s.Put(R"(/documents/([^/]+)/spans)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    if (!body.contains("revision") || !body["revision"].is_number_unsigned())
      throw InvalidArgument("body needs a non-negative integer 'revision'");
    const auto r = store.save_spans(req.matches[1], spans_from_json(body.value("spans", Json::array())),
                                    body["revision"].get<std::uint64_t>(), body.value("editor", ""));
    send_json(res, 200, to_json(r));
  }));

  s.Post(R"(/documents/([^/]+)/suggest)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const auto r = store.suggest(req.matches[1]);
    Json j = to_json(r);
    j["model_version"] = r.suggestion_version;
    send_json(res, 200, j);
  }));

  s.Post(R"(/documents/([^/]+)/status)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const auto r = store.set_status(req.matches[1], parse_status(body.value("status", "")), body.value("editor", ""));
    send_json(res, 200, to_json(r));
  }));

  s.Get(R"(/projects/([^/]+)/export)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    ExportOptions o;
    if (req.has_param("format")) o.format = parse_document_format(req.get_param_value("format"));
    o.include_annotated = req.has_param("include") && req.get_param_value("include") == "annotated";
    res.status = 200;
    res.set_content(store.export_dataset(req.matches[1], o),
                    o.format == DocumentFormat::kJsonLines ? "application/x-ndjson" : "text/plain");
  }));

  s.Post(R"(/projects/([^/]+)/train)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    TrainRequest t;
    for (const auto& [key, value] : body.items()) {
      if (key == "embeddings") t.embeddings = skipgram_from_json(value, t.embeddings);
      else if (key == "scorer") t.scorer = scorer_from_json(value, t.scorer);
      else if (key == "train") t.train = train_from_json(value, t.train);
      else if (key == "holdout") t.holdout = value.get<double>();
      else if (key == "include_annotated") t.include_annotated = value.get<bool>();
      else throw InvalidArgument("unknown train request key '" + key + "'");
    }
    send_json(res, 202, to_json(store.start_train_job(req.matches[1], t)));
  }));

  s.Get(R"(/jobs/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(store.job(req.matches[1])));
  }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "not_found", "no such route");
  });
  return server;
}

}  // namespace medner
