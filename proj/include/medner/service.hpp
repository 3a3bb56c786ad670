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

// Annotation service: projects with hotkeyed labels, document lifecycle,
// optimistic-concurrency span edits, model suggestions, review, export and
// background training. AnnotationStore holds the state and is usable without
// HTTP; make_http_server() exposes it as a JSON API.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "medner/corpus.hpp"
#include "medner/embeddings.hpp"
#include "medner/tagger.hpp"

namespace httplib {
class Server;
}

namespace medner {

struct LabelDef {
  std::string label;
  std::string hotkey;  // one character
  std::string color;   // "#rrggbb"
  bool operator==(const LabelDef&) const = default;
};

// S -> SYMPTOM, C -> CHEMICAL, D -> DISEASE, G -> DOSAGE.
std::vector<LabelDef> clinical_label_template();

enum class DocStatus { kFresh, kSuggested, kAnnotated, kReviewed };
enum class StatusEvent { kSuggest, kSave, kReview };

std::string status_name(DocStatus s);
DocStatus parse_status(std::string_view name);

// The lifecycle relation. Returns nullopt when the event is not allowed in
// `current`. Suggestions and saves never move a document backwards; review
// requires an annotated document.
std::optional<DocStatus> next_status(DocStatus current, StatusEvent event);

struct Project {
  std::string id;
  std::string name;
  std::vector<LabelDef> labels;
  std::vector<std::string> document_ids;  // upload order
  std::string model_version;              // empty until a job finishes
  int model_counter = 0;
};

struct AnnotationRecord {
  std::string project_id;
  std::string name;  // uploaded file name
  Document document;
  DocStatus status = DocStatus::kFresh;
  std::vector<EntitySpan> suggestions;
  std::string suggestion_version;
  std::uint64_t revision = 0;
  std::string last_editor;
};

enum class JobState { kQueued, kRunning, kDone, kFailed };
std::string job_state_name(JobState s);

struct TrainJob {
  std::string id;
  std::string project_id;
  JobState state = JobState::kQueued;
  std::string model_version;
  nlohmann::ordered_json metrics;
  std::string error;
  std::int64_t queued_ms = 0;
  std::int64_t started_ms = 0;
  std::int64_t finished_ms = 0;
};

struct UploadFile {
  std::string name;
  std::string content;
};

struct ExportOptions {
  DocumentFormat format = DocumentFormat::kJsonLines;
  bool include_annotated = false;  // reviewed records only unless set
};

// Defaults are sized for projects of tens to a few hundred documents.
struct TrainRequest {
  SkipGramConfig embeddings = [] {
    SkipGramConfig c;
    c.dim = 32;
    return c;
  }();
  ScorerConfig scorer;
  TrainConfig train = [] {
    TrainConfig c;
    c.iterations = 30;
    c.batch_size = 8;
    c.learning_rate = 5e-3;
    c.dropout = 0.1;
    return c;
  }();
  double holdout = 0.2;           // metrics slice
  bool include_annotated = true;  // train on annotated as well as reviewed
};

struct StoreOptions {
  std::filesystem::path data_dir;  // empty: memory only
  std::size_t snapshot_every = 200;  // journal entries between snapshots
};

// Thread-safe. Per-document writes are serialised through the revision
// check; predictions run outside the lock on an immutable model.
class AnnotationStore {
 public:
  explicit AnnotationStore(StoreOptions options = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  Project create_project(const std::string& name, std::vector<LabelDef> labels);
  Project project(const std::string& id) const;
  std::vector<Project> projects() const;

  // Idempotent per (project, content). Throws ValidationError naming the file
  // for empty or non-UTF-8 content.
  std::vector<AnnotationRecord> upload_documents(const std::string& project_id,
                                                 const std::vector<UploadFile>& files);
  std::vector<AnnotationRecord> documents(const std::string& project_id,
                                          std::optional<DocStatus> status = std::nullopt) const;
  AnnotationRecord document(const std::string& doc_id) const;

  // Replaces confirmed spans. Throws Conflict("revision_conflict") when
  // expected_revision is stale, ValidationError for bad spans or labels.
  AnnotationRecord save_spans(const std::string& doc_id, std::vector<EntitySpan> spans,
                              std::uint64_t expected_revision, const std::string& editor);
  // Runs the active model and stores its output as suggestions. Throws
  // Conflict("no_model") before the first successful training job.
  AnnotationRecord suggest(const std::string& doc_id);
  AnnotationRecord set_status(const std::string& doc_id, DocStatus status, const std::string& editor);

  std::string export_dataset(const std::string& project_id, const ExportOptions& options) const;
  Dataset export_records(const std::string& project_id, bool include_annotated) const;

  // Starts a background job; Conflict("job_running") if one is live.
  TrainJob start_train_job(const std::string& project_id, const TrainRequest& request);
  TrainJob job(const std::string& job_id) const;
  // Blocks until the job leaves queued/running or the timeout passes.
  TrainJob wait_for_job(const std::string& job_id, std::chrono::milliseconds timeout) const;

  std::shared_ptr<const NerModel> active_model(const std::string& project_id) const;

  // Writes a snapshot and truncates the journal (no-op without data_dir).
  void snapshot();

 private:
  using Json = nlohmann::ordered_json;

  void apply(const Json& event);
  void commit(const Json& event);  // apply + journal, caller holds the write lock
  void load();
  Json state_json() const;
  void run_job(std::string job_id, std::string project_id, TrainRequest request);
  AnnotationRecord& record_locked(const std::string& doc_id);
  const AnnotationRecord& record_locked(const std::string& doc_id) const;
  Project& project_locked(const std::string& id);
  const Project& project_locked(const std::string& id) const;

  StoreOptions options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Project> projects_;
  std::map<std::string, AnnotationRecord> records_;
  std::map<std::string, std::shared_ptr<const NerModel>> models_;  // by project
  int project_counter_ = 0;
  std::size_t journal_entries_ = 0;

  mutable std::mutex job_mu_;
  mutable std::condition_variable job_cv_;
  std::map<std::string, TrainJob> jobs_;
  int job_counter_ = 0;
  std::vector<std::jthread> workers_;
};

nlohmann::ordered_json to_json(const AnnotationRecord& r, bool full = true);
nlohmann::ordered_json to_json(const Project& p);
nlohmann::ordered_json to_json(const TrainJob& j);

struct ServerOptions {
  std::string auth_token;  // empty: no authentication
};

// Registers every route on a new server bound to `store`.
std::unique_ptr<httplib::Server> make_http_server(AnnotationStore& store, const ServerOptions& options = {});

}  // namespace medner
