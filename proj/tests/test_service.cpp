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

#include <atomic>
#include <deque>
#include <filesystem>
#include <sstream>
#include <thread>

#include <set>

#include <gtest/gtest.h>

#include "medner/error.hpp"
#include "medner/service.hpp"
#include "medner/synth.hpp"

// After Eigen: <resolv.h> defines _res.
#include <httplib.h>

using namespace medner;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("medner-svc-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TrainRequest small_request() {
  TrainRequest t;
  t.embeddings.dim = 16;
  t.embeddings.epochs = 3;
  t.scorer.hidden = 32;
  t.train.iterations = 25;
  t.train.seed = 3;
  return t;
}

// A project whose documents are annotated with synthetic gold spans; about
// a hundred mentions per label.
std::string seeded_project(AnnotationStore& store, std::size_t docs = 120) {
  SynthSpec s;
  s.documents = docs;
  s.seed = 11;
  s.label_counts = {{"CHEMICAL", 100}, {"DISEASE", 100}, {"SYMPTOM", 100}, {"DOSAGE", 100}};
  const auto corpus = generate_synthetic_corpus(s);
  const auto p = store.create_project("seed", clinical_label_template());
  // Short synthetic documents can repeat; uploads dedupe by content.
  std::set<std::string> seen;
  std::vector<UploadFile> files;
  std::vector<const Document*> kept;
  for (const auto& d : corpus.dataset.documents)
    if (seen.insert(d.text).second) {
      files.push_back({d.id + ".txt", d.text});
      kept.push_back(&d);
    }
  const auto recs = store.upload_documents(p.id, files);
  for (std::size_t i = 0; i < recs.size(); ++i) store.save_spans(recs[i].document.id, kept[i]->spans, 0, "seed");
  return p.id;
}

}  // namespace

TEST(Projects, ClinicalTemplateAndValidation) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  const auto it = std::find_if(p.labels.begin(), p.labels.end(), [](const LabelDef& l) { return l.hotkey == "S"; });
  ASSERT_NE(it, p.labels.end());
  EXPECT_EQ(it->label, "SYMPTOM");
  EXPECT_THROW(store.create_project("x", {}), ValidationError);
  EXPECT_THROW(store.create_project("x", {{"SYMPTOM", "S", "#000000"}, {"SIGN", "S", "#111111"}}), ValidationError);
  EXPECT_THROW(store.create_project("x", {{"SYMPTOM", "S", "red"}}), ValidationError);
  EXPECT_THROW(store.project("nope"), NotFound);
}

TEST(Documents, UploadIsIdempotentAndValidated) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  const auto a = store.upload_documents(p.id, {{"a.txt", "fever after aspirin"}});
  const auto b = store.upload_documents(p.id, {{"again.txt", "fever after aspirin"}});
  EXPECT_EQ(a[0].document.id, b[0].document.id);
  EXPECT_EQ(store.project(p.id).document_ids.size(), 1u);
  EXPECT_EQ(a[0].status, DocStatus::kFresh);
  try {
    store.upload_documents(p.id, {{"empty.txt", ""}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("empty.txt"), std::string::npos);
  }
  EXPECT_THROW(store.upload_documents(p.id, {{"bin.txt", "\xff\xfe"}}), ValidationError);

  std::vector<UploadFile> bulk;
  for (int i = 0; i < 23; ++i) bulk.push_back({"n" + std::to_string(i), "note number " + std::to_string(i)});
  EXPECT_EQ(store.upload_documents(p.id, bulk).size(), 23u);
  EXPECT_EQ(store.documents(p.id).size(), 24u);
  EXPECT_EQ(store.documents(p.id, DocStatus::kAnnotated).size(), 0u);
}

TEST(Documents, SaveRevisionsAndConflicts) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  const auto id = store.upload_documents(p.id, {{"a", "fever after aspirin"}})[0].document.id;
  const auto r1 = store.save_spans(id, {{0, 5, "SYMPTOM"}}, 0, "ann");
  EXPECT_EQ(r1.revision, 1u);
  EXPECT_EQ(r1.status, DocStatus::kAnnotated);
  try {
    store.save_spans(id, {}, 0, "other");
    FAIL();
  } catch (const Conflict& e) {
    EXPECT_EQ(e.code(), "revision_conflict");
  }
  EXPECT_EQ(store.document(id).document.spans.size(), 1u);  // no mutation
  EXPECT_THROW(store.save_spans(id, {{0, 5, "ROUTE"}}, 1, "ann"), ValidationError);
  EXPECT_THROW(store.save_spans(id, {{0, 3, "SYMPTOM"}}, 1, "ann"), ValidationError);
  EXPECT_EQ(store.document(id).revision, 1u);
}

TEST(Documents, ConcurrentSavesHaveOneWinnerPerRevision) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  const auto id = store.upload_documents(p.id, {{"a", "fever after aspirin"}})[0].document.id;
  for (std::uint64_t rev = 0; rev < 5; ++rev) {
    std::atomic<int> wins{0}, conflicts{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> threads;
    for (int t = 0; t < 32; ++t)
      threads.emplace_back([&, t] {
        while (!go) std::this_thread::yield();
        std::vector<EntitySpan> spans;
        if (t % 2) spans.push_back({0, 5, "SYMPTOM"});
        try {
          store.save_spans(id, spans, rev, "t" + std::to_string(t));
          ++wins;
        } catch (const Conflict&) {
          ++conflicts;
        }
      });
    go = true;
    for (auto& th : threads) th.join();
    EXPECT_EQ(wins.load(), 1);
    EXPECT_EQ(conflicts.load(), 31);
    EXPECT_EQ(store.document(id).revision, rev + 1);
  }
}

TEST(Lifecycle, ReachabilityAndMonotonicity) {
  const std::vector<DocStatus> all = {DocStatus::kFresh, DocStatus::kSuggested, DocStatus::kAnnotated,
                                      DocStatus::kReviewed};
  const std::vector<StatusEvent> events = {StatusEvent::kSuggest, StatusEvent::kSave, StatusEvent::kReview};
  // Breadth-first search from fresh.
  std::set<DocStatus> seen = {DocStatus::kFresh};
  std::deque<DocStatus> queue = {DocStatus::kFresh};
  std::map<DocStatus, std::set<DocStatus>> preds;
  while (!queue.empty()) {
    const DocStatus s = queue.front();
    queue.pop_front();
    for (auto e : events) {
      const auto n = next_status(s, e);
      if (!n) continue;
      if (*n != s) preds[*n].insert(s);
      if (seen.insert(*n).second) queue.push_back(*n);
    }
  }
  EXPECT_EQ(seen.size(), all.size());
  // Reviewed is entered only from annotated.
  EXPECT_EQ(preds[DocStatus::kReviewed], std::set<DocStatus>{DocStatus::kAnnotated});
  // No event moves a document backwards.
  for (auto s : all)
    for (auto e : events)
      if (auto n = next_status(s, e)) EXPECT_GE(static_cast<int>(*n), static_cast<int>(s));
  EXPECT_FALSE(next_status(DocStatus::kFresh, StatusEvent::kReview));
  EXPECT_FALSE(next_status(DocStatus::kSuggested, StatusEvent::kReview));
}

TEST(Lifecycle, ReviewNeedsAnnotation) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  const auto id = store.upload_documents(p.id, {{"a", "fever after aspirin"}})[0].document.id;
  EXPECT_THROW(store.set_status(id, DocStatus::kReviewed, "r"), Conflict);
  store.save_spans(id, {{0, 5, "SYMPTOM"}}, 0, "ann");
  EXPECT_EQ(store.set_status(id, DocStatus::kReviewed, "r").status, DocStatus::kReviewed);
  EXPECT_EQ(store.save_spans(id, {}, 2, "ann").status, DocStatus::kReviewed);  // edits keep review
}

TEST(Suggest, BeforeTrainingIsAPrescribedError) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  const auto id = store.upload_documents(p.id, {{"a", "fever after aspirin"}})[0].document.id;
  try {
    store.suggest(id);
    FAIL();
  } catch (const Conflict& e) {
    EXPECT_EQ(e.code(), "no_model");
    EXPECT_NE(std::string(e.what()).find("train first"), std::string::npos);
  }
  EXPECT_EQ(store.document(id).status, DocStatus::kFresh);
}

TEST(Export, ReviewedOnlyByDefaultAndRoundTrips) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  const auto recs = store.upload_documents(p.id, {{"a", "fever after aspirin"}, {"b", "cough with 5 mg"}});
  EXPECT_THROW(store.export_dataset(p.id, {}), Conflict);
  store.save_spans(recs[0].document.id, {{0, 5, "SYMPTOM"}, {12, 19, "CHEMICAL"}}, 0, "a");
  store.save_spans(recs[1].document.id, {{0, 5, "SYMPTOM"}, {11, 15, "DOSAGE"}}, 0, "a");
  store.set_status(recs[0].document.id, DocStatus::kReviewed, "r");
  for (auto fmt : {DocumentFormat::kJsonLines, DocumentFormat::kColumns}) {
    std::istringstream in(store.export_dataset(p.id, {fmt, false}));
    auto back = read_documents(in, fmt);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back.documents[0], store.document(recs[0].document.id).document);
  }
  std::istringstream all(store.export_dataset(p.id, {DocumentFormat::kJsonLines, true}));
  auto back = read_documents(all, DocumentFormat::kJsonLines);
  back.label_set = store.export_records(p.id, true).label_set;
  EXPECT_EQ(back, store.export_records(p.id, true));
}

TEST(Training, JobLifecycleAndSuggestions) {
  AnnotationStore store;
  const auto pid = seeded_project(store);
  const auto queued = store.start_train_job(pid, small_request());
  EXPECT_THROW(store.start_train_job(pid, small_request()), Conflict);
  const auto done = store.wait_for_job(queued.id, 120s);
  ASSERT_EQ(done.state, JobState::kDone) << done.error;
  EXPECT_EQ(done.model_version, "v1");
  EXPECT_LE(done.queued_ms, done.started_ms);
  EXPECT_LE(done.started_ms, done.finished_ms);
  // ~90 training documents with a skewed lexicon: many held-out words are
  // unseen, so this lands near 0.4. Zero would mean nothing was learned.
  EXPECT_GT(done.metrics["f1"].get<double>(), 0.3);

  // Fresh documents that reuse the training lexicon.
  const auto fresh = store.upload_documents(pid, {{"new1", "Patient took aspirin 5 mg for asthma"},
                                                  {"new2", "Complained of nausea and fever overnight"}});
  std::size_t spans = 0;
  for (const auto& r : fresh) {
    const auto s = store.suggest(r.document.id);
    EXPECT_EQ(s.suggestion_version, "v1");
    EXPECT_EQ(s.status, DocStatus::kSuggested);
    for (std::size_t i = 1; i < s.suggestions.size(); ++i)
      EXPECT_LE(s.suggestions[i - 1].end, s.suggestions[i].start);
    spans += s.suggestions.size();
  }
  EXPECT_GT(spans, 0u);

  const auto second = store.wait_for_job(store.start_train_job(pid, small_request()).id, 120s);
  ASSERT_EQ(second.state, JobState::kDone) << second.error;
  EXPECT_EQ(store.suggest(fresh[0].document.id).suggestion_version, "v2");
}

TEST(Training, FailsCleanlyWithoutAnnotations) {
  AnnotationStore store;
  const auto p = store.create_project("notes", clinical_label_template());
  store.upload_documents(p.id, {{"a", "fever after aspirin"}});
  const auto j = store.wait_for_job(store.start_train_job(p.id, small_request()).id, 30s);
  EXPECT_EQ(j.state, JobState::kFailed);
  EXPECT_FALSE(j.error.empty());
  EXPECT_THROW(store.job("j999"), NotFound);
}

TEST(Persistence, JournalAndSnapshotReplay) {
  TempDir dir("persist");
  std::string pid, doc;
  {
    AnnotationStore store({dir.path, 3});  // snapshot every third event
    pid = store.create_project("notes", clinical_label_template()).id;
    const auto recs = store.upload_documents(pid, {{"a", "fever after aspirin"}, {"b", "cough"}});
    doc = recs[0].document.id;
    store.save_spans(doc, {{0, 5, "SYMPTOM"}}, 0, "ann");
    store.set_status(doc, DocStatus::kReviewed, "rev");
  }
  AnnotationStore reopened({dir.path, 3});
  const auto r = reopened.document(doc);
  EXPECT_EQ(r.status, DocStatus::kReviewed);
  EXPECT_EQ(r.revision, 2u);
  EXPECT_EQ(r.document.spans.size(), 1u);
  EXPECT_EQ(reopened.project(pid).document_ids.size(), 2u);
  EXPECT_EQ(reopened.create_project("second", clinical_label_template()).id, "p2");
}

TEST(Persistence, TornFinalJournalLineIsIgnored) {
  TempDir dir("torn");
  std::string doc;
  {
    AnnotationStore store({dir.path, 1000});
    const auto pid = store.create_project("notes", clinical_label_template()).id;
    doc = store.upload_documents(pid, {{"a", "fever after aspirin"}})[0].document.id;
  }
  std::ofstream(dir.path / "journal.jsonl", std::ios::app) << "{\"op\":\"spa";
  AnnotationStore reopened({dir.path, 1000});
  EXPECT_EQ(reopened.document(doc).revision, 0u);
}

TEST(Http, RoutesAndErrors) {
  AnnotationStore store;
  auto server = make_http_server(store, {"secret"});
  const int port = server->bind_to_any_port("127.0.0.1");
  std::thread th([&] { server->listen_after_bind(); });
  server->wait_until_ready();

  httplib::Client c("127.0.0.1", port);
  EXPECT_EQ(c.Get("/projects")->status, 401);
  c.set_default_headers({{"X-Auth-Token", "secret"}});

  auto res = c.Post("/projects", R"({"name":"n","template":"clinical"})", "application/json");
  ASSERT_EQ(res->status, 201);
  const auto pid = nlohmann::json::parse(res->body)["id"].get<std::string>();
  res = c.Post("/projects/" + pid + "/documents?name=a.txt", "fever after aspirin", "text/plain");
  ASSERT_EQ(res->status, 201);
  const auto did = nlohmann::json::parse(res->body)["documents"][0]["id"].get<std::string>();
  EXPECT_EQ(c.Post("/projects/" + pid + "/documents?name=a.txt", "fever after aspirin", "text/plain")->status, 200);

  res = c.Post("/documents/" + did + "/suggest", "", "application/json");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(nlohmann::json::parse(res->body)["code"], "no_model");

  const std::string body = R"({"revision":0,"editor":"a","spans":[{"start":0,"end":5,"label":"SYMPTOM"}]})";
  EXPECT_EQ(c.Put("/documents/" + did + "/spans", body, "application/json")->status, 200);
  res = c.Put("/documents/" + did + "/spans", body, "application/json");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(nlohmann::json::parse(res->body)["code"], "revision_conflict");
  EXPECT_EQ(c.Put("/documents/" + did + "/spans", "{not json", "application/json")->status, 400);

  res = c.Get("/projects/" + pid + "/documents?status=annotated");
  EXPECT_EQ(nlohmann::json::parse(res->body)["documents"].size(), 1u);
  EXPECT_EQ(c.Get("/projects/" + pid + "/export")->status, 409);  // nothing reviewed yet
  EXPECT_EQ(c.Post("/documents/" + did + "/status", R"({"status":"reviewed"})", "application/json")->status, 200);
  res = c.Get("/projects/" + pid + "/export?format=jsonl");
  ASSERT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("SYMPTOM"), std::string::npos);

  EXPECT_EQ(c.Get("/documents/nope")->status, 404);
  EXPECT_EQ(c.Get("/jobs/nope")->status, 404);
  EXPECT_EQ(c.Post("/projects/" + pid + "/train", R"({"bogus":1})", "application/json")->status, 400);
  res = c.Post("/projects/" + pid + "/train", R"({"train":{"iterations":2},"embeddings":{"dim":8,"epochs":1}})",
               "application/json");
  ASSERT_EQ(res->status, 202);
  const auto jid = nlohmann::json::parse(res->body)["id"].get<std::string>();
  store.wait_for_job(jid, 60s);
  res = c.Get("/jobs/" + jid);
  EXPECT_EQ(nlohmann::json::parse(res->body)["state"], "done");
  res = c.Post("/documents/" + did + "/suggest", "", "application/json");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body)["model_version"], "v1");

  server->stop();
  th.join();
}
