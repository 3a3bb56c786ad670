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

#include "medner/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "medner/error.hpp"
#include "medner/random.hpp"

namespace medner {
namespace {

const std::vector<std::string> kChemicals = {
    "metformin",      "lisinopril",     "atorvastatin",  "amlodipine",     "omeprazole",
    "aspirin",        "ibuprofen",      "paracetamol",   "warfarin",       "heparin",
    "insulin glargine", "levothyroxine", "prednisone",   "amoxicillin",    "azithromycin",
    "ciprofloxacin",  "doxycycline",    "furosemide",    "hydrochlorothiazide", "losartan",
    "simvastatin",    "clopidogrel",    "gabapentin",    "sertraline",     "fluoxetine",
    "citalopram",     "tramadol",       "morphine",      "oxycodone",      "naproxen",
    "folic acid",     "vitamin d",      "ferrous sulfate", "pantoprazole",  "ranitidine",
    "montelukast",    "albuterol",      "salbutamol",    "budesonide",     "fluticasone",
    "carvedilol",     "metoprolol",     "propranolol",   "diltiazem",      "verapamil",
    "spironolactone", "allopurinol",    "colchicine",    "methotrexate",   "hydroxychloroquine",
    "valproic acid",  "lamotrigine",    "levetiracetam", "donepezil",      "quetiapine",
    "risperidone",    "lorazepam",      "diazepam",      "zolpidem",       "cetirizine"};

const std::vector<std::string> kDiseases = {
    "diabetes",        "type 2 diabetes", "hypertension",  "asthma",           "copd",
    "heart failure",   "atrial fibrillation", "coronary artery disease", "hypothyroidism", "pneumonia",
    "tuberculosis",    "hepatitis b",    "cirrhosis",      "chronic kidney disease", "osteoarthritis",
    "rheumatoid arthritis", "lupus",     "psoriasis",      "epilepsy",         "parkinson disease",
    "alzheimer disease", "schizophrenia", "bipolar disorder", "hyperlipidemia", "obesity",
    "osteoporosis",    "anemia",         "leukemia",       "lymphoma",         "breast cancer",
    "prostate cancer", "stroke",         "deep vein thrombosis", "pulmonary embolism", "sepsis",
    "cellulitis",      "urinary tract infection", "pancreatitis", "cholecystitis", "appendicitis",
    "diverticulitis",  "crohn disease",  "ulcerative colitis", "celiac disease", "sickle cell disease",
    "hiv",             "malaria",        "influenza",      "bronchitis",       "sinusitis"};

const std::vector<std::string> kSymptoms = {
    "headache",       "nausea",          "vomiting",      "fever",            "chills",
    "cough",          "chest pain",      "shortness of breath", "fatigue",    "dizziness",
    "abdominal pain", "back pain",       "joint pain",    "muscle aches",     "diarrhea",
    "constipation",   "rash",            "itching",       "swelling",         "weight loss",
    "weight gain",    "night sweats",    "blurred vision", "sore throat",     "runny nose",
    "wheezing",       "numbness",        "tingling",      "weakness",         "loss of appetite",
    "heartburn",      "bloating",        "hoarseness",    "chest tightness",  "dry mouth",
    "excessive thirst", "frequent urination", "burning urination", "neck stiffness", "confusion",
    "fainting",       "hot flashes",     "hair loss",     "easy bruising",    "nosebleeds",
    "ear pain",       "toothache",       "leg cramps",    "cold hands",       "sneezing"};

// Read as DISEASE or SYMPTOM depending on the cue verb.
const std::vector<std::string> kAmbiguous = {
    "migraine", "insomnia",  "anxiety",      "depression", "vertigo", "reflux",   "edema",
    "tremor",   "seizures",  "palpitations", "dyspepsia",  "gout",    "eczema",   "tinnitus"};

const std::vector<std::string> kDiseaseCues = {"diagnosed", "treated", "managed", "followed"};
const std::vector<std::string> kSymptomCues = {"complained", "noticed", "reported", "experienced"};
const std::vector<std::string> kCueFillers = {"recently", "last", "week", "earlier", "again", "today",
                                              "this", "month", "year", "since"};

const std::vector<std::string> kDoseNumbers = {"5",   "10",  "20",   "25", "40",  "50", "75",
                                               "100", "250", "500", "1000", "0.5", "2",  "1"};
const std::vector<std::string> kDoseUnits = {"mg", "ml", "mcg", "g", "units", "tablets"};

const std::vector<std::string> kLabels = {"CHEMICAL", "DISEASE", "SYMPTOM", "DOSAGE"};

// Placeholders: {C} chemical, {G} dosage, {D} disease, {S} symptom.
const std::vector<std::string> kChemTemplates = {
    "continue {C}",        "{C} was discontinued",         "she was switched to {C}",
    "he stopped taking {C} last month", "refill sent for {C}", "tolerating {C} without issues"};
const std::vector<std::string> kChemDoseTemplates = {
    "started on {C} {G} daily", "takes {C} {G} twice a day", "prescribed {C} {G} at night",
    "increase {C} to {G}",      "{C} {G} by mouth every morning"};
const std::vector<std::string> kDoseTemplates = {"dose adjusted to {G}", "given {G} in clinic"};
const std::vector<std::string> kDiseaseTemplates = {
    "history of {D}",        "known case of {D}",      "{D} remains stable",
    "family history of {D}", "being evaluated for {D}", "{D} was ruled out",
    "{D} was diagnosed years ago", "{D} treated by the specialist", "{D} managed in primary care"};
const std::vector<std::string> kSymptomTemplates = {
    "presents with {S}", "denies {S}",      "{S} for three days",
    "reports worsening {S}", "{S} has improved", "mild {S} overnight",
    "{S} noticed after meals", "{S} reported by family", "{S} experienced at night"};
const std::vector<std::string> kFillers = {
    "the patient is doing well", "follow up in two weeks",  "vitals were stable",
    "no acute distress",         "labs were reviewed with the patient", "plan discussed with family",
    "will continue to monitor",  "blood pressure checked today"};

enum class Unit { kChem, kChemDose, kDose, kDisease, kSymptom };

struct Piece {
  std::string text;
  std::string label;  // empty for plain text
};

using Clause = std::vector<Piece>;

class Sampler {
 public:
  Sampler(const std::vector<std::string>& items, double exponent) : items_(items) {
    double total = 0.0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      total += exponent == 0.0 ? 1.0 : 1.0 / std::pow(static_cast<double>(k + 1), exponent);
      cumulative_.push_back(total);
    }
  }
  const std::string& operator()(Rng& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return items_[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), items_.size() - 1)];
  }

 private:
  const std::vector<std::string>& items_;
  std::vector<double> cumulative_;
};

const std::string& pick(const std::vector<std::string>& v, Rng& rng) { return v[uniform_index(rng, v.size())]; }

class ClauseMaker {
 public:
  explicit ClauseMaker(const SynthSpec& spec)
      : spec_(spec),
        chem_(kChemicals, spec.zipf_exponent),
        disease_(kDiseases, spec.zipf_exponent),
        symptom_(kSymptoms, spec.zipf_exponent),
        ambiguous_(kAmbiguous, 0.0) {}

  Clause make(Unit unit, Rng& rng) const {
    switch (unit) {
      case Unit::kChem:
        return fill(pick(kChemTemplates, rng), rng);
      case Unit::kChemDose:
        return fill(pick(kChemDoseTemplates, rng), rng);
      case Unit::kDose:
        return fill(pick(kDoseTemplates, rng), rng);
      case Unit::kDisease:
      case Unit::kSymptom: {
        const bool disease = unit == Unit::kDisease;
        if (bernoulli(rng, spec_.cue_frame_rate)) return cue_frame(disease, rng);
        return fill(pick(disease ? kDiseaseTemplates : kSymptomTemplates, rng), rng);
      }
    }
    return {};
  }

  Clause filler(Rng& rng) const { return {{pick(kFillers, rng), ""}}; }

 private:
  // "{cue} [f] with X": the cue sits 2 or 3 tokens left of X, outside a
  // one-token window.
  Clause cue_frame(bool disease, Rng& rng) const {
    const std::string label = disease ? "DISEASE" : "SYMPTOM";
    Clause c;
    c.push_back({pick(disease ? kDiseaseCues : kSymptomCues, rng), ""});
    if (bernoulli(rng, 0.5)) c.push_back({pick(kCueFillers, rng), ""});
    c.push_back({"with", ""});
    const bool ambiguous = bernoulli(rng, spec_.ambiguous_rate);
    c.push_back({ambiguous ? ambiguous_(rng) : (disease ? disease_(rng) : symptom_(rng)), label});
    return c;
  }

  Clause fill(const std::string& tmpl, Rng& rng) const {
    Clause c;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
      const std::size_t open = tmpl.find('{', pos);
      if (open == std::string::npos) {
        c.push_back({trim(tmpl.substr(pos)), ""});
        break;
      }
      if (open > pos) c.push_back({trim(tmpl.substr(pos, open - pos)), ""});
      switch (tmpl[open + 1]) {
        case 'C': c.push_back({chem_(rng), "CHEMICAL"}); break;
        case 'D': c.push_back({disease_(rng), "DISEASE"}); break;
        case 'S': c.push_back({symptom_(rng), "SYMPTOM"}); break;
        case 'G': c.push_back({pick(kDoseNumbers, rng) + " " + pick(kDoseUnits, rng), "DOSAGE"}); break;
        default: throw InvalidArgument("bad template " + tmpl);
      }
      pos = open + 3;
    }
    std::erase_if(c, [](const Piece& p) { return p.text.empty(); });
    return c;
  }

  static std::string trim(std::string s) {
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
  }

  const SynthSpec& spec_;
  Sampler chem_, disease_, symptom_, ambiguous_;
};

// Joins clauses into "Clause one. Clause two." and records span offsets.
// All lexicon text is ASCII, so byte offsets are character offsets.
Document render(std::string id, const std::vector<Clause>& clauses, const SynthSpec& spec) {
  std::string text;
  std::vector<EntitySpan> spans;
  for (std::size_t ci = 0; ci < clauses.size(); ++ci) {
    if (ci) text += ' ';
    const std::size_t clause_start = text.size();
    for (std::size_t pi = 0; pi < clauses[ci].size(); ++pi) {
      const Piece& p = clauses[ci][pi];
      if (pi) text += ' ';
      const std::size_t s = text.size();
      text += p.text;
      const bool keep = !p.label.empty() && (spec.annotate.empty() || spec.annotate.contains(p.label));
      if (keep) spans.push_back({s, text.size(), p.label});
    }
    text[clause_start] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[clause_start])));
    text += '.';
  }
  return make_document(std::move(id), std::move(text), std::move(spans));
}

std::string render_raw(const Clause& clause) {
  std::string text;
  for (const auto& p : clause) text += (text.empty() ? "" : " ") + p.text;
  text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  return text + ".";
}

std::size_t count_of(const SynthSpec& spec, const std::string& label) {
  auto it = spec.label_counts.find(label);
  return it == spec.label_counts.end() ? 0 : it->second;
}

std::vector<Unit> mention_units(const SynthSpec& spec) {
  const std::size_t chem = count_of(spec, "CHEMICAL");
  const std::size_t dose = count_of(spec, "DOSAGE");
  const std::size_t paired = std::min(chem, dose);
  std::vector<Unit> units;
  units.insert(units.end(), paired, Unit::kChemDose);
  units.insert(units.end(), chem - paired, Unit::kChem);
  units.insert(units.end(), dose - paired, Unit::kDose);
  units.insert(units.end(), count_of(spec, "DISEASE"), Unit::kDisease);
  units.insert(units.end(), count_of(spec, "SYMPTOM"), Unit::kSymptom);
  return units;
}

}  // namespace

const std::vector<std::string>& synth_labels() { return kLabels; }

const std::vector<std::string>& synth_lexicon(const std::string& label) {
  if (label == "CHEMICAL") return kChemicals;
  if (label == "DISEASE") return kDiseases;
  if (label == "SYMPTOM") return kSymptoms;
  if (label == "AMBIGUOUS") return kAmbiguous;
  throw InvalidArgument("no lexicon for label '" + label + "'");
}

SynthCorpus generate_synthetic_corpus(const SynthSpec& spec) {
  if (spec.documents == 0) throw InvalidArgument("synthetic corpus needs at least one document");
  for (const auto& [label, n] : spec.label_counts)
    if (std::find(kLabels.begin(), kLabels.end(), label) == kLabels.end())
      throw InvalidArgument("no lexicon for label '" + label + "'");
  const ClauseMaker maker(spec);
  SynthCorpus out;

  Rng rng(derive_seed(spec.seed, 1));
  std::vector<Unit> units = mention_units(spec);
  shuffle(units, rng);
  std::vector<std::vector<Clause>> docs(spec.documents);
  for (const Unit u : units) docs[uniform_index(rng, docs.size())].push_back(maker.make(u, rng));
  std::vector<Document> documents;
  documents.reserve(docs.size());
  const int width = static_cast<int>(std::to_string(spec.documents - 1).size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& clauses = docs[i];
    if (clauses.empty() || bernoulli(rng, 0.3)) clauses.push_back(maker.filler(rng));
    shuffle(clauses, rng);
    char id[64];
    std::snprintf(id, sizeof id, "%s-%0*zu", spec.id_prefix.c_str(), width, i);
    documents.push_back(render(id, clauses, spec));
  }
  std::set<std::string> labels;
  for (const auto& [label, n] : spec.label_counts)
    if (spec.annotate.empty() || spec.annotate.contains(label)) labels.insert(label);
  out.dataset = make_dataset(std::move(documents), std::move(labels));

  // Raw sentences follow the same unit mix, one clause per line.
  Rng raw_rng(derive_seed(spec.seed, 2));
  const std::vector<Unit> mix = mention_units(spec);
  out.raw.reserve(spec.raw_sentences);
  for (std::size_t i = 0; i < spec.raw_sentences; ++i) {
    if (mix.empty() || bernoulli(raw_rng, 0.15))
      out.raw.push_back(render_raw(maker.filler(raw_rng)));
    else
      out.raw.push_back(render_raw(maker.make(mix[uniform_index(raw_rng, mix.size())], raw_rng)));
  }
  return out;
}

SynthSpec benchmark_target_spec(std::uint64_t seed) {
  SynthSpec s;
  s.documents = 900;
  // A third of the four-label clinical set's mention counts.
  s.label_counts = {{"CHEMICAL", 398}, {"DISEASE", 310}, {"SYMPTOM", 641}, {"DOSAGE", 97}};
  s.raw_sentences = 3000;
  s.zipf_exponent = 1.0;
  s.id_prefix = "tgt";
  s.seed = seed;
  return s;
}

SynthSpec benchmark_source_spec(std::uint64_t seed) {
  SynthSpec s;
  s.documents = 1200;
  s.label_counts = {{"CHEMICAL", 900}, {"DISEASE", 900}, {"DOSAGE", 300}};
  s.annotate = {"CHEMICAL", "DISEASE"};
  s.raw_sentences = 0;
  s.zipf_exponent = 0.0;
  s.ambiguous_rate = 0.0;
  s.id_prefix = "src";
  s.seed = derive_seed(seed, 0x50);
  return s;
}

}  // namespace medner
