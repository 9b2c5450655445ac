#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "schemamap/agent.hpp"
#include "schemamap/backend.hpp"
#include "schemamap/providers.hpp"
#include "schemamap/schema.hpp"

namespace schemamap::sim {

enum class FieldClass { Easy, Ambiguous, Unmapped };

inline const char* field_class_name(FieldClass c) {
  switch (c) {
    case FieldClass::Easy: return "easy";
    case FieldClass::Ambiguous: return "ambiguous";
    case FieldClass::Unmapped: return "unmapped";
  }
  return "easy";
}

inline FieldClass field_class_from_name(const std::string& s) {
  if (s == "easy") return FieldClass::Easy;
  if (s == "ambiguous") return FieldClass::Ambiguous;
  if (s == "unmapped") return FieldClass::Unmapped;
  throw ParseError("unknown field class '" + s + "'");
}

// An ambiguous field has several plausible target candidates and exactly one
// planted document whose decisive line settles the mapping.
struct AmbiguousInfo {
  std::vector<std::string> candidates;  // includes true_target (last)
  std::string true_target;
  std::string doc_id;
  std::string decisive_line;
};

struct ScenarioParams {
  int easy = 40;
  int ambiguous = 20;
  int unmapped = 6;
  int decoys_per_ambiguous = 3;    // decoy documents planted per ambiguous field
  int candidates_per_ambiguous = 6;
  double easy_noise = 0.005;       // per-draw wrong-answer probability
  double unmapped_noise = 0.005;
  double missing_rate = 0.002;     // per-draw unparseable-output probability
  std::uint64_t seed = 1;

  void validate() const {
    if (easy < 0 || ambiguous < 0 || unmapped < 0)
      throw ConfigError("scenario: field counts must be >= 0");
    if (easy + ambiguous + unmapped < 1)
      throw ConfigError("scenario: at least one field is required");
    if (candidates_per_ambiguous < 2)
      throw ConfigError("scenario: ambiguous fields need at least two candidates");
    if (decoys_per_ambiguous < 0) throw ConfigError("scenario: decoy count must be >= 0");
    if (easy_noise < 0 || easy_noise > 0.05)
      throw ConfigError("scenario: easy-class base error must be in [0, 0.05]");
    if (unmapped_noise < 0 || unmapped_noise > 1 || missing_rate < 0 || missing_rate > 1)
      throw ConfigError("scenario: rates must be probabilities");
  }
};

struct ScenarioDocument {
  std::string id;
  std::string title;
  std::string text;
};

// Deterministic stand-in world: schemas, ground truth, per-field classes and
// a planted document corpus.
struct Scenario {
  ScenarioParams params;
  Schema source;
  Schema target;
  GroundTruth truth;
  std::map<std::string, FieldClass> classes;
  std::map<std::string, AmbiguousInfo> ambiguous;
  std::vector<ScenarioDocument> corpus;

  FieldClass class_of(const std::string& field) const {
    auto it = classes.find(field);
    if (it == classes.end())
      throw ValidationError("scenario: field '" + field + "' is not part of this scenario");
    return it->second;
  }

  std::vector<CorpusDocument> corpus_documents() const {
    std::vector<CorpusDocument> docs;
    docs.reserve(corpus.size());
    for (const auto& d : corpus) docs.push_back(CorpusDocument{d.id, d.title, d.text});
    return docs;
  }

  CorpusIndex corpus_index() const { return CorpusIndex::from_documents(corpus_documents()); }

  // One file per document; the first line is the title.
  void write_corpus(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& d : corpus)
      write_text_file(dir / (d.id + ".txt"), d.title + "\n" + d.text + "\n");
  }
};

// ---------------------------------------------------------------------------
// Scenario JSON
// ---------------------------------------------------------------------------

inline json params_to_json(const ScenarioParams& p) {
  return json{{"easy", p.easy},
              {"ambiguous", p.ambiguous},
              {"unmapped", p.unmapped},
              {"decoys_per_ambiguous", p.decoys_per_ambiguous},
              {"candidates_per_ambiguous", p.candidates_per_ambiguous},
              {"easy_noise", p.easy_noise},
              {"unmapped_noise", p.unmapped_noise},
              {"missing_rate", p.missing_rate},
              {"seed", p.seed}};
}

inline ScenarioParams params_from_json(const json& j) {
  ScenarioParams p;
  p.easy = j.value("easy", p.easy);
  p.ambiguous = j.value("ambiguous", p.ambiguous);
  p.unmapped = j.value("unmapped", p.unmapped);
  p.decoys_per_ambiguous = j.value("decoys_per_ambiguous", p.decoys_per_ambiguous);
  p.candidates_per_ambiguous = j.value("candidates_per_ambiguous", p.candidates_per_ambiguous);
  p.easy_noise = j.value("easy_noise", p.easy_noise);
  p.unmapped_noise = j.value("unmapped_noise", p.unmapped_noise);
  p.missing_rate = j.value("missing_rate", p.missing_rate);
  p.seed = j.value("seed", p.seed);
  return p;
}

inline json scenario_to_json(const Scenario& s) {
  json classes = json::object();
  for (const auto& [field, c] : s.classes) classes[field] = field_class_name(c);
  json ambiguous = json::object();
  for (const auto& [field, info] : s.ambiguous)
    ambiguous[field] = {{"candidates", info.candidates},
                        {"true_target", info.true_target},
                        {"doc_id", info.doc_id},
                        {"decisive_line", info.decisive_line}};
  json corpus = json::array();
  for (const auto& d : s.corpus)
    corpus.push_back({{"id", d.id}, {"title", d.title}, {"text", d.text}});
  json truth = json::object();
  for (const auto& [src, tgt] : s.truth.pairs) truth[src] = tgt;
  return json{{"params", params_to_json(s.params)},
              {"source", schema_to_json(s.source)},
              {"target", schema_to_json(s.target)},
              {"truth", std::move(truth)},
              {"classes", std::move(classes)},
              {"ambiguous", std::move(ambiguous)},
              {"corpus", std::move(corpus)}};
}

inline Scenario scenario_from_json(const json& j) {
  Scenario s;
  try {
    s.params = params_from_json(j.at("params"));
    s.source = schema_from_json(j.at("source"), Side::Source);
    s.target = schema_from_json(j.at("target"), Side::Target);
    for (const auto& [src, tgt] : j.at("truth").items())
      s.truth.pairs[src] = tgt.get<std::string>();
    for (const auto& [field, c] : j.at("classes").items())
      s.classes[field] = field_class_from_name(c.get<std::string>());
    for (const auto& [field, ji] : j.at("ambiguous").items()) {
      AmbiguousInfo info;
      info.candidates = ji.at("candidates").get<std::vector<std::string>>();
      info.true_target = ji.at("true_target").get<std::string>();
      info.doc_id = ji.at("doc_id").get<std::string>();
      info.decisive_line = ji.at("decisive_line").get<std::string>();
      s.ambiguous.emplace(field, std::move(info));
    }
    for (const auto& jd : j.at("corpus"))
      s.corpus.push_back(ScenarioDocument{jd.at("id").get<std::string>(),
                                          jd.at("title").get<std::string>(),
                                          jd.at("text").get<std::string>()});
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scenario JSON: ") + e.what());
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw ParseError("scenario file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scenario generation
// ---------------------------------------------------------------------------

// Focus vocabulary for query reformulation. The decisive document of a field
// carries one of these terms; its decoys carry the others, so retrieval of
// the decisive document depends on how the query was phrased that iteration.
inline constexpr std::array<const char*, 4> kFocusTerms = {"orientation", "lifecycle",
                                                           "taxonomy", "provenance"};

inline std::size_t focus_index_of(const std::string& field, std::uint64_t scenario_seed) {
  return static_cast<std::size_t>(mix64(fnv1a(field) ^ scenario_seed) % kFocusTerms.size());
}

namespace detail {

inline std::string num2(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return buf;
}

inline std::string repeat_term(const std::string& term, int times) {
  std::string out;
  for (int i = 0; i < times; ++i) {
    if (i) out += ", ";
    out += term;
  }
  return out;
}

inline const char* cycle_type(int i) {
  static constexpr std::array<const char*, 5> kTypes = {"string", "integer", "ip",
                                                        "timestamp", "boolean"};
  return kTypes[static_cast<std::size_t>(i) % kTypes.size()];
}

inline std::vector<std::string> cycle_samples(int i) {
  switch (i % 5) {
    case 0: return {"alpha", "beta"};
    case 1: return {"42", "7"};
    case 2: return {"10.0.0.5", "192.168.1.20"};
    case 3: return {"2024-05-01T12:00:00Z"};
    default: return {"true", "false"};
  }
}

}  // namespace detail

// Builds a deterministic scenario. Ambiguous fields have several plausible
// candidates disambiguated only by a planted reference document; decoy
// documents match the same query terms but contain no decisive statement and
// outrank the reference unless the query carries the reference's focus term.
inline Scenario build_scenario(const ScenarioParams& params) {
  params.validate();
  Scenario s;
  s.params = params;
  s.source.name = "vendor_endpoint_v2";
  s.source.side = Side::Source;
  s.target.name = "common_event_schema";
  s.target.side = Side::Target;
  const std::string vendor = s.source.name;

  for (int i = 0; i < params.easy; ++i) {
    const std::string nn = detail::num2(i);
    const std::string src = "evt_attr" + nn;
    const std::string tgt = "core_attr" + nn;
    s.source.fields.push_back(SchemaField{
        src, "Endpoint sensor attribute " + nn + " as shipped by the vendor agent.",
        detail::cycle_type(i), detail::cycle_samples(i)});
    s.target.fields.push_back(SchemaField{
        tgt, "Normalized core attribute " + nn + " of the common event record.",
        detail::cycle_type(i), detail::cycle_samples(i)});
    s.truth.pairs[src] = tgt;
    s.classes[src] = FieldClass::Easy;
  }

  for (int i = 0; i < params.ambiguous; ++i) {
    const std::string nn = detail::num2(i);
    const std::string src = "net_sig" + nn;
    s.source.fields.push_back(SchemaField{
        src,
        "Direction-sensitive network attribute " + nn +
            "; the vendor documentation does not state which endpoint it refers to.",
        detail::cycle_type(i), detail::cycle_samples(i)});

    AmbiguousInfo info;
    for (int c = 0; c < params.candidates_per_ambiguous; ++c) {
      // Suffix letters ascend so the true candidate (the last one) never
      // wins a lexicographic tie-break on its own.
      const std::string cand = src + "_alt_" + std::string(1, static_cast<char>('a' + c));
      info.candidates.push_back(cand);
      s.target.fields.push_back(SchemaField{
          cand,
          "Network attribute " + nn + ", interpretation " +
              std::string(1, static_cast<char>('a' + c)) + ", of the connection record.",
          detail::cycle_type(i),
          {}});
    }
    info.true_target = info.candidates.back();
    info.doc_id = src + "_reference";
    info.decisive_line = src + " corresponds to target field " + info.true_target;
    s.truth.pairs[src] = info.true_target;
    s.classes[src] = FieldClass::Ambiguous;

    const std::string focus = kFocusTerms[focus_index_of(src, params.seed)];
    std::vector<std::string> others(info.candidates.begin(), info.candidates.end() - 1);
    ScenarioDocument ref;
    ref.id = info.doc_id;
    ref.title = vendor + " " + src + " field reference";
    ref.text = info.decisive_line + " in the common event schema. This page is the " +
               "authoritative definition of " + src + " for " + vendor +
               " telemetry. The alternatives " + join(others, ", ") +
               " describe nearby attributes, but integrators should treat " + src +
               " as settled. Topic tags: " + detail::repeat_term(focus, 10) + ".";
    s.corpus.push_back(std::move(ref));

    for (int d = 0; d < params.decoys_per_ambiguous; ++d) {
      const std::string term =
          kFocusTerms[(focus_index_of(src, params.seed) + 1 + static_cast<std::size_t>(d)) % kFocusTerms.size()];
      const std::string favored = info.candidates[static_cast<std::size_t>(d) %
                                                  (info.candidates.size() - 1)];
      ScenarioDocument note;
      note.id = src + "_note" + std::to_string(d);
      note.title = "community notes on " + src + " in " + vendor;
      note.text = "Thread about " + src + " values seen in " + vendor + " events. Some " +
                  "integrators route " + src + " to " + favored + ", and " + favored +
                  " shows up in several pipelines; " + favored + " is popular but others " +
                  "mention " + join(info.candidates, ", ") + ". No definition here settles " +
                  "what " + src + " means. Topic tags: " + detail::repeat_term(term, 10) + ".";
      s.corpus.push_back(std::move(note));
    }
    s.ambiguous.emplace(src, std::move(info));
  }

  for (int i = 0; i < params.unmapped; ++i) {
    const std::string nn = detail::num2(i);
    const std::string src = "vnd_extra" + nn;
    s.source.fields.push_back(SchemaField{src, "", detail::cycle_type(i), {}});
    s.truth.pairs[src] = kNotCovered;
    s.classes[src] = FieldClass::Unmapped;
  }

  // Unmapped filler targets; also the pool wrong easy draws land in.
  for (int i = 0; i < 8; ++i) {
    const std::string nn = detail::num2(i);
    s.target.fields.push_back(SchemaField{
        "reserved_attr" + nn, "Reserved attribute " + nn + " kept for future revisions.",
        detail::cycle_type(i), {}});
  }

  s.source.validate();
  s.target.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Noisy-oracle backend
// ---------------------------------------------------------------------------

// Simulated mapping function. Draws are counter-keyed by (field, variant,
// iteration) so results are a pure function of the run seed: call order and
// concurrency cannot reorder them, and a candidate evaluation that adds no
// decisive evidence replays exactly the hypothesis draws of its iteration.
class OracleSimBackend : public MapperBackend {
 public:
  OracleSimBackend(std::shared_ptr<const Scenario> scenario, std::uint64_t run_seed)
      : scenario_(std::move(scenario)), rng_{run_seed} {
    if (!scenario_) throw ConfigError("oracle-sim: no scenario");
  }

  std::string name() const override { return "oracle-sim"; }

  BackendResponse map_fields(const MappingRequest& request) override {
    std::vector<std::pair<std::string, Prediction>> decisions;
    decisions.reserve(request.source_fields.size());
    for (const auto& f : request.source_fields) {
      Prediction p = draw(f.name, request);
      // A MISSING draw models unparseable output: the decision is simply
      // absent from the rendered reply.
      if (!p.is_missing()) decisions.emplace_back(f.name, std::move(p));
    }
    return parse_response(render_response(decisions), request);
  }

  // Reformulates the template query with a focus term that varies by
  // iteration, the way a live model rephrases repeated searches.
  std::string formulate_query(const Conflict& conflict, const EvidenceContext& context,
                              const std::string& vendor, int iteration) override {
    (void)context;
    std::size_t pick = static_cast<std::size_t>(
        rng_.bits("focus", conflict.field, 0, iteration) % kFocusTerms.size());
    return template_query(conflict, vendor) + " " + kFocusTerms[pick];
  }

 private:
  Prediction draw(const std::string& field, const MappingRequest& request) const {
    const Scenario& sc = *scenario_;
    const FieldClass cls = sc.class_of(field);
    const int v = request.variant_index;
    const int t = request.iteration;

    if (cls == FieldClass::Ambiguous) {
      const AmbiguousInfo& info = sc.ambiguous.at(field);
      for (const auto& block : request.context_blocks) {
        if (block.find(info.decisive_line) != std::string::npos)
          return Prediction::target_field(info.true_target, 5);
      }
      if (rng_.uniform("miss", field, v, t) < sc.params.missing_rate)
        return Prediction::missing();
      std::size_t pick = static_cast<std::size_t>(rng_.bits("amb", field, v, t) %
                                                  info.candidates.size());
      return Prediction::target_field(info.candidates[pick], 3);
    }

    if (rng_.uniform("miss", field, v, t) < sc.params.missing_rate)
      return Prediction::missing();

    if (cls == FieldClass::Easy) {
      const std::string& truth = sc.truth.pairs.at(field);
      if (rng_.uniform("err", field, v, t) < sc.params.easy_noise)
        return Prediction::target_field(wrong_pick(field, v, t, truth), 4);
      return Prediction::target_field(truth, 4);
    }

    // Unmapped
    if (rng_.uniform("err", field, v, t) < sc.params.unmapped_noise) {
      const auto& targets = sc.target.fields;
      std::size_t pick =
          static_cast<std::size_t>(rng_.bits("pick", field, v, t) % targets.size());
      return Prediction::target_field(targets[pick].name, 4);
    }
    return Prediction::not_covered(4);
  }

  std::string wrong_pick(const std::string& field, int v, int t,
                         const std::string& exclude) const {
    const auto& targets = scenario_->target.fields;
    std::size_t pick =
        static_cast<std::size_t>(rng_.bits("pick", field, v, t) % (targets.size() - 1));
    for (const auto& f : targets) {
      if (f.name == exclude) continue;
      if (pick == 0) return f.name;
      --pick;
    }
    return targets.back().name;
  }

  std::shared_ptr<const Scenario> scenario_;
  KeyedRng rng_;
};

// ---------------------------------------------------------------------------
// Calibration experiment (3 vs 10 inferences)
// ---------------------------------------------------------------------------

struct CalibrationRow {
  int n = 0;
  int seeds = 0;
  double final_accuracy = 0.0;
  double mean_confidence = 0.0;
  double mean_abs_gap = 0.0;  // mean |final confidence - final accuracy|
  double initial_flagged = 0.0;
  double final_flagged = 0.0;
};

// Full agent runs per (n, seed) against the oracle backend and the
// scenario's corpus; one row per n with means across seeds.
inline std::vector<CalibrationRow> run_calibration_experiment(
    const Scenario& scenario, const std::vector<int>& n_values, int alpha,
    const std::vector<std::uint64_t>& seeds) {
  if (n_values.empty()) throw ConfigError("calibration: no n values");
  for (int n : n_values)
    if (n < 2) throw ConfigError("calibration: every n must be >= 2");
  if (seeds.empty()) throw ConfigError("calibration: no seeds");

  auto shared = std::make_shared<const Scenario>(scenario);
  std::vector<CalibrationRow> rows;
  for (int n : n_values) {
    CalibrationRow row;
    row.n = n;
    row.seeds = static_cast<int>(seeds.size());
    for (std::uint64_t seed : seeds) {
      RunConfig cfg;
      cfg.alpha = alpha;
      cfg.variants = n;
      cfg.seed = seed;
      cfg.stop_on_no_conflicts = false;  // measure at exactly alpha
      cfg.deterministic_time = true;
      Agent agent(cfg, std::make_shared<OracleSimBackend>(shared, seed),
                  std::make_shared<CorpusSearchProvider>(shared->corpus_index()),
                  shared->source, shared->target);
      agent.set_truth(shared->truth);
      RunResult result = agent.run();
      const IterationRecord& first = result.records.front();
      const IterationRecord& last = result.records.back();
      row.final_accuracy += *last.accuracy;
      row.mean_confidence += last.mean_confidence;
      row.mean_abs_gap += std::abs(last.mean_confidence - *last.accuracy);
      row.initial_flagged += static_cast<double>(first.conflict_fields.size());
      row.final_flagged += static_cast<double>(last.conflict_fields.size());
    }
    const double k = static_cast<double>(seeds.size());
    row.final_accuracy /= k;
    row.mean_confidence /= k;
    row.mean_abs_gap /= k;
    row.initial_flagged /= k;
    row.final_flagged /= k;
    rows.push_back(row);
  }
  return rows;
}

inline std::string calibration_csv(const std::vector<CalibrationRow>& rows) {
  std::string out =
      "n,seeds,final_accuracy,mean_confidence,mean_abs_gap,initial_flagged,final_flagged\n";
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%.2f,%.2f\n", r.n, r.seeds,
                  r.final_accuracy, r.mean_confidence, r.mean_abs_gap, r.initial_flagged,
                  r.final_flagged);
    out += buf;
  }
  return out;
}

}  // namespace schemamap::sim
