#pragma once

#include <deque>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemamap/errors.hpp"
#include "schemamap/util.hpp"

namespace schemamap {

// One proposed piece of evidence: the detected conflict, the plan for
// resolving it, the query that was issued and the sanitized excerpts that
// came back, together with the confidence measured before and after.
struct EvidenceTuple {
  int iteration = 0;
  std::string field;
  std::string conflict_summary;
  std::string resolution_plan;
  std::string query;
  std::vector<std::string> excerpts;
  double confidence_before = 0.0;
  double confidence_after = 0.0;
  double reward = 0.0;  // confidence_after - confidence_before
  bool accepted = false;
  std::optional<int> self_reported_confidence;

  std::uint64_t dedupe_key() const {
    std::uint64_t h = fnv1a(field);
    h = fnv1a("\x1f", h);
    h = fnv1a(query, h);
    for (const auto& e : excerpts) {
      h = fnv1a("\x1e", h);
      h = fnv1a(e, h);
    }
    return h;
  }

  friend bool operator==(const EvidenceTuple&, const EvidenceTuple&) = default;
};

enum class UpdateDecision {
  Accepted,
  RejectedNoImprovement,
  RejectedDuplicate,
};

inline const char* decision_name(UpdateDecision d) {
  switch (d) {
    case UpdateDecision::Accepted: return "ACCEPTED";
    case UpdateDecision::RejectedNoImprovement: return "REJECTED_NO_IMPROVEMENT";
    case UpdateDecision::RejectedDuplicate: return "REJECTED_DUPLICATE";
  }
  return "REJECTED_NO_IMPROVEMENT";
}

inline UpdateDecision decision_from_name(const std::string& s) {
  if (s == "ACCEPTED") return UpdateDecision::Accepted;
  if (s == "REJECTED_NO_IMPROVEMENT") return UpdateDecision::RejectedNoImprovement;
  if (s == "REJECTED_DUPLICATE") return UpdateDecision::RejectedDuplicate;
  throw ParseError("unknown ledger decision '" + s + "'");
}

// Text block a retained tuple contributes to mapping prompts.
inline std::string render_evidence_block(const EvidenceTuple& t) {
  std::string out = "[evidence] field " + t.field + " (iteration " +
                    std::to_string(t.iteration) + ")\n";
  out += "plan: " + t.resolution_plan + "\n";
  for (const auto& e : t.excerpts) out += "- " + e + "\n";
  return out;
}

// The agent's verbal memory E_t: accepted evidence tuples only, newest
// rendered first, deduplicated by (field, query, excerpts), bounded by an
// optional cap with oldest-first eviction.
class EvidenceContext {
 public:
  explicit EvidenceContext(std::size_t cap = 50) : cap_(cap) {}

  std::size_t cap() const { return cap_; }
  std::size_t size() const { return retained_.size(); }
  const std::deque<EvidenceTuple>& retained() const { return retained_; }

  // Applies the strict-improvement retention rule. Fills in reward/accepted
  // on the tuple; the caller ledgers the tuple regardless of the outcome.
  UpdateDecision update(EvidenceTuple& tuple) {
    tuple.reward = tuple.confidence_after - tuple.confidence_before;
    tuple.accepted = false;
    if (!(tuple.confidence_after > tuple.confidence_before))
      return UpdateDecision::RejectedNoImprovement;
    if (keys_.count(tuple.dedupe_key()) > 0) return UpdateDecision::RejectedDuplicate;

    tuple.accepted = true;
    retained_.push_back(tuple);
    keys_.insert(tuple.dedupe_key());
    while (cap_ > 0 && retained_.size() > cap_) {
      keys_.erase(retained_.front().dedupe_key());
      retained_.pop_front();
    }
    return UpdateDecision::Accepted;
  }

  // One block per retained tuple, most recent first.
  std::vector<std::string> render() const {
    std::vector<std::string> blocks;
    blocks.reserve(retained_.size());
    for (auto it = retained_.rbegin(); it != retained_.rend(); ++it)
      blocks.push_back(render_evidence_block(*it));
    return blocks;
  }

  nlohmann::json to_json() const;
  static EvidenceContext from_json(const nlohmann::json& j);

 private:
  std::deque<EvidenceTuple> retained_;
  std::unordered_set<std::uint64_t> keys_;  // dedupe keys of retained tuples
  std::size_t cap_;                          // 0 = unlimited
};

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

inline nlohmann::json tuple_to_json(const EvidenceTuple& t) {
  nlohmann::json j{{"iteration", t.iteration},
                   {"field", t.field},
                   {"conflict_summary", t.conflict_summary},
                   {"resolution_plan", t.resolution_plan},
                   {"query", t.query},
                   {"excerpts", t.excerpts},
                   {"confidence_before", t.confidence_before},
                   {"confidence_after", t.confidence_after},
                   {"reward", t.reward},
                   {"accepted", t.accepted}};
  j["self_reported_confidence"] =
      t.self_reported_confidence ? nlohmann::json(*t.self_reported_confidence)
                                 : nlohmann::json(nullptr);
  return j;
}

inline EvidenceTuple tuple_from_json(const nlohmann::json& j) {
  EvidenceTuple t;
  t.iteration = j.at("iteration").get<int>();
  t.field = j.at("field").get<std::string>();
  t.conflict_summary = j.at("conflict_summary").get<std::string>();
  t.resolution_plan = j.at("resolution_plan").get<std::string>();
  t.query = j.at("query").get<std::string>();
  t.excerpts = j.at("excerpts").get<std::vector<std::string>>();
  t.confidence_before = j.at("confidence_before").get<double>();
  t.confidence_after = j.at("confidence_after").get<double>();
  t.reward = j.at("reward").get<double>();
  t.accepted = j.at("accepted").get<bool>();
  if (j.contains("self_reported_confidence") && !j.at("self_reported_confidence").is_null())
    t.self_reported_confidence = j.at("self_reported_confidence").get<int>();
  return t;
}

inline nlohmann::json EvidenceContext::to_json() const {
  nlohmann::json retained = nlohmann::json::array();
  for (const auto& t : retained_) retained.push_back(tuple_to_json(t));
  return nlohmann::json{{"cap", cap_}, {"retained", std::move(retained)}};
}

inline EvidenceContext EvidenceContext::from_json(const nlohmann::json& j) {
  EvidenceContext ctx(j.at("cap").get<std::size_t>());
  for (const auto& jt : j.at("retained")) {
    EvidenceTuple t = tuple_from_json(jt);
    ctx.retained_.push_back(t);
    ctx.keys_.insert(t.dedupe_key());
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

struct LedgerEntry {
  enum class Kind { Tuple, Incident };

  Kind kind = Kind::Tuple;
  // Kind::Tuple
  EvidenceTuple tuple;
  UpdateDecision decision = UpdateDecision::RejectedNoImprovement;
  // Kind::Incident
  int iteration = 0;
  std::string incident;
  std::string detail;

  std::string timestamp;
};

// Append-only JSONL audit log. Every proposed tuple is written, accepted or
// not, plus incident lines for backend/provider failures. Lines are flushed
// as they are written.
class Ledger {
 public:
  Ledger() = default;

  void open(const std::filesystem::path& path, bool append, bool deterministic_time) {
    path_ = path;
    deterministic_time_ = deterministic_time;
    out_.open(path, append ? (std::ios::binary | std::ios::app)
                           : (std::ios::binary | std::ios::trunc));
    if (!out_) throw IoError("cannot open ledger: " + path.string());
  }

  bool is_open() const { return out_.is_open(); }
  const std::filesystem::path& path() const { return path_; }

  void append(const EvidenceTuple& tuple, UpdateDecision decision) {
    nlohmann::json j = tuple_to_json(tuple);
    j["decision"] = decision_name(decision);
    j["timestamp"] = now();
    write_line(j);
  }

  void incident(int iteration, const std::string& kind, const std::string& detail) {
    nlohmann::json j{{"incident", kind},
                     {"iteration", iteration},
                     {"detail", detail},
                     {"timestamp", now()}};
    write_line(j);
  }

 private:
  std::string now() const {
    return deterministic_time_ ? kEpochTimestamp : iso_utc_now();
  }

  void write_line(const nlohmann::json& j) {
    if (!out_.is_open()) throw IoError("ledger is not open");
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("ledger write failed: " + path_.string());
  }

  std::ofstream out_;
  std::filesystem::path path_;
  bool deterministic_time_ = false;
};

// Reconstructs the exact entry sequence. Corrupt lines are reported with
// their line number.
inline std::vector<LedgerEntry> load_ledger(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open ledger: " + path.string());
  std::vector<LedgerEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("ledger " + path.string() + " line " + std::to_string(lineno) +
                       ": " + e.what());
    }
    LedgerEntry entry;
    try {
      entry.timestamp = j.value("timestamp", std::string{});
      if (j.contains("incident")) {
        entry.kind = LedgerEntry::Kind::Incident;
        entry.incident = j.at("incident").get<std::string>();
        entry.iteration = j.at("iteration").get<int>();
        entry.detail = j.value("detail", std::string{});
      } else {
        entry.kind = LedgerEntry::Kind::Tuple;
        entry.tuple = tuple_from_json(j);
        entry.decision = decision_from_name(j.at("decision").get<std::string>());
        entry.iteration = entry.tuple.iteration;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("ledger " + path.string() + " line " + std::to_string(lineno) +
                       ": " + e.what());
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace schemamap
