#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "schemamap/confidence.hpp"
#include "schemamap/evidence.hpp"
#include "schemamap/record.hpp"
#include "schemamap/schema.hpp"

namespace schemamap {

// Headline numbers emitted as run_summary.json at the end of a run.
struct RunSummary {
  int iterations = 0;
  std::optional<double> final_accuracy;
  double final_mean_confidence = 0.0;
  int initial_conflicts = 0;
  int final_conflicts = 0;
  int tuples_accepted = 0;
  int tuples_rejected = 0;
};

inline RunSummary summarize(const std::vector<IterationRecord>& records) {
  if (records.empty()) throw ValidationError("run summary: no iterations were recorded");
  RunSummary s;
  s.iterations = static_cast<int>(records.size());
  s.final_accuracy = records.back().accuracy;
  s.final_mean_confidence = records.back().mean_confidence;
  s.initial_conflicts = static_cast<int>(records.front().conflict_fields.size());
  s.final_conflicts = static_cast<int>(records.back().conflict_fields.size());
  for (const auto& r : records) {
    s.tuples_accepted += r.tuples_accepted;
    s.tuples_rejected += r.tuples_rejected;
  }
  return s;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j{{"iterations", s.iterations},
                   {"final_mean_confidence", s.final_mean_confidence},
                   {"initial_conflicts", s.initial_conflicts},
                   {"final_conflicts", s.final_conflicts},
                   {"tuples_accepted", s.tuples_accepted},
                   {"tuples_rejected", s.tuples_rejected}};
  if (s.final_accuracy) j["final_accuracy"] = *s.final_accuracy;
  return j;
}

// The expert-review report: the full mapping table plus the fields whose
// confidence stayed below the review threshold, each with its conflict
// history and evidence trail.
struct ReviewReport {
  struct MappingRow {
    std::string field;
    std::string prediction;  // modal value key
    double confidence = 0.0;
    std::string reasoning;  // last reasoning attached to the modal prediction
  };

  struct FlaggedField {
    std::string field;
    double confidence = 0.0;
    std::string prediction;
    std::vector<int> conflict_iterations;
    std::vector<LedgerEntry> evidence_trail;  // every proposed tuple for the field
  };

  double threshold = 1.0;
  std::vector<MappingRow> mappings;
  std::vector<FlaggedField> flagged;  // ascending by confidence, then name
  RunSummary summary;
};

// Pure function of the run artifacts; regenerating a report never changes
// them.
inline ReviewReport build_report(const MappingHypothesis& hypothesis,
                                 const std::vector<IterationRecord>& records,
                                 const std::vector<LedgerEntry>& ledger, double threshold) {
  if (records.empty()) throw ValidationError("report: run has no recorded iterations");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ConfigError("report: threshold must be in (0, 1]");

  ReviewReport report;
  report.threshold = threshold;
  report.summary = summarize(records);

  for (const auto& [field, entry] : hypothesis.entries) {
    ReviewReport::MappingRow row;
    row.field = field;
    row.prediction = entry.modal.value_key();
    row.confidence = entry.confidence;
    if (entry.modal.reasoning) row.reasoning = *entry.modal.reasoning;
    report.mappings.push_back(std::move(row));

    if (entry.confidence < threshold) {
      ReviewReport::FlaggedField f;
      f.field = field;
      f.confidence = entry.confidence;
      f.prediction = entry.modal.value_key();
      for (const auto& r : records)
        for (const auto& c : r.conflict_fields)
          if (c == field) f.conflict_iterations.push_back(r.iteration);
      for (const auto& e : ledger)
        if (e.kind == LedgerEntry::Kind::Tuple && e.tuple.field == field)
          f.evidence_trail.push_back(e);
      report.flagged.push_back(std::move(f));
    }
  }

  std::sort(report.flagged.begin(), report.flagged.end(),
            [](const ReviewReport::FlaggedField& a, const ReviewReport::FlaggedField& b) {
              if (a.confidence != b.confidence) return a.confidence < b.confidence;
              return a.field < b.field;
            });
  return report;
}

inline nlohmann::json report_to_json(const ReviewReport& report) {
  nlohmann::json mappings = nlohmann::json::array();
  for (const auto& row : report.mappings)
    mappings.push_back({{"field", row.field},
                        {"prediction", row.prediction},
                        {"confidence", row.confidence},
                        {"reasoning", row.reasoning}});
  nlohmann::json flagged = nlohmann::json::array();
  for (const auto& f : report.flagged) {
    nlohmann::json trail = nlohmann::json::array();
    for (const auto& e : f.evidence_trail) {
      nlohmann::json jt = tuple_to_json(e.tuple);
      jt["decision"] = decision_name(e.decision);
      trail.push_back(std::move(jt));
    }
    flagged.push_back({{"field", f.field},
                       {"confidence", f.confidence},
                       {"prediction", f.prediction},
                       {"conflict_iterations", f.conflict_iterations},
                       {"evidence_trail", std::move(trail)}});
  }
  return nlohmann::json{{"threshold", report.threshold},
                        {"mappings", std::move(mappings)},
                        {"flagged", std::move(flagged)},
                        {"summary", summary_to_json(report.summary)}};
}

inline std::string render_report_text(const ReviewReport& report) {
  char buf[256];
  std::string out = "MAPPING REVIEW REPORT\n=====================\n\n";

  std::snprintf(buf, sizeof(buf),
                "iterations: %d\ninitial conflicts: %d\nfinal conflicts: %d\n"
                "tuples accepted: %d\ntuples rejected: %d\nfinal mean confidence: %.4f\n",
                report.summary.iterations, report.summary.initial_conflicts,
                report.summary.final_conflicts, report.summary.tuples_accepted,
                report.summary.tuples_rejected, report.summary.final_mean_confidence);
  out += buf;
  if (report.summary.final_accuracy) {
    std::snprintf(buf, sizeof(buf), "final accuracy: %.4f\n", *report.summary.final_accuracy);
    out += buf;
  }

  out += "\nMAPPINGS\n--------\n";
  for (const auto& row : report.mappings) {
    std::snprintf(buf, sizeof(buf), "%-24s -> %-28s confidence %.4f", row.field.c_str(),
                  row.prediction.c_str(), row.confidence);
    out += buf;
    if (!row.reasoning.empty()) out += "  (" + row.reasoning + ")";
    out += "\n";
  }

  std::snprintf(buf, sizeof(buf), "\nFLAGGED FOR EXPERT REVIEW (confidence < %.2f): %zu\n",
                report.threshold, report.flagged.size());
  out += buf;
  out += "-----------------------------------------\n";
  for (const auto& f : report.flagged) {
    std::snprintf(buf, sizeof(buf), "* %s  prediction=%s  confidence=%.4f\n", f.field.c_str(),
                  f.prediction.c_str(), f.confidence);
    out += buf;
    out += "  conflicted in iterations: ";
    for (std::size_t i = 0; i < f.conflict_iterations.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(f.conflict_iterations[i]);
    }
    out += "\n";
    for (const auto& e : f.evidence_trail) {
      std::snprintf(buf, sizeof(buf),
                    "  [iter %3d] %s: query \"%s\" confidence %.4f -> %.4f\n", e.tuple.iteration,
                    decision_name(e.decision), e.tuple.query.c_str(),
                    e.tuple.confidence_before, e.tuple.confidence_after);
      out += buf;
    }
  }
  return out;
}

}  // namespace schemamap
