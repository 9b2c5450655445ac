#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "schemamap/record.hpp"
#include "schemamap/schema.hpp"

namespace schemamap {

// Weights for the adjusted total. A parseable answer (target field or the
// explicit NOT_COVERED abstention) counts fully; a malformed/empty output
// counts half, so that unanswered attempts dilute confidence without being
// able to dominate it.
inline constexpr double kAnswerWeight = 1.0;
inline constexpr double kMissingWeight = 0.5;

// Consistency-based confidence for one field: the modal prediction's weight
// over the adjusted total of all variant weights.
struct ConfidenceScore {
  double value = 0.0;
  double numerator_weight = 0.0;
  double denominator_weight = 0.0;
  Prediction modal;  // MISSING only when every variant was MISSING
};

// Modal selection ties: a target field beats NOT_COVERED; among target
// fields the lexicographically smallest name wins. MISSING is never modal;
// if all predictions are MISSING the score is 0.
inline ConfidenceScore compute_confidence(std::span<const Prediction> predictions) {
  if (predictions.empty())
    throw ValidationError("compute_confidence: empty prediction list");

  double denominator = 0.0;
  // value key -> (total weight, representative prediction)
  std::map<std::string, std::pair<double, const Prediction*>> groups;
  for (const auto& p : predictions) {
    if (p.is_missing()) {
      denominator += kMissingWeight;
      continue;
    }
    denominator += kAnswerWeight;
    auto [it, inserted] = groups.try_emplace(p.value_key(), 0.0, &p);
    it->second.first += kAnswerWeight;
  }

  ConfidenceScore score;
  score.denominator_weight = denominator;
  if (groups.empty()) {
    score.modal = Prediction::missing();
    score.value = 0.0;
    return score;
  }

  const Prediction* best = nullptr;
  double best_weight = -1.0;
  // groups iterate in key order, so the lexicographic tie-break falls out of
  // taking strict improvements only; NOT_COVERED additionally loses ties to
  // any target field.
  for (const auto& [key, entry] : groups) {
    const auto& [weight, pred] = entry;
    bool better = weight > best_weight;
    if (!better && weight == best_weight && best != nullptr) {
      bool best_is_abstain = best->kind == PredictionKind::NotCovered;
      bool cur_is_target = pred->kind == PredictionKind::TargetField;
      better = best_is_abstain && cur_is_target;
    }
    if (better) {
      best = pred;
      best_weight = weight;
    }
  }

  score.modal = *best;
  score.numerator_weight = best_weight;
  score.value = best_weight / denominator;
  return score;
}

inline ConfidenceScore compute_confidence(const std::vector<Prediction>& predictions) {
  return compute_confidence(std::span<const Prediction>(predictions));
}

// ---------------------------------------------------------------------------
// Conflicts
// ---------------------------------------------------------------------------

// A field whose n variant predictions disagree within one iteration. Any
// MISSING variant breaks unanimity, so this is exactly the set of fields
// with confidence < 1.
struct Conflict {
  std::string field;
  std::vector<Prediction> variant_predictions;
  ConfidenceScore confidence;
};

inline bool is_conflicted(const std::vector<Prediction>& variants) {
  for (const auto& p : variants)
    if (p.is_missing()) return true;
  for (std::size_t i = 1; i < variants.size(); ++i)
    if (!variants[i].same_value(variants[0])) return true;
  return false;
}

// Returns conflicted fields sorted ascending by name. Every entry must carry
// exactly n variant predictions.
inline std::vector<Conflict> detect_conflicts(const MappingHypothesis& hypothesis, int n) {
  std::vector<Conflict> conflicts;
  for (const auto& [field, entry] : hypothesis.entries) {
    if (static_cast<int>(entry.variants.size()) != n)
      throw ValidationError("detect_conflicts: field '" + field + "' has " +
                            std::to_string(entry.variants.size()) +
                            " variant predictions, expected " + std::to_string(n));
    if (is_conflicted(entry.variants)) {
      Conflict c;
      c.field = field;
      c.variant_predictions = entry.variants;
      c.confidence = compute_confidence(entry.variants);
      conflicts.push_back(std::move(c));
    }
  }
  return conflicts;  // map iteration order is already ascending by field name
}

// ---------------------------------------------------------------------------
// Accuracy (evaluation only)
// ---------------------------------------------------------------------------

struct AccuracyReport {
  struct FieldOutcome {
    std::string predicted;
    std::string expected;
    bool correct = false;
  };

  int correct = 0;
  int total = 0;
  double accuracy = 0.0;
  std::map<std::string, FieldOutcome> per_field;
};

// A field counts correct iff the modal prediction equals the ground-truth
// entry. NOT_COVERED matches NOT_COVERED; MISSING never matches anything.
inline AccuracyReport evaluate_accuracy(const MappingHypothesis& hypothesis,
                                        const GroundTruth& truth) {
  if (truth.empty()) throw ValidationError("evaluate_accuracy: empty ground truth");
  AccuracyReport report;
  report.total = static_cast<int>(truth.size());
  for (const auto& [field, expected] : truth.pairs) {
    AccuracyReport::FieldOutcome outcome;
    outcome.expected = expected;
    auto it = hypothesis.entries.find(field);
    if (it == hypothesis.entries.end()) {
      outcome.predicted = "MISSING";
    } else {
      outcome.predicted = it->second.modal.value_key();
      outcome.correct = !it->second.modal.is_missing() && outcome.predicted == expected;
    }
    if (outcome.correct) ++report.correct;
    report.per_field.emplace(field, std::move(outcome));
  }
  report.accuracy = static_cast<double>(report.correct) / report.total;
  return report;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

struct CalibrationGap {
  double mean_confidence = 0.0;
  double mean_accuracy = 0.0;
  double gap = 0.0;  // positive values indicate overconfidence
};

// Mean confidence minus mean accuracy over the final `window` iterations.
// Every record in the window must carry an accuracy value.
inline CalibrationGap calibration_gap(std::span<const IterationRecord> records,
                                      std::size_t window = 10) {
  if (records.empty()) throw ValidationError("calibration_gap: no records");
  std::size_t n = std::min(window, records.size());
  CalibrationGap g;
  for (std::size_t i = records.size() - n; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.accuracy)
      throw ValidationError("calibration_gap: iteration " + std::to_string(r.iteration) +
                            " has no accuracy (run was not evaluated)");
    g.mean_confidence += r.mean_confidence;
    g.mean_accuracy += *r.accuracy;
  }
  g.mean_confidence /= static_cast<double>(n);
  g.mean_accuracy /= static_cast<double>(n);
  g.gap = g.mean_confidence - g.mean_accuracy;
  return g;
}

inline CalibrationGap calibration_gap(const std::vector<IterationRecord>& records,
                                      std::size_t window = 10) {
  return calibration_gap(std::span<const IterationRecord>(records), window);
}

}  // namespace schemamap
