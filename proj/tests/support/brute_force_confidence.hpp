#pragma once

// Independent confidence oracle used only by tests. Deliberately written on
// a different route than the library: integer half-weights, linear scans and
// its own tie-break logic, so the two implementations can cross-check each
// other over exhaustive input sets.

#include <string>
#include <vector>

#include "schemamap/schema.hpp"

namespace schemamap::testing {

struct BruteForceScore {
  double value = 0.0;
  std::string modal_key;  // "MISSING" when every prediction is missing
};

inline BruteForceScore brute_force_confidence(const std::vector<Prediction>& predictions) {
  if (predictions.empty()) throw std::invalid_argument("empty prediction list");

  // Weights counted in halves so all arithmetic stays integral.
  long denominator_halves = 0;
  for (const auto& p : predictions)
    denominator_halves += p.is_missing() ? 1 : 2;

  // Distinct non-missing value keys, discovery order.
  std::vector<std::string> keys;
  std::vector<long> counts;
  std::vector<bool> is_target;
  for (const auto& p : predictions) {
    if (p.is_missing()) continue;
    std::string key = p.value_key();
    bool found = false;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i] == key) {
        ++counts[i];
        found = true;
        break;
      }
    }
    if (!found) {
      keys.push_back(key);
      counts.push_back(1);
      is_target.push_back(p.kind == PredictionKind::TargetField);
    }
  }

  BruteForceScore score;
  if (keys.empty()) {
    score.modal_key = "MISSING";
    score.value = 0.0;
    return score;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < keys.size(); ++i) {
    if (counts[i] > counts[best]) {
      best = i;
      continue;
    }
    if (counts[i] < counts[best]) continue;
    // Tie: a target field beats NOT_COVERED; among targets the smaller name
    // wins.
    if (is_target[i] && !is_target[best]) {
      best = i;
    } else if (is_target[i] == is_target[best] && keys[i] < keys[best]) {
      best = i;
    }
  }

  score.modal_key = keys[best];
  score.value = static_cast<double>(2 * counts[best]) / static_cast<double>(denominator_halves);
  return score;
}

}  // namespace schemamap::testing
