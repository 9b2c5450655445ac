#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemamap/errors.hpp"

namespace schemamap {

// Per-iteration metrics. `accuracy` is present only when a ground-truth file
// was supplied; it is filled after all of the iteration's decisions are final
// and never feeds back into them.
struct IterationRecord {
  struct FieldState {
    std::string prediction;  // modal value key (target name, NOT_COVERED or MISSING)
    double confidence = 0.0;
  };

  int iteration = 0;
  double mean_confidence = 0.0;
  std::vector<std::string> conflict_fields;
  int tuples_proposed = 0;
  int tuples_accepted = 0;
  int tuples_rejected = 0;
  std::optional<double> accuracy;
  std::map<std::string, FieldState> per_field;
};

inline nlohmann::json record_to_json(const IterationRecord& r) {
  nlohmann::json per_field = nlohmann::json::object();
  for (const auto& [field, st] : r.per_field)
    per_field[field] = {{"prediction", st.prediction}, {"confidence", st.confidence}};
  nlohmann::json j{{"iteration", r.iteration},
                   {"mean_confidence", r.mean_confidence},
                   {"conflict_fields", r.conflict_fields},
                   {"tuples_proposed", r.tuples_proposed},
                   {"tuples_accepted", r.tuples_accepted},
                   {"tuples_rejected", r.tuples_rejected},
                   {"per_field", std::move(per_field)}};
  if (r.accuracy) j["accuracy"] = *r.accuracy;
  return j;
}

inline IterationRecord record_from_json(const nlohmann::json& j) {
  IterationRecord r;
  try {
    r.iteration = j.at("iteration").get<int>();
    r.mean_confidence = j.at("mean_confidence").get<double>();
    r.conflict_fields = j.at("conflict_fields").get<std::vector<std::string>>();
    r.tuples_proposed = j.at("tuples_proposed").get<int>();
    r.tuples_accepted = j.at("tuples_accepted").get<int>();
    r.tuples_rejected = j.at("tuples_rejected").get<int>();
    if (j.contains("accuracy")) r.accuracy = j.at("accuracy").get<double>();
    for (const auto& [field, js] : j.at("per_field").items()) {
      r.per_field[field] = IterationRecord::FieldState{
          js.at("prediction").get<std::string>(), js.at("confidence").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed iteration record: ") + e.what());
  }
  return r;
}

}  // namespace schemamap
