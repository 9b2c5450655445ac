#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "schemamap/schema.hpp"

namespace schemamap {

enum class TaskScope {
  FullSchema,   // map every listed source field
  SingleField,  // re-map one conflicted field during candidate evaluation
};

// Distinguishes hypothesis generation from candidate evaluation so backends
// that key deterministic draws on the request can tell them apart if needed.
enum class RequestPurpose {
  Hypothesis,
  CandidateEval,
};

// One mapping call to a backend: the fields to map (already in variant
// order), the full target schema, and the rendered evidence context.
struct MappingRequest {
  TaskScope scope = TaskScope::FullSchema;
  std::string single_field;  // set iff scope == SingleField
  std::vector<SchemaField> source_fields;
  std::shared_ptr<const Schema> target;
  std::vector<std::string> context_blocks;
  int variant_index = 0;
  int iteration = 1;
  RequestPurpose purpose = RequestPurpose::Hypothesis;
  double temperature = 0.0;

  std::vector<std::string> field_names() const {
    std::vector<std::string> names;
    names.reserve(source_fields.size());
    for (const auto& f : source_fields) names.push_back(f.name);
    return names;
  }
};

// Parsed backend reply: the raw text plus one prediction per requested
// source field (absent or unparseable answers come back as MISSING).
struct BackendResponse {
  std::string raw_text;
  std::vector<std::pair<std::string, Prediction>> decisions;

  const Prediction* find(std::string_view field) const {
    for (const auto& [name, pred] : decisions)
      if (name == field) return &pred;
    return nullptr;
  }
};

}  // namespace schemamap
