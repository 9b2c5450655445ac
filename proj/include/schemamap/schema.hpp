#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemamap/errors.hpp"
#include "schemamap/util.hpp"

namespace schemamap {

using json = nlohmann::json;

// Literal used for "no corresponding target field" in ground-truth files,
// backend responses and prompts.
inline constexpr const char* kNotCovered = "NOT_COVERED";

enum class Side { Source, Target };

inline const char* side_name(Side s) {
  return s == Side::Source ? "source" : "target";
}

// ---------------------------------------------------------------------------
// Fields and schemas
// ---------------------------------------------------------------------------

struct SchemaField {
  std::string name;
  std::string description;  // may be empty: vendor docs are often incomplete
  std::string data_type;
  std::vector<std::string> sample_values;

  friend bool operator==(const SchemaField&, const SchemaField&) = default;
};

// An ordered field catalog. Field order is preserved on load because prompt
// variants shuffle relative to this canonical order.
struct Schema {
  std::string name;
  Side side = Side::Source;
  std::vector<SchemaField> fields;

  bool has_field(std::string_view field_name) const {
    for (const auto& f : fields)
      if (f.name == field_name) return true;
    return false;
  }

  const SchemaField* find(std::string_view field_name) const {
    for (const auto& f : fields)
      if (f.name == field_name) return &f;
    return nullptr;
  }

  // Stable digest of the field-name list; checkpoints use it to detect a
  // resume against the wrong schema file.
  std::string fingerprint() const {
    std::uint64_t h = fnv1a(name);
    for (const auto& f : fields) h = fnv1a(f.name, fnv1a("\x1f", h));
    return hex64(h);
  }

  void validate() const {
    if (fields.empty())
      throw ValidationError("schema '" + name + "': must contain at least one field");
    std::map<std::string_view, int> seen;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].name.empty())
        throw ValidationError("schema '" + name + "': field #" +
                              std::to_string(i + 1) + " has an empty name");
      if (++seen[fields[i].name] > 1)
        throw ValidationError("schema '" + name + "': duplicate field name '" +
                              fields[i].name + "'");
    }
  }

  friend bool operator==(const Schema&, const Schema&) = default;
};

inline json schema_to_json(const Schema& s) {
  json fields = json::array();
  for (const auto& f : s.fields) {
    fields.push_back({{"name", f.name},
                      {"description", f.description},
                      {"data_type", f.data_type},
                      {"sample_values", f.sample_values}});
  }
  return json{{"name", s.name}, {"fields", std::move(fields)}};
}

inline Schema schema_from_json(const json& j, Side side) {
  Schema s;
  s.side = side;
  try {
    s.name = j.at("name").get<std::string>();
    for (const auto& jf : j.at("fields")) {
      SchemaField f;
      f.name = jf.at("name").get<std::string>();
      f.description = jf.value("description", std::string{});
      f.data_type = jf.value("data_type", std::string{});
      if (jf.contains("sample_values"))
        f.sample_values = jf.at("sample_values").get<std::vector<std::string>>();
      s.fields.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed schema JSON: ") + e.what());
  }
  s.validate();
  return s;
}

inline Schema load_schema(const std::filesystem::path& path, Side side) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError("schema file " + path.string() + ": " + e.what());
  }
  return schema_from_json(j, side);
}

inline void save_schema(const Schema& s, const std::filesystem::path& path) {
  write_text_file(path, schema_to_json(s).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

enum class PredictionKind {
  TargetField,  // maps onto a named target field
  NotCovered,   // explicit abstention: no corresponding target field
  Missing,      // malformed or absent model output
};

// One variant's answer for one source field. MISSING is an artifact-level
// value, distinct from the explicit NOT_COVERED abstention: it carries a
// reduced weight in confidence scoring and can never become the modal
// prediction.
struct Prediction {
  PredictionKind kind = PredictionKind::Missing;
  std::string target;  // set iff kind == TargetField
  std::optional<int> self_reported_confidence;  // 1..5, recorded but unused in scoring
  std::optional<std::string> reasoning;

  static Prediction target_field(std::string name, std::optional<int> conf = {},
                                 std::optional<std::string> why = {}) {
    Prediction p;
    p.kind = PredictionKind::TargetField;
    p.target = std::move(name);
    p.self_reported_confidence = conf;
    p.reasoning = std::move(why);
    return p;
  }

  static Prediction not_covered(std::optional<int> conf = {},
                                std::optional<std::string> why = {}) {
    Prediction p;
    p.kind = PredictionKind::NotCovered;
    p.self_reported_confidence = conf;
    p.reasoning = std::move(why);
    return p;
  }

  static Prediction missing() { return Prediction{}; }

  bool is_missing() const { return kind == PredictionKind::Missing; }

  // Value identity used for agreement counting and reporting.
  std::string value_key() const {
    switch (kind) {
      case PredictionKind::TargetField: return target;
      case PredictionKind::NotCovered: return kNotCovered;
      case PredictionKind::Missing: return "MISSING";
    }
    return "MISSING";
  }

  // Agreement on value, ignoring confidence/reasoning. MISSING never agrees
  // with anything, itself included.
  bool same_value(const Prediction& o) const {
    if (is_missing() || o.is_missing()) return false;
    return kind == o.kind && target == o.target;
  }

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

inline json prediction_to_json(const Prediction& p) {
  json j{{"kind", p.kind == PredictionKind::TargetField ? "target_field"
                  : p.kind == PredictionKind::NotCovered ? "not_covered"
                                                         : "missing"}};
  if (p.kind == PredictionKind::TargetField) j["target"] = p.target;
  if (p.self_reported_confidence) j["self_reported_confidence"] = *p.self_reported_confidence;
  if (p.reasoning) j["reasoning"] = *p.reasoning;
  return j;
}

inline Prediction prediction_from_json(const json& j) {
  Prediction p;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "target_field") {
    p.kind = PredictionKind::TargetField;
    p.target = j.at("target").get<std::string>();
  } else if (kind == "not_covered") {
    p.kind = PredictionKind::NotCovered;
  } else if (kind == "missing") {
    p.kind = PredictionKind::Missing;
  } else {
    throw ParseError("unknown prediction kind '" + kind + "'");
  }
  if (j.contains("self_reported_confidence"))
    p.self_reported_confidence = j.at("self_reported_confidence").get<int>();
  if (j.contains("reasoning")) p.reasoning = j.at("reasoning").get<std::string>();
  return p;
}

// ---------------------------------------------------------------------------
// Mapping hypothesis
// ---------------------------------------------------------------------------

struct HypothesisEntry {
  Prediction modal;
  double confidence = 0.0;
  std::vector<Prediction> variants;  // length n, in variant order

  friend bool operator==(const HypothesisEntry&, const HypothesisEntry&) = default;
};

// The current mapping f: one entry per source field, keyed by field name.
struct MappingHypothesis {
  std::map<std::string, HypothesisEntry> entries;

  friend bool operator==(const MappingHypothesis&, const MappingHypothesis&) = default;
};

inline json hypothesis_to_json(const MappingHypothesis& h) {
  json entries = json::object();
  for (const auto& [field, e] : h.entries) {
    json variants = json::array();
    for (const auto& p : e.variants) variants.push_back(prediction_to_json(p));
    entries[field] = {{"modal", prediction_to_json(e.modal)},
                      {"confidence", e.confidence},
                      {"variants", std::move(variants)}};
  }
  return json{{"entries", std::move(entries)}};
}

inline MappingHypothesis hypothesis_from_json(const json& j) {
  MappingHypothesis h;
  try {
    for (const auto& [field, je] : j.at("entries").items()) {
      HypothesisEntry e;
      e.modal = prediction_from_json(je.at("modal"));
      e.confidence = je.at("confidence").get<double>();
      for (const auto& jp : je.at("variants")) e.variants.push_back(prediction_from_json(jp));
      h.entries.emplace(field, std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed hypothesis JSON: ") + e.what());
  }
  return h;
}

// ---------------------------------------------------------------------------
// Ground truth (evaluation only)
// ---------------------------------------------------------------------------

// Verified source -> target pairs. Values are target field names or the
// NOT_COVERED literal. Used exclusively in evaluation paths; run decisions
// never read it.
struct GroundTruth {
  std::map<std::string, std::string> pairs;

  bool empty() const { return pairs.empty(); }
  std::size_t size() const { return pairs.size(); }
};

inline constexpr const char* kGroundTruthHeader = "source_field,target_field";

inline GroundTruth load_ground_truth(const std::filesystem::path& path,
                                     const Schema& source, const Schema& target) {
  std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("ground truth " + path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kGroundTruthHeader)
    throw ParseError("ground truth " + path.string() + ": expected header '" +
                     std::string(kGroundTruthHeader) + "', got '" + line + "'");

  GroundTruth gt;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("ground truth line " + std::to_string(lineno) + ": missing comma");
    std::string src = trim(line.substr(0, comma));
    std::string tgt = trim(line.substr(comma + 1));
    if (!source.has_field(src))
      throw ValidationError("ground truth line " + std::to_string(lineno) +
                            ": unknown source field '" + src + "'");
    if (tgt != kNotCovered && !target.has_field(tgt))
      throw ValidationError("ground truth line " + std::to_string(lineno) +
                            ": unknown target field '" + tgt + "'");
    if (!gt.pairs.emplace(src, tgt).second)
      throw ValidationError("ground truth line " + std::to_string(lineno) +
                            ": duplicate source field '" + src + "'");
  }
  if (gt.pairs.empty())
    throw ParseError("ground truth " + path.string() + ": no data rows");
  return gt;
}

inline void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::string out = std::string(kGroundTruthHeader) + "\n";
  for (const auto& [src, tgt] : gt.pairs) out += src + "," + tgt + "\n";
  write_text_file(path, out);
}

}  // namespace schemamap
