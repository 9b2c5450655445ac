#pragma once

#include <array>
#include <string>
#include <string_view>

#include "schemamap/confidence.hpp"
#include "schemamap/evidence.hpp"
#include "schemamap/request.hpp"
#include "schemamap/util.hpp"

namespace schemamap {

// ---------------------------------------------------------------------------
// System prompt — fixed expert role, loaded once per run.
// ---------------------------------------------------------------------------

inline std::string build_system_prompt() {
  return
      "You are a cybersecurity data integration expert. You map third-party "
      "product and log schemas onto a documented common event schema so that "
      "events from different vendors can be correlated, searched and used for "
      "threat detection and compliance reporting.\n"
      "\n"
      "Follow a layered reasoning process for every source field:\n"
      "(1) identify core entities carried by the field, such as IP addresses, "
      "host names, user names, file names, hashes and ports;\n"
      "(2) narrow down candidate target fields using data flow direction and "
      "the context of the surrounding record;\n"
      "(3) make the final mapping decision based on semantic consistency "
      "between the source field and the chosen target field.\n"
      "\n"
      "Map each source field to exactly one target field. If no suitable "
      "target field exists, respond with NOT_COVERED. Do not guess: prefer "
      "NOT_COVERED over a mapping you cannot justify.\n";
}

// ---------------------------------------------------------------------------
// Response contract
// ---------------------------------------------------------------------------

// The exact envelope grammar is documented in the README; parse_response in
// backend.hpp is the reference reader for it.
inline std::string response_format_instructions() {
  return
      "Reply with exactly one <response> element. Inside it, emit one "
      "<decision> element per source field whose text is "
      "`source_field,target_field` (use NOT_COVERED as the target field when "
      "nothing applies). A decision may carry a nested <confidence> integer "
      "from 1 (unsure) to 5 (certain) and a nested <reasoning> note; a "
      "<confidence> or <reasoning> placed directly inside <response> applies "
      "to every decision without its own. Example:\n"
      "<response>\n"
      "<decision>src_port,dst_port<confidence>4</confidence>"
      "<reasoning>same transport-layer entity</reasoning></decision>\n"
      "</response>\n";
}

// ---------------------------------------------------------------------------
// User prompt — per mapping request.
// ---------------------------------------------------------------------------

// Task phrasings used by prompt variants. Content-equivalent by design; only
// the wording differs.
inline constexpr std::array<std::string_view, 10> kTaskPhrasings = {
    "Map each source field listed above to its best target field.",
    "For every source field above, choose the single target field with the same meaning.",
    "Determine which target schema field corresponds to each of the source fields.",
    "Assign each of the source fields to the matching field of the target schema.",
    "Decide, for each source field, which target field it normalizes to.",
    "Find the semantically equivalent target field for every source field shown.",
    "Work through the source fields one by one and select the correct target field.",
    "Produce the source-to-target mapping for all source fields listed.",
    "For each source field, identify the target schema field that carries the same data.",
    "Match every source field above against the target schema and pick its counterpart.",
};

inline std::string describe_field(const SchemaField& f) {
  std::string out = "- name: " + f.name + "\n";
  out += "  description: " + (f.description.empty() ? "(not documented)" : f.description) + "\n";
  out += "  type: " + (f.data_type.empty() ? "(unknown)" : f.data_type) + "\n";
  out += "  samples: " + (f.sample_values.empty() ? "(none)" : join(f.sample_values, ", ")) + "\n";
  return out;
}

inline std::string build_user_prompt(const MappingRequest& request) {
  std::string out;

  out += "FACTS\n";
  if (request.context_blocks.empty()) {
    out += "(none)\n";
  } else {
    for (const auto& block : request.context_blocks) {
      out += block;
      if (out.empty() || out.back() != '\n') out += '\n';
      out += '\n';
    }
  }

  out += "\nSOURCE FIELDS\n";
  for (const auto& f : request.source_fields) out += describe_field(f);

  out += "\nTARGET SCHEMA (" + request.target->name + ")\n";
  for (const auto& f : request.target->fields) {
    out += "- " + f.name;
    if (!f.description.empty()) out += ": " + f.description;
    if (!f.data_type.empty()) out += " [" + f.data_type + "]";
    out += "\n";
  }

  out += "\nTASK\n";
  out += kTaskPhrasings[static_cast<std::size_t>(request.variant_index) % kTaskPhrasings.size()];
  if (request.scope == TaskScope::SingleField)
    out += " Only the single source field above is in scope for this request.";
  out += "\n";

  out += "\nRESPONSE FORMAT\n";
  out += response_format_instructions();
  return out;
}

// ---------------------------------------------------------------------------
// Search prompt — conflict resolution only.
// ---------------------------------------------------------------------------

inline std::string build_search_prompt(const Conflict& conflict,
                                       const EvidenceContext& context) {
  std::string out = "A schema mapping conflict needs external evidence.\n\n";
  out += "Field: " + conflict.field + "\n";

  std::vector<std::string> candidates;
  bool had_missing = false;
  for (const auto& p : conflict.variant_predictions) {
    if (p.is_missing()) {
      had_missing = true;
      continue;
    }
    std::string key = p.value_key();
    bool seen = false;
    for (const auto& c : candidates) seen = seen || c == key;
    if (!seen) candidates.push_back(std::move(key));
  }
  out += "Disagreeing predictions: " + (candidates.empty() ? "(none parseable)" : join(candidates, ", ")) + "\n";
  if (had_missing) out += "At least one mapping attempt returned unparseable output.\n";

  out += "Known facts so far: " +
         std::string(context.size() == 0 ? "(none)" : std::to_string(context.size()) + " evidence blocks retained") +
         "\n\n";
  out += "Write ONE web search query string, on a single line with no quotes, "
         "that would retrieve an authoritative definition settling which "
         "candidate is correct for this field.\n";
  return out;
}

// ---------------------------------------------------------------------------
// Prompt variants
// ---------------------------------------------------------------------------

inline constexpr double kAnchorTemperature = 0.0;   // variant 0
inline constexpr double kSampledTemperature = 0.7;  // variants 1..n-1

// Variant 0 is the canonical request. Variant k > 0 shuffles the source
// field order with a seeded permutation, switches the task phrasing and
// raises the sampling temperature; the field set and all metadata are
// unchanged.
inline MappingRequest make_variant(const MappingRequest& base, int variant_index,
                                   std::uint64_t seed, int n_variants) {
  if (variant_index < 0 || variant_index >= n_variants)
    throw ValidationError("make_variant: variant index " + std::to_string(variant_index) +
                          " outside [0, " + std::to_string(n_variants) + ")");
  MappingRequest req = base;
  req.variant_index = variant_index;
  req.temperature = variant_index == 0 ? kAnchorTemperature : kSampledTemperature;
  if (variant_index > 0 && req.source_fields.size() > 1) {
    KeyedRng keyed{seed};
    SmallRng rng{keyed.bits("variant-shuffle", "", variant_index, base.iteration)};
    // Fisher-Yates, hand-rolled so the permutation is stable across platforms.
    for (std::size_t i = req.source_fields.size() - 1; i > 0; --i) {
      std::size_t j = rng.below(static_cast<std::uint32_t>(i + 1));
      std::swap(req.source_fields[i], req.source_fields[j]);
    }
  }
  return req;
}

}  // namespace schemamap
