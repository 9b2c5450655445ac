#pragma once

// Shared test fixtures: temp directories, small schemas and prediction
// shorthand.

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "schemamap/confidence.hpp"
#include "schemamap/schema.hpp"

namespace schemamap::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "schemamap_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Prediction tf(std::string target) { return Prediction::target_field(std::move(target)); }
inline Prediction nc() { return Prediction::not_covered(); }
inline Prediction miss() { return Prediction::missing(); }

inline Schema small_source() {
  Schema s;
  s.name = "vendor_small";
  s.side = Side::Source;
  s.fields = {SchemaField{"alpha", "first source field", "string", {"x"}},
              SchemaField{"beta", "second source field", "integer", {"1", "2"}},
              SchemaField{"gamma", "", "string", {}}};
  return s;
}

inline Schema small_target() {
  Schema s;
  s.name = "common_small";
  s.side = Side::Target;
  s.fields = {SchemaField{"core_a", "target a", "string", {"x"}},
              SchemaField{"core_b", "target b", "integer", {}},
              SchemaField{"core_c", "target c", "string", {}},
              SchemaField{"core_d", "target d", "string", {}}};
  return s;
}

inline MappingHypothesis hypothesis_of(
    const std::vector<std::pair<std::string, std::vector<Prediction>>>& entries) {
  MappingHypothesis h;
  for (const auto& [field, variants] : entries) {
    HypothesisEntry e;
    e.variants = variants;
    ConfidenceScore score = compute_confidence(variants);
    e.modal = score.modal;
    e.confidence = score.value;
    h.entries.emplace(field, std::move(e));
  }
  return h;
}

}  // namespace schemamap::testing
