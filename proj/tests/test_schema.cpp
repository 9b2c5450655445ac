#include <catch2/catch_amalgamated.hpp>

#include "schemamap/schema.hpp"
#include "support/helpers.hpp"

using namespace schemamap;
using namespace schemamap::testing;

namespace {

json field_json(const std::string& name) {
  return json{{"name", name},
              {"description", "desc of " + name},
              {"data_type", "string"},
              {"sample_values", {"a", "b"}}};
}

json schema_json(const std::string& name, const std::vector<std::string>& fields) {
  json jf = json::array();
  for (const auto& f : fields) jf.push_back(field_json(f));
  return json{{"name", name}, {"fields", jf}};
}

}  // namespace

TEST_CASE("load_schema accepts valid files and preserves field order", "[schema]") {
  TempDir dir;
  auto path = dir / "schema.json";
  write_text_file(path, schema_json("vendor", {"zeta", "alpha", "mid"}).dump());

  Schema s = load_schema(path, Side::Source);
  REQUIRE(s.name == "vendor");
  REQUIRE(s.side == Side::Source);
  REQUIRE(s.fields.size() == 3);
  CHECK(s.fields[0].name == "zeta");
  CHECK(s.fields[1].name == "alpha");
  CHECK(s.fields[2].name == "mid");
  CHECK(s.fields[0].description == "desc of zeta");
  CHECK(s.fields[0].sample_values == std::vector<std::string>{"a", "b"});
}

TEST_CASE("load_schema handles scale and minimal inputs", "[schema]") {
  TempDir dir;

  SECTION("195-field file loads with 195 fields") {
    std::vector<std::string> names;
    for (int i = 0; i < 195; ++i) names.push_back("field_" + std::to_string(i));
    auto path = dir / "big.json";
    write_text_file(path, schema_json("endpoint_vendor_full", names).dump());
    CHECK(load_schema(path, Side::Source).fields.size() == 195);
  }

  SECTION("single-field file") {
    auto path = dir / "one.json";
    write_text_file(path, schema_json("tiny", {"only"}).dump());
    CHECK(load_schema(path, Side::Target).fields.size() == 1);
  }
}

TEST_CASE("schema validation rejects exactly duplicates, empty names and zero fields",
          "[schema]") {
  TempDir dir;

  SECTION("duplicate field name") {
    auto path = dir / "dup.json";
    write_text_file(path, schema_json("v", {"a", "b", "a"}).dump());
    REQUIRE_THROWS_AS(load_schema(path, Side::Source), ValidationError);
    try {
      load_schema(path, Side::Source);
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
  }

  SECTION("empty field name") {
    auto path = dir / "empty_name.json";
    write_text_file(path, schema_json("v", {"a", ""}).dump());
    REQUIRE_THROWS_AS(load_schema(path, Side::Source), ValidationError);
  }

  SECTION("zero fields") {
    auto path = dir / "none.json";
    write_text_file(path, schema_json("v", {}).dump());
    REQUIRE_THROWS_AS(load_schema(path, Side::Source), ValidationError);
  }

  SECTION("empty description and samples are legal") {
    auto path = dir / "sparse.json";
    write_text_file(path,
                    json{{"name", "v"},
                         {"fields", {{{"name", "undocumented"}, {"description", ""},
                                      {"data_type", ""}, {"sample_values", json::array()}}}}}
                        .dump());
    Schema s = load_schema(path, Side::Source);
    CHECK(s.fields[0].description.empty());
    CHECK(s.fields[0].sample_values.empty());
  }
}

TEST_CASE("load_schema error paths", "[schema]") {
  TempDir dir;
  CHECK_THROWS_AS(load_schema(dir / "missing.json", Side::Source), IoError);

  auto path = dir / "garbage.json";
  write_text_file(path, "not json at all {{{");
  CHECK_THROWS_AS(load_schema(path, Side::Source), ParseError);
}

TEST_CASE("save then load is identity", "[schema]") {
  TempDir dir;
  Schema s = small_source();
  auto path = dir / "roundtrip.json";
  save_schema(s, path);
  Schema loaded = load_schema(path, Side::Source);
  CHECK(loaded == s);
  CHECK(schema_to_json(loaded) == schema_to_json(s));
}

TEST_CASE("schema fingerprint tracks field names", "[schema]") {
  Schema a = small_source();
  Schema b = small_source();
  CHECK(a.fingerprint() == b.fingerprint());
  b.fields[1].name = "renamed";
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("ground truth loading", "[schema]") {
  TempDir dir;
  Schema source = small_source();
  Schema target = small_target();

  SECTION("valid file with NOT_COVERED row") {
    auto path = dir / "truth.csv";
    write_text_file(path,
                    "source_field,target_field\nalpha,core_a\nbeta,core_b\ngamma,NOT_COVERED\n");
    GroundTruth gt = load_ground_truth(path, source, target);
    REQUIRE(gt.size() == 3);
    CHECK(gt.pairs.at("gamma") == kNotCovered);
  }

  SECTION("66-row file") {
    Schema big_source;
    big_source.name = "s";
    Schema big_target;
    big_target.name = "t";
    std::string csv = "source_field,target_field\n";
    for (int i = 0; i < 66; ++i) {
      big_source.fields.push_back(SchemaField{"s" + std::to_string(i), "", "", {}});
      big_target.fields.push_back(SchemaField{"t" + std::to_string(i), "", "", {}});
      csv += "s" + std::to_string(i) + ",t" + std::to_string(i) + "\n";
    }
    auto path = dir / "big_truth.csv";
    write_text_file(path, csv);
    CHECK(load_ground_truth(path, big_source, big_target).size() == 66);
  }

  SECTION("unknown source field is named in the error") {
    auto path = dir / "bad_src.csv";
    write_text_file(path, "source_field,target_field\nnot_a_field,core_a\n");
    try {
      load_ground_truth(path, source, target);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("not_a_field") != std::string::npos);
    }
  }

  SECTION("unknown target field rejected") {
    auto path = dir / "bad_tgt.csv";
    write_text_file(path, "source_field,target_field\nalpha,nope\n");
    CHECK_THROWS_AS(load_ground_truth(path, source, target), ValidationError);
  }

  SECTION("empty file rejected") {
    auto path = dir / "empty.csv";
    write_text_file(path, "");
    CHECK_THROWS_AS(load_ground_truth(path, source, target), ParseError);
    write_text_file(path, "source_field,target_field\n");
    CHECK_THROWS_AS(load_ground_truth(path, source, target), ParseError);
  }

  SECTION("duplicate source row rejected") {
    auto path = dir / "dup.csv";
    write_text_file(path, "source_field,target_field\nalpha,core_a\nalpha,core_b\n");
    CHECK_THROWS_AS(load_ground_truth(path, source, target), ValidationError);
  }

  SECTION("save then load round-trips") {
    GroundTruth gt;
    gt.pairs = {{"alpha", "core_a"}, {"gamma", kNotCovered}};
    auto path = dir / "rt.csv";
    save_ground_truth(gt, path);
    GroundTruth loaded = load_ground_truth(path, source, target);
    CHECK(loaded.pairs == gt.pairs);
  }
}

TEST_CASE("prediction value identity and JSON round-trip", "[schema]") {
  Prediction p = Prediction::target_field("core_a", 4, "looks right");
  CHECK(p.value_key() == "core_a");
  CHECK(nc().value_key() == "NOT_COVERED");
  CHECK(miss().value_key() == "MISSING");

  CHECK(p.same_value(tf("core_a")));
  CHECK_FALSE(p.same_value(tf("core_b")));
  CHECK_FALSE(miss().same_value(miss()));  // MISSING never agrees, even with itself
  CHECK(nc().same_value(nc()));

  for (const Prediction& q : {p, nc(), miss(), Prediction::not_covered(2, "no match")}) {
    CHECK(prediction_from_json(prediction_to_json(q)) == q);
  }
}

TEST_CASE("hypothesis JSON round-trip", "[schema]") {
  MappingHypothesis h = hypothesis_of({
      {"alpha", {tf("core_a"), tf("core_a"), tf("core_b")}},
      {"beta", {nc(), nc(), nc()}},
      {"gamma", {tf("core_c"), miss(), tf("core_c")}},
  });
  MappingHypothesis back = hypothesis_from_json(hypothesis_to_json(h));
  CHECK(back == h);
}
