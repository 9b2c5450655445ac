// Acceptance suite: exercises every acceptance criterion at its stated
// tolerance and prints one pass/fail line per criterion. Exit code is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "schemamap/schemamap.hpp"
#include "support/brute_force_confidence.hpp"

using namespace schemamap;
namespace sim = schemamap::sim;

namespace {

Prediction tf(std::string t) { return Prediction::target_field(std::move(t)); }

char scratch_template[] = "/tmp/schemamap_acceptance_XXXXXX";
std::filesystem::path scratch_dir;

// Standard scenario: 66 ground-truth pairs, 20 ambiguous fields, planted
// corpus with decoys.
sim::Scenario standard_scenario() {
  sim::ScenarioParams params;
  params.seed = 7;
  return sim::build_scenario(params);
}

const std::vector<std::uint64_t> kRunSeeds = {101, 102, 103, 104, 105};

struct SimRun {
  std::vector<IterationRecord> records;
  MappingHypothesis hypothesis;
  std::string ledger_bytes;
};

SimRun run_standard(const std::shared_ptr<const sim::Scenario>& scenario, std::uint64_t seed,
                    int alpha, bool with_truth, std::shared_ptr<SearchProvider> provider,
                    int checkpoint_at = -1) {
  RunConfig cfg;
  cfg.alpha = alpha;
  cfg.variants = 3;
  cfg.seed = seed;
  cfg.stop_on_no_conflicts = false;
  cfg.deterministic_time = true;

  static int run_counter = 0;
  auto ledger_path = scratch_dir / ("ledger_" + std::to_string(run_counter++) + ".jsonl");
  Ledger ledger;
  ledger.open(ledger_path, false, true);

  if (!provider) provider = std::make_shared<CorpusSearchProvider>(scenario->corpus_index());

  SimRun out;
  auto make_agent = [&](int a) {
    RunConfig c = cfg;
    c.alpha = a;
    Agent agent(c, std::make_shared<sim::OracleSimBackend>(scenario, seed), provider,
                scenario->source, scenario->target);
    if (with_truth) agent.set_truth(scenario->truth);
    return agent;
  };

  if (checkpoint_at > 0) {
    Agent first = make_agent(checkpoint_at);
    first.set_ledger(&ledger);
    nlohmann::json resume_point;
    first.set_checkpoint_sink([&](const nlohmann::json& j) { resume_point = j; });
    first.set_record_sink([&](const IterationRecord& r) { out.records.push_back(r); });
    first.run();

    Agent second = make_agent(alpha);
    second.set_ledger(&ledger);
    second.set_record_sink([&](const IterationRecord& r) { out.records.push_back(r); });
    RunResult result = second.resume(resume_point);
    out.hypothesis = result.hypothesis;
  } else {
    Agent agent = make_agent(alpha);
    agent.set_ledger(&ledger);
    RunResult result = agent.run();
    out.records = result.records;
    out.hypothesis = result.hypothesis;
  }
  out.ledger_bytes = read_text_file(ledger_path);
  return out;
}

std::string fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

// Each criterion returns std::nullopt on success or a failure detail.
using Detail = std::optional<std::string>;

Detail criterion_confidence_formula() {
  struct Case {
    std::vector<Prediction> preds;
    double expected;
    std::string modal;
  };
  std::vector<Case> cases = {
      {{tf("RemotePort"), tf("RemotePort"), tf("LocalPort")}, 2.0 / 3.0, "RemotePort"},
      {{tf("a"), tf("a"), tf("a")}, 1.0, "a"},
      {{tf("a"), Prediction::missing(), Prediction::missing()}, 0.5, "a"},
      {{Prediction::not_covered(), Prediction::not_covered(), Prediction::not_covered()},
       1.0, "NOT_COVERED"},
      {{Prediction::missing(), Prediction::missing(), Prediction::missing()}, 0.0, "MISSING"},
  };
  for (const auto& c : cases) {
    ConfidenceScore s = compute_confidence(c.preds);
    if (std::abs(s.value - c.expected) > 1e-9)
      return fmt("expected %.12f got %.12f", c.expected, s.value);
    if (s.modal.value_key() != c.modal)
      return "wrong modal prediction: " + s.modal.value_key() + " != " + c.modal;
  }
  return std::nullopt;
}

Detail criterion_oracle_equivalence() {
  // All prediction sequences of length 1..5 over 4 target names plus
  // NOT_COVERED and MISSING: 6 + 36 + ... + 7776 = 9330 cases.
  const std::vector<Prediction> alphabet = {tf("t_a"), tf("t_b"), tf("t_c"), tf("t_d"),
                                            Prediction::not_covered(), Prediction::missing()};
  long cases = 0;
  for (int len = 1; len <= 5; ++len) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(len), 0);
    while (true) {
      std::vector<Prediction> preds;
      preds.reserve(idx.size());
      for (std::size_t i : idx) preds.push_back(alphabet[i]);
      ConfidenceScore lib = compute_confidence(preds);
      testing::BruteForceScore oracle = testing::brute_force_confidence(preds);
      if (std::abs(lib.value - oracle.value) > 1e-12 ||
          lib.modal.value_key() != oracle.modal_key) {
        std::string seq;
        for (const auto& p : preds) seq += p.value_key() + " ";
        return "mismatch on [" + seq + "]: " + fmt("%.12f vs %.12f", lib.value, oracle.value);
      }
      ++cases;
      int pos = len - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == alphabet.size() - 1) {
        idx[static_cast<std::size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
    }
  }
  if (cases != 9330) return "enumerated " + std::to_string(cases) + " cases, expected 9330";
  return std::nullopt;
}

Detail criterion_strict_improvement() {
  std::mt19937_64 rng(777);
  EvidenceContext ctx(0);
  std::set<std::uint64_t> accepted_keys;
  std::vector<std::string> rejected_markers;
  for (int i = 0; i < 10000; ++i) {
    EvidenceTuple t;
    t.iteration = i;
    t.field = "f" + std::to_string(rng() % 16);
    t.query = "q" + std::to_string(rng() % 8);
    t.excerpts = {"e" + std::to_string(rng() % 4)};
    t.conflict_summary = "c";
    t.resolution_plan = "marker#" + std::to_string(i) + "#";
    t.confidence_before = static_cast<double>(rng() % 101) / 100.0;
    t.confidence_after = static_cast<double>(rng() % 101) / 100.0;

    bool expect = t.confidence_after > t.confidence_before &&
                  accepted_keys.count(t.dedupe_key()) == 0;
    UpdateDecision d = ctx.update(t);
    if ((d == UpdateDecision::Accepted) != expect)
      return "decision mismatch at tuple " + std::to_string(i);
    if (t.accepted != expect) return "accepted flag mismatch at tuple " + std::to_string(i);
    if (expect)
      accepted_keys.insert(t.dedupe_key());
    else
      rejected_markers.push_back(t.resolution_plan);
  }
  std::string rendered = join(ctx.render(), "\n");
  for (const auto& m : rejected_markers)
    if (rendered.find(m) != std::string::npos)
      return "rejected tuple leaked into rendered context: " + m;
  return std::nullopt;
}

Detail criterion_confidence_only_decisions() {
  auto scenario = std::make_shared<const sim::Scenario>(standard_scenario());
  SimRun with_truth = run_standard(scenario, 101, 50, true, nullptr);
  SimRun without = run_standard(scenario, 101, 50, false, nullptr);
  if (with_truth.ledger_bytes != without.ledger_bytes)
    return std::string("ledgers differ between truth/no-truth runs");
  if (hypothesis_to_json(with_truth.hypothesis).dump() !=
      hypothesis_to_json(without.hypothesis).dump())
    return std::string("final hypotheses differ");
  return std::nullopt;
}

Detail criterion_deterministic_replay() {
  auto scenario = std::make_shared<const sim::Scenario>(standard_scenario());
  SimRun a = run_standard(scenario, 101, 100, true, nullptr);
  SimRun b = run_standard(scenario, 101, 100, true, nullptr);
  SimRun resumed = run_standard(scenario, 101, 100, true, nullptr, /*checkpoint_at=*/50);
  if (a.ledger_bytes != b.ledger_bytes) return std::string("identical runs diverged");
  if (a.ledger_bytes != resumed.ledger_bytes)
    return std::string("checkpoint/resume run diverged from the uninterrupted run");
  if (hypothesis_to_json(a.hypothesis).dump() != hypothesis_to_json(resumed.hypothesis).dump())
    return std::string("resumed final hypothesis differs");
  return std::nullopt;
}

Detail criterion_trend_reproduction() {
  auto scenario = std::make_shared<const sim::Scenario>(standard_scenario());
  double reduction_sum = 0.0;
  for (std::uint64_t seed : kRunSeeds) {
    SimRun run = run_standard(scenario, seed, 50, true, nullptr);
    const IterationRecord& first = run.records.front();
    const IterationRecord& last = run.records.back();
    double acc1 = *first.accuracy;
    double accN = *last.accuracy;
    if (acc1 > 0.80)
      return fmt("seed %g iteration-1 accuracy %.4f > 0.80", static_cast<double>(seed), acc1);
    if (accN < 0.90)
      return fmt("seed %g final accuracy %.4f < 0.90", static_cast<double>(seed), accN);
    double initial = static_cast<double>(first.conflict_fields.size());
    double final_count = static_cast<double>(last.conflict_fields.size());
    if (initial <= 0) return std::string("no initial conflicts");
    reduction_sum += (initial - final_count) / initial;
  }
  double mean_reduction = reduction_sum / static_cast<double>(kRunSeeds.size());
  if (mean_reduction < 0.80)
    return fmt("mean flagged-field reduction %.3f < 0.80", mean_reduction);
  return std::nullopt;
}

Detail criterion_calibration_trend() {
  sim::Scenario scenario = standard_scenario();
  auto rows = sim::run_calibration_experiment(scenario, {3, 10}, 6, kRunSeeds);
  double gap3 = rows[0].mean_abs_gap;
  double gap10 = rows[1].mean_abs_gap;
  if (!(gap10 < gap3))
    return fmt("mean |confidence-accuracy| at n=10 (%.4f) not below n=3 (%.4f)", gap10, gap3);
  return std::nullopt;
}

Detail criterion_null_provider_ablation() {
  auto scenario = std::make_shared<const sim::Scenario>(standard_scenario());
  SimRun run = run_standard(scenario, 101, 50, true, std::make_shared<NullSearchProvider>());
  int accepted = 0;
  for (const auto& r : run.records) accepted += r.tuples_accepted;
  if (accepted != 0) return std::to_string(accepted) + " tuples accepted with null provider";
  double acc1 = *run.records.front().accuracy;
  double accN = *run.records.back().accuracy;
  if (std::abs(accN - acc1) > 0.02)
    return fmt("final accuracy %.4f drifted more than 2 pts from iteration-1 %.4f", accN, acc1);
  return std::nullopt;
}

Detail criterion_parser_robustness() {
  MappingRequest req;
  req.scope = TaskScope::FullSchema;
  Schema target;
  target.name = "t";
  target.side = Side::Target;
  for (int i = 0; i < 6; ++i)
    target.fields.push_back(SchemaField{"tgt_" + std::to_string(i), "", "", {}});
  req.target = std::make_shared<const Schema>(target);
  for (int i = 0; i < 4; ++i)
    req.source_fields.push_back(SchemaField{"src_" + std::to_string(i), "", "", {}});

  std::mt19937_64 rng(123);
  std::string canonical = render_response({{"src_0", Prediction::target_field("tgt_1", 4)},
                                           {"src_1", Prediction::not_covered(3)},
                                           {"src_2", Prediction::target_field("tgt_5")}});
  for (int i = 0; i < 100000; ++i) {
    std::string input;
    switch (i % 3) {
      case 0: {  // raw bytes
        std::size_t len = rng() % 256;
        for (std::size_t k = 0; k < len; ++k) input.push_back(static_cast<char>(rng() % 256));
        break;
      }
      case 1: {  // printable soup with tag fragments
        static const char* bits[] = {"<response>", "</response>", "<decision>", "</decision>",
                                     "<confidence>", "</confidence>", "src_0", ",", "tgt_1",
                                     " ", "NOT_COVERED", "4", "<reasoning>", "xx"};
        std::size_t n = rng() % 24;
        for (std::size_t k = 0; k < n; ++k) input += bits[rng() % std::size(bits)];
        break;
      }
      default: {  // mutated canonical envelope
        input = canonical;
        std::size_t edits = 1 + rng() % 6;
        for (std::size_t k = 0; k < edits && !input.empty(); ++k) {
          std::size_t pos = rng() % input.size();
          switch (rng() % 3) {
            case 0: input[pos] = static_cast<char>(rng() % 256); break;
            case 1: input.erase(pos, 1 + rng() % 4); break;
            default: input.insert(pos, 1, static_cast<char>(rng() % 256)); break;
          }
        }
        break;
      }
    }
    BackendResponse r = parse_response(input, req);
    if (r.decisions.size() != req.source_fields.size())
      return std::string("parser did not cover every requested field");
  }

  // Round-trip identity on well-formed responses.
  const std::vector<std::string> targets = {"tgt_0", "tgt_1", "tgt_2", "tgt_3", "tgt_4", "tgt_5"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::pair<std::string, Prediction>> decisions;
    for (const auto& f : req.source_fields) {
      Prediction p = rng() % 4 == 0 ? Prediction::not_covered()
                                    : Prediction::target_field(targets[rng() % targets.size()]);
      if (rng() % 2) p.self_reported_confidence = 1 + static_cast<int>(rng() % 5);
      if (rng() % 3 == 0) p.reasoning = "note " + std::to_string(rng() % 50);
      decisions.emplace_back(f.name, std::move(p));
    }
    BackendResponse parsed = parse_response(render_response(decisions), req);
    for (const auto& [field, pred] : decisions) {
      const Prediction* got = parsed.find(field);
      if (!got || !(*got == pred))
        return "round-trip mismatch on field " + field + " at trial " + std::to_string(trial);
    }
  }
  return std::nullopt;
}

Detail criterion_accuracy_arithmetic() {
  auto accuracy_for = [](int total, int correct) {
    MappingHypothesis h;
    GroundTruth gt;
    for (int i = 0; i < total; ++i) {
      std::string src = "s" + std::to_string(i);
      std::string tgt = "t" + std::to_string(i);
      gt.pairs[src] = tgt;
      std::string predicted = i < correct ? tgt : "wrong";
      h.entries.emplace(src, HypothesisEntry{tf(predicted), 1.0, {}});
    }
    return evaluate_accuracy(h, gt).accuracy * 100.0;
  };
  double a62 = accuracy_for(66, 62);
  if (std::abs(a62 - 93.94) > 0.01) return fmt("62/66 -> %.4f%%, expected 93.94", a62);
  double a48 = accuracy_for(66, 48);
  if (std::abs(a48 - 72.73) > 0.01) return fmt("48/66 -> %.4f%%, expected 72.73", a48);
  return std::nullopt;
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Detail()> body;
};

}  // namespace

int main() {
  if (!mkdtemp(scratch_template)) {
    std::fprintf(stderr, "cannot create scratch directory\n");
    return 1;
  }
  scratch_dir = scratch_template;

  std::vector<Criterion> criteria = {
      {1, "confidence formula exactness", 1.0, criterion_confidence_formula},
      {2, "oracle equivalence (exhaustive multisets <= 5)", 5.0, criterion_oracle_equivalence},
      {3, "strict-improvement retention property", 5.0, criterion_strict_improvement},
      {4, "confidence-only decisions (truth vs no truth)", 30.0,
       criterion_confidence_only_decisions},
      {5, "deterministic replay incl. checkpoint/resume", 60.0, criterion_deterministic_replay},
      {6, "accuracy/conflict trend reproduction (5 seeds)", 120.0, criterion_trend_reproduction},
      {7, "calibration trend: n=10 gap below n=3 gap", 240.0, criterion_calibration_trend},
      {8, "null-provider ablation", 30.0, criterion_null_provider_ablation},
      {9, "parser robustness (100k fuzz + round-trip)", 30.0, criterion_parser_robustness},
      {10, "accuracy arithmetic (62/66, 48/66)", 10.0, criterion_accuracy_arithmetic},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Detail detail;
    try {
      detail = c.body();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool ok = !detail.has_value();
    if (ok && seconds > c.limit_seconds) {
      ok = false;
      detail = fmt("runtime %.2fs exceeds the %.0fs budget", seconds, c.limit_seconds);
    }
    std::printf("%s criterion %2d: %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", c.id,
                c.name.c_str(), seconds, ok ? "" : " -- ", ok ? "" : detail->c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }

  std::error_code ec;
  std::filesystem::remove_all(scratch_dir, ec);

  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
