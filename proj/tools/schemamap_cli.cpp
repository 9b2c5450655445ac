// schemamap command-line interface: run the mapping agent, evaluate runs
// against ground truth, emit review reports, build/run simulated scenarios
// and run the calibration experiment.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "schemamap/schemamap.hpp"

namespace fs = std::filesystem;
using namespace schemamap;

namespace {

std::vector<IterationRecord> load_records_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open records file: " + path.string());
  std::vector<IterationRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("records file " + path.string() + " line " + std::to_string(lineno) +
                       ": " + e.what());
    }
  }
  return records;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& spec, std::uint64_t base,
                                           int count) {
  std::vector<std::uint64_t> seeds;
  if (!spec.empty()) {
    std::istringstream in(spec);
    std::string item;
    while (std::getline(in, item, ','))
      if (!trim(item).empty()) seeds.push_back(std::stoull(trim(item)));
  } else {
    for (int i = 0; i < count; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

std::vector<int> parse_int_list(const std::string& spec) {
  std::vector<int> values;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) values.push_back(std::stoi(trim(item)));
  return values;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunFlags {
  std::string source, target, truth, out_dir, resume;
  std::string backend = "oracle-sim";
  std::string search = "corpus";
  std::string corpus_dir, scenario, script;
  int iterations = 100;
  int variants = 3;
  double threshold = 1.0;
  std::uint64_t seed = 1;
  std::size_t context_cap = 50;
  int excerpts = 3;
  double timeout = 60.0;
  bool deterministic = false;
  bool immediate_updates = false;
  bool full_eval = false;
  bool no_early_stop = false;
};

struct RunInputs {
  RunConfig cfg;
  Schema source;
  Schema target;
  std::optional<GroundTruth> truth;
  std::shared_ptr<const sim::Scenario> scenario;
};

std::shared_ptr<MapperBackend> make_backend(const RunFlags& f, const RunInputs& in) {
  if (f.backend == "http") {
    HttpBackendOptions opt = HttpBackendOptions::from_env();
    opt.timeout_seconds = f.timeout;
    return std::make_shared<HttpChatBackend>(opt);
  }
  if (f.backend == "mock") {
    if (f.script.empty()) throw ConfigError("--backend mock requires --script");
    return ScriptedMockBackend::from_jsonl(f.script);
  }
  if (f.backend == "oracle-sim") {
    if (!in.scenario) throw ConfigError("--backend oracle-sim requires --scenario");
    return std::make_shared<sim::OracleSimBackend>(in.scenario, in.cfg.seed);
  }
  throw ConfigError("unknown backend '" + f.backend + "' (expected http, mock or oracle-sim)");
}

std::shared_ptr<SearchProvider> make_provider(const RunFlags& f, const RunInputs& in) {
  if (f.search == "web") {
    WebSearchProvider::Options opt = WebSearchProvider::Options::from_env();
    opt.timeout_seconds = f.timeout;
    return std::make_shared<WebSearchProvider>(opt);
  }
  if (f.search == "corpus") {
    if (!f.corpus_dir.empty())
      return std::make_shared<CorpusSearchProvider>(CorpusIndex::from_directory(f.corpus_dir));
    if (in.scenario) return std::make_shared<CorpusSearchProvider>(in.scenario->corpus_index());
    throw ConfigError("--search corpus requires --corpus-dir (or a scenario)");
  }
  if (f.search == "null") return std::make_shared<NullSearchProvider>();
  throw ConfigError("unknown search provider '" + f.search + "' (expected web, corpus or null)");
}

RunInputs prepare_inputs(const RunFlags& f) {
  RunInputs in;
  in.cfg.alpha = f.iterations;
  in.cfg.variants = f.variants;
  in.cfg.review_threshold = f.threshold;
  in.cfg.context_cap = f.context_cap;
  in.cfg.seed = f.seed;
  in.cfg.excerpts_per_query = f.excerpts;
  in.cfg.deterministic_time = f.deterministic;
  in.cfg.immediate_context_updates = f.immediate_updates;
  in.cfg.full_schema_evaluation = f.full_eval;
  in.cfg.stop_on_no_conflicts = !f.no_early_stop;

  if (!f.scenario.empty())
    in.scenario = std::make_shared<const sim::Scenario>(sim::load_scenario(f.scenario));

  if (!f.source.empty()) {
    in.source = load_schema(f.source, Side::Source);
  } else if (in.scenario) {
    in.source = in.scenario->source;
  } else {
    throw ConfigError("missing --source (or --scenario)");
  }
  if (!f.target.empty()) {
    in.target = load_schema(f.target, Side::Target);
  } else if (in.scenario) {
    in.target = in.scenario->target;
  } else {
    throw ConfigError("missing --target (or --scenario)");
  }
  if (!f.truth.empty()) in.truth = load_ground_truth(f.truth, in.source, in.target);
  return in;
}

int execute_run(const RunFlags& f, RunInputs in) {
  if (f.out_dir.empty()) throw ConfigError("missing --out-dir");
  fs::path out(f.out_dir);
  fs::create_directories(out);

  json checkpoint;
  const bool resuming = !f.resume.empty();
  if (resuming) {
    try {
      checkpoint = json::parse(read_text_file(f.resume));
    } catch (const json::exception& e) {
      throw CheckpointError("corrupt checkpoint " + f.resume + ": " + e.what());
    }
    // Resume inherits the run identity from the checkpoint.
    in.cfg.seed = checkpoint.value("seed", in.cfg.seed);
    in.cfg.variants = checkpoint.value("variants", in.cfg.variants);
    in.cfg.context_cap = checkpoint.value("context_cap", in.cfg.context_cap);
  }

  save_schema(in.source, out / "source_schema.json");
  save_schema(in.target, out / "target_schema.json");

  auto backend = make_backend(f, in);
  auto provider = make_provider(f, in);

  Ledger ledger;
  ledger.open(out / "ledger.jsonl", resuming, in.cfg.deterministic_time);
  std::ofstream records_out(out / "records.jsonl",
                            resuming ? (std::ios::binary | std::ios::app)
                                     : (std::ios::binary | std::ios::trunc));
  if (!records_out) throw IoError("cannot open records file in " + out.string());

  Agent agent(in.cfg, backend, provider, in.source, in.target);
  agent.set_truth(in.truth);
  agent.set_ledger(&ledger);
  agent.set_checkpoint_sink([&](const json& ckpt) {
    atomic_write_file(out / "checkpoint.json", ckpt.dump(2) + "\n");
  });
  agent.set_record_sink([&](const IterationRecord& rec) {
    records_out << record_to_json(rec).dump() << '\n';
    records_out.flush();
  });

  try {
    RunResult result = resuming ? agent.resume(checkpoint) : agent.run();
    write_text_file(out / "hypothesis.json", hypothesis_to_json(result.hypothesis).dump(2) + "\n");
  } catch (const RunAborted& e) {
    std::cerr << "run aborted: " << e.what() << "\n"
              << "checkpoint retained at " << (out / "checkpoint.json").string() << "\n";
    return 2;
  }

  std::vector<IterationRecord> records = load_records_file(out / "records.jsonl");
  RunSummary summary = summarize(records);
  write_text_file(out / "run_summary.json", summary_to_json(summary).dump(2) + "\n");

  std::cout << "run complete: " << summary.iterations << " iterations, conflicts "
            << summary.initial_conflicts << " -> " << summary.final_conflicts
            << ", tuples accepted " << summary.tuples_accepted << ", rejected "
            << summary.tuples_rejected << "\n";
  if (summary.final_accuracy)
    std::cout << "final accuracy: " << *summary.final_accuracy * 100.0 << "%\n";
  std::cout << "artifacts in " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int do_evaluate(const std::string& run_dir, const std::string& truth_path) {
  fs::path dir(run_dir);
  Schema source = load_schema(dir / "source_schema.json", Side::Source);
  Schema target = load_schema(dir / "target_schema.json", Side::Target);
  GroundTruth truth = load_ground_truth(truth_path, source, target);

  std::vector<IterationRecord> records = load_records_file(dir / "records.jsonl");
  if (records.empty()) throw ValidationError("run has no recorded iterations");

  std::string csv = "iteration,accuracy,mean_confidence\n";
  for (const auto& rec : records) {
    int correct = 0;
    for (const auto& [field, expected] : truth.pairs) {
      auto it = rec.per_field.find(field);
      if (it == rec.per_field.end())
        throw ValidationError("run does not cover ground-truth field '" + field +
                              "' (schema/run mismatch)");
      if (it->second.prediction == expected) ++correct;
    }
    double accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", rec.iteration, accuracy,
                  rec.mean_confidence);
    csv += buf;
  }
  write_text_file(dir / "accuracy_series.csv", csv);

  MappingHypothesis hypothesis;
  try {
    hypothesis = hypothesis_from_json(json::parse(read_text_file(dir / "hypothesis.json")));
  } catch (const json::exception& e) {
    throw ParseError("hypothesis.json: " + std::string(e.what()));
  }
  AccuracyReport report = evaluate_accuracy(hypothesis, truth);

  json per_field = json::object();
  for (const auto& [field, outcome] : report.per_field)
    per_field[field] = {{"predicted", outcome.predicted},
                        {"expected", outcome.expected},
                        {"correct", outcome.correct}};
  json out{{"correct", report.correct},
           {"total", report.total},
           {"accuracy", report.accuracy},
           {"per_field", std::move(per_field)}};
  write_text_file(dir / "accuracy_report.json", out.dump(2) + "\n");

  char line[128];
  std::snprintf(line, sizeof(line), "final accuracy: %.2f%% (%d/%d)\n",
                report.accuracy * 100.0, report.correct, report.total);
  std::cout << line;
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int do_report(const std::string& run_dir, double threshold) {
  fs::path dir(run_dir);
  std::vector<IterationRecord> records = load_records_file(dir / "records.jsonl");
  std::vector<LedgerEntry> ledger = load_ledger(dir / "ledger.jsonl");
  MappingHypothesis hypothesis;
  try {
    hypothesis = hypothesis_from_json(json::parse(read_text_file(dir / "hypothesis.json")));
  } catch (const json::exception& e) {
    throw ParseError("hypothesis.json: " + std::string(e.what()));
  }

  ReviewReport report = build_report(hypothesis, records, ledger, threshold);
  write_text_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
  std::string text = render_report_text(report);
  write_text_file(dir / "report.txt", text);
  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::string out_dir, spec;
  sim::ScenarioParams params;
  bool run = false;
  bool no_truth = false;
  bool run_seed_set = false;
  RunFlags run_flags;
};

int do_simulate(SimulateFlags& f) {
  if (f.out_dir.empty()) throw ConfigError("missing --out-dir");
  sim::ScenarioParams params = f.params;
  if (!f.spec.empty()) {
    try {
      params = sim::params_from_json(json::parse(read_text_file(f.spec)));
    } catch (const json::exception& e) {
      throw ParseError("scenario spec " + f.spec + ": " + e.what());
    }
  }
  sim::Scenario scenario = sim::build_scenario(params);

  fs::path out(f.out_dir);
  fs::create_directories(out);
  write_text_file(out / "scenario.json", sim::scenario_to_json(scenario).dump(2) + "\n");
  save_schema(scenario.source, out / "source_schema.json");
  save_schema(scenario.target, out / "target_schema.json");
  save_ground_truth(scenario.truth, out / "ground_truth.csv");
  scenario.write_corpus(out / "corpus");
  std::cout << "scenario written to " << out.string() << " (" << scenario.source.fields.size()
            << " source fields, " << scenario.truth.size() << " ground-truth pairs, "
            << scenario.corpus.size() << " corpus documents)\n";

  if (!f.run) return 0;

  RunInputs in;
  in.scenario = std::make_shared<const sim::Scenario>(std::move(scenario));
  in.source = in.scenario->source;
  in.target = in.scenario->target;
  if (!f.no_truth) in.truth = in.scenario->truth;

  RunFlags rf = f.run_flags;
  rf.backend = "oracle-sim";
  if (rf.search != "null") rf.search = "corpus";
  rf.out_dir = (out / "run").string();
  if (!f.run_seed_set) rf.seed = params.seed;  // default: run seed = scenario seed

  in.cfg.alpha = rf.iterations;
  in.cfg.variants = rf.variants;
  in.cfg.review_threshold = rf.threshold;
  in.cfg.context_cap = rf.context_cap;
  in.cfg.seed = rf.seed;
  in.cfg.excerpts_per_query = rf.excerpts;
  in.cfg.deterministic_time = rf.deterministic;
  in.cfg.stop_on_no_conflicts = !rf.no_early_stop;
  return execute_run(rf, std::move(in));
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateFlags {
  std::string scenario, out_dir;
  std::string n_list = "3,10";
  std::string seed_list;
  int seeds = 5;
  std::uint64_t base_seed = 101;
  int alpha = 6;
  sim::ScenarioParams params;
};

int do_calibrate(const CalibrateFlags& f) {
  sim::Scenario scenario =
      f.scenario.empty() ? sim::build_scenario(f.params) : sim::load_scenario(f.scenario);

  std::vector<int> n_values = parse_int_list(f.n_list);
  if (n_values.empty()) throw ConfigError("--n must list at least one variant count");
  std::vector<std::uint64_t> seeds = parse_seed_list(f.seed_list, f.base_seed, f.seeds);

  auto rows = sim::run_calibration_experiment(scenario, n_values, f.alpha, seeds);
  std::string csv = sim::calibration_csv(rows);
  if (!f.out_dir.empty()) {
    fs::create_directories(f.out_dir);
    write_text_file(fs::path(f.out_dir) / "calibration.csv", csv);
  }
  std::cout << csv;
  return 0;
}

void add_run_options(CLI::App* cmd, RunFlags& f, bool resumable) {
  cmd->add_option("--source", f.source, "Source schema JSON file");
  cmd->add_option("--target", f.target, "Target schema JSON file");
  cmd->add_option("--truth", f.truth, "Ground-truth CSV (evaluation only)");
  cmd->add_option("--iterations", f.iterations, "Iteration limit (alpha)");
  cmd->add_option("--variants", f.variants, "Prompt variants per field (n)");
  cmd->add_option("--threshold", f.threshold, "Review threshold (tau)");
  cmd->add_option("--backend", f.backend, "Mapping backend: http, mock or oracle-sim");
  cmd->add_option("--search", f.search, "Search provider: web, corpus or null");
  cmd->add_option("--corpus-dir", f.corpus_dir, "Directory for the corpus provider");
  cmd->add_option("--scenario", f.scenario, "Scenario JSON (oracle-sim backend)");
  cmd->add_option("--script", f.script, "Response script JSONL (mock backend)");
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--out-dir", f.out_dir, "Directory for run artifacts");
  cmd->add_option("--context-cap", f.context_cap, "Max retained evidence tuples (0 = unlimited)");
  cmd->add_option("--excerpts", f.excerpts, "Excerpts kept per query");
  cmd->add_option("--timeout", f.timeout, "HTTP timeout in seconds");
  cmd->add_flag("--deterministic", f.deterministic, "Fixed timestamps for byte-identical reruns");
  cmd->add_flag("--immediate-updates", f.immediate_updates,
                "Accepted evidence is visible to later fields of the same iteration");
  cmd->add_flag("--full-eval", f.full_eval, "Candidate evaluation re-maps the whole schema");
  cmd->add_flag("--no-early-stop", f.no_early_stop, "Always run all iterations");
  if (resumable) cmd->add_option("--resume", f.resume, "Checkpoint JSON to resume from");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"schemamap: confidence-guided schema mapping agent"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file (flags win)");

  int rc = 0;

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Execute the iterative mapping agent");
  add_run_options(run_cmd, run_flags, /*resumable=*/true);
  run_cmd->callback([&] { rc = execute_run(run_flags, prepare_inputs(run_flags)); });

  std::string eval_run_dir, eval_truth;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a finished run against ground truth");
  eval_cmd->add_option("--run-dir", eval_run_dir, "Run artifact directory")->required();
  eval_cmd->add_option("--truth", eval_truth, "Ground-truth CSV")->required();
  eval_cmd->callback([&] { rc = do_evaluate(eval_run_dir, eval_truth); });

  std::string report_run_dir;
  double report_threshold = 1.0;
  auto* report_cmd = app.add_subcommand("report", "Emit the expert-review report for a run");
  report_cmd->add_option("--run-dir", report_run_dir, "Run artifact directory")->required();
  report_cmd->add_option("--threshold", report_threshold, "Review threshold (tau)");
  report_cmd->callback([&] { rc = do_report(report_run_dir, report_threshold); });

  SimulateFlags sim_flags;
  auto* sim_cmd = app.add_subcommand("simulate", "Build a simulated scenario (and optionally run it)");
  sim_cmd->add_option("--out-dir", sim_flags.out_dir, "Output directory")->required();
  sim_cmd->add_option("--spec", sim_flags.spec, "Scenario spec JSON file");
  sim_cmd->add_option("--seed", sim_flags.params.seed, "Scenario seed");
  sim_cmd->add_option("--easy", sim_flags.params.easy, "Easy fields");
  sim_cmd->add_option("--ambiguous", sim_flags.params.ambiguous, "Ambiguous fields");
  sim_cmd->add_option("--unmapped", sim_flags.params.unmapped, "Unmapped fields");
  sim_cmd->add_option("--decoys", sim_flags.params.decoys_per_ambiguous,
                      "Decoy documents per ambiguous field");
  sim_cmd->add_option("--candidates", sim_flags.params.candidates_per_ambiguous,
                      "Candidates per ambiguous field");
  sim_cmd->add_option("--easy-noise", sim_flags.params.easy_noise, "Easy-class error rate");
  sim_cmd->add_option("--unmapped-noise", sim_flags.params.unmapped_noise,
                      "Unmapped-class error rate");
  sim_cmd->add_option("--missing-rate", sim_flags.params.missing_rate,
                      "Unparseable-output rate");
  sim_cmd->add_flag("--run", sim_flags.run, "Run the agent on the scenario after building it");
  sim_cmd->add_flag("--no-truth", sim_flags.no_truth, "Do not evaluate accuracy during the run");
  sim_cmd->add_option("--iterations", sim_flags.run_flags.iterations, "Iteration limit (alpha)");
  sim_cmd->add_option("--variants", sim_flags.run_flags.variants, "Prompt variants per field (n)");
  sim_cmd->add_option("--threshold", sim_flags.run_flags.threshold, "Review threshold (tau)");
  sim_cmd->add_option("--context-cap", sim_flags.run_flags.context_cap,
                      "Max retained evidence tuples (0 = unlimited)");
  sim_cmd->add_option("--excerpts", sim_flags.run_flags.excerpts, "Excerpts kept per query");
  sim_cmd->add_option("--search", sim_flags.run_flags.search,
                      "Search provider for the run: corpus or null");
  sim_cmd
      ->add_option("--run-seed", sim_flags.run_flags.seed,
                   "Run seed (default: the scenario seed)")
      ->each([&](const std::string&) { sim_flags.run_seed_set = true; });
  sim_cmd->add_flag("--deterministic", sim_flags.run_flags.deterministic,
                    "Fixed timestamps for byte-identical reruns");
  sim_cmd->add_flag("--no-early-stop", sim_flags.run_flags.no_early_stop,
                    "Always run all iterations");
  sim_cmd->callback([&] { rc = do_simulate(sim_flags); });

  CalibrateFlags cal_flags;
  auto* cal_cmd = app.add_subcommand("calibrate", "Compare confidence calibration across variant counts");
  cal_cmd->add_option("--scenario", cal_flags.scenario, "Scenario JSON (default: standard scenario)");
  cal_cmd->add_option("--scenario-seed", cal_flags.params.seed, "Seed for the default scenario");
  cal_cmd->add_option("--n", cal_flags.n_list, "Comma-separated variant counts (default 3,10)");
  cal_cmd->add_option("--seeds", cal_flags.seeds, "Number of run seeds");
  cal_cmd->add_option("--seed-list", cal_flags.seed_list, "Explicit comma-separated run seeds");
  cal_cmd->add_option("--base-seed", cal_flags.base_seed, "First run seed");
  cal_cmd->add_option("--alpha", cal_flags.alpha, "Iterations per run");
  cal_cmd->add_option("--out-dir", cal_flags.out_dir, "Directory for calibration.csv");
  cal_cmd->callback([&] { rc = do_calibrate(cal_flags); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
