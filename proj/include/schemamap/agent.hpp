#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "schemamap/backend.hpp"
#include "schemamap/confidence.hpp"
#include "schemamap/evidence.hpp"
#include "schemamap/providers.hpp"
#include "schemamap/record.hpp"

namespace schemamap {

inline constexpr int kCheckpointFormatVersion = 1;

// Reward is the confidence delta produced by candidate evidence.
inline double compute_reward(double confidence_after, double confidence_before) {
  return confidence_after - confidence_before;
}

struct RunConfig {
  int alpha = 100;    // iteration limit
  int variants = 3;   // prompt variants per field (n)
  double review_threshold = 1.0;  // tau: fields below it are flagged for review
  std::size_t context_cap = 50;   // retained evidence tuples; 0 = unlimited
  std::uint64_t seed = 1;
  bool stop_on_no_conflicts = true;
  // Accepted evidence normally takes effect at the next iteration's
  // hypothesis; this switches to the within-iteration reading where it is
  // visible to later fields of the same iteration.
  bool immediate_context_updates = false;
  // Candidate evaluation re-maps only the conflicted field by default; this
  // re-maps the whole schema instead (same scoring, higher cost).
  bool full_schema_evaluation = false;
  int excerpts_per_query = 3;
  int backend_retries = 3;
  std::chrono::milliseconds retry_base_delay{50};
  bool deterministic_time = false;

  void validate() const {
    if (alpha < 1) throw ConfigError("run config: iteration limit must be >= 1");
    if (variants < 2) throw ConfigError("run config: variants must be >= 2");
    if (!(review_threshold > 0.0 && review_threshold <= 1.0))
      throw ConfigError("run config: review threshold must be in (0, 1]");
    if (excerpts_per_query < 0) throw ConfigError("run config: excerpts per query must be >= 0");
    if (backend_retries < 1) throw ConfigError("run config: backend retries must be >= 1");
  }
};

// s_t = {M_t, E_t} plus the per-field confidence history that r_prev reads.
struct AgentState {
  int iteration = 0;
  MappingHypothesis hypothesis;
  EvidenceContext context{50};
  std::map<std::string, double> per_field_confidence;
};

// One investigation step: the conflicted field and the query issued for it.
struct AgentAction {
  std::string field;
  std::string query;
};

struct RunResult {
  MappingHypothesis hypothesis;
  EvidenceContext context{50};
  std::vector<IterationRecord> records;
};

// Orchestrates the iterative mapping loop: generate a hypothesis from the
// current evidence context, detect conflicts, gather evidence per conflicted
// field, and retain exactly the evidence that strictly improves confidence.
// Ground truth, when supplied, is consulted only after an iteration's
// decisions are final, to fill the record's accuracy.
class Agent {
 public:
  Agent(RunConfig config, std::shared_ptr<MapperBackend> backend,
        std::shared_ptr<SearchProvider> provider, Schema source, Schema target)
      : cfg_(std::move(config)),
        backend_(std::move(backend)),
        provider_(std::move(provider)),
        source_(std::make_shared<const Schema>(std::move(source))),
        target_(std::make_shared<const Schema>(std::move(target))) {
    cfg_.validate();
    source_->validate();
    target_->validate();
    if (!backend_) throw ConfigError("agent: no mapping backend");
    if (!provider_) throw ConfigError("agent: no search provider");
  }

  const RunConfig& config() const { return cfg_; }
  const Schema& source() const { return *source_; }
  const Schema& target() const { return *target_; }

  void set_truth(std::optional<GroundTruth> truth) { truth_ = std::move(truth); }
  void set_ledger(Ledger* ledger) { ledger_ = ledger; }
  void set_checkpoint_sink(std::function<void(const nlohmann::json&)> sink) {
    checkpoint_sink_ = std::move(sink);
  }
  void set_record_sink(std::function<void(const IterationRecord&)> sink) {
    record_sink_ = std::move(sink);
  }

  RunResult run() {
    AgentState state;
    state.context = EvidenceContext(cfg_.context_cap);
    return run_loop(state);
  }

  RunResult resume(const nlohmann::json& checkpoint) {
    AgentState state = state_from_checkpoint(checkpoint);
    return run_loop(state);
  }

  // ------------------------------------------------------------------
  // One iteration of the loop (public so tests can drive it directly).
  // ------------------------------------------------------------------
  IterationRecord run_iteration(AgentState& state) {
    const int iteration = state.iteration + 1;

    state.hypothesis = generate_hypothesis(state.context, iteration);

    std::vector<Conflict> conflicts = detect_conflicts(state.hypothesis, cfg_.variants);

    // The stored per-field confidence is the source of r_prev. It starts
    // from the hypothesis confidence the first time a field conflicts and is
    // only ever raised: by the field's observed confidence while it stays
    // conflicted, or by an accepted tuple. A candidate evaluation that adds
    // no information replays the current draws and so can never beat it.
    for (const Conflict& conflict : conflicts) {
      double observed = conflict.confidence.value;
      auto [it, inserted] = state.per_field_confidence.try_emplace(conflict.field, observed);
      if (!inserted && observed > it->second) it->second = observed;
    }
    const std::vector<std::string> frozen_blocks = state.context.render();

    IterationRecord rec;
    rec.iteration = iteration;

    // Conflicted fields are handled sequentially in ascending name order.
    // Accepted tuples enter the context immediately but, unless configured
    // otherwise, later fields of this iteration still evaluate against the
    // frozen snapshot.
    for (const Conflict& conflict : conflicts) {
      rec.conflict_fields.push_back(conflict.field);

      AgentAction action;
      action.field = conflict.field;
      action.query =
          formulate_query(conflict, state.context, *backend_, source_->name, iteration);

      std::vector<std::string> excerpts;
      try {
        excerpts = sanitize(provider_->search(action.query), cfg_.excerpts_per_query);
      } catch (const ProviderError& e) {
        if (ledger_) ledger_->incident(iteration, "provider_failure",
                                       conflict.field + ": " + e.what());
      }

      EvidenceTuple tuple;
      tuple.iteration = iteration;
      tuple.field = conflict.field;
      tuple.conflict_summary = summarize_conflict(conflict);
      tuple.resolution_plan = resolution_plan(conflict);
      tuple.query = action.query;
      tuple.excerpts = std::move(excerpts);
      tuple.confidence_before = state.per_field_confidence.at(conflict.field);

      std::vector<std::string> eval_blocks =
          cfg_.immediate_context_updates ? state.context.render() : frozen_blocks;
      ConfidenceScore after =
          evaluate_candidate(conflict, tuple, std::move(eval_blocks), iteration);
      tuple.confidence_after = after.value;
      tuple.self_reported_confidence = after.modal.self_reported_confidence;

      UpdateDecision decision = state.context.update(tuple);
      if (ledger_) ledger_->append(tuple, decision);

      ++rec.tuples_proposed;
      if (decision == UpdateDecision::Accepted) {
        ++rec.tuples_accepted;
        state.per_field_confidence[conflict.field] = tuple.confidence_after;
      } else {
        ++rec.tuples_rejected;
      }
    }

    double sum = 0.0;
    for (const auto& [field, entry] : state.hypothesis.entries) {
      sum += entry.confidence;
      rec.per_field[field] =
          IterationRecord::FieldState{entry.modal.value_key(), entry.confidence};
    }
    rec.mean_confidence = sum / static_cast<double>(state.hypothesis.entries.size());

    // Evaluation only; every decision above has already been made.
    if (truth_) rec.accuracy = evaluate_accuracy(state.hypothesis, *truth_).accuracy;

    state.iteration = iteration;
    return rec;
  }

  // n variant mapping requests covering all source fields. A failed variant
  // (after the retry budget) contributes MISSING predictions for every field
  // and is ledgered as an incident; if every variant fails the run aborts.
  MappingHypothesis generate_hypothesis(const EvidenceContext& context, int iteration) {
    MappingRequest base;
    base.scope = TaskScope::FullSchema;
    base.source_fields = source_->fields;
    base.target = target_;
    base.context_blocks = context.render();
    base.iteration = iteration;
    base.purpose = RequestPurpose::Hypothesis;

    std::map<std::string, std::vector<Prediction>> predictions;
    for (const auto& f : source_->fields)
      predictions[f.name].resize(static_cast<std::size_t>(cfg_.variants));

    int failed_variants = 0;
    for (int v = 0; v < cfg_.variants; ++v) {
      MappingRequest req = make_variant(base, v, cfg_.seed, cfg_.variants);
      BackendResponse resp;
      try {
        resp = map_with_retry(req);
      } catch (const BackendError& e) {
        ++failed_variants;
        if (ledger_) ledger_->incident(iteration, "backend_variant_failure",
                                       "variant " + std::to_string(v) + ": " + e.what());
        continue;  // this variant's predictions stay MISSING
      }
      for (const auto& [field, pred] : resp.decisions) {
        auto it = predictions.find(field);
        if (it != predictions.end()) it->second[static_cast<std::size_t>(v)] = pred;
      }
    }
    if (failed_variants == cfg_.variants)
      throw RunAborted("backend unreachable: all " + std::to_string(cfg_.variants) +
                       " variant requests failed at iteration " + std::to_string(iteration));

    MappingHypothesis hypothesis;
    for (auto& [field, preds] : predictions) {
      HypothesisEntry entry;
      ConfidenceScore score = compute_confidence(preds);
      entry.modal = score.modal;
      entry.confidence = score.value;
      entry.variants = std::move(preds);
      hypothesis.entries.emplace(field, std::move(entry));
    }
    return hypothesis;
  }

  // Re-maps the conflicted field with the candidate evidence appended to the
  // rendered context and returns the confidence of the n fresh predictions.
  // A backend failure yields a zero score: evidence that cannot demonstrate
  // improvement is rejected.
  ConfidenceScore evaluate_candidate(const Conflict& conflict, const EvidenceTuple& draft,
                                     std::vector<std::string> context_blocks, int iteration) {
    MappingRequest base;
    if (cfg_.full_schema_evaluation) {
      base.scope = TaskScope::FullSchema;
      base.source_fields = source_->fields;
    } else {
      base.scope = TaskScope::SingleField;
      base.single_field = conflict.field;
      const SchemaField* f = source_->find(conflict.field);
      if (!f) throw ValidationError("evaluate_candidate: unknown field '" + conflict.field + "'");
      base.source_fields = {*f};
    }
    base.target = target_;
    context_blocks.push_back(render_evidence_block(draft));
    base.context_blocks = std::move(context_blocks);
    base.iteration = iteration;
    base.purpose = RequestPurpose::CandidateEval;

    std::vector<Prediction> predictions(static_cast<std::size_t>(cfg_.variants));
    for (int v = 0; v < cfg_.variants; ++v) {
      MappingRequest req = make_variant(base, v, cfg_.seed, cfg_.variants);
      BackendResponse resp;
      try {
        resp = map_with_retry(req);
      } catch (const BackendError&) {
        ConfidenceScore zero;
        zero.modal = Prediction::missing();
        return zero;
      }
      if (const Prediction* p = resp.find(conflict.field))
        predictions[static_cast<std::size_t>(v)] = *p;
    }
    return compute_confidence(predictions);
  }

  // ------------------------------------------------------------------
  // Checkpointing
  // ------------------------------------------------------------------

  nlohmann::json make_checkpoint(const AgentState& state) const {
    nlohmann::json per_field = nlohmann::json::object();
    for (const auto& [field, conf] : state.per_field_confidence) per_field[field] = conf;
    return nlohmann::json{{"format_version", kCheckpointFormatVersion},
                          {"iteration", state.iteration},
                          {"seed", cfg_.seed},
                          {"variants", cfg_.variants},
                          {"context_cap", cfg_.context_cap},
                          {"source_name", source_->name},
                          {"source_fingerprint", source_->fingerprint()},
                          {"target_name", target_->name},
                          {"target_fingerprint", target_->fingerprint()},
                          {"per_field_confidence", std::move(per_field)},
                          {"hypothesis", hypothesis_to_json(state.hypothesis)},
                          {"context", state.context.to_json()}};
  }

  AgentState state_from_checkpoint(const nlohmann::json& checkpoint) const {
    int version;
    try {
      version = checkpoint.at("format_version").get<int>();
    } catch (const nlohmann::json::exception&) {
      throw CheckpointError("corrupt checkpoint: no format_version");
    }
    if (version != kCheckpointFormatVersion)
      throw CheckpointError("checkpoint format version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointFormatVersion) + ")");
    try {
      if (checkpoint.at("source_fingerprint").get<std::string>() != source_->fingerprint())
        throw CheckpointError("checkpoint was taken against a different source schema ('" +
                              checkpoint.value("source_name", std::string{}) + "')");
      if (checkpoint.at("target_fingerprint").get<std::string>() != target_->fingerprint())
        throw CheckpointError("checkpoint was taken against a different target schema ('" +
                              checkpoint.value("target_name", std::string{}) + "')");
      if (checkpoint.at("seed").get<std::uint64_t>() != cfg_.seed)
        throw CheckpointError("checkpoint seed does not match the configured seed");
      if (checkpoint.at("variants").get<int>() != cfg_.variants)
        throw CheckpointError("checkpoint variant count does not match the configured count");

      AgentState state;
      state.iteration = checkpoint.at("iteration").get<int>();
      state.hypothesis = hypothesis_from_json(checkpoint.at("hypothesis"));
      state.context = EvidenceContext::from_json(checkpoint.at("context"));
      for (const auto& [field, conf] : checkpoint.at("per_field_confidence").items())
        state.per_field_confidence[field] = conf.get<double>();
      return state;
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    } catch (const ParseError& e) {
      throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
  }

 private:
  RunResult run_loop(AgentState& state) {
    RunResult result;
    result.context = EvidenceContext(cfg_.context_cap);
    while (state.iteration < cfg_.alpha) {
      AgentState snapshot = state;  // abort path checkpoints the last good state
      IterationRecord rec;
      try {
        rec = run_iteration(state);
      } catch (const RunAborted&) {
        if (checkpoint_sink_) checkpoint_sink_(make_checkpoint(snapshot));
        throw;
      }
      if (record_sink_) record_sink_(rec);
      if (checkpoint_sink_) checkpoint_sink_(make_checkpoint(state));
      bool stop = cfg_.stop_on_no_conflicts && rec.conflict_fields.empty();
      result.records.push_back(std::move(rec));
      if (stop) break;
    }
    result.hypothesis = state.hypothesis;
    result.context = state.context;
    return result;
  }

  BackendResponse map_with_retry(const MappingRequest& request) {
    for (int attempt = 1;; ++attempt) {
      try {
        return backend_->map_fields(request);
      } catch (const BackendError&) {
        if (attempt >= cfg_.backend_retries) throw;
        std::this_thread::sleep_for(cfg_.retry_base_delay * (1 << (attempt - 1)));
      }
    }
  }

  static std::string summarize_conflict(const Conflict& conflict) {
    std::vector<std::string> keys;
    keys.reserve(conflict.variant_predictions.size());
    for (const auto& p : conflict.variant_predictions) keys.push_back(p.value_key());
    return "variant predictions for " + conflict.field + ": [" + join(keys, ", ") + "]";
  }

  static std::string resolution_plan(const Conflict& conflict) {
    std::vector<std::string> candidates;
    for (const auto& p : conflict.variant_predictions) {
      if (p.is_missing()) continue;
      std::string key = p.value_key();
      bool seen = false;
      for (const auto& c : candidates) seen = seen || c == key;
      if (!seen) candidates.push_back(std::move(key));
    }
    return "Look up authoritative definitions of " +
           (candidates.empty() ? "the field" : join(candidates, " and ")) +
           " and determine which interpretation field '" + conflict.field +
           "' normalizes to.";
  }

  RunConfig cfg_;
  std::shared_ptr<MapperBackend> backend_;
  std::shared_ptr<SearchProvider> provider_;
  std::shared_ptr<const Schema> source_;
  std::shared_ptr<const Schema> target_;
  std::optional<GroundTruth> truth_;
  Ledger* ledger_ = nullptr;
  std::function<void(const nlohmann::json&)> checkpoint_sink_;
  std::function<void(const IterationRecord&)> record_sink_;
};

}  // namespace schemamap
