#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "schemamap/confidence.hpp"
#include "schemamap/evidence.hpp"
#include "schemamap/prompts.hpp"
#include "schemamap/request.hpp"

namespace schemamap {

// ---------------------------------------------------------------------------
// Response envelope: render and parse
// ---------------------------------------------------------------------------

// Canonical renderer for the strict response envelope. MISSING predictions
// have no textual form and are skipped.
inline std::string render_response(const std::vector<std::pair<std::string, Prediction>>& decisions) {
  std::string out = "<response>\n";
  for (const auto& [field, pred] : decisions) {
    if (pred.is_missing()) continue;
    out += "<decision>" + field + ",";
    out += pred.kind == PredictionKind::NotCovered ? kNotCovered : pred.target;
    if (pred.self_reported_confidence)
      out += "<confidence>" + std::to_string(*pred.self_reported_confidence) + "</confidence>";
    if (pred.reasoning) out += "<reasoning>" + *pred.reasoning + "</reasoning>";
    out += "</decision>\n";
  }
  out += "</response>";
  return out;
}

namespace detail {

// Extracts the first <tag>...</tag> element, removing it from `text`.
inline std::optional<std::string> take_element(std::string& text, const std::string& tag) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  std::size_t b = text.find(open);
  if (b == std::string::npos) return std::nullopt;
  std::size_t inner = b + open.size();
  std::size_t e = text.find(close, inner);
  if (e == std::string::npos) return std::nullopt;
  std::string content = text.substr(inner, e - inner);
  text.erase(b, e + close.size() - b);
  return content;
}

inline std::optional<int> parse_strict_int(const std::string& s) {
  std::string t = trim(s);
  if (t.empty() || t.size() > 10) return std::nullopt;
  std::size_t i = t[0] == '-' ? 1 : 0;
  if (i == t.size()) return std::nullopt;
  long v = 0;
  for (; i < t.size(); ++i) {
    if (t[i] < '0' || t[i] > '9') return std::nullopt;
    v = v * 10 + (t[i] - '0');
  }
  return static_cast<int>(t[0] == '-' ? -v : v);
}

}  // namespace detail

// Total function over arbitrary bytes: extracts the first well-formed
// envelope and yields one prediction per requested field. Unknown target
// names, out-of-range confidence values, absent fields and anything
// unparseable all become MISSING; nothing throws.
inline BackendResponse parse_response(const std::string& raw, const MappingRequest& request) {
  BackendResponse response;
  response.raw_text = raw;
  const std::vector<std::string> requested = request.field_names();

  std::map<std::string, Prediction> decided;
  try {
    std::size_t env_b = raw.find("<response>");
    std::size_t env_e = env_b == std::string::npos ? std::string::npos
                                                   : raw.find("</response>", env_b);
    if (env_b != std::string::npos && env_e != std::string::npos) {
      std::string body = raw.substr(env_b + 10, env_e - env_b - 10);

      // Pull out decision spans; what remains may carry envelope-level
      // confidence/reasoning that apply to decisions without their own.
      std::vector<std::string> decision_bodies;
      std::string remainder;
      std::size_t pos = 0;
      while (true) {
        std::size_t b = body.find("<decision>", pos);
        if (b == std::string::npos) break;
        std::size_t e = body.find("</decision>", b + 10);
        if (e == std::string::npos) break;
        remainder += body.substr(pos, b - pos);
        decision_bodies.push_back(body.substr(b + 10, e - b - 10));
        pos = e + 11;
      }
      remainder += body.substr(pos);

      auto env_conf_text = detail::take_element(remainder, "confidence");
      auto env_reason = detail::take_element(remainder, "reasoning");
      bool env_conf_invalid = false;
      std::optional<int> env_conf;
      if (env_conf_text) {
        env_conf = detail::parse_strict_int(*env_conf_text);
        if (!env_conf || *env_conf < 1 || *env_conf > 5) {
          env_conf_invalid = true;
          env_conf.reset();
        }
      }

      for (std::string dec : decision_bodies) {
        auto own_conf_text = detail::take_element(dec, "confidence");
        auto own_reason = detail::take_element(dec, "reasoning");

        std::string csv = trim(dec);
        std::size_t comma = csv.find(',');
        std::string src = trim(comma == std::string::npos ? csv : csv.substr(0, comma));
        bool known_src = false;
        for (const auto& f : requested) known_src = known_src || f == src;
        if (!known_src || decided.count(src)) continue;  // first decision wins

        Prediction pred;  // defaults to MISSING
        bool conf_invalid = false;
        std::optional<int> conf;
        if (own_conf_text) {
          conf = detail::parse_strict_int(*own_conf_text);
          if (!conf || *conf < 1 || *conf > 5) {
            conf_invalid = true;
            conf.reset();
          }
        } else if (env_conf_invalid) {
          conf_invalid = true;
        } else {
          conf = env_conf;
        }
        std::optional<std::string> reason = own_reason ? own_reason : env_reason;

        if (comma != std::string::npos && !conf_invalid) {
          std::string tgt = trim(csv.substr(comma + 1));
          if (tgt == kNotCovered) {
            pred = Prediction::not_covered(conf, reason);
          } else if (request.target && request.target->has_field(tgt)) {
            pred = Prediction::target_field(tgt, conf, reason);
          }
          // unknown target name: stays MISSING
        }
        decided.emplace(src, std::move(pred));
      }
    }
  } catch (...) {
    decided.clear();  // any surprise degrades to all-MISSING, never throws
  }

  response.decisions.reserve(requested.size());
  for (const auto& field : requested) {
    auto it = decided.find(field);
    response.decisions.emplace_back(
        field, it == decided.end() ? Prediction::missing() : it->second);
  }
  return response;
}

// ---------------------------------------------------------------------------
// Backend contract
// ---------------------------------------------------------------------------

// Deterministic fallback query built from the conflicting predictions.
inline std::string template_query(const Conflict& conflict, const std::string& vendor) {
  std::vector<std::string> targets;
  bool has_not_covered = false;
  for (const auto& p : conflict.variant_predictions) {
    if (p.is_missing()) continue;
    if (p.kind == PredictionKind::NotCovered) {
      has_not_covered = true;
      continue;
    }
    bool seen = false;
    for (const auto& t : targets) seen = seen || t == p.target;
    if (!seen) targets.push_back(p.target);
  }
  std::string q = conflict.field;
  if (!targets.empty()) q += " " + join(targets, " vs ");
  q += " mapping definition " + vendor;
  if (has_not_covered) q += " does " + conflict.field + " exist in target schema";
  return q;
}

// The pluggable mapping function F(S, E).
class MapperBackend {
 public:
  virtual ~MapperBackend() = default;

  virtual std::string name() const = 0;

  // Transport-level failures throw BackendError; the agent's retry layer
  // owns the retries.
  virtual BackendResponse map_fields(const MappingRequest& request) = 0;

  // One search query string for a conflicted field. The default is the
  // deterministic template; live backends generate it from the search prompt.
  virtual std::string formulate_query(const Conflict& conflict, const EvidenceContext& context,
                                      const std::string& vendor, int iteration) {
    (void)context;
    (void)iteration;
    return template_query(conflict, vendor);
  }
};

// Query formulation with fallback: a backend transport failure degrades to
// the template query instead of stopping the run.
inline std::string formulate_query(const Conflict& conflict, const EvidenceContext& context,
                                   MapperBackend& backend, const std::string& vendor,
                                   int iteration) {
  try {
    std::string q = trim(backend.formulate_query(conflict, context, vendor, iteration));
    if (!q.empty()) return q;
  } catch (const BackendError&) {
  }
  return template_query(conflict, vendor);
}

// ---------------------------------------------------------------------------
// HTTP chat backend
// ---------------------------------------------------------------------------

struct HttpBackendOptions {
  std::string endpoint_url;  // full URL of a chat-completion endpoint
  std::string api_key;
  std::string model;
  double timeout_seconds = 60.0;

  static HttpBackendOptions from_env() {
    HttpBackendOptions opt;
    if (const char* v = std::getenv("MAPPER_ENDPOINT_URL")) opt.endpoint_url = v;
    if (const char* v = std::getenv("MAPPER_API_KEY")) opt.api_key = v;
    if (const char* v = std::getenv("MAPPER_MODEL_NAME")) opt.model = v;
    if (opt.endpoint_url.empty())
      throw ConfigError("http backend: MAPPER_ENDPOINT_URL is not set");
    return opt;
  }
};

// Industry-standard chat-completion wire format: a messages array of
// role/content pairs, reply text at choices[0].message.content.
class HttpChatBackend : public MapperBackend {
 public:
  explicit HttpChatBackend(HttpBackendOptions options) : opt_(std::move(options)) {
    std::size_t scheme = opt_.endpoint_url.find("://");
    if (scheme == std::string::npos)
      throw ConfigError("http backend: endpoint URL must include a scheme: " + opt_.endpoint_url);
    std::size_t path = opt_.endpoint_url.find('/', scheme + 3);
    base_ = opt_.endpoint_url.substr(0, path);
    path_ = path == std::string::npos ? "/" : opt_.endpoint_url.substr(path);
  }

  std::string name() const override { return "http"; }

  BackendResponse map_fields(const MappingRequest& request) override {
    nlohmann::json body{
        {"model", opt_.model},
        {"temperature", request.temperature},
        {"messages",
         {{{"role", "system"}, {"content", build_system_prompt()}},
          {{"role", "user"}, {"content", build_user_prompt(request)}}}}};
    return parse_response(complete(body), request);
  }

  std::string formulate_query(const Conflict& conflict, const EvidenceContext& context,
                              const std::string& vendor, int iteration) override {
    (void)vendor;
    (void)iteration;
    nlohmann::json body{
        {"model", opt_.model},
        {"temperature", 0.0},
        {"messages",
         {{{"role", "system"}, {"content", build_system_prompt()}},
          {{"role", "user"}, {"content", build_search_prompt(conflict, context)}}}}};
    std::string reply = complete(body);
    // First non-empty line is the query.
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (!line.empty()) return line;
    }
    throw BackendError("http backend: empty search-query reply");
  }

 private:
  std::string complete(const nlohmann::json& body) {
    httplib::Client client(base_);
    client.set_connection_timeout(std::chrono::duration<double>(opt_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(opt_.timeout_seconds));
    httplib::Headers headers;
    if (!opt_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opt_.api_key);
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res)
      throw BackendError("http backend: transport error: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw BackendError("http backend: status " + std::to_string(res->status) + ": " +
                         utf8_truncate(res->body, 200));
    try {
      nlohmann::json reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("http backend: malformed completion reply: ") + e.what());
    }
  }

  HttpBackendOptions opt_;
  std::string base_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// Scripted mock backend
// ---------------------------------------------------------------------------

// Replays canned raw responses keyed by (scope, variant, iteration). Scope
// is "*" for full-schema requests, the field name for single-field ones.
// A missing script entry is a test bug, not a retryable condition.
class ScriptedMockBackend : public MapperBackend {
 public:
  using Key = std::tuple<std::string, int, int>;

  static std::string scope_key(const MappingRequest& request) {
    return request.scope == TaskScope::FullSchema ? "*" : request.single_field;
  }

  void script_response(std::string scope, int variant, int iteration, std::string raw) {
    script_[Key{std::move(scope), variant, iteration}] = std::move(raw);
  }

  void script_decisions(std::string scope, int variant, int iteration,
                        const std::vector<std::pair<std::string, Prediction>>& decisions) {
    script_response(std::move(scope), variant, iteration, render_response(decisions));
  }

  std::string name() const override { return "mock"; }

  BackendResponse map_fields(const MappingRequest& request) override {
    auto it = script_.find(Key{scope_key(request), request.variant_index, request.iteration});
    if (it == script_.end())
      throw std::logic_error("scripted mock: no entry for (" + scope_key(request) + ", variant " +
                             std::to_string(request.variant_index) + ", iteration " +
                             std::to_string(request.iteration) + ")");
    return parse_response(it->second, request);
  }

  // JSONL of {"scope", "variant", "iteration", "response"}.
  static std::shared_ptr<ScriptedMockBackend> from_jsonl(const std::filesystem::path& path) {
    auto mock = std::make_shared<ScriptedMockBackend>();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mock script: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        nlohmann::json j = nlohmann::json::parse(line);
        mock->script_response(j.at("scope").get<std::string>(), j.at("variant").get<int>(),
                              j.at("iteration").get<int>(), j.at("response").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("mock script " + path.string() + " line " + std::to_string(lineno) +
                         ": " + e.what());
      }
    }
    return mock;
  }

 private:
  std::map<Key, std::string> script_;  // read-only during replay
};

// ---------------------------------------------------------------------------
// Record / replay fixtures
// ---------------------------------------------------------------------------

// Stable digest of everything that determines a live completion.
inline std::string request_fingerprint(const MappingRequest& request) {
  std::uint64_t h = fnv1a(build_system_prompt());
  h = fnv1a(build_user_prompt(request), h);
  char temp[32];
  std::snprintf(temp, sizeof(temp), "t=%.3f", request.temperature);
  h = fnv1a(temp, h);
  return hex64(h);
}

// Wraps a live backend and appends {request_hash, response_text} JSONL
// fixtures for later offline replay.
class RecordingBackend : public MapperBackend {
 public:
  RecordingBackend(std::shared_ptr<MapperBackend> inner, const std::filesystem::path& path)
      : inner_(std::move(inner)), out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw IoError("cannot open recording file: " + path.string());
  }

  std::string name() const override { return "recording(" + inner_->name() + ")"; }

  BackendResponse map_fields(const MappingRequest& request) override {
    BackendResponse response = inner_->map_fields(request);
    nlohmann::json j{{"request_hash", request_fingerprint(request)},
                     {"response_text", response.raw_text}};
    out_ << j.dump() << '\n';
    out_.flush();
    return response;
  }

  std::string formulate_query(const Conflict& conflict, const EvidenceContext& context,
                              const std::string& vendor, int iteration) override {
    return inner_->formulate_query(conflict, context, vendor, iteration);
  }

 private:
  std::shared_ptr<MapperBackend> inner_;
  std::ofstream out_;
};

class ReplayBackend : public MapperBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open replay file: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        nlohmann::json j = nlohmann::json::parse(line);
        responses_[j.at("request_hash").get<std::string>()] =
            j.at("response_text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("replay file " + path.string() + " line " + std::to_string(lineno) +
                         ": " + e.what());
      }
    }
  }

  std::string name() const override { return "replay"; }

  BackendResponse map_fields(const MappingRequest& request) override {
    auto it = responses_.find(request_fingerprint(request));
    if (it == responses_.end())
      throw BackendError("replay backend: no recorded response for request " +
                         request_fingerprint(request));
    return parse_response(it->second, request);
  }

 private:
  std::map<std::string, std::string> responses_;
};

}  // namespace schemamap
