#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "schemamap/errors.hpp"
#include "schemamap/util.hpp"

namespace schemamap {

struct SearchResult {
  std::string title;
  std::string locator;  // URL or corpus document id
  std::string snippet;
};

// Evidence retrieval contract. Providers are read-only after construction;
// concurrent queries are allowed.
class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::string name() const = 0;
  // Transport failures throw ProviderError; the agent ledgers an incident
  // and continues with an empty result list.
  virtual std::vector<SearchResult> search(const std::string& query) = 0;
};

// Ablation provider: never returns evidence. The agent must still terminate
// and can never accept a tuple.
class NullSearchProvider : public SearchProvider {
 public:
  std::string name() const override { return "null"; }
  std::vector<SearchResult> search(const std::string&) override { return {}; }
};

// ---------------------------------------------------------------------------
// Excerpt sanitization
// ---------------------------------------------------------------------------

inline constexpr std::size_t kExcerptMaxChars = 500;

// Top-k snippets with markup stripped, control characters removed,
// whitespace collapsed and a hard length cap. Results whose snippet is empty
// after cleaning are dropped.
inline std::vector<std::string> sanitize(const std::vector<SearchResult>& results,
                                         std::size_t k) {
  std::vector<std::string> excerpts;
  for (const auto& r : results) {
    if (excerpts.size() >= k) break;
    std::string cleaned = collapse_whitespace(strip_markup(r.snippet));
    cleaned = utf8_truncate(cleaned, kExcerptMaxChars);
    if (!cleaned.empty()) excerpts.push_back(std::move(cleaned));
  }
  return excerpts;
}

// ---------------------------------------------------------------------------
// Local corpus provider
// ---------------------------------------------------------------------------

struct CorpusDocument {
  std::string id;
  std::string title;
  std::string text;
};

// Keyword index over a document set: term -> per-document frequencies.
// Scoring is the sum of query-term frequencies; ties break by ascending
// document id. Plain and deterministic on purpose — this provider exists for
// reproducibility, not recall quality.
class CorpusIndex {
 public:
  CorpusIndex() = default;

  static CorpusIndex from_documents(std::vector<CorpusDocument> documents) {
    CorpusIndex index;
    std::sort(documents.begin(), documents.end(),
              [](const CorpusDocument& a, const CorpusDocument& b) { return a.id < b.id; });
    for (auto& d : documents) index.add(std::move(d));
    return index;
  }

  // Reads every regular file in the directory in file-name order. The first
  // line of a file is its title, the rest the body; the document id is the
  // file stem. Unreadable files are skipped with a warning on stderr.
  static CorpusIndex from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
      throw ConfigError("corpus directory does not exist: " + dir.string());
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (!std::filesystem::is_directory(entry.path())) paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());

    CorpusIndex index;
    for (const auto& p : paths) {
      std::string content;
      try {
        content = read_text_file(p);
      } catch (const IoError& e) {
        std::cerr << "warning: skipping unreadable corpus file: " << e.what() << "\n";
        continue;
      }
      CorpusDocument doc;
      doc.id = p.stem().string();
      std::size_t nl = content.find('\n');
      doc.title = trim(content.substr(0, nl));
      doc.text = nl == std::string::npos ? "" : trim(content.substr(nl + 1));
      index.add(std::move(doc));
    }
    return index;
  }

  std::size_t size() const { return documents_.size(); }
  const std::vector<CorpusDocument>& documents() const { return documents_; }

  std::vector<SearchResult> search(const std::string& query, std::size_t top_k) const {
    std::vector<std::string> terms = tokenize(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    std::map<std::size_t, long> scores;  // doc index -> score
    for (const auto& term : terms) {
      auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      for (const auto& [doc, freq] : it->second) scores[doc] += freq;
    }

    std::vector<std::pair<std::size_t, long>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return documents_[a.first].id < documents_[b.first].id;
    });

    std::vector<SearchResult> results;
    for (const auto& [doc, score] : ranked) {
      if (results.size() >= top_k) break;
      const auto& d = documents_[doc];
      results.push_back(SearchResult{d.title, d.id, utf8_truncate(d.text, 400)});
    }
    return results;
  }

 private:
  void add(CorpusDocument doc) {
    std::size_t idx = documents_.size();
    for (const auto& term : tokenize(doc.title + " " + doc.text)) postings_[term][idx] += 1;
    documents_.push_back(std::move(doc));
  }

  std::vector<CorpusDocument> documents_;
  std::unordered_map<std::string, std::map<std::size_t, long>> postings_;
};

class CorpusSearchProvider : public SearchProvider {
 public:
  explicit CorpusSearchProvider(CorpusIndex index, std::size_t top_k = 3)
      : index_(std::move(index)), top_k_(top_k) {}

  std::string name() const override { return "corpus"; }

  std::vector<SearchResult> search(const std::string& query) override {
    return index_.search(query, top_k_);
  }

  const CorpusIndex& index() const { return index_; }

 private:
  CorpusIndex index_;
  std::size_t top_k_;
};

// ---------------------------------------------------------------------------
// Web provider
// ---------------------------------------------------------------------------

// GET <endpoint>?q=<query> returning a JSON array of {title, url, snippet}.
// Vendor-specific search APIs are adapted to this one shape out of scope of
// the library.
class WebSearchProvider : public SearchProvider {
 public:
  struct Options {
    std::string endpoint_url;
    std::string api_key;
    double timeout_seconds = 30.0;
    std::size_t top_k = 3;

    static Options from_env() {
      Options opt;
      if (const char* v = std::getenv("SEARCH_ENDPOINT_URL")) opt.endpoint_url = v;
      if (const char* v = std::getenv("SEARCH_API_KEY")) opt.api_key = v;
      if (opt.endpoint_url.empty())
        throw ConfigError("web search: SEARCH_ENDPOINT_URL is not set");
      return opt;
    }
  };

  explicit WebSearchProvider(Options options) : opt_(std::move(options)) {
    std::size_t scheme = opt_.endpoint_url.find("://");
    if (scheme == std::string::npos)
      throw ConfigError("web search: endpoint URL must include a scheme: " + opt_.endpoint_url);
    std::size_t path = opt_.endpoint_url.find('/', scheme + 3);
    base_ = opt_.endpoint_url.substr(0, path);
    path_ = path == std::string::npos ? "/" : opt_.endpoint_url.substr(path);
  }

  std::string name() const override { return "web"; }

  std::vector<SearchResult> search(const std::string& query) override {
    httplib::Client client(base_);
    client.set_connection_timeout(std::chrono::duration<double>(opt_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(opt_.timeout_seconds));
    httplib::Headers headers;
    if (!opt_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opt_.api_key);

    std::string url = path_;
    url += path_.find('?') == std::string::npos ? '?' : '&';
    url += "q=" + httplib::detail::encode_query_param(query);

    auto res = client.Get(url, headers);
    if (!res)
      throw ProviderError("web search: transport error: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw ProviderError("web search: status " + std::to_string(res->status));

    std::vector<SearchResult> results;
    try {
      nlohmann::json j = nlohmann::json::parse(res->body);
      for (const auto& item : j) {
        if (results.size() >= opt_.top_k) break;
        results.push_back(SearchResult{item.value("title", std::string{}),
                                       item.value("url", std::string{}),
                                       item.value("snippet", std::string{})});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("web search: malformed reply: ") + e.what());
    }
    return results;
  }

 private:
  Options opt_;
  std::string base_;
  std::string path_;
};

}  // namespace schemamap
