#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "schemamap/errors.hpp"

namespace schemamap {

// 64-bit FNV-1a. Stable across platforms and builds; used for dedupe keys,
// checkpoint fingerprints and counter-keyed randomness.
inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// A tiny deterministic generator for the few places that need a stream of
// draws (shuffles). Seeded from a key hash; no global state.
struct SmallRng {
  std::uint64_t state = 0;

  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    return mix64(state);
  }

  double uniform01() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

  // Unbiased enough for small n; used for index picks and shuffles.
  std::uint32_t below(std::uint32_t n) {
    return n == 0 ? 0 : static_cast<std::uint32_t>(next() % n);
  }
};

// Counter-keyed randomness: every draw is a pure function of
// (seed, tag, field, variant, iteration). There is no stream state, so call
// order and concurrency cannot reorder draws.
struct KeyedRng {
  std::uint64_t seed = 0;

  std::uint64_t bits(std::string_view tag, std::string_view field, int variant,
                     int iteration) const {
    std::uint64_t h = fnv1a(tag, fnv1a(field));
    h ^= mix64(seed + 0x9e3779b97f4a7c15ull);
    h ^= mix64(static_cast<std::uint64_t>(variant) * 0xd1342543de82ef95ull +
               static_cast<std::uint64_t>(iteration) * 0xaf251af3b0f025b5ull + 1);
    return mix64(h);
  }

  double uniform(std::string_view tag, std::string_view field, int variant,
                 int iteration) const {
    return static_cast<double>(bits(tag, field, variant, iteration) >> 11) *
           (1.0 / 9007199254740992.0);
  }
};

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Lowercased [a-z0-9_]+ runs. Underscores are part of a token so that
// schema field names stay whole words.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '_') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Replaces control characters with spaces and squeezes whitespace runs.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // also trims leading space
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    bool space = c < 0x21;  // control chars and ' '
    if (space) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(ch);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

// Removes <...> tag spans. Unterminated tags are dropped to the end of input.
inline std::string strip_markup(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') {
      in_tag = true;
    } else if (c == '>') {
      if (in_tag) {
        in_tag = false;
        out.push_back(' ');
      } else {
        out.push_back(c);
      }
    } else if (!in_tag) {
      out.push_back(c);
    }
  }
  return out;
}

// Byte-bounded truncation that never splits a UTF-8 sequence.
inline std::string utf8_truncate(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return std::string(s);
  std::size_t end = max_bytes;
  while (end > 0 && (static_cast<unsigned char>(s[end]) & 0xC0) == 0x80) --end;
  return std::string(s.substr(0, end));
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::string iso_utc(std::chrono::system_clock::time_point tp) {
  std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string iso_utc_now() {
  return iso_utc(std::chrono::system_clock::now());
}

// Fixed timestamp used in deterministic mode so run artifacts are
// byte-identical across reruns.
inline constexpr const char* kEpochTimestamp = "1970-01-01T00:00:00Z";

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// Write-then-rename so readers never observe a half-written file.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, content);
  std::filesystem::rename(tmp, path);
}

}  // namespace schemamap
