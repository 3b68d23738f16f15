#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lss {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

/// Deterministic token count: number of maximal alphanumeric runs plus the
/// number of non-whitespace, non-alphanumeric characters.
inline long estimate_tokens(std::string_view text) {
  long count = 0;
  bool in_run = false;
  for (char c : text) {
    if (is_word_char(c)) {
      if (!in_run) {
        ++count;
        in_run = true;
      }
    } else {
      in_run = false;
      if (std::isspace(static_cast<unsigned char>(c)) == 0) ++count;
    }
  }
  return count;
}

/// Unique lowercase alphanumeric tokens of a text.
inline std::set<std::string> token_set(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  };
  for (char c : text) {
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

/// Default relevance scorer: count of shared unique lowercase tokens.
inline long overlap_score(std::string_view a, std::string_view b) {
  auto sa = token_set(a);
  auto sb = token_set(b);
  long n = 0;
  for (const auto& t : sa)
    if (sb.count(t)) ++n;
  return n;
}

inline long overlap_score(const std::set<std::string>& sa, std::string_view b) {
  auto sb = token_set(b);
  long n = 0;
  for (const auto& t : sa)
    if (sb.count(t)) ++n;
  return n;
}

inline std::vector<std::string> shared_tokens(std::string_view a, std::string_view b) {
  auto sa = token_set(a);
  auto sb = token_set(b);
  std::vector<std::string> out;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(out));
  return out;
}

}  // namespace lss
