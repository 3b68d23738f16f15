#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lss {

/// Ordered key -> value map for artifact front matter. Insertion order is
/// preserved because serialized files must round-trip byte-exact.
class FrontMatter {
 public:
  using Entry = std::pair<std::string, std::string>;

  void set(std::string key, std::string value) {
    for (auto& e : entries_) {
      if (e.first == key) {
        e.second = std::move(value);
        return;
      }
    }
    entries_.emplace_back(std::move(key), std::move(value));
  }

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& e : entries_)
      if (e.first == key) return e.second;
    return std::nullopt;
  }

  bool has(std::string_view key) const { return get(key).has_value(); }

  void erase(std::string_view key) {
    std::erase_if(entries_, [&](const Entry& e) { return e.first == key; });
  }

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  bool operator==(const FrontMatter&) const = default;

 private:
  std::vector<Entry> entries_;
};

/// Serializes front matter + body as a `---` delimited markdown document.
inline std::string serialize_document(const FrontMatter& fm, std::string_view body) {
  std::string out = "---\n";
  for (const auto& [k, v] : fm.entries()) {
    out += k;
    out += ": ";
    out += v;
    out += "\n";
  }
  out += "---\n";
  out += body;
  return out;
}

struct ParsedDocument {
  FrontMatter front_matter;
  std::string body;
};

/// Parses a `---` delimited document. A file without a leading delimiter is
/// treated as all body.
inline ParsedDocument parse_document(std::string_view text) {
  ParsedDocument doc;
  if (!text.starts_with("---\n")) {
    doc.body = std::string(text);
    return doc;
  }
  size_t pos = 4;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol < text.size() ? eol + 1 : text.size();
    if (line == "---") {
      doc.body = std::string(text.substr(pos));
      return doc;
    }
    size_t colon = line.find(": ");
    if (colon != std::string_view::npos) {
      doc.front_matter.set(std::string(line.substr(0, colon)),
                           std::string(line.substr(colon + 2)));
    } else if (size_t c2 = line.find(':'); c2 != std::string_view::npos) {
      doc.front_matter.set(std::string(line.substr(0, c2)),
                           std::string(line.substr(c2 + 1)));
    }
  }
  return doc;
}

}  // namespace lss
