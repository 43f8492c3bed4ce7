#pragma once

// Triple and sentence ingestion, person documents, value groups and group
// balancing (truncation of large groups, enrichment of small ones).

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "common.hpp"

namespace tripscore {

enum class Property { profession, nationality };

inline std::string_view to_string(Property p) {
  return p == Property::profession ? "profession" : "nationality";
}

inline Property parse_property(std::string_view s) {
  if (s == "profession") return Property::profession;
  if (s == "nationality") return Property::nationality;
  throw ConfigError("unknown property '" + std::string(s) + "' (expected profession|nationality)");
}

struct Triple {
  std::string subject;
  Property property = Property::profession;
  std::string value;

  bool operator==(const Triple&) const = default;
};

struct PersonDoc {
  std::string subject;
  std::vector<std::string> tokens;
  std::size_t source_sentence_count = 0;

  bool operator==(const PersonDoc&) const = default;
};

using DocPtr = std::shared_ptr<const PersonDoc>;
using DocMap = std::unordered_map<std::string, DocPtr>;

struct ValueGroup {
  std::string value;
  Property property = Property::profession;
  std::vector<DocPtr> members;
  bool enriched = false;
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

// Reads `subject<TAB>value` lines. Blank lines are ignored, duplicates dropped
// (first occurrence wins, order preserved).
inline std::vector<Triple> load_triples(const std::filesystem::path& path, Property property) {
  if (!std::filesystem::exists(path)) throw IoError(path, "no such file");
  std::vector<Triple> out;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    if (trim(line).empty()) return;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(path, number, "expected subject<TAB>value");
    auto subject = trim(line.substr(0, tab));
    auto value = trim(line.substr(tab + 1));
    if (value.find('\t') != std::string_view::npos)
      throw ParseError(path, number, "too many fields (expected subject<TAB>value)");
    if (subject.empty()) throw ParseError(path, number, "empty subject");
    if (value.empty()) throw ParseError(path, number, "empty value");
    std::string key;
    key.reserve(subject.size() + value.size() + 1);
    key.append(subject).push_back('\t');
    key.append(value);
    if (seen.insert(std::move(key)).second)
      out.push_back({std::string(subject), property, std::string(value)});
  });
  return out;
}

struct SentenceTable {
  std::vector<std::string> subjects;  // first-appearance order
  std::unordered_map<std::string, std::vector<std::string>> sentences;

  std::span<const std::string> of(const std::string& subject) const {
    auto it = sentences.find(subject);
    if (it == sentences.end()) return {};
    return it->second;
  }
};

// Reads `subject<TAB>sentence` lines. The sentence is everything after the
// first tab.
inline SentenceTable load_sentences(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(path, "no such file");
  SentenceTable table;
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    if (trim(line).empty()) return;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(path, number, "expected subject<TAB>sentence");
    auto subject = trim(line.substr(0, tab));
    if (subject.empty()) throw ParseError(path, number, "empty subject");
    std::string key(subject);
    auto [it, inserted] = table.sentences.try_emplace(key);
    if (inserted) table.subjects.push_back(key);
    it->second.emplace_back(line.substr(tab + 1));
  });
  return table;
}

// ---------------------------------------------------------------------------
// Person documents
// ---------------------------------------------------------------------------

// ASCII and Latin-1 supplement (U+00C0..U+00DE) lowercasing over UTF-8.
inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto c = static_cast<unsigned char>(out[i]);
    if (c >= 'A' && c <= 'Z') {
      out[i] = static_cast<char>(c + 32);
    } else if (c == 0xC3 && i + 1 < out.size()) {
      auto d = static_cast<unsigned char>(out[i + 1]);
      if (d >= 0x80 && d <= 0x9E && d != 0x97) out[i + 1] = static_cast<char>(d + 0x20);
      ++i;
    }
  }
  return out;
}

inline bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

inline std::string_view strip_punct(std::string_view tok) {
  while (!tok.empty() && is_ascii_punct(tok.front())) tok.remove_prefix(1);
  while (!tok.empty() && is_ascii_punct(tok.back())) tok.remove_suffix(1);
  return tok;
}

// Whitespace split with boundary punctuation stripped; empty tokens dropped.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      auto tok = strip_punct(text.substr(i, j - i));
      if (!tok.empty()) out.emplace_back(tok);
    }
    i = j;
  }
  return out;
}

// Replaces every occurrence of `needle` in `hay` with a single space.
inline void erase_all(std::string& hay, std::string_view needle) {
  if (needle.empty()) return;
  std::string out;
  out.reserve(hay.size());
  std::size_t pos = 0;
  for (;;) {
    auto hit = hay.find(needle, pos);
    if (hit == std::string::npos) break;
    out.append(hay, pos, hit - pos);
    out.push_back(' ');
    pos = hit + needle.size();
  }
  if (pos == 0) return;
  out.append(hay, pos, std::string::npos);
  hay = std::move(out);
}

// Lowercases each sentence, removes the subject's full name, tokenizes and
// drops any leftover name token. Stop words are kept. An empty subject (used
// for enrichment pages) disables name removal.
inline PersonDoc build_person_doc(std::string_view subject, std::span<const std::string> sentences) {
  PersonDoc doc;
  doc.subject = std::string(subject);
  doc.source_sentence_count = sentences.size();

  const std::string name = to_lower(trim(subject));
  std::unordered_set<std::string> name_tokens;
  for (auto& t : tokenize(name)) name_tokens.insert(std::move(t));

  for (const auto& sentence : sentences) {
    std::string text = to_lower(sentence);
    erase_all(text, name);
    for (auto& tok : tokenize(text)) {
      if (!name_tokens.contains(tok)) doc.tokens.push_back(std::move(tok));
    }
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Grouping
// ---------------------------------------------------------------------------

// One group per distinct value, in first-appearance order. Only subjects with
// exactly one value contribute, and only if their document has tokens.
// Values held solely by multi-valued subjects still get an (empty) group so
// that enrichment can fill them.
inline std::vector<ValueGroup> group_single_valued(std::span<const Triple> triples, const DocMap& docs) {
  std::unordered_map<std::string, std::size_t> value_count;
  for (const auto& t : triples) ++value_count[t.subject];

  std::vector<ValueGroup> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  for (const auto& t : triples) {
    auto [it, inserted] = group_of.try_emplace(t.value, groups.size());
    if (inserted) groups.push_back({t.value, t.property, {}, false});
    if (value_count[t.subject] != 1) continue;
    auto doc = docs.find(t.subject);
    if (doc == docs.end() || !doc->second || doc->second->tokens.empty()) continue;
    groups[it->second].members.push_back(doc->second);
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Enrichment and balancing
// ---------------------------------------------------------------------------

// Source of extra text pages for under-represented values.
class Enricher {
 public:
  virtual ~Enricher() = default;
  virtual std::vector<std::string> retrieve(const std::string& value, Property property,
                                            std::size_t max_pages) = 0;
};

class NullEnricher final : public Enricher {
 public:
  std::vector<std::string> retrieve(const std::string&, Property, std::size_t) override { return {}; }
};

// Offline fixture: `<dir>/<value>.txt`, pages separated by blank lines.
class DirectoryEnricher final : public Enricher {
 public:
  explicit DirectoryEnricher(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::vector<std::string> retrieve(const std::string& value, Property, std::size_t max_pages) override {
    auto path = dir_ / (value + ".txt");
    if (!std::filesystem::exists(path)) throw IoError(path, "no enrichment pages");
    std::vector<std::string> pages;
    std::string current;
    auto flush = [&] {
      if (!trim(current).empty() && pages.size() < max_pages) pages.push_back(current);
      current.clear();
    };
    for_each_line(path, [&](std::size_t, std::string_view line) {
      if (trim(line).empty()) {
        flush();
      } else {
        if (!current.empty()) current.push_back(' ');
        current.append(line);
      }
    });
    flush();
    return pages;
  }

 private:
  std::filesystem::path dir_;
};

struct BalanceOptions {
  std::size_t floor = 100;
  std::size_t cap = 5000;
  std::size_t enrich_pages = 200;
  // When set, oversized groups are shuffled with this seed before truncation.
  std::optional<std::uint64_t> shuffle_seed;
};

inline std::string enrichment_subject(const std::string& value, std::size_t page) {
  return "__enrich__:" + value + ":" + std::to_string(page);
}

// Enriches groups below `floor` (once; groups already flagged are left alone)
// and truncates groups above `cap`. Enricher failures become warnings.
inline std::vector<ValueGroup> balance_groups(std::vector<ValueGroup> groups, const BalanceOptions& opts,
                                              Enricher& enricher, Diagnostics* diag = nullptr) {
  if (opts.floor > opts.cap)
    throw ConfigError("floor (" + std::to_string(opts.floor) + ") exceeds cap (" + std::to_string(opts.cap) + ")");

  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& group = groups[g];
    if (group.members.size() < opts.floor && !group.enriched) {
      std::vector<std::string> pages;
      bool failed = false;
      try {
        pages = enricher.retrieve(group.value, group.property, opts.enrich_pages);
      } catch (const std::exception& e) {
        warn(diag, "group '" + group.value + "' has " + std::to_string(group.members.size()) +
                       " members (< " + std::to_string(opts.floor) + "); enrichment failed: " + e.what());
        failed = true;
      }
      std::size_t added = 0;
      for (std::size_t p = 0; p < pages.size() && p < opts.enrich_pages; ++p) {
        const std::string page[] = {pages[p]};
        auto doc = build_person_doc("", page);
        if (doc.tokens.empty()) continue;
        doc.subject = enrichment_subject(group.value, p);
        group.members.push_back(std::make_shared<const PersonDoc>(std::move(doc)));
        ++added;
      }
      if (added > 0) {
        group.enriched = true;
      } else if (!failed) {
        warn(diag, "group '" + group.value + "' has " + std::to_string(group.members.size()) +
                       " members (< " + std::to_string(opts.floor) + ") and was not enriched");
      }
    }
    if (group.members.size() > opts.cap) {
      if (opts.shuffle_seed) {
        Rng rng(mix_seed(*opts.shuffle_seed, g));
        rng.shuffle(group.members);
      }
      group.members.resize(opts.cap);
    }
  }
  return groups;
}

}  // namespace tripscore
