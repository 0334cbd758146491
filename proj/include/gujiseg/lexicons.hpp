#pragma once

// Side resources for the feature extractor: rhyme dictionaries, entity
// lexicons with a greedy span tagger, and bigram PMI tables.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gujiseg/corpus.hpp"
#include "gujiseg/error.hpp"
#include "gujiseg/utf8.hpp"

namespace gujiseg {

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <typename F>
void for_each_line(std::istream& in, F&& f) {
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  for (const auto& l : split_lines(data)) f(l);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rhyme dictionaries

enum class RhymeSource { Guangyun, Pingshuiyun };

inline std::string_view rhyme_source_name(RhymeSource s) {
  return s == RhymeSource::Guangyun ? "guangyun" : "pingshuiyun";
}

inline RhymeSource parse_rhyme_source(std::string_view name) {
  if (name == "guangyun") return RhymeSource::Guangyun;
  if (name == "pingshuiyun") return RhymeSource::Pingshuiyun;
  throw ConfigError("unknown rhyme dictionary '" + std::string(name) +
                    "' (expected guangyun|pingshuiyun)");
}

struct RhymeDictionary {
  RhymeSource source = RhymeSource::Guangyun;
  // Classes per character in first-seen order, without duplicates.
  std::unordered_map<char32_t, std::vector<std::string>> entries;

  const std::vector<std::string>* classes(char32_t c) const {
    const auto it = entries.find(c);
    return it == entries.end() ? nullptr : &it->second;
  }
};

// TSV `<char>\t<class>`; a character may repeat to list several readings.
inline RhymeDictionary load_rhyme_dict(std::istream& in, RhymeSource which) {
  RhymeDictionary dict;
  dict.source = which;
  detail::for_each_line(in, [&](const detail::RawLine& l) {
    if (l.text.empty()) return;
    const auto fields = detail::split_tabs(l.text);
    if (fields.size() != 2) throw ParseError(l.number, "expected <char>\\t<class>");
    const auto ch = utf8::decode(fields[0], l.offset);
    if (ch.size() != 1) throw ParseError(l.number, "first field must be a single character");
    if (fields[1].empty()) throw ParseError(l.number, "empty rhyme class");
    utf8::decode(fields[1], l.offset + fields[0].size() + 1);
    auto& classes = dict.entries[ch[0]];
    const std::string cls(fields[1]);
    if (std::find(classes.begin(), classes.end(), cls) == classes.end()) classes.push_back(cls);
  });
  return dict;
}

// ---------------------------------------------------------------------------
// Entity lexicons

enum class EntityType : std::uint8_t { Reign, Place, Office };

inline std::string_view entity_type_name(EntityType t) {
  switch (t) {
    case EntityType::Reign: return "REIGN";
    case EntityType::Place: return "PLACE";
    case EntityType::Office: return "OFFICE";
  }
  return "?";
}

inline std::optional<EntityType> parse_entity_type(std::string_view s) {
  if (s == "REIGN") return EntityType::Reign;
  if (s == "PLACE") return EntityType::Place;
  if (s == "OFFICE") return EntityType::Office;
  return std::nullopt;
}

struct EntityLexicon {
  std::unordered_map<std::u32string, EntityType> entries;
  std::size_t max_word_length = 0;

  // First insertion wins; returns false when the word was already present.
  bool add(std::u32string word, EntityType type) {
    if (word.empty()) throw std::invalid_argument("empty lexicon word");
    const auto len = word.size();
    if (!entries.emplace(std::move(word), type).second) return false;
    max_word_length = std::max(max_word_length, len);
    return true;
  }
};

// TSV `<word>\t<REIGN|PLACE|OFFICE>`. A word listed again with a different
// type keeps its first type and a warning is appended to `warnings`.
inline EntityLexicon load_entity_lexicon(std::istream& in,
                                         std::vector<std::string>* warnings = nullptr) {
  EntityLexicon lex;
  detail::for_each_line(in, [&](const detail::RawLine& l) {
    if (l.text.empty()) return;
    const auto fields = detail::split_tabs(l.text);
    if (fields.size() != 2) throw ParseError(l.number, "expected <word>\\t<type>");
    auto word = utf8::decode(fields[0], l.offset);
    if (word.empty()) throw ParseError(l.number, "empty word");
    const auto type = parse_entity_type(fields[1]);
    if (!type) throw ParseError(l.number, "entity type must be REIGN, PLACE or OFFICE");
    const auto existing = lex.entries.find(word);
    if (existing != lex.entries.end()) {
      if (existing->second != *type && warnings)
        warnings->push_back("line " + std::to_string(l.number) + ": '" +
                            std::string(fields[0]) + "' already typed " +
                            std::string(entity_type_name(existing->second)) + ", keeping it");
      return;
    }
    lex.add(std::move(word), *type);
  });
  return lex;
}

enum class SpanPos : std::uint8_t { B, I, E, S };

struct EntityTag {
  EntityType type;
  SpanPos pos;
  bool operator==(const EntityTag&) const = default;
};

// Per-character tags; nullopt means the character is not inside an entity.
using EntityTagSequence = std::vector<std::optional<EntityTag>>;

inline std::string entity_tag_name(const EntityTag& t) {
  static constexpr std::string_view kPos[] = {"B", "I", "E", "S"};
  return std::string(entity_type_name(t.type)) + "-" +
         std::string(kPos[static_cast<int>(t.pos)]);
}

// Greedy left-to-right longest match.
inline EntityTagSequence tag_entities(std::u32string_view chars, const EntityLexicon& lexicon) {
  EntityTagSequence tags(chars.size());
  std::size_t i = 0;
  std::u32string key;
  while (i < chars.size()) {
    std::size_t best = 0;
    EntityType type{};
    const std::size_t longest = std::min(lexicon.max_word_length, chars.size() - i);
    for (std::size_t len = longest; len >= 1; --len) {
      key.assign(chars.substr(i, len));
      const auto it = lexicon.entries.find(key);
      if (it != lexicon.entries.end()) {
        best = len;
        type = it->second;
        break;
      }
    }
    if (best == 0) {
      ++i;
      continue;
    }
    if (best == 1) {
      tags[i] = EntityTag{type, SpanPos::S};
    } else {
      tags[i] = EntityTag{type, SpanPos::B};
      for (std::size_t j = 1; j + 1 < best; ++j) tags[i + j] = EntityTag{type, SpanPos::I};
      tags[i + best - 1] = EntityTag{type, SpanPos::E};
    }
    i += best;
  }
  return tags;
}

// ---------------------------------------------------------------------------
// PMI

inline double pmi_from_counts(double total, double joint, double left, double right) {
  return std::log2(total * joint / (left * right));
}

struct PmiTable {
  std::uint64_t total_bigrams = 0;
  std::uint64_t min_count = 1;
  std::unordered_map<std::uint64_t, double> pmi;

  static std::uint64_t key(char32_t a, char32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  }

  std::optional<double> lookup(char32_t a, char32_t b) const {
    const auto it = pmi.find(key(a, b));
    if (it == pmi.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return pmi.size(); }
};

// Marginals are positional: c(a) counts a as the left member of a pair,
// c(b) counts b as the right member. Pairs never cross sequence ends.
inline PmiTable build_pmi_table(const std::vector<LabeledSequence>& train,
                                std::uint64_t min_count = 5) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::unordered_map<std::uint64_t, std::uint64_t> joint;
  std::unordered_map<char32_t, std::uint64_t> left, right;
  std::uint64_t total = 0;
  for (const auto& s : train) {
    for (std::size_t i = 0; i + 1 < s.chars.size(); ++i) {
      ++joint[PmiTable::key(s.chars[i], s.chars[i + 1])];
      ++left[s.chars[i]];
      ++right[s.chars[i + 1]];
      ++total;
    }
  }
  PmiTable table;
  table.min_count = min_count;
  if (total == 0) return table;
  table.total_bigrams = total;
  for (const auto& [k, c] : joint) {
    if (c < min_count) continue;
    const auto a = static_cast<char32_t>(k >> 32);
    const auto b = static_cast<char32_t>(k & 0xFFFFFFFFu);
    table.pmi.emplace(k, pmi_from_counts(static_cast<double>(total), static_cast<double>(c),
                                         static_cast<double>(left[a]),
                                         static_cast<double>(right[b])));
  }
  return table;
}

inline constexpr std::string_view kPmiNa = "PMI_NA";

inline std::string_view pmi_bin(double value) {
  if (value < 0.0) return "PMI<0";
  if (value < 2.0) return "PMI0-2";
  if (value < 4.0) return "PMI2-4";
  if (value < 6.0) return "PMI4-6";
  return "PMI>=6";
}

inline std::string_view pmi_bin(std::optional<double> value) {
  return value ? pmi_bin(*value) : kPmiNa;
}

// `#N=<total>` and `#min_count=<m>` headers, then `<a><b>\t<pmi>` sorted by pair.
inline void save_pmi_table(std::ostream& out, const PmiTable& table) {
  out << "#N=" << table.total_bigrams << '\n' << "#min_count=" << table.min_count << '\n';
  std::map<std::uint64_t, double> sorted(table.pmi.begin(), table.pmi.end());
  for (const auto& [k, v] : sorted) {
    out << utf8::encode(static_cast<char32_t>(k >> 32))
        << utf8::encode(static_cast<char32_t>(k & 0xFFFFFFFFu)) << '\t'
        << detail::format_double(v) << '\n';
  }
}

inline PmiTable load_pmi_table(std::istream& in) {
  PmiTable table;
  bool have_total = false;
  detail::for_each_line(in, [&](const detail::RawLine& l) {
    if (l.text.empty()) return;
    if (l.text.starts_with("#")) {
      const auto eq = l.text.find('=');
      if (eq == std::string_view::npos) throw ParseError(l.number, "malformed header");
      const auto name = l.text.substr(1, eq - 1);
      const auto value = l.text.substr(eq + 1);
      std::uint64_t n = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), n);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        throw ParseError(l.number, "malformed header value");
      if (name == "N") {
        table.total_bigrams = n;
        have_total = true;
      } else if (name == "min_count") {
        table.min_count = n;
      }
      return;
    }
    const auto fields = detail::split_tabs(l.text);
    if (fields.size() != 2) throw ParseError(l.number, "expected <pair>\\t<pmi>");
    const auto pair = utf8::decode(fields[0], l.offset);
    if (pair.size() != 2) throw ParseError(l.number, "pair must be exactly two characters");
    const auto v = detail::parse_double(fields[1]);
    if (!v || !std::isfinite(*v)) throw ParseError(l.number, "malformed PMI value");
    table.pmi[PmiTable::key(pair[0], pair[1])] = *v;
  });
  if (!have_total && !table.pmi.empty()) throw ParseError(1, "missing #N= header");
  return table;
}

// ---------------------------------------------------------------------------

// Everything the feature extractor may consult. Members are shared and
// immutable once loaded.
struct LexiconSet {
  std::shared_ptr<const RhymeDictionary> guangyun;
  std::shared_ptr<const RhymeDictionary> pingshuiyun;
  std::shared_ptr<const EntityLexicon> entities;
  std::shared_ptr<const PmiTable> pmi;

  const RhymeDictionary* rhyme(RhymeSource s) const {
    return s == RhymeSource::Guangyun ? guangyun.get() : pingshuiyun.get();
  }
};

}  // namespace gujiseg
