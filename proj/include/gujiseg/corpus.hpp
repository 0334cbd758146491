#pragma once

// Corpus ingestion: punctuated raw text -> per-character M/O label sequences.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <iterator>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gujiseg/error.hpp"
#include "gujiseg/utf8.hpp"

namespace gujiseg {

// Canonical label order is [O, M]; the numeric value doubles as the index
// into every per-label array in the library.
enum class Label : std::uint8_t { O = 0, M = 1 };

inline constexpr std::size_t kNumLabels = 2;

inline char label_char(Label l) { return l == Label::M ? 'M' : 'O'; }

inline Label parse_label(std::string_view s) {
  if (s == "M") return Label::M;
  if (s == "O") return Label::O;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

using CharSet = std::unordered_set<char32_t>;

struct Document {
  std::string id;
  std::u32string raw_text;
};

struct LabeledSequence {
  std::string doc_id;
  std::u32string chars;
  std::vector<Label> labels;

  std::size_t size() const { return chars.size(); }
  bool operator==(const LabeledSequence&) const = default;
};

struct CorpusStats {
  std::size_t doc_count = 0;
  std::size_t char_token_count = 0;
  std::size_t char_type_count = 0;
  std::size_t boundary_mark_count = 0;
  double mean_chars_per_doc = 0.0;
};

enum class CorpusFormat { Lines, Blocks };

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "lines") return CorpusFormat::Lines;
  if (name == "blocks") return CorpusFormat::Blocks;
  throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected lines|blocks)");
}

// Ideographic full stop, full-width comma, full-width semicolon.
inline CharSet default_boundary_set() { return {U'。', U'，', U'；'}; }

// Everything else that is punctuation or whitespace is dropped without
// creating a boundary.
inline CharSet default_discard_set() {
  return {U'、', U'：', U'？', U'！', U'「', U'」', U'『', U'』', U'“', U'”', U'‘', U'’',
          U'《', U'》', U'〈', U'〉', U'（', U'）', U'【', U'】', U'〔', U'〕', U'·', U'・',
          U'—', U'…', U'～', U'．', U'(', U')', U'[', U']', U'"', U'\'', U',', U'.',
          U';', U':', U'?', U'!', U'-', U' ', U'\t', U'\r', U'\n', U'　', U'﻿'};
}

inline CharSet make_charset(std::u32string_view chars) { return CharSet(chars.begin(), chars.end()); }

namespace detail {

inline bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

inline std::string pad_id(std::size_t n) {
  std::string s = std::to_string(n);
  if (s.size() < 4) s.insert(0, 4 - s.size(), '0');
  return s;
}

struct RawLine {
  std::string_view text;
  std::size_t offset;
  std::size_t number;
};

inline std::vector<RawLine> split_lines(std::string_view data) {
  std::vector<RawLine> lines;
  std::size_t pos = 0;
  std::size_t number = 1;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string_view::npos) end = data.size();
    std::string_view line = data.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({line, pos, number++});
    pos = end + 1;
  }
  return lines;
}

}  // namespace detail

// Reads every record of a UTF-8 corpus. `lines`: one record per non-blank
// line, id is the zero-padded line number. `blocks`: records separated by
// blank lines, an optional `#ID <token>` first line names the record,
// otherwise the zero-padded record ordinal is used.
inline std::vector<Document> parse_corpus(std::istream& in, CorpusFormat format) {
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (data.size() >= 3 && data.compare(0, 3, "\xEF\xBB\xBF") == 0)
    throw DecodeError(0, "byte order mark not allowed");

  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  auto add = [&](std::string id, std::u32string text, std::size_t line_no) {
    if (!seen.insert(id).second) throw ParseError(line_no, "duplicate record id '" + id + "'");
    docs.push_back({std::move(id), std::move(text)});
  };

  const auto lines = detail::split_lines(data);
  if (format == CorpusFormat::Lines) {
    for (const auto& l : lines) {
      if (detail::is_blank(l.text)) continue;
      add(detail::pad_id(l.number), utf8::decode(l.text, l.offset), l.number);
    }
    return docs;
  }

  std::size_t ordinal = 0;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (detail::is_blank(lines[i].text)) {
      ++i;
      continue;
    }
    ++ordinal;
    const std::size_t first_line = lines[i].number;
    std::string id = detail::pad_id(ordinal);
    if (lines[i].text.starts_with("#ID")) {
      std::string_view rest = lines[i].text.substr(3);
      while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
      while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t')) rest.remove_suffix(1);
      if (rest.empty()) throw ParseError(lines[i].number, "#ID header without a token");
      utf8::decode(rest, lines[i].offset);
      id = std::string(rest);
      ++i;
    }
    std::u32string body;
    bool first = true;
    for (; i < lines.size() && !detail::is_blank(lines[i].text); ++i) {
      if (!first) body.push_back(U'\n');
      body += utf8::decode(lines[i].text, lines[i].offset);
      first = false;
    }
    add(std::move(id), std::move(body), first_line);
  }
  return docs;
}

// Drops discard characters, turns boundary marks into an M label on the
// preceding kept character. Runs of marks collapse; marks with no preceding
// character are dropped.
inline LabeledSequence labelize(const Document& doc, const CharSet& boundary_set,
                                const CharSet& discard_set) {
  for (char32_t c : boundary_set)
    if (discard_set.contains(c))
      throw std::invalid_argument("boundary and discard sets overlap at U+" +
                                  std::to_string(static_cast<std::uint32_t>(c)));
  LabeledSequence seq;
  seq.doc_id = doc.id;
  seq.chars.reserve(doc.raw_text.size());
  seq.labels.reserve(doc.raw_text.size());
  for (char32_t c : doc.raw_text) {
    if (boundary_set.contains(c)) {
      if (!seq.labels.empty()) seq.labels.back() = Label::M;
    } else if (!discard_set.contains(c)) {
      seq.chars.push_back(c);
      seq.labels.push_back(Label::O);
    }
  }
  if (seq.chars.empty()) throw EmptySequenceError(doc.id);
  return seq;
}

inline LabeledSequence labelize(const Document& doc) {
  return labelize(doc, default_boundary_set(), default_discard_set());
}

// Inverse of labelize: the characters with `mark` after every M.
inline std::u32string render(std::u32string_view chars, const std::vector<Label>& labels,
                             char32_t mark) {
  std::u32string out;
  out.reserve(chars.size() * 2);
  for (std::size_t i = 0; i < chars.size(); ++i) {
    out.push_back(chars[i]);
    if (labels[i] == Label::M) out.push_back(mark);
  }
  return out;
}

// Keeps sequences strictly longer than min_length.
inline std::vector<LabeledSequence> filter_short(const std::vector<LabeledSequence>& docs,
                                                 std::size_t min_length) {
  std::vector<LabeledSequence> kept;
  std::copy_if(docs.begin(), docs.end(), std::back_inserter(kept),
               [&](const LabeledSequence& s) { return s.size() > min_length; });
  return kept;
}

inline CorpusStats corpus_stats(const std::vector<LabeledSequence>& docs) {
  CorpusStats st;
  std::unordered_set<char32_t> types;
  st.doc_count = docs.size();
  for (const auto& s : docs) {
    st.char_token_count += s.size();
    types.insert(s.chars.begin(), s.chars.end());
    st.boundary_mark_count += static_cast<std::size_t>(
        std::count(s.labels.begin(), s.labels.end(), Label::M));
  }
  st.char_type_count = types.size();
  if (st.doc_count > 0)
    st.mean_chars_per_doc =
        static_cast<double>(st.char_token_count) / static_cast<double>(st.doc_count);
  return st;
}

// Labeled-corpus file: optional `#ID <id>` line, then `<char>\t<M|O>` per
// character; sequences separated by one blank line.
inline void write_labeled_corpus(std::ostream& out, const std::vector<LabeledSequence>& docs) {
  bool first = true;
  for (const auto& s : docs) {
    if (!first) out << '\n';
    first = false;
    if (!s.doc_id.empty()) out << "#ID " << s.doc_id << '\n';
    for (std::size_t i = 0; i < s.size(); ++i)
      out << utf8::encode(s.chars[i]) << '\t' << label_char(s.labels[i]) << '\n';
  }
}

inline std::vector<LabeledSequence> read_labeled_corpus(std::istream& in) {
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<LabeledSequence> docs;
  LabeledSequence cur;
  std::size_t ordinal = 0;
  auto flush = [&] {
    if (cur.chars.empty()) {
      cur = {};
      return;
    }
    ++ordinal;
    if (cur.doc_id.empty()) cur.doc_id = detail::pad_id(ordinal);
    docs.push_back(std::move(cur));
    cur = {};
  };
  for (const auto& l : detail::split_lines(data)) {
    if (l.text.empty()) {
      flush();
      continue;
    }
    if (l.text.starts_with("#ID ")) {
      if (!cur.chars.empty()) throw ParseError(l.number, "#ID line inside a sequence");
      cur.doc_id = std::string(l.text.substr(4));
      continue;
    }
    const auto tab = l.text.find('\t');
    if (tab == std::string_view::npos) throw ParseError(l.number, "expected <char>\\t<M|O>");
    const auto ch = utf8::decode(l.text.substr(0, tab), l.offset);
    if (ch.size() != 1) throw ParseError(l.number, "expected exactly one character");
    const auto lab = l.text.substr(tab + 1);
    if (lab != "M" && lab != "O") throw ParseError(l.number, "label must be M or O");
    cur.chars.push_back(ch[0]);
    cur.labels.push_back(parse_label(lab));
  }
  flush();
  return docs;
}

}  // namespace gujiseg
