#pragma once

// Feature templates. Each character position becomes a list of categorical
// attribute strings:
//
//   w[i]=X        unigram at offset i in [-k, k]
//   w[i_j]=XY     bigram of consecutive offsets i, j = i + 1 in [-k, k]
//   ry[i]=C       rhyme class C of the character at offset i
//   ne[0]=T-P     entity type T and span position P of the current character
//   pmi[-1_0]=B   binned PMI of the left and right pairs around the current
//   pmi[0_1]=B    character
//
// Offsets outside the sequence read as <BOS>/<EOS>.

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gujiseg/corpus.hpp"
#include "gujiseg/error.hpp"
#include "gujiseg/lexicons.hpp"
#include "gujiseg/utf8.hpp"

namespace gujiseg {

inline constexpr int kMaxSweptWindow = 10;

struct FeatureConfig {
  int k = 1;
  bool use_bigrams = false;
  std::optional<RhymeSource> pronunciation;
  // Restricts ry[] attributes to offset 0.
  bool pronunciation_current_only = false;
  bool use_words = false;
  bool use_pmi = false;

  bool operator==(const FeatureConfig&) const = default;

  // Throws on invalid settings; returns soft warnings.
  std::vector<std::string> validate() const {
    if (k < 0) throw ConfigError("window radius k must be >= 0");
    std::vector<std::string> warnings;
    if (k > kMaxSweptWindow)
      warnings.push_back("window radius k=" + std::to_string(k) + " exceeds " +
                         std::to_string(kMaxSweptWindow));
    return warnings;
  }

  // Comma-separated template list, e.g. "c,b,ry:guangyun,w,pmi".
  std::string spec() const {
    std::string s = "c";
    if (use_bigrams) s += ",b";
    if (pronunciation) {
      s += pronunciation_current_only ? ",ry0:" : ",ry:";
      s += rhyme_source_name(*pronunciation);
    }
    if (use_words) s += ",w";
    if (use_pmi) s += ",pmi";
    return s;
  }

  // Human-readable condition name, e.g. "C+B+Guangyun".
  std::string name() const {
    std::string s = "C";
    if (use_bigrams) s += "+B";
    if (pronunciation) {
      s += *pronunciation == RhymeSource::Guangyun ? "+Guangyun" : "+Pingshuiyun";
      if (pronunciation_current_only) s += "0";
    }
    if (use_words) s += "+W";
    if (use_pmi) s += "+PMI";
    return s;
  }
};

inline FeatureConfig parse_feature_spec(std::string_view spec, int k) {
  FeatureConfig cfg;
  cfg.k = k;
  bool unigrams = false;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto end = spec.find(',', start);
    if (end == std::string_view::npos) end = spec.size();
    const auto tok = spec.substr(start, end - start);
    start = end + 1;
    if (tok == "c") {
      unigrams = true;
    } else if (tok == "b") {
      cfg.use_bigrams = true;
    } else if (tok.starts_with("ry:") || tok.starts_with("ry0:")) {
      if (cfg.pronunciation) throw ConfigError("only one rhyme dictionary per feature set");
      cfg.pronunciation_current_only = tok.starts_with("ry0:");
      cfg.pronunciation = parse_rhyme_source(tok.substr(tok.find(':') + 1));
    } else if (tok == "w") {
      cfg.use_words = true;
    } else if (tok == "pmi") {
      cfg.use_pmi = true;
    } else {
      throw ConfigError("unknown feature template '" + std::string(tok) + "'");
    }
    if (end == spec.size()) break;
  }
  if (!unigrams) throw ConfigError("feature set must include the unigram template 'c'");
  cfg.validate();
  return cfg;
}

struct Instance {
  std::optional<Label> label;
  std::vector<std::string> attributes;

  bool operator==(const Instance&) const = default;
};

// Binds a configuration to its resources and emits attributes in canonical
// order: unigrams by offset, bigrams by offset, pronunciation, word, PMI.
class FeatureExtractor {
 public:
  FeatureExtractor(FeatureConfig cfg, LexiconSet lex) : cfg_(cfg), lex_(std::move(lex)) {
    cfg_.validate();
    if (cfg_.pronunciation && !lex_.rhyme(*cfg_.pronunciation))
      throw ConfigError("feature set needs the " +
                        std::string(rhyme_source_name(*cfg_.pronunciation)) +
                        " rhyme dictionary (--rhyme-dict)");
    if (cfg_.use_words && !lex_.entities)
      throw ConfigError("feature set needs an entity lexicon (--lexicon)");
    if (cfg_.use_pmi && !lex_.pmi) throw ConfigError("feature set needs a PMI table");
  }

  const FeatureConfig& config() const { return cfg_; }
  const LexiconSet& lexicons() const { return lex_; }

  // Per-sequence state that attributes at any position may depend on.
  EntityTagSequence prepare(std::u32string_view seq) const {
    if (!cfg_.use_words) return {};
    return tag_entities(seq, *lex_.entities);
  }

  void extract(std::u32string_view seq, const EntityTagSequence& tags, std::size_t pos,
               std::vector<std::string>& out) const {
    if (pos >= seq.size())
      throw std::out_of_range("position " + std::to_string(pos) + " outside sequence of length " +
                              std::to_string(seq.size()));
    out.clear();
    const int k = cfg_.k;
    const auto n = static_cast<long>(seq.size());
    const auto p = static_cast<long>(pos);
    auto token = [&](long i) -> std::string {
      const long at = p + i;
      if (at < 0) return "<BOS>";
      if (at >= n) return "<EOS>";
      return utf8::encode(seq[static_cast<std::size_t>(at)]);
    };

    for (long i = -k; i <= k; ++i) out.push_back("w[" + std::to_string(i) + "]=" + token(i));

    if (cfg_.use_bigrams)
      for (long i = -k; i < k; ++i)
        out.push_back("w[" + std::to_string(i) + "_" + std::to_string(i + 1) + "]=" + token(i) +
                      token(i + 1));

    if (cfg_.pronunciation) {
      const RhymeDictionary& dict = *lex_.rhyme(*cfg_.pronunciation);
      const long lo = cfg_.pronunciation_current_only ? 0 : -k;
      const long hi = cfg_.pronunciation_current_only ? 0 : k;
      for (long i = lo; i <= hi; ++i) {
        const long at = p + i;
        if (at < 0 || at >= n) continue;
        if (const auto* classes = dict.classes(seq[static_cast<std::size_t>(at)]))
          for (const auto& c : *classes) out.push_back("ry[" + std::to_string(i) + "]=" + c);
      }
    }

    if (cfg_.use_words && tags[pos]) out.push_back("ne[0]=" + entity_tag_name(*tags[pos]));

    if (cfg_.use_pmi) {
      const PmiTable& table = *lex_.pmi;
      std::optional<double> left, right;
      if (pos > 0) left = table.lookup(seq[pos - 1], seq[pos]);
      if (pos + 1 < seq.size()) right = table.lookup(seq[pos], seq[pos + 1]);
      out.push_back("pmi[-1_0]=" + std::string(pmi_bin(left)));
      out.push_back("pmi[0_1]=" + std::string(pmi_bin(right)));
    }
  }

  std::vector<std::vector<std::string>> extract_all(std::u32string_view seq) const {
    const auto tags = prepare(seq);
    std::vector<std::vector<std::string>> attrs(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) extract(seq, tags, i, attrs[i]);
    return attrs;
  }

  std::vector<Instance> instances(const LabeledSequence& seq) const {
    auto attrs = extract_all(seq.chars);
    std::vector<Instance> out(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      out[i].label = seq.labels[i];
      out[i].attributes = std::move(attrs[i]);
    }
    return out;
  }

 private:
  FeatureConfig cfg_;
  LexiconSet lex_;
};

inline std::vector<std::string> extract_features(std::u32string_view seq, std::size_t pos,
                                                 const FeatureConfig& cfg, const LexiconSet& lex) {
  const FeatureExtractor fx(cfg, lex);
  std::vector<std::string> out;
  fx.extract(seq, fx.prepare(seq), pos, out);
  return out;
}

inline std::vector<Instance> extract_instances(const LabeledSequence& seq,
                                               const FeatureConfig& cfg, const LexiconSet& lex) {
  return FeatureExtractor(cfg, lex).instances(seq);
}

// ---------------------------------------------------------------------------
// Instance text format: `<label>\t<attr>\t<attr>...` per line, blank line
// between sequences. `?` marks an unlabeled instance. Backslash, tab and
// newline inside attributes are escaped as \\, \t and \n.

namespace detail {

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
  return out;
}

inline std::optional<std::string> unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (++i == s.size()) return std::nullopt;
    switch (s[i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      default: return std::nullopt;
    }
  }
  return out;
}

}  // namespace detail

inline void write_instances(std::ostream& out, std::span<const Instance> instances) {
  for (const auto& inst : instances) {
    out << (inst.label ? label_char(*inst.label) : '?');
    for (const auto& a : inst.attributes) out << '\t' << detail::escape_field(a);
    out << '\n';
  }
}

inline void write_instance_sequences(std::ostream& out,
                                     const std::vector<std::vector<Instance>>& seqs) {
  bool first = true;
  for (const auto& s : seqs) {
    if (!first) out << '\n';
    first = false;
    write_instances(out, s);
  }
}

inline std::vector<std::vector<Instance>> read_instance_sequences(std::istream& in) {
  std::vector<std::vector<Instance>> seqs;
  std::vector<Instance> cur;
  detail::for_each_line(in, [&](const detail::RawLine& l) {
    if (l.text.empty()) {
      if (!cur.empty()) seqs.push_back(std::move(cur));
      cur.clear();
      return;
    }
    const auto fields = detail::split_tabs(l.text);
    Instance inst;
    if (fields[0] == "M") inst.label = Label::M;
    else if (fields[0] == "O") inst.label = Label::O;
    else if (fields[0] != "?") throw ParseError(l.number, "label field must be M, O or ?");
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto a = detail::unescape_field(fields[i]);
      if (!a || a->empty()) throw ParseError(l.number, "malformed attribute field");
      inst.attributes.push_back(std::move(*a));
    }
    cur.push_back(std::move(inst));
  });
  if (!cur.empty()) seqs.push_back(std::move(cur));
  return seqs;
}

inline std::vector<Instance> read_instances(std::istream& in) {
  std::vector<Instance> flat;
  for (auto& s : read_instance_sequences(in))
    for (auto& i : s) flat.push_back(std::move(i));
  return flat;
}

}  // namespace gujiseg
