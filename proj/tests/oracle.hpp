#pragma once

// Test-only reference implementations: exhaustive enumeration over label
// sequences, a brute-force entity matcher and synthetic corpora with known
// segmentation rules. Nothing here calls the library's inference code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gujiseg/corpus.hpp"
#include "gujiseg/crf.hpp"
#include "gujiseg/lexicons.hpp"

namespace oracle {

using gujiseg::CrfModel;
using gujiseg::EncodedSequence;
using gujiseg::Label;

inline Label label_at(std::uint32_t mask, std::size_t t, std::size_t n) {
  return ((mask >> (n - 1 - t)) & 1u) ? Label::M : Label::O;
}

// Independent linear score straight from the weight accessors.
inline double brute_score(const CrfModel& m, const EncodedSequence& s, std::uint32_t mask) {
  const std::size_t n = s.size();
  long double total = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const Label y = label_at(mask, t, n);
    for (std::size_t j = s.offsets[t]; j < s.offsets[t + 1]; ++j) total += m.state_weight(s.attrs[j], y);
    if (t > 0) total += m.trans_weight(label_at(mask, t - 1, n), y);
  }
  return static_cast<double>(total);
}

struct Enumeration {
  double log_z = 0;
  std::vector<std::array<double, 2>> unary;
  std::vector<std::array<double, 4>> pairwise;
  std::vector<Label> argmax;
  double best = 0;
};

// Masks ascend in lexicographic order with O < M, so keeping the first strict
// maximum yields the earliest-O labeling among ties.
inline Enumeration enumerate(const CrfModel& m, const EncodedSequence& s) {
  const std::size_t n = s.size();
  const std::uint32_t count = 1u << n;
  std::vector<double> scores(count);
  double mx = -INFINITY;
  std::uint32_t best_mask = 0;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    scores[mask] = brute_score(m, s, mask);
    if (scores[mask] > mx) {
      mx = scores[mask];
      best_mask = mask;
    }
  }
  long double z = 0;
  for (double sc : scores) z += std::exp(static_cast<long double>(sc - mx));
  Enumeration e;
  e.log_z = mx + static_cast<double>(std::log(z));
  e.unary.assign(n, {0, 0});
  e.pairwise.assign(n > 0 ? n - 1 : 0, {0, 0, 0, 0});
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    const double p = static_cast<double>(std::exp(static_cast<long double>(scores[mask]) - e.log_z));
    for (std::size_t t = 0; t < n; ++t) {
      const auto y = static_cast<std::size_t>(label_at(mask, t, n));
      e.unary[t][y] += p;
      if (t + 1 < n) e.pairwise[t][y * 2 + static_cast<std::size_t>(label_at(mask, t + 1, n))] += p;
    }
  }
  for (std::size_t t = 0; t < n; ++t) e.argmax.push_back(label_at(best_mask, t, n));
  e.best = mx;
  return e;
}

inline CrfModel random_model(std::mt19937_64& rng, std::size_t num_attrs, double scale = 2.0) {
  gujiseg::AttributeIndex idx;
  for (std::size_t i = 0; i < num_attrs; ++i) idx.add("a" + std::to_string(i));
  CrfModel m(std::move(idx));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& w : m.weights()) w = u(rng);
  return m;
}

inline EncodedSequence random_sequence(std::mt19937_64& rng, std::size_t length,
                                       std::size_t num_attrs, bool with_labels = false) {
  EncodedSequence s;
  std::uniform_int_distribution<std::size_t> how_many(0, 3);
  std::uniform_int_distribution<std::uint32_t> which(0, static_cast<std::uint32_t>(num_attrs - 1));
  std::vector<std::uint32_t> ids;
  for (std::size_t t = 0; t < length; ++t) {
    ids.clear();
    const auto k = how_many(rng);
    for (std::size_t j = 0; j < k; ++j) {
      const auto a = which(rng);
      if (std::find(ids.begin(), ids.end(), a) == ids.end()) ids.push_back(a);
    }
    s.push_position(ids);
    if (with_labels) s.labels.push_back(rng() & 1 ? Label::M : Label::O);
  }
  return s;
}

// Every lexicon occurrence, then the greedy left-to-right longest-match rule
// applied over that list.
inline gujiseg::EntityTagSequence brute_tag(const std::u32string& chars,
                                            const gujiseg::EntityLexicon& lex) {
  using gujiseg::EntityTag;
  using gujiseg::SpanPos;
  struct Occ {
    std::size_t start, len;
    gujiseg::EntityType type;
  };
  std::vector<Occ> occ;
  for (const auto& [word, type] : lex.entries)
    for (std::size_t i = 0; i + word.size() <= chars.size(); ++i)
      if (chars.compare(i, word.size(), word) == 0) occ.push_back({i, word.size(), type});
  gujiseg::EntityTagSequence tags(chars.size());
  std::size_t i = 0;
  while (i < chars.size()) {
    const Occ* best = nullptr;
    for (const auto& o : occ)
      if (o.start == i && (!best || o.len > best->len)) best = &o;
    if (!best) {
      ++i;
      continue;
    }
    for (std::size_t j = 0; j < best->len; ++j) {
      SpanPos p = best->len == 1 ? SpanPos::S
                  : j == 0        ? SpanPos::B
                  : j + 1 == best->len ? SpanPos::E
                                       : SpanPos::I;
      tags[i + j] = EntityTag{best->type, p};
    }
    i += best->len;
  }
  return tags;
}

// Alphabet of distinct CJK ideographs starting at U+4E00.
inline std::u32string alphabet(std::size_t n) {
  std::u32string a;
  for (std::size_t i = 0; i < n; ++i) a.push_back(static_cast<char32_t>(0x4E00 + i * 7));
  return a;
}

// Sequences over `alphabet_size` characters where a mark follows exactly the
// designated character (alphabet[0]) and nothing else.
inline std::vector<gujiseg::LabeledSequence> designated_char_corpus(std::size_t n_seqs,
                                                                    std::size_t length,
                                                                    std::uint64_t seed,
                                                                    std::size_t alphabet_size = 40) {
  const auto abc = alphabet(alphabet_size);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, abc.size() - 1);
  std::vector<gujiseg::LabeledSequence> out;
  for (std::size_t i = 0; i < n_seqs; ++i) {
    gujiseg::LabeledSequence s;
    s.doc_id = "syn-" + std::to_string(i);
    for (std::size_t t = 0; t < length; ++t) {
      const char32_t c = abc[pick(rng)];
      s.chars.push_back(c);
      s.labels.push_back(c == abc[0] ? Label::M : Label::O);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// A mark follows position t exactly when the character two places to the
// right is the designated one; visible only with a window of at least 2.
inline std::vector<gujiseg::LabeledSequence> distance_two_corpus(std::size_t n_seqs,
                                                                 std::size_t length,
                                                                 std::uint64_t seed,
                                                                 std::size_t alphabet_size = 20) {
  const auto abc = alphabet(alphabet_size);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, abc.size() - 1);
  std::vector<gujiseg::LabeledSequence> out;
  for (std::size_t i = 0; i < n_seqs; ++i) {
    gujiseg::LabeledSequence s;
    s.doc_id = "d2-" + std::to_string(i);
    for (std::size_t t = 0; t < length; ++t) s.chars.push_back(abc[pick(rng)]);
    for (std::size_t t = 0; t < length; ++t)
      s.labels.push_back(t + 2 < length && s.chars[t + 2] == abc[0] ? Label::M : Label::O);
    out.push_back(std::move(s));
  }
  return out;
}

// Renders a labeled sequence back to punctuated text using `mark`.
inline std::string punctuated(const gujiseg::LabeledSequence& s, char32_t mark = U'，') {
  return gujiseg::utf8::encode(gujiseg::render(s.chars, s.labels, mark));
}

}  // namespace oracle
