#pragma once

// Metrics for the M class, repeated random holdout splits and the experiment
// loop that ties corpus, features and CRF together.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gujiseg/corpus.hpp"
#include "gujiseg/crf.hpp"
#include "gujiseg/error.hpp"
#include "gujiseg/features.hpp"
#include "gujiseg/lexicons.hpp"
#include "gujiseg/pipeline.hpp"

namespace gujiseg {

struct Metrics {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0, item_accuracy = 0.0;

  std::uint64_t total() const { return tp + fp + fn + tn; }

  static double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

  static Metrics from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                             std::uint64_t tn) {
    Metrics m{tp, fp, fn, tn};
    const auto ratio = [](std::uint64_t a, std::uint64_t b) {
      return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
    };
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = harmonic(m.precision, m.recall);
    m.item_accuracy = ratio(tp + tn, m.total());
    return m;
  }
};

// Micro-averaged over every position of every sequence; M is the positive class.
inline Metrics evaluate(const std::vector<std::vector<Label>>& gold,
                        const std::vector<std::vector<Label>>& pred) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("gold and predicted corpora differ in sequence count");
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size())
      throw std::invalid_argument("sequence " + std::to_string(i) + " differs in length");
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      const bool g = gold[i][t] == Label::M;
      const bool p = pred[i][t] == Label::M;
      tp += g && p;
      fp += !g && p;
      fn += g && !p;
      tn += !g && !p;
    }
  }
  return Metrics::from_counts(tp, fp, fn, tn);
}

inline Metrics evaluate(const std::vector<LabeledSequence>& gold,
                        const std::vector<std::vector<Label>>& pred) {
  std::vector<std::vector<Label>> g;
  g.reserve(gold.size());
  for (const auto& s : gold) g.push_back(s.labels);
  return evaluate(g, pred);
}

struct SplitSpec {
  double train_ratio = 0.7;
  std::uint64_t seed = 0;
  std::size_t repetitions = 3;

  void validate() const {
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train ratio must be in (0, 1)");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  }
};

namespace detail {

inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return v % bound;
}

}  // namespace detail

// Train/test index partition for one trial. The permutation depends on
// (seed, trial) only; the training side gets ceil(ratio * n) documents,
// clamped so that both sides are non-empty.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, const SplitSpec& spec, std::size_t trial) {
  spec.validate();
  if (trial >= spec.repetitions)
    throw SplitError("trial " + std::to_string(trial) + " outside repetitions " +
                     std::to_string(spec.repetitions));
  if (n < 2) throw SplitError("need at least 2 documents to split, got " + std::to_string(n));
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[detail::uniform_below(rng, i + 1)]);
  auto n_train = static_cast<std::size_t>(std::ceil(spec.train_ratio * static_cast<double>(n) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

// Document-level split; both sides keep the input order.
template <typename Doc>
std::pair<std::vector<Doc>, std::vector<Doc>> split(const std::vector<Doc>& docs,
                                                    const SplitSpec& spec, std::size_t trial) {
  const auto [tr, te] = split_indices(docs.size(), spec, trial);
  std::pair<std::vector<Doc>, std::vector<Doc>> out;
  for (const auto i : tr) out.first.push_back(docs[i]);
  for (const auto i : te) out.second.push_back(docs[i]);
  return out;
}

struct ExperimentResult {
  FeatureConfig features;
  std::vector<Metrics> trials;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_item_accuracy = 0.0;
  // F1 of the mean precision and mean recall.
  double f1_of_means = 0.0;
  // Arithmetic mean of per-trial F1.
  double mean_f1 = 0.0;
};

inline ExperimentResult summarize(FeatureConfig features, std::vector<Metrics> trials) {
  ExperimentResult r;
  r.features = features;
  r.trials = std::move(trials);
  const double n = static_cast<double>(r.trials.size());
  for (const auto& m : r.trials) {
    r.mean_precision += m.precision;
    r.mean_recall += m.recall;
    r.mean_item_accuracy += m.item_accuracy;
    r.mean_f1 += m.f1;
  }
  if (n > 0) {
    r.mean_precision /= n;
    r.mean_recall /= n;
    r.mean_item_accuracy /= n;
    r.mean_f1 /= n;
  }
  r.f1_of_means = Metrics::harmonic(r.mean_precision, r.mean_recall);
  return r;
}

struct ExperimentOptions {
  std::uint64_t pmi_min_count = 5;
  // Progress messages; ignored when empty.
  std::function<void(const std::string&)> log;
};

// For every trial: split, featurize (a missing PMI table is built from the
// training side only), train, decode the test side and evaluate.
inline ExperimentResult run_experiment(const std::vector<LabeledSequence>& docs,
                                       const FeatureConfig& features, const TrainConfig& train_cfg,
                                       const SplitSpec& split_spec, const LexiconSet& lexicons,
                                       const ExperimentOptions& opts = {}) {
  split_spec.validate();
  train_cfg.validate();
  std::vector<Metrics> trials;
  for (std::size_t trial = 0; trial < split_spec.repetitions; ++trial) {
    auto [train_set, test_set] = split(docs, split_spec, trial);
    LexiconSet lex = lexicons;
    if (features.use_pmi && !lex.pmi) {
      lex.pmi = std::make_shared<const PmiTable>(build_pmi_table(train_set, opts.pmi_min_count));
      if (opts.log)
        opts.log("trial " + std::to_string(trial) + ": built PMI table from training split (" +
                 std::to_string(lex.pmi->size()) + " pairs)");
    }
    const FeatureExtractor fx(features, lex);
    const CrfModel model = train_segmenter(train_set, fx, train_cfg);
    const auto pred = predict_all(model, fx, test_set);
    trials.push_back(evaluate(test_set, pred));
    if (opts.log) {
      const auto& m = trials.back();
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "%s k=%d trial %zu: %zu iterations (%s), P=%.4f R=%.4f F1=%.4f acc=%.4f",
                    features.name().c_str(), features.k, trial, model.meta.iterations,
                    model.meta.stop_reason.c_str(), m.precision, m.recall, m.f1, m.item_accuracy);
      opts.log(buf);
    }
  }
  return summarize(features, std::move(trials));
}

// ---------------------------------------------------------------------------
// Results CSV. First line is a `#` comment naming the schema version and the
// run id of the manifest that produced the file.

inline constexpr std::string_view kResultsSchema = "gujiseg-results-v1";
inline constexpr std::string_view kResultsHeader =
    "trial,k,features,precision,recall,f1,item_accuracy,f1_trials_mean";

namespace detail {
inline std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace detail

inline void write_results_header(std::ostream& out, std::string_view run_id) {
  out << "# " << kResultsSchema << " run=" << run_id << '\n' << kResultsHeader << '\n';
}

// Per-trial rows then one `mean` row, whose f1 is the F1 of the mean
// precision and recall and whose last column is the mean of per-trial F1.
inline void write_results_rows(std::ostream& out, const ExperimentResult& r) {
  using detail::fixed6;
  const std::string prefix = "," + std::to_string(r.features.k) + "," + r.features.name() + ",";
  for (std::size_t t = 0; t < r.trials.size(); ++t) {
    const auto& m = r.trials[t];
    out << t << prefix << fixed6(m.precision) << ',' << fixed6(m.recall) << ',' << fixed6(m.f1)
        << ',' << fixed6(m.item_accuracy) << ',' << fixed6(m.f1) << '\n';
  }
  out << "mean" << prefix << fixed6(r.mean_precision) << ',' << fixed6(r.mean_recall) << ','
      << fixed6(r.f1_of_means) << ',' << fixed6(r.mean_item_accuracy) << ',' << fixed6(r.mean_f1)
      << '\n';
}

}  // namespace gujiseg
