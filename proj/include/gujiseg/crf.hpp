#pragma once

// Linear-chain CRF over the two labels [O, M].
//
// Parameters live in one flat vector: state weights first, laid out as
// [attribute * 2 + label], then the four transition weights laid out as
// [from * 2 + to]. Gradients use the same layout. All inference runs in log
// space.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gujiseg/corpus.hpp"
#include "gujiseg/error.hpp"
#include "gujiseg/features.hpp"
#include "gujiseg/lexicons.hpp"
#include "gujiseg/parallel.hpp"

namespace gujiseg {

inline constexpr std::array<Label, kNumLabels> kLabels = {Label::O, Label::M};

inline constexpr std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }

class AttributeIndex {
 public:
  std::optional<std::uint32_t> find(const std::string& name) const {
    const auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t add(const std::string& name) {
    const auto [it, inserted] = ids_.emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }

  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> names_;
};

// Attribute ids per position in CSR form. Attributes unknown to the model are
// dropped at encoding time, which is the same as giving them zero weight.
struct EncodedSequence {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> attrs;
  std::vector<Label> labels;

  std::size_t size() const { return offsets.size() - 1; }

  std::span<const std::uint32_t> at(std::size_t t) const {
    return {attrs.data() + offsets[t], attrs.data() + offsets[t + 1]};
  }

  void push_position(std::span<const std::uint32_t> ids) {
    attrs.insert(attrs.end(), ids.begin(), ids.end());
    offsets.push_back(static_cast<std::uint32_t>(attrs.size()));
  }
};

struct TrainConfig {
  double l2_sigma = 1.0;
  std::size_t max_iterations = 200;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(l2_sigma > 0.0) || !std::isfinite(l2_sigma)) throw ConfigError("l2_sigma must be > 0");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  }
};

struct TrainingRecord {
  std::size_t iterations = 0;
  double final_objective = 0.0;
  std::uint64_t seed = 0;
  std::string stop_reason;
  // Objective after every accepted step, starting with the initial point.
  // Kept in memory only.
  std::vector<double> objective_trace;
};

class CrfModel {
 public:
  CrfModel() : weights_(2 * kNumLabels, 0.0) {}
  explicit CrfModel(AttributeIndex index)
      : index_(std::move(index)), weights_(kNumLabels * index_.size() + kNumLabels * kNumLabels, 0.0) {}

  const AttributeIndex& attributes() const { return index_; }
  std::size_t num_attributes() const { return index_.size(); }

  double state_weight(std::uint32_t attr, Label y) const { return weights_[attr * kNumLabels + label_index(y)]; }
  double& state_weight(std::uint32_t attr, Label y) { return weights_[attr * kNumLabels + label_index(y)]; }
  double trans_weight(Label from, Label to) const { return weights_[trans_offset(from, to)]; }
  double& trans_weight(Label from, Label to) { return weights_[trans_offset(from, to)]; }

  std::span<const double> weights() const { return weights_; }
  std::span<double> weights() { return weights_; }

  EncodedSequence encode(const std::vector<std::vector<std::string>>& attrs) const {
    EncodedSequence seq;
    std::vector<std::uint32_t> ids;
    for (const auto& pos : attrs) {
      ids.clear();
      for (const auto& a : pos)
        if (const auto id = index_.find(a)) ids.push_back(*id);
      seq.push_position(ids);
    }
    return seq;
  }

  FeatureConfig config;
  TrainingRecord meta;

 private:
  std::size_t trans_offset(Label from, Label to) const {
    return kNumLabels * index_.size() + kNumLabels * label_index(from) + label_index(to);
  }

  AttributeIndex index_;
  std::vector<double> weights_;
};

namespace detail {

using LabelScores = std::array<double, kNumLabels>;

struct WeightView {
  std::span<const double> w;
  std::size_t num_attrs;

  double state(std::uint32_t a, std::size_t y) const { return w[a * kNumLabels + y]; }
  double trans(std::size_t from, std::size_t to) const {
    return w[kNumLabels * num_attrs + kNumLabels * from + to];
  }
};

inline WeightView view(const CrfModel& m) { return {m.weights(), m.num_attributes()}; }

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

inline void state_scores(WeightView w, const EncodedSequence& s, std::vector<LabelScores>& out) {
  out.resize(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    LabelScores sc{0.0, 0.0};
    for (const auto a : s.at(t))
      for (std::size_t y = 0; y < kNumLabels; ++y) sc[y] += w.state(a, y);
    out[t] = sc;
  }
}

inline void require_nonempty(std::size_t length) {
  if (length == 0) throw std::invalid_argument("sequence must have at least one position");
}

struct ForwardBackward {
  std::vector<LabelScores> state;
  std::vector<LabelScores> alpha;
  std::vector<LabelScores> beta;
  double log_z = 0.0;

  void run(WeightView w, const EncodedSequence& s) {
    require_nonempty(s.size());
    state_scores(w, s, state);
    const std::size_t n = s.size();
    alpha.resize(n);
    beta.resize(n);
    alpha[0] = state[0];
    for (std::size_t t = 1; t < n; ++t)
      for (std::size_t y = 0; y < kNumLabels; ++y)
        alpha[t][y] = state[t][y] + log_add(alpha[t - 1][0] + w.trans(0, y),
                                            alpha[t - 1][1] + w.trans(1, y));
    beta[n - 1] = {0.0, 0.0};
    for (std::size_t t = n - 1; t-- > 0;)
      for (std::size_t y = 0; y < kNumLabels; ++y)
        beta[t][y] = log_add(w.trans(y, 0) + state[t + 1][0] + beta[t + 1][0],
                             w.trans(y, 1) + state[t + 1][1] + beta[t + 1][1]);
    log_z = log_add(alpha[n - 1][0], alpha[n - 1][1]);
  }

  LabelScores unary(std::size_t t) const {
    return {std::exp(alpha[t][0] + beta[t][0] - log_z), std::exp(alpha[t][1] + beta[t][1] - log_z)};
  }

  // Edge t joins positions t and t + 1; index [from * 2 + to].
  std::array<double, 4> pairwise(WeightView w, std::size_t t) const {
    std::array<double, 4> p{};
    for (std::size_t a = 0; a < kNumLabels; ++a)
      for (std::size_t b = 0; b < kNumLabels; ++b)
        p[a * kNumLabels + b] =
            std::exp(alpha[t][a] + w.trans(a, b) + state[t + 1][b] + beta[t + 1][b] - log_z);
    return p;
  }
};

inline double score(WeightView w, const EncodedSequence& s, std::span<const Label> labels) {
  if (labels.size() != s.size())
    throw std::invalid_argument("label sequence length does not match attribute sequence");
  require_nonempty(s.size());
  double total = 0.0;
  for (std::size_t t = 0; t < s.size(); ++t) {
    const auto y = label_index(labels[t]);
    for (const auto a : s.at(t)) total += w.state(a, y);
    if (t > 0) total += w.trans(label_index(labels[t - 1]), y);
  }
  return total;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inference

inline double score_sequence(const CrfModel& model, const EncodedSequence& seq,
                             std::span<const Label> labels) {
  return detail::score(detail::view(model), seq, labels);
}

inline double score_sequence(const CrfModel& model,
                             const std::vector<std::vector<std::string>>& attrs,
                             std::span<const Label> labels) {
  if (attrs.size() != labels.size())
    throw std::invalid_argument("attribute and label sequences differ in length");
  return score_sequence(model, model.encode(attrs), labels);
}

inline double log_partition(const CrfModel& model, const EncodedSequence& seq) {
  detail::ForwardBackward fb;
  fb.run(detail::view(model), seq);
  return fb.log_z;
}

inline double log_partition(const CrfModel& model,
                            const std::vector<std::vector<std::string>>& attrs) {
  return log_partition(model, model.encode(attrs));
}

struct Marginals {
  // unary[t][label]
  std::vector<std::array<double, kNumLabels>> unary;
  // pairwise[t][from * 2 + to] for the edge between t and t + 1
  std::vector<std::array<double, kNumLabels * kNumLabels>> pairwise;
  double log_z = 0.0;
};

inline Marginals marginals(const CrfModel& model, const EncodedSequence& seq) {
  const auto w = detail::view(model);
  detail::ForwardBackward fb;
  fb.run(w, seq);
  Marginals m;
  m.log_z = fb.log_z;
  m.unary.resize(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) m.unary[t] = fb.unary(t);
  m.pairwise.resize(seq.size() - 1);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) m.pairwise[t] = fb.pairwise(w, t);
  return m;
}

inline Marginals marginals(const CrfModel& model,
                           const std::vector<std::vector<std::string>>& attrs) {
  return marginals(model, model.encode(attrs));
}

struct ViterbiResult {
  std::vector<Label> labels;
  double score = 0.0;
};

namespace detail {
// Scores this close are ties. Rounding in different summation orders can
// otherwise make one of two mathematically equal labelings look larger.
inline constexpr double kTieTolerance = 1e-12;

inline bool strictly_better(double m, double o) {
  return m > o + kTieTolerance * std::max({1.0, std::abs(o), std::abs(m)});
}
}  // namespace detail

// MAP labeling. Among equally scored labelings the one that prefers O at
// the earliest differing position wins.
inline ViterbiResult viterbi(const CrfModel& model, const EncodedSequence& seq) {
  const auto w = detail::view(model);
  detail::require_nonempty(seq.size());
  std::vector<detail::LabelScores> state;
  detail::state_scores(w, seq, state);
  const std::size_t n = seq.size();
  // best[t][y]: best score of positions t..n-1 given label y at t.
  std::vector<detail::LabelScores> best(n);
  best[n - 1] = state[n - 1];
  for (std::size_t t = n - 1; t-- > 0;)
    for (std::size_t y = 0; y < kNumLabels; ++y)
      best[t][y] = state[t][y] + std::max(w.trans(y, 0) + best[t + 1][0],
                                          w.trans(y, 1) + best[t + 1][1]);
  ViterbiResult r;
  r.labels.resize(n);
  std::size_t prev = detail::strictly_better(best[0][1], best[0][0]) ? 1 : 0;
  r.labels[0] = kLabels[prev];
  for (std::size_t t = 1; t < n; ++t) {
    const double o = w.trans(prev, 0) + best[t][0];
    const double m = w.trans(prev, 1) + best[t][1];
    prev = detail::strictly_better(m, o) ? 1 : 0;
    r.labels[t] = kLabels[prev];
  }
  r.score = detail::score(w, seq, r.labels);
  return r;
}

inline ViterbiResult viterbi(const CrfModel& model,
                             const std::vector<std::vector<std::string>>& attrs) {
  return viterbi(model, model.encode(attrs));
}

// ---------------------------------------------------------------------------
// Training objective: penalized conditional log-likelihood
//   sum_s [score(x_s, y_s) - log Z(x_s)] - |w|^2 / (2 sigma^2)
// and its gradient (observed - expected counts - w / sigma^2).

struct ObjectiveValue {
  double objective = 0.0;
  std::vector<double> gradient;
};

class CrfObjective {
 public:
  CrfObjective(std::span<const EncodedSequence> data, std::size_t num_attrs, double l2_sigma)
      : data_(data), num_attrs_(num_attrs), sigma_(l2_sigma) {
    if (data_.empty()) throw std::invalid_argument("training dataset is empty");
    if (!(l2_sigma > 0.0)) throw std::invalid_argument("l2_sigma must be > 0");
    empirical_.assign(dimension(), 0.0);
    pos_offset_.reserve(data_.size() + 1);
    pos_offset_.push_back(0);
    for (const auto& s : data_) {
      if (s.labels.size() != s.size())
        throw std::invalid_argument("training sequence without a full label sequence");
      detail::require_nonempty(s.size());
      for (std::size_t t = 0; t < s.size(); ++t) {
        const auto y = label_index(s.labels[t]);
        for (const auto a : s.at(t)) {
          if (a >= num_attrs_) throw std::out_of_range("attribute id outside the model");
          empirical_[a * kNumLabels + y] += 1.0;
        }
        if (t > 0) empirical_[trans_base() + kNumLabels * label_index(s.labels[t - 1]) + y] += 1.0;
      }
      pos_offset_.push_back(pos_offset_.back() + s.size());
    }
  }

  std::size_t dimension() const { return kNumLabels * num_attrs_ + kNumLabels * kNumLabels; }

  // Writes the gradient into `grad` and returns the objective. The result is
  // bit-identical for any thread count: per-sequence work is independent and
  // every reduction runs serially in sequence order.
  double evaluate(std::span<const double> weights, std::span<double> grad) const {
    if (weights.size() != dimension() || grad.size() != dimension())
      throw std::invalid_argument("weight vector has the wrong dimension");
    const detail::WeightView w{weights, num_attrs_};
    std::vector<detail::LabelScores> unary(pos_offset_.back());
    std::vector<std::array<double, 4>> pair_sum(data_.size());
    std::vector<double> log_z(data_.size());

    parallel_for(data_.size(), [&](std::size_t i) {
      thread_local detail::ForwardBackward fb;
      const auto& s = data_[i];
      fb.run(w, s);
      log_z[i] = fb.log_z;
      for (std::size_t t = 0; t < s.size(); ++t) unary[pos_offset_[i] + t] = fb.unary(t);
      std::array<double, 4> acc{};
      for (std::size_t t = 0; t + 1 < s.size(); ++t) {
        const auto p = fb.pairwise(w, t);
        for (std::size_t k = 0; k < 4; ++k) acc[k] += p[k];
      }
      pair_sum[i] = acc;
    });

    const double inv_var = 1.0 / (sigma_ * sigma_);
    double objective = 0.0;
    double penalty = 0.0;
    for (std::size_t j = 0; j < dimension(); ++j) {
      objective += weights[j] * empirical_[j];
      penalty += weights[j] * weights[j];
      grad[j] = empirical_[j] - weights[j] * inv_var;
    }
    for (const double z : log_z) objective -= z;
    objective -= 0.5 * penalty * inv_var;

    for (std::size_t i = 0; i < data_.size(); ++i) {
      const auto& s = data_[i];
      for (std::size_t t = 0; t < s.size(); ++t) {
        const auto& u = unary[pos_offset_[i] + t];
        for (const auto a : s.at(t)) {
          grad[a * kNumLabels] -= u[0];
          grad[a * kNumLabels + 1] -= u[1];
        }
      }
      for (std::size_t k = 0; k < 4; ++k) grad[trans_base() + k] -= pair_sum[i][k];
    }
    if (!std::isfinite(objective)) throw NumericError("objective is not finite");
    return objective;
  }

  ObjectiveValue evaluate(std::span<const double> weights) const {
    ObjectiveValue v;
    v.gradient.resize(dimension());
    v.objective = evaluate(weights, v.gradient);
    return v;
  }

 private:
  std::size_t trans_base() const { return kNumLabels * num_attrs_; }

  std::span<const EncodedSequence> data_;
  std::size_t num_attrs_;
  double sigma_;
  std::vector<double> empirical_;
  std::vector<std::size_t> pos_offset_;
};

inline ObjectiveValue objective_and_gradient(const CrfModel& model,
                                             std::span<const EncodedSequence> dataset,
                                             double l2_sigma) {
  return CrfObjective(dataset, model.num_attributes(), l2_sigma).evaluate(model.weights());
}

// ---------------------------------------------------------------------------
// Optimizer

// Fills the gradient and returns the objective (to be maximized).
using ObjectiveFn = std::function<double(std::span<const double>, std::span<double>)>;

// Full-batch gradient ascent. Each iteration backtracks from a
// Barzilai-Borwein step length until the Armijo condition holds, so every
// accepted step strictly increases the objective. Convergence compares the
// objective with its value kConvergencePeriod iterations earlier, so a single
// short step after heavy backtracking does not end training.
inline constexpr std::size_t kConvergencePeriod = 10;

inline TrainingRecord gradient_ascent(const ObjectiveFn& fn, std::vector<double>& x,
                                      const TrainConfig& cfg) {
  cfg.validate();
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  const std::size_t dim = x.size();

  TrainingRecord rec;
  rec.seed = cfg.seed;
  std::vector<double> g(dim), x_new(dim), g_new(dim);
  double f = 0.0;
  try {
    f = fn(x, g);
  } catch (const NumericError& e) {
    throw TrainingError(std::string("objective diverged at the initial point: ") + e.what());
  }
  rec.objective_trace.push_back(f);
  const auto dot = [](std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };
  double gg = dot(g, g);
  double step = gg > 0.0 ? 1.0 / std::sqrt(gg) : 0.0;
  rec.stop_reason = "max-iterations";

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    if (gg == 0.0) {
      rec.stop_reason = "converged";
      break;
    }
    bool accepted = false;
    bool diverged = false;
    double alpha = step;
    double f_new = 0.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, alpha *= 0.5) {
      for (std::size_t j = 0; j < dim; ++j) x_new[j] = x[j] + alpha * g[j];
      try {
        f_new = fn(x_new, g_new);
        diverged = false;
      } catch (const NumericError&) {
        diverged = true;
        continue;
      }
      if (f_new >= f + kArmijo * alpha * gg && f_new > f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (diverged) throw TrainingError("objective diverged during line search");
      rec.stop_reason = "no-progress";
      break;
    }
    double sy = 0.0, ss = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double s = x_new[j] - x[j];
      sy += s * (g_new[j] - g[j]);
      ss += s * s;
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    gg = dot(g, g);
    step = sy < 0.0 ? ss / -sy : 2.0 * alpha;
    ++rec.iterations;
    rec.objective_trace.push_back(f);
    const auto& trace = rec.objective_trace;
    const double past = trace[trace.size() - 1 - std::min(kConvergencePeriod, rec.iterations)];
    const double rel = (f - past) / std::max({std::abs(f), std::abs(past), 1.0});
    if (rec.iterations >= kConvergencePeriod && rel < cfg.tolerance) {
      rec.stop_reason = "converged";
      break;
    }
  }
  rec.final_objective = f;
  return rec;
}

// Trains weights for an already encoded dataset whose attribute ids come from
// `index`.
inline CrfModel train_encoded(std::span<const EncodedSequence> dataset, AttributeIndex index,
                              const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  CrfModel model(std::move(index));
  const CrfObjective objective(dataset, model.num_attributes(), cfg.l2_sigma);
  std::vector<double> x(model.weights().begin(), model.weights().end());
  model.meta = gradient_ascent(
      [&](std::span<const double> w, std::span<double> g) { return objective.evaluate(w, g); }, x,
      cfg);
  std::copy(x.begin(), x.end(), model.weights().begin());
  return model;
}

// Accumulates an attribute index while encoding labeled sequences.
class DatasetBuilder {
 public:
  void add(const std::vector<std::vector<std::string>>& attrs, std::vector<Label> labels) {
    if (attrs.size() != labels.size())
      throw std::invalid_argument("attribute and label sequences differ in length");
    if (attrs.empty()) throw std::invalid_argument("training sequence is empty");
    EncodedSequence seq;
    std::vector<std::uint32_t> ids;
    for (const auto& pos : attrs) {
      ids.clear();
      for (const auto& a : pos) ids.push_back(index_.add(a));
      seq.push_position(ids);
    }
    seq.labels = std::move(labels);
    data_.push_back(std::move(seq));
  }

  void add(const std::vector<Instance>& instances) {
    std::vector<std::vector<std::string>> attrs;
    std::vector<Label> labels;
    for (const auto& inst : instances) {
      if (!inst.label) throw std::invalid_argument("training instance without a label");
      attrs.push_back(inst.attributes);
      labels.push_back(*inst.label);
    }
    add(attrs, std::move(labels));
  }

  const std::vector<EncodedSequence>& data() const { return data_; }
  const AttributeIndex& index() const { return index_; }

  CrfModel train(const TrainConfig& cfg) const { return train_encoded(data_, index_, cfg); }

 private:
  AttributeIndex index_;
  std::vector<EncodedSequence> data_;
};

inline CrfModel train(const std::vector<std::vector<Instance>>& dataset, const TrainConfig& cfg) {
  DatasetBuilder builder;
  for (const auto& seq : dataset) builder.add(seq);
  return builder.train(cfg);
}

// ---------------------------------------------------------------------------
// Model file
//
//   crfmodel-v1
//   labels  O  M
//   config  k=<k>  features=<spec>
//   meta    iterations=<n>  objective=<f>  seed=<s>  stop=<reason>
//   attributes  <count>
//   <id>  <attr>                       (count lines)
//   state  <count>
//   <attrid>  <label>  <weight>        (count lines, non-zero weights only)
//   transitions  4
//   <from>  <to>  <weight>
//   end
//
// Fields are tab separated; weights carry 17 significant digits.

inline constexpr std::string_view kModelHeader = "crfmodel-v1";

inline void save_model(std::ostream& out, const CrfModel& model) {
  using detail::format_double;
  out << kModelHeader << '\n';
  out << "labels\tO\tM\n";
  out << "config\tk=" << model.config.k << "\tfeatures=" << model.config.spec() << '\n';
  out << "meta\titerations=" << model.meta.iterations
      << "\tobjective=" << format_double(model.meta.final_objective)
      << "\tseed=" << model.meta.seed
      << "\tstop=" << (model.meta.stop_reason.empty() ? "none" : model.meta.stop_reason) << '\n';
  const auto& index = model.attributes();
  out << "attributes\t" << index.size() << '\n';
  for (std::uint32_t i = 0; i < index.size(); ++i)
    out << i << '\t' << detail::escape_field(index.name(i)) << '\n';
  std::size_t nonzero = 0;
  for (std::uint32_t i = 0; i < index.size(); ++i)
    for (const auto y : kLabels) nonzero += model.state_weight(i, y) != 0.0;
  out << "state\t" << nonzero << '\n';
  for (std::uint32_t i = 0; i < index.size(); ++i)
    for (const auto y : kLabels)
      if (const double v = model.state_weight(i, y); v != 0.0)
        out << i << '\t' << label_char(y) << '\t' << format_double(v) << '\n';
  out << "transitions\t4\n";
  for (const auto a : kLabels)
    for (const auto b : kLabels)
      out << label_char(a) << '\t' << label_char(b) << '\t' << format_double(model.trans_weight(a, b))
          << '\n';
  out << "end\n";
}

inline CrfModel load_model(std::istream& in) {
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto lines = detail::split_lines(data);
  std::size_t cur = 0;
  auto next = [&](std::string_view what) -> const detail::RawLine& {
    if (cur >= lines.size())
      throw ModelFormatError(lines.size(), "truncated model file: expected " + std::string(what));
    return lines[cur++];
  };
  auto fail = [](const detail::RawLine& l, const std::string& msg) -> ModelFormatError {
    return ModelFormatError(l.number, msg);
  };
  auto parse_count = [&](const detail::RawLine& l, std::string_view key) {
    const auto f = detail::split_tabs(l.text);
    std::size_t n = 0;
    if (f.size() != 2 || f[0] != key) throw fail(l, "expected '" + std::string(key) + "\\t<count>'");
    const auto res = std::from_chars(f[1].data(), f[1].data() + f[1].size(), n);
    if (res.ec != std::errc{} || res.ptr != f[1].data() + f[1].size())
      throw fail(l, "malformed count");
    return n;
  };
  auto parse_label_field = [&](const detail::RawLine& l, std::string_view s) {
    if (s == "M") return Label::M;
    if (s == "O") return Label::O;
    throw fail(l, "unknown label '" + std::string(s) + "'");
  };
  auto parse_weight = [&](const detail::RawLine& l, std::string_view s) {
    const auto v = detail::parse_double(s);
    if (!v || !std::isfinite(*v)) throw fail(l, "malformed weight");
    return *v;
  };

  if (lines.empty()) throw ModelFormatError(0, "empty model file");
  const auto& header = next("header");
  if (header.text != kModelHeader)
    throw fail(header, "unsupported model version '" + std::string(header.text) + "' (expected " +
                           std::string(kModelHeader) + ")");
  const auto& labels = next("labels");
  if (labels.text != "labels\tO\tM") throw fail(labels, "expected label list 'labels\\tO\\tM'");

  FeatureConfig config;
  {
    const auto& l = next("config");
    const auto f = detail::split_tabs(l.text);
    if (f.size() != 3 || f[0] != "config" || !f[1].starts_with("k=") ||
        !f[2].starts_with("features="))
      throw fail(l, "malformed config line");
    int k = 0;
    const auto ks = f[1].substr(2);
    const auto res = std::from_chars(ks.data(), ks.data() + ks.size(), k);
    if (res.ec != std::errc{} || res.ptr != ks.data() + ks.size()) throw fail(l, "malformed k");
    try {
      config = parse_feature_spec(f[2].substr(9), k);
    } catch (const ConfigError& e) {
      throw fail(l, e.what());
    }
  }

  TrainingRecord meta;
  {
    const auto& l = next("meta");
    const auto f = detail::split_tabs(l.text);
    if (f.empty() || f[0] != "meta") throw fail(l, "malformed meta line");
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto eq = f[i].find('=');
      if (eq == std::string_view::npos) throw fail(l, "malformed meta field");
      const auto key = f[i].substr(0, eq);
      const auto value = f[i].substr(eq + 1);
      if (key == "iterations") {
        std::from_chars(value.data(), value.data() + value.size(), meta.iterations);
      } else if (key == "objective") {
        meta.final_objective = detail::parse_double(value).value_or(0.0);
      } else if (key == "seed") {
        std::from_chars(value.data(), value.data() + value.size(), meta.seed);
      } else if (key == "stop") {
        meta.stop_reason = std::string(value);
      }
    }
  }

  AttributeIndex index;
  const std::size_t num_attrs = parse_count(next("attributes"), "attributes");
  for (std::size_t i = 0; i < num_attrs; ++i) {
    const auto& l = next("attribute line");
    const auto f = detail::split_tabs(l.text);
    if (f.size() != 2 || f[0] != std::to_string(i)) throw fail(l, "malformed attribute line");
    const auto name = detail::unescape_field(f[1]);
    if (!name || name->empty()) throw fail(l, "malformed attribute name");
    if (index.add(*name) != i) throw fail(l, "duplicate attribute '" + *name + "'");
  }

  CrfModel model(std::move(index));
  model.config = config;
  model.meta = std::move(meta);

  const std::size_t num_state = parse_count(next("state"), "state");
  for (std::size_t i = 0; i < num_state; ++i) {
    const auto& l = next("state weight line");
    const auto f = detail::split_tabs(l.text);
    if (f.size() != 3) throw fail(l, "malformed state weight line");
    std::uint32_t id = 0;
    const auto res = std::from_chars(f[0].data(), f[0].data() + f[0].size(), id);
    if (res.ec != std::errc{} || res.ptr != f[0].data() + f[0].size() || id >= num_attrs)
      throw fail(l, "bad attribute id");
    model.state_weight(id, parse_label_field(l, f[1])) = parse_weight(l, f[2]);
  }

  const std::size_t num_trans = parse_count(next("transitions"), "transitions");
  if (num_trans != 4) throw fail(lines[cur - 1], "expected 4 transition weights");
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& l = next("transition weight line");
    const auto f = detail::split_tabs(l.text);
    if (f.size() != 3) throw fail(l, "malformed transition line");
    model.trans_weight(parse_label_field(l, f[0]), parse_label_field(l, f[1])) =
        parse_weight(l, f[2]);
  }
  const auto& end = next("end");
  if (end.text != "end") throw fail(end, "expected 'end'");
  return model;
}

}  // namespace gujiseg
