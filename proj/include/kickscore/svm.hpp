#pragma once

// One-vs-rest RBF support vector machines trained by SMO, bagged ensembles,
// and softmax confidence.
//
// The binary solver works on the dual
//     min 1/2 a'Qa - e'a,  0 <= a_i <= C,  y'a = 0,  Q_ij = y_i y_j K(x_i, x_j)
// selecting at each step the maximal violating pair (first index by the
// gradient, second by the second-order gain) and stopping once the pair's
// violation falls below kkt_tol. Ties in the selection are broken by a
// seeded permutation of the training indices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "kickscore/error.hpp"
#include "kickscore/features.hpp"
#include "kickscore/labels.hpp"

namespace kickscore::svm {

struct SvmParams {
  double C = 10.0;
  double gamma = 1.0 / static_cast<double>(kFeatureCount);
  double kkt_tol = 1e-3;
  int max_passes = 50;
  std::uint64_t seed = 1;
  /// Softmax temperature applied to one-vs-rest decision values.
  double temperature = 0.25;

  void validate() const {
    if (!(C > 0) || !std::isfinite(C)) throw Error(ErrorCode::InvalidConfig, "C must be > 0");
    if (!(gamma > 0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidConfig, "gamma must be > 0");
    if (!(kkt_tol > 0)) throw Error(ErrorCode::InvalidConfig, "kkt_tol must be > 0");
    if (max_passes < 1) throw Error(ErrorCode::InvalidConfig, "max_passes must be >= 1");
    if (!(temperature > 0)) throw Error(ErrorCode::InvalidConfig, "temperature must be > 0");
  }
};

struct LabeledSample {
  FeatureVector x{};
  TechniqueLabel y = TechniqueLabel::NoValidKick;
};

inline double rbf(const FeatureVector& a, const FeatureVector& b, double gamma) noexcept {
  double d2 = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

// ---------------------------------------------------------------------------
// Binary SMO

struct BinaryProblem {
  std::span<const double> kernel;  // n x n, row-major
  std::span<const double> y;       // +1 / -1
  std::size_t n = 0;
};

struct BinarySolution {
  std::vector<double> alpha;
  double bias = 0.0;  // f(x) = sum alpha_i y_i K(x_i, x) + bias
  std::size_t iterations = 0;
  bool converged = false;
};

inline BinarySolution solve_binary_smo(const BinaryProblem& p, double C, double tol, std::size_t max_iter,
                                       std::uint64_t seed) {
  constexpr double kTau = 1e-12;
  const std::size_t n = p.n;
  const auto K = [&](std::size_t i, std::size_t j) { return p.kernel[i * n + j]; };
  const auto y = p.y;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  BinarySolution sol;
  sol.alpha.assign(n, 0.0);
  auto& alpha = sol.alpha;
  std::vector<double> G(n, -1.0);

  const auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
  };
  const auto in_low = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C);
  };

  while (sol.iterations < max_iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t : order) {
      if (in_up(t) && -y[t] * G[t] > gmax) {
        gmax = -y[t] * G[t];
        i = t;
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    double best_gain = std::numeric_limits<double>::infinity();
    for (std::size_t t : order) {
      if (!in_low(t)) continue;
      const double v = -y[t] * G[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b > 0) {
        double a = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (a <= 0) a = kTau;
        const double gain = -(b * b) / a;
        if (gain < best_gain) {
          best_gain = gain;
          j = t;
        }
      }
    }
    if (i == n || j == n || gmax - gmin < tol) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;

    const double old_ai = alpha[i], old_aj = alpha[j];
    double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (quad <= 0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t)
      G[t] += y[t] * (y[i] * K(t, i) * dai + y[j] * K(t, j) * daj);
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : 0.5 * (ub + lb);
  sol.bias = -rho;
  return sol;
}

/// Largest KKT violation of a binary solution given decision values f_i on
/// the training points: 0 < a < C needs |y f - 1| <= tol, a = 0 needs
/// y f >= 1 - tol, a = C needs y f <= 1 + tol.
inline double kkt_violation(std::span<const double> alpha, std::span<const double> y,
                            std::span<const double> decision, double C) {
  double worst = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double m = y[i] * decision[i] - 1.0;
    double v = 0.0;
    if (alpha[i] <= 0) v = std::max(0.0, -m);
    else if (alpha[i] >= C) v = std::max(0.0, m);
    else v = std::abs(m);
    worst = std::max(worst, v);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Multi-class model

struct BinaryMachine {
  std::vector<FeatureVector> support_vectors;  // standardized
  std::vector<double> coef;                    // alpha_i * y_i
  double bias = 0.0;
};

struct SvmModel {
  double C = 10.0;
  double gamma = 1.0 / static_cast<double>(kFeatureCount);
  double temperature = 0.25;
  std::uint16_t schema_version = kFeatureSchemaVersion;
  Standardizer standardizer;
  std::vector<TechniqueLabel> labels;    // enumeration order
  std::vector<BinaryMachine> machines;   // one per label
};

struct LabelScore {
  TechniqueLabel label;
  double score;
};

struct Prediction {
  TechniqueLabel label = TechniqueLabel::NoValidKick;
  double confidence = 0.0;
  std::vector<LabelScore> scores;  // model label order, sums to 1

  /// Highest-scoring labels first; ties by enumeration order.
  std::vector<LabelScore> top(std::size_t k) const {
    auto s = scores;
    std::stable_sort(s.begin(), s.end(), [](const LabelScore& a, const LabelScore& b) { return a.score > b.score; });
    if (s.size() > k) s.resize(k);
    return s;
  }
};

/// Per-machine report of a training run (alphas are over the training rows).
struct TrainReport {
  struct Machine {
    TechniqueLabel label;
    std::vector<double> alpha;
    std::vector<double> y;
    double bias = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
  };
  std::vector<FeatureVector> standardized;  // training rows
  std::vector<Machine> machines;
};

inline void check_dataset(std::span<const LabeledSample> data) {
  std::map<TechniqueLabel, std::size_t> counts;
  for (const auto& s : data) {
    if (!all_finite(s.x)) throw Error(ErrorCode::NonFiniteFeature, "training sample");
    ++counts[s.y];
  }
  if (counts.size() < 2)
    throw Error(ErrorCode::TooFewClasses, "need at least 2 distinct labels, got " + std::to_string(counts.size()));
  for (const auto& [label, c] : counts)
    if (c < 2)
      throw Error(ErrorCode::TooFewSamples,
                  std::string(to_string(label)) + " has " + std::to_string(c) + " sample(s)");
}

inline std::vector<double> kernel_matrix(std::span<const FeatureVector> x, double gamma) {
  const std::size_t n = x.size();
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) k[i * n + j] = k[j * n + i] = rbf(x[i], x[j], gamma);
  }
  return k;
}

inline SvmModel train_svm(std::span<const LabeledSample> data, const SvmParams& params = {},
                          TrainReport* report = nullptr) {
  params.validate();
  check_dataset(data);

  SvmModel model;
  model.C = params.C;
  model.gamma = params.gamma;
  model.temperature = params.temperature;
  std::vector<FeatureVector> raw;
  raw.reserve(data.size());
  for (const auto& s : data) raw.push_back(s.x);
  model.standardizer = Standardizer::fit(raw);
  std::vector<FeatureVector> xs;
  xs.reserve(raw.size());
  for (const auto& v : raw) xs.push_back(model.standardizer.apply(v));

  for (auto l : kAllLabels)
    if (std::any_of(data.begin(), data.end(), [&](const LabeledSample& s) { return s.y == l; }))
      model.labels.push_back(l);

  const std::size_t n = xs.size();
  const auto K = kernel_matrix(xs, params.gamma);
  const std::size_t max_iter = static_cast<std::size_t>(params.max_passes) * std::max<std::size_t>(n, 1000);
  if (report) report->standardized = xs;

  std::vector<double> y(n);
  for (std::size_t m = 0; m < model.labels.size(); ++m) {
    const auto label = model.labels[m];
    for (std::size_t i = 0; i < n; ++i) y[i] = data[i].y == label ? 1.0 : -1.0;
    const auto sol = solve_binary_smo({K, y, n}, params.C, params.kkt_tol, max_iter, params.seed + m);
    BinaryMachine bm;
    bm.bias = sol.bias;
    for (std::size_t i = 0; i < n; ++i) {
      if (sol.alpha[i] > 0) {
        bm.support_vectors.push_back(xs[i]);
        bm.coef.push_back(sol.alpha[i] * y[i]);
      }
    }
    model.machines.push_back(std::move(bm));
    if (report) report->machines.push_back({label, sol.alpha, y, sol.bias, sol.iterations, sol.converged});
  }
  return model;
}

/// Raw one-vs-rest decision values, one per model label.
inline std::vector<double> decision_values(const SvmModel& model, const FeatureVector& v) {
  if (model.schema_version != kFeatureSchemaVersion)
    throw Error(ErrorCode::SchemaMismatch, "model schema " + std::to_string(model.schema_version) +
                                               ", features " + std::to_string(kFeatureSchemaVersion));
  if (!all_finite(v)) throw Error(ErrorCode::NonFiniteFeature, "prediction input");
  const auto x = model.standardizer.apply(v);
  std::vector<double> out;
  out.reserve(model.machines.size());
  for (const auto& m : model.machines) {
    double f = m.bias;
    for (std::size_t s = 0; s < m.support_vectors.size(); ++s) f += m.coef[s] * rbf(m.support_vectors[s], x, model.gamma);
    out.push_back(f);
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> values, double temperature) {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double mx = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - mx) / temperature);
    sum += out[i];
  }
  for (auto& o : out) o /= sum;
  return out;
}

inline Prediction predict(const SvmModel& model, const FeatureVector& v) {
  const auto d = decision_values(model, v);
  const auto s = softmax(d, model.temperature);
  Prediction p;
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (d[i] > d[best]) best = i;
  p.label = model.labels[best];
  p.confidence = s[best];
  for (std::size_t i = 0; i < d.size(); ++i) p.scores.push_back({model.labels[i], s[i]});
  return p;
}

// ---------------------------------------------------------------------------
// Bagged ensemble

struct EnsembleModel {
  std::vector<SvmModel> members;
};

/// Stratified bootstrap: each label's rows are resampled with replacement to
/// their original count, so every member sees every label.
inline std::vector<LabeledSample> bootstrap(std::span<const LabeledSample> data, std::mt19937_64& rng) {
  std::map<TechniqueLabel, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].y].push_back(i);
  std::vector<LabeledSample> out;
  out.reserve(data.size());
  for (const auto& [label, rows] : by_label) {
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    for (std::size_t k = 0; k < rows.size(); ++k) out.push_back(data[rows[pick(rng)]]);
  }
  return out;
}

inline EnsembleModel train_ensemble(std::span<const LabeledSample> data, const SvmParams& params = {},
                                    std::size_t members = 7, std::uint64_t seed = 1) {
  if (members < 1 || members % 2 == 0)
    throw Error(ErrorCode::InvalidConfig, "ensemble size must be odd, got " + std::to_string(members));
  params.validate();
  check_dataset(data);
  EnsembleModel ens;
  std::mt19937_64 rng(seed);
  for (std::size_t m = 0; m < members; ++m) {
    const auto sample = bootstrap(data, rng);
    SvmParams p = params;
    p.seed = params.seed + 1000 * (m + 1);
    ens.members.push_back(train_svm(sample, p));
  }
  return ens;
}

/// Majority vote; ties go to the larger summed softmax score, then to
/// enumeration order. Confidence = vote share x mean member score for the
/// winning label.
inline Prediction predict_ensemble(const EnsembleModel& ens, const FeatureVector& v) {
  if (ens.members.empty()) throw Error(ErrorCode::InvalidConfig, "empty ensemble");
  const auto& labels = ens.members.front().labels;
  const std::size_t L = labels.size();
  std::vector<std::size_t> votes(L, 0);
  std::vector<double> score_sum(L, 0.0);
  for (const auto& m : ens.members) {
    if (m.labels != labels) throw Error(ErrorCode::SchemaMismatch, "ensemble members disagree on labels");
    const auto p = predict(m, v);
    for (std::size_t i = 0; i < L; ++i) {
      score_sum[i] += p.scores[i].score;
      if (labels[i] == p.label) ++votes[i];
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < L; ++i)
    if (votes[i] > votes[best] || (votes[i] == votes[best] && score_sum[i] > score_sum[best])) best = i;
  const double M = static_cast<double>(ens.members.size());
  Prediction out;
  out.label = labels[best];
  out.confidence = (static_cast<double>(votes[best]) / M) * (score_sum[best] / M);
  for (std::size_t i = 0; i < L; ++i) out.scores.push_back({labels[i], score_sum[i] / M});
  return out;
}

using TechniqueModel = std::variant<SvmModel, EnsembleModel>;

inline Prediction predict(const TechniqueModel& model, const FeatureVector& v) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SvmModel>) return predict(m, v);
        else return predict_ensemble(m, v);
      },
      model);
}

inline const std::vector<TechniqueLabel>& model_labels(const TechniqueModel& model) {
  if (const auto* s = std::get_if<SvmModel>(&model)) return s->labels;
  return std::get<EnsembleModel>(model).members.front().labels;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

/// Stratified split: within each label, rows are shuffled by `seed` and the
/// first round(test_fraction * count) go to the test set.
inline std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> stratified_split(
    std::span<const LabeledSample> data, double test_fraction, std::uint64_t seed) {
  std::map<TechniqueLabel, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].y].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<LabeledSample> train, test;
  for (auto& [label, rows] : by_label) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    for (std::size_t k = 0; k < rows.size(); ++k) (k < n_test ? test : train).push_back(data[rows[k]]);
  }
  return {std::move(train), std::move(test)};
}

template <typename Model>
double accuracy(const Model& model, std::span<const LabeledSample> data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : data) {
    Prediction p;
    if constexpr (std::is_same_v<Model, EnsembleModel>) p = predict_ensemble(model, s.x);
    else p = predict(model, s.x);
    ok += p.label == s.y;
  }
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

/// Stratified k-fold cross-validated accuracy.
inline double cross_validate(std::span<const LabeledSample> data, const SvmParams& params, std::size_t folds = 5,
                             std::uint64_t seed = 1) {
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 folds");
  std::map<TechniqueLabel, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].y].push_back(i);
  std::vector<std::size_t> fold_of(data.size());
  std::mt19937_64 rng(seed);
  for (auto& [label, rows] : by_label) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t k = 0; k < rows.size(); ++k) fold_of[rows[k]] = k % folds;
  }
  std::size_t ok = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<LabeledSample> train, test;
    for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == f ? test : train).push_back(data[i]);
    if (test.empty()) continue;
    const auto model = train_svm(train, params);
    for (const auto& s : test) ok += predict(model, s.x).label == s.y;
  }
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

struct GridResult {
  SvmParams best;
  double best_accuracy = -1.0;
  std::vector<std::pair<SvmParams, double>> table;
};

/// Grid over C in {1, 10, 100} and gamma in {0.5, 1, 2} / 22 unless overridden.
inline GridResult grid_search(std::span<const LabeledSample> data, SvmParams base = {},
                              std::vector<double> Cs = {1.0, 10.0, 100.0},
                              std::vector<double> gammas = {0.5 / kFeatureCount, 1.0 / kFeatureCount,
                                                            2.0 / kFeatureCount},
                              std::size_t folds = 5) {
  GridResult r;
  for (double c : Cs) {
    for (double g : gammas) {
      SvmParams p = base;
      p.C = c;
      p.gamma = g;
      const double acc = cross_validate(data, p, folds, base.seed);
      r.table.emplace_back(p, acc);
      if (acc > r.best_accuracy) {
        r.best_accuracy = acc;
        r.best = p;
      }
    }
  }
  return r;
}

}  // namespace kickscore::svm
