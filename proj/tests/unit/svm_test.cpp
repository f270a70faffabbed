#include <gtest/gtest.h>

#include "kickscore/evaluation.hpp"
#include "kickscore/svm.hpp"
#include "test_support.hpp"

using namespace kickscore;
using namespace kickscore::svm;

namespace {

LabeledSample sample(std::initializer_list<double> head, TechniqueLabel y) {
  LabeledSample s;
  s.x.fill(0.0);
  std::size_t i = 0;
  for (double v : head) s.x[i++] = v;
  s.y = y;
  return s;
}

std::vector<LabeledSample> xor_data() {
  std::vector<LabeledSample> d;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> jitter(0, 0.05);
  for (int rep = 0; rep < 5; ++rep)
    for (int a : {-1, 1})
      for (int b : {-1, 1})
        d.push_back(sample({a + jitter(rng), b + jitter(rng)},
                           a * b > 0 ? TechniqueLabel::BackKick : TechniqueLabel::AxeKickFront));
  return d;
}

// Decision value evaluated from the raw dual solution on the training rows.
double naive_decision(const TrainReport& r, std::size_t m, const FeatureVector& z, double gamma) {
  double f = r.machines[m].bias;
  for (std::size_t i = 0; i < r.standardized.size(); ++i) {
    if (r.machines[m].alpha[i] == 0) continue;
    double d2 = 0;
    for (std::size_t k = 0; k < kFeatureCount; ++k) d2 += (r.standardized[i][k] - z[k]) * (r.standardized[i][k] - z[k]);
    f += r.machines[m].alpha[i] * r.machines[m].y[i] * std::exp(-gamma * d2);
  }
  return f;
}

ErrorCode code_of(auto fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST(Svm, SeparableToy) {
  std::vector<LabeledSample> d;
  for (int i = 0; i < 6; ++i) {
    d.push_back(sample({1.0 + 0.1 * i, 0}, TechniqueLabel::SideKickFront));
    d.push_back(sample({-1.0 - 0.1 * i, 0}, TechniqueLabel::SideKickBack));
  }
  const auto m = train_svm(d);
  EXPECT_EQ(accuracy(m, d), 1.0);
  EXPECT_EQ(predict(m, sample({3, 0}, {}).x).label, TechniqueLabel::SideKickFront);
  EXPECT_EQ(predict(m, sample({-3, 0}, {}).x).label, TechniqueLabel::SideKickBack);
}

TEST(Svm, XorWithNaiveEvaluator) {
  const auto d = xor_data();
  SvmParams p;
  p.gamma = 1.0;
  p.C = 10.0;
  TrainReport r;
  const auto m = train_svm(d, p, &r);
  EXPECT_EQ(accuracy(m, d), 1.0);
  ASSERT_EQ(m.labels.size(), 2U);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 200; ++t) {
    const auto q = sample({u(rng), u(rng)}, {});
    const auto dv = decision_values(m, q.x);
    const auto z = m.standardizer.apply(q.x);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(dv[k], naive_decision(r, k, z, p.gamma), 1e-9);
  }
}

TEST(Svm, KktWithinTolerance) {
  const auto& d = kstest::small_dataset();
  SvmParams p;
  TrainReport r;
  const auto m = train_svm(d, p, &r);
  ASSERT_EQ(r.machines.size(), m.labels.size());
  for (std::size_t k = 0; k < r.machines.size(); ++k) {
    const auto& mr = r.machines[k];
    EXPECT_TRUE(mr.converged);
    double sum_ay = 0;
    for (std::size_t i = 0; i < mr.alpha.size(); ++i) {
      EXPECT_GE(mr.alpha[i], 0.0);
      EXPECT_LE(mr.alpha[i], p.C);
      sum_ay += mr.alpha[i] * mr.y[i];
    }
    EXPECT_NEAR(sum_ay, 0.0, 1e-9);
    std::vector<double> f;
    for (const auto& z : r.standardized) f.push_back(naive_decision(r, k, z, p.gamma));
    EXPECT_LE(kkt_violation(mr.alpha, mr.y, f, p.C), p.kkt_tol) << to_string(mr.label);
  }
}

TEST(Svm, Deterministic) {
  const auto& d = kstest::small_dataset();
  const auto a = train_svm(d);
  const auto b = train_svm(d);
  ASSERT_EQ(a.machines.size(), b.machines.size());
  for (std::size_t k = 0; k < a.machines.size(); ++k) {
    EXPECT_EQ(a.machines[k].coef, b.machines[k].coef);
    EXPECT_EQ(a.machines[k].bias, b.machines[k].bias);
  }
}

TEST(Svm, TrainsAllLabelsAndFitsData) {
  const auto m = kstest::small_model();
  EXPECT_EQ(m->labels.size(), kLabelCount);
  EXPECT_GE(accuracy(*m, kstest::small_dataset()), 0.98);
}

TEST(Svm, ZeroVectorIsNoValidKick) {
  FeatureVector zero{};
  EXPECT_EQ(predict(*kstest::small_model(), zero).label, TechniqueLabel::NoValidKick);
}

TEST(Svm, PredictionInvariants) {
  const auto m = kstest::small_model();
  for (const auto& s : kstest::small_dataset()) {
    const auto p = predict(*m, s.x);
    double sum = 0, mx = 0;
    for (const auto& ls : p.scores) {
      sum += ls.score;
      mx = std::max(mx, ls.score);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(p.confidence, mx);
    EXPECT_EQ(p.top(3).front().label, p.label);
  }
}

TEST(Svm, SoftmaxOracle) {
  const std::vector<double> v{1.0, 2.0, 0.5};
  const auto s = softmax(v, 0.5);
  const double z = std::exp(2.0) + std::exp(4.0) + std::exp(1.0);
  EXPECT_NEAR(s[0], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(s[1], std::exp(4.0) / z, 1e-15);
  const auto big = softmax(std::vector<double>{1000, 1000}, 0.01);
  EXPECT_DOUBLE_EQ(big[0], 0.5);
}

TEST(Svm, SingleMemberEnsembleEqualsModel) {
  const auto m = kstest::small_model();
  const EnsembleModel ens{{*m}};
  for (std::size_t i = 0; i < kstest::small_dataset().size(); i += 7) {
    const auto& x = kstest::small_dataset()[i].x;
    const auto a = predict(*m, x);
    const auto b = predict_ensemble(ens, x);
    EXPECT_EQ(a.label, b.label);
    EXPECT_DOUBLE_EQ(a.confidence, b.confidence);
    for (std::size_t k = 0; k < a.scores.size(); ++k) EXPECT_DOUBLE_EQ(a.scores[k].score, b.scores[k].score);
  }
}

TEST(Svm, EnsembleTrainsAndVotes) {
  const auto [train, test] = stratified_split(kstest::small_dataset(), 0.3, 4);
  const auto ens = train_ensemble(train, {}, 3, 9);
  ASSERT_EQ(ens.members.size(), 3U);
  for (const auto& m : ens.members) EXPECT_EQ(m.labels.size(), kLabelCount);
  EXPECT_GE(accuracy(ens, test), 0.9);
  EXPECT_EQ(code_of([&] { train_ensemble(train, {}, 4); }), ErrorCode::InvalidConfig);
}

TEST(Svm, StratifiedBootstrapKeepsCounts) {
  std::mt19937_64 rng(1);
  const auto b = bootstrap(kstest::small_dataset(), rng);
  std::map<TechniqueLabel, int> orig, boot;
  for (const auto& s : kstest::small_dataset()) ++orig[s.y];
  for (const auto& s : b) ++boot[s.y];
  EXPECT_EQ(orig, boot);
}

TEST(Svm, SplitAndCrossValidate) {
  const auto [train, test] = stratified_split(kstest::small_dataset(), 0.2, 1);
  EXPECT_EQ(train.size() + test.size(), kstest::small_dataset().size());
  EXPECT_EQ(test.size(), 13U * 6);
  EXPECT_GE(cross_validate(kstest::small_dataset(), {}, 3), 0.9);
}

TEST(Svm, ConfusionMatrix) {
  ConfusionMatrix cm({TechniqueLabel::BackKick, TechniqueLabel::AxeKickBack});
  cm.add(TechniqueLabel::BackKick, TechniqueLabel::BackKick);
  cm.add(TechniqueLabel::BackKick, TechniqueLabel::BackKick);
  cm.add(TechniqueLabel::BackKick, TechniqueLabel::AxeKickBack);
  cm.add(TechniqueLabel::AxeKickBack, TechniqueLabel::AxeKickBack);
  EXPECT_DOUBLE_EQ(cm.accuracy(), 0.75);
  EXPECT_DOUBLE_EQ(cm.precision(1), 0.5);
  EXPECT_DOUBLE_EQ(cm.recall(0), 2.0 / 3.0);
  EXPECT_TRUE(cm.row_diagonally_dominant());
  cm.add(TechniqueLabel::AxeKickBack, TechniqueLabel::BackKick);
  EXPECT_FALSE(cm.row_diagonally_dominant());
  EXPECT_THROW(cm.add(TechniqueLabel::FishKick, TechniqueLabel::BackKick), Error);
}

TEST(Svm, Errors) {
  std::vector<LabeledSample> one_class{sample({1}, TechniqueLabel::BackKick), sample({2}, TechniqueLabel::BackKick)};
  EXPECT_EQ(code_of([&] { train_svm(one_class); }), ErrorCode::TooFewClasses);
  auto lonely = one_class;
  lonely.push_back(sample({3}, TechniqueLabel::FishKick));
  EXPECT_EQ(code_of([&] { train_svm(lonely); }), ErrorCode::TooFewSamples);
  auto nan = one_class;
  nan.push_back(sample({std::nan(""), 0}, TechniqueLabel::FishKick));
  nan.push_back(sample({1, 0}, TechniqueLabel::FishKick));
  EXPECT_EQ(code_of([&] { train_svm(nan); }), ErrorCode::NonFiniteFeature);

  auto m = *kstest::small_model();
  FeatureVector bad{};
  bad[3] = std::numeric_limits<double>::infinity();
  EXPECT_EQ(code_of([&] { predict(m, bad); }), ErrorCode::NonFiniteFeature);
  m.schema_version = 2;
  EXPECT_EQ(code_of([&] { predict(m, FeatureVector{}); }), ErrorCode::SchemaMismatch);

  SvmParams p;
  p.C = 0;
  EXPECT_THROW(p.validate(), Error);
}
