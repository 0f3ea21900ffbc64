#include <gtest/gtest.h>

#include <functional>
#include <sstream>

#include "oracles.hpp"
#include "ptq/descriptives.hpp"
#include "ptq/synthetic.hpp"

using namespace ptq;

namespace {

double fraction(const SurveyDataset& ds, const std::function<bool(const CallRecord&)>& f) {
  std::size_t c = 0;
  for (const auto& r : ds.records) c += f(r) ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(ds.size());
}

double pearson(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += a[i] * b[i];
  }
  const double ma = sa / n, mb = sb / n;
  return (sab / n - ma * mb) / std::sqrt(ma * (1 - ma) * mb * (1 - mb));
}

GeneratorSpec pair_world(double loading, double threshold, std::size_t n) {
  auto s = one_factor_world(2, loading, threshold, n, 21);
  return s;
}

}  // namespace

TEST(Generator, IndependentTokensAreUncorrelated) {
  const auto ds = generate_dataset(independent_world(50000, 1));
  double worst = 0.0;
  for (std::size_t i = 0; i < ds.token_count(); ++i)
    for (std::size_t j = i + 1; j < ds.token_count(); ++j)
      worst = std::max(worst, std::abs(pearson(token_series(ds, i), token_series(ds, j))));
  EXPECT_LT(worst, 0.02);
}

TEST(Generator, HighThresholdNeverFires) {
  auto s = pair_world(0.5, 1.0, 20000);
  s.thresholds[1] = 8.0;
  const auto ds = generate_dataset(s);
  EXPECT_EQ(fraction(ds, [](const CallRecord& r) { return r.tokens.test(1); }), 0.0);
}

TEST(Generator, MarginalAndJointRatesMatchLatentModel) {
  const std::size_t n = 200000;
  const auto ds = generate_dataset(pair_world(0.8, 0.0, n));
  const double both = fraction(ds, [](const CallRecord& r) { return r.tokens.test(0) && r.tokens.test(1); });
  const double want = 0.25 + std::asin(0.64) / (2.0 * M_PI);
  EXPECT_NEAR(both, want, 3.0 * std::sqrt(want * (1 - want) / n));
  EXPECT_NEAR(both, bvn_upper(0.0, 0.0, 0.64), 3.0 * std::sqrt(want * (1 - want) / n));

  const auto shifted = generate_dataset(pair_world(0.5, 1.2, n));
  const double p = normal_cdf(-1.2);
  EXPECT_NEAR(fraction(shifted, [](const CallRecord& r) { return r.tokens.test(0); }), p,
              3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Generator, PoorCallRateMatchesGroundTruth) {
  const auto spec = table_one_world(100000, 4);
  const auto ds = generate_dataset(spec);
  const auto truth = ground_truth(spec, 200000);
  const double pcr = ds.poor_call_rate();
  const double se = std::sqrt(truth.pcr * (1 - truth.pcr) / 100000.0);
  EXPECT_NEAR(pcr, truth.pcr, 3.0 * se + 3.0 * truth.groups[0].mc_se * truth.pcr);
}

TEST(Generator, RecordsAreWellFormed) {
  auto spec = table_one_world(5000, 6);
  spec.ptq_response_rate = 0.5;
  const auto ds = generate_dataset(spec);
  EXPECT_NO_THROW(ds.validate());
  for (const auto& r : ds.records) {
    if (!r.ptq_submitted) {
      EXPECT_FALSE(r.tokens.any());
    }
    if (r.rating == 5) {
      EXPECT_FALSE(r.ptq_submitted);
    }
    EXPECT_GT(r.duration_s, 0.0);
  }
  const double silent = fraction(ds, [](const CallRecord& r) { return r.rating < 5 && !r.ptq_submitted; });
  EXPECT_GT(silent, 0.1);
}

TEST(Generator, DurationBaseMean) {
  auto spec = independent_world(100000, 8);
  spec.thresholds.assign(15, 9.0);  // no tokens at all
  const auto ds = generate_dataset(spec);
  double s = 0.0;
  for (const auto& r : ds.records) s += r.duration_s;
  EXPECT_NEAR(s / static_cast<double>(ds.size()), 300.0, 0.02 * 300.0);
}

TEST(Generator, DeterministicAndThreadInvariant) {
  const auto spec = table_one_world(10000, 9);
  const auto a = generate_dataset(spec, 1), b = generate_dataset(spec, 4), c = generate_dataset(spec, 1);
  std::ostringstream sa, sb, sc;
  write_csv(sa, a);
  write_csv(sb, b);
  write_csv(sc, c);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str(), sc.str());
  auto other = spec;
  other.seed = 10;
  std::ostringstream so;
  write_csv(so, generate_dataset(other));
  EXPECT_NE(sa.str(), so.str());
}

TEST(Generator, InvalidSpecsRejected) {
  const auto good = table_one_world(10, 1);
  auto s = good;
  s.loadings(0, 0) = 0.9;
  s.loadings(0, 4) = 0.9;
  EXPECT_THROW(generate_dataset(s), ValidationError);
  s = good;
  s.thresholds.pop_back();
  EXPECT_THROW(generate_dataset(s), ValidationError);
  s = good;
  s.groups[1].push_back(0);
  EXPECT_THROW(generate_dataset(s), ValidationError);
  s = good;
  s.interactions.push_back({2, 2, 1.0});
  EXPECT_THROW(generate_dataset(s), ValidationError);
  s = good;
  s.group_coefficients.pop_back();
  EXPECT_THROW(generate_dataset(s), ValidationError);
  s = good;
  s.ptq_response_rate = 1.5;
  EXPECT_THROW(generate_dataset(s), ValidationError);
  s = good;
  s.n = 0;
  EXPECT_THROW(generate_dataset(s), ValidationError);
}

TEST(GroundTruthTest, ZeroCoefficientGroupHasNoImpact) {
  auto spec = table_one_world(10, 2);
  spec.interactions.clear();
  spec.group_coefficients[2] = 0.0;
  EXPECT_EQ(ground_truth_impact(spec, 2, 20000).reduction, 0.0);
}

TEST(GroundTruthTest, SingleGroupClosedForm) {
  auto spec = one_factor_world(1, 0.0, 0.8, 10, 3, 1.3);
  const double q = normal_cdf(-0.8);
  const double pcr = (1 - q) * logistic(-2.5) + q * logistic(-2.5 + 1.3);
  const auto t = ground_truth_impact(spec, 0, 200000, 1);
  EXPECT_NEAR(t.pcr, pcr, 0.005 * pcr);
  EXPECT_NEAR(t.reduction, 1.0 - logistic(-2.5) / pcr, 0.005);
  EXPECT_GT(t.mc_se, 0.0);
  EXPECT_LT(t.mc_se, 0.005);
}

TEST(GroundTruthTest, InteractionMakesImpactsNonAdditive) {
  const auto spec = table_one_world(10, 3);
  const std::size_t both[] = {0, 1};
  const double joint = ground_truth_reduction(spec, both, 100000, 7).reduction;
  const double a = ground_truth_impact(spec, 0, 100000, 7).reduction;
  const double b = ground_truth_impact(spec, 1, 100000, 7).reduction;
  EXPECT_GT(std::abs(a + b - joint), 0.02);

  auto flat = spec;
  flat.interactions.clear();
  const auto gt = ground_truth(flat, 50000);
  ASSERT_EQ(gt.groups.size(), 5u);
  EXPECT_EQ(gt.factor_count, 5u);
  EXPECT_EQ(gt.groups[4].tokens.size(), 1u);
  for (const auto& g : gt.groups) EXPECT_GT(g.reduction, 0.0);
}

TEST(GroundTruthTest, TrueRhoIsLatentCorrelation) {
  const auto spec = table_one_world(10, 5);
  const auto gt = ground_truth(spec, 1000);
  EXPECT_EQ(gt.true_rho, spec.latent_correlation());
  EXPECT_EQ(gt.true_rho(0, 0), 1.0);
  EXPECT_NEAR(gt.true_rho(0, 1), spec.loadings.row(0).dot(spec.loadings.row(1)), 1e-15);
}
