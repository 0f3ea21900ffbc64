#pragma once

// Latent-trait survey generator. Tokens are dichotomized normal traits driven
// by common factors; poor calls follow a logistic model on the planted
// problem groups. Everything an estimator should recover is planted here.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "ptq/bvn.hpp"
#include "ptq/survey.hpp"

namespace ptq {

struct PlantedInteraction {
  std::size_t a = 0, b = 0;
  double coefficient = 0.0;
};

struct DurationModel {
  double base_mean_s = 300.0;
  double sigma = 0.8;                 // log-scale spread
  std::vector<double> group_penalty;  // multiplicative, one per group; empty = none
};

struct GeneratorSpec {
  TokenVocabulary vocabulary;
  Eigen::MatrixXd loadings;              // tokens x factors
  std::vector<double> thresholds;        // standard-normal scale; token fires above it
  std::vector<std::vector<std::size_t>> groups;  // planted partition, token indices
  double intercept = -3.0;
  std::vector<double> group_coefficients;
  std::vector<PlantedInteraction> interactions;
  DurationModel duration;
  double ptq_response_rate = 1.0;  // chance a rating below 5 comes with a questionnaire
  std::size_t n = 1000;
  std::uint64_t seed = 0;

  std::size_t token_count() const { return vocabulary.size(); }
  std::size_t factor_count() const { return static_cast<std::size_t>(loadings.cols()); }

  void validate() const {
    vocabulary.validate();
    const auto p = static_cast<Eigen::Index>(vocabulary.size());
    if (loadings.rows() != p) throw ValidationError("generator: loadings need one row per token");
    if (thresholds.size() != vocabulary.size()) throw ValidationError("generator: one threshold per token");
    for (Eigen::Index i = 0; i < p; ++i)
      if (loadings.row(i).squaredNorm() > 1.0 + 1e-12)
        throw ValidationError("generator: infeasible spec (communality > 1) for token " +
                              vocabulary.names[static_cast<std::size_t>(i)]);
    if (n < 1) throw ValidationError("generator: n must be at least 1");
    if (group_coefficients.size() != groups.size())
      throw ValidationError("generator: one GLM coefficient per group");
    std::vector<bool> used(vocabulary.size(), false);
    for (const auto& g : groups) {
      if (g.empty()) throw ValidationError("generator: empty planted group");
      for (auto t : g) {
        if (t >= vocabulary.size() || used[t]) throw ValidationError("generator: groups must be disjoint token sets");
        used[t] = true;
      }
    }
    for (const auto& it : interactions)
      if (it.a >= groups.size() || it.b >= groups.size() || it.a == it.b)
        throw ValidationError("generator: interaction must name two distinct groups");
    if (!duration.group_penalty.empty() && duration.group_penalty.size() != groups.size())
      throw ValidationError("generator: one duration penalty per group");
    for (double pen : duration.group_penalty)
      if (!(pen > 0.0)) throw ValidationError("generator: duration penalties must be positive");
    if (!(duration.base_mean_s > 0.0) || !(duration.sigma >= 0.0))
      throw ValidationError("generator: duration model needs a positive mean and non-negative sigma");
    if (!(ptq_response_rate >= 0.0 && ptq_response_rate <= 1.0))
      throw ValidationError("generator: ptq_response_rate must lie in [0, 1]");
  }

  // Linear predictor of the poor-call logit for given group indicators.
  double logit_of(std::span<const std::uint8_t> g) const {
    double eta = intercept;
    for (std::size_t j = 0; j < groups.size(); ++j) eta += g[j] ? group_coefficients[j] : 0.0;
    for (const auto& it : interactions) eta += (g[it.a] && g[it.b]) ? it.coefficient : 0.0;
    return eta;
  }

  // Latent correlation implied by the loadings.
  Eigen::MatrixXd latent_correlation() const {
    Eigen::MatrixXd r = loadings * loadings.transpose();
    r.diagonal().setOnes();
    return r;
  }
};

struct GroupTruth {
  std::vector<std::string> tokens;
  double reduction = 0.0;
  double mc_se = 0.0;
};

struct GroundTruth {
  Eigen::MatrixXd true_rho;
  std::vector<GroupTruth> groups;  // planted partition, in spec order
  std::size_t factor_count = 0;
  double pcr = 0.0;  // population poor call rate (Monte Carlo)
};

namespace detail {

inline constexpr std::size_t kGeneratorChunk = 4096;

// Draws latent tokens for one record.
inline TokenMask draw_tokens(const GeneratorSpec& s, const Eigen::VectorXd& uniq_sd, Rng& rng,
                             Eigen::VectorXd& f) {
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.normal();
  TokenMask m;
  for (std::size_t t = 0; t < s.token_count(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double z = s.loadings.row(ti).dot(f) + uniq_sd(ti) * rng.normal();
    if (z > s.thresholds[t]) m.set(t);
  }
  return m;
}

inline Eigen::VectorXd unique_sd(const GeneratorSpec& s) {
  return (1.0 - s.loadings.rowwise().squaredNorm().array()).max(0.0).sqrt().matrix();
}

inline std::vector<TokenMask> group_masks(const GeneratorSpec& s) {
  std::vector<TokenMask> out;
  for (const auto& g : s.groups) {
    TokenMask m;
    for (auto t : g) m.set(t);
    out.push_back(m);
  }
  return out;
}

}  // namespace detail

// Simulated survey. Deterministic in (spec, seed) for any thread count.
inline SurveyDataset generate_dataset(const GeneratorSpec& spec, unsigned threads = 1) {
  spec.validate();
  const auto uniq = detail::unique_sd(spec);
  const auto masks = detail::group_masks(spec);
  const std::size_t chunks = (spec.n + detail::kGeneratorChunk - 1) / detail::kGeneratorChunk;
  std::vector<CallRecord> records(spec.n);

  parallel_for(chunks, threads, [&](std::size_t c) {
    Rng rng = Rng::stream(spec.seed, c);
    Eigen::VectorXd f(static_cast<Eigen::Index>(spec.factor_count()));
    std::vector<std::uint8_t> g(masks.size());
    const std::size_t lo = c * detail::kGeneratorChunk;
    const std::size_t hi = std::min(spec.n, lo + detail::kGeneratorChunk);
    for (std::size_t i = lo; i < hi; ++i) {
      CallRecord& r = records[i];
      r.call_id = "c" + std::to_string(i + 1);
      TokenMask tokens = detail::draw_tokens(spec, uniq, rng, f);
      double log_penalty = 0.0;
      for (std::size_t j = 0; j < masks.size(); ++j) {
        g[j] = tokens.intersects(masks[j]) ? 1 : 0;
        if (g[j] && !spec.duration.group_penalty.empty()) log_penalty += std::log(spec.duration.group_penalty[j]);
      }
      const bool poor = rng.bernoulli(logistic(spec.logit_of(g)));
      if (poor)
        r.rating = 1 + static_cast<int>(rng.below(2));
      else
        r.rating = 3 + static_cast<int>(rng.below(tokens.any() ? 2 : 3));
      const bool responded = rng.bernoulli(spec.ptq_response_rate);
      r.ptq_submitted = r.rating < 5 && responded;
      r.tokens = r.ptq_submitted ? tokens : TokenMask{};
      const double sigma = spec.duration.sigma;
      const double mu = std::log(spec.duration.base_mean_s) - 0.5 * sigma * sigma + log_penalty;
      r.duration_s = std::exp(mu + sigma * rng.normal());
    }
  });

  SurveyDataset ds;
  ds.vocabulary = spec.vocabulary;
  ds.records = std::move(records);
  ds.provenance.push_back("generate(n=" + std::to_string(spec.n) + ", seed=" + std::to_string(spec.seed) + ")");
  return ds;
}

struct ImpactTruth {
  double pcr = 0.0;
  double pcr_fixed = 0.0;
  double reduction = 0.0;
  double mc_se = 0.0;
};

// Monte Carlo poor-call rate with and without the given groups forced absent,
// using the exact logistic probabilities of each simulated record.
inline ImpactTruth ground_truth_reduction(const GeneratorSpec& spec, std::span<const std::size_t> fixed_groups,
                                          std::size_t n_mc = 200000, std::uint64_t seed = 0) {
  spec.validate();
  for (auto g : fixed_groups)
    if (g >= spec.groups.size()) throw ValidationError("ground truth: group index out of range");
  const auto uniq = detail::unique_sd(spec);
  const auto masks = detail::group_masks(spec);
  Rng rng(seed);
  Eigen::VectorXd f(static_cast<Eigen::Index>(spec.factor_count()));
  std::vector<std::uint8_t> g(masks.size());
  double s_o = 0, s_f = 0, s_oo = 0, s_ff = 0, s_of = 0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const TokenMask tokens = detail::draw_tokens(spec, uniq, rng, f);
    for (std::size_t j = 0; j < masks.size(); ++j) g[j] = tokens.intersects(masks[j]) ? 1 : 0;
    const double po = logistic(spec.logit_of(g));
    for (auto j : fixed_groups) g[j] = 0;
    const double pf = logistic(spec.logit_of(g));
    s_o += po;
    s_f += pf;
    s_oo += po * po;
    s_ff += pf * pf;
    s_of += po * pf;
  }
  const double n = static_cast<double>(n_mc);
  ImpactTruth t;
  t.pcr = s_o / n;
  t.pcr_fixed = s_f / n;
  t.reduction = 1.0 - t.pcr_fixed / t.pcr;
  // Delta method for the ratio of means.
  const double ratio = t.pcr_fixed / t.pcr;
  const double var_o = s_oo / n - t.pcr * t.pcr;
  const double var_f = s_ff / n - t.pcr_fixed * t.pcr_fixed;
  const double cov = s_of / n - t.pcr * t.pcr_fixed;
  const double var_lin = var_f - 2.0 * ratio * cov + ratio * ratio * var_o;
  t.mc_se = std::sqrt(std::max(0.0, var_lin) / n) / t.pcr;
  return t;
}

inline ImpactTruth ground_truth_impact(const GeneratorSpec& spec, std::size_t group, std::size_t n_mc = 200000,
                                       std::uint64_t seed = 0) {
  const std::size_t fixed[] = {group};
  return ground_truth_reduction(spec, fixed, n_mc, seed);
}

inline GroundTruth ground_truth(const GeneratorSpec& spec, std::size_t n_mc = 200000) {
  spec.validate();
  GroundTruth gt;
  gt.true_rho = spec.latent_correlation();
  gt.factor_count = spec.factor_count();
  for (std::size_t j = 0; j < spec.groups.size(); ++j) {
    GroupTruth g;
    for (auto t : spec.groups[j]) g.tokens.push_back(spec.vocabulary.names[t]);
    const auto impact = ground_truth_impact(spec, j, n_mc, mix64(spec.seed) + j);
    g.reduction = impact.reduction;
    g.mc_se = impact.mc_se;
    gt.pcr = impact.pcr;
    gt.groups.push_back(std::move(g));
  }
  return gt;
}

struct Generated {
  SurveyDataset dataset;
  GroundTruth truth;
};

inline Generated generate(const GeneratorSpec& spec, unsigned threads = 1, std::size_t n_mc = 200000) {
  return {generate_dataset(spec, threads), ground_truth(spec, n_mc)};
}

// ---------------------------------------------------------------------------
// Preset worlds

// Fifteen standard tokens in five planted groups of sizes 5/5/2/2/1. Primary
// loadings are drawn uniformly from [lo, hi]. A lone indicator cannot define a
// factor, so the reliability factor also loads `reliability_cross` on one
// token from each of the other four groups (no video received, no audio
// received, video stopped, interrupting): a connectivity-loss trait.
inline GeneratorSpec table_one_world(std::size_t n, std::uint64_t seed, double lo = 0.65, double hi = 0.85,
                                     double reliability_cross = 0.35) {
  GeneratorSpec s;
  s.vocabulary = TokenVocabulary::standard();
  s.n = n;
  s.seed = seed;
  const auto sizes = TokenVocabulary::standard_group_sizes();
  s.loadings = Eigen::MatrixXd::Zero(15, 5);
  Rng rng = Rng::stream(seed, 0xfac70u);
  std::size_t t = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < sizes[g]; ++j, ++t) {
      s.loadings(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(g)) = lo + (hi - lo) * rng.uniform();
      members.push_back(t);
    }
    s.groups.push_back(members);
  }
  for (Eigen::Index i : {0, 6, 10, 12}) {
    s.loadings(i, 4) = reliability_cross;
    const double norm2 = s.loadings.row(i).squaredNorm();
    if (norm2 > 0.95) s.loadings.row(i) *= std::sqrt(0.95 / norm2);
  }
  s.thresholds = {1.0, 1.1, 1.3, 1.2, 0.9, 1.4, 1.2, 1.3, 1.0, 0.9, 1.3, 1.4, 1.1, 1.3, 1.2};
  s.intercept = -3.0;
  s.group_coefficients = {1.4, 1.1, 1.6, 2.0, 1.8};
  s.interactions = {{0, 1, -0.6}, {0, 3, -0.8}};
  s.duration.group_penalty = {0.9, 0.95, 0.85, 0.7, 0.5};
  return s;
}

// Same vocabulary, thresholds and outcome model as table_one_world, but the
// tokens are mutually independent (all loadings zero).
inline GeneratorSpec independent_world(std::size_t n, std::uint64_t seed) {
  GeneratorSpec s = table_one_world(n, seed);
  s.loadings = Eigen::MatrixXd::Zero(15, 1);
  s.interactions.clear();
  return s;
}

// `p` tokens on one common factor with equal loadings and thresholds; each
// token is its own planted group with coefficient `beta`.
inline GeneratorSpec one_factor_world(std::size_t p, double loading, double threshold, std::size_t n,
                                      std::uint64_t seed, double beta = 0.8) {
  GeneratorSpec s;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < p; ++i) names.push_back("t" + std::to_string(i + 1));
  s.vocabulary = TokenVocabulary::from_names(names);
  s.loadings = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(p), 1, loading);
  s.thresholds.assign(p, threshold);
  for (std::size_t i = 0; i < p; ++i) s.groups.push_back({i});
  s.group_coefficients.assign(p, beta);
  s.intercept = -2.5;
  s.n = n;
  s.seed = seed;
  return s;
}

}  // namespace ptq
