#pragma once

// Tetrachoric (binary polychoric) correlation: each token is read as a
// dichotomized standard-normal trait, and the latent correlation of a token
// pair is fitted to its 2x2 table by maximum likelihood.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "ptq/bvn.hpp"
#include "ptq/survey.hpp"

namespace ptq {

// Cell counts n<x><y>; x indexes the first variable. Counts may be
// fractional (expected proportions are accepted).
struct ContingencyTable2x2 {
  double n00 = 0, n01 = 0, n10 = 0, n11 = 0;

  double total() const { return n00 + n01 + n10 + n11; }
  double x_positive() const { return n10 + n11; }
  double y_positive() const { return n01 + n11; }
};

struct PolychoricEstimate {
  double rho = 0.0;
  double tau_x = 0.0;
  double tau_y = 0.0;
  double loglik = 0.0;
  bool converged = false;
  bool corrected = false;
};

struct PolychoricOptions {
  double continuity = 0.5;
  std::uintmax_t max_iter = 200;
};

// Multinomial log-likelihood of the table at latent correlation rho.
inline double tetrachoric_loglik(const ContingencyTable2x2& t, double tau_x, double tau_y, double rho) {
  const double px = normal_cdf(-tau_x), py = normal_cdf(-tau_y);
  const double p11 = bvn_upper(tau_x, tau_y, rho);
  const double cells[4] = {1.0 - px - py + p11, py - p11, px - p11, p11};
  const double counts[4] = {t.n00, t.n01, t.n10, t.n11};
  double ll = 0.0;
  for (int c = 0; c < 4; ++c) {
    if (counts[c] == 0.0) continue;
    ll += counts[c] * std::log(std::max(cells[c], 1e-300));
  }
  return ll;
}

// Two-step estimate: thresholds from the marginals, then rho by a bounded
// Brent search of the likelihood. Zero cells receive a continuity correction.
inline PolychoricEstimate estimate_polychoric(ContingencyTable2x2 t, const PolychoricOptions& opt = {}) {
  if (!(t.total() > 0.0) || t.n00 < 0 || t.n01 < 0 || t.n10 < 0 || t.n11 < 0)
    throw PolychoricError("contingency table needs non-negative counts with a positive total");
  const double tx = t.x_positive() / t.total(), ty = t.y_positive() / t.total();
  if (tx <= 0.0 || tx >= 1.0 || ty <= 0.0 || ty >= 1.0) throw PolychoricError("degenerate marginal");

  PolychoricEstimate est;
  for (double* cell : {&t.n00, &t.n01, &t.n10, &t.n11}) {
    if (*cell == 0.0) {
      *cell += opt.continuity;
      est.corrected = true;
    }
  }
  const double px = t.x_positive() / t.total(), py = t.y_positive() / t.total();
  est.tau_x = normal_quantile(1.0 - px);
  est.tau_y = normal_quantile(1.0 - py);
  if (!std::isfinite(est.tau_x) || !std::isfinite(est.tau_y)) throw PolychoricError("degenerate marginal");

  constexpr double edge = 1.0 - 1e-12;
  std::uintmax_t iters = opt.max_iter;
  const auto [rho, neg_ll] = boost::math::tools::brent_find_minima(
      [&](double r) { return -tetrachoric_loglik(t, est.tau_x, est.tau_y, r); }, -edge, edge,
      std::numeric_limits<double>::digits / 2, iters);
  est.rho = rho;
  est.loglik = -neg_ll;
  est.converged = iters < opt.max_iter;
  return est;
}

struct PolychoricMatrix {
  std::vector<std::string> tokens;
  Eigen::MatrixXd values;
  bool psd_repaired = false;
  double min_eigenvalue_before = 0.0;
  double min_eigenvalue_after = 0.0;
  double repair_frobenius = 0.0;  // ||repaired - raw||_F
  std::size_t corrected_pairs = 0;
  std::size_t unconverged_pairs = 0;

  std::size_t size() const { return tokens.size(); }
  // Repairs that moved the matrix this far are reported as suspicious.
  bool repair_alert() const { return repair_frobenius > 0.1; }
};

inline constexpr double kMinEigenvalue = 1e-8;

// Clips eigenvalues below kMinEigenvalue and rescales to unit diagonal,
// repeating until the rescaled matrix keeps every eigenvalue above the floor.
// Returns true when a repair was needed.
inline bool repair_psd(Eigen::MatrixXd& m, double* min_before = nullptr, double* min_after = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (min_before) *min_before = es.eigenvalues()(0);
  if (es.eigenvalues()(0) >= kMinEigenvalue) {
    if (min_after) *min_after = es.eigenvalues()(0);
    return false;
  }
  double floor = kMinEigenvalue;
  for (int round = 0; round < 200; ++round) {
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd inv_sd = r.diagonal().cwiseSqrt().cwiseInverse();
    m = inv_sd.asDiagonal() * r * inv_sd.asDiagonal();
    m = 0.5 * (m + m.transpose());
    m.diagonal().setOnes();
    es.compute(m);
    if (es.eigenvalues()(0) >= kMinEigenvalue) break;
    floor *= 2.0;
  }
  if (min_after) *min_after = es.eigenvalues()(0);
  return true;
}

namespace detail {

struct PairCounts {
  std::size_t n = 0;
  std::vector<std::size_t> positives;  // per token
  std::vector<std::size_t> both;       // p*p, upper triangle used

  ContingencyTable2x2 table(std::size_t i, std::size_t j) const {
    const std::size_t p = positives.size();
    const double n11 = static_cast<double>(both[i * p + j]);
    const double n1x = static_cast<double>(positives[i]), nx1 = static_cast<double>(positives[j]);
    return {static_cast<double>(n) - n1x - nx1 + n11, nx1 - n11, n1x - n11, n11};
  }
};

template <typename Rows>
PairCounts count_pairs(const Rows& rows, std::size_t p) {
  PairCounts c;
  c.positives.assign(p, 0);
  c.both.assign(p * p, 0);
  for (const TokenMask& m : rows) {
    c.n += 1;
    if (!m.any()) continue;
    for (std::size_t i = 0; i < p; ++i) {
      if (!m.test(i)) continue;
      c.positives[i] += 1;
      for (std::size_t j = i + 1; j < p; ++j) c.both[i * p + j] += m.test(j) ? 1 : 0;
    }
  }
  return c;
}

}  // namespace detail

// Pairwise estimates assembled into a correlation matrix, PSD-repaired when
// needed. With `degenerate_as_zero`, pairs involving a constant column get 0
// instead of an error (used for simulated reference data).
inline PolychoricMatrix polychoric_matrix_from_rows(const std::vector<TokenMask>& rows,
                                                    const std::vector<std::string>& names,
                                                    unsigned threads = 1,
                                                    bool degenerate_as_zero = false) {
  const std::size_t p = names.size();
  if (p < 2) throw PolychoricError("polychoric matrix needs at least two tokens");
  const auto counts = detail::count_pairs(rows, p);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  std::vector<PolychoricEstimate> est(pairs.size());
  std::vector<std::uint8_t> degenerate(pairs.size(), 0);
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    try {
      est[k] = estimate_polychoric(counts.table(i, j));
    } catch (const PolychoricError& e) {
      if (!degenerate_as_zero)
        throw PolychoricError("pair (" + names[i] + ", " + names[j] + "): " + e.what());
      degenerate[k] = 1;
    }
  });

  PolychoricMatrix out;
  out.tokens = names;
  out.values = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const double r = degenerate[k] ? 0.0 : est[k].rho;
    out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
    out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
    out.corrected_pairs += est[k].corrected ? 1 : 0;
    out.unconverged_pairs += (!degenerate[k] && !est[k].converged) ? 1 : 0;
  }
  const Eigen::MatrixXd raw = out.values;
  out.psd_repaired = repair_psd(out.values, &out.min_eigenvalue_before, &out.min_eigenvalue_after);
  out.repair_frobenius = (out.values - raw).norm();
  return out;
}

inline std::vector<TokenMask> token_rows(const SurveyDataset& ds) {
  std::vector<TokenMask> rows;
  rows.reserve(ds.size());
  for (const auto& r : ds.records) rows.push_back(r.tokens);
  return rows;
}

inline PolychoricMatrix polychoric_matrix(const SurveyDataset& ds, unsigned threads = 1) {
  if (ds.token_count() < 2) throw PolychoricError("polychoric matrix needs at least two tokens");
  return polychoric_matrix_from_rows(token_rows(ds), ds.vocabulary.names, threads);
}

}  // namespace ptq
