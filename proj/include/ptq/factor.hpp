#pragma once

// Exploratory factor analysis on a polychoric matrix: factor count by
// parallel analysis, principal-axis extraction, varimax rotation, and the
// thresholded token -> problem group assignment.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptq/polychoric.hpp"

namespace ptq {

enum class Rotation { none, varimax };

struct FactorModel {
  std::vector<std::string> tokens;
  Eigen::MatrixXd loadings;         // tokens x k
  Eigen::VectorXd communalities;    // row sums of squared loadings
  std::vector<double> variance_explained;  // per factor, fraction of total
  Rotation rotation = Rotation::none;
  Eigen::MatrixXd rotation_matrix;  // k x k, loadings = unrotated * rotation_matrix
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<std::string> heywood;  // tokens whose communality was clamped to 1

  std::size_t factor_count() const { return static_cast<std::size_t>(loadings.cols()); }
  double total_variance_explained() const {
    return std::accumulate(variance_explained.begin(), variance_explained.end(), 0.0);
  }
};

// ---------------------------------------------------------------------------
// Parallel analysis

// Which eigenvalues parallel analysis compares.
enum class EigenBasis {
  correlation,  // eigenvalues of the correlation matrix itself
  reduced,      // squared multiple correlations on the diagonal
};

namespace detail {

// 1 - 1/diag(R^-1), or the largest absolute off-diagonal correlation per row
// when R is numerically singular.
inline Eigen::VectorXd initial_communalities(const Eigen::MatrixXd& r) {
  const Eigen::Index p = r.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  Eigen::VectorXd h(p);
  if (es.eigenvalues()(0) > 1e-10) {
    const Eigen::MatrixXd inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                                es.eigenvectors().transpose();
    for (Eigen::Index i = 0; i < p; ++i) h(i) = std::clamp(1.0 - 1.0 / inv(i, i), 0.0, 1.0);
    return h;
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < p; ++j)
      if (j != i) m = std::max(m, std::abs(r(i, j)));
    h(i) = m;
  }
  return h;
}

inline Eigen::VectorXd descending_eigenvalues(const Eigen::MatrixXd& r, EigenBasis basis) {
  Eigen::MatrixXd m = r;
  if (basis == EigenBasis::reduced) m.diagonal() = initial_communalities(r);
  Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
  return ev.reverse();
}

}  // namespace detail

struct ParallelAnalysisOptions {
  std::size_t reps = 100;
  double quantile = 0.95;
  std::uint64_t seed = 0;
  EigenBasis basis = EigenBasis::reduced;
  unsigned threads = 1;
};

struct ParallelAnalysisResult {
  std::size_t k = 0;
  std::vector<double> observed;   // descending
  std::vector<double> reference;  // per-rank quantile of simulated eigenvalues
};

// Compares observed eigenvalues against the per-rank quantile of eigenvalues
// from reference datasets: independent binary columns with the observed
// prevalences and row count, pushed through the same polychoric estimator.
// k counts the leading ranks that beat the reference. Does not throw on k = 0.
inline ParallelAnalysisResult parallel_analysis_scan(const PolychoricMatrix& corr, const SurveyDataset& ds,
                                                     const ParallelAnalysisOptions& opt) {
  const std::size_t p = corr.size();
  if (opt.reps < 10) throw FactorError("parallel analysis needs at least 10 replicates");
  if (ds.token_count() != p) throw FactorError("parallel analysis: dataset and matrix disagree on tokens");
  if (ds.empty()) throw FactorError("parallel analysis: empty dataset");

  std::vector<double> prevalence(p, 0.0);
  for (const auto& r : ds.records)
    for (std::size_t t = 0; t < p; ++t) prevalence[t] += r.tokens.test(t) ? 1.0 : 0.0;
  for (auto& v : prevalence) v /= static_cast<double>(ds.size());

  const std::size_t n = ds.size();
  std::vector<Eigen::VectorXd> sims(opt.reps);
  parallel_for(opt.reps, opt.threads, [&](std::size_t rep) {
    Rng rng = Rng::stream(opt.seed, rep);
    std::vector<TokenMask> rows(n);
    for (auto& row : rows)
      for (std::size_t t = 0; t < p; ++t)
        if (rng.bernoulli(prevalence[t])) row.set(t);
    const auto m = polychoric_matrix_from_rows(rows, corr.tokens, 1, true);
    sims[rep] = detail::descending_eigenvalues(m.values, opt.basis);
  });

  ParallelAnalysisResult res;
  const Eigen::VectorXd obs = detail::descending_eigenvalues(corr.values, opt.basis);
  res.observed.assign(obs.data(), obs.data() + obs.size());
  for (std::size_t rank = 0; rank < p; ++rank) {
    std::vector<double> col(opt.reps);
    for (std::size_t rep = 0; rep < opt.reps; ++rep) col[rep] = sims[rep](static_cast<Eigen::Index>(rank));
    res.reference.push_back(quantile_of(std::move(col), opt.quantile));
  }
  while (res.k < p && res.observed[res.k] > res.reference[res.k]) ++res.k;
  return res;
}

inline std::size_t parallel_analysis(const PolychoricMatrix& corr, const SurveyDataset& ds,
                                     const ParallelAnalysisOptions& opt) {
  const auto res = parallel_analysis_scan(corr, ds, opt);
  if (res.k == 0) throw FactorError("no factor exceeds noise floor");
  return res.k;
}

// ---------------------------------------------------------------------------
// Extraction

namespace detail {

inline void finish_model(FactorModel& m) {
  const Eigen::Index p = m.loadings.rows(), k = m.loadings.cols();
  m.communalities = m.loadings.rowwise().squaredNorm();
  m.variance_explained.assign(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index f = 0; f < k; ++f)
    m.variance_explained[static_cast<std::size_t>(f)] = m.loadings.col(f).squaredNorm() / static_cast<double>(p);
}

// Orients each factor so its loadings sum to a non-negative value.
inline void orient_columns(Eigen::MatrixXd& loadings, Eigen::MatrixXd* rotation) {
  for (Eigen::Index f = 0; f < loadings.cols(); ++f) {
    if (loadings.col(f).sum() < 0.0) {
      loadings.col(f) *= -1.0;
      if (rotation) rotation->col(f) *= -1.0;
    }
  }
}

}  // namespace detail

struct ExtractOptions {
  std::size_t max_iter = 100;
  double tol = 1e-6;
};

// Principal-axis factoring with iterated communalities.
inline FactorModel extract_factors(const PolychoricMatrix& corr, std::size_t k, const ExtractOptions& opt = {}) {
  const Eigen::Index p = static_cast<Eigen::Index>(corr.size());
  if (k < 1 || static_cast<Eigen::Index>(k) >= p)
    throw FactorError("factor count must satisfy 1 <= k < number of tokens");
  const Eigen::Index kk = static_cast<Eigen::Index>(k);

  FactorModel m;
  m.tokens = corr.tokens;
  Eigen::VectorXd h = detail::initial_communalities(corr.values);
  std::vector<bool> heywood(static_cast<std::size_t>(p), false);
  Eigen::MatrixXd reduced = corr.values;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;

  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    reduced.diagonal() = h;
    es.compute(reduced);
    // eigenvalues ascend; the top k are the trailing columns
    Eigen::MatrixXd l(p, kk);
    for (Eigen::Index f = 0; f < kk; ++f) {
      const Eigen::Index src = p - 1 - f;
      l.col(f) = es.eigenvectors().col(src) * std::sqrt(std::max(0.0, es.eigenvalues()(src)));
    }
    Eigen::VectorXd next = l.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < p; ++i) {
      if (next(i) > 1.0) {
        next(i) = 1.0;
        heywood[static_cast<std::size_t>(i)] = true;
      }
    }
    const double change = (next - h).cwiseAbs().maxCoeff();
    h = next;
    m.loadings = std::move(l);
    m.iterations = it;
    if (change < opt.tol) {
      m.converged = true;
      break;
    }
  }
  // A clamped row may still carry squared loadings slightly above 1.
  for (Eigen::Index i = 0; i < p; ++i) {
    const double norm = m.loadings.row(i).norm();
    if (norm > 1.0) m.loadings.row(i) /= norm;
  }
  for (Eigen::Index i = 0; i < p; ++i)
    if (heywood[static_cast<std::size_t>(i)]) m.heywood.push_back(m.tokens[static_cast<std::size_t>(i)]);
  detail::orient_columns(m.loadings, nullptr);
  m.rotation_matrix = Eigen::MatrixXd::Identity(kk, kk);
  detail::finish_model(m);
  return m;
}

// ---------------------------------------------------------------------------
// Varimax

// Kaiser's varimax criterion: sum over factors of the variance of the
// squared loadings. With `normalized`, rows are first scaled to unit length
// (the quantity the rotation maximizes).
inline double varimax_criterion(const Eigen::MatrixXd& loadings, bool normalized = true) {
  Eigen::MatrixXd b = loadings;
  if (normalized) {
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      const double n = b.row(i).norm();
      if (n > 1e-12) b.row(i) /= n;
    }
  }
  const double p = static_cast<double>(b.rows());
  double v = 0.0;
  for (Eigen::Index f = 0; f < b.cols(); ++f) {
    const Eigen::ArrayXd sq = b.col(f).array().square();
    v += sq.square().sum() / p - (sq.sum() / p) * (sq.sum() / p);
  }
  return v;
}

struct VarimaxOptions {
  double tol = 1e-8;
  std::size_t max_iter = 1000;
};

// Orthogonal varimax rotation by sweeps of optimal planar rotations over all
// factor pairs, on Kaiser-normalized rows. Factors of the result are sorted
// by descending variance explained and oriented to a positive loading sum.
inline FactorModel varimax(const FactorModel& model, const VarimaxOptions& opt = {}) {
  FactorModel out = model;
  out.rotation = Rotation::varimax;
  const Eigen::Index p = model.loadings.rows(), k = model.loadings.cols();
  if (k < 1) throw FactorError("varimax needs at least one factor");
  out.rotation_matrix = Eigen::MatrixXd::Identity(k, k);
  if (k == 1) return out;

  Eigen::VectorXd row_norm = model.loadings.rowwise().norm();
  Eigen::MatrixXd b = model.loadings;
  for (Eigen::Index i = 0; i < p; ++i)
    if (row_norm(i) > 1e-12) b.row(i) /= row_norm(i);
  Eigen::MatrixXd& t = out.rotation_matrix;
  const double dp = static_cast<double>(p);

  double crit = varimax_criterion(b, false);
  out.converged = false;
  for (std::size_t sweep = 1; sweep <= opt.max_iter; ++sweep) {
    for (Eigen::Index j = 0; j < k - 1; ++j) {
      for (Eigen::Index l = j + 1; l < k; ++l) {
        double a = 0, bb = 0, c = 0, d = 0;
        for (Eigen::Index i = 0; i < p; ++i) {
          const double x = b(i, j), y = b(i, l);
          const double u = x * x - y * y, v = 2.0 * x * y;
          a += u;
          bb += v;
          c += u * u - v * v;
          d += 2.0 * u * v;
        }
        const double num = d - 2.0 * a * bb / dp;
        const double den = c - (a * a - bb * bb) / dp;
        const double phi = 0.25 * std::atan2(num, den);
        if (std::abs(phi) < 1e-15) continue;
        const double cs = std::cos(phi), sn = std::sin(phi);
        for (Eigen::Index i = 0; i < p; ++i) {
          const double x = b(i, j), y = b(i, l);
          b(i, j) = cs * x + sn * y;
          b(i, l) = -sn * x + cs * y;
        }
        for (Eigen::Index i = 0; i < k; ++i) {
          const double x = t(i, j), y = t(i, l);
          t(i, j) = cs * x + sn * y;
          t(i, l) = -sn * x + cs * y;
        }
      }
    }
    const double next = varimax_criterion(b, false);
    out.iterations = sweep;
    const bool done = next - crit <= opt.tol * std::max(1.0, std::abs(crit));
    crit = next;
    if (done) {
      out.converged = true;
      break;
    }
  }

  out.loadings = model.loadings * t;
  // Sort factors by explained variance.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return out.loadings.col(x).squaredNorm() > out.loadings.col(y).squaredNorm();
  });
  Eigen::MatrixXd sorted_l(p, k), sorted_t(k, k);
  for (Eigen::Index f = 0; f < k; ++f) {
    sorted_l.col(f) = out.loadings.col(order[static_cast<std::size_t>(f)]);
    sorted_t.col(f) = t.col(order[static_cast<std::size_t>(f)]);
  }
  out.loadings = std::move(sorted_l);
  out.rotation_matrix = std::move(sorted_t);
  detail::orient_columns(out.loadings, &out.rotation_matrix);
  detail::finish_model(out);
  return out;
}

// ---------------------------------------------------------------------------
// Grouping

struct ProblemGroup {
  std::string name;
  std::size_t factor = 0;
  std::vector<std::size_t> members;  // token indices
  double variance_explained = 0.0;
};

struct ProblemGrouping {
  std::vector<std::string> tokens;
  std::vector<ProblemGroup> groups;
  std::vector<std::size_t> unassigned;
  double threshold = 0.5;

  std::vector<std::string> member_names(std::size_t g) const {
    std::vector<std::string> out;
    for (auto t : groups.at(g).members) out.push_back(tokens[t]);
    return out;
  }
};

// Each token joins the factor of its largest absolute loading when that
// loading reaches `threshold` (ties go to the lower factor).
inline ProblemGrouping assign_groups(const FactorModel& model, double threshold = 0.5) {
  const Eigen::Index p = model.loadings.rows(), k = model.loadings.cols();
  ProblemGrouping g;
  g.tokens = model.tokens;
  g.threshold = threshold;
  std::vector<std::vector<std::size_t>> by_factor(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < p; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index f = 1; f < k; ++f)
      if (std::abs(model.loadings(i, f)) > std::abs(model.loadings(i, best))) best = f;
    if (k > 0 && std::abs(model.loadings(i, best)) >= threshold)
      by_factor[static_cast<std::size_t>(best)].push_back(static_cast<std::size_t>(i));
    else
      g.unassigned.push_back(static_cast<std::size_t>(i));
  }
  // Factors are already ordered by explained variance; order groups the same way.
  std::vector<std::size_t> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return model.variance_explained[a] > model.variance_explained[b];
  });
  for (auto f : order) {
    if (by_factor[f].empty()) continue;
    ProblemGroup grp;
    grp.name = "group_" + std::to_string(g.groups.size() + 1);
    grp.factor = f;
    grp.members = by_factor[f];
    grp.variance_explained = model.variance_explained[f];
    g.groups.push_back(std::move(grp));
  }
  if (g.groups.empty()) throw FactorError("every token is below the loading threshold");
  return g;
}

}  // namespace ptq
