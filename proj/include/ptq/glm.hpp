#pragma once

// Logistic model of poor calls on problem-group indicators, ROC evaluation,
// and counterfactual "fix this group" predictions of the poor call rate.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ptq/factor.hpp"
#include "ptq/survey.hpp"

namespace ptq {

using GroupPair = std::pair<std::size_t, std::size_t>;

struct DesignSpec {
  ProblemGrouping grouping;
  std::vector<GroupPair> interactions;

  void validate() const {
    const std::size_t g = grouping.groups.size();
    if (g == 0) throw GlmError("design needs at least one problem group");
    std::vector<GroupPair> seen;
    for (auto [a, b] : interactions) {
      if (a >= g || b >= g || a == b)
        throw GlmError("interaction (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                       ") does not name two distinct groups");
      const GroupPair key{std::min(a, b), std::max(a, b)};
      if (std::find(seen.begin(), seen.end(), key) != seen.end())
        throw GlmError("duplicate interaction (" + std::to_string(key.first + 1) + "," +
                       std::to_string(key.second + 1) + ")");
      seen.push_back(key);
    }
  }
};

// Interactions used when nothing is specified: for the five-group layout of
// the standard vocabulary, (1,2) and (1,4); none otherwise.
inline std::vector<GroupPair> default_interactions(const ProblemGrouping& g) {
  if (g.groups.size() != 5) return {};
  const std::size_t expected[] = {5, 5, 2, 2, 1};
  for (std::size_t i = 0; i < 5; ++i)
    if (g.groups[i].members.size() != expected[i]) return {};
  return {{0, 1}, {0, 3}};
}

// Per-record group indicators (OR of member tokens) and the poor-call response.
class Design {
 public:
  Design() = default;
  Design(std::vector<std::string> group_names, std::vector<GroupPair> interactions,
         std::vector<std::uint8_t> indicators, std::vector<std::uint8_t> response,
         std::vector<std::uint8_t> any_token = {})
      : names_(std::move(group_names)),
        interactions_(std::move(interactions)),
        indicators_(std::move(indicators)),
        response_(std::move(response)),
        any_token_(std::move(any_token)) {
    if (!names_.empty() && indicators_.size() != names_.size() * response_.size())
      throw GlmError("design indicator matrix has the wrong size");
    if (any_token_.empty()) {
      any_token_.assign(response_.size(), 0);
      for (std::size_t i = 0; i < response_.size(); ++i)
        for (std::size_t j = 0; j < groups(); ++j)
          if (indicator(i, j)) any_token_[i] = 1;
    }
    if (any_token_.size() != response_.size()) throw GlmError("design baseline has the wrong size");
  }

  std::size_t rows() const { return response_.size(); }
  std::size_t groups() const { return names_.size(); }
  std::size_t terms() const { return 1 + groups() + interactions_.size(); }
  const std::vector<std::string>& group_names() const { return names_; }
  const std::vector<GroupPair>& interactions() const { return interactions_; }
  const std::vector<std::uint8_t>& response() const { return response_; }
  // any_token_reported over the full vocabulary, grouped or not
  const std::vector<std::uint8_t>& any_token() const { return any_token_; }
  bool indicator(std::size_t row, std::size_t group) const { return indicators_[row * groups() + group] != 0; }

  std::vector<std::string> term_names() const {
    std::vector<std::string> out{"intercept"};
    for (const auto& n : names_) out.push_back(n);
    for (auto [a, b] : interactions_) out.push_back(names_[a] + ":" + names_[b]);
    return out;
  }

  // Model matrix with the groups in `fixed` forced absent (interactions follow).
  Eigen::MatrixXd matrix(const std::vector<bool>& fixed = {}) const {
    const auto n = static_cast<Eigen::Index>(rows());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(terms()));
    std::vector<double> g(groups());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < groups(); ++j) {
        const bool off = j < fixed.size() && fixed[j];
        g[j] = (!off && indicator(static_cast<std::size_t>(i), j)) ? 1.0 : 0.0;
      }
      x(i, 0) = 1.0;
      for (std::size_t j = 0; j < groups(); ++j) x(i, static_cast<Eigen::Index>(1 + j)) = g[j];
      for (std::size_t q = 0; q < interactions_.size(); ++q)
        x(i, static_cast<Eigen::Index>(1 + groups() + q)) = g[interactions_[q].first] * g[interactions_[q].second];
    }
    return x;
  }

  // Same groups and interactions over a resampled set of rows.
  Design subset(std::span<const std::size_t> idx) const {
    std::vector<std::uint8_t> ind, resp, any;
    ind.reserve(idx.size() * groups());
    resp.reserve(idx.size());
    any.reserve(idx.size());
    for (auto i : idx) {
      for (std::size_t j = 0; j < groups(); ++j) ind.push_back(indicators_[i * groups() + j]);
      resp.push_back(response_[i]);
      any.push_back(any_token_[i]);
    }
    return Design(names_, interactions_, std::move(ind), std::move(resp), std::move(any));
  }

  Design with_interactions(std::vector<GroupPair> inter) const {
    return Design(names_, std::move(inter), indicators_, response_, any_token_);
  }

 private:
  std::vector<std::string> names_;
  std::vector<GroupPair> interactions_;
  std::vector<std::uint8_t> indicators_;  // rows x groups
  std::vector<std::uint8_t> response_;
  std::vector<std::uint8_t> any_token_;
};

inline Design build_design(const SurveyDataset& ds, const DesignSpec& spec) {
  spec.validate();
  const auto& grouping = spec.grouping;
  std::vector<TokenMask> masks;
  std::vector<std::string> names;
  for (const auto& grp : grouping.groups) {
    if (grp.members.empty()) throw GlmError("problem group " + grp.name + " has no tokens");
    TokenMask m;
    for (auto t : grp.members) {
      const auto& token = grouping.tokens.at(t);
      auto idx = ds.vocabulary.index_of(token);
      if (!idx) throw GlmError("problem group " + grp.name + " refers to missing token " + token);
      m.set(*idx);
    }
    masks.push_back(m);
    names.push_back(grp.name);
  }
  std::vector<std::uint8_t> ind, resp, any;
  ind.reserve(ds.size() * masks.size());
  resp.reserve(ds.size());
  any.reserve(ds.size());
  for (const auto& r : ds.records) {
    for (const auto& m : masks) ind.push_back(r.tokens.intersects(m) ? 1 : 0);
    resp.push_back(poor_call(r) ? 1 : 0);
    any.push_back(any_token_reported(r) ? 1 : 0);
  }
  return Design(std::move(names), spec.interactions, std::move(ind), std::move(resp), std::move(any));
}

// ---------------------------------------------------------------------------
// Fitting

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// log(1 + e^x) without overflow
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct LogisticOptions {
  double ridge = 1e-6;
  double tol = 1e-8;
  std::size_t max_iter = 100;
};

struct LogisticModel {
  std::vector<std::string> terms;
  Eigen::VectorXd coefficients;
  double ridge = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double loglik = 0.0;            // unpenalized, at the final coefficients
  double penalized_loglik = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd eta = x * coefficients;
    return eta.unaryExpr([](double e) { return logistic(e); });
  }

  double aic() const { return -2.0 * loglik + 2.0 * static_cast<double>(coefficients.size()); }
};

namespace detail {

inline std::pair<double, double> logistic_loglik(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                                                 const Eigen::VectorXd& beta, double ridge) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += (y[static_cast<std::size_t>(i)] ? eta(i) : 0.0) - softplus(eta(i));
  const double penalty = 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
  return {ll, ll - penalty};
}

}  // namespace detail

// Ridge-penalized maximum likelihood by iteratively reweighted least squares
// (Newton steps, halved whenever the penalized likelihood would drop). The
// intercept, column 0, is not penalized.
inline LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                                  const LogisticOptions& opt = {}, std::vector<std::string> terms = {}) {
  const Eigen::Index n = x.rows(), q = x.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw GlmError("design and response lengths differ");
  if (q < 1) throw GlmError("design has no columns");
  std::size_t positives = 0;
  for (auto v : y) positives += v ? 1 : 0;
  if (positives == 0 || positives == y.size())
    throw GlmError("logistic fit needs both poor and good calls");

  LogisticModel m;
  m.terms = std::move(terms);
  m.ridge = opt.ridge;
  m.coefficients = Eigen::VectorXd::Zero(q);
  m.coefficients(0) = logit(static_cast<double>(positives) / static_cast<double>(n));
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(q, opt.ridge);
  pen(0) = 0.0;

  auto [ll, pll] = detail::logistic_loglik(x, y, m.coefficients, opt.ridge);
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    m.iterations = it;
    const Eigen::VectorXd p = (x * m.coefficients).unaryExpr([](double e) { return logistic(e); });
    Eigen::VectorXd w(n), resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
      resid(i) = (y[static_cast<std::size_t>(i)] ? 1.0 : 0.0) - p(i);
    }
    Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
    h.diagonal() += pen;
    const Eigen::VectorXd grad = x.transpose() * resid - pen.cwiseProduct(m.coefficients);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw GlmError("singular weighted system in logistic fit");
    const Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) throw GlmError("singular weighted system in logistic fit");

    double scale = 1.0;
    Eigen::VectorXd next;
    std::pair<double, double> nll;
    for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
      next = m.coefficients + scale * step;
      nll = detail::logistic_loglik(x, y, next, opt.ridge);
      if (nll.second >= pll - 1e-12 * std::abs(pll)) break;
    }
    if (nll.second < pll - 1e-12 * std::abs(pll)) break;  // no ascent direction left
    const double change = (scale * step).cwiseAbs().maxCoeff();
    m.coefficients = next;
    ll = nll.first;
    pll = nll.second;
    if (change < opt.tol) {
      m.converged = true;
      break;
    }
  }
  m.loglik = ll;
  m.penalized_loglik = pll;
  return m;
}

inline LogisticModel fit_logistic(const Design& d, const LogisticOptions& opt = {}) {
  return fit_logistic(d.matrix(), d.response(), opt, d.term_names());
}

// Greedy forward selection of group-pair interactions by AIC.
inline std::vector<GroupPair> select_interactions_aic(const Design& base, const LogisticOptions& opt = {},
                                                      std::size_t max_terms = 4) {
  std::vector<GroupPair> chosen;
  double best_aic = fit_logistic(base.with_interactions({}), opt).aic();
  while (chosen.size() < max_terms) {
    std::optional<GroupPair> pick;
    for (std::size_t a = 0; a < base.groups(); ++a) {
      for (std::size_t b = a + 1; b < base.groups(); ++b) {
        if (std::find(chosen.begin(), chosen.end(), GroupPair{a, b}) != chosen.end()) continue;
        auto trial = chosen;
        trial.emplace_back(a, b);
        const double aic = fit_logistic(base.with_interactions(trial), opt).aic();
        if (aic < best_aic - 1e-9) {
          best_aic = aic;
          pick = GroupPair{a, b};
        }
      }
    }
    if (!pick) break;
    chosen.push_back(*pick);
  }
  return chosen;
}

// ---------------------------------------------------------------------------
// Evaluation

struct RocCurve {
  double auc = 0.5;
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), from (0,0) to (1,1)

  // TPR at the given FPR by linear interpolation between ROC points.
  double tpr_at(double fpr) const {
    if (points.empty()) return 0.0;
    fpr = std::clamp(fpr, 0.0, 1.0);
    double best = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      const auto [x0, y0] = points[i - 1];
      const auto [x1, y1] = points[i];
      if (fpr < x0 || fpr > x1) continue;
      const double v = x1 > x0 ? y0 + (y1 - y0) * (fpr - x0) / (x1 - x0) : std::max(y0, y1);
      best = std::max(best, v);
    }
    return best;
  }
};

// AUC as the Mann-Whitney rank statistic with midranks for ties.
inline RocCurve evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw GlmError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw GlmError("ROC evaluation needs both classes");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  RocCurve roc;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) rank_sum += labels[idx[t]] ? midrank : 0.0;
    i = j;
  }
  const double dp = static_cast<double>(pos), dn = static_cast<double>(neg);
  roc.auc = (rank_sum - dp * (dp + 1.0) / 2.0) / (dp * dn);

  // Walk thresholds from the highest score down.
  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = n; i > 0;) {
    std::size_t j = i;
    while (j > 0 && scores[idx[j - 1]] == scores[idx[i - 1]]) {
      --j;
      (labels[idx[j]] ? tp : fp) += 1;
    }
    roc.points.emplace_back(static_cast<double>(fp) / dn, static_cast<double>(tp) / dp);
    i = j;
  }
  return roc;
}

inline RocCurve evaluate(const LogisticModel& model, const Design& design) {
  const Eigen::VectorXd p = model.predict(design.matrix());
  return evaluate(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), design.response());
}

// ---------------------------------------------------------------------------
// Counterfactual impact

struct ImpactOptions {
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  // Refit the model inside each bootstrap replicate (slower; also captures
  // coefficient uncertainty). Default resamples the prediction step only.
  bool refit = false;
  // Two-sided percentile interval level.
  double ci_level = 0.95;
  LogisticOptions fit;
};

struct GroupImpact {
  std::string group;
  std::size_t index = 0;
  double reduction = 0.0;   // relative to the baseline predicted PCR
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double baseline_pcr = 0.0;
  double fixed_pcr = 0.0;
};

namespace detail {

inline double relative_drop(const Eigen::VectorXd& orig, const Eigen::VectorXd& fixed) {
  const double base = orig.mean();
  return base > 0.0 ? (base - fixed.mean()) / base : 0.0;
}

inline std::vector<bool> fixed_mask(std::size_t groups, std::span<const std::size_t> fixed) {
  std::vector<bool> m(groups, false);
  for (auto g : fixed) m.at(g) = true;
  return m;
}

}  // namespace detail

// Relative reduction of the mean predicted poor-call probability when the
// given groups are forced absent on every record.
inline double fixed_reduction(const LogisticModel& model, const Design& design, std::span<const std::size_t> fixed) {
  const Eigen::VectorXd orig = model.predict(design.matrix());
  const Eigen::VectorXd fix = model.predict(design.matrix(detail::fixed_mask(design.groups(), fixed)));
  return detail::relative_drop(orig, fix);
}

inline GroupImpact group_fix_impact(const LogisticModel& model, const Design& design, std::size_t group,
                                    const ImpactOptions& opt = {}) {
  if (group >= design.groups()) throw GlmError("group index out of range");
  if (!(opt.ci_level > 0.0 && opt.ci_level < 1.0)) throw GlmError("ci_level must lie in (0, 1)");
  const std::size_t fixed[] = {group};
  const Eigen::VectorXd orig = model.predict(design.matrix());
  const Eigen::VectorXd fix = model.predict(design.matrix(detail::fixed_mask(design.groups(), fixed)));

  GroupImpact gi;
  gi.group = design.group_names()[group];
  gi.index = group;
  gi.baseline_pcr = orig.mean();
  gi.fixed_pcr = fix.mean();
  gi.reduction = detail::relative_drop(orig, fix);
  gi.ci_lo = gi.ci_hi = gi.reduction;
  if (opt.bootstrap == 0) return gi;

  const std::size_t n = design.rows();
  std::vector<double> reps(opt.bootstrap, std::numeric_limits<double>::quiet_NaN());
  parallel_for(opt.bootstrap, opt.threads, [&](std::size_t b) {
    Rng rng = Rng::stream(opt.seed, b);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = rng.below(n);
    if (!opt.refit) {
      double so = 0.0, sf = 0.0;
      for (auto i : idx) {
        so += orig(static_cast<Eigen::Index>(i));
        sf += fix(static_cast<Eigen::Index>(i));
      }
      reps[b] = so > 0.0 ? (so - sf) / so : 0.0;
      return;
    }
    const Design sub = design.subset(idx);
    try {
      const auto refit = fit_logistic(sub, opt.fit);
      reps[b] = fixed_reduction(refit, sub, fixed);
    } catch (const GlmError&) {
      // replicate without both classes; left out of the interval
    }
  });
  std::vector<double> ok;
  for (double r : reps)
    if (std::isfinite(r)) ok.push_back(r);
  if (!ok.empty()) {
    const double tail = 0.5 * (1.0 - opt.ci_level);
    gi.ci_lo = quantile_of(ok, tail);
    gi.ci_hi = quantile_of(ok, 1.0 - tail);
  }
  return gi;
}

struct CumulativeStep {
  std::string group;
  std::size_t index = 0;
  double cumulative_reduction = 0.0;
};

// Fixes groups one after another in `order`, reporting the running reduction.
inline std::vector<CumulativeStep> cumulative_impact(const LogisticModel& model, const Design& design,
                                                     const std::vector<std::size_t>& order) {
  const Eigen::VectorXd orig = model.predict(design.matrix());
  std::vector<bool> fixed(design.groups(), false);
  std::vector<CumulativeStep> out;
  for (auto g : order) {
    if (g >= design.groups()) throw GlmError("group index out of range");
    fixed[g] = true;
    const Eigen::VectorXd fix = model.predict(design.matrix(fixed));
    out.push_back({design.group_names()[g], g, detail::relative_drop(orig, fix)});
  }
  return out;
}

struct ImpactReport {
  double baseline_pcr = 0.0;   // mean predicted probability
  double observed_pcr = 0.0;
  std::vector<GroupImpact> groups;  // design order
  std::vector<CumulativeStep> cumulative;
  double auc = 0.0;
  double baseline_auc = 0.0;  // any_token_reported as the score
  std::pair<double, double> baseline_operating_point;  // (fpr, tpr) of any_token_reported
  std::pair<double, double> tpr_at_fpr;                // model TPR at the baseline FPR
};

// Individual and cumulative reductions (cumulative order: descending
// individual reduction, ties by group order) plus ROC summaries.
inline ImpactReport impact_report(const LogisticModel& model, const Design& design, const ImpactOptions& opt = {}) {
  ImpactReport rep;
  for (std::size_t g = 0; g < design.groups(); ++g) {
    ImpactOptions o = opt;
    o.seed = mix64(opt.seed + g);
    rep.groups.push_back(group_fix_impact(model, design, g, o));
  }
  std::vector<std::size_t> order(design.groups());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rep.groups[a].reduction > rep.groups[b].reduction;
  });
  rep.cumulative = cumulative_impact(model, design, order);

  const Eigen::VectorXd p = model.predict(design.matrix());
  rep.baseline_pcr = p.mean();
  double observed = 0.0;
  for (auto v : design.response()) observed += v;
  rep.observed_pcr = observed / static_cast<double>(design.rows());

  const auto roc = evaluate(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), design.response());
  rep.auc = roc.auc;
  const std::vector<double> any(design.any_token().begin(), design.any_token().end());
  const auto base = evaluate(any, design.response());
  rep.baseline_auc = base.auc;
  // The binary score has a single interior operating point.
  rep.baseline_operating_point = base.points.size() > 2 ? base.points[1] : std::make_pair(0.0, 0.0);
  rep.tpr_at_fpr = {rep.baseline_operating_point.first, roc.tpr_at(rep.baseline_operating_point.first)};
  return rep;
}

}  // namespace ptq
