#pragma once

// Univariate token impact: counterfactually "fix" a metric on the calls that
// reported a problem and measure how far the metric mean moves.

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ptq/survey.hpp"

namespace ptq {

enum class MetricKind { poor_indicator, duration_s };

inline const char* metric_name(MetricKind k) {
  return k == MetricKind::poor_indicator ? "pcr" : "acd";
}

struct MetricSpec {
  MetricKind kind = MetricKind::poor_indicator;
  // Counterfactual value written onto the problem set. Unset means the
  // default: 0 for the poor indicator, mean duration of calls with no
  // reported problem for duration.
  std::optional<double> fix_value;
};

// Which records form the problem set.
struct Selector {
  std::string label;
  std::function<bool(const CallRecord&)> matches;

  static Selector token(const TokenVocabulary& v, std::size_t t) {
    return {v.names.at(t), [t](const CallRecord& r) { return r.tokens.test(t); }};
  }

  // Records reporting any of the listed tokens.
  static Selector any_of(const TokenVocabulary& v, const std::vector<std::size_t>& ts) {
    TokenMask mask;
    std::string label;
    for (auto t : ts) {
      mask.set(t);
      label += (label.empty() ? "" : "|") + v.names.at(t);
    }
    return {label.empty() ? "none" : label, [mask](const CallRecord& r) { return r.tokens.intersects(mask); }};
  }

  static Selector predicate(std::string label, std::function<bool(const CallRecord&)> f) {
    return {std::move(label), std::move(f)};
  }
};

struct TimuOptions {
  // Use var(X - Y) = var X + var Y - 2 cov instead of the single-cov form.
  bool strict_delta = false;
};

struct TimuResult {
  std::string selector;
  double mean_impact = 0.0;
  double ci95_halfwidth = 0.0;
  std::size_t n = 0;
  std::size_t selected = 0;
  double metric_mean = 0.0;
  double fixed_mean = 0.0;
};

inline double metric_value(const CallRecord& r, MetricKind k) {
  return k == MetricKind::poor_indicator ? (poor_call(r) ? 1.0 : 0.0) : r.duration_s;
}

inline double resolve_fix_value(const SurveyDataset& ds, const MetricSpec& m) {
  if (m.fix_value) return *m.fix_value;
  if (m.kind == MetricKind::poor_indicator) return 0.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : ds.records) {
    if (any_token_reported(r)) continue;
    sum += r.duration_s;
    ++n;
  }
  if (n == 0) throw ValidationError("no calls without a reported problem to derive the duration fix value");
  return sum / static_cast<double>(n);
}

// Impact of fixing `metric` to `fix_value` on the selected records, with a
// 95% interval from propagation of errors. Variances are population (1/n).
inline TimuResult timu(const SurveyDataset& ds, const Selector& problem_set, MetricKind metric,
                       double fix_value, const TimuOptions& opt = {}) {
  if (ds.empty()) throw ValidationError("timu: empty dataset");
  const std::size_t n = ds.size();
  std::vector<double> orig(n), fixed(n);
  TimuResult res;
  res.selector = problem_set.label;
  res.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    orig[i] = metric_value(ds.records[i], metric);
    const bool sel = problem_set.matches(ds.records[i]);
    fixed[i] = sel ? fix_value : orig[i];
    res.selected += sel ? 1 : 0;
  }
  const double mo = mean_of(orig), mf = mean_of(fixed);
  double var_o = 0.0, var_f = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = orig[i] - mo, b = fixed[i] - mf;
    var_o += a * a;
    var_f += b * b;
    cov += a * b;
  }
  const double dn = static_cast<double>(n);
  var_o /= dn;
  var_f /= dn;
  cov /= dn;
  const double combined_var = var_o + var_f - (opt.strict_delta ? 2.0 : 1.0) * cov;
  const double combined_std = std::sqrt(std::max(0.0, combined_var));
  res.metric_mean = mo;
  res.fixed_mean = mf;
  res.mean_impact = std::abs(mo - mf);
  res.ci95_halfwidth = 1.96 * combined_std / std::sqrt(dn);
  return res;
}

inline TimuResult timu(const SurveyDataset& ds, const Selector& problem_set, const MetricSpec& metric,
                       const TimuOptions& opt = {}) {
  if (ds.empty()) throw ValidationError("timu: empty dataset");
  return timu(ds, problem_set, metric.kind, resolve_fix_value(ds, metric), opt);
}

// One result per token, by descending impact; ties keep vocabulary order.
inline std::vector<TimuResult> rank_tokens(const SurveyDataset& ds, const MetricSpec& metric,
                                           const TimuOptions& opt = {}, unsigned threads = 1) {
  const std::size_t p = ds.token_count();
  if (p == 0) throw ValidationError("rank_tokens: vocabulary is empty");
  if (ds.empty()) throw ValidationError("timu: empty dataset");
  const double fix = resolve_fix_value(ds, metric);
  std::vector<TimuResult> out(p);
  parallel_for(p, threads, [&](std::size_t t) {
    out[t] = timu(ds, Selector::token(ds.vocabulary, t), metric.kind, fix, opt);
  });
  std::stable_sort(out.begin(), out.end(),
                   [](const TimuResult& a, const TimuResult& b) { return a.mean_impact > b.mean_impact; });
  return out;
}

}  // namespace ptq
