#pragma once

// JSON and CSV emission for every report type, plus generator specs in JSON.
// Key order is fixed (ordered_json) and numbers use shortest round-trip
// formatting, so identical inputs give byte-identical files.

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ptq/descriptives.hpp"
#include "ptq/factor.hpp"
#include "ptq/glm.hpp"
#include "ptq/polychoric.hpp"
#include "ptq/synthetic.hpp"
#include "ptq/timu.hpp"

namespace ptq {

using Json = nlohmann::ordered_json;

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const FrequencyReport& r) {
  Json tokens = Json::array();
  for (const auto& f : r.tokens)
    tokens.push_back({{"token", f.token},
                      {"count_all", f.count_all},
                      {"rate_all", f.rate_all},
                      {"count_poor", f.count_poor},
                      {"rate_poor", optional_number(f.rate_poor)}});
  Json by_all = Json::array(), by_poor = Json::array();
  for (auto i : r.order_by_all()) by_all.push_back(r.tokens[i].token);
  if (r.population_poor > 0)
    for (auto i : r.order_by_poor()) by_poor.push_back(r.tokens[i].token);
  return {{"population_all", r.population_all},
          {"population_poor", r.population_poor},
          {"rate_poor_defined", r.population_poor > 0},
          {"tokens", std::move(tokens)},
          {"order_by_rate_all", std::move(by_all)},
          {"order_by_rate_poor", std::move(by_poor)}};
}

inline Json to_json(const InformationGain& ig) {
  return {{"bits", ig.bits},
          {"entropy_y", ig.entropy_y},
          {"fraction", optional_number(ig.fraction)},
          {"defined", ig.fraction.has_value()}};
}

inline Json to_json(const JaccardMatrix& m) {
  Json values = Json::array(), undefined = Json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.size(); ++j) {
      row.push_back(m.at(i, j));
      if (m.is_undefined(i, j) && i < j) undefined.push_back({m.tokens[i], m.tokens[j]});
    }
    values.push_back(std::move(row));
  }
  return {{"tokens", m.tokens}, {"values", std::move(values)}, {"undefined_pairs", std::move(undefined)}};
}

inline Json to_json(const TimuResult& r) {
  return {{"selector", r.selector},
          {"mean_impact", r.mean_impact},
          {"ci95_halfwidth", r.ci95_halfwidth},
          {"n", r.n},
          {"selected", r.selected},
          {"metric_mean", r.metric_mean},
          {"fixed_mean", r.fixed_mean}};
}

inline Json to_json(const PolychoricMatrix& m) {
  return {{"tokens", m.tokens},
          {"values", matrix_json(m.values)},
          {"psd_repaired", m.psd_repaired},
          {"min_eigenvalue_before", m.min_eigenvalue_before},
          {"min_eigenvalue_after", m.min_eigenvalue_after},
          {"repair_frobenius", m.repair_frobenius},
          {"repair_alert", m.repair_alert()},
          {"corrected_pairs", m.corrected_pairs},
          {"unconverged_pairs", m.unconverged_pairs}};
}

inline Json to_json(const ParallelAnalysisResult& pa) {
  return {{"k", pa.k}, {"observed", pa.observed}, {"reference", pa.reference}};
}

inline Json to_json(const FactorModel& m) {
  return {{"tokens", m.tokens},
          {"rotation", m.rotation == Rotation::varimax ? "varimax" : "none"},
          {"loadings", matrix_json(m.loadings)},
          {"communalities", std::vector<double>(m.communalities.data(), m.communalities.data() + m.communalities.size())},
          {"variance_explained", m.variance_explained},
          {"total_variance_explained", m.total_variance_explained()},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"heywood", m.heywood}};
}

inline Json to_json(const ProblemGrouping& g) {
  Json groups = Json::array();
  for (std::size_t i = 0; i < g.groups.size(); ++i)
    groups.push_back({{"name", g.groups[i].name},
                      {"factor", g.groups[i].factor + 1},
                      {"variance_explained", g.groups[i].variance_explained},
                      {"tokens", g.member_names(i)}});
  Json unassigned = Json::array();
  for (auto t : g.unassigned) unassigned.push_back(g.tokens[t]);
  return {{"threshold", g.threshold}, {"groups", std::move(groups)}, {"unassigned", std::move(unassigned)}};
}

// Rebuilds a grouping from its JSON form against a token list.
inline ProblemGrouping grouping_from_json(const Json& j, const std::vector<std::string>& tokens) {
  ProblemGrouping g;
  g.tokens = tokens;
  g.threshold = j.value("threshold", 0.5);
  std::vector<bool> used(tokens.size(), false);
  std::size_t factor = 0;
  for (const auto& jg : j.at("groups")) {
    ProblemGroup grp;
    grp.name = jg.value("name", "group_" + std::to_string(g.groups.size() + 1));
    grp.factor = factor++;
    grp.variance_explained = jg.value("variance_explained", 0.0);
    for (const auto& name : jg.at("tokens")) {
      const auto s = name.get<std::string>();
      auto it = std::find(tokens.begin(), tokens.end(), s);
      if (it == tokens.end()) throw GlmError("grouping refers to missing token " + s);
      const auto idx = static_cast<std::size_t>(it - tokens.begin());
      if (used[idx]) throw GlmError("token " + s + " appears in two groups");
      used[idx] = true;
      grp.members.push_back(idx);
    }
    g.groups.push_back(std::move(grp));
  }
  for (std::size_t t = 0; t < tokens.size(); ++t)
    if (!used[t]) g.unassigned.push_back(t);
  return g;
}

inline Json to_json(const LogisticModel& m) {
  Json coef = Json::array();
  for (Eigen::Index i = 0; i < m.coefficients.size(); ++i)
    coef.push_back({{"term", i < static_cast<Eigen::Index>(m.terms.size()) ? m.terms[static_cast<std::size_t>(i)]
                                                                           : "x" + std::to_string(i)},
                    {"coefficient", m.coefficients(i)}});
  return {{"coefficients", std::move(coef)},
          {"ridge", m.ridge},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"loglik", m.loglik},
          {"aic", m.aic()}};
}

inline Json to_json(const ImpactReport& r) {
  Json groups = Json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"group", g.group},
                      {"individual_reduction", g.reduction},
                      {"ci_lo", g.ci_lo},
                      {"ci_hi", g.ci_hi},
                      {"fixed_pcr", g.fixed_pcr}});
  Json cumulative = Json::array();
  for (const auto& c : r.cumulative) cumulative.push_back({{"group", c.group}, {"cumulative_reduction", c.cumulative_reduction}});
  return {{"baseline_pcr", r.baseline_pcr},
          {"observed_pcr", r.observed_pcr},
          {"groups", std::move(groups)},
          {"cumulative", std::move(cumulative)},
          {"auc", r.auc},
          {"baseline_auc", r.baseline_auc},
          {"baseline_operating_point", {{"fpr", r.baseline_operating_point.first}, {"tpr", r.baseline_operating_point.second}}},
          {"tpr_at_fpr", {{"fpr", r.tpr_at_fpr.first}, {"tpr", r.tpr_at_fpr.second}}}};
}

// ---------------------------------------------------------------------------
// CSV

inline void write_matrix_csv(std::ostream& out, const std::vector<std::string>& row_names,
                             const std::vector<std::string>& col_names, const Eigen::MatrixXd& m,
                             const std::string& corner = "token") {
  out << corner;
  for (const auto& c : col_names) out << ',' << c;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << row_names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << detail::format_double(m(i, j));
    out << '\n';
  }
}

inline void write_polychoric_csv(std::ostream& out, const PolychoricMatrix& m) {
  write_matrix_csv(out, m.tokens, m.tokens, m.values);
}

inline void write_loadings_csv(std::ostream& out, const FactorModel& m) {
  std::vector<std::string> cols;
  for (std::size_t f = 0; f < m.factor_count(); ++f) cols.push_back("factor_" + std::to_string(f + 1));
  Eigen::MatrixXd with_h(m.loadings.rows(), m.loadings.cols() + 1);
  with_h << m.loadings, m.communalities;
  cols.push_back("communality");
  write_matrix_csv(out, m.tokens, cols, with_h);
}

// Long format: token,population,rate
inline void write_frequency_plot_csv(std::ostream& out, const FrequencyReport& r) {
  out << "token,population,rate\n";
  for (const auto& f : r.tokens) {
    out << f.token << ",all," << detail::format_double(f.rate_all) << '\n';
    out << f.token << ",poor," << (f.rate_poor ? detail::format_double(*f.rate_poor) : std::string("NA")) << '\n';
  }
}

inline void write_jaccard_plot_csv(std::ostream& out, const JaccardMatrix& m) {
  out << "token_a,token_b,jaccard,undefined\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      out << m.tokens[i] << ',' << m.tokens[j] << ',' << detail::format_double(m.at(i, j)) << ','
          << (m.is_undefined(i, j) ? 1 : 0) << '\n';
}

inline void write_timu_plot_csv(std::ostream& out, const std::vector<std::pair<std::string, std::vector<TimuResult>>>& by_metric) {
  out << "metric,token,impact,ci\n";
  for (const auto& [metric, results] : by_metric)
    for (const auto& r : results)
      out << metric << ',' << r.selector << ',' << detail::format_double(r.mean_impact) << ','
          << detail::format_double(r.ci95_halfwidth) << '\n';
}

inline void write_impact_plot_csv(std::ostream& out, const ImpactReport& r) {
  out << "group,individual,cumulative,ci_lo,ci_hi\n";
  for (const auto& c : r.cumulative) {
    const auto& g = r.groups[c.index];
    out << g.group << ',' << detail::format_double(g.reduction) << ',' << detail::format_double(c.cumulative_reduction)
        << ',' << detail::format_double(g.ci_lo) << ',' << detail::format_double(g.ci_hi) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Generator specs

inline Json to_json(const GeneratorSpec& s) {
  Json groups = Json::array();
  for (const auto& g : s.groups) {
    Json names = Json::array();
    for (auto t : g) names.push_back(s.vocabulary.names[t]);
    groups.push_back(std::move(names));
  }
  Json inter = Json::array();
  for (const auto& it : s.interactions) inter.push_back({it.a + 1, it.b + 1, it.coefficient});
  return {{"tokens", s.vocabulary.names},
          {"display_text", s.vocabulary.display_text},
          {"loadings", matrix_json(s.loadings)},
          {"thresholds", s.thresholds},
          {"groups", std::move(groups)},
          {"glm", {{"intercept", s.intercept}, {"groups", s.group_coefficients}, {"interactions", std::move(inter)}}},
          {"duration", {{"base_mean_s", s.duration.base_mean_s}, {"sigma", s.duration.sigma}, {"group_penalty", s.duration.group_penalty}}},
          {"ptq_response_rate", s.ptq_response_rate},
          {"n", s.n},
          {"seed", s.seed}};
}

// Parses a generator spec. `tokens` defaults to the standard vocabulary;
// interactions are 1-based group pairs with a coefficient.
inline GeneratorSpec generator_spec_from_json(const Json& j) {
  GeneratorSpec s;
  try {
    if (j.contains("tokens")) {
      auto names = j.at("tokens").get<std::vector<std::string>>();
      s.vocabulary = TokenVocabulary::from_names(names);
      if (j.contains("display_text")) s.vocabulary.display_text = j.at("display_text").get<std::vector<std::string>>();
    } else {
      s.vocabulary = TokenVocabulary::standard();
    }
    const auto rows = j.at("loadings").get<std::vector<std::vector<double>>>();
    const std::size_t k = rows.empty() ? 0 : rows.front().size();
    s.loadings = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != k) throw ValidationError("generator spec: ragged loadings");
      for (std::size_t f = 0; f < k; ++f) s.loadings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i][f];
    }
    s.thresholds = j.at("thresholds").get<std::vector<double>>();
    for (const auto& g : j.at("groups")) {
      std::vector<std::size_t> members;
      for (const auto& name : g) {
        auto idx = s.vocabulary.index_of(name.get<std::string>());
        if (!idx) throw ValidationError("generator spec: unknown token " + name.get<std::string>());
        members.push_back(*idx);
      }
      s.groups.push_back(std::move(members));
    }
    const auto& glm = j.at("glm");
    s.intercept = glm.at("intercept").get<double>();
    s.group_coefficients = glm.at("groups").get<std::vector<double>>();
    for (const auto& it : glm.value("interactions", Json::array())) {
      const auto a = it.at(0).get<std::size_t>(), b = it.at(1).get<std::size_t>();
      if (a < 1 || b < 1) throw ValidationError("generator spec: interaction groups are 1-based");
      s.interactions.push_back({a - 1, b - 1, it.at(2).get<double>()});
    }
    if (j.contains("duration")) {
      const auto& d = j.at("duration");
      s.duration.base_mean_s = d.value("base_mean_s", s.duration.base_mean_s);
      s.duration.sigma = d.value("sigma", s.duration.sigma);
      s.duration.group_penalty = d.value("group_penalty", std::vector<double>{});
    }
    s.ptq_response_rate = j.value("ptq_response_rate", 1.0);
    s.n = j.value("n", std::size_t{1000});
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("generator spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline Json to_json(const GroundTruth& t, const GeneratorSpec& s) {
  Json groups = Json::array();
  for (const auto& g : t.groups) groups.push_back({{"tokens", g.tokens}, {"reduction", g.reduction}, {"mc_se", g.mc_se}});
  return {{"factor_count", t.factor_count},
          {"tokens", s.vocabulary.names},
          {"true_rho", matrix_json(t.true_rho)},
          {"pcr", t.pcr},
          {"groups", std::move(groups)}};
}

}  // namespace ptq
