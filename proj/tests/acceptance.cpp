// Acceptance run: one PASS/FAIL line per criterion; exits non-zero when any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ptq/ptq.hpp"

#ifndef PTQ_CLI_PATH
#error "PTQ_CLI_PATH must point at the ptq executable"
#endif

using namespace ptq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string timing = fmt("%.2f s", secs);
  if (limit_s > 0) {
    timing += fmt(", limit %.0f s", limit_s);
    if (secs >= limit_s) {
      o.pass = false;
      o.detail += "; over time limit";
    }
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s [%s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), timing.c_str());
  std::fflush(stdout);
}

ContingencyTable2x2 simulate_table(double rho, double tx, double ty, std::size_t n, Rng& rng) {
  ContingencyTable2x2 t;
  const double s = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rho * z1 + s * rng.normal();
    const bool x = z1 > tx, y = z2 > ty;
    (x ? (y ? t.n11 : t.n10) : (y ? t.n01 : t.n00)) += 1.0;
  }
  return t;
}

std::set<std::set<std::size_t>> partition(const std::vector<std::vector<std::size_t>>& groups) {
  std::set<std::set<std::size_t>> out;
  for (const auto& g : groups) out.insert({g.begin(), g.end()});
  return out;
}

// Analysis set and estimated grouping, as the CLI computes them.
struct Pipeline {
  SurveyDataset data;
  std::size_t k = 0;
  ProblemGrouping grouping;
};

Pipeline run_pipeline(const GeneratorSpec& spec, std::uint64_t seed) {
  Pipeline p;
  p.data = clean_uninformative(restrict_tokened_poor(generate_dataset(spec), seed), 10).dataset;
  const auto corr = polychoric_matrix(p.data);
  ParallelAnalysisOptions po;
  po.seed = mix64(seed ^ 0x7061);
  p.k = parallel_analysis_scan(corr, p.data, po).k;
  if (p.k == 0) return p;
  p.grouping = assign_groups(varimax(extract_factors(corr, std::min(p.k, corr.size() - 1))));
  return p;
}

// Estimated groups expressed in the spec's token indices.
std::vector<std::vector<std::size_t>> groups_in_spec_indices(const ProblemGrouping& g, const GeneratorSpec& spec) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < g.groups.size(); ++i) {
    std::vector<std::size_t> members;
    for (const auto& name : g.member_names(i)) members.push_back(*spec.vocabulary.index_of(name));
    out.push_back(members);
  }
  return out;
}

std::vector<std::uint8_t> bits_of(std::size_t n, std::uint64_t mask) {
  std::vector<std::uint8_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (mask >> i) & 1u;
  return v;
}

// ---------------------------------------------------------------------------

Outcome c1_polychoric_analytic() {
  double worst = 0.0;
  for (double p11 : {0.25, 0.30, 0.375}) {
    const double scale = 1e6;
    ContingencyTable2x2 t{p11 * scale, (0.5 - p11) * scale, (0.5 - p11) * scale, p11 * scale};
    const double want = std::sin(2.0 * M_PI * (p11 - 0.25));
    worst = std::max(worst, std::abs(estimate_polychoric(t).rho - want));
  }
  return {worst <= 0.01, "max |rho - sin(2 pi (p11 - 1/4))| = " + fmt("%.2e", worst) + " (tol 0.01)"};
}

Outcome c2_polychoric_consistency() {
  double worst_median = 0.0;
  std::string per;
  for (double rho : {-0.5, 0.0, 0.3, 0.7}) {
    std::vector<double> err;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>((rho + 1.0) * 1000));
      const auto t = simulate_table(rho, 0.3, 0.8, 50000, rng);
      err.push_back(std::abs(estimate_polychoric(t).rho - rho));
    }
    const double med = quantile_of(err, 0.5);
    worst_median = std::max(worst_median, med);
    per += fmt(" %.3f", med);
  }
  return {worst_median < 0.03, "median |error| per rho {-0.5,0,0.3,0.7}:" + per + " (tol 0.03)"};
}

Outcome c3_bvn() {
  double worst = 0.0;
  std::size_t points = 0;
  for (double h : {-2.0, -0.7, 0.0, 0.9, 2.3})
    for (double k : {-1.6, -0.2, 0.5, 1.2, 2.8})
      for (double r : {-0.9, -0.3, 0.4, 0.95}) {
        worst = std::max(worst, std::abs(bvn_upper(h, k, r) - oracle::bvn_upper(h, k, r)));
        ++points;
      }
  const double id0 = std::abs(bvn_upper(0, 0, 0.0) - 0.25);
  const double id1 = std::abs(bvn_upper(0, 0, 1.0) - 0.5);
  const double idh = std::abs(bvn_upper(0, 0, 0.5) - 1.0 / 3.0);
  const double ids = std::max({id0, id1, idh});
  return {points == 100 && worst < 1e-6 && ids <= 1e-6,
          std::to_string(points) + "-point grid max |err| = " + fmt("%.2e", worst) +
              " (tol 1e-6); identities max |err| = " + fmt("%.2e", ids) + " (tol 1e-6)"};
}

Outcome c4_factor_recovery() {
  int ok = 0;
  std::string misses;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto spec = table_one_world(20000, seed);
    const auto p = run_pipeline(spec, seed);
    const bool exact = p.k == 5 && partition(groups_in_spec_indices(p.grouping, spec)) == partition(spec.groups);
    if (exact)
      ++ok;
    else
      misses += " seed " + std::to_string(seed) + " (k=" + std::to_string(p.k) + ")";
  }
  return {ok >= 9, std::to_string(ok) + "/10 seeds with k=5 and the exact partition (need 9)" +
                       (misses.empty() ? "" : ";" + misses)};
}

Outcome c5_varimax() {
  Rng rng(515);
  int ok = 0;
  double worst_h = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    FactorModel m;
    for (int i = 0; i < 15; ++i) m.tokens.push_back("t" + std::to_string(i + 1));
    m.loadings.resize(15, 5);
    for (Eigen::Index i = 0; i < 15; ++i)
      for (Eigen::Index f = 0; f < 5; ++f) m.loadings(i, f) = 0.9 * rng.uniform() - 0.45;
    m.communalities = m.loadings.rowwise().squaredNorm();
    const auto v = varimax(m);
    const double dh = (v.communalities - m.communalities).cwiseAbs().maxCoeff();
    worst_h = std::max(worst_h, dh);
    if (varimax_criterion(v.loadings) >= varimax_criterion(m.loadings) && dh <= 1e-9) ++ok;
  }
  return {ok == 50, std::to_string(ok) + "/50 with criterion post >= pre; max communality drift " + fmt("%.1e", worst_h) +
                        " (tol 1e-9)"};
}

Outcome c6_information_gain() {
  double worst = 0.0;
  std::size_t fixtures = 0;
  // every sequence up to 6 rows
  for (std::size_t n = 1; n <= 6; ++n)
    for (std::uint64_t mx = 0; mx < (1u << n); ++mx)
      for (std::uint64_t my = 0; my < (1u << n); ++my) {
        const auto x = bits_of(n, mx), y = bits_of(n, my);
        worst = std::max(worst, std::abs(information_gain(x, y).bits - oracle::information_gain(x, y)));
        ++fixtures;
      }
  // every count table up to 20 rows (the value only depends on the counts)
  for (std::size_t n = 7; n <= 20; ++n)
    for (std::size_t a = 0; a <= n; ++a)
      for (std::size_t b = 0; a + b <= n; ++b)
        for (std::size_t c = 0; a + b + c <= n; ++c) {
          std::vector<std::uint8_t> x, y;
          const std::size_t d = n - a - b - c;
          for (std::size_t i = 0; i < a; ++i) x.push_back(0), y.push_back(0);
          for (std::size_t i = 0; i < b; ++i) x.push_back(0), y.push_back(1);
          for (std::size_t i = 0; i < c; ++i) x.push_back(1), y.push_back(0);
          for (std::size_t i = 0; i < d; ++i) x.push_back(1), y.push_back(1);
          worst = std::max(worst, std::abs(information_gain(x, y).bits - oracle::information_gain(x, y)));
          ++fixtures;
        }
  const double perfect = information_gain(std::vector<std::uint8_t>{1, 1, 0, 0}, std::vector<std::uint8_t>{1, 1, 0, 0}).bits;
  Rng rng(606);
  std::vector<std::uint8_t> x(100000), y(100000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.bernoulli(0.3);
    y[i] = rng.bernoulli(0.5);
  }
  const double indep = information_gain(x, y).bits;
  return {worst <= 1e-10 && std::abs(perfect - 1.0) <= 1e-12 && indep < 0.01,
          std::to_string(fixtures) + " fixtures, max |err| = " + fmt("%.1e", worst) + " (tol 1e-10); perfect IG = " +
              fmt("%.12f", perfect) + "; independent n=100000 IG = " + fmt("%.2e", indep) + " (< 0.01)"};
}

Outcome c7_jaccard() {
  Rng rng(707);
  std::size_t pairs = 0, mismatches = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t p = 10, n = 1000;
    std::vector<std::vector<int>> rows(n, std::vector<int>(p, 0));
    std::vector<int> poor(n);
    for (std::size_t i = 0; i < n; ++i) {
      poor[i] = rng.bernoulli(0.2);
      for (std::size_t t = 0; t + 1 < p; ++t) rows[i][t] = rng.bernoulli(0.02 + 0.05 * static_cast<double>(t));
      if (rows[i][0]) rows[i][1] = 1;  // nested pair
    }
    const auto ds = oracle::dataset({"a", "b", "c", "d", "e", "f", "g", "h", "i", "never"}, rows, poor);
    const auto m = jaccard_matrix(ds);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) {
        const auto a = token_series(ds, i), b = token_series(ds, j);
        std::size_t uni = 0;
        for (std::size_t r = 0; r < n; ++r) uni += (a[r] || b[r]) ? 1 : 0;
        const bool undefined_ok = m.is_undefined(i, j) == (uni == 0);
        if (m.at(i, j) != oracle::jaccard(a, b) || m.at(j, i) != m.at(i, j) || !undefined_ok) ++mismatches;
        ++pairs;
      }
  }
  return {mismatches == 0, std::to_string(pairs) + " pairs on 1000-row fixtures, " + std::to_string(mismatches) +
                               " mismatches (exact)"};
}

Outcome c8_timu() {
  std::vector<std::vector<int>> rows = {{1}, {1}, {1}, {0}, {1}, {0}, {0}, {0}, {0}, {0}};
  const auto ds = oracle::dataset({"t"}, rows, {1, 1, 1, 1, 0, 0, 0, 0, 0, 0});
  const double hand = timu(ds, Selector::token(ds.vocabulary, 0), MetricSpec{}).mean_impact;
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto spec = table_one_world(5000, seed, 0.55, 0.9);
    Rng rng = Rng::stream(seed, 88);
    for (auto& c : spec.group_coefficients) c = 0.5 + 2.0 * rng.uniform();
    const auto w = generate_dataset(spec);
    double sum = 0.0;
    for (const auto& r : rank_tokens(w, MetricSpec{})) sum += r.mean_impact;
    std::vector<std::size_t> all(w.token_count());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (sum >= timu(w, Selector::any_of(w.vocabulary, all), MetricSpec{}).mean_impact) ++ok;
  }
  return {std::abs(hand - 0.3) <= 1e-15 && ok == 20,
          "hand fixture impact = " + fmt("%.17g", hand) + " (0.4 - 0.1 in doubles, tol 1e-15); overestimation holds in " +
              std::to_string(ok) + "/20 worlds"};
}

Outcome c9_glm() {
  const std::size_t n = 100000;
  Rng rng(909);
  Eigen::MatrixXd x(n, 2);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = rng.normal();
    y[i] = rng.bernoulli(logistic(-3.0 + 2.0 * x(r, 1)));
  }
  const auto m = fit_logistic(x, y);
  const double e0 = std::abs(m.coefficients(0) + 3.0), e1 = std::abs(m.coefficients(1) - 2.0);

  std::vector<std::uint8_t> yi(997, 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < yi.size(); ++i) pos += (yi[i] = rng.bernoulli(0.17));
  const double prev = static_cast<double>(pos) / static_cast<double>(yi.size());
  const double ei = std::abs(fit_logistic(Eigen::MatrixXd::Ones(997, 1), yi).coefficients(0) - std::log(prev / (1 - prev)));

  double worst_auc = 0.0;
  std::size_t fixtures = 0;
  for (std::size_t len = 2; len <= 200; ++len) {
    std::vector<double> s(len);
    std::vector<std::uint8_t> lab(len);
    for (std::size_t i = 0; i < len; ++i) {
      lab[i] = rng.bernoulli(0.35);
      s[i] = (len % 2) ? static_cast<double>(rng.below(5)) : rng.normal() + lab[i];
    }
    lab[0] = 1;
    lab[1] = 0;
    worst_auc = std::max(worst_auc, std::abs(evaluate(s, lab).auc - oracle::concordance(s, lab)));
    ++fixtures;
  }
  return {e0 <= 0.1 && e1 <= 0.1 && ei <= 1e-6 && worst_auc <= 1e-12,
          "beta0 err " + fmt("%.3f", e0) + ", beta err " + fmt("%.3f", e1) + " (tol 0.1); intercept-only err " +
              fmt("%.1e", ei) + " (tol 1e-6); AUC vs concordance on " + std::to_string(fixtures) +
              " fixtures max err " + fmt("%.1e", worst_auc)};
}

// Three planted worlds, fixed in advance.
std::vector<std::pair<std::string, GeneratorSpec>> timm_worlds() {
  std::vector<std::pair<std::string, GeneratorSpec>> w;
  w.emplace_back("W1 interactions", table_one_world(20000, 1));
  auto w2 = table_one_world(20000, 2);
  w2.interactions.clear();
  w.emplace_back("W2 additive", w2);
  auto w3 = table_one_world(20000, 3, 0.7, 0.8);
  w3.intercept = -2.6;
  w3.group_coefficients = {0.9, 1.6, 1.2, 1.5, 2.2};
  w3.interactions.clear();
  w.emplace_back("W3 variant", w3);
  return w;
}

Outcome c10_timm() {
  std::size_t covered = 0, total = 0;
  std::string notes;
  bool non_additive = false;
  for (const auto& [label, spec] : timm_worlds()) {
    const auto p = run_pipeline(spec, spec.seed);
    const auto est = groups_in_spec_indices(p.grouping, spec);
    // estimated group index of every planted group, matched by membership
    std::vector<std::optional<std::size_t>> map(spec.groups.size());
    for (std::size_t g = 0; g < spec.groups.size(); ++g)
      for (std::size_t e = 0; e < est.size(); ++e)
        if (std::set<std::size_t>(est[e].begin(), est[e].end()) ==
            std::set<std::size_t>(spec.groups[g].begin(), spec.groups[g].end()))
          map[g] = e;
    DesignSpec ds_spec{p.grouping, {}};
    bool mapped = true;
    for (const auto& m : map) mapped = mapped && m.has_value();
    if (!mapped) {
      notes += " " + label + ": partition not recovered;";
      total += spec.groups.size();
      continue;
    }
    for (const auto& it : spec.interactions) ds_spec.interactions.emplace_back(*map[it.a], *map[it.b]);
    const auto design = build_design(p.data, ds_spec);
    const auto model = fit_logistic(design);
    ImpactOptions io;
    io.bootstrap = 400;
    io.refit = true;
    io.ci_level = 0.99;  // five groups per world: Bonferroni for a 95% familywise level
    io.seed = mix64(spec.seed ^ 0x626f);
    const auto rep = impact_report(model, design, io);
    std::string misses;
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
      const auto truth = ground_truth_impact(spec, g, 200000, mix64(spec.seed) + g);
      const auto& gi = rep.groups[*map[g]];
      const double slack = 3.0 * truth.mc_se;
      const bool ok = gi.ci_lo - slack <= truth.reduction && truth.reduction <= gi.ci_hi + slack;
      covered += ok ? 1 : 0;
      ++total;
      if (!ok)
        misses += fmt(" g%.0f", static_cast<double>(g + 1)) + fmt(" truth %.4f", truth.reduction) +
                  fmt(" ci [%.4f,", gi.ci_lo) + fmt(" %.4f]", gi.ci_hi);
    }
    if (!spec.interactions.empty()) {
      double sum = 0.0;
      for (const auto& gi : rep.groups) sum += gi.reduction;
      const double cumulative = rep.cumulative.back().cumulative_reduction;
      non_additive = std::abs(sum - cumulative) > 0.01;
      notes += " " + label + fmt(": sum of individual %.3f", sum) + fmt(" vs cumulative %.3f;", cumulative);
    }
    if (!misses.empty()) notes += " " + label + " misses" + misses + ";";
  }
  return {covered == total && non_additive,
          std::to_string(covered) + "/" + std::to_string(total) +
              " planted groups with truth (+-3 MC se) inside the refit bootstrap 99% CI;" + notes +
              (non_additive ? " non-additivity asserted" : " non-additivity NOT observed")};
}

Outcome c11_baseline_dominance() {
  std::vector<GeneratorSpec> worlds;
  for (const auto& [label, spec] : timm_worlds()) worlds.push_back(spec);
  for (std::uint64_t s = 4; s <= 6; ++s) worlds.push_back(table_one_world(20000, s));
  for (std::uint64_t s = 1; s <= 2; ++s) worlds.push_back(independent_world(20000, s));
  for (std::uint64_t s = 1; s <= 2; ++s) worlds.push_back(one_factor_world(6, 0.6, 1.0, 20000, s));
  std::size_t ok = 0;
  double min_gap = 1.0;
  for (const auto& spec : worlds) {
    const auto ds = generate_dataset(spec);
    const auto design = build_design(ds, {oracle::planted_grouping(spec), oracle::planted_pairs(spec)});
    ImpactOptions io;
    io.bootstrap = 0;
    const auto rep = impact_report(fit_logistic(design), design, io);
    min_gap = std::min(min_gap, rep.auc - rep.baseline_auc);
    if (rep.auc > rep.baseline_auc) ++ok;
  }
  return {ok == worlds.size(), std::to_string(ok) + "/" + std::to_string(worlds.size()) +
                                   " worlds with model AUC > baseline AUC; smallest gap " + fmt("%.4f", min_gap)};
}

Outcome c12_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("ptq_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto q = [&](const std::string& name) { return "'" + (dir / name).string() + "'"; };
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string("'") + PTQ_CLI_PATH + "' " + args + " > /dev/null 2>> " + q("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };

  std::vector<std::string> problems;
  int idx = 0;
  for (const char* threads : {"1", "1", "4"}) {
    const std::string name = "sim_" + std::to_string(idx++);
    if (run("simulate --preset table1 -n 8000 -s 11 -t " + std::string(threads) + " --out " + q(name + ".csv") +
            " --truth " + q(name + ".json") + " --truth-mc 20000") != 0)
      problems.push_back("simulate failed");
  }
  for (const char* ext : {".csv", ".json"})
    for (const char* other : {"sim_1", "sim_2"})
      if (read(dir / (std::string("sim_0") + ext)) != read(dir / (std::string(other) + ext)))
        problems.push_back(std::string("simulate ") + other + ext + " differs");

  const std::string data = q("sim_0.csv");
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"describe", "describe"},
      {"timu", "timu"},
      {"factors", "timm factors --reps 30"},
      {"timm", "timm --reps 30 --bootstrap 40"},
      {"report", "report --reps 30 --bootstrap 40"},
  };
  std::size_t files = 4;
  for (const auto& [label, cmd] : commands) {
    std::vector<fs::path> outs;
    idx = 0;
    for (const char* threads : {"1", "1", "4", "0"}) {
      const fs::path out = dir / (label + "_" + std::to_string(idx++));
      if (run(cmd + " -i " + data + " -s 11 -t " + threads + " -o '" + out.string() + "'") != 0)
        problems.push_back(label + " failed at threads " + threads);
      outs.push_back(out);
    }
    for (const auto& e : fs::directory_iterator(outs[0])) {
      const auto name = e.path().filename();
      for (std::size_t i = 1; i < outs.size(); ++i)
        if (read(e.path()) != read(outs[i] / name)) problems.push_back(label + "/" + name.string() + " differs");
      ++files;
    }
  }
  {
    // impact from a saved grouping, with refitting replicates
    std::vector<fs::path> outs;
    idx = 0;
    for (const char* threads : {"1", "1", "4"}) {
      const fs::path out = dir / ("impact_" + std::to_string(idx++));
      if (run("timm impact --bootstrap 40 --refit-bootstrap -i " + data + " -s 11 -t " + threads + " --grouping " +
              q("factors_0/grouping.json") + " -o '" + out.string() + "'") != 0)
        problems.push_back(std::string("timm impact failed at threads ") + threads);
      outs.push_back(out);
    }
    for (const auto& e : fs::directory_iterator(outs[0])) {
      for (std::size_t i = 1; i < outs.size(); ++i)
        if (read(e.path()) != read(outs[i] / e.path().filename()))
          problems.push_back("timm impact/" + e.path().filename().string() + " differs");
      ++files;
    }
  }
  fs::remove_all(dir);
  std::string detail = "simulate, describe, timu, timm factors, timm impact, timm, report at threads 1/1/4/0: " +
                       std::to_string(files) + " output files compared";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty() && files > 0, detail};
}

}  // namespace

int main() {
  criterion(1, "polychoric analytic oracle", 1, c1_polychoric_analytic);
  criterion(2, "polychoric consistency", 30, c2_polychoric_consistency);
  criterion(3, "bvn_upper vs quadrature", 10, c3_bvn);
  criterion(4, "factor pipeline recovery", 300, c4_factor_recovery);
  criterion(5, "varimax properties", 0, c5_varimax);
  criterion(6, "information gain", 0, c6_information_gain);
  criterion(7, "jaccard", 0, c7_jaccard);
  criterion(8, "timu", 0, c8_timu);
  criterion(9, "logistic glm", 0, c9_glm);
  criterion(10, "timm counterfactual", 0, c10_timm);
  criterion(11, "baseline dominance", 0, c11_baseline_dominance);
  criterion(12, "cli determinism", 0, c12_determinism);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
