#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "ptq/ptq.hpp"

namespace ptq::cli {
namespace {

namespace fs = std::filesystem;

// Stream-derivation salts for the stochastic sub-steps of one run.
constexpr std::uint64_t kSaltParallel = 0x7061;
constexpr std::uint64_t kSaltBootstrap = 0x626f;

int exit_code(Stage s) {
  switch (s) {
    case Stage::input: return 2;
    case Stage::polychoric: return 3;
    case Stage::factor: return 4;
    case Stage::glm: return 5;
  }
  return 1;
}

void print_error(int code, const std::string& stage, const std::string& message) {
  Json err = {{"error", {{"code", code}, {"stage", stage}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
}

int verbosity = 0;

void log(int level, const std::string& msg) {
  if (verbosity >= level) std::cerr << "ptq: " << msg << '\n';
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed: " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

template <typename F>
void write_with(const fs::path& path, F&& emit) {
  std::ostringstream os;
  emit(os);
  write_text(path, os.str());
}

// ---------------------------------------------------------------------------
// Run configuration

Json default_config() {
  return {{"input", nullptr},
          {"output", nullptr},
          {"seed", nullptr},
          {"metric", "both"},
          {"tokened_only", true},
          {"timu", {{"fix_values", {{"pcr", nullptr}, {"acd", nullptr}}}, {"strict_delta", false}}},
          {"timm",
           {{"min_positives", 10},
            {"reps", 100},
            {"quantile", 0.95},
            {"basis", "reduced"},
            {"factors", nullptr},
            {"threshold", 0.5},
            {"interactions", "default"},
            {"bootstrap", 200},
            {"refit_bootstrap", false},
            {"ci_level", 0.95},
            {"ridge", 1e-6}}},
          {"verbosity", 0}};
}

void check_keys(const Json& known, const Json& given, const std::string& where) {
  if (!given.is_object()) throw ValidationError("config: " + (where.empty() ? "top level" : where) + " must be an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!known.contains(it.key())) throw ValidationError("config: unknown key " + key);
    if (known.at(it.key()).is_object()) check_keys(known.at(it.key()), it.value(), key);
  }
}

// Recursive overlay that keeps the key order of `base`.
void overlay(Json& base, const Json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      overlay(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

struct RunConfig {
  std::string input;
  std::string output;
  std::optional<std::uint64_t> seed;
  bool want_pcr = true, want_acd = true;
  bool tokened_only = true;
  std::optional<double> fix_pcr, fix_acd;
  bool strict_delta = false;
  std::size_t min_positives = 10;
  std::size_t reps = 100;
  double quantile = 0.95;
  EigenBasis basis = EigenBasis::reduced;
  std::optional<std::size_t> factors;
  double threshold = 0.5;
  std::string interactions = "default";
  std::size_t bootstrap = 200;
  bool refit_bootstrap = false;
  double ci_level = 0.95;
  double ridge = 1e-6;
  Json json;  // merged configuration as written into provenance

  std::uint64_t require_seed() const {
    if (!seed) throw ValidationError("a seed is required for this command (--seed or \"seed\" in the config)");
    return *seed;
  }
};

template <typename T>
std::optional<T> opt_value(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

RunConfig parse_config(const Json& merged) {
  RunConfig c;
  c.json = merged;
  try {
    if (!merged.at("input").is_null()) c.input = merged.at("input").get<std::string>();
    if (!merged.at("output").is_null()) c.output = merged.at("output").get<std::string>();
    c.seed = opt_value<std::uint64_t>(merged.at("seed"));
    const auto metric = merged.at("metric").get<std::string>();
    if (metric == "pcr")
      c.want_acd = false;
    else if (metric == "acd")
      c.want_pcr = false;
    else if (metric != "both")
      throw ValidationError("config: metric must be pcr, acd or both");
    c.tokened_only = merged.at("tokened_only").get<bool>();
    const auto& t = merged.at("timu");
    c.fix_pcr = opt_value<double>(t.at("fix_values").at("pcr"));
    c.fix_acd = opt_value<double>(t.at("fix_values").at("acd"));
    c.strict_delta = t.at("strict_delta").get<bool>();
    const auto& m = merged.at("timm");
    c.min_positives = m.at("min_positives").get<std::size_t>();
    c.reps = m.at("reps").get<std::size_t>();
    c.quantile = m.at("quantile").get<double>();
    const auto basis = m.at("basis").get<std::string>();
    if (basis == "reduced")
      c.basis = EigenBasis::reduced;
    else if (basis == "correlation")
      c.basis = EigenBasis::correlation;
    else
      throw ValidationError("config: timm.basis must be reduced or correlation");
    c.factors = opt_value<std::size_t>(m.at("factors"));
    c.threshold = m.at("threshold").get<double>();
    c.interactions = m.at("interactions").get<std::string>();
    c.bootstrap = m.at("bootstrap").get<std::size_t>();
    c.refit_bootstrap = m.at("refit_bootstrap").get<bool>();
    c.ci_level = m.at("ci_level").get<double>();
    c.ridge = m.at("ridge").get<double>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!(c.quantile > 0.0 && c.quantile < 1.0)) throw ValidationError("config: timm.quantile must lie in (0, 1)");
  if (!(c.threshold > 0.0 && c.threshold <= 1.0)) throw ValidationError("config: timm.threshold must lie in (0, 1]");
  if (!(c.ci_level > 0.0 && c.ci_level < 1.0)) throw ValidationError("config: timm.ci_level must lie in (0, 1)");
  if (!(c.ridge >= 0.0)) throw ValidationError("config: timm.ridge must be non-negative");
  return c;
}

// Flags shared by the analysis commands; unset flags leave the config alone.
struct Flags {
  std::string config_path;
  std::optional<std::string> input, output, metric, interactions, basis;
  std::optional<std::uint64_t> seed;
  std::optional<double> fix_value, quantile, threshold, ridge, ci_level;
  std::optional<std::size_t> reps, factors, bootstrap, min_positives;
  bool strict_delta = false, all_calls = false, refit_bootstrap = false;
  unsigned threads = 1;
  int verbose = 0;
  std::string grouping;
};

Json flags_patch(const Flags& f, const std::string& metric_for_fix) {
  Json p = Json::object();
  if (f.input) p["input"] = *f.input;
  if (f.output) p["output"] = *f.output;
  if (f.seed) p["seed"] = *f.seed;
  if (f.metric) p["metric"] = *f.metric;
  if (f.all_calls) p["tokened_only"] = false;
  if (f.fix_value) p["timu"]["fix_values"][metric_for_fix] = *f.fix_value;
  if (f.strict_delta) p["timu"]["strict_delta"] = true;
  if (f.min_positives) p["timm"]["min_positives"] = *f.min_positives;
  if (f.reps) p["timm"]["reps"] = *f.reps;
  if (f.quantile) p["timm"]["quantile"] = *f.quantile;
  if (f.basis) p["timm"]["basis"] = *f.basis;
  if (f.factors) p["timm"]["factors"] = *f.factors;
  if (f.threshold) p["timm"]["threshold"] = *f.threshold;
  if (f.interactions) p["timm"]["interactions"] = *f.interactions;
  if (f.bootstrap) p["timm"]["bootstrap"] = *f.bootstrap;
  if (f.refit_bootstrap) p["timm"]["refit_bootstrap"] = true;
  if (f.ci_level) p["timm"]["ci_level"] = *f.ci_level;
  if (f.ridge) p["timm"]["ridge"] = *f.ridge;
  if (f.verbose) p["verbosity"] = f.verbose;
  return p;
}

Json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + what + " " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError(what + " " + path + ": " + e.what());
  }
}

RunConfig resolve_config(const Flags& f) {
  Json merged = default_config();
  if (!f.config_path.empty()) {
    const Json file = read_json_file(f.config_path, "config");
    check_keys(merged, file, "");
    overlay(merged, file);
  }
  std::string fix_metric = "pcr";
  if (f.fix_value) {
    const auto metric = f.metric.value_or(merged.at("metric").get<std::string>());
    if (metric == "both") throw ValidationError("--fix-value needs --metric pcr or --metric acd");
    fix_metric = metric;
  }
  overlay(merged, flags_patch(f, fix_metric));
  RunConfig c = parse_config(merged);
  if (c.input.empty()) throw ValidationError("an input file is required (--input or \"input\" in the config)");
  if (c.output.empty()) throw ValidationError("an output directory is required (--out or \"output\" in the config)");
  verbosity = std::max(verbosity, merged.at("verbosity").get<int>());
  return c;
}

// ---------------------------------------------------------------------------
// Shared run state

struct Run {
  RunConfig cfg;
  std::string command;
  unsigned threads = 1;
  std::string input_sha;
  fs::path out;

  SurveyDataset load() {
    log(1, "reading " + cfg.input);
    input_sha = sha256_file(cfg.input);
    return load_csv(cfg.input);
  }

  // Output location and thread count are left out: neither changes results.
  Json provenance(const SurveyDataset& ds) const {
    Json config = cfg.json;
    config.erase("output");
    config.erase("verbosity");
    return {{"tool", "ptq"},
            {"version", kVersion},
            {"command", command},
            {"input", {{"path", cfg.input}, {"sha256", input_sha}, {"records", ds.size()}}},
            {"seed", cfg.seed ? Json(*cfg.seed) : Json(nullptr)},
            {"config", std::move(config)},
            {"lineage", ds.provenance}};
  }
};

// Optionally restricts to tokened poor calls (keeping the poor-call rate).
SurveyDataset analysis_set(const Run& run, const SurveyDataset& ds) {
  if (!run.cfg.tokened_only) return ds;
  return restrict_tokened_poor(ds, run.cfg.require_seed());
}

// ---------------------------------------------------------------------------
// describe

Json ig_json(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
  const auto ig = information_gain(x, y);
  bool varies = false;
  for (auto v : x) varies = varies || (v != x.front());
  Json j = to_json(ig);
  j["defined"] = ig.fraction.has_value() && varies;
  return j;
}

void cmd_describe(Run& run) {
  const auto seed = run.cfg.require_seed();
  const SurveyDataset ds = run.load();
  const auto freq = token_frequencies(ds);
  const auto labels = label_series(ds);

  Json ig;
  ig["representative"] = ig_json(labels.any_token, labels.poor);
  try {
    const auto balanced = balance_resample(ds, seed);
    const auto bl = label_series(balanced);
    Json b = ig_json(bl.any_token, bl.poor);
    b["records"] = balanced.size();
    ig["balanced"] = std::move(b);
  } catch (const ValidationError& e) {
    ig["balanced"] = {{"defined", false}, {"reason", e.what()}};
  }
  Json per_token = Json::array();
  for (std::size_t t = 0; t < ds.token_count(); ++t) {
    Json j = ig_json(token_series(ds, t), labels.poor);
    j["token"] = ds.vocabulary.names[t];
    per_token.push_back(std::move(j));
  }
  ig["per_token_representative"] = std::move(per_token);

  Json report = {{"provenance", run.provenance(ds)}, {"frequencies", to_json(freq)}, {"information_gain", ig}};
  if (ds.token_count() >= 2) {
    const auto jac = jaccard_matrix(ds);
    report["jaccard"] = to_json(jac);
    write_with(run.out / "jaccard_plot.csv", [&](std::ostream& os) { write_jaccard_plot_csv(os, jac); });
  } else {
    report["jaccard"] = nullptr;
    write_text(run.out / "jaccard_plot.csv", "token_a,token_b,jaccard,undefined\n");
  }
  write_json(run.out / "describe.json", report);
  write_with(run.out / "frequency_plot.csv", [&](std::ostream& os) { write_frequency_plot_csv(os, freq); });
  log(1, "describe: wrote describe.json, frequency_plot.csv, jaccard_plot.csv");
}

// ---------------------------------------------------------------------------
// timu

void cmd_timu(Run& run) {
  const SurveyDataset raw = run.load();
  const SurveyDataset ds = analysis_set(run, raw);
  const TimuOptions opt{run.cfg.strict_delta};

  std::vector<std::pair<std::string, std::vector<TimuResult>>> plots;
  Json rankings = Json::object();
  auto rank = [&](MetricKind kind, std::optional<double> fix) {
    const MetricSpec spec{kind, fix};
    const double fix_value = resolve_fix_value(ds, spec);
    auto results = rank_tokens(ds, spec, opt, run.threads);
    std::vector<std::size_t> all(ds.token_count());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto any = timu(ds, Selector::any_of(ds.vocabulary, all), kind, fix_value, opt);
    double sum = 0.0;
    Json rows = Json::array();
    for (const auto& r : results) {
      sum += r.mean_impact;
      rows.push_back(to_json(r));
    }
    rankings[metric_name(kind)] = {{"fix_value", fix_value},
                                   {"ranking", std::move(rows)},
                                   {"any_token", to_json(any)},
                                   {"sum_of_token_impacts", sum}};
    plots.emplace_back(metric_name(kind), std::move(results));
  };
  if (run.cfg.want_pcr) rank(MetricKind::poor_indicator, run.cfg.fix_pcr);
  if (run.cfg.want_acd) rank(MetricKind::duration_s, run.cfg.fix_acd);

  const Json report = {{"provenance", run.provenance(ds)},
                       {"strict_delta", run.cfg.strict_delta},
                       {"records", ds.size()},
                       {"rankings", std::move(rankings)}};
  write_json(run.out / "timu.json", report);
  write_with(run.out / "timu_plot.csv", [&](std::ostream& os) { write_timu_plot_csv(os, plots); });
  log(1, "timu: wrote timu.json, timu_plot.csv");
}

// ---------------------------------------------------------------------------
// timm

struct FactorStage {
  SurveyDataset data;  // cleaned analysis set
  ProblemGrouping grouping;
};

SurveyDataset cleaned_analysis_set(Run& run, std::vector<std::string>* removed) {
  const SurveyDataset raw = run.load();
  const SurveyDataset ds = analysis_set(run, raw);
  auto cleaned = clean_uninformative(ds, run.cfg.min_positives);
  if (removed) *removed = cleaned.removed;
  return std::move(cleaned.dataset);
}

FactorStage cmd_timm_factors(Run& run) {
  const auto seed = run.cfg.require_seed();
  std::vector<std::string> removed;
  SurveyDataset ds = cleaned_analysis_set(run, &removed);
  const std::size_t p = ds.token_count();
  if (p < 2) throw FactorError("factor analysis needs at least two informative tokens");

  log(1, "polychoric matrix over " + std::to_string(p) + " tokens");
  const auto corr = polychoric_matrix(ds, run.threads);
  if (corr.repair_alert()) log(0, "warning: PSD repair moved the polychoric matrix by more than 0.1 (Frobenius)");

  Json pa_json = nullptr;
  std::size_t k = 0;
  if (run.cfg.factors) {
    k = *run.cfg.factors;
    if (k < 1 || k >= p) throw ValidationError("factors must lie in [1, " + std::to_string(p - 1) + "]");
  } else {
    log(1, "parallel analysis, " + std::to_string(run.cfg.reps) + " reference sets");
    ParallelAnalysisOptions po;
    po.reps = run.cfg.reps;
    po.quantile = run.cfg.quantile;
    po.seed = mix64(seed ^ kSaltParallel);
    po.basis = run.cfg.basis;
    po.threads = run.threads;
    const auto pa = parallel_analysis_scan(corr, ds, po);
    pa_json = to_json(pa);
    if (pa.k == 0) throw FactorError("no factor exceeds noise floor");
    k = std::min(pa.k, p - 1);
  }

  const auto model = varimax(extract_factors(corr, k));
  if (!model.heywood.empty()) log(0, "warning: Heywood case, communalities clamped");
  const auto grouping = assign_groups(model, run.cfg.threshold);

  write_with(run.out / "polychoric.csv", [&](std::ostream& os) { write_polychoric_csv(os, corr); });
  write_with(run.out / "loadings.csv", [&](std::ostream& os) { write_loadings_csv(os, model); });
  write_json(run.out / "grouping.json", to_json(grouping));
  Json diag = to_json(corr);
  diag.erase("values");
  diag.erase("tokens");
  const Json report = {{"provenance", run.provenance(ds)},
                       {"removed_tokens", removed},
                       {"polychoric", std::move(diag)},
                       {"parallel_analysis", std::move(pa_json)},
                       {"factors", k},
                       {"model", to_json(model)},
                       {"grouping", to_json(grouping)}};
  write_json(run.out / "factors.json", report);
  log(1, "timm factors: " + std::to_string(grouping.groups.size()) + " groups");
  return {std::move(ds), grouping};
}

std::vector<GroupPair> parse_interactions(const std::string& text, std::size_t groups) {
  std::vector<GroupPair> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    std::size_t a = 0, b = 0;
    try {
      if (colon == std::string::npos) throw std::invalid_argument(item);
      a = std::stoul(item.substr(0, colon));
      b = std::stoul(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("interactions: expected a:b pairs of 1-based group numbers, got '" + item + "'");
    }
    if (a < 1 || b < 1 || a > groups || b > groups)
      throw ValidationError("interactions: group numbers must lie in [1, " + std::to_string(groups) + "]");
    out.emplace_back(a - 1, b - 1);
  }
  return out;
}

void cmd_timm_impact(Run& run, const std::string& grouping_path) {
  const auto seed = run.cfg.require_seed();
  FactorStage stage;
  if (grouping_path.empty()) {
    stage = cmd_timm_factors(run);
  } else {
    stage.data = cleaned_analysis_set(run, nullptr);
    stage.grouping = grouping_from_json(read_json_file(grouping_path, "grouping"), stage.data.vocabulary.names);
    if (stage.grouping.groups.empty()) throw GlmError("grouping has no groups");
  }
  const auto& ds = stage.data;

  LogisticOptions fit;
  fit.ridge = run.cfg.ridge;
  DesignSpec spec{stage.grouping, {}};
  const std::string& inter = run.cfg.interactions;
  if (inter == "default")
    spec.interactions = default_interactions(stage.grouping);
  else if (inter != "none" && inter != "aic")
    spec.interactions = parse_interactions(inter, stage.grouping.groups.size());
  Design design = build_design(ds, spec);
  if (inter == "aic") {
    log(1, "forward AIC selection of interactions");
    design = design.with_interactions(select_interactions_aic(design, fit));
  }

  log(1, "fitting logistic model");
  const auto model = fit_logistic(design, fit);
  if (!model.converged) log(0, "warning: logistic fit did not converge");
  ImpactOptions io;
  io.bootstrap = run.cfg.bootstrap;
  io.seed = mix64(seed ^ kSaltBootstrap);
  io.threads = run.threads;
  io.refit = run.cfg.refit_bootstrap;
  io.ci_level = run.cfg.ci_level;
  io.fit = fit;
  const auto rep = impact_report(model, design, io);

  Json groups = Json::array();
  for (std::size_t g = 0; g < stage.grouping.groups.size(); ++g)
    groups.push_back({{"name", stage.grouping.groups[g].name}, {"tokens", stage.grouping.member_names(g)}});
  Json inter_json = Json::array();
  for (auto [a, b] : design.interactions())
    inter_json.push_back({design.group_names()[a], design.group_names()[b]});

  const Json report = {{"provenance", run.provenance(ds)},
                       {"groups", std::move(groups)},
                       {"interactions", std::move(inter_json)},
                       {"model", to_json(model)},
                       {"impact", to_json(rep)}};
  write_json(run.out / "impact.json", report);
  write_with(run.out / "impact_plot.csv", [&](std::ostream& os) { write_impact_plot_csv(os, rep); });
  log(1, "timm impact: wrote impact.json, impact_plot.csv");
}

void cmd_report(Run& run) {
  run.cfg.require_seed();
  const std::string base = run.command;
  run.command = base + "/describe";
  cmd_describe(run);
  run.command = base + "/timu";
  cmd_timu(run);
  run.command = base + "/timm";
  cmd_timm_impact(run, "");
  run.command = base;

  const Json impact = read_json_file((run.out / "impact.json").string(), "report");
  const Json describe = read_json_file((run.out / "describe.json").string(), "report");
  const SurveyDataset ds = load_csv(run.cfg.input);
  Json summary = {
      {"provenance", run.provenance(ds)},
      {"artifacts",
       {"describe.json", "frequency_plot.csv", "jaccard_plot.csv", "timu.json", "timu_plot.csv", "polychoric.csv",
        "loadings.csv", "grouping.json", "factors.json", "impact.json", "impact_plot.csv"}},
      {"poor_call_rate", ds.poor_call_rate()},
      {"information_gain_balanced", describe.at("information_gain").at("balanced")},
      {"groups", impact.at("groups")},
      {"impact", impact.at("impact")}};
  write_json(run.out / "report.json", summary);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
  std::string spec_path, preset, out, truth, spec_out;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::size_t truth_mc = 200000;
  unsigned threads = 1;
};

void cmd_simulate(const SimulateFlags& f) {
  if (f.spec_path.empty() == f.preset.empty()) throw ValidationError("simulate needs exactly one of --spec or --preset");
  if (f.out.empty()) throw ValidationError("simulate needs --out");
  GeneratorSpec spec;
  if (!f.spec_path.empty()) {
    const Json j = read_json_file(f.spec_path, "generator spec");
    if (!f.seed && !j.contains("seed")) throw ValidationError("a seed is required (--seed or \"seed\" in the spec)");
    spec = generator_spec_from_json(j);
  } else {
    if (!f.seed) throw ValidationError("a seed is required (--seed)");
    const std::size_t n = f.n.value_or(20000);
    if (f.preset == "table1")
      spec = table_one_world(n, *f.seed);
    else if (f.preset == "independent")
      spec = independent_world(n, *f.seed);
    else
      throw ValidationError("unknown preset " + f.preset + " (table1, independent)");
  }
  if (f.n) spec.n = *f.n;
  if (f.seed) spec.seed = *f.seed;
  spec.validate();

  auto ensure_parent = [](const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  };
  log(1, "generating " + std::to_string(spec.n) + " records");
  const auto ds = generate_dataset(spec, f.threads);
  ensure_parent(f.out);
  write_with(f.out, [&](std::ostream& os) { write_csv(os, ds); });
  if (!f.spec_out.empty()) {
    ensure_parent(f.spec_out);
    write_json(f.spec_out, to_json(spec));
  }
  if (!f.truth.empty()) {
    if (f.truth_mc == 0) throw ValidationError("--truth-mc must be positive");
    log(1, "Monte Carlo ground truth, " + std::to_string(f.truth_mc) + " draws per group");
    const auto truth = ground_truth(spec, f.truth_mc);
    Json t = to_json(truth, spec);
    t["monte_carlo_draws"] = f.truth_mc;
    t["version"] = kVersion;
    ensure_parent(f.truth);
    write_json(f.truth, t);
  }
}

// ---------------------------------------------------------------------------

void add_common(CLI::App* app, Flags& f) {
  app->add_option("-c,--config", f.config_path, "JSON run configuration; flags override it");
  app->add_option("-i,--input", f.input, "Survey CSV");
  app->add_option("-o,--out", f.output, "Output directory");
  app->add_option("-s,--seed", f.seed, "Seed for every stochastic step");
  app->add_option("-t,--threads", f.threads, "Worker threads (0 = hardware concurrency)");
  app->add_flag("--all-calls", f.all_calls, "Keep poor calls without a submitted questionnaire");
  app->add_flag("-v,--verbose", f.verbose, "Progress messages on stderr (repeat for more)");
}

void add_timu(CLI::App* app, Flags& f) {
  app->add_option("--metric", f.metric, "pcr, acd or both")->check(CLI::IsMember({"pcr", "acd", "both"}));
  app->add_option("--fix-value", f.fix_value, "Counterfactual metric value on the problem set");
  app->add_flag("--strict-delta", f.strict_delta, "Use var(X-Y) = varX + varY - 2cov");
}

void add_factors(CLI::App* app, Flags& f) {
  app->add_option("--min-positives", f.min_positives, "Drop tokens reported fewer times than this");
  app->add_option("--reps", f.reps, "Parallel analysis reference datasets");
  app->add_option("--quantile", f.quantile, "Parallel analysis reference quantile");
  app->add_option("--basis", f.basis, "Eigenvalues compared: reduced or correlation")
      ->check(CLI::IsMember({"reduced", "correlation"}));
  app->add_option("--factors", f.factors, "Skip parallel analysis and extract this many factors");
  app->add_option("--threshold", f.threshold, "Minimum |loading| for group membership");
}

void add_impact(CLI::App* app, Flags& f) {
  app->add_option("--interactions", f.interactions, "default, none, aic, or pairs like 1:2,1:4");
  app->add_option("--bootstrap", f.bootstrap, "Bootstrap replicates for the reduction intervals");
  app->add_flag("--refit-bootstrap", f.refit_bootstrap, "Refit the model in every bootstrap replicate");
  app->add_option("--ci-level", f.ci_level, "Bootstrap interval level");
  app->add_option("--ridge", f.ridge, "L2 penalty on the non-intercept coefficients");
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Problem token questionnaire analytics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic survey with known ground truth");
  simulate->add_option("--spec", sim.spec_path, "Generator spec JSON");
  simulate->add_option("--preset", sim.preset, "table1 or independent");
  simulate->add_option("-n,--records", sim.n, "Number of calls");
  simulate->add_option("-s,--seed", sim.seed, "Seed");
  simulate->add_option("-o,--out", sim.out, "Survey CSV to write");
  simulate->add_option("--truth", sim.truth, "Ground truth JSON to write");
  simulate->add_option("--spec-out", sim.spec_out, "Write the resolved generator spec here");
  simulate->add_option("--truth-mc", sim.truth_mc, "Monte Carlo draws per group for the ground truth");
  simulate->add_option("-t,--threads", sim.threads, "Worker threads (0 = hardware concurrency)");
  simulate->add_flag("-v,--verbose", verbosity, "Progress messages on stderr");

  Flags f;
  auto* describe = app.add_subcommand("describe", "Token response rates, information gain, Jaccard matrix");
  add_common(describe, f);

  auto* timu_cmd = app.add_subcommand("timu", "Univariate token impact on PCR and ACD");
  add_common(timu_cmd, f);
  add_timu(timu_cmd, f);

  auto* timm = app.add_subcommand("timm", "Multivariate token impact (no subcommand runs both stages)");
  timm->require_subcommand(0, 1);
  add_common(timm, f);
  add_factors(timm, f);
  add_impact(timm, f);
  auto* factors = timm->add_subcommand("factors", "Polychoric matrix, parallel analysis, varimax, problem groups");
  add_common(factors, f);
  add_factors(factors, f);
  auto* impact = timm->add_subcommand("impact", "Logistic model and counterfactual PCR reductions");
  add_common(impact, f);
  add_factors(impact, f);
  add_impact(impact, f);
  impact->add_option("--grouping", f.grouping, "grouping.json from 'timm factors' (otherwise recomputed)");

  auto* report = app.add_subcommand("report", "describe, timu and timm into one directory");
  add_common(report, f);
  add_timu(report, f);
  add_factors(report, f);
  add_impact(report, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error(2, "usage", e.what());
    return 2;
  }

  try {
    if (simulate->parsed()) {
      if (sim.threads == 0) sim.threads = std::max(1u, std::thread::hardware_concurrency());
      cmd_simulate(sim);
      return 0;
    }
    Run r;
    r.cfg = resolve_config(f);
    verbosity = std::max(verbosity, f.verbose);
    r.threads = f.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : f.threads;
    r.out = r.cfg.output;
    fs::create_directories(r.out);
    if (describe->parsed()) {
      r.command = "describe";
      cmd_describe(r);
    } else if (timu_cmd->parsed()) {
      r.command = "timu";
      cmd_timu(r);
    } else if (factors->parsed()) {
      r.command = "timm factors";
      cmd_timm_factors(r);
    } else if (impact->parsed()) {
      r.command = "timm impact";
      cmd_timm_impact(r, f.grouping);
    } else if (timm->parsed()) {
      r.command = "timm";
      cmd_timm_impact(r, "");
    } else if (report->parsed()) {
      r.command = "report";
      cmd_report(r);
    }
    return 0;
  } catch (const Error& e) {
    const int code = exit_code(e.stage());
    print_error(code, stage_name(e.stage()), e.what());
    return code;
  } catch (const fs::filesystem_error& e) {
    print_error(2, "input", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error(1, "internal", e.what());
    return 1;
  }
}

}  // namespace ptq::cli
