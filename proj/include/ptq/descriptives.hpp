#pragma once

// Token response rates, information gain and token co-occurrence.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ptq/survey.hpp"

namespace ptq {

struct TokenFrequency {
  std::string token;
  std::size_t count_all = 0;
  std::size_t count_poor = 0;
  double rate_all = 0.0;
  std::optional<double> rate_poor;  // undefined without poor calls
};

struct FrequencyReport {
  std::size_t population_all = 0;
  std::size_t population_poor = 0;
  std::vector<TokenFrequency> tokens;

  // Token indices sorted by descending rate; ties keep vocabulary order.
  std::vector<std::size_t> order_by_all() const {
    return order([](const TokenFrequency& f) { return f.rate_all; });
  }
  std::vector<std::size_t> order_by_poor() const {
    return order([](const TokenFrequency& f) { return f.rate_poor.value_or(-1.0); });
  }

 private:
  template <typename Key>
  std::vector<std::size_t> order(Key key) const {
    std::vector<std::size_t> idx(tokens.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return key(tokens[a]) > key(tokens[b]); });
    return idx;
  }
};

inline FrequencyReport token_frequencies(const SurveyDataset& ds) {
  if (ds.empty()) throw ValidationError("token_frequencies: empty dataset");
  FrequencyReport rep;
  const std::size_t p = ds.token_count();
  rep.tokens.resize(p);
  for (const auto& r : ds.records) {
    const bool poor = poor_call(r);
    rep.population_all += 1;
    rep.population_poor += poor ? 1 : 0;
    for (std::size_t t = 0; t < p; ++t) {
      if (!r.tokens.test(t)) continue;
      rep.tokens[t].count_all += 1;
      rep.tokens[t].count_poor += poor ? 1 : 0;
    }
  }
  for (std::size_t t = 0; t < p; ++t) {
    auto& f = rep.tokens[t];
    f.token = ds.vocabulary.names[t];
    f.rate_all = static_cast<double>(f.count_all) / static_cast<double>(rep.population_all);
    if (rep.population_poor > 0)
      f.rate_poor = static_cast<double>(f.count_poor) / static_cast<double>(rep.population_poor);
  }
  return rep;
}

// Shannon entropy in bits of a two-outcome distribution given by counts.
inline double binary_entropy(std::size_t ones, std::size_t total) {
  if (total == 0 || ones == 0 || ones == total) return 0.0;
  const double p = static_cast<double>(ones) / static_cast<double>(total);
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

struct InformationGain {
  double bits = 0.0;     // H(y) - H(y|x)
  double entropy_y = 0.0;
  std::optional<double> fraction;  // bits / H(y), when H(y) > 0
};

// Information gain about `y` from knowing `x`. Series are 0/1 valued.
inline InformationGain information_gain(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
  if (x.size() != y.size()) throw std::invalid_argument("information_gain: length mismatch");
  if (x.empty()) throw std::invalid_argument("information_gain: empty series");
  std::size_t n[2] = {0, 0}, ones[2] = {0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int xi = x[i] ? 1 : 0;
    n[xi] += 1;
    ones[xi] += y[i] ? 1 : 0;
  }
  const std::size_t total = x.size();
  InformationGain ig;
  ig.entropy_y = binary_entropy(ones[0] + ones[1], total);
  double conditional = 0.0;
  for (int v = 0; v < 2; ++v)
    conditional += static_cast<double>(n[v]) / static_cast<double>(total) * binary_entropy(ones[v], n[v]);
  ig.bits = std::max(0.0, ig.entropy_y - conditional);
  if (ig.entropy_y > 0.0) ig.fraction = ig.bits / ig.entropy_y;
  return ig;
}

struct LabelSeries {
  std::vector<std::uint8_t> poor;
  std::vector<std::uint8_t> any_token;
};

inline LabelSeries label_series(const SurveyDataset& ds) {
  LabelSeries s;
  s.poor.reserve(ds.size());
  s.any_token.reserve(ds.size());
  for (const auto& r : ds.records) {
    s.poor.push_back(poor_call(r) ? 1 : 0);
    s.any_token.push_back(any_token_reported(r) ? 1 : 0);
  }
  return s;
}

inline std::vector<std::uint8_t> token_series(const SurveyDataset& ds, std::size_t token) {
  std::vector<std::uint8_t> s;
  s.reserve(ds.size());
  for (const auto& r : ds.records) s.push_back(r.tokens.test(token) ? 1 : 0);
  return s;
}

struct JaccardMatrix {
  std::vector<std::string> tokens;
  std::vector<double> values;        // row-major, size p*p
  std::vector<std::uint8_t> undefined;  // 1 where the union was empty

  std::size_t size() const { return tokens.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  bool is_undefined(std::size_t i, std::size_t j) const { return undefined[i * size() + j] != 0; }
};

// Pairwise |a and b| / |a or b| over records; zero diagonal, and zero (flagged)
// where neither token ever occurs.
inline JaccardMatrix jaccard_matrix(const SurveyDataset& ds) {
  const std::size_t p = ds.token_count();
  if (p < 2) throw ValidationError("jaccard_matrix needs at least two tokens");
  std::vector<std::size_t> single(p, 0), both(p * p, 0);
  for (const auto& r : ds.records) {
    if (!r.tokens.any()) continue;
    for (std::size_t i = 0; i < p; ++i) {
      if (!r.tokens.test(i)) continue;
      single[i] += 1;
      for (std::size_t j = i + 1; j < p; ++j) both[i * p + j] += r.tokens.test(j) ? 1 : 0;
    }
  }
  JaccardMatrix m;
  m.tokens = ds.vocabulary.names;
  m.values.assign(p * p, 0.0);
  m.undefined.assign(p * p, 0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const std::size_t inter = both[i * p + j];
      const std::size_t uni = single[i] + single[j] - inter;
      double v = 0.0;
      if (uni == 0)
        m.undefined[i * p + j] = m.undefined[j * p + i] = 1;
      else
        v = static_cast<double>(inter) / static_cast<double>(uni);
      m.values[i * p + j] = m.values[j * p + i] = v;
    }
  }
  return m;
}

}  // namespace ptq
