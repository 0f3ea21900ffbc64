#pragma once

// Survey data model: token vocabulary, call records, CSV ingestion and the
// subset-selection resamplers used by the analyses.

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/tokenizer.hpp>

#include "ptq/common.hpp"

namespace ptq {

inline constexpr std::size_t kMaxTokens = 64;

// Fixed-width set of token flags; bit i is token i of the vocabulary.
class TokenMask {
 public:
  constexpr TokenMask() = default;
  constexpr explicit TokenMask(std::uint64_t bits) : bits_(bits) {}

  constexpr bool test(std::size_t i) const { return (bits_ >> i) & 1u; }
  constexpr void set(std::size_t i, bool on = true) {
    if (on)
      bits_ |= (std::uint64_t{1} << i);
    else
      bits_ &= ~(std::uint64_t{1} << i);
  }
  constexpr bool any() const { return bits_ != 0; }
  constexpr bool intersects(TokenMask other) const { return (bits_ & other.bits_) != 0; }
  int count() const { return std::popcount(bits_); }
  constexpr std::uint64_t bits() const { return bits_; }

  friend constexpr bool operator==(TokenMask, TokenMask) = default;

 private:
  std::uint64_t bits_ = 0;
};

struct TokenVocabulary {
  std::vector<std::string> names;
  std::vector<std::string> display_text;

  std::size_t size() const { return names.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }

  void validate() const {
    if (names.size() > kMaxTokens)
      throw ValidationError("vocabulary holds more than 64 tokens");
    if (display_text.size() != names.size())
      throw ValidationError("vocabulary display text does not match token count");
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) throw ValidationError("empty token name in vocabulary");
      if (!seen.insert(n).second) throw ValidationError("duplicate token name: " + n);
    }
  }

  // Vocabulary whose display text is the slug itself.
  static TokenVocabulary from_names(std::vector<std::string> names) {
    TokenVocabulary v;
    v.display_text = names;
    v.names = std::move(names);
    v.validate();
    return v;
  }

  // The fifteen end-of-call problem tokens, listed group by group
  // (audio quality 5, video quality 5, one-way video 2, one-way audio 2,
  // reliability 1).
  static TokenVocabulary standard() {
    TokenVocabulary v;
    const std::pair<const char*, const char*> rows[] = {
        {"audio.interrupting", "We kept interrupting each other"},
        {"audio.distorted", "Speech was not natural or sounded distorted"},
        {"audio.low_volume", "Volume was low"},
        {"audio.echo", "I heard echo in the call"},
        {"audio.noise", "I heard noise in the call"},
        {"video.dark", "The other side was too dark"},
        {"video.stopped", "Video stopped unexpectedly"},
        {"video.out_of_sync", "Video was ahead or behind audio"},
        {"video.poor_image", "Image quality is poor"},
        {"video.freeze", "Video kept freezing"},
        {"oneway.no_video_recv", "I could not see any video"},
        {"oneway.no_video_sent", "The other side could not see my video"},
        {"oneway.no_audio_recv", "I could not hear any sound"},
        {"oneway.no_audio_sent", "The other side could not hear my sound"},
        {"reliability.drop", "The call ended unexpectedly"},
    };
    for (const auto& [slug, text] : rows) {
      v.names.emplace_back(slug);
      v.display_text.emplace_back(text);
    }
    return v;
  }

  // Group sizes of the standard vocabulary, in listing order.
  static std::vector<std::size_t> standard_group_sizes() { return {5, 5, 2, 2, 1}; }
};

struct CallRecord {
  std::string call_id;
  int rating = 5;
  double duration_s = 0.0;
  TokenMask tokens;
  bool ptq_submitted = false;
};

// Ratings of 1 or 2 are poor calls. Always derived, never stored.
inline bool poor_call(const CallRecord& r) { return r.rating <= 2; }
inline bool any_token_reported(const CallRecord& r) { return r.tokens.any(); }

// Throws ValidationError describing the first broken record invariant.
inline void check_record(const CallRecord& r, std::size_t vocabulary_size) {
  if (r.rating < 1 || r.rating > 5)
    throw ValidationError("rating outside 1..5: " + std::to_string(r.rating));
  if (!(r.duration_s >= 0.0) || !std::isfinite(r.duration_s))
    throw ValidationError("negative or non-finite duration");
  if (vocabulary_size < kMaxTokens && (r.tokens.bits() >> vocabulary_size) != 0)
    throw ValidationError("token bit beyond vocabulary size");
  if (r.rating == 5 && (r.tokens.any() || r.ptq_submitted))
    throw ValidationError(r.tokens.any() ? "tokens present on rating 5"
                                         : "questionnaire submitted on rating 5");
  if (r.tokens.any() && !r.ptq_submitted)
    throw ValidationError("tokens present without questionnaire submission");
}

struct SurveyDataset {
  TokenVocabulary vocabulary;
  std::vector<CallRecord> records;
  std::vector<std::string> provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::size_t token_count() const { return vocabulary.size(); }

  std::size_t poor_count() const {
    std::size_t n = 0;
    for (const auto& r : records) n += poor_call(r) ? 1 : 0;
    return n;
  }

  double poor_call_rate() const {
    return records.empty() ? 0.0
                           : static_cast<double>(poor_count()) / static_cast<double>(records.size());
  }

  void validate() const {
    vocabulary.validate();
    for (std::size_t i = 0; i < records.size(); ++i) {
      try {
        check_record(records[i], vocabulary.size());
      } catch (const ValidationError& e) {
        throw ValidationError("record " + std::to_string(i) + " (" + records[i].call_id +
                              "): " + e.what());
      }
    }
  }

  // Same vocabulary and lineage, different records.
  SurveyDataset with_records(std::vector<CallRecord> rs, std::string step) const {
    SurveyDataset out{vocabulary, std::move(rs), provenance};
    out.provenance.push_back(std::move(step));
    return out;
  }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  return {tok.begin(), tok.end()};
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "0" || s == "false") return false;
  if (s == "1" || s == "true") return true;
  return std::nullopt;
}

inline std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

inline constexpr std::string_view kTokenColumnPrefix = "token_";

// Parses survey CSV text. `source` labels error messages and provenance.
// Without a vocabulary, the token columns of the header define one.
inline SurveyDataset parse_csv(std::istream& in, const std::optional<TokenVocabulary>& vocabulary,
                               const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> ValidationError {
    return ValidationError(source + ":" + std::to_string(line_no) + ": " + msg);
  };

  if (!std::getline(in, line)) throw ValidationError(source + ": missing header row");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  const char* required[] = {"call_id", "rating", "duration_s", "ptq_submitted"};
  if (header.size() < 4) throw fail("header must start with call_id,rating,duration_s,ptq_submitted");
  for (std::size_t i = 0; i < 4; ++i)
    if (header[i] != required[i])
      throw fail("expected column '" + std::string(required[i]) + "', found '" + header[i] + "'");

  std::vector<std::string> file_tokens;
  for (std::size_t i = 4; i < header.size(); ++i) {
    std::string_view h = header[i];
    if (!h.starts_with(kTokenColumnPrefix) || h.size() == kTokenColumnPrefix.size())
      throw fail("unexpected column '" + header[i] + "'");
    file_tokens.emplace_back(h.substr(kTokenColumnPrefix.size()));
  }

  SurveyDataset ds;
  if (vocabulary) {
    ds.vocabulary = *vocabulary;
    ds.vocabulary.validate();
  } else {
    try {
      ds.vocabulary = TokenVocabulary::from_names(file_tokens);
    } catch (const ValidationError& e) {
      throw fail(e.what());
    }
  }
  const std::size_t vocab_size = ds.vocabulary.size();

  // column position -> vocabulary index
  std::vector<std::size_t> column_token;
  std::vector<bool> present(vocab_size, false);
  for (const auto& t : file_tokens) {
    auto idx = ds.vocabulary.index_of(t);
    if (!idx) throw fail("unknown token column 'token_" + t + "'");
    if (present[*idx]) throw fail("duplicate token column 'token_" + t + "'");
    present[*idx] = true;
    column_token.push_back(*idx);
  }
  const bool missing_columns =
      std::find(present.begin(), present.end(), false) != present.end();

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = detail::split_csv_line(line);
    } catch (const std::exception&) {
      throw fail("malformed row");
    }
    if (fields.size() != header.size())
      throw fail("malformed row: expected " + std::to_string(header.size()) + " fields, found " +
                 std::to_string(fields.size()));

    CallRecord r;
    r.call_id = fields[0];
    auto rating = detail::parse_int(fields[1]);
    if (!rating) throw fail("malformed rating '" + fields[1] + "'");
    if (*rating < 1 || *rating > 5) throw fail("rating outside 1..5: " + fields[1]);
    r.rating = *rating;
    auto duration = detail::parse_double(fields[2]);
    if (!duration || !std::isfinite(*duration)) throw fail("malformed duration '" + fields[2] + "'");
    if (*duration < 0.0) throw fail("negative duration: " + fields[2]);
    r.duration_s = *duration;
    auto submitted = detail::parse_bool(fields[3]);
    if (!submitted) throw fail("malformed ptq_submitted '" + fields[3] + "'");
    r.ptq_submitted = *submitted;

    bool blank_token_cell = false;
    for (std::size_t c = 0; c < column_token.size(); ++c) {
      const auto& cell = fields[4 + c];
      if (cell.empty()) {
        blank_token_cell = true;
        continue;
      }
      auto bit = detail::parse_bool(cell);
      if (!bit) throw fail("malformed token value '" + cell + "'");
      r.tokens.set(column_token[c], *bit);
    }
    if ((missing_columns || blank_token_cell) && r.ptq_submitted)
      throw fail("token values missing on a submitted questionnaire");
    try {
      check_record(r, vocab_size);
    } catch (const ValidationError& e) {
      throw fail(e.what());
    }
    ds.records.push_back(std::move(r));
  }
  ds.provenance.push_back("load_csv(" + source + ")");
  return ds;
}

inline SurveyDataset load_csv(const std::string& path,
                              const std::optional<TokenVocabulary>& vocabulary = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return parse_csv(in, vocabulary, path);
}

inline void write_csv(std::ostream& out, const SurveyDataset& ds) {
  out << "call_id,rating,duration_s,ptq_submitted";
  for (const auto& n : ds.vocabulary.names) out << ',' << kTokenColumnPrefix << n;
  out << '\n';
  for (const auto& r : ds.records) {
    const bool needs_quotes = r.call_id.find_first_of(",\"\\") != std::string::npos;
    if (needs_quotes) {
      out << '"';
      for (char c : r.call_id) {
        if (c == '"' || c == '\\') out << '\\';
        out << c;
      }
      out << '"';
    } else {
      out << r.call_id;
    }
    out << ',' << r.rating << ',' << detail::format_double(r.duration_s) << ','
        << (r.ptq_submitted ? '1' : '0');
    for (std::size_t t = 0; t < ds.vocabulary.size(); ++t) out << ',' << (r.tokens.test(t) ? '1' : '0');
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const SurveyDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  write_csv(out, ds);
}

// ---------------------------------------------------------------------------
// Cleaning and resampling

struct CleanResult {
  SurveyDataset dataset;
  std::vector<std::string> removed;
};

// Drops tokens set on fewer than `min_positives` records, or on every record.
inline CleanResult clean_uninformative(const SurveyDataset& ds, std::size_t min_positives = 10) {
  const std::size_t p = ds.token_count();
  std::vector<std::size_t> positives(p, 0);
  for (const auto& r : ds.records)
    for (std::size_t t = 0; t < p; ++t) positives[t] += r.tokens.test(t) ? 1 : 0;

  std::vector<std::size_t> keep;
  CleanResult out;
  for (std::size_t t = 0; t < p; ++t) {
    const bool constant = positives[t] == 0 || positives[t] == ds.size();
    if (constant || positives[t] < min_positives)
      out.removed.push_back(ds.vocabulary.names[t]);
    else
      keep.push_back(t);
  }
  if (keep.empty()) throw ValidationError("no informative tokens");

  SurveyDataset& cleaned = out.dataset;
  for (auto t : keep) {
    cleaned.vocabulary.names.push_back(ds.vocabulary.names[t]);
    cleaned.vocabulary.display_text.push_back(ds.vocabulary.display_text[t]);
  }
  cleaned.records.reserve(ds.size());
  for (const auto& r : ds.records) {
    CallRecord c = r;
    c.tokens = TokenMask{};
    for (std::size_t j = 0; j < keep.size(); ++j) c.tokens.set(j, r.tokens.test(keep[j]));
    cleaned.records.push_back(std::move(c));
  }
  cleaned.provenance = ds.provenance;
  std::string step = "clean_uninformative(min_positives=" + std::to_string(min_positives) + ", removed=[";
  for (std::size_t i = 0; i < out.removed.size(); ++i) step += (i ? "," : "") + out.removed[i];
  cleaned.provenance.push_back(step + "])");
  return out;
}

namespace detail {

// `k` distinct elements of `pool`, chosen uniformly, returned in pool order.
inline std::vector<std::size_t> sample_subset(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline std::vector<CallRecord> pick(const SurveyDataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<CallRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.records[i]);
  return out;
}

}  // namespace detail

// Downsamples the majority class so poor and good calls are equally frequent.
// Record order of the input is preserved.
inline SurveyDataset balance_resample(const SurveyDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> poor, good;
  for (std::size_t i = 0; i < ds.size(); ++i) (poor_call(ds.records[i]) ? poor : good).push_back(i);
  if (poor.empty() || good.empty())
    throw ValidationError("balance_resample needs both poor and good calls");

  Rng rng(seed);
  const std::size_t k = std::min(poor.size(), good.size());
  if (poor.size() > k)
    poor = detail::sample_subset(poor, k, rng);
  else if (good.size() > k)
    good = detail::sample_subset(good, k, rng);

  std::vector<std::size_t> idx;
  std::merge(poor.begin(), poor.end(), good.begin(), good.end(), std::back_inserter(idx));
  return ds.with_records(detail::pick(ds, idx), "balance_resample(seed=" + std::to_string(seed) + ")");
}

// Keeps only poor calls with a submitted questionnaire, and downsamples good
// calls in proportion so the poor-call rate of the input is preserved.
inline SurveyDataset restrict_tokened_poor(const SurveyDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> poor_kept, good;
  std::size_t poor_total = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    if (poor_call(r)) {
      ++poor_total;
      if (r.ptq_submitted) poor_kept.push_back(i);
    } else {
      good.push_back(i);
    }
  }
  if (poor_kept.empty()) throw ValidationError("no tokened poor calls");

  // good' / poor' = good / poor
  const double target = static_cast<double>(poor_kept.size()) * static_cast<double>(good.size()) /
                        static_cast<double>(poor_total);
  const auto good_keep = std::min<std::size_t>(good.size(), static_cast<std::size_t>(std::llround(target)));
  Rng rng(seed);
  if (good_keep < good.size()) good = detail::sample_subset(good, good_keep, rng);

  std::vector<std::size_t> idx;
  std::merge(poor_kept.begin(), poor_kept.end(), good.begin(), good.end(), std::back_inserter(idx));
  return ds.with_records(detail::pick(ds, idx),
                         "restrict_tokened_poor(seed=" + std::to_string(seed) + ")");
}

}  // namespace ptq
