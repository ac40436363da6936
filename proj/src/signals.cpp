#include "mia/signals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <unordered_set>

#include "mia/format.hpp"

namespace mia::signals {

Cutoff Cutoff::at(std::size_t length) {
  if (length == 0) throw ConfigError("cut-off time must be >= 1");
  Cutoff c;
  c.length_ = length;
  return c;
}

Cutoff Cutoff::parse(std::string_view text) {
  if (text == "full") return full();
  std::size_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("invalid cut-off '" + std::string(text) + "' (expected 'full' or a length)");
  }
  return at(value);
}

std::size_t Cutoff::apply(std::size_t n) const noexcept {
  return length_ ? std::min(*length_, n) : n;
}

std::string Cutoff::label() const { return length_ ? std::to_string(*length_) : "full"; }

const std::vector<std::string>& all_groups() {
  static const std::vector<std::string> groups{
      std::string(kCutLoss),      std::string(kCalLoss),    std::string(kPpl),
      std::string(kCalPpl),       std::string(kCountBelow), std::string(kCountBelowMean),
      std::string(kCountBelowPrevMean), std::string(kSlope), std::string(kApEn),
      std::string(kLz),           std::string(kRepCutLoss), std::string(kRepCalLoss),
      std::string(kRepPpl),       std::string(kRepCountBelow), std::string(kRepSlope)};
  return groups;
}

void SignalConfig::validate() const {
  if (apen_m < 1) throw ConfigError("apen_m must be >= 1");
  if (!(apen_r > 0.0)) throw ConfigError("apen_r must be > 0");
  for (auto b : lz_bins) {
    if (b < 2) throw ConfigError("lz bins must be >= 2");
  }
  if (lz_length < 1) throw ConfigError("lz_length must be >= 1");
  for (auto l : slope_lengths) {
    if (l < 2) throw ConfigError("slope lengths must be >= 2");
  }
  for (auto l : apen_lengths) {
    if (l <= apen_m) throw ConfigError("apen lengths must exceed apen_m");
  }
  for (int level : repetition_levels) {
    if (level != 1 && level != 2) throw ConfigError("repetition levels must be 1 or 2");
  }
  for (double tau : cb_thresholds) {
    if (!std::isfinite(tau)) throw ConfigError("count-below thresholds must be finite");
  }
  for (const auto& g : enabled_groups) {
    if (std::find(all_groups().begin(), all_groups().end(), g) == all_groups().end()) {
      throw ConfigError("unknown signal group '" + g + "'");
    }
  }
}

// ---------------------------------------------------------------------------

double token_diversity(std::span<const std::uint64_t> token_ids) {
  if (token_ids.empty()) throw EmptyInput("token diversity of an empty token sequence");
  std::unordered_set<std::uint64_t> unique(token_ids.begin(), token_ids.end());
  return static_cast<double>(unique.size()) / static_cast<double>(token_ids.size());
}

double token_diversity(const SampleRecord& record) { return token_diversity(record.token_ids); }

double sequence_loss(std::span<const double> losses, Cutoff cutoff) {
  const std::size_t n = cutoff.apply(losses.size());
  if (n == 0) throw EmptyInput("loss sequence is empty");
  return std::accumulate(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(n), 0.0) /
         static_cast<double>(n);
}

double sequence_loss(const SampleRecord& record, Cutoff cutoff) {
  return sequence_loss(record.losses, cutoff);
}

double calibrated_loss(const SampleRecord& record, Cutoff cutoff) {
  return sequence_loss(record, cutoff) / token_diversity(record);
}

Perplexity perplexity(std::span<const double> losses, Cutoff cutoff, double diversity) {
  static const double log_cap = std::log(kMaxPerplexity);
  const double log_value = sequence_loss(losses, cutoff) - std::log(diversity);
  if (log_value > log_cap) return {kMaxPerplexity, true};
  return {std::exp(sequence_loss(losses, cutoff)) / diversity, false};
}

Perplexity perplexity(const SampleRecord& record, Cutoff cutoff, bool calibrated) {
  return perplexity(record.losses, cutoff, calibrated ? token_diversity(record) : 1.0);
}

std::vector<double> tile_losses(std::span<const double> losses, std::size_t length) {
  if (losses.empty()) throw EmptyInput("cannot tile an empty loss sequence");
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = losses[i % losses.size()];
  return out;
}

double slope(std::span<const double> losses, std::size_t length) {
  if (length < 2) throw DegenerateFit("slope needs at least 2 points");
  const auto y = tile_losses(losses, length);
  const double n = static_cast<double>(length);
  const double t_mean = (n + 1.0) / 2.0;
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    const double dt = static_cast<double>(i + 1) - t_mean;
    sxy += dt * (y[i] - y_mean);
    sxx += dt * dt;
  }
  return sxy / sxx;
}

double slope(const SampleRecord& record, std::size_t length) {
  return slope(record.losses, length);
}

double count_below_constant(std::span<const double> losses, Cutoff cutoff, double tau) {
  const std::size_t n = cutoff.apply(losses.size());
  if (n == 0) throw EmptyInput("loss sequence is empty");
  const auto below = std::count_if(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(n),
                                   [tau](double v) { return v <= tau; });
  return static_cast<double>(below) / static_cast<double>(n);
}

double count_below_mean(std::span<const double> losses, Cutoff cutoff) {
  return count_below_constant(losses, cutoff, sequence_loss(losses, Cutoff::full()));
}

double count_below_prev_mean(std::span<const double> losses, Cutoff cutoff) {
  const std::size_t n = cutoff.apply(losses.size());
  if (n < 2) throw DegenerateInput("count below previous mean needs at least 2 losses");
  double prefix_sum = losses[0];
  std::size_t below = 0;
  for (std::size_t t = 1; t < n; ++t) {
    if (losses[t] <= prefix_sum / static_cast<double>(t)) ++below;
    prefix_sum += losses[t];
  }
  return static_cast<double>(below) / static_cast<double>(n - 1);
}

double approximate_entropy_of(std::span<const double> x, std::size_t m, double r) {
  const std::size_t n = x.size();
  if (m < 1 || n <= m) {
    throw WindowError("approximate entropy needs length - m >= 1 (length " + std::to_string(n) +
                      ", m " + std::to_string(m) + ")");
  }
  const std::size_t windows_m = n - m + 1;
  const std::size_t windows_m1 = n - m;
  // Self-matches are included.
  std::vector<std::uint32_t> count_m(windows_m, 1);
  std::vector<std::uint32_t> count_m1(windows_m1, 1);

  // For each lag d, run[k] = number of consecutive k' >= k with
  // |x[k'] - x[k'+d]| <= r. Windows starting at i and i+d match at length m
  // iff run[i] >= m; the run never crosses the end of the series.
  for (std::size_t d = 1; d < windows_m; ++d) {
    std::size_t run = 0;
    for (std::size_t k = n - d; k-- > 0;) {
      run = std::fabs(x[k] - x[k + d]) <= r ? run + 1 : 0;
      if (run >= m) {
        ++count_m[k];
        ++count_m[k + d];
        if (run > m) {
          ++count_m1[k];
          ++count_m1[k + d];
        }
      }
    }
  }

  auto phi = [](const std::vector<std::uint32_t>& counts) {
    const double total = static_cast<double>(counts.size());
    double acc = 0.0;
    for (auto c : counts) acc += std::log(static_cast<double>(c) / total);
    return acc / total;
  };
  return phi(count_m) - phi(count_m1);
}

double approximate_entropy(std::span<const double> losses, std::size_t length, std::size_t m,
                           double r) {
  if (length <= m) {
    throw WindowError("approximate entropy needs length - m >= 1");
  }
  const auto tiled = tile_losses(losses, length);
  return approximate_entropy_of(tiled, m, r);
}

std::vector<std::uint32_t> quantize(std::span<const double> values, std::size_t bins) {
  if (bins < 2) throw ConfigError("quantization needs at least 2 bins");
  std::vector<std::uint32_t> out(values.size(), 0);
  if (values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double width = *hi_it - lo;
  if (!(width > 0.0)) return out;
  const double top = static_cast<double>(bins - 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double b = std::floor((values[i] - lo) / width * static_cast<double>(bins));
    out[i] = static_cast<std::uint32_t>(std::clamp(b, 0.0, top));
  }
  return out;
}

std::size_t lz_phrase_count(std::span<const std::uint32_t> symbols) {
  // Dictionary trie; node 0 is the empty phrase.
  std::map<std::pair<std::size_t, std::uint32_t>, std::size_t> children;
  std::size_t nodes = 1;
  std::size_t node = 0;
  std::size_t phrases = 0;
  for (auto s : symbols) {
    auto it = children.find({node, s});
    if (it != children.end()) {
      node = it->second;
    } else {
      children.emplace(std::make_pair(node, s), nodes++);
      ++phrases;
      node = 0;
    }
  }
  if (node != 0) ++phrases;
  return phrases;
}

std::size_t lz_complexity(std::span<const double> losses, std::size_t length, std::size_t bins) {
  if (length < 1) throw ConfigError("LZ length must be >= 1");
  return lz_phrase_count(quantize(tile_losses(losses, length), bins));
}

// ---------------------------------------------------------------------------

namespace {

double evaluate_base(const BaseSignal& s, std::span<const double> losses, double diversity) {
  using Kind = BaseSignal::Kind;
  switch (s.kind) {
    case Kind::sequence_loss: return sequence_loss(losses, s.cutoff);
    case Kind::calibrated_loss: return sequence_loss(losses, s.cutoff) / diversity;
    case Kind::perplexity: return perplexity(losses, s.cutoff).value;
    case Kind::count_below_constant: return count_below_constant(losses, s.cutoff, s.tau);
    case Kind::slope: return slope(losses, s.length);
  }
  throw ConfigError("unknown base signal");
}

}  // namespace

double repetition_delta(const SampleRecord& record, const BaseSignal& signal, int level) {
  const std::optional<std::vector<double>>* repeated = nullptr;
  if (level == 1) {
    repeated = &record.rep1_losses;
  } else if (level == 2) {
    repeated = &record.rep2_losses;
  } else {
    throw ConfigError("repetition level must be 1 or 2");
  }
  if (!repeated->has_value()) {
    throw MissingContext("record '" + record.id + "' has no rep" + std::to_string(level) +
                         "_losses");
  }
  const double diversity =
      signal.kind == BaseSignal::Kind::calibrated_loss ? token_diversity(record) : 1.0;
  return evaluate_base(signal, record.losses, diversity) -
         evaluate_base(signal, **repeated, diversity);
}

// ---------------------------------------------------------------------------
// Catalog

namespace {

struct Evaluated {
  double value;
  bool clamped = false;
};

struct FeatureSpec {
  CatalogEntry entry;
  int rep_level = 0;
  std::function<Evaluated(const SampleRecord&)> eval;
};

std::string tau_label(double tau) { return "tau" + format_real(tau); }

std::vector<FeatureSpec> build_specs(const SignalConfig& cfg) {
  cfg.validate();
  std::vector<FeatureSpec> specs;
  auto enabled = [&](std::string_view g) { return cfg.enabled_groups.count(std::string(g)) > 0; };
  auto add = [&](std::string name, std::string_view group, auto fn, int level = 0) {
    specs.push_back({{std::move(name), std::string(group)}, level, std::move(fn)});
  };

  if (enabled(kCutLoss)) {
    for (auto c : cfg.cutoffs) {
      add("cut_loss_T" + c.label(), kCutLoss,
          [c](const SampleRecord& r) { return Evaluated{sequence_loss(r, c)}; });
    }
  }
  if (enabled(kCalLoss)) {
    for (auto c : cfg.cutoffs) {
      add("cal_loss_T" + c.label(), kCalLoss,
          [c](const SampleRecord& r) { return Evaluated{calibrated_loss(r, c)}; });
    }
  }
  if (enabled(kPpl)) {
    for (auto c : cfg.cutoffs) {
      add("ppl_T" + c.label(), kPpl, [c](const SampleRecord& r) {
        auto p = perplexity(r, c, false);
        return Evaluated{p.value, p.clamped};
      });
    }
  }
  if (enabled(kCalPpl)) {
    for (auto c : cfg.cutoffs) {
      add("cal_ppl_T" + c.label(), kCalPpl, [c](const SampleRecord& r) {
        auto p = perplexity(r, c, true);
        return Evaluated{p.value, p.clamped};
      });
    }
  }
  if (enabled(kCountBelow)) {
    for (auto c : cfg.cutoffs) {
      for (double tau : cfg.cb_thresholds) {
        add("cb_" + tau_label(tau) + "_T" + c.label(), kCountBelow, [c, tau](const SampleRecord& r) {
          return Evaluated{count_below_constant(r.losses, c, tau)};
        });
      }
    }
  }
  if (enabled(kCountBelowMean)) {
    for (auto c : cfg.cutoffs) {
      add("cbm_T" + c.label(), kCountBelowMean,
          [c](const SampleRecord& r) { return Evaluated{count_below_mean(r.losses, c)}; });
    }
  }
  if (enabled(kCountBelowPrevMean)) {
    for (auto c : cfg.cutoffs) {
      add("cbpm_T" + c.label(), kCountBelowPrevMean,
          [c](const SampleRecord& r) { return Evaluated{count_below_prev_mean(r.losses, c)}; });
    }
  }
  if (enabled(kSlope)) {
    for (auto len : cfg.slope_lengths) {
      add("slope_L" + std::to_string(len), kSlope,
          [len](const SampleRecord& r) { return Evaluated{slope(r, len)}; });
    }
  }
  if (enabled(kApEn)) {
    for (auto len : cfg.apen_lengths) {
      add("apen_L" + std::to_string(len), kApEn,
          [len, m = cfg.apen_m, rr = cfg.apen_r](const SampleRecord& r) {
            return Evaluated{approximate_entropy(r.losses, len, m, rr)};
          });
    }
  }
  if (enabled(kLz)) {
    for (auto bins : cfg.lz_bins) {
      add("lz_b" + std::to_string(bins) + "_L" + std::to_string(cfg.lz_length), kLz,
          [bins, len = cfg.lz_length](const SampleRecord& r) {
            return Evaluated{static_cast<double>(lz_complexity(r.losses, len, bins))};
          });
    }
  }

  using Kind = BaseSignal::Kind;
  auto add_rep = [&](std::string_view group, std::string stem, BaseSignal base, int level) {
    add("rep" + std::to_string(level) + "_" + stem, group,
        [base, level](const SampleRecord& r) { return Evaluated{repetition_delta(r, base, level)}; },
        level);
  };
  for (int level : cfg.repetition_levels) {
    if (enabled(kRepCutLoss)) {
      for (auto c : cfg.cutoffs) {
        add_rep(kRepCutLoss, "cut_loss_T" + c.label(), {Kind::sequence_loss, c}, level);
      }
    }
  }
  for (int level : cfg.repetition_levels) {
    if (enabled(kRepCalLoss)) {
      for (auto c : cfg.cutoffs) {
        add_rep(kRepCalLoss, "cal_loss_T" + c.label(), {Kind::calibrated_loss, c}, level);
      }
    }
  }
  for (int level : cfg.repetition_levels) {
    if (enabled(kRepPpl)) {
      for (auto c : cfg.cutoffs) {
        add_rep(kRepPpl, "ppl_T" + c.label(), {Kind::perplexity, c}, level);
      }
    }
  }
  for (int level : cfg.repetition_levels) {
    if (enabled(kRepCountBelow)) {
      for (auto c : cfg.cutoffs) {
        for (double tau : cfg.cb_thresholds) {
          add_rep(kRepCountBelow, "cb_" + tau_label(tau) + "_T" + c.label(),
                  {Kind::count_below_constant, c, tau}, level);
        }
      }
    }
  }
  for (int level : cfg.repetition_levels) {
    if (enabled(kRepSlope)) {
      for (auto len : cfg.slope_lengths) {
        add_rep(kRepSlope, "slope_L" + std::to_string(len), {Kind::slope, Cutoff::full(), 1.0, len},
                level);
      }
    }
  }

  // Keep group blocks contiguous and in catalog order.
  std::stable_sort(specs.begin(), specs.end(), [](const FeatureSpec& a, const FeatureSpec& b) {
    const auto& groups = all_groups();
    return std::find(groups.begin(), groups.end(), a.entry.group) <
           std::find(groups.begin(), groups.end(), b.entry.group);
  });
  return specs;
}

bool is_parameter_token(std::string_view tok) {
  auto digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (tok == "Tfull") return true;
  if (tok.size() > 1 && (tok[0] == 'T' || tok[0] == 'L' || tok[0] == 'b') && digits(tok.substr(1))) {
    return true;
  }
  return tok.size() > 3 && tok.substr(0, 3) == "tau";
}

}  // namespace

std::vector<CatalogEntry> feature_catalog(const SignalConfig& config) {
  std::vector<CatalogEntry> out;
  for (auto& spec : build_specs(config)) out.push_back(std::move(spec.entry));
  return out;
}

std::string feature_group(std::string_view name) {
  std::string prefix;
  if (name.size() > 5 && (name.substr(0, 5) == "rep1_" || name.substr(0, 5) == "rep2_")) {
    prefix = "rep_";
    name.remove_prefix(5);
  }
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (start <= name.size()) {
    const auto pos = name.find('_', start);
    const auto end = pos == std::string_view::npos ? name.size() : pos;
    tokens.push_back(name.substr(start, end - start));
    start = end + 1;
  }
  while (tokens.size() > 1 && is_parameter_token(tokens.back())) tokens.pop_back();
  std::string group = prefix;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) group += '_';
    group += tokens[i];
  }
  return group;
}

FeatureVector extract_feature_vector(const SampleRecord& record, const SignalConfig& config) {
  FeatureVector fv;
  std::map<int, std::size_t> missing_by_level;
  for (const auto& spec : build_specs(config)) {
    try {
      const auto [value, clamped] = spec.eval(record);
      if (!std::isfinite(value)) {
        fv.notes.push_back(spec.entry.name + ": non-finite value omitted");
        continue;
      }
      if (clamped) fv.notes.push_back(spec.entry.name + ": perplexity clamped to maximum");
      fv.values.emplace(spec.entry.name, value);
      if (fv.groups.empty() || fv.groups.back().first != spec.entry.group) {
        fv.groups.emplace_back(spec.entry.group, std::vector<std::string>{});
      }
      fv.groups.back().second.push_back(spec.entry.name);
    } catch (const MissingContext&) {
      ++missing_by_level[spec.rep_level];
    } catch (const DegenerateInput& e) {
      fv.notes.push_back(spec.entry.name + ": " + e.what());
    } catch (const DegenerateFit& e) {
      fv.notes.push_back(spec.entry.name + ": " + e.what());
    } catch (const WindowError& e) {
      fv.notes.push_back(spec.entry.name + ": " + e.what());
    }
  }
  for (auto [level, count] : missing_by_level) {
    fv.notes.push_back("rep" + std::to_string(level) + "_losses absent: " + std::to_string(count) +
                       " features omitted");
  }
  if (fv.values.empty()) {
    throw FeatureError("record '" + record.id + "' yields no features");
  }
  return fv;
}

}  // namespace mia::signals
