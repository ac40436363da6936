#include "mia/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mia/baselines.hpp"
#include "mia/composition.hpp"
#include "mia/evaluation.hpp"
#include "mia/feature_matrix.hpp"
#include "mia/format.hpp"
#include "mia/model_io.hpp"
#include "mia/synth.hpp"

namespace fs = std::filesystem;

namespace mia::cli {

namespace {

using nlohmann::ordered_json;

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {
    const char* env = std::getenv("MIA_LOG_LEVEL");
    const std::string v = env ? env : "info";
    level_ = v == "quiet" ? 0 : v == "debug" ? 2 : 1;
  }
  void info(const std::string& msg) const {
    if (level_ >= 1) err_ << "[info] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= 2) err_ << "[debug] " << msg << '\n';
  }

 private:
  std::ostream& err_;
  int level_ = 1;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  std::string preset = "defaults";
  std::vector<std::function<void(synth::GeneratorConfig&)>> overrides;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic trace file");
  cmd->add_option("--out", a.out, "Output trace file")->required();
  cmd->add_option("--preset", a.preset, "defaults | diversity_confounded")
      ->check(CLI::IsMember({"defaults", "diversity_confounded"}));

  auto set = [&](const std::string& flag, const std::string& help, auto field) {
    using T = std::remove_reference_t<decltype(field(std::declval<synth::GeneratorConfig&>()))>;
    cmd->add_option_function<T>(
        flag, [&a, field](const T& v) { a.overrides.push_back([field, v](auto& c) { field(c) = v; }); },
        help);
  };
  set("--seed", "RNG seed", [](synth::GeneratorConfig& c) -> std::uint64_t& { return c.seed; });
  set("--members", "Member count", [](synth::GeneratorConfig& c) -> std::size_t& { return c.n_members; });
  set("--nonmembers", "Non-member count",
      [](synth::GeneratorConfig& c) -> std::size_t& { return c.n_nonmembers; });
  set("--min-length", "Minimum tokens per record",
      [](synth::GeneratorConfig& c) -> std::size_t& { return c.min_length; });
  set("--max-length", "Maximum tokens per record",
      [](synth::GeneratorConfig& c) -> std::size_t& { return c.max_length; });
  set("--rep-noise", "Noise std of repeated-context losses",
      [](synth::GeneratorConfig& c) -> double& { return c.rep_noise_std; });
  set("--ref-mean", "Reference model mean loss", [](synth::GeneratorConfig& c) -> double& { return c.ref_mean; });
  set("--ref-noise", "Reference model loss noise std",
      [](synth::GeneratorConfig& c) -> double& { return c.ref_noise_std; });
  set("--vocab-size", "Token id range", [](synth::GeneratorConfig& c) -> std::uint64_t& { return c.vocab_size; });
  set("--domain", "Domain tag", [](synth::GeneratorConfig& c) -> std::string& { return c.domain; });
  set("--with-text", "Emit text", [](synth::GeneratorConfig& c) -> bool& { return c.with_text; });
  set("--with-reps", "Emit repeated-context losses", [](synth::GeneratorConfig& c) -> bool& { return c.with_reps; });
  set("--with-ref", "Emit reference losses", [](synth::GeneratorConfig& c) -> bool& { return c.with_ref; });
  set("--with-vocab-stats", "Emit vocabulary statistics",
      [](synth::GeneratorConfig& c) -> bool& { return c.with_vocab_stats; });

  for (const std::string who : {"member", "nonmember"}) {
    auto law = [who](synth::GeneratorConfig& c) -> synth::TraceLaw& {
      return who == "member" ? c.member : c.nonmember;
    };
    auto field = [&](const std::string& name, const std::string& help, double synth::TraceLaw::*m) {
      set("--" + who + "-" + name, who + " " + help,
          [law, m](synth::GeneratorConfig& c) -> double& { return law(c).*m; });
    };
    field("mean", "base mean loss", &synth::TraceLaw::base_mean);
    field("slope", "loss slope per position", &synth::TraceLaw::slope);
    field("noise", "loss noise std", &synth::TraceLaw::noise_std);
    field("spike-prob", "spike probability", &synth::TraceLaw::spike_prob);
    field("spike-magnitude", "spike magnitude", &synth::TraceLaw::spike_magnitude);
    field("reuse", "token reuse probability", &synth::TraceLaw::reuse_prob);
    field("reuse-jitter", "per-record reuse jitter", &synth::TraceLaw::reuse_jitter);
    field("coupling", "diversity coupling of the mean", &synth::TraceLaw::diversity_coupling);
    field("rep-gain", "loss gain per repetition", &synth::TraceLaw::rep_gain);
  }
}

int cmd_synth(const SynthArgs& a, const Log& log) {
  auto cfg = a.preset == "diversity_confounded" ? synth::GeneratorConfig::diversity_confounded()
                                                : synth::GeneratorConfig::defaults();
  for (const auto& f : a.overrides) f(cfg);
  const auto ds = synth::generate_dataset(cfg);
  write_trace_file(ds, a.out);
  log.info("wrote " + std::to_string(ds.size()) + " records to " + a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// signals

struct SignalsArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::vector<std::string> cutoffs;
  std::vector<std::string> groups;
  bool no_baselines = false;
  ExtractionOptions options;
};

void add_signals(CLI::App& app, SignalsArgs& a) {
  auto& s = a.options.signals;
  auto* cmd = app.add_subcommand("signals", "Compute the feature matrix of trace files");
  cmd->add_option("--input", a.inputs, "Trace file(s)")->required();
  cmd->add_option("--out", a.out, "Feature matrix CSV")->required();
  cmd->add_option("--cutoffs", a.cutoffs, "Cut-offs: full or token counts");
  cmd->add_option("--cb-thresholds", s.cb_thresholds, "Count-below thresholds");
  cmd->add_option("--slope-lengths", s.slope_lengths, "Slope horizons");
  cmd->add_option("--apen-m", s.apen_m, "ApEn window");
  cmd->add_option("--apen-r", s.apen_r, "ApEn tolerance");
  cmd->add_option("--apen-lengths", s.apen_lengths, "ApEn horizons");
  cmd->add_option("--lz-bins", s.lz_bins, "LZ quantization bins");
  cmd->add_option("--lz-length", s.lz_length, "LZ horizon");
  cmd->add_option("--rep-levels", s.repetition_levels, "Repetition levels");
  cmd->add_option("--groups", a.groups, "Signal groups to compute (default all)");
  cmd->add_flag("--no-baselines", a.no_baselines, "Skip baseline columns");
  cmd->add_option("--min-k", a.options.min_k_percent, "K for Min-K% and Min-K%++");
}

LabeledDataset read_inputs(const std::vector<std::string>& paths) {
  if (paths.size() == 1) return read_trace_file(paths.front());
  std::vector<SampleRecord> all;
  for (const auto& p : paths) {
    const auto ds = read_trace_file(p);
    all.insert(all.end(), ds.begin(), ds.end());
  }
  return LabeledDataset(std::move(all));
}

int cmd_signals(SignalsArgs a, unsigned threads, const Log& log) {
  auto& s = a.options.signals;
  if (!a.cutoffs.empty()) {
    s.cutoffs.clear();
    for (const auto& c : a.cutoffs) s.cutoffs.push_back(signals::Cutoff::parse(c));
  }
  if (!a.groups.empty()) {
    for (const auto& g : a.groups) {
      const auto& known = signals::all_groups();
      if (std::find(known.begin(), known.end(), g) == known.end()) {
        throw ConfigError("unknown signal group '" + g + "'");
      }
    }
    s.enabled_groups = {a.groups.begin(), a.groups.end()};
  }
  s.validate();
  a.options.baselines = !a.no_baselines;
  a.options.threads = threads;

  const auto ds = read_inputs(a.inputs);
  const auto result = extract_feature_matrix(ds, a.options);
  for (const auto& [id, note] : result.notes) log.debug(id + ": " + note);
  if (!result.notes.empty()) log.info(std::to_string(result.notes.size()) + " extraction notes");
  write_feature_matrix(result.matrix, a.out);
  log.info("wrote " + std::to_string(result.matrix.size()) + " x " +
           std::to_string(result.matrix.columns.size()) + " features to " + a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// attack

struct AttackArgs {
  std::string features;
  std::string out_dir;
  std::vector<std::string> modes{"edgington"};
  std::vector<std::size_t> pca_components{1};
  std::vector<std::string> groups;
  std::vector<std::string> columns;
  std::string traces;
  std::string split_mode = "member_and_nonmember";
  SplitSpec split;
  composition::LROptions lr;
};

void add_attack(CLI::App& app, AttackArgs& a) {
  auto* cmd = app.add_subcommand("attack", "Fit attacks on the attack split and score the target split");
  cmd->add_option("--features", a.features, "Feature matrix CSV")->required();
  cmd->add_option("--out-dir", a.out_dir, "Output directory")->required();
  cmd->add_option("--mode", a.modes,
                  "edgington | fisher | pearson | george | lr | lr_gpca | baseline:<name>");
  cmd->add_option("--pca-components", a.pca_components, "Components per group for lr_gpca");
  cmd->add_option("--groups", a.groups, "Restrict to these signal groups");
  cmd->add_option("--columns", a.columns, "Restrict to these feature columns");
  cmd->add_option("--traces", a.traces, "Trace file, needed by baseline:blind_nb");
  cmd->add_option("--alpha", a.split.alpha, "Attack-set percentage per class");
  cmd->add_option("--seed", a.split.seed, "Split seed");
  cmd->add_option("--split-mode", a.split_mode, "member_and_nonmember | nonmember_only");
  cmd->add_option("--learning-rate", a.lr.learning_rate, "LR step size");
  cmd->add_option("--epochs", a.lr.epochs, "LR epochs");
  cmd->add_option("--ridge", a.lr.ridge, "LR ridge penalty (0 disables)");
}

FeatureRow project(const FeatureRow& row, const std::vector<std::size_t>& cols) {
  FeatureRow out;
  out.reserve(cols.size());
  for (auto c : cols) out.push_back(row[c]);
  return out;
}

void write_scores(const fs::path& path, const FeatureMatrix& m, const std::vector<std::size_t>& target,
                  const std::vector<double>& scores, std::optional<std::size_t> loss_col) {
  auto out = open_out(path);
  out << "id,label,score" << (loss_col ? ",loss_score" : "") << '\n';
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto i = target[k];
    out << csv_escape(m.ids[i]) << ',' << to_string(m.labels[i]) << ',' << format_real(scores[k]);
    if (loss_col) {
      const auto& v = m.rows[i][*loss_col];
      out << ',' << (v ? format_real(-*v) : std::string(kMissingToken));
    }
    out << '\n';
  }
}

int cmd_attack(const AttackArgs& a, const Log& log) {
  using namespace composition;
  SplitSpec spec = a.split;
  const auto mode = parse_split_mode(a.split_mode);
  if (!mode) throw ConfigError("unknown split mode '" + a.split_mode + "'");
  spec.mode = *mode;
  spec.validate();

  const auto m = read_feature_matrix(a.features);
  const auto split = split_indices(m.labels, spec);
  log.info("split: " + std::to_string(split.attack.size()) + " attack, " +
           std::to_string(split.target.size()) + " target records");

  // Feature selection.
  std::vector<std::size_t> cols;
  if (!a.columns.empty()) {
    for (const auto& name : a.columns) {
      auto c = m.column_index(name);
      if (!c) throw ConfigError("unknown feature column '" + name + "'");
      cols.push_back(*c);
    }
  } else {
    const std::set<std::string> groups(a.groups.begin(), a.groups.end());
    for (const auto& name : m.signal_columns()) {
      if (groups.empty() || groups.count(signals::feature_group(name))) cols.push_back(*m.column_index(name));
    }
  }
  std::vector<std::size_t> usable;
  for (auto c : cols) {
    const bool any = std::any_of(split.attack.begin(), split.attack.end(),
                                 [&](std::size_t i) { return m.rows[i][c].has_value(); });
    if (any) {
      usable.push_back(c);
    } else {
      log.info("dropping '" + m.columns[c] + "': missing on the whole attack split");
    }
  }
  std::vector<std::string> names;
  for (auto c : usable) names.push_back(m.columns[c]);
  const auto features = FeatureSet::from_names(names);

  std::vector<FeatureRow> attack_rows;
  std::vector<Label> attack_labels;
  std::vector<FeatureRow> reference_rows;
  for (auto i : split.attack) {
    attack_rows.push_back(project(m.rows[i], usable));
    attack_labels.push_back(m.labels[i]);
    if (m.labels[i] == Label::nonmember) reference_rows.push_back(attack_rows.back());
  }
  std::vector<FeatureRow> target_rows;
  for (auto i : split.target) target_rows.push_back(project(m.rows[i], usable));

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const auto loss_col = m.column_index(std::string(kBaselinePrefix) + "loss");

  {
    auto out = open_out(dir / "split.csv");
    out << "id,label,set\n";
    std::vector<const char*> set(m.size(), "target");
    for (auto i : split.attack) set[i] = "attack";
    for (std::size_t i = 0; i < m.size(); ++i) {
      out << csv_escape(m.ids[i]) << ',' << to_string(m.labels[i]) << ',' << set[i] << '\n';
    }
  }

  auto fit_and_score = [&](const std::string& tag, const AttackModel& model) {
    std::vector<double> scores;
    scores.reserve(target_rows.size());
    for (const auto& row : target_rows) scores.push_back(score(model, row));
    save_model(model, (dir / ("model_" + tag + ".json")).string());
    write_scores(dir / ("scores_" + tag + ".csv"), m, split.target, scores, loss_col);
    log.info("attack " + tag + ": scored " + std::to_string(scores.size()) + " records");
  };

  for (const auto& mode_name : a.modes) {
    if (auto comb = parse_combiner(mode_name)) {
      const auto table = OrientationTable::defaults(features.groups);
      fit_and_score(mode_name, PValueComposer::fit(reference_rows, features, table, *comb));
    } else if (mode_name == "lr" || mode_name == "lr_gpca") {
      std::vector<std::optional<std::size_t>> variants{std::nullopt};
      if (mode_name == "lr_gpca") variants.assign(a.pca_components.begin(), a.pca_components.end());
      for (const auto& c : variants) {
        LROptions opt = a.lr;
        opt.pca_components = c;
        const auto model = fit_lr(attack_rows, attack_labels, features, opt);
        for (const auto& d : model.dropped) log.info("lr: dropped zero-variance input '" + d + "'");
        fit_and_score(c ? "lr_gpca_c" + std::to_string(*c) : std::string("lr"), model);
      }
    } else if (mode_name.rfind("baseline:", 0) == 0) {
      const auto method = baselines::parse_method(mode_name.substr(9));
      if (!method) throw ConfigError("unknown baseline '" + mode_name.substr(9) + "'");
      const std::string tag = "baseline_" + std::string(baselines::to_string(*method));
      std::vector<double> scores;
      if (*method == baselines::Method::blind_nb) {
        if (a.traces.empty()) throw ConfigError("baseline:blind_nb needs --traces");
        const auto ds = read_trace_file(a.traces);
        std::map<std::string, const SampleRecord*> by_id;
        for (const auto& r : ds) by_id[r.id] = &r;
        auto collect = [&](const std::vector<std::size_t>& idx) {
          std::vector<SampleRecord> out;
          for (auto i : idx) {
            auto it = by_id.find(m.ids[i]);
            if (it == by_id.end()) throw ConfigError("record '" + m.ids[i] + "' is not in the trace file");
            out.push_back(*it->second);
          }
          return LabeledDataset(std::move(out));
        };
        for (const auto& s : baselines::blind_baseline(collect(split.attack), collect(split.target))) {
          scores.push_back(s.score);
        }
      } else {
        const auto col = m.column_index(tag);
        if (!col) throw ConfigError("feature matrix has no column '" + tag + "'");
        for (auto i : split.target) {
          const auto& v = m.rows[i][*col];
          if (!v) throw MetricError("record '" + m.ids[i] + "' has no " + tag + " value");
          scores.push_back(-*v);
        }
      }
      write_scores(dir / ("scores_" + tag + ".csv"), m, split.target, scores, loss_col);
      log.info("attack " + tag + ": scored " + std::to_string(scores.size()) + " records");
    } else {
      throw ConfigError("unknown attack mode '" + mode_name + "'");
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::vector<std::string> scores;
  std::string out_dir;
  std::vector<double> fpr{0.001, 0.01, 0.05};
  std::size_t bins = 30;
  bool plots = false;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  auto* cmd = app.add_subcommand("evaluate", "Evaluate score files");
  cmd->add_option("--scores", a.scores, "Score CSV file(s)")->required();
  cmd->add_option("--out-dir", a.out_dir, "Report directory")->required();
  cmd->add_option("--fpr", a.fpr, "FPR targets");
  cmd->add_option("--bins", a.bins, "Histogram bins");
  cmd->add_flag("--plots", a.plots, "Also write SVG plots");
}

struct LoadedScores {
  evaluation::ScoredDataset scores;
  std::optional<evaluation::ScoredDataset> loss;
};

LoadedScores read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scores '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw MetricError("empty scores file '" + path + "'");
  const auto header = csv_split(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label" || header[2] != "score") {
    throw ParseError(1, "scores file must start with id,label,score");
  }
  const bool has_loss = header.size() > 3 && header[3] == "loss_score";
  std::vector<evaluation::ScoredRecord> recs;
  std::vector<evaluation::ScoredRecord> loss;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != header.size()) throw ParseError(lineno, "wrong number of fields");
    const auto label = parse_label(f[1]);
    const auto s = parse_real(f[2]);
    if (!label || !s) throw ParseError(lineno, "bad label or score");
    recs.push_back({f[0], *label, *s});
    if (has_loss) {
      const auto l = parse_real(f[3]);
      if (!l) throw ParseError(lineno, "bad loss_score");
      loss.push_back({f[0], *label, *l});
    }
  }
  LoadedScores out{evaluation::ScoredDataset(std::move(recs)), std::nullopt};
  if (has_loss) out.loss = evaluation::ScoredDataset(std::move(loss));
  return out;
}

std::string tag_of(const fs::path& p) {
  std::string stem = p.stem().string();
  return stem.rfind("scores_", 0) == 0 ? stem.substr(7) : stem;
}

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void write_roc_svg(const fs::path& path, const std::string& title, const std::vector<evaluation::RocPoint>& roc) {
  auto out = open_out(path);
  const double w = 400, h = 400, pad = 40;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 * pad << "\" height=\"" << h + 2 * pad
      << "\">\n";
  out << "<text x=\"" << pad << "\" y=\"" << pad / 2 << "\" font-size=\"14\">ROC " << title << "</text>\n";
  out << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << pad + h << "\" x2=\"" << pad + w << "\" y2=\"" << pad
      << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& p : roc) out << svg_num(pad + p.fpr * w) << ',' << svg_num(pad + h - p.tpr * h) << ' ';
  out << "\"/>\n";
  out << "<text x=\"" << pad + w / 2 << "\" y=\"" << 2 * pad + h - 10 << "\" font-size=\"12\">FPR</text>\n";
  out << "<text x=\"5\" y=\"" << pad + h / 2 << "\" font-size=\"12\">TPR</text>\n</svg>\n";
}

void write_hist_svg(const fs::path& path, const std::string& title, const evaluation::Histogram& hist) {
  auto out = open_out(path);
  const double w = 600, h = 300, pad = 40;
  std::size_t peak = 1;
  for (std::size_t b = 0; b < hist.members.size(); ++b) {
    peak = std::max({peak, hist.members[b], hist.nonmembers[b]});
  }
  const double bw = w / static_cast<double>(hist.members.size());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 * pad << "\" height=\"" << h + 2 * pad
      << "\">\n";
  out << "<text x=\"" << pad << "\" y=\"" << pad / 2 << "\" font-size=\"14\">Scores " << title
      << " (members blue, non-members orange)</text>\n";
  auto bars = [&](const std::vector<std::size_t>& counts, const char* color) {
    for (std::size_t b = 0; b < counts.size(); ++b) {
      const double bh = h * static_cast<double>(counts[b]) / static_cast<double>(peak);
      out << "<rect x=\"" << svg_num(pad + bw * static_cast<double>(b)) << "\" y=\"" << svg_num(pad + h - bh)
          << "\" width=\"" << svg_num(bw) << "\" height=\"" << svg_num(bh) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.5\"/>\n";
    }
  };
  bars(hist.members, "steelblue");
  bars(hist.nonmembers, "darkorange");
  out << "<text x=\"" << pad << "\" y=\"" << 2 * pad + h - 10 << "\" font-size=\"12\">" << format_real(hist.edges.front())
      << "</text>\n";
  out << "<text x=\"" << pad + w - 60 << "\" y=\"" << 2 * pad + h - 10 << "\" font-size=\"12\">"
      << format_real(hist.edges.back()) << "</text>\n</svg>\n";
}

int cmd_evaluate(const EvaluateArgs& a, const Log& log) {
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);

  ordered_json report;
  report["format"] = "mia-report";
  report["version"] = 1;
  report["fpr_targets"] = a.fpr;
  auto& attacks = report["attacks"] = ordered_json::array();

  for (const auto& path_str : a.scores) {
    const fs::path path(path_str);
    const std::string tag = tag_of(path);
    const auto loaded = read_scores(path_str);
    auto ev = evaluation::evaluate_attack(tag, loaded.scores, a.fpr, loaded.loss ? &*loaded.loss : nullptr,
                                          a.bins);

    const auto model_path = path.parent_path() / ("model_" + tag + ".json");
    if (fs::exists(model_path)) {
      const auto model = load_model(model_path.string());
      if (const auto* lr = std::get_if<composition::LRModel>(&model)) {
        ev.importances = evaluation::feature_importance(*lr);
      }
    }

    ordered_json j;
    j["name"] = ev.name;
    j["members"] = ev.members;
    j["nonmembers"] = ev.nonmembers;
    j["auc"] = ev.auc;
    auto& tprs = j["tpr_at_fpr"] = ordered_json::array();
    for (const auto& [fpr, tpr] : ev.tpr_at) tprs.push_back({{"fpr", fpr}, {"tpr", tpr}});
    if (ev.overlap_vs_loss) {
      j["overlap_vs_loss"] = {{"fpr", 0.01},
                              {"new_fraction", ev.overlap_vs_loss->new_fraction},
                              {"missing_fraction", ev.overlap_vs_loss->missing_fraction}};
    } else {
      j["overlap_vs_loss"] = nullptr;
    }
    j["importances"] = ordered_json::object();
    for (const auto& [g, v] : ev.importances) j["importances"][g] = v;
    j["roc_file"] = "roc_" + tag + ".csv";
    j["histogram_file"] = "hist_" + tag + ".csv";
    attacks.push_back(std::move(j));

    {
      auto out = open_out(dir / ("roc_" + tag + ".csv"));
      out << "fpr,tpr,threshold\n";
      for (const auto& p : ev.roc) {
        out << format_real(p.fpr) << ',' << format_real(p.tpr) << ','
            << (std::isinf(p.threshold) ? std::string("inf") : format_real(p.threshold)) << '\n';
      }
    }
    {
      auto out = open_out(dir / ("hist_" + tag + ".csv"));
      out << "bin_lo,bin_hi,members,nonmembers\n";
      const auto& hgram = ev.histogram;
      for (std::size_t b = 0; b < hgram.members.size(); ++b) {
        out << format_real(hgram.edges[b]) << ',' << format_real(hgram.edges[b + 1]) << ',' << hgram.members[b]
            << ',' << hgram.nonmembers[b] << '\n';
      }
    }
    if (a.plots) {
      write_roc_svg(dir / ("roc_" + tag + ".svg"), tag, ev.roc);
      write_hist_svg(dir / ("hist_" + tag + ".svg"), tag, ev.histogram);
    }
    log.info("evaluated " + tag + ": AUC " + format_real(ev.auc));
  }

  auto out = open_out(dir / "report.json");
  out << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Log log(err);
  CLI::App app("Membership inference from per-token loss traces", "mia");
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file, one section per subcommand");
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads for feature extraction (0 = all cores)");

  SynthArgs synth_args;
  SignalsArgs signals_args;
  AttackArgs attack_args;
  EvaluateArgs evaluate_args;
  add_synth(app, synth_args);
  add_signals(app, signals_args);
  add_attack(app, attack_args);
  add_evaluate(app, evaluate_args);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (app.got_subcommand("synth")) return cmd_synth(synth_args, log);
    if (app.got_subcommand("signals")) return cmd_signals(signals_args, threads, log);
    if (app.got_subcommand("attack")) return cmd_attack(attack_args, log);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(evaluate_args, log);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace mia::cli
