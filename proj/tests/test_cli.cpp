#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "mia/cli.hpp"
#include "mia/composition.hpp"
#include "mia/evaluation.hpp"
#include "mia/feature_matrix.hpp"
#include "mia/format.hpp"
#include "mia/model_io.hpp"

using namespace mia;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

std::size_t count_lines(const fs::path& path) {
  const auto text = testing::slurp(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

evaluation::ScoredDataset read_scored(const fs::path& path) {
  std::istringstream in(testing::slurp(path));
  std::string line;
  std::getline(in, line);
  std::vector<evaluation::ScoredRecord> recs;
  while (std::getline(in, line)) {
    const auto f = csv_split(line);
    recs.push_back({f[0], *parse_label(f[1]), *parse_real(f[2])});
  }
  return evaluation::ScoredDataset(std::move(recs));
}

/// Small synthetic corpus plus its feature matrix, built once.
const fs::path& corpus() {
  static const fs::path dir = [] {
    auto d = testing::temp_dir("cli_corpus");
    setenv("MIA_LOG_LEVEL", "quiet", 1);
    REQUIRE(run_cli({"synth", "--out", p(d / "t.jsonl"), "--members", "80", "--nonmembers", "80"}).code == 0);
    REQUIRE(run_cli({"signals", "--input", p(d / "t.jsonl"), "--out", p(d / "f.csv")}).code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({}).code != 0);
  CHECK(run_cli({"nonsense"}).code != 0);
  CHECK(run_cli({"synth"}).code != 0);
  const auto r = run_cli({"synth", "--out", "x.jsonl", "--preset", "bogus"});
  CHECK(r.code != 0);
}

TEST_CASE("synth writes the default corpus") {
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  const auto d = testing::temp_dir("cli_synth");
  REQUIRE(run_cli({"synth", "--out", p(d / "a.jsonl")}).code == 0);
  CHECK(count_lines(d / "a.jsonl") == 1000);
  const auto ds = read_trace_file(p(d / "a.jsonl"));
  CHECK(ds.size() == 1000);
  write_trace_file(ds, p(d / "b.jsonl"));
  CHECK(testing::slurp(d / "a.jsonl") == testing::slurp(d / "b.jsonl"));

  REQUIRE(run_cli({"synth", "--out", p(d / "c.jsonl")}).code == 0);
  CHECK(testing::slurp(d / "a.jsonl") == testing::slurp(d / "c.jsonl"));
  REQUIRE(run_cli({"synth", "--out", p(d / "e.jsonl"), "--seed", "8"}).code == 0);
  CHECK(testing::slurp(d / "a.jsonl") != testing::slurp(d / "e.jsonl"));

  CHECK(run_cli({"synth", "--out", p(d / "z.jsonl"), "--members", "0"}).code != 0);
}

TEST_CASE("config files feed subcommand options") {
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  const auto d = testing::temp_dir("cli_config");
  std::ofstream(d / "run.ini") << "[synth]\nmembers = 3\nnonmembers = 4\nmember-mean = 1.5\nwith-ref = false\n"
                                  "\n[signals]\ngroups = [cut_loss]\ncutoffs = [200]\nno-baselines = true\n";
  REQUIRE(run_cli({"--config", p(d / "run.ini"), "synth", "--out", p(d / "t.jsonl")}).code == 0);
  const auto ds = read_trace_file(p(d / "t.jsonl"));
  CHECK(ds.size() == 7);
  CHECK_FALSE(ds[0].ref_losses);
  REQUIRE(run_cli({"--config", p(d / "run.ini"), "signals", "--input", p(d / "t.jsonl"), "--out", p(d / "f.csv")}).code ==
          0);
  CHECK(read_feature_matrix(p(d / "f.csv")).columns == std::vector<std::string>{"cut_loss_T200"});
}

TEST_CASE("signals") {
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  const auto& c = corpus();
  const auto m = read_feature_matrix(p(c / "f.csv"));
  CHECK(m.size() == 160);
  CHECK(m.columns.size() == 78 + 5);

  const auto d = testing::temp_dir("cli_signals");
  REQUIRE(run_cli({"--threads", "1", "signals", "--input", p(c / "t.jsonl"), "--out", p(d / "f1.csv")}).code == 0);
  CHECK(testing::slurp(d / "f1.csv") == testing::slurp(c / "f.csv"));

  REQUIRE(run_cli({"signals", "--input", p(c / "t.jsonl"), "--out", p(d / "g.csv"), "--groups", "cut_loss",
               "--cutoffs", "200", "--no-baselines"})
              .code == 0);
  CHECK(read_feature_matrix(p(d / "g.csv")).columns == std::vector<std::string>{"cut_loss_T200"});

  // Records without repetition losses get sentinel cells.
  REQUIRE(run_cli({"synth", "--out", p(d / "bare.jsonl"), "--members", "3", "--nonmembers", "3", "--with-reps",
               "false"})
              .code == 0);
  REQUIRE(run_cli({"signals", "--input", p(d / "bare.jsonl"), "--out", p(d / "bare.csv")}).code == 0);
  const auto bare = read_feature_matrix(p(d / "bare.csv"));
  const auto col = *bare.column_index("rep1_cut_loss_Tfull");
  for (const auto& row : bare.rows) CHECK_FALSE(row[col]);
  CHECK(testing::slurp(d / "bare.csv").find(",NA") != std::string::npos);

  CHECK(run_cli({"signals", "--input", p(d / "missing.jsonl"), "--out", p(d / "x.csv")}).code != 0);
  CHECK(run_cli({"signals", "--input", p(c / "t.jsonl"), "--out", p(d / "x.csv"), "--groups", "nope"}).code != 0);
}

TEST_CASE("attack modes write scores and models") {
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  const auto& c = corpus();
  const auto d = testing::temp_dir("cli_attack");
  REQUIRE(run_cli({"attack", "--features", p(c / "f.csv"), "--out-dir", p(d), "--mode", "edgington", "fisher", "pearson",
               "george", "lr", "lr_gpca", "baseline:loss", "baseline:blind_nb", "--pca-components", "1", "2",
               "--traces", p(c / "t.jsonl")})
              .code == 0);
  for (const auto* tag : {"edgington", "fisher", "pearson", "george", "lr", "lr_gpca_c1", "lr_gpca_c2",
                          "baseline_loss", "baseline_blind_nb"}) {
    CAPTURE(tag);
    CHECK(fs::exists(d / ("scores_" + std::string(tag) + ".csv")));
    CHECK(count_lines(d / ("scores_" + std::string(tag) + ".csv")) == 1 + 112);
  }
  CHECK(fs::exists(d / "model_lr_gpca_c2.json"));
  CHECK_FALSE(fs::exists(d / "model_baseline_loss.json"));
  CHECK(count_lines(d / "split.csv") == 161);

  CHECK(run_cli({"attack", "--features", p(c / "f.csv"), "--out-dir", p(d), "--mode", "magic"}).code != 0);
  CHECK(run_cli({"attack", "--features", p(c / "f.csv"), "--out-dir", p(d), "--mode", "baseline:blind_nb"}).code != 0);
  const auto r = run_cli({"attack", "--features", p(c / "f.csv"), "--out-dir", p(d), "--mode", "lr", "--split-mode",
                      "nonmember_only"});
  CHECK(r.code != 0);
  CHECK(r.err.find("both members and non-members") != std::string::npos);
}

TEST_CASE("single-feature Edgington follows the feature's empirical p-value") {
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  const auto& c = corpus();
  const auto d = testing::temp_dir("cli_single");
  REQUIRE(run_cli({"attack", "--features", p(c / "f.csv"), "--out-dir", p(d), "--mode", "edgington", "--columns",
               "cut_loss_T200"})
              .code == 0);
  const auto m = read_feature_matrix(p(c / "f.csv"));
  const auto col = *m.column_index("cut_loss_T200");
  std::map<std::string, double> value;
  for (std::size_t i = 0; i < m.size(); ++i) value[m.ids[i]] = *m.rows[i][col];

  std::vector<double> pool;
  std::istringstream split(testing::slurp(d / "split.csv"));
  std::string line;
  std::getline(split, line);
  while (std::getline(split, line)) {
    const auto f = csv_split(line);
    if (f[2] == "attack" && f[1] == "nonmember") pool.push_back(value[f[0]]);
  }
  std::sort(pool.begin(), pool.end());

  const auto scored = read_scored(d / "scores_edgington.csv");
  std::vector<evaluation::ScoredRecord> raw;
  for (const auto& r : scored.records()) {
    CHECK(r.score == -composition::empirical_p_value(pool, value[r.id]));
    raw.push_back({r.id, r.label, -value[r.id]});
  }
  CHECK(std::fabs(evaluation::auc(scored) - evaluation::auc(evaluation::ScoredDataset(raw))) < 0.01);
}

TEST_CASE("evaluate") {
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  const auto d = testing::temp_dir("cli_evaluate");
  REQUIRE(run_cli({"evaluate", "--scores", std::string(MIA_FIXTURE_DIR) + "/perfect_scores.csv", "--out-dir", p(d),
               "--plots"})
              .code == 0);
  const auto report = nlohmann::json::parse(testing::slurp(d / "report.json"));
  CHECK(report["format"] == "mia-report");
  CHECK(report["version"] == 1);
  CHECK(report["fpr_targets"].size() == 3);
  const auto& a = report["attacks"][0];
  CHECK(a["name"] == "perfect_scores");
  CHECK(a["auc"] == 1.0);
  for (const auto& t : a["tpr_at_fpr"]) CHECK(t["tpr"] == 1.0);
  CHECK(a["overlap_vs_loss"].is_null());
  CHECK(fs::exists(d / "roc_perfect_scores.csv"));
  CHECK(fs::exists(d / "hist_perfect_scores.csv"));
  CHECK(fs::exists(d / "roc_perfect_scores.svg"));
  CHECK(fs::exists(d / "hist_perfect_scores.svg"));

  CHECK(run_cli({"evaluate", "--scores", p(d / "nothing.csv"), "--out-dir", p(d)}).code != 0);
  std::ofstream(d / "one_class.csv") << "id,label,score\na,member,1\nb,member,2\n";
  CHECK(run_cli({"evaluate", "--scores", p(d / "one_class.csv"), "--out-dir", p(d)}).code != 0);
}

TEST_CASE("report numbers equal library recomputation") {
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  const auto& c = corpus();
  const auto d = testing::temp_dir("cli_report");
  REQUIRE(run_cli({"attack", "--features", p(c / "f.csv"), "--out-dir", p(d), "--mode", "fisher", "lr_gpca",
               "baseline:loss"})
              .code == 0);
  REQUIRE(run_cli({"evaluate", "--scores", p(d / "scores_fisher.csv"), p(d / "scores_lr_gpca_c1.csv"),
               p(d / "scores_baseline_loss.csv"), "--out-dir", p(d / "report")})
              .code == 0);
  const auto report = nlohmann::json::parse(testing::slurp(d / "report" / "report.json"));
  REQUIRE(report["attacks"].size() == 3);
  const auto loss = read_scored(d / "scores_baseline_loss.csv");
  for (const auto& a : report["attacks"]) {
    const auto name = a["name"].get<std::string>();
    CAPTURE(name);
    const auto s = read_scored(d / ("scores_" + name + ".csv"));
    CHECK(a["auc"].get<double>() == evaluation::auc(s));
    for (const auto& t : a["tpr_at_fpr"]) {
      CHECK(t["tpr"].get<double>() == evaluation::tpr_at_fpr(s, t["fpr"].get<double>()));
    }
    const auto ov = evaluation::overlap_analysis(s, loss);
    CHECK(a["overlap_vs_loss"]["new_fraction"].get<double>() == ov.new_fraction);
    CHECK(a["overlap_vs_loss"]["missing_fraction"].get<double>() == ov.missing_fraction);
    if (name == "lr_gpca_c1") {
      const auto model = std::get<composition::LRModel>(load_model(p(d / "model_lr_gpca_c1.json")));
      const auto imp = evaluation::feature_importance(model);
      CHECK(a["importances"].size() == imp.size());
      for (const auto& [g, v] : imp) CHECK(a["importances"][g].get<double>() == v);
    } else {
      CHECK(a["importances"].empty());
    }
  }
}

TEST_CASE("log level controls diagnostics") {
  const auto d = testing::temp_dir("cli_log");
  setenv("MIA_LOG_LEVEL", "info", 1);
  auto r = run_cli({"synth", "--out", p(d / "t.jsonl"), "--members", "2", "--nonmembers", "2"});
  CHECK(r.err.find("[info]") != std::string::npos);
  setenv("MIA_LOG_LEVEL", "quiet", 1);
  r = run_cli({"synth", "--out", p(d / "t.jsonl"), "--members", "2", "--nonmembers", "2"});
  CHECK(r.err.empty());
}
