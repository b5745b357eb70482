#include "cli_internal.hpp"

#include "dac/analysis.hpp"

#include <set>
#include <sstream>

namespace dac::cli {

namespace {

features::LabelMap labels_of(const features::FeatureMatrix& m) {
  if (!m.labels) throw DataError("matrix has no labels");
  features::LabelMap out;
  for (std::size_t i = 0; i < m.tracts.size(); ++i) out[m.tracts[i]] = (*m.labels)[i];
  return out;
}

// ---------------------------------------------------------------------------

class TrainCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("matrix", matrix_, "Labeled feature matrix CSV")->required();
    reg.option("family", family_, "Model family: GBM, XGB, DRF, XRT, GLM or MLP")->required();
    reg.list("param", params_, "Hyperparameter key=value; repeatable", false);
    reg.option("split", ratio_, "Training share of the rows");
    reg.flag("no-split", no_split_, "Train on every row");
    reg.flag("no-stratify", no_stratify_, "Split without stratifying by label");
    reg.option("threshold", threshold_, "Decision threshold for the held-out F1");
    reg.option("out", out_, "Model file")->required();
    reg.option("test-out", test_out_, "Held-out rows as a matrix CSV");
    (void)app;
  }

  void run(Context& ctx) override {
    models::ModelSpec spec;
    spec.family = models::parse_family(family_);
    spec.seed = ctx.seed;
    for (const auto& p : params_) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + p + "'");
      spec.params[trim(p.substr(0, eq))] = models::parse_param(trim(p.substr(eq + 1)));
    }
    spec.validate();
    if (!no_split_ && !(ratio_ > 0 && ratio_ < 1)) throw UsageError("--split must lie strictly between 0 and 1");

    const auto matrix = load_matrix(ctx, matrix_);
    if (!matrix.labels) throw DataError(matrix_ + ": training needs a labeled matrix");
    features::FeatureMatrix train = matrix, test;
    if (!no_split_) std::tie(train, test) = features::split(matrix, ratio_, ctx.seed, !no_stratify_);
    const auto stats = features::fit_standardization(train);
    auto model = models::train(spec, stats.apply(train));
    model.standardization = stats;
    for (const auto& w : model.metadata.warnings) log(LogLevel::Warn, w);

    if (!no_split_) {
      const auto pred = models::predict(model, stats.apply(test), threshold_);
      const auto c = analysis::confusion(pred.labels, *test.labels);
      log(LogLevel::Info, "held-out F1 " + format_real(c.f1()) + ", accuracy " + format_real(c.accuracy()) + " on " +
                              std::to_string(test.rows()) + " rows");
      if (!test_out_.empty()) {
        std::ostringstream t;
        features::write_matrix_csv(t, test);
        ctx.write(test_out_, t.str());
      }
    } else if (!test_out_.empty()) {
      throw UsageError("--test-out needs a split");
    }
    ctx.write(out_, models::model_to_string(model));
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string matrix_, family_, out_, test_out_;
  std::vector<std::string> params_;
  Real ratio_ = 0.67;
  Real threshold_ = 0.5;
  bool no_split_ = false;
  bool no_stratify_ = false;
};

// ---------------------------------------------------------------------------

class EvaluateCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("model", model_, "Model file")->required();
    reg.option("matrix", matrix_, "Labeled feature matrix CSV (unstandardized)")->required();
    reg.option("threshold", threshold_, "Decision threshold");
    reg.option("out", out_, "Metrics CSV")->required();
    reg.option("outcomes", outcomes_, "Per-tract outcome CSV");
    (void)app;
  }

  void run(Context& ctx) override {
    const auto model = load_model(ctx, model_);
    const auto matrix = load_matrix(ctx, matrix_);
    const auto pred = models::predict(model, prepare_for(model, matrix), threshold_);
    const auto report = analysis::evaluate(pred, labels_of(matrix));
    std::ostringstream m;
    analysis::write_metrics_csv(m, report);
    ctx.write(out_, m.str());
    if (!outcomes_.empty()) {
      std::ostringstream o;
      analysis::write_outcomes_csv(o, report);
      ctx.write(outcomes_, o.str());
    }
    log(LogLevel::Info, "F1 " + format_real(report.f1) + ", accuracy " + format_real(report.accuracy));
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string model_, matrix_, out_, outcomes_;
  Real threshold_ = 0.5;
};

// ---------------------------------------------------------------------------

class ImportanceCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("model", model_, "Model file")->required();
    reg.option("top", top_, "Keep the top k features; 0 keeps all");
    reg.option("out", out_, "Importance CSV")->required();
    (void)app;
  }

  void run(Context& ctx) override {
    const auto model = load_model(ctx, model_);
    std::ostringstream out;
    models::write_importance_csv(out, models::feature_importance(model), top_);
    ctx.write(out_, out.str());
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string model_, out_;
  std::size_t top_ = 0;
};

// ---------------------------------------------------------------------------

class AutomlCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("data", data_, "Data directory")->required();
    reg.option("year", year_, "Source year; defaults to the latest in the directory");
    reg.option("labels", labels_, "DAC file for labels; defaults to dac.csv in the data directory");
    reg.list("variants", variants_, "Feature variants to search");
    reg.option("budget", budget_, "Models per variant; overrides the grid file");
    reg.option("grid", grid_, "Search-space overlay (family.parameter = v1, v2, ... lines)");
    reg.option("split", ratio_, "Training share of the rows");
    reg.option("threshold", threshold_, "Decision threshold");
    reg.option("out", out_, "Leaderboard CSV")->required();
    reg.option("table1", table_, "Best F1 per (variant, family) CSV");
    reg.option("models-dir", models_dir_, "Write the best model of every (variant, family) cell here");
    reg.option("matrices-dir", matrices_dir_, "Write each variant's train and test matrices here");
    reg.option("timings", timings_, "Per-candidate training time CSV");
    manifests_.define(reg);
    (void)app;
  }

  void run(Context& ctx) override {
    const SourceOptions src = manifests_.load(ctx);
    auto space = automl::SearchSpace::default_space();
    if (!grid_.empty()) space = automl::SearchSpace::parse(ctx.read(grid_), space);
    if (budget_) space.budget = budget_;
    space.validate();
    if (!(ratio_ > 0 && ratio_ < 1)) throw UsageError("--split must lie strictly between 0 and 1");
    const auto variants = parse_variants(variants_);

    int year = year_;
    if (!year) {
      const auto years = years_in(data_);
      if (years.empty()) throw DataError("no rac_<year> files in '" + data_ + "'");
      year = years.back();
    }
    std::string labels_path = labels_.empty() ? require_source(data_, "dac") : labels_;
    const auto labels = features::labels_from(load_dac(ctx, labels_path, src));
    const auto candidates = automl::enumerate_candidates(space, ctx.seed);

    std::vector<automl::Leaderboard> boards;
    std::optional<std::pair<Real, std::string>> best;
    for (const auto v : variants) {
      const std::string vname(features::to_string(v));
      const auto matrix = matrix_from_dir(ctx, data_, v, year, &labels, src);
      const auto [train, test] = features::split(matrix, ratio_, ctx.seed);
      const auto s = features::standardize(train, test);
      log(LogLevel::Info, vname + ": " + std::to_string(candidates.size()) + " candidates on " +
                              std::to_string(train.rows()) + " training rows");
      automl::SearchOptions options;
      options.workers = ctx.workers;
      options.threshold = threshold_;
      options.keep_models = !models_dir_.empty();
      auto result = automl::run_search(candidates, s.train, s.test, options);
      result.leaderboard.seed = ctx.seed;

      if (!matrices_dir_.empty()) {
        std::ostringstream a, b;
        features::write_matrix_csv(a, train);
        features::write_matrix_csv(b, test);
        ctx.write(join_path(matrices_dir_, vname + "_train.csv"), a.str());
        ctx.write(join_path(matrices_dir_, vname + "_test.csv"), b.str());
      }
      if (!models_dir_.empty()) {
        // Entries are ranked, so the first success per family is the cell's best.
        std::set<models::Family> done;
        for (const auto& e : result.leaderboard.entries) {
          if (!e.f1 || done.count(e.candidate.spec.family)) continue;
          done.insert(e.candidate.spec.family);
          auto model = result.models.at(e.candidate.index);
          model.standardization = s.stats;
          const std::string path =
              join_path(models_dir_, vname + "_" + std::string(models::to_string(e.candidate.spec.family)) + ".model");
          std::string text = models::model_to_string(model);
          ctx.write(path, text);
          if (!best || *e.f1 > best->first) best = std::make_pair(*e.f1, std::move(text));
        }
      }
      if (const auto* top = result.leaderboard.best()) {
        log(LogLevel::Info, vname + ": best " + std::string(models::to_string(top->candidate.spec.family)) + " F1 " +
                                format_real(*top->f1));
      }
      boards.push_back(std::move(result.leaderboard));
    }

    std::ostringstream lb;
    automl::write_leaderboard_csv(lb, boards);
    ctx.write(out_, lb.str());
    if (!table_.empty()) {
      std::ostringstream t;
      automl::write_grid_csv(t, automl::best_per_cell(boards));
      ctx.write(table_, t.str());
    }
    if (!timings_.empty()) {
      std::ostringstream t;
      automl::write_timings_csv(t, boards);
      ctx.write_volatile(timings_, t.str());
    }
    if (best) ctx.write(join_path(models_dir_, "best.model"), best->second);
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string data_, labels_, grid_, out_, table_, models_dir_, matrices_dir_, timings_;
  std::vector<std::string> variants_{"v1a", "v1b", "v1c", "v2a", "v2b"};
  int year_ = 0;
  std::size_t budget_ = 0;
  Real ratio_ = 0.67;
  Real threshold_ = 0.5;
  ManifestFlags manifests_;
};

}  // namespace

std::unique_ptr<Command> make_train() { return std::make_unique<TrainCommand>(); }
std::unique_ptr<Command> make_evaluate() { return std::make_unique<EvaluateCommand>(); }
std::unique_ptr<Command> make_importance() { return std::make_unique<ImportanceCommand>(); }
std::unique_ptr<Command> make_automl() { return std::make_unique<AutomlCommand>(); }

}  // namespace dac::cli
