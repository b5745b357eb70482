#include "cli_internal.hpp"

#include "dac/analysis.hpp"
#include "dac/csv.hpp"

#include <sstream>

namespace dac::cli {

namespace {

class DiagnoseCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("model", model_, "Model file")->required();
    reg.option("matrix", matrix_, "Labeled feature matrix CSV, usually the held-out rows")->required();
    reg.option("dac", dac_, "DAC indicator file")->required();
    reg.option("threshold", threshold_, "Decision threshold");
    reg.option("out", out_, "Per-tract diagnostics CSV")->required();
    reg.option("rankings", rankings_, "Indicator ranking CSV for the FN and FP groups");
    manifests_.define(reg);
    (void)app;
  }

  void run(Context& ctx) override {
    const auto model = load_model(ctx, model_);
    const auto matrix = load_matrix(ctx, matrix_);
    if (!matrix.labels) throw DataError(matrix_ + ": diagnosis needs a labeled matrix");
    const auto dac = load_dac(ctx, dac_, manifests_.load(ctx));
    const auto pred = models::predict(model, prepare_for(model, matrix), threshold_);
    features::LabelMap labels;
    for (std::size_t i = 0; i < matrix.tracts.size(); ++i) labels[matrix.tracts[i]] = (*matrix.labels)[i];
    const auto eval = analysis::evaluate(pred, labels);
    const auto d = analysis::diagnose_errors(eval, dac, ctx.workers);
    log(LogLevel::Info, std::to_string(d.false_negatives.size) + " false negatives, " +
                            std::to_string(d.false_positives.size) + " false positives");
    std::ostringstream out;
    analysis::write_diagnostics_csv(out, d);
    ctx.write(out_, out.str());
    if (!rankings_.empty()) {
      std::ostringstream r;
      analysis::write_rankings_csv(r, d);
      ctx.write(rankings_, r.str());
    }
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string model_, matrix_, dac_, out_, rankings_;
  Real threshold_ = 0.5;
  ManifestFlags manifests_;
};

// ---------------------------------------------------------------------------

std::optional<TractId> feature_tract(const json& feature) {
  const auto props = feature.find("properties");
  if (props == feature.end() || !props->is_object()) return std::nullopt;
  for (const char* key : {"GEOID", "GEOID10", "GEOID20", "geoid", "tract_id"}) {
    const auto it = props->find(key);
    if (it == props->end()) continue;
    if (it->is_string()) return TractId::try_parse(it->get<std::string>());
    if (it->is_number_integer() || it->is_number_unsigned()) {
      std::string s = it->dump();
      if (s.size() < TractId::digits) s.insert(0, TractId::digits - s.size(), '0');
      return TractId::try_parse(s);
    }
  }
  return std::nullopt;
}

class InferCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("model", model_, "Model file")->required();
    reg.option("data", data_, "Data directory with the yearly sources")->required();
    reg.list("years", years_, "Years to classify, e.g. 2013-2017");
    reg.option("threshold", threshold_, "Decision threshold");
    reg.option("out", out_, "Predictions CSV")->required();
    reg.option("geometry", geometry_, "Tract GeoJSON to annotate");
    reg.option("geojson-dir", geojson_dir_, "Directory for the per-year annotated GeoJSON");
    manifests_.define(reg, false);
    (void)app;
  }

  void run(Context& ctx) override {
    if (geometry_.empty() != geojson_dir_.empty()) throw UsageError("--geometry and --geojson-dir go together");
    const auto model = load_model(ctx, model_);
    const auto variant = variant_of(model);
    const SourceOptions src = manifests_.load(ctx);
    std::map<int, features::FeatureMatrix> matrices;
    for (int y : parse_years(years_)) {
      matrices.emplace(y, prepare_for(model, matrix_from_dir(ctx, data_, variant, y, nullptr, src)));
    }
    const auto inferred = analysis::infer_years(model, matrices, threshold_, ctx.workers);
    for (const auto& [y, inf] : inferred) {
      log(LogLevel::Info, std::to_string(y) + ": " + std::to_string(inf.dac_count) + " of " +
                              std::to_string(inf.predictions.tracts.size()) + " tracts classified DAC");
    }
    std::ostringstream out;
    analysis::write_predictions_csv(out, inferred);
    ctx.write(out_, out.str());

    if (!geometry_.empty()) {
      json base;
      try {
        base = json::parse(ctx.read(geometry_));
      } catch (const json::exception& e) {
        throw DataError(geometry_ + ": " + e.what());
      }
      if (!base.is_object() || !base.contains("features") || !base["features"].is_array()) {
        throw DataError(geometry_ + ": not a GeoJSON FeatureCollection");
      }
      for (const auto& [y, inf] : inferred) {
        std::map<TractId, std::size_t> row;
        for (std::size_t i = 0; i < inf.predictions.tracts.size(); ++i) row[inf.predictions.tracts[i]] = i;
        json doc = base;
        std::size_t unmatched = 0;
        for (auto& f : doc["features"]) {
          if (!f.contains("properties") || !f["properties"].is_object()) f["properties"] = json::object();
          auto& props = f["properties"];
          props["year"] = y;
          const auto tract = feature_tract(f);
          const auto it = tract ? row.find(*tract) : row.end();
          if (it == row.end()) {
            ++unmatched;
            props["dac_pred"] = nullptr;
            props["dac_prob"] = nullptr;
            continue;
          }
          props["dac_pred"] = static_cast<bool>(inf.predictions.labels[it->second]);
          props["dac_prob"] = inf.predictions.probabilities(static_cast<Eigen::Index>(it->second));
        }
        if (unmatched) log(LogLevel::Warn, std::to_string(y) + ": " + std::to_string(unmatched) + " features without a prediction");
        ctx.write(join_path(geojson_dir_, "dac_" + std::to_string(y) + ".geojson"), doc.dump() + "\n");
      }
    }
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string model_, data_, out_, geometry_, geojson_dir_;
  std::vector<std::string> years_{"2013-2017"};
  Real threshold_ = 0.5;
  ManifestFlags manifests_;
};

// ---------------------------------------------------------------------------

class TrendCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("predictions", predictions_, "Predictions CSV from infer")->required();
    reg.option("data", data_, "Data directory with the yearly sources")->required();
    reg.option("model", model_, "Model file; fixes the variant and, without --features, the features")->required();
    reg.list("features", features_, "Features to correlate with the DAC count");
    reg.option("top", top_, "Without --features, the model's k most important features");
    reg.flag("unweighted", unweighted_, "Plain rather than population-weighted feature means");
    reg.option("method", method_, "pearson or spearman")->check(CLI::IsMember({"pearson", "spearman"}));
    reg.option("out", out_, "Correlation CSV")->required();
    reg.option("counts-out", counts_out_, "Yearly DAC count and feature means CSV");
    manifests_.define(reg, false);
    (void)app;
  }

  void run(Context& ctx) override {
    const auto model = load_model(ctx, model_);
    const auto variant = variant_of(model);
    const SourceOptions src = manifests_.load(ctx);

    const CsvTable t = parse_csv(ctx.read(predictions_));
    const auto c_year = t.column("year"), c_pred = t.column("dac_pred");
    if (!c_year || !c_pred) throw SchemaError(predictions_ + ": needs year and dac_pred columns");
    std::map<int, Count> counts;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto y = try_parse_count(t.rows[i][*c_year]);
      const auto p = try_parse_count(t.rows[i][*c_pred]);
      if (!y || !p || (*p != 0 && *p != 1)) throw RowError(t.lines[i], predictions_ + ": bad year or dac_pred");
      counts[static_cast<int>(*y)] += *p;
    }

    std::vector<std::string> names;
    for (const auto& f : features_) names.push_back(trim(f));
    if (names.empty()) {
      const auto imp = models::feature_importance(model);
      const auto order = imp.order();
      for (std::size_t r = 0; r < std::min(top_, order.size()); ++r) names.push_back(imp.names[order[r]]);
    }
    std::map<int, features::FeatureMatrix> matrices;
    for (const auto& [y, n] : counts) matrices.emplace(y, matrix_from_dir(ctx, data_, variant, y, nullptr, src));
    const auto means = analysis::yearly_feature_means(matrices, names, !unweighted_);
    const auto method = method_ == "spearman" ? analysis::CorrelationMethod::Spearman : analysis::CorrelationMethod::Pearson;
    const auto report = analysis::correlate_trends(counts, means, names, method);

    std::ostringstream out;
    analysis::write_trend_correlations_csv(out, report);
    ctx.write(out_, out.str());
    if (!counts_out_.empty()) {
      std::ostringstream c;
      analysis::write_trend_counts_csv(c, report);
      ctx.write(counts_out_, c.str());
    }
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string predictions_, data_, model_, out_, counts_out_;
  std::vector<std::string> features_;
  std::size_t top_ = 10;
  bool unweighted_ = false;
  std::string method_ = "pearson";
  ManifestFlags manifests_;
};

}  // namespace

std::unique_ptr<Command> make_diagnose() { return std::make_unique<DiagnoseCommand>(); }
std::unique_ptr<Command> make_infer() { return std::make_unique<InferCommand>(); }
std::unique_ptr<Command> make_trend() { return std::make_unique<TrendCommand>(); }

}  // namespace dac::cli
