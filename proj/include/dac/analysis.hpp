#pragma once

#include "dac/features.hpp"
#include "dac/models.hpp"

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace dac::analysis {

enum class Outcome { TP, FP, FN, TN };
std::string_view to_string(Outcome o);

struct Confusion {
  Count tp = 0, fp = 0, fn = 0, tn = 0;

  Count total() const noexcept { return tp + fp + fn + tn; }
  Real precision() const noexcept { return tp + fp ? static_cast<Real>(tp) / static_cast<Real>(tp + fp) : 0.0; }
  Real recall() const noexcept { return tp + fn ? static_cast<Real>(tp) / static_cast<Real>(tp + fn) : 0.0; }
  /// 2PR / (P + R), and 0 when P + R = 0.
  Real f1() const noexcept {
    const Real p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  Real accuracy() const noexcept {
    return total() ? static_cast<Real>(tp + tn) / static_cast<Real>(total()) : 0.0;
  }
  void add(bool predicted, bool actual) noexcept;
};

Confusion confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual);

struct EvalReport {
  Confusion counts;
  Real precision = 0, recall = 0, f1 = 0, accuracy = 0;
  std::vector<TractId> tracts;           // prediction order
  std::vector<Outcome> outcomes;
  std::vector<Real> probabilities;
};

/// Positive class is DAC. Throws DataError listing the symmetric difference
/// when the prediction and label tract sets differ.
EvalReport evaluate(const models::PredictionSet& predictions, const features::LabelMap& labels);

void write_metrics_csv(std::ostream& out, const EvalReport& report);
void write_outcomes_csv(std::ostream& out, const EvalReport& report);

// ---------------------------------------------------------------------------

struct IndicatorDelta {
  std::size_t indicator = 0;         // manifest index
  std::optional<Real> median_delta;  // median over the group of (pct - TP median)
  std::size_t present = 0;           // group members with a value
};

struct GroupRanking {
  Outcome group = Outcome::FN;
  std::size_t size = 0;
  std::vector<IndicatorDelta> ranking;  // by |median_delta| descending; absent last
};

struct TractDiagnostic {
  TractId tract;
  Outcome outcome = Outcome::FN;
  std::vector<std::optional<Real>> percentiles;
  std::vector<std::optional<Real>> deltas;
};

struct ErrorDiagnostics {
  std::shared_ptr<const IndicatorManifest> manifest;
  std::vector<std::optional<Real>> tp_median;
  std::vector<TractDiagnostic> tracts;
  GroupRanking false_positives{Outcome::FP, 0, {}};
  GroupRanking false_negatives{Outcome::FN, 0, {}};

  bool empty() const noexcept { return tracts.empty(); }
};

/// Compares each misclassified tract's indicator percentiles with the median
/// over true-positive tracts. Percentiles are computed across `dac` when the
/// records do not carry them. Throws DataError when there are errors to
/// explain but no true positives, or when an evaluated tract has no record.
ErrorDiagnostics diagnose_errors(const EvalReport& eval, std::span<const DacRecord> dac, unsigned workers = 1);

void write_diagnostics_csv(std::ostream& out, const ErrorDiagnostics& d);
void write_rankings_csv(std::ostream& out, const ErrorDiagnostics& d);

// ---------------------------------------------------------------------------

struct YearInference {
  models::PredictionSet predictions;
  Count dac_count = 0;
};

/// Predicts every year's matrix. Matrices must already be standardized
/// with the model's statistics. Throws DataError naming the year on a
/// feature mismatch.
std::map<int, YearInference> infer_years(const models::TrainedModel& model,
                                         const std::map<int, features::FeatureMatrix>& years, Real threshold = 0.5,
                                         unsigned workers = 1);

void write_predictions_csv(std::ostream& out, const std::map<int, YearInference>& years);

/// Per year, the mean of each named column; weighted by the matrix's row
/// weights unless `weighted` is false.
std::map<int, std::vector<Real>> yearly_feature_means(const std::map<int, features::FeatureMatrix>& years,
                                                      const std::vector<std::string>& names, bool weighted = true);

enum class CorrelationMethod { Pearson, Spearman };
std::string_view to_string(CorrelationMethod m);

/// Absent when either series is constant.
std::optional<Real> pearson(std::span<const Real> a, std::span<const Real> b);
/// Pearson on mid-ranks.
std::optional<Real> spearman(std::span<const Real> a, std::span<const Real> b);

struct TrendCorrelation {
  std::string feature;
  std::vector<Real> series;  // one value per year
  std::optional<Real> r;     // absent: a series is constant
};

struct TrendReport {
  CorrelationMethod method = CorrelationMethod::Pearson;
  std::vector<int> years;
  std::vector<Count> counts;
  std::vector<TrendCorrelation> correlations;
};

/// Needs at least three years, present in both inputs.
TrendReport correlate_trends(const std::map<int, Count>& counts, const std::map<int, std::vector<Real>>& means,
                             const std::vector<std::string>& names,
                             CorrelationMethod method = CorrelationMethod::Pearson);

void write_trend_counts_csv(std::ostream& out, const TrendReport& report);
void write_trend_correlations_csv(std::ostream& out, const TrendReport& report);

}  // namespace dac::analysis
