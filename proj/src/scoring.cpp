#include "dac/scoring.hpp"

#include "dac/csv.hpp"

#include <algorithm>
#include <numeric>

namespace dac::scoring {

template <typename Scalar>
std::vector<std::optional<Scalar>> percentile_rank(std::span<const std::optional<Scalar>> values,
                                                   std::string_view name) {
  std::vector<Scalar> present;
  present.reserve(values.size());
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  if (present.empty()) throw DataError("indicator '" + std::string(name) + "' has no present values");
  std::sort(present.begin(), present.end());
  const Scalar n = static_cast<Scalar>(present.size());

  std::vector<std::optional<Scalar>> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) continue;
    const auto lo = std::lower_bound(present.begin(), present.end(), *values[i]);
    const auto hi = std::upper_bound(lo, present.end(), *values[i]);
    const Scalar below = static_cast<Scalar>(lo - present.begin());
    const Scalar ties = static_cast<Scalar>(hi - lo);
    out[i] = Scalar(100) * (below + Scalar(0.5) * (ties - 1)) / n;
  }
  return out;
}

template std::vector<std::optional<double>> percentile_rank<double>(std::span<const std::optional<double>>,
                                                                    std::string_view);
template std::vector<std::optional<float>> percentile_rank<float>(std::span<const std::optional<float>>,
                                                                  std::string_view);

void assign_percentiles(std::span<DacRecord> records, unsigned workers) {
  if (records.empty()) return;
  const auto manifest = records.front().indicators.manifest;
  const std::size_t n_ind = records.front().indicators.values.size();
  for (auto& rec : records) {
    if (rec.indicators.values.size() != n_ind) throw DataError("records disagree on indicator count");
    rec.indicators.percentiles.emplace(n_ind);
  }
  parallel_for(n_ind, workers, [&](std::size_t j) {
    std::vector<OptionalReal> column(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) column[r] = records[r].indicators.values[j];
    const std::string name = manifest && j < manifest->size() ? (*manifest)[j].key : std::to_string(j);
    const auto pct = percentile_rank<Real>(column, name);
    for (std::size_t r = 0; r < records.size(); ++r) (*records[r].indicators.percentiles)[j] = pct[r];
  });
}

Real dac_score(const IndicatorVector& indicators) {
  if (!indicators.percentiles) throw DataError("tract " + indicators.tract.str() + ": no percentiles");
  std::vector<std::string> missing;
  Real sum = 0;
  const auto& pct = *indicators.percentiles;
  for (std::size_t i = 0; i < pct.size(); ++i) {
    if (pct[i]) {
      sum += *pct[i];
    } else {
      missing.push_back(indicators.manifest && i < indicators.manifest->size() ? (*indicators.manifest)[i].key
                                                                               : std::to_string(i));
    }
  }
  if (!missing.empty()) {
    throw DataError("tract " + indicators.tract.str() + ": absent percentiles for " + join(missing, ", "));
  }
  return sum;
}

SeparationReport rank_separation(std::span<const DacRecord> records) {
  if (records.empty()) throw DataError("rank_separation: empty dataset");
  const bool any_dac = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.dac_flag; });
  const bool any_non = std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.dac_flag; });
  if (!any_dac || !any_non) throw DataError("rank_separation: dataset holds a single class");

  SeparationReport report;
  report.manifest = records.front().indicators.manifest;
  const std::size_t n_ind = records.front().indicators.values.size();
  report.ranking.resize(n_ind);
  for (std::size_t j = 0; j < n_ind; ++j) {
    std::vector<Real> dac, non;
    for (const auto& rec : records) {
      if (!rec.indicators.percentiles) throw DataError("rank_separation: tract " + rec.tract.str() + " lacks percentiles");
      const auto& p = (*rec.indicators.percentiles)[j];
      if (!p) continue;
      (rec.dac_flag ? dac : non).push_back(*p);
    }
    auto& entry = report.ranking[j];
    entry.indicator = j;
    if (!dac.empty()) entry.median_dac = median(dac);
    if (!non.empty()) entry.median_nondac = median(non);
    if (entry.median_dac && entry.median_nondac) entry.separation = std::abs(*entry.median_dac - *entry.median_nondac);
  }
  std::stable_sort(report.ranking.begin(), report.ranking.end(),
                   [](const auto& a, const auto& b) { return a.separation > b.separation; });
  for (std::size_t k = 0; k < report.ranking.size(); ++k) report.ranking[k].rank = k + 1;
  return report;
}

void write_scores_csv(std::ostream& out, std::span<const DacRecord> records) {
  CsvWriter csv(out);
  csv.row({"tract_id", "dac", "score"});
  for (const auto& rec : records) {
    std::string score;
    try {
      score = format_real(dac_score(rec.indicators));
    } catch (const DataError&) {
      score.clear();  // incomplete indicator set: no score
    }
    csv.row({rec.tract.str(), rec.dac_flag ? "1" : "0", score});
  }
}

void write_separation_csv(std::ostream& out, const SeparationReport& report) {
  CsvWriter csv(out);
  csv.row({"indicator", "median_dac", "median_nondac", "separation", "rank"});
  auto cell = [](const OptionalReal& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& e : report.ranking) {
    const std::string name = report.manifest ? (*report.manifest)[e.indicator].key : std::to_string(e.indicator);
    csv.row({name, cell(e.median_dac), cell(e.median_nondac), format_real(e.separation), std::to_string(e.rank)});
  }
}

}  // namespace dac::scoring
