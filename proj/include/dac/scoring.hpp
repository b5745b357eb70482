#pragma once

#include "dac/domain.hpp"

#include <span>
#include <string>
#include <vector>

namespace dac::scoring {

/// Mid-rank percentile of each present value among the present values:
///
///   pct(v) = 100 * (#{u < v} + (#{u == v} - 1) / 2) / N_present
///
/// Absent entries stay absent. The result lies in [0, 100).
template <typename Scalar = Real>
std::vector<std::optional<Scalar>> percentile_rank(std::span<const std::optional<Scalar>> values,
                                                   std::string_view name = "values");

/// Fills every record's percentile vector from the national population
/// formed by `records`, one indicator column at a time. Throws when an
/// indicator is absent on every record.
void assign_percentiles(std::span<DacRecord> records, unsigned workers = 1);

/// Sum of the 36 indicator percentiles. Throws listing absent indicators.
Real dac_score(const IndicatorVector& indicators);

struct IndicatorSeparation {
  std::size_t indicator = 0;           // manifest index
  std::optional<Real> median_dac;
  std::optional<Real> median_nondac;
  Real separation = 0;                 // |median_dac - median_nondac|, 0 when a side is empty
  std::size_t rank = 0;                // 1-based
};

/// Indicators ordered by descending separation; ties keep manifest order.
struct SeparationReport {
  std::shared_ptr<const IndicatorManifest> manifest;
  std::vector<IndicatorSeparation> ranking;
};

SeparationReport rank_separation(std::span<const DacRecord> records);

void write_scores_csv(std::ostream& out, std::span<const DacRecord> records);
void write_separation_csv(std::ostream& out, const SeparationReport& report);

}  // namespace dac::scoring
