#pragma once

#include "dac/domain.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dac::synth {

/// Knobs of the synthetic census corpus. Each tract carries a latent
/// deprivation level d ~ N(0, 1) from which incomes, jobs and indicators are
/// drawn; the DAC flag comes from a score over three observable drivers.
struct SynthConfig {
  std::size_t tracts = 2000;
  /// Corpus years; the latest one carries the DAC labels.
  std::vector<int> years{2013, 2014, 2015, 2016, 2017, 2018};

  // Latent score = w_inc z(low-income share) + w_edu z(less-than-HS share)
  //              + w_ind z(exposed-industry share) + U(-noise, noise)
  Real weight_income = 0.5;
  Real weight_education = 0.25;
  Real weight_industry = 0.25;
  Real noise = 0.15;

  /// Target share of DAC tracts, used when `threshold` is unset.
  Real dac_fraction = 0.17;
  std::optional<Real> threshold;

  /// Share of DAC tracts flagged through old housing alone. They are taken
  /// from the 60th to 83rd percentile of the latent score, so nothing in
  /// the job or income data separates them from their neighbours.
  Real housing_fraction = 0.0;

  /// How much workplace job composition follows the residents' (1) versus
  /// being unrelated to them (0).
  Real workplace_coupling = 0.5;
  /// Strength of the link between d and age, race, ethnicity and sex mix.
  Real demographic_mixing = 0.3;
  /// Per-year shift of d going back in time; positive means more deprived
  /// in earlier years.
  Real drift = 0.04;

  std::uint64_t seed = 1;

  /// Workplace composition unrelated to the residents.
  static SynthConfig residence_driven();

  /// Throws UsageError on an out-of-range knob.
  void validate() const;
  int label_year() const;
};

struct YearData {
  std::vector<LodesBlockRecord> rac;
  std::vector<LodesBlockRecord> wac;
  std::vector<AcsBlockGroupRecord> acs;
};

struct Corpus {
  SynthConfig config;
  std::vector<TractId> tracts;
  std::map<int, YearData> years;
  /// Label-year indicators with percentiles and scores, sorted by tract.
  std::vector<DacRecord> dac;
  std::vector<Real> latent;          // per tract, label year
  std::vector<bool> housing_driven;  // per tract
  Real threshold = 0;

  std::vector<LodesTractRecord> rac_tracts(int year) const;
  std::vector<LodesTractRecord> wac_tracts(int year) const;
  std::vector<AcsTractIncomeRecord> acs_tracts(int year) const;
};

/// Deterministic in the config. Throws DataError when the result holds a
/// single class.
Corpus generate(const SynthConfig& config);

/// Raw-source CSV files ("rac_2018.csv", "wac_2018.csv", "acs_2018.csv",
/// "dac.csv") in the default column layouts the ingest step reads, plus
/// "tracts.geojson" with square toy tract outlines when `geometry` is set.
std::vector<std::pair<std::string, std::string>> corpus_files(const Corpus& corpus, bool geometry = false);

}  // namespace dac::synth
