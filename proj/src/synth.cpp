#include "dac/synth.hpp"

#include "dac/csv.hpp"
#include "dac/ingest.hpp"
#include "dac/scoring.hpp"

#include <array>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace dac::synth {

SynthConfig SynthConfig::residence_driven() {
  SynthConfig c;
  c.workplace_coupling = 0.0;
  return c;
}

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw UsageError("synth: " + what);
  };
  require(tracts >= 10, "tract count must be at least 10");
  require(tracts <= 250000, "tract count too large for the id layout");
  require(!years.empty(), "need at least one year");
  for (int y : years) require(y >= 2002 && y <= 2100, "year " + std::to_string(y) + " out of range");
  require(std::set<int>(years.begin(), years.end()).size() == years.size(), "duplicate year");
  require(noise >= 0, "noise must be non-negative");
  require(weight_income >= 0 && weight_education >= 0 && weight_industry >= 0, "weights must be non-negative");
  require(weight_income + weight_education + weight_industry > 0, "at least one driver weight must be positive");
  require(dac_fraction > 0 && dac_fraction < 1, "dac_fraction must lie in (0, 1)");
  require(housing_fraction >= 0 && housing_fraction < 1, "housing_fraction must lie in [0, 1)");
  require(workplace_coupling >= 0 && workplace_coupling <= 1, "workplace_coupling must lie in [0, 1]");
  require(demographic_mixing >= 0 && demographic_mixing <= 1, "demographic_mixing must lie in [0, 1]");
  require(std::isfinite(drift), "drift must be finite");
  if (threshold) require(std::isfinite(*threshold), "threshold must be finite");
}

int SynthConfig::label_year() const { return *std::max_element(years.begin(), years.end()); }

namespace {

Real normal_cdf(Real x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<Real> softmax(const std::vector<Real>& z) {
  const Real top = *std::max_element(z.begin(), z.end());
  std::vector<Real> out(z.size());
  Real sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += out[i] = std::exp(z[i] - top);
  for (auto& v : out) v /= sum;
  return out;
}

// Integer counts summing to `total`, proportional to `shares` (largest
// remainder, ties to the lower index).
std::vector<Count> apportion(Count total, const std::vector<Real>& shares) {
  const Real sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  std::vector<Count> out(shares.size());
  std::vector<std::pair<Real, std::size_t>> rem;
  Count assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const Real exact = static_cast<Real>(total) * shares[i] / sum;
    out[i] = static_cast<Count>(std::floor(exact));
    assigned += out[i];
    rem.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[rem[k % rem.size()].second];
  return out;
}

// Rough statewide industry mix, CNS01..CNS20.
constexpr std::array<Real, 20> kIndustryMix{2.0, 0.2, 0.5, 6.0, 9.0, 4.0, 11.0, 4.0, 3.0, 3.5,
                                            1.8, 6.5, 1.3, 5.0, 9.0, 14.0, 1.7, 8.0, 3.0, 5.0};
constexpr std::array<std::size_t, 4> kExposed{7, 13, 17, 19};   // transport, admin/waste, food service, public admin
constexpr std::array<std::size_t, 4> kAffluent{8, 9, 11, 12};   // information, finance, professional, management

constexpr std::size_t kAge = 0, kEarnings = 1, kIndustry = 2, kRace = 3, kEthnicity = 4, kEducation = 5, kSex = 6,
                      kFirmAge = 7, kFirmSize = 8;

using GroupShares = std::vector<std::vector<Real>>;  // indexed like lodes_bin_groups()

GroupShares resident_shares(Rng& rng, Real d, Real mix) {
  GroupShares s(lodes_bin_groups().size());
  auto jitter = [&](std::vector<Real> z, Real sd) {
    for (auto& v : z) v += sd * rng.normal();
    return softmax(z);
  };
  s[kAge] = jitter({0.3 * mix * d, 0.4, -0.3 * mix * d - 0.2}, 0.1);
  s[kEarnings] = jitter({0.8 * d - 0.3, 0.2, -0.8 * d + 0.1}, 0.1);
  std::vector<Real> ind(20);
  for (std::size_t k = 0; k < 20; ++k) ind[k] = std::log(kIndustryMix[k]);
  for (auto k : kExposed) ind[k] += 0.6 * d;
  for (auto k : kAffluent) ind[k] -= 0.6 * d;
  s[kIndustry] = jitter(ind, 0.15);
  const std::array<Real, 6> race_base{0.70, 0.05, 0.02, 0.10, 0.01, 0.05};
  const std::array<Real, 6> race_shift{-0.5, 0.6, 0.4, -0.2, 0.3, 0.2};
  std::vector<Real> race(6);
  for (std::size_t k = 0; k < 6; ++k) race[k] = std::log(race_base[k]) + mix * race_shift[k] * d;
  s[kRace] = jitter(race, 0.1);
  s[kEthnicity] = jitter({0.0, std::log(0.15 / 0.85) + 0.8 * mix * d}, 0.1);
  s[kEducation] = jitter({std::log(0.10) + 0.9 * d, std::log(0.25) + 0.3 * d, std::log(0.30), std::log(0.35) - 0.9 * d},
                         0.1);
  s[kSex] = jitter({0.0, 0.2 * mix * d}, 0.05);
  return s;
}

GroupShares unrelated_shares(Rng& rng) {
  GroupShares s(lodes_bin_groups().size());
  for (std::size_t g = 0; g < s.size(); ++g) {
    const std::size_t k = lodes_bin_groups()[g].bin_labels.size();
    std::vector<Real> z(k);
    for (std::size_t i = 0; i < k; ++i) {
      z[i] = (g == kIndustry ? std::log(kIndustryMix[i]) : 0.0) + 0.8 * rng.normal();
    }
    s[g] = softmax(z);
  }
  return s;
}

std::string tract_code(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "53%03zu%06zu", 2 * (i / 500) + 1, (i % 500 + 1) * 100);
  return buf;
}

// Splits `jobs` over 1 to 3 blocks; every block's bins are apportioned from
// the tract shares, so each block satisfies the bin-sum invariant.
std::vector<LodesBlockRecord> lodes_blocks(Rng& rng, const std::string& tract, LodesKind kind, Count jobs,
                                           const GroupShares& shares) {
  const std::size_t blocks = 1 + rng.below(3);
  std::vector<Real> weights(blocks);
  for (auto& w : weights) w = rng.uniform(0.5, 1.5);
  const auto totals = apportion(jobs, weights);
  std::vector<LodesBlockRecord> out;
  for (std::size_t b = 0; b < blocks; ++b) {
    LodesBlockRecord rec;
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "%zu%03zu", b % 2 + 1, b + 1);
    rec.geo = BlockId::parse(tract + suffix);
    rec.kind = kind;
    rec.counts.total_jobs = totals[b];
    if (kind == LodesKind::WAC) {
      rec.counts.firm_age.emplace();
      rec.counts.firm_size.emplace();
    }
    for (std::size_t g = 0; g < lodes_bin_groups().size(); ++g) {
      auto bins = rec.counts.group(g);
      if (bins.empty()) continue;
      const auto c = apportion(totals[b], shares[g]);
      std::copy(c.begin(), c.end(), bins.begin());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

struct TractYear {
  std::vector<LodesBlockRecord> rac, wac;
  std::vector<AcsBlockGroupRecord> acs;
};

// Every random draw comes from a stream seeded per tract, in a fixed order,
// so the same tract differs across years only through d.
TractYear draw_tract(const SynthConfig& cfg, const std::string& tract, std::uint64_t tract_seed, Real d) {
  Rng rng(tract_seed);
  TractYear out;
  const auto& bins = IncomeBinManifest::standard();

  const Real pop = std::round(rng.uniform(2500, 7000));
  const Real household_size = rng.uniform(2.4, 2.6);
  const Count households = std::llround(pop / household_size);
  const Real log_median = std::log(65000.0) - 0.45 * d + 0.08 * rng.normal();
  constexpr Real sigma = 0.8;
  std::vector<Real> income_shares(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const Real lo = bins[b].lower > 0 ? normal_cdf((std::log(bins[b].lower) - log_median) / sigma) : 0.0;
    const Real hi = b + 1 < bins.size() ? normal_cdf((std::log(bins[b + 1].lower) - log_median) / sigma) : 1.0;
    income_shares[b] = std::max(hi - lo, 1e-9);
  }
  const Real bg_frac = rng.uniform(0.4, 0.6);
  const Count hh1 = std::llround(static_cast<Real>(households) * bg_frac);
  const Count pop1 = std::llround(pop * bg_frac);
  const std::array<Count, 2> bg_households{hh1, households - hh1};
  const std::array<Count, 2> bg_population{pop1, static_cast<Count>(pop) - pop1};
  for (std::size_t g = 0; g < 2; ++g) {
    AcsBlockGroupRecord rec;
    rec.geo = BlockGroupId::parse(tract + std::to_string(g + 1));
    rec.household_counts = apportion(bg_households[g], income_shares);
    rec.total_households = bg_households[g];
    rec.total_population = bg_population[g];
    out.acs.push_back(std::move(rec));
  }

  const Real employment = std::clamp(0.47 - 0.07 * d + 0.02 * rng.normal(), 0.15, 0.75);
  const Count rac_jobs = std::llround(pop * employment);
  const auto resident = resident_shares(rng, d, cfg.demographic_mixing);
  out.rac = lodes_blocks(rng, tract, LodesKind::RAC, rac_jobs, resident);

  const Count wac_jobs = std::max<Count>(20, std::llround(static_cast<Real>(rac_jobs) * std::exp(0.5 * rng.normal())));
  auto workplace = unrelated_shares(rng);
  for (std::size_t g = 0; g < workplace.size(); ++g) {
    if (g == kFirmAge || g == kFirmSize) continue;
    for (std::size_t k = 0; k < workplace[g].size(); ++k) {
      workplace[g][k] = cfg.workplace_coupling * resident[g][k] + (1 - cfg.workplace_coupling) * workplace[g][k];
    }
  }
  out.wac = lodes_blocks(rng, tract, LodesKind::WAC, wac_jobs, workplace);
  return out;
}

std::vector<Real> zscore(const std::vector<Real>& v) {
  const Real n = static_cast<Real>(v.size());
  const Real mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  Real ss = 0;
  for (Real x : v) ss += (x - mean) * (x - mean);
  const Real sd = std::sqrt(ss / n);
  std::vector<Real> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sd > 0 ? (v[i] - mean) / sd : 0.0;
  return out;
}

// Slope of each indicator on d, keyed by manifest key. Unlisted indicators
// use the default.
Real indicator_slope(const std::string& key) {
  static const std::map<std::string, Real> slopes{
      {"fossil_energy_employment", 0.1}, {"coal_employment", 0.0},     {"non_grid_heating_fuel", 0.1},
      {"climate_hazard_loss", 0.1},      {"npl_proximity", 0.2},       {"wastewater_discharge", 0.2},
      {"unemployment", 0.7},             {"housing_cost_burden", 0.7}, {"renter_occupied", 0.6},
      {"no_internet", 0.6},              {"linguistic_isolation", 0.5}, {"single_parent", 0.6},
      {"energy_burden", 0.6},            {"asthma", 0.5},              {"diabetes", 0.5},
      {"low_life_expectancy", 0.6},      {"age_65_plus", -0.1},
  };
  auto it = slopes.find(key);
  return it == slopes.end() ? 0.4 : it->second;
}

std::string geometry_json(const std::vector<TractId>& tracts) {
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<Real>(tracts.size()))));
  std::ostringstream out;
  out << "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < tracts.size(); ++i) {
    const Real x0 = -124.0 + 0.05 * static_cast<Real>(i % cols);
    const Real y0 = 46.0 + 0.05 * static_cast<Real>(i / cols);
    const Real x1 = x0 + 0.05, y1 = y0 + 0.05;
    if (i) out << ',';
    out << "\n{\"type\":\"Feature\",\"properties\":{\"GEOID\":\"" << tracts[i].str()
        << "\"},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[[";
    const std::array<std::pair<Real, Real>, 5> ring{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}};
    for (std::size_t k = 0; k < ring.size(); ++k) {
      out << (k ? "," : "") << '[' << format_real(ring[k].first) << ',' << format_real(ring[k].second) << ']';
    }
    out << "]]}}";
  }
  out << "\n]}\n";
  return out.str();
}

}  // namespace

Corpus generate(const SynthConfig& config) {
  config.validate();
  Corpus corpus;
  corpus.config = config;
  const std::size_t n = config.tracts;
  const int label_year = config.label_year();

  std::vector<std::string> codes(n);
  std::vector<Real> d(n);
  std::vector<std::uint64_t> tract_seeds(n);
  const std::uint64_t tract_root = derive_seed(config.seed, 1);
  Rng latent_rng(derive_seed(config.seed, 2));
  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = tract_code(i);
    corpus.tracts.push_back(TractId::parse(codes[i]));
    tract_seeds[i] = derive_seed(tract_root, i);
    d[i] = latent_rng.normal();
  }

  for (int year : config.years) {
    auto& yd = corpus.years[year];
    const Real shift = config.drift * static_cast<Real>(label_year - year);
    for (std::size_t i = 0; i < n; ++i) {
      auto t = draw_tract(config, codes[i], tract_seeds[i], d[i] + shift);
      std::move(t.rac.begin(), t.rac.end(), std::back_inserter(yd.rac));
      std::move(t.wac.begin(), t.wac.end(), std::back_inserter(yd.wac));
      std::move(t.acs.begin(), t.acs.end(), std::back_inserter(yd.acs));
    }
  }

  // Observable drivers of the label-year score.
  const auto rac = corpus.rac_tracts(label_year);
  const auto acs = corpus.acs_tracts(label_year);
  const auto& bins = IncomeBinManifest::standard();
  std::vector<Real> low_income(n), low_income_ami(n), less_hs(n), exposed(n);
  for (std::size_t i = 0; i < n; ++i) {
    Count fpl = 0, ami = 0;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (bins[b].lower < 25000) fpl += acs[i].household_counts[b];
      if (bins[b].lower < 50000) ami += acs[i].household_counts[b];
    }
    const Real hh = static_cast<Real>(acs[i].total_households);
    low_income[i] = static_cast<Real>(fpl) / hh;
    low_income_ami[i] = static_cast<Real>(ami) / hh;
    const auto& c = rac[i].counts;
    const Real jobs = static_cast<Real>(c.total_jobs);
    less_hs[i] = static_cast<Real>(c.education[0]) / jobs;
    Count ex = 0;
    for (auto k : kExposed) ex += c.industry[k];
    exposed[i] = static_cast<Real>(ex) / jobs;
  }
  const auto z_inc = zscore(low_income), z_edu = zscore(less_hs), z_ind = zscore(exposed);
  Rng noise_rng(derive_seed(config.seed, 3));
  corpus.latent.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real eps = config.noise > 0 ? noise_rng.uniform(-config.noise, config.noise) : 0.0;
    corpus.latent[i] = config.weight_income * z_inc[i] + config.weight_education * z_edu[i] +
                       config.weight_industry * z_ind[i] + eps;
  }

  // Threshold and the housing-driven subset.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corpus.latent[a] < corpus.latent[b]; });
  const std::size_t n_dac = static_cast<std::size_t>(std::llround(config.dac_fraction * static_cast<Real>(n)));
  const std::size_t n_housing =
      static_cast<std::size_t>(std::llround(config.housing_fraction * static_cast<Real>(n_dac)));
  std::size_t n_latent;
  if (config.threshold) {
    const Real lo = corpus.latent[order.front()], hi = corpus.latent[order.back()];
    if (!(*config.threshold >= lo && *config.threshold < hi)) {
      throw UsageError("synth: threshold " + format_real(*config.threshold) + " outside the latent score range [" +
                       format_real(lo) + ", " + format_real(hi) + ")");
    }
    corpus.threshold = *config.threshold;
    n_latent = static_cast<std::size_t>(std::count_if(corpus.latent.begin(), corpus.latent.end(),
                                                      [&](Real s) { return s > corpus.threshold; }));
  } else {
    n_latent = n_dac > n_housing ? n_dac - n_housing : 0;
    const std::size_t cut = n - n_latent;  // order[cut..] are flagged
    if (n_latent == 0) {
      corpus.threshold = corpus.latent[order.back()];
    } else if (cut == 0) {
      corpus.threshold = corpus.latent[order.front()] - 1;
    } else {
      corpus.threshold = 0.5 * (corpus.latent[order[cut - 1]] + corpus.latent[order[cut]]);
    }
  }
  corpus.housing_driven.assign(n, false);
  if (n_housing) {
    const std::size_t band_lo = static_cast<std::size_t>(0.60 * static_cast<Real>(n));
    const std::size_t band_hi = std::min(static_cast<std::size_t>(0.83 * static_cast<Real>(n)), n - n_latent);
    if (band_hi <= band_lo || band_hi - band_lo < n_housing) {
      throw UsageError("synth: housing_fraction too large for the 60th-83rd percentile band");
    }
    Rng pick(derive_seed(config.seed, 4));
    for (auto k : pick.sample_without_replacement(band_hi - band_lo, n_housing)) {
      corpus.housing_driven[order[band_lo + k]] = true;
    }
  }

  // Indicators.
  const auto manifest = IndicatorManifest::bundled();
  const std::size_t housing_idx = manifest->require("pre1960_housing");
  const auto ami_idx = manifest->index_of("low_income_ami");
  const auto fpl_idx = manifest->index_of("low_income_fpl");
  const auto edu_idx = manifest->index_of("less_hs_education");
  Count flagged = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(tract_seeds[i], 0x1d));
    DacRecord rec;
    rec.tract = corpus.tracts[i];
    rec.indicators.tract = rec.tract;
    rec.indicators.manifest = manifest;
    rec.indicators.values.resize(manifest->size());
    for (std::size_t k = 0; k < manifest->size(); ++k) {
      const Real noise = rng.normal();
      const Real u = rng.uniform();
      Real v;
      if (k == housing_idx) {
        v = corpus.housing_driven[i] ? 0.9 + 0.1 * u : 0.9 * u;
      } else if (ami_idx && k == *ami_idx) {
        v = low_income_ami[i];
      } else if (fpl_idx && k == *fpl_idx) {
        v = low_income[i];
      } else if (edu_idx && k == *edu_idx) {
        v = less_hs[i];
      } else {
        v = indicator_slope((*manifest)[k].key) * d[i] + noise;
      }
      rec.indicators.values[k] = v;
    }
    rec.dac_flag = corpus.latent[i] > corpus.threshold || corpus.housing_driven[i];
    flagged += rec.dac_flag;
    corpus.dac.push_back(std::move(rec));
  }
  if (flagged == 0 || flagged == static_cast<Count>(n)) {
    throw DataError("synth: configuration yields a single class (" + std::to_string(flagged) + " DAC tracts of " +
                    std::to_string(n) + ")");
  }
  scoring::assign_percentiles(corpus.dac);
  for (auto& rec : corpus.dac) rec.score = scoring::dac_score(rec.indicators);
  return corpus;
}

std::vector<LodesTractRecord> Corpus::rac_tracts(int year) const {
  return ingest::aggregate_to_tract<BlockId>(years.at(year).rac);
}

std::vector<LodesTractRecord> Corpus::wac_tracts(int year) const {
  return ingest::aggregate_to_tract<BlockId>(years.at(year).wac);
}

std::vector<AcsTractIncomeRecord> Corpus::acs_tracts(int year) const {
  return ingest::aggregate_to_tract<BlockGroupId>(years.at(year).acs);
}

namespace {

std::string lodes_csv(const std::vector<LodesBlockRecord>& records, LodesKind kind) {
  const auto map = ingest::ColumnMap::lodes_default(kind);
  const auto fields = ingest::required_fields(
      kind == LodesKind::RAC ? ingest::SourceKind::LodesRac : ingest::SourceKind::LodesWac,
      IncomeBinManifest::standard(), IndicatorManifest({}));
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{map.geocode_column()};
  for (const auto& f : fields) header.push_back(*map.column(f));
  w.row(header);
  for (const auto& r : records) {
    std::vector<std::string> row{r.geo.str(), std::to_string(r.counts.total_jobs)};
    for (std::size_t g = 0; g < lodes_bin_groups().size(); ++g) {
      for (Count v : r.counts.group(g)) row.push_back(std::to_string(v));
    }
    w.row(row);
  }
  return out.str();
}

std::string acs_csv(const std::vector<AcsBlockGroupRecord>& records) {
  const auto& bins = IncomeBinManifest::standard();
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{"GEO_ID", "total_households", "total_population"};
  for (const auto& b : bins.bins()) header.push_back(b.key);
  w.row(header);
  for (const auto& r : records) {
    std::vector<std::string> row{"1500000US" + r.geo.str(), std::to_string(r.total_households),
                                 std::to_string(r.total_population)};
    for (Count c : r.household_counts) row.push_back(std::to_string(c));
    w.row(row);
  }
  return out.str();
}

std::string dac_csv(const std::vector<DacRecord>& records) {
  const auto& man = *records.front().indicators.manifest;
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{"GEOID", "DAC", "score"};
  for (std::size_t k = 0; k < man.size(); ++k) header.push_back(man[k].key);
  for (std::size_t k = 0; k < man.size(); ++k) header.push_back(man[k].key + "_pct");
  w.row(header);
  auto cell = [](const OptionalReal& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : records) {
    std::vector<std::string> row{r.tract.str(), r.dac_flag ? "1" : "0", cell(r.score)};
    for (const auto& v : r.indicators.values) row.push_back(cell(v));
    for (const auto& v : *r.indicators.percentiles) row.push_back(cell(v));
    w.row(row);
  }
  return out.str();
}

}  // namespace

std::vector<std::pair<std::string, std::string>> corpus_files(const Corpus& corpus, bool geometry) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& [year, yd] : corpus.years) {
    const std::string y = std::to_string(year);
    files.emplace_back("rac_" + y + ".csv", lodes_csv(yd.rac, LodesKind::RAC));
    files.emplace_back("wac_" + y + ".csv", lodes_csv(yd.wac, LodesKind::WAC));
    files.emplace_back("acs_" + y + ".csv", acs_csv(yd.acs));
  }
  files.emplace_back("dac.csv", dac_csv(corpus.dac));
  if (geometry) files.emplace_back("tracts.geojson", geometry_json(corpus.tracts));
  return files;
}

}  // namespace dac::synth
