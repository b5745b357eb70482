#include "dac/domain.hpp"

#include "dac/csv.hpp"

#include <cstdlib>
#include <mutex>
#include <set>

#ifndef DAC_DATA_DIR
#define DAC_DATA_DIR "data"
#endif

namespace dac {

std::string_view to_string(LodesKind kind) { return kind == LodesKind::RAC ? "RAC" : "WAC"; }

LodesKind parse_lodes_kind(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "rac") return LodesKind::RAC;
  if (t == "wac") return LodesKind::WAC;
  throw DataError("unknown LODES kind '" + std::string(text) + "' (expected RAC or WAC)");
}

const std::vector<BinGroupSpec>& lodes_bin_groups() {
  static const std::vector<BinGroupSpec> groups = {
      {"age", {"CA01", "CA02", "CA03"}, {"le29", "30_54", "ge55"}, false, true},
      {"earnings", {"CE01", "CE02", "CE03"}, {"le1250", "1251_3333", "gt3333"}, false, false},
      {"industry",
       {"CNS01", "CNS02", "CNS03", "CNS04", "CNS05", "CNS06", "CNS07", "CNS08", "CNS09", "CNS10",
        "CNS11", "CNS12", "CNS13", "CNS14", "CNS15", "CNS16", "CNS17", "CNS18", "CNS19", "CNS20"},
       {"agriculture", "mining", "utilities", "construction", "manufacturing", "wholesale",
        "retail", "transport_warehousing", "information", "finance", "real_estate",
        "professional", "management", "admin_waste", "education_services", "health_care", "arts",
        "accommodation_food", "other_services", "public_admin"},
       false,
       false},
      {"race",
       {"CR01", "CR02", "CR03", "CR04", "CR05", "CR07"},
       {"white", "black", "aian", "asian", "nhpi", "two_plus"},
       false,
       true},
      {"ethnicity", {"CT01", "CT02"}, {"not_hispanic", "hispanic"}, false, true},
      {"education", {"CD01", "CD02", "CD03", "CD04"}, {"lt_hs", "hs", "some_college", "ba_plus"},
       false, false},
      {"sex", {"CS01", "CS02"}, {"male", "female"}, false, true},
      {"firm_age", {"CFA01", "CFA02", "CFA03", "CFA04", "CFA05"},
       {"0_1", "2_3", "4_5", "6_10", "11_plus"}, true, false},
      {"firm_size", {"CFS01", "CFS02", "CFS03", "CFS04", "CFS05"},
       {"0_19", "20_49", "50_249", "250_499", "500_plus"}, true, false},
  };
  return groups;
}

namespace {

template <typename Counts>
auto group_span(Counts& c, std::size_t index) {
  using Elem = std::conditional_t<std::is_const_v<Counts>, const Count, Count>;
  switch (index) {
    case 0: return std::span<Elem>(c.age);
    case 1: return std::span<Elem>(c.earnings);
    case 2: return std::span<Elem>(c.industry);
    case 3: return std::span<Elem>(c.race);
    case 4: return std::span<Elem>(c.ethnicity);
    case 5: return std::span<Elem>(c.education);
    case 6: return std::span<Elem>(c.sex);
    case 7: return c.firm_age ? std::span<Elem>(*c.firm_age) : std::span<Elem>();
    case 8: return c.firm_size ? std::span<Elem>(*c.firm_size) : std::span<Elem>();
    default: throw std::out_of_range("LODES bin group index");
  }
}

}  // namespace

std::span<const Count> LodesCounts::group(std::size_t index) const { return group_span(*this, index); }
std::span<Count> LodesCounts::group(std::size_t index) { return group_span(*this, index); }

LodesCounts& LodesCounts::operator+=(const LodesCounts& other) {
  total_jobs += other.total_jobs;
  if (other.firm_age && !firm_age) firm_age.emplace();
  if (other.firm_size && !firm_size) firm_size.emplace();
  for (std::size_t g = 0; g < lodes_bin_groups().size(); ++g) {
    auto dst = group(g);
    auto src = other.group(g);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
  }
  return *this;
}

// ---------------------------------------------------------------------------

IncomeBinManifest::IncomeBinManifest(std::vector<IncomeBin> bins) : bins_(std::move(bins)) {
  const auto check = validate(*this);
  if (!check.ok()) throw DataError("income bin manifest: " + check.summary());
}

const IncomeBinManifest& IncomeBinManifest::standard() {
  static const IncomeBinManifest bins({
      {"hhinc_lt10k", "<=10000", 0},
      {"hhinc_10k_15k", "10000-14999", 10000},
      {"hhinc_15k_20k", "15000-19999", 15000},
      {"hhinc_20k_25k", "20000-24999", 20000},
      {"hhinc_25k_30k", "25000-29999", 25000},
      {"hhinc_30k_35k", "30000-34999", 30000},
      {"hhinc_35k_40k", "35000-39999", 35000},
      {"hhinc_40k_45k", "40000-44999", 40000},
      {"hhinc_45k_50k", "45000-49999", 45000},
      {"hhinc_50k_55k", "50000-54999", 50000},
      {"hhinc_55k_60k", "55000-59999", 55000},
      {"hhinc_60k_75k", "60000-74999", 60000},
      {"hhinc_75k_100k", "75000-99999", 75000},
      {"hhinc_100k_125k", "100000-124999", 100000},
      {"hhinc_125k_150k", "125000-149999", 125000},
      {"hhinc_150k_200k", "150000-199999", 150000},
      {"hhinc_200k_plus", ">=200000", 200000},
  });
  return bins;
}

namespace {

std::vector<std::vector<std::string>> manifest_lines(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (const auto& raw : split(text, '\n')) {
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto fields = split(line, '|');
    for (auto& f : fields) f = trim(f);
    out.push_back(std::move(fields));
  }
  return out;
}

}  // namespace

IncomeBinManifest IncomeBinManifest::parse(std::string_view text) {
  std::vector<IncomeBin> bins;
  for (const auto& fields : manifest_lines(text)) {
    if (fields.size() != 3) throw DataError("income bin manifest: expected 'key | label | lower'");
    bins.push_back({fields[0], fields[1], parse_real(fields[2])});
  }
  return IncomeBinManifest(std::move(bins));
}

IncomeBinManifest IncomeBinManifest::load(const std::string& path) { return parse(read_file(path)); }

IndicatorManifest::IndicatorManifest(std::vector<IndicatorInfo> entries) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (e.key.empty()) throw DataError("indicator manifest: empty key");
    if (!seen.insert(e.key).second) throw DataError("indicator manifest: duplicate key " + e.key);
  }
}

IndicatorManifest IndicatorManifest::parse(std::string_view text) {
  std::vector<IndicatorInfo> entries;
  for (const auto& fields : manifest_lines(text)) {
    if (fields.empty() || fields.size() > 2) throw DataError("indicator manifest: expected 'key | label'");
    entries.push_back({fields[0], fields.size() == 2 ? fields[1] : fields[0]});
  }
  return IndicatorManifest(std::move(entries));
}

IndicatorManifest IndicatorManifest::load(const std::string& path) { return parse(read_file(path)); }

std::string IndicatorManifest::bundled_path() {
  if (const char* dir = std::getenv("DAC_DATA_DIR"); dir != nullptr && *dir != '\0') {
    return std::string(dir) + "/indicators_j40_2022c.txt";
  }
  return std::string(DAC_DATA_DIR) + "/indicators_j40_2022c.txt";
}

std::shared_ptr<const IndicatorManifest> IndicatorManifest::bundled() {
  static std::once_flag once;
  static std::shared_ptr<const IndicatorManifest> manifest;
  std::call_once(once, [] { manifest = std::make_shared<const IndicatorManifest>(load(bundled_path())); });
  return manifest;
}

std::optional<std::size_t> IndicatorManifest::index_of(std::string_view key) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].key == key) return i;
  }
  return std::nullopt;
}

std::size_t IndicatorManifest::require(std::string_view key) const {
  auto i = index_of(key);
  if (!i) throw DataError("unknown indicator '" + std::string(key) + "'");
  return *i;
}

// ---------------------------------------------------------------------------

std::string ValidationResult::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.field + ": " + v.rule;
  }
  return out;
}

ValidationResult validate_counts(const LodesCounts& counts, LodesKind kind) {
  ValidationResult result;
  if (counts.total_jobs < 0) result.violations.push_back({"total_jobs", "negative count"});
  const auto& groups = lodes_bin_groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& spec = groups[g];
    const auto bins = counts.group(g);
    if (spec.wac_only) {
      if (kind == LodesKind::RAC && !bins.empty()) {
        result.violations.push_back({spec.key, spec.key + " present on RAC"});
        continue;
      }
      if (kind == LodesKind::WAC && bins.empty()) {
        result.violations.push_back({spec.key, spec.key + " missing on WAC"});
        continue;
      }
      if (bins.empty()) continue;
    }
    Count sum = 0;
    bool negative = false;
    for (Count c : bins) {
      negative |= c < 0;
      sum += c;
    }
    if (negative) result.violations.push_back({spec.key, "negative count"});
    if (sum != counts.total_jobs) {
      result.violations.push_back({spec.key, "bins sum to " + std::to_string(sum) +
                                                 ", total_jobs is " +
                                                 std::to_string(counts.total_jobs)});
    }
  }
  return result;
}

ValidationResult validate_income(std::span<const Count> household_counts, Count total_households,
                                 Count total_population, std::size_t expected_bins) {
  ValidationResult result;
  if (household_counts.size() != expected_bins) {
    result.violations.push_back({"household_counts", "expected " + std::to_string(expected_bins) +
                                                          " bins, found " +
                                                          std::to_string(household_counts.size())});
  }
  Count sum = 0;
  bool negative = false;
  for (Count c : household_counts) {
    negative |= c < 0;
    sum += c;
  }
  if (negative) result.violations.push_back({"household_counts", "negative count"});
  if (total_households < 0) result.violations.push_back({"total_households", "negative count"});
  if (total_population < 0) result.violations.push_back({"total_population", "negative count"});
  if (sum != total_households) {
    result.violations.push_back({"household_counts", "bins sum to " + std::to_string(sum) +
                                                         ", total_households is " +
                                                         std::to_string(total_households)});
  }
  return result;
}

ValidationResult validate(const IncomeBinManifest& bins) {
  ValidationResult result;
  if (bins.size() == 0) result.violations.push_back({"bins", "no income bins"});
  for (std::size_t i = 1; i < bins.size(); ++i) {
    if (!(bins[i].lower > bins[i - 1].lower)) {
      result.violations.push_back({bins[i].key, "bin edges not strictly increasing"});
    }
  }
  return result;
}

ValidationResult validate(const IndicatorVector& indicators) {
  ValidationResult result;
  const std::size_t expected = IndicatorManifest::expected_size;
  if (indicators.values.size() != expected) {
    result.violations.push_back({"values", "expected " + std::to_string(expected) +
                                               " indicators, found " +
                                               std::to_string(indicators.values.size())});
  }
  if (indicators.manifest && indicators.manifest->size() != indicators.values.size()) {
    result.violations.push_back({"manifest", "manifest names " + std::to_string(indicators.manifest->size()) +
                                                 " indicators, vector holds " +
                                                 std::to_string(indicators.values.size())});
  }
  if (indicators.percentiles) {
    const auto& pct = *indicators.percentiles;
    if (pct.size() != indicators.values.size()) {
      result.violations.push_back({"percentiles", "length differs from values"});
    }
    for (std::size_t i = 0; i < pct.size(); ++i) {
      if (pct[i] && !(*pct[i] >= 0.0 && *pct[i] <= 100.0)) {
        const std::string name = indicators.manifest && i < indicators.manifest->size()
                                     ? (*indicators.manifest)[i].key
                                     : "#" + std::to_string(i);
        result.violations.push_back({"percentiles." + name, "outside [0,100]"});
      }
    }
  }
  return result;
}

ValidationResult validate(const DacRecord& record) {
  ValidationResult result = validate(record.indicators);
  if (record.indicators.tract != record.tract) {
    result.violations.push_back({"tract", "indicator vector belongs to another tract"});
  }
  if (record.score) {
    if (!record.indicators.percentiles) {
      result.violations.push_back({"score", "score present without percentiles"});
    } else {
      Real sum = 0;
      bool complete = true;
      for (const auto& p : *record.indicators.percentiles) {
        if (!p) complete = false;
        else sum += *p;
      }
      if (!complete) {
        result.violations.push_back({"score", "score present with absent percentiles"});
      } else if (std::abs(sum - *record.score) > 1e-9) {
        result.violations.push_back({"score", "score differs from percentile sum " + format_real(sum)});
      }
    }
  }
  return result;
}

}  // namespace dac
