#pragma once

#include "dac/core.hpp"

#include <array>
#include <compare>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dac {

/// Census geography code of fixed width: 11 digits for a tract, 12 for a
/// block group, 15 for a block. The leading 11 digits of any of them name
/// the enclosing tract.
template <std::size_t Digits>
class GeoId {
 public:
  static constexpr std::size_t digits = Digits;

  GeoId() : code_(Digits, '0') {}

  static bool is_valid(std::string_view code) {
    if (code.size() != Digits) return false;
    for (char c : code) {
      if (c < '0' || c > '9') return false;
    }
    return true;
  }

  /// Accepts the bare code or an ACS-style "...US<code>" GEO_ID.
  static std::optional<GeoId> try_parse(std::string_view text) {
    std::string code = trim(text);
    if (const auto us = code.rfind("US"); us != std::string::npos) code = code.substr(us + 2);
    if (!is_valid(code)) return std::nullopt;
    return GeoId(std::move(code));
  }

  static GeoId parse(std::string_view text) {
    auto id = try_parse(text);
    if (!id) {
      throw DataError("malformed geocode '" + std::string(text) + "' (expected " +
                      std::to_string(Digits) + " digits)");
    }
    return *id;
  }

  const std::string& str() const noexcept { return code_; }

  auto operator<=>(const GeoId&) const = default;
  bool operator==(const GeoId&) const = default;

 private:
  explicit GeoId(std::string code) : code_(std::move(code)) {}
  std::string code_;
};

using TractId = GeoId<11>;
using BlockGroupId = GeoId<12>;
using BlockId = GeoId<15>;

template <std::size_t Digits>
TractId tract_prefix(const GeoId<Digits>& id) {
  static_assert(Digits >= 11);
  return TractId::parse(std::string_view(id.str()).substr(0, 11));
}

// ---------------------------------------------------------------------------
// LODES

enum class LodesKind { RAC, WAC };

std::string_view to_string(LodesKind kind);
LodesKind parse_lodes_kind(std::string_view text);

/// One bin group of the LODES table (age, earnings, industry, ...).
struct BinGroupSpec {
  std::string key;                       // logical name, e.g. "industry"
  std::vector<std::string> source_codes; // published LODES column codes
  std::vector<std::string> bin_labels;   // feature-name suffixes
  bool wac_only = false;
  bool demographic = false;              // age, race, ethnicity, sex
};

/// The nine LODES bin groups in canonical order. Firm age and firm size
/// only exist on workplace-area files.
const std::vector<BinGroupSpec>& lodes_bin_groups();

struct LodesCounts {
  Count total_jobs = 0;
  std::array<Count, 3> age{};
  std::array<Count, 3> earnings{};
  std::array<Count, 20> industry{};
  std::array<Count, 6> race{};
  std::array<Count, 2> ethnicity{};
  std::array<Count, 4> education{};
  std::array<Count, 2> sex{};
  std::optional<std::array<Count, 5>> firm_age;
  std::optional<std::array<Count, 5>> firm_size;

  /// Bin group by its index in lodes_bin_groups(); empty span when the
  /// group is absent on this record.
  std::span<const Count> group(std::size_t index) const;
  std::span<Count> group(std::size_t index);

  LodesCounts& operator+=(const LodesCounts& other);
  bool operator==(const LodesCounts&) const = default;
};

template <typename Geo>
struct LodesRecord {
  Geo geo;
  LodesKind kind = LodesKind::RAC;
  LodesCounts counts;

  bool operator==(const LodesRecord&) const = default;
};

using LodesBlockRecord = LodesRecord<BlockId>;
using LodesTractRecord = LodesRecord<TractId>;

// ---------------------------------------------------------------------------
// ACS household income

struct IncomeBin {
  std::string key;
  std::string label;
  Real lower = 0;  // inclusive lower edge in annual dollars
};

/// Ordered annual household-income bins. The default follows the printed
/// 17-range table; a 16-bin B19001 layout ships as data/income_bins_b19001.txt.
class IncomeBinManifest {
 public:
  explicit IncomeBinManifest(std::vector<IncomeBin> bins);

  static const IncomeBinManifest& standard();
  /// Lines of "key | label | lower_edge"; '#' starts a comment.
  static IncomeBinManifest load(const std::string& path);
  static IncomeBinManifest parse(std::string_view text);

  std::size_t size() const noexcept { return bins_.size(); }
  const IncomeBin& operator[](std::size_t i) const { return bins_[i]; }
  const std::vector<IncomeBin>& bins() const noexcept { return bins_; }

 private:
  std::vector<IncomeBin> bins_;
};

template <typename Geo>
struct AcsIncomeRecord {
  Geo geo;
  std::vector<Count> household_counts;
  Count total_households = 0;
  Count total_population = 0;

  bool operator==(const AcsIncomeRecord&) const = default;
};

using AcsBlockGroupRecord = AcsIncomeRecord<BlockGroupId>;
using AcsTractIncomeRecord = AcsIncomeRecord<TractId>;

// ---------------------------------------------------------------------------
// Justice40 indicators

struct IndicatorInfo {
  std::string key;
  std::string label;
};

/// Names of the burden indicators for one data edition, read from a
/// manifest file so a new edition only swaps the file.
class IndicatorManifest {
 public:
  static constexpr std::size_t expected_size = 36;

  explicit IndicatorManifest(std::vector<IndicatorInfo> entries);

  /// Lines of "key | label"; '#' starts a comment.
  static IndicatorManifest load(const std::string& path);
  static IndicatorManifest parse(std::string_view text);
  /// The edition manifest shipped in the data directory.
  static std::shared_ptr<const IndicatorManifest> bundled();
  static std::string bundled_path();

  std::size_t size() const noexcept { return entries_.size(); }
  const IndicatorInfo& operator[](std::size_t i) const { return entries_[i]; }
  std::optional<std::size_t> index_of(std::string_view key) const;
  std::size_t require(std::string_view key) const;

 private:
  std::vector<IndicatorInfo> entries_;
};

using OptionalReal = std::optional<Real>;

struct IndicatorVector {
  TractId tract;
  std::shared_ptr<const IndicatorManifest> manifest;
  std::vector<OptionalReal> values;
  std::optional<std::vector<OptionalReal>> percentiles;

  bool operator==(const IndicatorVector& o) const {
    return tract == o.tract && values == o.values && percentiles == o.percentiles;
  }
};

struct DacRecord {
  TractId tract;
  IndicatorVector indicators;
  bool dac_flag = false;
  std::optional<Real> score;

  bool operator==(const DacRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string field;
  std::string rule;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string summary() const;
};

ValidationResult validate_counts(const LodesCounts& counts, LodesKind kind);

template <typename Geo>
ValidationResult validate(const LodesRecord<Geo>& record) {
  return validate_counts(record.counts, record.kind);
}

ValidationResult validate_income(std::span<const Count> household_counts, Count total_households,
                                 Count total_population, std::size_t expected_bins);

template <typename Geo>
ValidationResult validate(const AcsIncomeRecord<Geo>& record,
                          const IncomeBinManifest& bins = IncomeBinManifest::standard()) {
  return validate_income(record.household_counts, record.total_households,
                         record.total_population, bins.size());
}

ValidationResult validate(const IncomeBinManifest& bins);
ValidationResult validate(const IndicatorVector& indicators);
ValidationResult validate(const DacRecord& record);

}  // namespace dac
