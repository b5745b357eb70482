#pragma once

#include "dac/domain.hpp"

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dac::ingest {

enum class SourceKind { LodesRac, LodesWac, Acs, Dac };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view text);

/// Maps logical fields (e.g. "industry_7", "total_households",
/// "low_income_fpl") to the column names of one source release.
///
/// Text form: one "logical_field = column_name" line per entry; the
/// geocode column is given as "geocode = <column>". Loaded maps overlay the
/// kind's default, so a file only needs the columns that differ.
class ColumnMap {
 public:
  ColumnMap(SourceKind kind, std::string geocode_column, std::map<std::string, std::string> fields);

  static ColumnMap lodes_default(LodesKind kind);
  static ColumnMap acs_default(const IncomeBinManifest& bins = IncomeBinManifest::standard());
  static ColumnMap dac_default(const IndicatorManifest& indicators);
  static ColumnMap default_for(SourceKind kind, const IncomeBinManifest& bins,
                               const IndicatorManifest& indicators);

  /// Overlays "logical = column" lines onto `base`.
  static ColumnMap parse(std::string_view text, ColumnMap base);
  static ColumnMap load(const std::string& path, ColumnMap base);

  SourceKind kind() const noexcept { return kind_; }
  const std::string& geocode_column() const noexcept { return geocode_; }
  const std::map<std::string, std::string>& fields() const noexcept { return fields_; }
  /// Column for a logical field, or nullopt when unmapped.
  std::optional<std::string> column(std::string_view logical) const;

 private:
  SourceKind kind_;
  std::string geocode_;
  std::map<std::string, std::string> fields_;
};

/// Logical fields a map of this kind must cover.
std::vector<std::string> required_fields(SourceKind kind, const IncomeBinManifest& bins,
                                         const IndicatorManifest& indicators);

/// Logical LODES field for bin `bin` (0-based) of bin group `group`, e.g.
/// "industry_7" for the seventh industry bin.
std::string lodes_field(const BinGroupSpec& group, std::size_t bin);

struct ParseOptions {
  bool strict_sums = false;
  std::optional<char> delimiter;
};

template <typename Record>
struct ParseResult {
  std::vector<Record> records;
  std::vector<std::string> warnings;
};

/// Block-level (or, for canonical files, tract-level) LODES rows.
template <typename Geo = BlockId>
ParseResult<LodesRecord<Geo>> parse_lodes(std::string_view text, const ColumnMap& map, LodesKind kind,
                                          const ParseOptions& options = {});

template <typename Geo = BlockGroupId>
ParseResult<AcsIncomeRecord<Geo>> parse_acs(std::string_view text, const ColumnMap& map,
                                            const IncomeBinManifest& bins = IncomeBinManifest::standard(),
                                            const ParseOptions& options = {});

/// One record per tract. Indicator values are stored in manifest order;
/// empty, "NA" and "NaN" cells become absent values. Percentiles are read
/// when every indicator has a mapped percentile column in the file.
ParseResult<DacRecord> parse_dac(std::string_view text, const ColumnMap& map,
                                 std::shared_ptr<const IndicatorManifest> indicators,
                                 const ParseOptions& options = {});

/// Sums every count field by enclosing tract. Output sorted by TractId.
template <typename Geo>
std::vector<LodesTractRecord> aggregate_to_tract(std::span<const LodesRecord<Geo>> records);

template <typename Geo>
std::vector<AcsTractIncomeRecord> aggregate_to_tract(std::span<const AcsIncomeRecord<Geo>> records);

// Canonical CSV forms: "geoid" followed by the logical field names in schema
// order. Integers are written verbatim and reals in shortest round-trip form,
// so output bytes depend only on the records.

template <typename Geo>
void write_canonical(std::ostream& out, std::span<const LodesRecord<Geo>> records, LodesKind kind);
template <typename Geo>
void write_canonical(std::ostream& out, std::span<const AcsIncomeRecord<Geo>> records,
                     const IncomeBinManifest& bins = IncomeBinManifest::standard());
void write_canonical(std::ostream& out, std::span<const DacRecord> records,
                     const IndicatorManifest& indicators);

ColumnMap canonical_map(SourceKind kind, const IncomeBinManifest& bins, const IndicatorManifest& indicators);

std::vector<LodesTractRecord> read_canonical_lodes(std::string_view text, LodesKind kind);
std::vector<AcsTractIncomeRecord> read_canonical_acs(std::string_view text,
                                                     const IncomeBinManifest& bins = IncomeBinManifest::standard());
std::vector<DacRecord> read_canonical_dac(std::string_view text,
                                          std::shared_ptr<const IndicatorManifest> indicators);

}  // namespace dac::ingest
