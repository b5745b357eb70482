#include "dac/ingest.hpp"

#include "dac/csv.hpp"

#include <set>
#include <sstream>

namespace dac::ingest {

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::LodesRac: return "rac";
    case SourceKind::LodesWac: return "wac";
    case SourceKind::Acs: return "acs";
    case SourceKind::Dac: return "dac";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "rac" || t == "lodes-rac") return SourceKind::LodesRac;
  if (t == "wac" || t == "lodes-wac") return SourceKind::LodesWac;
  if (t == "acs") return SourceKind::Acs;
  if (t == "dac") return SourceKind::Dac;
  throw UsageError("unknown source kind '" + std::string(text) + "' (expected rac, wac, acs or dac)");
}

namespace {

constexpr std::string_view kPercentileSuffix = ".pct";

LodesKind lodes_kind_of(SourceKind kind) {
  if (kind == SourceKind::LodesRac) return LodesKind::RAC;
  if (kind == SourceKind::LodesWac) return LodesKind::WAC;
  throw std::invalid_argument("not a LODES source kind");
}

SourceKind source_of(LodesKind kind) {
  return kind == LodesKind::RAC ? SourceKind::LodesRac : SourceKind::LodesWac;
}

}  // namespace

std::string lodes_field(const BinGroupSpec& group, std::size_t bin) {
  return group.key + "_" + std::to_string(bin + 1);
}

ColumnMap::ColumnMap(SourceKind kind, std::string geocode_column, std::map<std::string, std::string> fields)
    : kind_(kind), geocode_(std::move(geocode_column)), fields_(std::move(fields)) {}

ColumnMap ColumnMap::lodes_default(LodesKind kind) {
  std::map<std::string, std::string> fields{{"total_jobs", "C000"}};
  for (const auto& group : lodes_bin_groups()) {
    if (group.wac_only && kind == LodesKind::RAC) continue;
    for (std::size_t i = 0; i < group.source_codes.size(); ++i) {
      fields[lodes_field(group, i)] = group.source_codes[i];
    }
  }
  return ColumnMap(source_of(kind), kind == LodesKind::RAC ? "h_geocode" : "w_geocode", std::move(fields));
}

ColumnMap ColumnMap::acs_default(const IncomeBinManifest& bins) {
  std::map<std::string, std::string> fields{{"total_households", "total_households"},
                                            {"total_population", "total_population"}};
  for (const auto& bin : bins.bins()) fields[bin.key] = bin.key;
  return ColumnMap(SourceKind::Acs, "GEO_ID", std::move(fields));
}

ColumnMap ColumnMap::dac_default(const IndicatorManifest& indicators) {
  std::map<std::string, std::string> fields{{"dac", "DAC"}, {"score", "score"}};
  for (std::size_t i = 0; i < indicators.size(); ++i) {
    const auto& key = indicators[i].key;
    fields[key] = key;
    fields[key + std::string(kPercentileSuffix)] = key + "_pct";
  }
  return ColumnMap(SourceKind::Dac, "GEOID", std::move(fields));
}

ColumnMap ColumnMap::default_for(SourceKind kind, const IncomeBinManifest& bins,
                                 const IndicatorManifest& indicators) {
  switch (kind) {
    case SourceKind::LodesRac: return lodes_default(LodesKind::RAC);
    case SourceKind::LodesWac: return lodes_default(LodesKind::WAC);
    case SourceKind::Acs: return acs_default(bins);
    case SourceKind::Dac: return dac_default(indicators);
  }
  throw std::invalid_argument("source kind");
}

ColumnMap ColumnMap::parse(std::string_view text, ColumnMap base) {
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw RowError(line_no, "column map: expected 'logical = column'");
    const std::string logical = trim(line.substr(0, eq));
    const std::string column = trim(line.substr(eq + 1));
    if (logical.empty() || column.empty()) throw RowError(line_no, "column map: empty name");
    if (logical == "geocode") {
      base.geocode_ = column;
    } else {
      base.fields_[logical] = column;
    }
  }
  return base;
}

ColumnMap ColumnMap::load(const std::string& path, ColumnMap base) {
  return parse(read_file(path), std::move(base));
}

std::optional<std::string> ColumnMap::column(std::string_view logical) const {
  auto it = fields_.find(std::string(logical));
  if (it == fields_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> required_fields(SourceKind kind, const IncomeBinManifest& bins,
                                         const IndicatorManifest& indicators) {
  std::vector<std::string> out;
  switch (kind) {
    case SourceKind::LodesRac:
    case SourceKind::LodesWac: {
      out.push_back("total_jobs");
      const auto lk = lodes_kind_of(kind);
      for (const auto& group : lodes_bin_groups()) {
        if (group.wac_only && lk == LodesKind::RAC) continue;
        for (std::size_t i = 0; i < group.source_codes.size(); ++i) out.push_back(lodes_field(group, i));
      }
      break;
    }
    case SourceKind::Acs:
      out = {"total_households", "total_population"};
      for (const auto& bin : bins.bins()) out.push_back(bin.key);
      break;
    case SourceKind::Dac:
      out.push_back("dac");
      for (std::size_t i = 0; i < indicators.size(); ++i) out.push_back(indicators[i].key);
      break;
  }
  return out;
}

namespace {

// Resolves logical fields to column indices of `table`; throws a schema
// error naming the first missing column.
struct ResolvedColumns {
  std::size_t geocode = 0;
  std::vector<std::size_t> index;
};

ResolvedColumns resolve(const CsvTable& table, const ColumnMap& map, const std::vector<std::string>& fields) {
  ResolvedColumns out;
  auto geo = table.column(map.geocode_column());
  if (!geo) throw SchemaError("missing geocode column '" + map.geocode_column() + "'");
  out.geocode = *geo;
  std::set<std::string> used{map.geocode_column()};
  for (const auto& field : fields) {
    const auto column = map.column(field);
    if (!column) throw SchemaError("column map has no entry for logical field '" + field + "'");
    if (!used.insert(*column).second) {
      throw SchemaError("column '" + *column + "' mapped to more than one field");
    }
    auto idx = table.column(*column);
    if (!idx) throw SchemaError("missing column '" + *column + "' (logical field " + field + ")");
    out.index.push_back(*idx);
  }
  return out;
}

Count read_count(const std::string& cell, std::size_t line, std::string_view field) {
  auto v = try_parse_count(cell);
  if (!v) throw RowError(line, "non-numeric count '" + cell + "' in " + std::string(field));
  if (*v < 0) throw RowError(line, "negative count in " + std::string(field));
  return *v;
}

void report(const ValidationResult& check, std::size_t line, const ParseOptions& options,
            std::vector<std::string>& warnings) {
  if (check.ok()) return;
  if (options.strict_sums) throw RowError(line, check.summary());
  warnings.push_back("line " + std::to_string(line) + ": " + check.summary());
}

template <typename Geo>
Geo read_geo(const std::string& cell, std::size_t line) {
  auto geo = Geo::try_parse(cell);
  if (!geo) {
    throw RowError(line, "malformed geocode '" + cell + "' (expected " + std::to_string(Geo::digits) + " digits)");
  }
  return *geo;
}

bool is_missing(const std::string& cell) {
  const std::string t = to_lower(trim(cell));
  return t.empty() || t == "na" || t == "nan" || t == "null" || t == "none";
}

}  // namespace

template <typename Geo>
ParseResult<LodesRecord<Geo>> parse_lodes(std::string_view text, const ColumnMap& map, LodesKind kind,
                                          const ParseOptions& options) {
  if (map.kind() != source_of(kind)) {
    throw UsageError("column map is for " + std::string(to_string(map.kind())) + ", file is " +
                     std::string(dac::to_string(kind)));
  }
  const CsvTable table = parse_csv(text, options.delimiter);
  const auto fields = required_fields(source_of(kind), IncomeBinManifest::standard(), IndicatorManifest({}));
  const ResolvedColumns cols = resolve(table, map, fields);

  ParseResult<LodesRecord<Geo>> result;
  result.records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    LodesRecord<Geo> rec;
    rec.geo = read_geo<Geo>(row[cols.geocode], line);
    rec.kind = kind;
    if (kind == LodesKind::WAC) {
      rec.counts.firm_age.emplace();
      rec.counts.firm_size.emplace();
    }
    std::size_t f = 0;
    rec.counts.total_jobs = read_count(row[cols.index[f]], line, fields[f]);
    ++f;
    const auto& groups = lodes_bin_groups();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      auto bins = rec.counts.group(g);
      for (auto& bin : bins) {
        bin = read_count(row[cols.index[f]], line, fields[f]);
        ++f;
      }
    }
    report(validate(rec), line, options, result.warnings);
    result.records.push_back(std::move(rec));
  }
  return result;
}

template <typename Geo>
ParseResult<AcsIncomeRecord<Geo>> parse_acs(std::string_view text, const ColumnMap& map,
                                            const IncomeBinManifest& bins, const ParseOptions& options) {
  if (map.kind() != SourceKind::Acs) throw UsageError("column map is not an ACS map");
  const CsvTable table = parse_csv(text, options.delimiter);
  const auto fields = required_fields(SourceKind::Acs, bins, IndicatorManifest({}));
  const ResolvedColumns cols = resolve(table, map, fields);

  ParseResult<AcsIncomeRecord<Geo>> result;
  result.records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    AcsIncomeRecord<Geo> rec;
    rec.geo = read_geo<Geo>(row[cols.geocode], line);
    rec.total_households = read_count(row[cols.index[0]], line, fields[0]);
    rec.total_population = read_count(row[cols.index[1]], line, fields[1]);
    rec.household_counts.resize(bins.size());
    for (std::size_t b = 0; b < bins.size(); ++b) {
      rec.household_counts[b] = read_count(row[cols.index[2 + b]], line, fields[2 + b]);
    }
    report(validate(rec, bins), line, options, result.warnings);
    result.records.push_back(std::move(rec));
  }
  return result;
}

ParseResult<DacRecord> parse_dac(std::string_view text, const ColumnMap& map,
                                 std::shared_ptr<const IndicatorManifest> indicators,
                                 const ParseOptions& options) {
  if (map.kind() != SourceKind::Dac) throw UsageError("column map is not a DAC map");
  if (!indicators) throw std::invalid_argument("parse_dac needs an indicator manifest");
  const CsvTable table = parse_csv(text, options.delimiter);
  const auto fields = required_fields(SourceKind::Dac, IncomeBinManifest::standard(), *indicators);
  const ResolvedColumns cols = resolve(table, map, fields);

  const std::size_t n = indicators->size();
  std::vector<std::size_t> pct_cols;
  for (std::size_t i = 0; i < n; ++i) {
    const auto column = map.column((*indicators)[i].key + std::string(kPercentileSuffix));
    const auto idx = column ? table.column(*column) : std::nullopt;
    if (!idx) {
      pct_cols.clear();
      break;
    }
    pct_cols.push_back(*idx);
  }
  std::optional<std::size_t> score_col;
  if (auto column = map.column("score")) score_col = table.column(*column);

  ParseResult<DacRecord> result;
  std::set<TractId> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    DacRecord rec;
    rec.tract = read_geo<TractId>(row[cols.geocode], line);
    if (!seen.insert(rec.tract).second) {
      throw RowError(line, "duplicate tract " + rec.tract.str());
    }
    const std::string flag = to_lower(trim(row[cols.index[0]]));
    if (flag == "1" || flag == "true") {
      rec.dac_flag = true;
    } else if (flag == "0" || flag == "false") {
      rec.dac_flag = false;
    } else {
      throw RowError(line, "DAC flag '" + row[cols.index[0]] + "' not in {0,1,true,false}");
    }
    rec.indicators.tract = rec.tract;
    rec.indicators.manifest = indicators;
    rec.indicators.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& cell = row[cols.index[1 + i]];
      if (is_missing(cell)) continue;
      auto v = try_parse_real(cell);
      if (!v) throw RowError(line, "non-numeric value '" + cell + "' for " + (*indicators)[i].key);
      rec.indicators.values[i] = *v;
    }
    if (!pct_cols.empty()) {
      std::vector<OptionalReal> pct(n);
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string& cell = row[pct_cols[i]];
        if (is_missing(cell)) continue;
        auto v = try_parse_real(cell);
        if (!v) throw RowError(line, "non-numeric percentile '" + cell + "'");
        pct[i] = *v;
        any = true;
      }
      if (any) rec.indicators.percentiles = std::move(pct);
    }
    if (score_col && !is_missing(row[*score_col])) {
      auto v = try_parse_real(row[*score_col]);
      if (!v) throw RowError(line, "non-numeric score '" + row[*score_col] + "'");
      rec.score = *v;
    }
    const auto check = validate(rec);
    if (!check.ok()) {
      if (options.strict_sums) throw RowError(line, check.summary());
      result.warnings.push_back("line " + std::to_string(line) + ": " + check.summary());
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

template <typename Geo>
std::vector<LodesTractRecord> aggregate_to_tract(std::span<const LodesRecord<Geo>> records) {
  std::map<TractId, LodesTractRecord> by_tract;
  for (const auto& rec : records) {
    if (rec.kind != records.front().kind) {
      throw DataError("aggregate_to_tract: records mix RAC and WAC");
    }
    const TractId tract = tract_prefix(rec.geo);
    auto [it, inserted] = by_tract.try_emplace(tract);
    if (inserted) {
      it->second.geo = tract;
      it->second.kind = rec.kind;
    }
    it->second.counts += rec.counts;
  }
  std::vector<LodesTractRecord> out;
  out.reserve(by_tract.size());
  for (auto& [_, rec] : by_tract) out.push_back(std::move(rec));
  return out;
}

template <typename Geo>
std::vector<AcsTractIncomeRecord> aggregate_to_tract(std::span<const AcsIncomeRecord<Geo>> records) {
  std::map<TractId, AcsTractIncomeRecord> by_tract;
  for (const auto& rec : records) {
    const TractId tract = tract_prefix(rec.geo);
    auto [it, inserted] = by_tract.try_emplace(tract);
    auto& dst = it->second;
    if (inserted) {
      dst.geo = tract;
      dst.household_counts.assign(rec.household_counts.size(), 0);
    }
    if (dst.household_counts.size() != rec.household_counts.size()) {
      throw DataError("aggregate_to_tract: income bin count differs between records");
    }
    for (std::size_t b = 0; b < rec.household_counts.size(); ++b) dst.household_counts[b] += rec.household_counts[b];
    dst.total_households += rec.total_households;
    dst.total_population += rec.total_population;
  }
  std::vector<AcsTractIncomeRecord> out;
  out.reserve(by_tract.size());
  for (auto& [_, rec] : by_tract) out.push_back(std::move(rec));
  return out;
}

// ---------------------------------------------------------------------------

ColumnMap canonical_map(SourceKind kind, const IncomeBinManifest& bins, const IndicatorManifest& indicators) {
  std::map<std::string, std::string> fields;
  for (const auto& f : required_fields(kind, bins, indicators)) fields[f] = f;
  if (kind == SourceKind::Dac) {
    fields["score"] = "score";
    for (std::size_t i = 0; i < indicators.size(); ++i) {
      fields[indicators[i].key + std::string(kPercentileSuffix)] = indicators[i].key + "_pct";
    }
  }
  return ColumnMap(kind, "geoid", std::move(fields));
}

template <typename Geo>
void write_canonical(std::ostream& out, std::span<const LodesRecord<Geo>> records, LodesKind kind) {
  CsvWriter csv(out);
  const auto fields = required_fields(source_of(kind), IncomeBinManifest::standard(), IndicatorManifest({}));
  std::vector<std::string> header{"geoid"};
  header.insert(header.end(), fields.begin(), fields.end());
  csv.row(header);
  std::vector<std::string> row;
  for (const auto& rec : records) {
    if (rec.kind != kind) throw DataError("write_canonical: record kind differs from file kind");
    row.clear();
    row.push_back(rec.geo.str());
    row.push_back(std::to_string(rec.counts.total_jobs));
    for (std::size_t g = 0; g < lodes_bin_groups().size(); ++g) {
      if (lodes_bin_groups()[g].wac_only && kind == LodesKind::RAC) continue;
      for (Count c : rec.counts.group(g)) row.push_back(std::to_string(c));
    }
    csv.row(row);
  }
}

template <typename Geo>
void write_canonical(std::ostream& out, std::span<const AcsIncomeRecord<Geo>> records,
                     const IncomeBinManifest& bins) {
  CsvWriter csv(out);
  const auto fields = required_fields(SourceKind::Acs, bins, IndicatorManifest({}));
  std::vector<std::string> header{"geoid"};
  header.insert(header.end(), fields.begin(), fields.end());
  csv.row(header);
  std::vector<std::string> row;
  for (const auto& rec : records) {
    row = {rec.geo.str(), std::to_string(rec.total_households), std::to_string(rec.total_population)};
    for (Count c : rec.household_counts) row.push_back(std::to_string(c));
    csv.row(row);
  }
}

void write_canonical(std::ostream& out, std::span<const DacRecord> records, const IndicatorManifest& indicators) {
  CsvWriter csv(out);
  std::vector<std::string> header{"geoid", "dac", "score"};
  for (std::size_t i = 0; i < indicators.size(); ++i) header.push_back(indicators[i].key);
  for (std::size_t i = 0; i < indicators.size(); ++i) header.push_back(indicators[i].key + "_pct");
  csv.row(header);
  auto cell = [](const OptionalReal& v) { return v ? format_real(*v) : std::string(); };
  std::vector<std::string> row;
  for (const auto& rec : records) {
    row = {rec.tract.str(), rec.dac_flag ? "1" : "0", cell(rec.score)};
    for (const auto& v : rec.indicators.values) row.push_back(cell(v));
    for (std::size_t i = 0; i < indicators.size(); ++i) {
      row.push_back(rec.indicators.percentiles ? cell((*rec.indicators.percentiles)[i]) : std::string());
    }
    csv.row(row);
  }
}

std::vector<LodesTractRecord> read_canonical_lodes(std::string_view text, LodesKind kind) {
  const IndicatorManifest none({});
  auto map = canonical_map(source_of(kind), IncomeBinManifest::standard(), none);
  return parse_lodes<TractId>(text, map, kind).records;
}

std::vector<AcsTractIncomeRecord> read_canonical_acs(std::string_view text, const IncomeBinManifest& bins) {
  const IndicatorManifest none({});
  return parse_acs<TractId>(text, canonical_map(SourceKind::Acs, bins, none), bins).records;
}

std::vector<DacRecord> read_canonical_dac(std::string_view text,
                                          std::shared_ptr<const IndicatorManifest> indicators) {
  auto map = canonical_map(SourceKind::Dac, IncomeBinManifest::standard(), *indicators);
  return parse_dac(text, map, std::move(indicators)).records;
}

template ParseResult<LodesRecord<BlockId>> parse_lodes<BlockId>(std::string_view, const ColumnMap&, LodesKind,
                                                                const ParseOptions&);
template ParseResult<LodesRecord<TractId>> parse_lodes<TractId>(std::string_view, const ColumnMap&, LodesKind,
                                                                const ParseOptions&);
template ParseResult<AcsIncomeRecord<BlockGroupId>> parse_acs<BlockGroupId>(std::string_view, const ColumnMap&,
                                                                            const IncomeBinManifest&,
                                                                            const ParseOptions&);
template ParseResult<AcsIncomeRecord<TractId>> parse_acs<TractId>(std::string_view, const ColumnMap&,
                                                                  const IncomeBinManifest&, const ParseOptions&);
template std::vector<LodesTractRecord> aggregate_to_tract<BlockId>(std::span<const LodesRecord<BlockId>>);
template std::vector<LodesTractRecord> aggregate_to_tract<TractId>(std::span<const LodesRecord<TractId>>);
template std::vector<AcsTractIncomeRecord> aggregate_to_tract<BlockGroupId>(
    std::span<const AcsIncomeRecord<BlockGroupId>>);
template std::vector<AcsTractIncomeRecord> aggregate_to_tract<TractId>(std::span<const AcsIncomeRecord<TractId>>);
template void write_canonical<BlockId>(std::ostream&, std::span<const LodesRecord<BlockId>>, LodesKind);
template void write_canonical<TractId>(std::ostream&, std::span<const LodesRecord<TractId>>, LodesKind);
template void write_canonical<BlockGroupId>(std::ostream&, std::span<const AcsIncomeRecord<BlockGroupId>>,
                                            const IncomeBinManifest&);
template void write_canonical<TractId>(std::ostream&, std::span<const AcsIncomeRecord<TractId>>,
                                       const IncomeBinManifest&);

}  // namespace dac::ingest
