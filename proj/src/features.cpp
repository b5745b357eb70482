#include "dac/features.hpp"

#include "dac/csv.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace dac::features {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::V1a: return "v1a";
    case Variant::V1b: return "v1b";
    case Variant::V1c: return "v1c";
    case Variant::V2a: return "v2a";
    case Variant::V2b: return "v2b";
  }
  return "?";
}

std::string_view display_name(Variant v) {
  switch (v) {
    case Variant::V1a: return "LODES(R)";
    case Variant::V1b: return "LODES(W)";
    case Variant::V1c: return "LODES(R+W)";
    case Variant::V2a: return "LI(R)+ACS";
    case Variant::V2b: return "LI(R+W)+ACS";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  const std::string t = to_lower(trim(text));
  for (Variant v : kAllVariants) {
    if (t == to_string(v) || t == to_lower(display_name(v))) return v;
  }
  throw UsageError("unknown variant '" + std::string(text) + "' (expected v1a, v1b, v1c, v2a or v2b)");
}

namespace {

constexpr std::size_t kIndustryGroup = 2;

bool uses_rac(Variant v) { return v != Variant::V1b; }
bool uses_wac(Variant v) { return v == Variant::V1b || v == Variant::V1c || v == Variant::V2b; }
bool uses_acs(Variant v) { return v == Variant::V2a || v == Variant::V2b; }

void lodes_names(std::vector<std::string>& out, std::string_view side, LodesKind kind) {
  for (const auto& group : lodes_bin_groups()) {
    if (group.wac_only && kind == LodesKind::RAC) continue;
    for (const auto& label : group.bin_labels) out.push_back(std::string(side) + "_" + group.key + "_" + label);
  }
}

void industry_names(std::vector<std::string>& out, std::string_view side) {
  const auto& group = lodes_bin_groups()[kIndustryGroup];
  for (const auto& label : group.bin_labels) out.push_back(std::string(side) + "_" + group.key + "_" + label);
}

// Appends every count of the LODES record divided by `denom`.
void push_lodes(std::vector<Real>& row, const LodesCounts& c, Real denom) {
  for (std::size_t g = 0; g < lodes_bin_groups().size(); ++g) {
    for (Count v : c.group(g)) row.push_back(static_cast<Real>(v) / denom);
  }
}

void push_industry(std::vector<Real>& row, const LodesCounts& c, Real denom) {
  for (Count v : c.group(kIndustryGroup)) row.push_back(static_cast<Real>(v) / denom);
}

}  // namespace

std::vector<std::string> feature_names(Variant v, const IncomeBinManifest& bins) {
  std::vector<std::string> out;
  switch (v) {
    case Variant::V1a: lodes_names(out, "rac", LodesKind::RAC); break;
    case Variant::V1b: lodes_names(out, "wac", LodesKind::WAC); break;
    case Variant::V1c:
      lodes_names(out, "rac", LodesKind::RAC);
      lodes_names(out, "wac", LodesKind::WAC);
      break;
    case Variant::V2a:
    case Variant::V2b:
      out.push_back("rac_employed");
      industry_names(out, "rac");
      for (const auto& bin : bins.bins()) out.push_back("acs_" + bin.key);
      if (v == Variant::V2b) industry_names(out, "wac");
      break;
  }
  return out;
}

bool is_demographic_feature(std::string_view name) {
  const auto tokens = dac::split(name, '_');
  if (tokens.size() < 2) return false;
  for (const auto& group : lodes_bin_groups()) {
    if (group.demographic && tokens[1] == group.key) return true;
  }
  return false;
}

Vector FeatureMatrix::label_vector() const {
  if (!labels) throw DataError("feature matrix has no labels");
  Vector y(static_cast<Eigen::Index>(labels->size()));
  for (std::size_t i = 0; i < labels->size(); ++i) y(static_cast<Eigen::Index>(i)) = (*labels)[i] ? 1.0 : 0.0;
  return y;
}

std::optional<std::size_t> FeatureMatrix::column(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return j;
  }
  return std::nullopt;
}

void FeatureMatrix::check() const {
  if (values.rows() != static_cast<Eigen::Index>(tracts.size())) throw DataError("feature matrix: row count differs from tract count");
  if (values.cols() != static_cast<Eigen::Index>(names.size())) throw DataError("feature matrix: column count differs from name count");
  if (labels && labels->size() != tracts.size()) throw DataError("feature matrix: label count differs from tract count");
  if (weights.size() != values.rows()) throw DataError("feature matrix: weight count differs from row count");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw DataError("feature matrix: duplicate feature name " + n);
  }
  if (!values.allFinite()) throw DataError("feature matrix: non-finite value");
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.variant = variant;
  out.year = year;
  out.names = names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.weights.resize(static_cast<Eigen::Index>(rows.size()));
  if (labels) out.labels.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.tracts.push_back(tracts[rows[i]]);
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(r);
    out.weights(static_cast<Eigen::Index>(i)) = weights(r);
    if (labels) out.labels->push_back((*labels)[rows[i]]);
  }
  return out;
}

void FeatureMatrix::append_column(const std::string& name, const Vector& column) {
  if (column.size() != values.rows()) throw std::invalid_argument("append_column: length mismatch");
  if (this->column(name)) throw std::invalid_argument("append_column: duplicate name " + name);
  values.conservativeResize(Eigen::NoChange, values.cols() + 1);
  values.col(values.cols() - 1) = column;
  names.push_back(name);
  variant.reset();
}

FeatureMatrix build_variant(Variant variant, std::span<const LodesTractRecord> rac,
                            std::span<const LodesTractRecord> wac, std::span<const AcsTractIncomeRecord> acs,
                            const LabelMap* labels, int year, const IncomeBinManifest& bins, BuildLog* build_log) {
  std::map<TractId, const LodesTractRecord*> rac_by, wac_by;
  std::map<TractId, const AcsTractIncomeRecord*> acs_by;
  for (const auto& r : rac) {
    if (r.kind != LodesKind::RAC) throw DataError("build_variant: WAC record passed as RAC");
    rac_by[r.geo] = &r;
  }
  for (const auto& r : wac) {
    if (r.kind != LodesKind::WAC) throw DataError("build_variant: RAC record passed as WAC");
    wac_by[r.geo] = &r;
  }
  for (const auto& r : acs) {
    if (r.household_counts.size() != bins.size()) throw DataError("build_variant: ACS bin count differs from manifest");
    acs_by[r.geo] = &r;
  }

  // Union of tracts seen in any required source; a tract must be in all.
  std::set<TractId> universe;
  if (uses_rac(variant)) for (const auto& [t, _] : rac_by) universe.insert(t);
  if (uses_wac(variant)) for (const auto& [t, _] : wac_by) universe.insert(t);
  if (uses_acs(variant)) for (const auto& [t, _] : acs_by) universe.insert(t);

  BuildLog local;
  FeatureMatrix m;
  m.variant = variant;
  m.year = year;
  m.names = feature_names(variant, bins);
  if (labels) m.labels.emplace();

  std::vector<std::vector<Real>> rows;
  std::vector<Real> weights;
  for (const auto& tract : universe) {
    const auto* r = uses_rac(variant) ? (rac_by.count(tract) ? rac_by[tract] : nullptr) : nullptr;
    const auto* w = uses_wac(variant) ? (wac_by.count(tract) ? wac_by[tract] : nullptr) : nullptr;
    const auto* a = acs_by.count(tract) ? acs_by[tract] : nullptr;
    if ((uses_rac(variant) && !r) || (uses_wac(variant) && !w) || (uses_acs(variant) && !a)) {
      ++local.dropped_unjoined;
      continue;
    }
    std::optional<bool> label;
    if (labels) {
      auto it = labels->find(tract);
      if (it == labels->end()) {
        ++local.dropped_unlabeled;
        continue;
      }
      label = it->second;
    }

    std::vector<Real> row;
    row.reserve(m.names.size());
    bool zero = false;
    switch (variant) {
      case Variant::V1a:
      case Variant::V1b:
      case Variant::V1c:
        if (r) {
          if (r->counts.total_jobs == 0) zero = true;
          else push_lodes(row, r->counts, static_cast<Real>(r->counts.total_jobs));
        }
        if (w && !zero) {
          if (w->counts.total_jobs == 0) zero = true;
          else push_lodes(row, w->counts, static_cast<Real>(w->counts.total_jobs));
        }
        break;
      case Variant::V2a:
      case Variant::V2b: {
        if (a->total_population == 0) {
          zero = true;
          break;
        }
        const Real pop = static_cast<Real>(a->total_population);
        row.push_back(static_cast<Real>(r->counts.total_jobs) / pop);
        push_industry(row, r->counts, pop);
        for (Count c : a->household_counts) row.push_back(static_cast<Real>(c) / pop);
        if (variant == Variant::V2b) push_industry(row, w->counts, pop);
        break;
      }
    }
    if (zero) {
      ++local.dropped_zero_denominator;
      continue;
    }
    m.tracts.push_back(tract);
    rows.push_back(std::move(row));
    weights.push_back(a ? static_cast<Real>(a->total_population) : 1.0);
    if (label) m.labels->push_back(*label);
  }

  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.names.size()) throw std::logic_error("feature row width mismatch");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  m.weights = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));

  if (local.dropped_unjoined || local.dropped_zero_denominator || local.dropped_unlabeled) {
    log(LogLevel::Info, std::string(to_string(variant)) + ": dropped " + std::to_string(local.dropped_unjoined) +
                            " unjoined, " + std::to_string(local.dropped_zero_denominator) +
                            " zero-denominator, " + std::to_string(local.dropped_unlabeled) + " unlabeled tracts");
  }
  if (build_log) *build_log = local;
  m.check();
  return m;
}

LabelMap labels_from(std::span<const DacRecord> records) {
  LabelMap out;
  for (const auto& r : records) out[r.tract] = r.dac_flag;
  return out;
}

SplitIndices split_indices(const FeatureMatrix& matrix, Real ratio, std::uint64_t seed, bool stratify) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split ratio must lie in (0, 1)");
  if (!matrix.labels) throw DataError("split needs a labeled matrix");
  const std::size_t n = matrix.tracts.size();

  std::vector<std::vector<std::size_t>> strata(stratify ? 2 : 1);
  for (std::size_t i = 0; i < n; ++i) {
    strata[stratify && (*matrix.labels)[i] ? 1 : 0].push_back(i);
  }
  for (std::size_t s = 0; s < strata.size(); ++s) {
    if (strata[s].size() < 2) {
      throw DataError("split: stratum " + std::to_string(s) + " has fewer than 2 rows");
    }
  }

  // Largest-remainder apportionment of round(ratio * n) training rows.
  const std::size_t total = static_cast<std::size_t>(std::llround(ratio * static_cast<Real>(n)));
  std::vector<std::size_t> quota(strata.size());
  std::vector<std::pair<Real, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const Real exact = ratio * static_cast<Real>(strata[s].size());
    quota[s] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[s];
    remainders.push_back({exact - std::floor(exact), s});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned) ++quota[remainders[k].second];

  SplitIndices out;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto members = strata[s];
    Rng rng(derive_seed(seed, s));
    rng.shuffle(members);
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[s]));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(quota[s]), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<FeatureMatrix, FeatureMatrix> split(const FeatureMatrix& matrix, Real ratio, std::uint64_t seed,
                                              bool stratify) {
  const auto idx = split_indices(matrix, ratio, seed, stratify);
  return {matrix.subset(idx.train), matrix.subset(idx.test)};
}

StandardizationStats fit_standardization(const FeatureMatrix& train) {
  if (train.rows() == 0) throw DataError("standardize: empty training matrix");
  StandardizationStats s;
  s.names = train.names;
  s.mean = train.values.colwise().mean().transpose();
  const Matrix centered = train.values.rowwise() - s.mean.transpose();
  s.stddev = (centered.array().square().colwise().sum() / static_cast<Real>(train.rows())).sqrt().transpose();
  s.constant.resize(train.names.size());
  for (Eigen::Index j = 0; j < s.stddev.size(); ++j) {
    const Real scale = std::max<Real>(1.0, std::abs(s.mean(j)));
    s.constant[static_cast<std::size_t>(j)] = s.stddev(j) <= 1e-12 * scale;
  }
  return s;
}

FeatureMatrix StandardizationStats::apply(const FeatureMatrix& matrix) const {
  if (matrix.names != names) throw DataError("standardization: feature names differ from the fitted matrix");
  FeatureMatrix out = matrix;
  for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
    if (constant[static_cast<std::size_t>(j)]) {
      out.values.col(j).setZero();
    } else {
      out.values.col(j) = (out.values.col(j).array() - mean(j)) / stddev(j);
    }
  }
  return out;
}

Standardized standardize(const FeatureMatrix& train, const FeatureMatrix& test) {
  auto stats = fit_standardization(train);
  const std::size_t n_const = std::count(stats.constant.begin(), stats.constant.end(), true);
  if (n_const) log(LogLevel::Info, "standardize: " + std::to_string(n_const) + " constant feature(s) mapped to 0");
  return {stats.apply(train), stats.apply(test), std::move(stats)};
}

void write_matrix_csv(std::ostream& out, const FeatureMatrix& matrix) {
  CsvWriter csv(out);
  std::vector<std::string> header{"tract_id", "label"};
  header.insert(header.end(), matrix.names.begin(), matrix.names.end());
  csv.row(header);
  std::vector<std::string> row;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    row.clear();
    row.push_back(matrix.tracts[static_cast<std::size_t>(i)].str());
    row.push_back(matrix.labels ? ((*matrix.labels)[static_cast<std::size_t>(i)] ? "1" : "0") : "");
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) row.push_back(format_real(matrix.values(i, j)));
    csv.row(row);
  }
}

FeatureMatrix read_matrix_csv(std::string_view text, int year) {
  const CsvTable table = parse_csv(text);
  if (table.header.size() < 2 || table.header[0] != "tract_id" || table.header[1] != "label") {
    throw SchemaError("matrix CSV must start with tract_id,label columns");
  }
  FeatureMatrix m;
  m.year = year;
  m.names.assign(table.header.begin() + 2, table.header.end());
  for (Variant v : kAllVariants) {
    if (feature_names(v) == m.names) m.variant = v;
  }
  const std::size_t n = table.rows.size();
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.names.size()));
  bool labeled = n > 0;
  std::vector<bool> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    auto tract = TractId::try_parse(row[0]);
    if (!tract) throw RowError(table.lines[i], "malformed tract id '" + row[0] + "'");
    m.tracts.push_back(*tract);
    const std::string label = trim(row[1]);
    if (label.empty()) {
      labeled = false;
    } else if (label == "1" || label == "0") {
      labels.push_back(label == "1");
    } else {
      throw RowError(table.lines[i], "label must be 0, 1 or empty");
    }
    for (std::size_t j = 0; j < m.names.size(); ++j) {
      auto v = try_parse_real(row[2 + j]);
      if (!v) throw RowError(table.lines[i], "non-numeric feature value '" + row[2 + j] + "'");
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  if (labeled) m.labels = std::move(labels);
  m.weights = Vector::Ones(static_cast<Eigen::Index>(n));
  m.check();
  return m;
}

void write_weights_csv(std::ostream& out, const FeatureMatrix& matrix) {
  CsvWriter csv(out);
  csv.row({"tract_id", "weight"});
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    csv.row({matrix.tracts[static_cast<std::size_t>(i)].str(), format_real(matrix.weights(i))});
  }
}

void read_weights_csv(std::string_view text, FeatureMatrix& matrix) {
  const CsvTable table = parse_csv(text);
  auto tcol = table.column("tract_id");
  auto wcol = table.column("weight");
  if (!tcol || !wcol) throw SchemaError("weights CSV needs tract_id and weight columns");
  std::map<TractId, Real> by_tract;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    by_tract[TractId::parse(table.rows[i][*tcol])] = parse_real(table.rows[i][*wcol]);
  }
  for (std::size_t i = 0; i < matrix.tracts.size(); ++i) {
    auto it = by_tract.find(matrix.tracts[i]);
    if (it != by_tract.end()) matrix.weights(static_cast<Eigen::Index>(i)) = it->second;
  }
}

}  // namespace dac::features
