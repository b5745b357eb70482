#pragma once

#include "dac/domain.hpp"

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dac::features {

/// The five training feature sets.
///   v1a  LODES(R)        all residence-area bin groups / RAC jobs
///   v1b  LODES(W)        all workplace-area bin groups / WAC jobs
///   v1c  LODES(R+W)      union of v1a and v1b, each side over its own jobs
///   v2a  LI(R)+ACS       RAC employed + RAC industry + household income / population
///   v2b  LI(R+W)+ACS     v2a plus WAC industry / population
enum class Variant { V1a, V1b, V1c, V2a, V2b };

inline constexpr std::array<Variant, 5> kAllVariants{Variant::V1a, Variant::V1b, Variant::V1c, Variant::V2a,
                                                     Variant::V2b};

std::string_view to_string(Variant v);
/// Column label used in leaderboards and tables, e.g. "LI(R+W)+ACS".
std::string_view display_name(Variant v);
Variant parse_variant(std::string_view text);

/// Feature names a variant produces, in column order.
std::vector<std::string> feature_names(Variant v, const IncomeBinManifest& bins = IncomeBinManifest::standard());

/// True for names built from the age, race, ethnicity or sex bin groups.
bool is_demographic_feature(std::string_view name);

struct FeatureMatrix {
  std::optional<Variant> variant;
  int year = 0;
  std::vector<TractId> tracts;
  std::vector<std::string> names;
  Matrix values;                              // one row per tract
  std::optional<std::vector<bool>> labels;    // DAC flag per row
  Vector weights;                             // tract population, or 1 when unknown

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }
  /// Labels as 0/1 reals; throws when the matrix is unlabeled.
  Vector label_vector() const;
  std::optional<std::size_t> column(std::string_view name) const;

  /// Throws DataError on a broken invariant (shape, duplicate names, NaN).
  void check() const;
  /// Copy of the given rows, in the given order.
  FeatureMatrix subset(std::span<const std::size_t> rows) const;
  void append_column(const std::string& name, const Vector& column);
};

struct BuildLog {
  std::size_t dropped_unjoined = 0;
  std::size_t dropped_zero_denominator = 0;
  std::size_t dropped_unlabeled = 0;
};

using LabelMap = std::map<TractId, bool>;

/// Joins the sources a variant needs on TractId and normalizes each count
/// by the variant's denominator. Tracts missing from a required source,
/// with a zero denominator, or (when labels are given) without a label are
/// dropped and counted in `build_log`. Rows come out sorted by TractId.
FeatureMatrix build_variant(Variant variant, std::span<const LodesTractRecord> rac,
                            std::span<const LodesTractRecord> wac, std::span<const AcsTractIncomeRecord> acs,
                            const LabelMap* labels, int year,
                            const IncomeBinManifest& bins = IncomeBinManifest::standard(),
                            BuildLog* build_log = nullptr);

LabelMap labels_from(std::span<const DacRecord> records);

/// Row indices of a train/test partition, each ascending.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified by label unless `stratify` is false. The training size is
/// round(ratio * N), apportioned over strata by largest remainder, so each
/// stratum's share is within one row of ratio * n_stratum.
SplitIndices split_indices(const FeatureMatrix& matrix, Real ratio, std::uint64_t seed, bool stratify = true);
std::pair<FeatureMatrix, FeatureMatrix> split(const FeatureMatrix& matrix, Real ratio, std::uint64_t seed,
                                              bool stratify = true);

struct StandardizationStats {
  std::vector<std::string> names;
  Vector mean;
  Vector stddev;              // population standard deviation
  std::vector<bool> constant; // stddev == 0; such columns map to 0

  FeatureMatrix apply(const FeatureMatrix& matrix) const;
  bool operator==(const StandardizationStats&) const = default;
};

StandardizationStats fit_standardization(const FeatureMatrix& train);

struct Standardized {
  FeatureMatrix train;
  FeatureMatrix test;
  StandardizationStats stats;
};

/// Statistics come from `train` only and are applied to both partitions.
Standardized standardize(const FeatureMatrix& train, const FeatureMatrix& test);

/// tract_id, label, then the feature columns in matrix order.
void write_matrix_csv(std::ostream& out, const FeatureMatrix& matrix);
/// Reads the matrix CSV. The variant is recovered when the columns match a
/// known variant exactly.
FeatureMatrix read_matrix_csv(std::string_view text, int year = 0);
void write_weights_csv(std::ostream& out, const FeatureMatrix& matrix);
/// Attaches weights from a "tract_id,weight" file to matching rows.
void read_weights_csv(std::string_view text, FeatureMatrix& matrix);

}  // namespace dac::features
