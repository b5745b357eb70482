#pragma once

#include "dac/features.hpp"
#include "dac/models.hpp"

#include <map>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

namespace dac::automl {

using models::Family;
using models::ParamValue;

/// Finite candidate lists per family and parameter, plus the model budget.
struct SearchSpace {
  std::map<Family, std::map<std::string, std::vector<ParamValue>>> grids;
  std::size_t budget = 30;
  /// Explicit per-family counts; families without one share what is left.
  std::map<Family, std::size_t> family_budget;

  /// Winning values from the published grid search, plus one neighbour on
  /// each side for numeric parameters.
  static SearchSpace default_space();

  /// Overlays "family.parameter = v1, v2, ..." lines onto `base`. Values
  /// may be lists ("[50, 50], [100]"). Also understands "budget = N" and
  /// "family.budget = N". '#' starts a comment.
  static SearchSpace parse(std::string_view text, SearchSpace base);

  /// Families in enumeration order (the leaderboard column order).
  std::vector<Family> families() const;
  std::uint64_t grid_size(Family f) const;
  /// Throws UsageError on an empty candidate list, an invalid candidate,
  /// or a budget below the family count.
  void validate() const;
  /// Number of specs drawn per family.
  std::map<Family, std::size_t> allocation() const;
};

struct Candidate {
  std::size_t index = 0;  // position in the enumeration
  models::ModelSpec spec;
};

/// Deterministic sample without replacement from each family's Cartesian
/// grid. Budget is split evenly across families, remainder to earlier
/// families; a family whose grid is smaller than its share passes the rest
/// on. Sampled grid points are listed in lexicographic order of parameter
/// values (parameters in name order, the last varying fastest).
std::vector<Candidate> enumerate_candidates(const SearchSpace& space, std::uint64_t seed);

struct LeaderboardEntry {
  Candidate candidate;
  std::optional<Real> f1;
  std::optional<Real> accuracy;
  Real duration_seconds = 0;
  std::string error;  // set when training or scoring failed
};

struct Leaderboard {
  std::optional<features::Variant> variant;
  std::uint64_t seed = 0;
  std::vector<LeaderboardEntry> entries;  // ranked

  const LeaderboardEntry* best() const;
  std::optional<Real> best_f1(Family f) const;
};

struct SearchOptions {
  unsigned workers = 1;
  Real threshold = 0.5;
  bool keep_models = false;
};

struct SearchResult {
  Leaderboard leaderboard;
  /// Trained models by candidate index, when keep_models is set.
  std::map<std::size_t, models::TrainedModel> models;
};

/// Trains every candidate on `train` and scores test F1 (DAC positive).
/// Failures are recorded, not fatal; when every candidate fails the
/// DataError lists each cause. Entries are ranked by F1, then accuracy,
/// then enumeration index; failures last.
SearchResult run_search(const std::vector<Candidate>& candidates, const features::FeatureMatrix& train,
                        const features::FeatureMatrix& test, const SearchOptions& options = {});

void rank(Leaderboard& board);

/// One file for any number of boards, told apart by the variant column.
/// Durations are left out so the file is identical across runs.
void write_leaderboard_csv(std::ostream& out, std::span<const Leaderboard> boards);
void write_leaderboard_csv(std::ostream& out, const Leaderboard& board);
void write_timings_csv(std::ostream& out, std::span<const Leaderboard> boards);
/// Boards in order of first appearance, entries in file order; durations
/// are zero.
std::vector<Leaderboard> read_leaderboard_csv(std::string_view text);

/// Best F1 per (variant, family) cell. Rows and columns are those present
/// in the input, in the published table order.
struct F1Grid {
  std::vector<features::Variant> rows;
  std::vector<Family> cols;
  std::vector<std::vector<std::optional<Real>>> f1;  // absent: missing cell
  std::vector<std::optional<std::size_t>> bold;      // per row; ties go to the first column

  std::vector<std::string> missing_cells() const;
};

F1Grid best_per_cell(const std::vector<Leaderboard>& boards);
void write_grid_csv(std::ostream& out, const F1Grid& grid);
F1Grid read_grid_csv(std::string_view text);
std::string grid_markdown(const F1Grid& grid, int digits = 4);

}  // namespace dac::automl
