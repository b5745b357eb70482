#include "dac/automl.hpp"

#include "dac/analysis.hpp"
#include "dac/csv.hpp"

#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

namespace dac::automl {

namespace {

// Valid range of a numeric grid parameter, used to discard neighbours that
// fall outside it.
enum class Domain { None, Rate, OpenUnit, HalfOpenUnit, Unit, Positive, NonNegative, Integer, LevelChange };

bool in_domain(Domain d, Real x) {
  switch (d) {
    case Domain::None: return true;
    case Domain::Rate: return x > 0 && x <= 1;
    case Domain::OpenUnit: return x > 0 && x < 1;
    case Domain::HalfOpenUnit: return x >= 0 && x < 1;
    case Domain::Unit: return x >= 0 && x <= 1;
    case Domain::Positive: return x > 0;
    case Domain::NonNegative: return x >= 0;
    case Domain::Integer: return x >= 1;
    case Domain::LevelChange: return x > 0 && x <= 2;
  }
  return false;
}

/// Distinct winners plus one neighbour below the smallest and one above the
/// largest. With two or more winners the neighbour distance is the smallest
/// gap between them; a lone winner v gets v/2 and 2v. Neighbours outside
/// the parameter's domain are dropped. Result ascending.
std::vector<ParamValue> numeric_axis(std::vector<Real> winners, Domain d) {
  std::sort(winners.begin(), winners.end());
  winners.erase(std::unique(winners.begin(), winners.end()), winners.end());
  std::vector<Real> values = winners;
  Real lo, hi;
  if (winners.size() >= 2) {
    Real gap = std::numeric_limits<Real>::infinity();
    for (std::size_t i = 1; i < winners.size(); ++i) gap = std::min(gap, winners[i] - winners[i - 1]);
    lo = winners.front() - gap;
    hi = winners.back() + gap;
  } else {
    lo = winners.front() / 2;
    hi = winners.front() * 2;
  }
  if (d == Domain::Integer) {
    lo = std::round(lo);
    hi = std::round(hi);
  }
  for (Real x : {lo, hi}) {
    if (in_domain(d, x) && std::find(values.begin(), values.end(), x) == values.end()) values.push_back(x);
  }
  std::sort(values.begin(), values.end());
  return {values.begin(), values.end()};
}

std::vector<ParamValue> distinct(std::vector<ParamValue> values) {
  std::vector<ParamValue> out;
  for (auto& v : values) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(std::move(v));
  }
  return out;
}

using L = std::vector<Real>;

std::map<std::string, std::vector<ParamValue>> forest_grid(std::vector<Real> ntrees) {
  return {
      {"balance_classes", {false}},
      {"col_sample_rate_change_per_level", numeric_axis({1.0}, Domain::LevelChange)},
      {"col_sample_rate_per_tree", numeric_axis({1.0}, Domain::Rate)},
      {"max_depth", numeric_axis({20}, Domain::Integer)},
      {"min_split_improvement", numeric_axis({1e-5}, Domain::NonNegative)},
      {"ntrees", numeric_axis(std::move(ntrees), Domain::Integer)},
  };
}

}  // namespace

SearchSpace SearchSpace::default_space() {
  SearchSpace s;
  // One winner per data variant (v1a, v1b, v1c, v2a, v2b).
  s.grids[Family::GBM] = {
      {"col_sample_rate", numeric_axis({0.7, 0.8, 0.8, 1.0, 0.4}, Domain::Rate)},
      {"col_sample_rate_per_tree", numeric_axis({1.0, 0.8, 0.8, 1.0, 0.7}, Domain::Rate)},
      {"learn_rate", numeric_axis({0.1}, Domain::Rate)},
      {"max_depth", numeric_axis({4, 15, 7, 17, 6}, Domain::Integer)},
      {"min_rows", numeric_axis({5, 100, 10, 15, 10}, Domain::Positive)},
      {"min_split_improvement", numeric_axis({1e-5}, Domain::NonNegative)},
      {"ntrees", numeric_axis({35, 41, 37, 45, 50}, Domain::Integer)},
      {"sample_rate", numeric_axis({0.9, 0.8, 0.8, 0.9, 0.5}, Domain::Rate)},
  };
  s.grids[Family::XGB] = {
      {"booster", {std::string("gbtree")}},
      {"col_sample_rate", numeric_axis({0.8, 0.8, 0.8, 0.8, 0.6}, Domain::Rate)},
      {"col_sample_rate_per_tree", numeric_axis({0.8, 0.8, 0.8, 0.7, 0.8}, Domain::Rate)},
      {"max_depth", numeric_axis({5, 5, 10, 9, 9}, Domain::Integer)},
      {"min_rows", numeric_axis({3, 3, 5, 5, 10}, Domain::Positive)},
      {"ntrees", numeric_axis({34, 33, 35, 42, 40}, Domain::Integer)},
      {"reg_alpha", numeric_axis({0, 0, 0, 1, 0.001}, Domain::NonNegative)},
      {"reg_lambda", numeric_axis({1, 1, 1, 1, 0.01}, Domain::NonNegative)},
      {"sample_rate", numeric_axis({0.8, 0.8, 0.6, 0.6, 0.6}, Domain::Rate)},
  };
  // Only alpha was reported; the penalty strength is searched on a decade grid.
  s.grids[Family::GLM] = {
      {"alpha", numeric_axis({0.0}, Domain::Unit)},
      {"lambda", {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}},
  };
  // An epsilon printed as 0.0 is read as 1e-8: ADADELTA never moves with
  // epsilon = 0, and 1e-8 rounds to 0.0 at the printed precision.
  s.grids[Family::MLP] = {
      {"epsilon", numeric_axis({1e-8, 1e-8, 1e-6, 1e-6, 1e-8}, Domain::NonNegative)},
      {"hidden", distinct({L{100, 100}, L{10, 10, 10}, L{50, 50, 50}, L{50}, L{100}})},
      {"hidden_dropout_ratios", distinct({L{0.1, 0.1}, std::monostate{}, L{0.4, 0.4, 0.4}, L{0.4}, L{0.1}})},
      {"input_dropout_ratio", numeric_axis({0.15, 0.0, 0.2, 0.2, 0.15}, Domain::HalfOpenUnit)},
      {"rho", numeric_axis({0.9, 0.99, 0.95, 0.95, 0.9}, Domain::OpenUnit)},
  };
  s.grids[Family::DRF] = forest_grid({34, 41, 40, 33, 33});
  s.grids[Family::XRT] = forest_grid({43, 45, 35, 43, 41});
  return s;
}

namespace {

// Splits on commas that are not inside brackets.
std::vector<std::string> split_values(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : text) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::size_t parse_count(const std::string& text, std::size_t line) {
  auto v = try_parse_count(text);
  if (!v || *v < 0) throw UsageError("grid line " + std::to_string(line) + ": bad count '" + text + "'");
  return static_cast<std::size_t>(*v);
}

}  // namespace

SearchSpace SearchSpace::parse(std::string_view text, SearchSpace base) {
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("grid line " + std::to_string(line_no) + ": expected 'family.parameter = values'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string rhs = trim(line.substr(eq + 1));
    if (key == "budget") {
      base.budget = parse_count(rhs, line_no);
      continue;
    }
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      throw UsageError("grid line " + std::to_string(line_no) + ": key '" + key + "' needs a family prefix");
    }
    Family family;
    try {
      family = models::parse_family(key.substr(0, dot));
    } catch (const UsageError& e) {
      throw UsageError("grid line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string param = key.substr(dot + 1);
    if (param == "budget") {
      base.family_budget[family] = parse_count(rhs, line_no);
      continue;
    }
    std::vector<ParamValue> values;
    for (const auto& v : split_values(rhs)) {
      if (v.empty()) continue;
      values.push_back(models::parse_param(v));
    }
    if (values.empty()) {
      throw UsageError("grid line " + std::to_string(line_no) + ": empty candidate list for " + key);
    }
    base.grids[family][param] = std::move(values);
  }
  return base;
}

std::vector<Family> SearchSpace::families() const {
  std::vector<Family> out;
  for (Family f : models::kAllFamilies) {
    if (grids.count(f)) out.push_back(f);
  }
  return out;
}

std::uint64_t SearchSpace::grid_size(Family f) const {
  auto it = grids.find(f);
  if (it == grids.end()) return 0;
  std::uint64_t n = 1;
  for (const auto& [param, values] : it->second) {
    if (values.empty()) return 0;
    if (n > std::numeric_limits<std::uint64_t>::max() / values.size()) {
      throw UsageError(std::string(models::to_string(f)) + " grid is too large to enumerate");
    }
    n *= values.size();
  }
  return n;
}

void SearchSpace::validate() const {
  const auto fams = families();
  if (fams.empty()) throw UsageError("search space has no families");
  if (budget < fams.size()) {
    throw UsageError("budget " + std::to_string(budget) + " is below the family count " +
                     std::to_string(fams.size()));
  }
  for (Family f : fams) {
    for (const auto& [param, values] : grids.at(f)) {
      if (values.empty()) {
        throw UsageError("empty candidate list for " + std::string(models::to_string(f)) + "." + param);
      }
      for (const auto& v : values) {
        models::ModelSpec spec;
        spec.family = f;
        spec.params[param] = v;
        spec.validate();
      }
    }
  }
}

std::map<Family, std::size_t> SearchSpace::allocation() const {
  const auto fams = families();
  std::map<Family, std::size_t> share;
  std::size_t fixed = 0;
  std::vector<Family> shared;
  for (Family f : fams) {
    if (auto it = family_budget.find(f); it != family_budget.end()) {
      share[f] = it->second;
      fixed += it->second;
    } else {
      shared.push_back(f);
    }
  }
  if (fixed > budget) throw UsageError("per-family budgets exceed the total budget");
  const std::size_t rest = budget - fixed;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    share[shared[i]] = rest / shared.size() + (i < rest % shared.size() ? 1 : 0);
  }
  // Shares beyond a family's grid size pass to later families, then wrap.
  std::size_t carry = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (Family f : fams) {
      const std::uint64_t size = grid_size(f);
      std::size_t& s = share[f];
      if (pass == 0 || carry) {
        const std::size_t room = s < size ? static_cast<std::size_t>(size - s) : 0;
        const std::size_t take = std::min(room, carry);
        s += take;
        carry -= take;
      }
      if (s > size) {
        carry += s - static_cast<std::size_t>(size);
        s = static_cast<std::size_t>(size);
      }
    }
  }
  if (carry) throw UsageError("budget exceeds the total number of grid points");
  return share;
}

std::vector<Candidate> enumerate_candidates(const SearchSpace& space, std::uint64_t seed) {
  space.validate();
  const auto share = space.allocation();
  const std::uint64_t spec_seeds = derive_seed(seed, 0x5eed);
  std::vector<Candidate> out;
  const auto fams = space.families();
  for (std::size_t fi = 0; fi < fams.size(); ++fi) {
    const Family f = fams[fi];
    const auto& grid = space.grids.at(f);
    const std::uint64_t size = space.grid_size(f);
    Rng rng(derive_seed(seed, fi));
    for (std::uint64_t point : rng.sample_without_replacement(size, share.at(f))) {
      Candidate c;
      c.index = out.size();
      c.spec.family = f;
      std::uint64_t rem = point;
      for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
        const auto& values = it->second;
        c.spec.params[it->first] = values[static_cast<std::size_t>(rem % values.size())];
        rem /= values.size();
      }
      c.spec.seed = derive_seed(spec_seeds, c.index);
      out.push_back(std::move(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

const LeaderboardEntry* Leaderboard::best() const {
  if (entries.empty() || !entries.front().f1) return nullptr;
  return &entries.front();
}

std::optional<Real> Leaderboard::best_f1(Family f) const {
  std::optional<Real> best;
  for (const auto& e : entries) {
    if (e.candidate.spec.family == f && e.f1 && (!best || *e.f1 > *best)) best = e.f1;
  }
  return best;
}

void rank(Leaderboard& board) {
  std::stable_sort(board.entries.begin(), board.entries.end(), [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
    if (a.f1.has_value() != b.f1.has_value()) return a.f1.has_value();
    if (a.f1 && *a.f1 != *b.f1) return *a.f1 > *b.f1;
    if (a.accuracy && b.accuracy && *a.accuracy != *b.accuracy) return *a.accuracy > *b.accuracy;
    return a.candidate.index < b.candidate.index;
  });
}

SearchResult run_search(const std::vector<Candidate>& candidates, const features::FeatureMatrix& train,
                        const features::FeatureMatrix& test, const SearchOptions& options) {
  if (!train.labels || !test.labels) throw DataError("search needs labeled train and test matrices");
  if (train.names != test.names) throw DataError("train and test matrices have different feature columns");
  std::vector<LeaderboardEntry> slots(candidates.size());
  std::vector<std::optional<models::TrainedModel>> kept(candidates.size());
  parallel_for(candidates.size(), options.workers, [&](std::size_t i) {
    auto& e = slots[i];
    e.candidate = candidates[i];
    const auto started = std::chrono::steady_clock::now();
    try {
      auto model = models::train(candidates[i].spec, train);
      const auto pred = models::predict(model, test, options.threshold);
      const auto c = analysis::confusion(pred.labels, *test.labels);
      e.f1 = c.f1();
      e.accuracy = c.accuracy();
      if (options.keep_models) kept[i] = std::move(model);
    } catch (const std::exception& ex) {
      e.error = ex.what();
      log(LogLevel::Warn, "candidate " + std::to_string(candidates[i].index) + " (" +
                              std::string(models::to_string(candidates[i].spec.family)) + ") failed: " + ex.what());
    }
    e.duration_seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - started).count();
  });

  SearchResult result;
  result.leaderboard.variant = train.variant;
  bool any = false;
  std::string causes;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].f1) any = true;
    if (!slots[i].error.empty()) causes += "\n  candidate " + std::to_string(slots[i].candidate.index) + ": " + slots[i].error;
    if (kept[i]) result.models.emplace(slots[i].candidate.index, std::move(*kept[i]));
  }
  if (!any && !slots.empty()) throw DataError("every candidate failed:" + causes);
  result.leaderboard.entries = std::move(slots);
  rank(result.leaderboard);
  return result;
}

void write_leaderboard_csv(std::ostream& out, std::span<const Leaderboard> boards) {
  CsvWriter w(out);
  w.row({"rank", "variant", "family", "candidate", "seed", "f1", "accuracy", "params", "error"});
  for (const auto& board : boards) {
    const std::string variant = board.variant ? std::string(features::to_string(*board.variant)) : "";
    for (std::size_t r = 0; r < board.entries.size(); ++r) {
      const auto& e = board.entries[r];
      w.row({std::to_string(r + 1), variant, std::string(models::to_string(e.candidate.spec.family)),
             std::to_string(e.candidate.index), std::to_string(e.candidate.spec.seed),
             e.f1 ? format_real(*e.f1) : "", e.accuracy ? format_real(*e.accuracy) : "",
             e.candidate.spec.describe(), e.error});
    }
  }
}

void write_leaderboard_csv(std::ostream& out, const Leaderboard& board) {
  write_leaderboard_csv(out, std::span<const Leaderboard>(&board, 1));
}

void write_timings_csv(std::ostream& out, std::span<const Leaderboard> boards) {
  CsvWriter w(out);
  w.row({"variant", "candidate", "family", "duration_seconds"});
  for (const auto& board : boards) {
    const std::string variant = board.variant ? std::string(features::to_string(*board.variant)) : "";
    for (const auto& e : board.entries) {
      w.row({variant, std::to_string(e.candidate.index), std::string(models::to_string(e.candidate.spec.family)),
             format_real(e.duration_seconds)});
    }
  }
}

std::vector<Leaderboard> read_leaderboard_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  auto col = [&](const char* name) {
    auto c = t.column(name);
    if (!c) throw SchemaError(std::string("leaderboard has no '") + name + "' column");
    return *c;
  };
  const std::size_t c_variant = col("variant"), c_family = col("family"), c_index = col("candidate"),
                    c_seed = col("seed"), c_f1 = col("f1"), c_acc = col("accuracy"), c_params = col("params"),
                    c_error = col("error");
  std::vector<Leaderboard> boards;
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    try {
      auto it = std::find(keys.begin(), keys.end(), row[c_variant]);
      if (it == keys.end()) {
        keys.push_back(row[c_variant]);
        boards.emplace_back();
        if (!row[c_variant].empty()) boards.back().variant = features::parse_variant(row[c_variant]);
        it = keys.end() - 1;
      }
      Leaderboard& board = boards[static_cast<std::size_t>(it - keys.begin())];
      LeaderboardEntry e;
      e.candidate.spec.family = models::parse_family(row[c_family]);
      e.candidate.index = static_cast<std::size_t>(std::stoull(row[c_index]));
      e.candidate.spec.seed = std::stoull(row[c_seed]);
      if (!row[c_f1].empty()) e.f1 = parse_real(row[c_f1]);
      if (!row[c_acc].empty()) e.accuracy = parse_real(row[c_acc]);
      for (const auto& kv : split(row[c_params], ';')) {
        if (kv.empty()) continue;
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError("bad parameter '" + kv + "'");
        e.candidate.spec.params[kv.substr(0, eq)] = models::parse_param(kv.substr(eq + 1));
      }
      e.error = row[c_error];
      board.entries.push_back(std::move(e));
    } catch (const std::logic_error& ex) {
      throw RowError(t.lines[i], std::string("leaderboard: ") + ex.what());
    } catch (const UsageError& ex) {
      throw RowError(t.lines[i], std::string("leaderboard: ") + ex.what());
    }
  }
  return boards;
}

// ---------------------------------------------------------------------------

namespace {

void mark_bold(F1Grid& g) {
  g.bold.assign(g.rows.size(), std::nullopt);
  for (std::size_t r = 0; r < g.rows.size(); ++r) {
    for (std::size_t c = 0; c < g.cols.size(); ++c) {
      const auto& v = g.f1[r][c];
      if (v && (!g.bold[r] || *v > *g.f1[r][*g.bold[r]])) g.bold[r] = c;
    }
  }
}

}  // namespace

std::vector<std::string> F1Grid::missing_cells() const {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (!f1[r][c]) {
        out.push_back(std::string(features::display_name(rows[r])) + " x " + std::string(models::display_name(cols[c])));
      }
    }
  }
  return out;
}

F1Grid best_per_cell(const std::vector<Leaderboard>& boards) {
  std::set<features::Variant> variants;
  std::set<Family> families;
  for (const auto& b : boards) {
    if (!b.variant) throw DataError("leaderboard without a data variant cannot be placed in the grid");
    variants.insert(*b.variant);
    for (const auto& e : b.entries) families.insert(e.candidate.spec.family);
  }
  F1Grid g;
  for (auto v : features::kAllVariants) {
    if (variants.count(v)) g.rows.push_back(v);
  }
  for (auto f : models::kAllFamilies) {
    if (families.count(f)) g.cols.push_back(f);
  }
  g.f1.assign(g.rows.size(), std::vector<std::optional<Real>>(g.cols.size()));
  for (const auto& b : boards) {
    const auto r = static_cast<std::size_t>(std::find(g.rows.begin(), g.rows.end(), *b.variant) - g.rows.begin());
    for (std::size_t c = 0; c < g.cols.size(); ++c) {
      const auto v = b.best_f1(g.cols[c]);
      if (v && (!g.f1[r][c] || *v > *g.f1[r][c])) g.f1[r][c] = v;
    }
  }
  mark_bold(g);
  for (const auto& cell : g.missing_cells()) log(LogLevel::Warn, "grid: no score for " + cell);
  return g;
}

void write_grid_csv(std::ostream& out, const F1Grid& grid) {
  CsvWriter w(out);
  std::vector<std::string> header{"variant"};
  for (auto f : grid.cols) header.emplace_back(models::display_name(f));
  w.row(header);
  for (std::size_t r = 0; r < grid.rows.size(); ++r) {
    std::vector<std::string> row{std::string(features::display_name(grid.rows[r]))};
    for (const auto& v : grid.f1[r]) row.push_back(v ? format_real(*v) : "");
    w.row(row);
  }
}

F1Grid read_grid_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  if (t.header.empty() || t.header[0] != "variant") throw SchemaError("F1 grid must start with a 'variant' column");
  F1Grid g;
  try {
    for (std::size_t c = 1; c < t.header.size(); ++c) g.cols.push_back(models::parse_family(t.header[c]));
  } catch (const UsageError& e) {
    throw SchemaError(std::string("F1 grid header: ") + e.what());
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    try {
      g.rows.push_back(features::parse_variant(row[0]));
    } catch (const UsageError& e) {
      throw RowError(t.lines[i], e.what());
    }
    std::vector<std::optional<Real>> cells;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c].empty()) {
        cells.emplace_back();
        continue;
      }
      auto v = try_parse_real(row[c]);
      if (!v) throw RowError(t.lines[i], "bad F1 value '" + row[c] + "'");
      cells.push_back(v);
    }
    g.f1.push_back(std::move(cells));
  }
  mark_bold(g);
  return g;
}

std::string grid_markdown(const F1Grid& grid, int digits) {
  std::ostringstream out;
  out << "| Variant |";
  for (auto f : grid.cols) out << ' ' << models::display_name(f) << " |";
  out << "\n|:--|";
  for (std::size_t c = 0; c < grid.cols.size(); ++c) out << "--:|";
  out << '\n';
  for (std::size_t r = 0; r < grid.rows.size(); ++r) {
    out << "| " << features::display_name(grid.rows[r]) << " |";
    for (std::size_t c = 0; c < grid.cols.size(); ++c) {
      const auto& v = grid.f1[r][c];
      if (!v) {
        out << " n/a |";
        continue;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
      if (grid.bold[r] == c) {
        out << " **" << buf << "** |";
      } else {
        out << ' ' << buf << " |";
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dac::automl
