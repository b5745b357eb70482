#include "dac/automl.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace dac;
using namespace dac::automl;
using models::Family;

namespace {

std::vector<Real> numbers(const std::vector<ParamValue>& values) {
  std::vector<Real> out;
  for (const auto& v : values) out.push_back(std::get<Real>(v));
  return out;
}

features::FeatureMatrix blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), 3);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.3);
    for (int j = 0; j < 3; ++j) X(static_cast<Eigen::Index>(i), j) = rng.normal() + (y[i] ? 1.5 : 0.0);
  }
  return dac::testing::make_matrix(X, y);
}

}  // namespace

TEST(SearchSpace, DefaultNeighbours) {
  const auto s = SearchSpace::default_space();
  EXPECT_EQ(s.families().size(), 6u);
  // Winners 4, 6, 7, 15, 17: smallest gap 1.
  EXPECT_EQ(numbers(s.grids.at(Family::GBM).at("max_depth")), (std::vector<Real>{3, 4, 6, 7, 15, 17, 18}));
  // Lone winner 20: halved and doubled.
  EXPECT_EQ(numbers(s.grids.at(Family::DRF).at("max_depth")), (std::vector<Real>{10, 20, 40}));
  // 1.0 doubled leaves the (0, 1] range and is dropped.
  EXPECT_EQ(numbers(s.grids.at(Family::DRF).at("col_sample_rate_per_tree")), (std::vector<Real>{0.5, 1.0}));
  // A negative epsilon is dropped.
  const auto eps = numbers(s.grids.at(Family::MLP).at("epsilon"));
  ASSERT_EQ(eps.size(), 3u);
  EXPECT_EQ(eps[0], 1e-8);
  EXPECT_NEAR(eps[2], 1.99e-6, 1e-18);
  EXPECT_EQ(s.grids.at(Family::MLP).at("hidden").size(), 5u);
  EXPECT_NO_THROW(s.validate());
}

TEST(SearchSpace, DefaultBudgetGivesFivePerFamily) {
  const auto cands = enumerate_candidates(SearchSpace::default_space(), 1);
  ASSERT_EQ(cands.size(), 30u);
  std::map<Family, int> per;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    EXPECT_EQ(cands[i].index, i);
    ++per[cands[i].spec.family];
    EXPECT_TRUE(seen.insert(std::string(models::to_string(cands[i].spec.family)) + cands[i].spec.describe()).second);
    EXPECT_NO_THROW(cands[i].spec.validate());
  }
  for (Family f : models::kAllFamilies) EXPECT_EQ(per[f], 5);
}

TEST(SearchSpace, EnumerationIsDeterministic) {
  const auto s = SearchSpace::default_space();
  const auto a = enumerate_candidates(s, 42), b = enumerate_candidates(s, 42), c = enumerate_candidates(s, 43);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].spec, b[i].spec);
    differs |= !(a[i].spec == c[i].spec);
  }
  EXPECT_TRUE(differs);
}

TEST(SearchSpace, ExhaustiveBudgetListsLexicographically) {
  SearchSpace s;
  s.grids[Family::GLM] = {{"alpha", {0.0, 0.5}}, {"lambda", {0.1, 0.01, 1.0}}};
  s.budget = 6;
  const auto cands = enumerate_candidates(s, 9);
  ASSERT_EQ(cands.size(), 6u);
  const std::vector<std::pair<Real, Real>> expected{{0.0, 0.1}, {0.0, 0.01}, {0.0, 1.0},
                                                    {0.5, 0.1}, {0.5, 0.01}, {0.5, 1.0}};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(std::get<Real>(cands[i].spec.params.at("alpha")), expected[i].first);
    EXPECT_EQ(std::get<Real>(cands[i].spec.params.at("lambda")), expected[i].second);
  }
}

TEST(SearchSpace, SmallGridPassesBudgetOn) {
  SearchSpace s;
  s.grids[Family::DRF] = {{"ntrees", {5.0, 10.0}}};
  s.grids[Family::GLM] = {{"lambda", {0.1, 0.01, 1.0, 2.0, 3.0}}};
  s.budget = 6;
  const auto alloc = s.allocation();
  EXPECT_EQ(alloc.at(Family::DRF), 2u);
  EXPECT_EQ(alloc.at(Family::GLM), 4u);
  s.budget = 8;
  EXPECT_THROW(s.allocation(), UsageError);
  s.budget = 1;
  EXPECT_THROW(s.validate(), UsageError);
}

TEST(SearchSpace, UnevenBudgetFavoursEarlierFamilies) {
  auto s = SearchSpace::default_space();
  s.budget = 8;
  const auto alloc = s.allocation();
  EXPECT_EQ(alloc.at(Family::DRF), 2u);
  EXPECT_EQ(alloc.at(Family::MLP), 2u);
  EXPECT_EQ(alloc.at(Family::GBM), 1u);
  EXPECT_EQ(alloc.at(Family::XRT), 1u);
}

TEST(SearchSpace, ParseOverlay) {
  const auto s = SearchSpace::parse(
      "# comment\n"
      "budget = 12\n"
      "mlp.hidden = [50, 50], [100]   # two topologies\n"
      "glm.budget = 2\n",
      SearchSpace::default_space());
  EXPECT_EQ(s.budget, 12u);
  EXPECT_EQ(s.family_budget.at(Family::GLM), 2u);
  const auto& hidden = s.grids.at(Family::MLP).at("hidden");
  ASSERT_EQ(hidden.size(), 2u);
  EXPECT_EQ(std::get<std::vector<Real>>(hidden[0]), (std::vector<Real>{50, 50}));
  EXPECT_EQ(s.allocation().at(Family::GLM), 2u);
  EXPECT_THROW(SearchSpace::parse("gbm.max_depth = 0\n", {}).validate(), UsageError);
  EXPECT_THROW(SearchSpace::parse("gbm.unknown_knob = 1\n", {}).validate(), UsageError);
  EXPECT_THROW(SearchSpace::parse("nofamily = 1\n", {}), UsageError);
  EXPECT_THROW(SearchSpace::parse("gbm.max_depth = \n", {}), UsageError);
}

TEST(Search, StrongPenaltyRanksBelowWeakPenalty) {
  const auto train = blobs(300, 1), test = blobs(200, 2);
  SearchSpace s;
  s.grids[Family::GLM] = {{"lambda", {1e-4, 100.0}}};
  s.budget = 2;
  const auto result = run_search(enumerate_candidates(s, 3), train, test);
  const auto& e = result.leaderboard.entries;
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(std::get<Real>(e[0].candidate.spec.params.at("lambda")), 1e-4);
  EXPECT_GT(*e[0].f1, 0.5);
  // A flat model at 30% prevalence never predicts DAC.
  EXPECT_EQ(*e[1].f1, 0.0);
}

TEST(Search, WorkersDoNotChangeTheLeaderboard) {
  const auto train = blobs(200, 4), test = blobs(100, 5);
  auto s = SearchSpace::default_space();
  s.grids[Family::MLP]["hidden"] = {std::vector<Real>{8}};
  s.grids[Family::MLP]["epochs"] = {2.0};
  s.budget = 12;
  const auto cands = enumerate_candidates(s, 7);
  std::ostringstream serial, parallel;
  write_leaderboard_csv(serial, run_search(cands, train, test, {1, 0.5, false}).leaderboard);
  write_leaderboard_csv(parallel, run_search(cands, train, test, {4, 0.5, false}).leaderboard);
  EXPECT_EQ(serial.str(), parallel.str());
}

TEST(Search, FailuresRankLastAndAllFailingThrows) {
  const auto train = blobs(50, 6), test = blobs(30, 7);
  std::vector<Candidate> cands(2);
  cands[0].index = 0;
  cands[0].spec.family = Family::GBM;
  cands[0].spec.params["min_rows"] = 1000.0;  // more than the row count
  cands[1].index = 1;
  cands[1].spec.family = Family::GLM;
  const auto r = run_search(cands, train, test);
  EXPECT_EQ(r.leaderboard.entries[0].candidate.index, 1u);
  EXPECT_FALSE(r.leaderboard.entries[1].f1.has_value());
  EXPECT_FALSE(r.leaderboard.entries[1].error.empty());
  cands.pop_back();
  EXPECT_THROW(run_search(cands, train, test), DataError);
}

TEST(Search, RankBreaksTiesByAccuracyThenIndex) {
  Leaderboard b;
  auto entry = [](std::size_t i, std::optional<Real> f1, std::optional<Real> acc) {
    LeaderboardEntry e;
    e.candidate.index = i;
    e.f1 = f1;
    e.accuracy = acc;
    return e;
  };
  b.entries = {entry(0, std::nullopt, std::nullopt), entry(1, 0.5, 0.7), entry(2, 0.5, 0.8), entry(3, 0.5, 0.8),
               entry(4, 0.6, 0.1)};
  rank(b);
  std::vector<std::size_t> order;
  for (const auto& e : b.entries) order.push_back(e.candidate.index);
  EXPECT_EQ(order, (std::vector<std::size_t>{4, 2, 3, 1, 0}));
}

TEST(Leaderboard, CsvRoundTrip) {
  const auto train = blobs(120, 8), test = blobs(60, 9);
  SearchSpace s;
  s.grids[Family::MLP] = {{"hidden", {std::vector<Real>{4, 4}}}, {"epochs", {1.0, 2.0}},
                          {"hidden_dropout_ratios", {std::monostate{}}}};
  s.budget = 2;
  auto board = run_search(enumerate_candidates(s, 1), train, test).leaderboard;
  board.variant = features::Variant::V2a;
  std::ostringstream out;
  write_leaderboard_csv(out, board);
  const auto boards = read_leaderboard_csv(out.str());
  ASSERT_EQ(boards.size(), 1u);
  const auto& back = boards[0];
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.variant, features::Variant::V2a);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.entries[i].candidate.spec, board.entries[i].candidate.spec);
    EXPECT_EQ(back.entries[i].f1, board.entries[i].f1);
  }
}

TEST(Grid, BestPerCellTiesAndMarkdown) {
  auto board = [](features::Variant v, std::vector<std::pair<Family, Real>> scores) {
    Leaderboard b;
    b.variant = v;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      LeaderboardEntry e;
      e.candidate.index = i;
      e.candidate.spec.family = scores[i].first;
      e.f1 = scores[i].second;
      b.entries.push_back(e);
    }
    return b;
  };
  const auto g = best_per_cell({board(features::Variant::V2a, {{Family::GLM, 0.8}, {Family::DRF, 0.8}, {Family::GLM, 0.7}}),
                                board(features::Variant::V1a, {{Family::DRF, 0.6}})});
  ASSERT_EQ(g.rows, (std::vector<features::Variant>{features::Variant::V1a, features::Variant::V2a}));
  ASSERT_EQ(g.cols, (std::vector<Family>{Family::DRF, Family::GLM}));
  EXPECT_EQ(*g.f1[1][1], 0.8);
  EXPECT_EQ(g.bold[1], 0u);  // tie goes to the first column
  ASSERT_EQ(g.missing_cells().size(), 1u);
  const auto md = grid_markdown(g);
  EXPECT_NE(md.find("| **0.6000** | n/a |"), std::string::npos) << md;
  EXPECT_NE(md.find("| **0.8000** | 0.8000 |"), std::string::npos) << md;

  std::ostringstream out;
  write_grid_csv(out, g);
  const auto back = read_grid_csv(out.str());
  EXPECT_EQ(back.rows, g.rows);
  EXPECT_EQ(back.cols, g.cols);
  EXPECT_EQ(back.f1, g.f1);
  EXPECT_EQ(back.bold, g.bold);
}

TEST(Grid, SingleCell) {
  Leaderboard b;
  b.variant = features::Variant::V1b;
  LeaderboardEntry e;
  e.candidate.spec.family = Family::XGB;
  e.f1 = 0.25;
  b.entries.push_back(e);
  const auto g = best_per_cell({b});
  ASSERT_EQ(g.rows.size(), 1u);
  ASSERT_EQ(g.cols.size(), 1u);
  EXPECT_EQ(g.bold[0], 0u);
  EXPECT_NE(grid_markdown(g).find("XGBoost"), std::string::npos);
}
