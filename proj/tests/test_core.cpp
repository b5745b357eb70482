#include "dac/core.hpp"
#include "dac/csv.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <limits>
#include <set>
#include <sstream>

using namespace dac;

TEST(Core, FormatRealRoundTrips) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Real x = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<Real>(rng.below(30)) - 15.0);
    EXPECT_EQ(parse_real(format_real(x)), x);
  }
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(3.0), "3");
  EXPECT_EQ(format_real(-2.5), "-2.5");
}

TEST(Core, ParseRejectsJunk) {
  EXPECT_FALSE(try_parse_real("1.5x").has_value());
  EXPECT_FALSE(try_parse_real("").has_value());
  EXPECT_EQ(*try_parse_real(" 2.25 "), 2.25);
  EXPECT_EQ(*try_parse_count("42"), 42);
  EXPECT_FALSE(try_parse_count("4.2").has_value());
  EXPECT_THROW(parse_real("abc"), DataError);
}

TEST(Core, RngIsReproducible) {
  Rng a(99), b(99), c(100);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Core, RngRanges) {
  Rng rng(1);
  Real sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const Real u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
    sum += rng.normal();
  }
  EXPECT_LT(std::abs(sum / 10000), 0.05);
}

TEST(Core, SampleWithoutReplacement) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t n = 1 + rng.below(50);
    const std::uint64_t k = rng.below(n + 1);
    const auto s = rng.sample_without_replacement(n, k);
    ASSERT_EQ(s.size(), k);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::uint64_t>(s.begin(), s.end()).size(), k);
    for (auto v : s) EXPECT_LT(v, n);
  }
}

TEST(Core, ParallelForVisitsEachIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw DataError("boom");
               }),
               DataError);
}

TEST(Core, MedianAndSigmoid) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
  EXPECT_TRUE(std::isfinite(log_loss(0.0, 1.0)));
}

TEST(Csv, QuotingRoundTrip) {
  std::ostringstream out;
  CsvWriter w(out);
  w.row({"a", "b", "c"});
  w.row({"plain", "with,comma", "with \"quote\""});
  w.row({"multi\nline", "", "x"});
  const auto t = parse_csv(out.str());
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "with,comma");
  EXPECT_EQ(t.rows[0][2], "with \"quote\"");
  EXPECT_EQ(t.rows[1][0], "multi\nline");
  EXPECT_EQ(t.lines[0], 2u);
  EXPECT_EQ(t.lines[1], 3u);
}

TEST(Csv, TabDetectionAndWidthErrors) {
  const auto t = parse_csv("a\tb\n1\t2\n");
  EXPECT_EQ(t.delimiter, '\t');
  EXPECT_EQ(t.rows[0][1], "2");
  try {
    parse_csv("a,b\n1,2\n\n3\n");
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  EXPECT_THROW(parse_csv("a,b\n\"open,2\n"), DataError);
}

TEST(Csv, MissingFileNamesThePath) {
  try {
    read_file("/nonexistent/dir/file.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/file.csv"), std::string::npos);
  }
}
