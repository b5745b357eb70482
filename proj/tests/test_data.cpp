// Domain types, ingestion, percentile scoring and feature construction.
#include "dac/csv.hpp"
#include "dac/features.hpp"
#include "dac/ingest.hpp"
#include "dac/scoring.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <sstream>

using namespace dac;

namespace {

// Balanced LODES counts: every bin group splits `total` the same way.
LodesCounts balanced(Count total, LodesKind kind, std::uint64_t seed) {
  Rng rng(seed);
  LodesCounts c;
  c.total_jobs = total;
  if (kind == LodesKind::WAC) {
    c.firm_age.emplace();
    c.firm_size.emplace();
  }
  for (std::size_t g = 0; g < lodes_bin_groups().size(); ++g) {
    auto bins = c.group(g);
    if (bins.empty()) continue;
    Count left = total;
    for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
      bins[i] = static_cast<Count>(rng.below(static_cast<std::uint64_t>(left) + 1));
      left -= bins[i];
    }
    bins[bins.size() - 1] = left;
  }
  return c;
}

std::string raw_lodes_csv(const std::vector<std::pair<std::string, LodesCounts>>& rows, LodesKind kind) {
  const auto map = ingest::ColumnMap::lodes_default(kind);
  const auto fields =
      ingest::required_fields(kind == LodesKind::RAC ? ingest::SourceKind::LodesRac : ingest::SourceKind::LodesWac,
                              IncomeBinManifest::standard(), IndicatorManifest({}));
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{map.geocode_column()};
  for (const auto& f : fields) header.push_back(*map.column(f));
  header.push_back("createdate");
  w.row(header);
  for (const auto& [geo, c] : rows) {
    std::vector<std::string> row{geo, std::to_string(c.total_jobs)};
    for (std::size_t g = 0; g < lodes_bin_groups().size(); ++g) {
      for (Count v : c.group(g)) row.push_back(std::to_string(v));
    }
    row.push_back("20190101");
    w.row(row);
  }
  return out.str();
}

std::vector<OptionalReal> random_column(Rng& rng, std::size_t n) {
  std::vector<OptionalReal> v(n);
  const auto levels = 1 + rng.below(20);  // few levels force ties
  for (auto& x : v) {
    if (rng.bernoulli(0.05)) continue;
    x = static_cast<Real>(rng.below(levels));
  }
  return v;
}

}  // namespace

TEST(Domain, GeoIds) {
  EXPECT_EQ(TractId::parse("1400000US53033000100").str(), "53033000100");
  EXPECT_FALSE(TractId::try_parse("5303300010").has_value());
  EXPECT_FALSE(TractId::try_parse("5303300010a").has_value());
  EXPECT_THROW(BlockId::parse("123"), DataError);
  EXPECT_EQ(tract_prefix(BlockId::parse("530330001001000")).str(), "53033000100");
  EXPECT_LT(TractId::parse("53033000100"), TractId::parse("53033000200"));
}

TEST(Domain, LodesValidation) {
  auto c = balanced(100, LodesKind::RAC, 1);
  EXPECT_TRUE(validate_counts(c, LodesKind::RAC).ok());
  c.industry[0] += 1;
  const auto v = validate_counts(c, LodesKind::RAC);
  ASSERT_FALSE(v.ok());
  EXPECT_EQ(v.violations[0].field, "industry");
  EXPECT_FALSE(validate_counts(balanced(10, LodesKind::RAC, 2), LodesKind::WAC).ok());
  EXPECT_FALSE(validate_counts(balanced(10, LodesKind::WAC, 2), LodesKind::RAC).ok());
}

TEST(Domain, IncomeAndManifests) {
  EXPECT_EQ(IncomeBinManifest::standard().size(), 17u);
  EXPECT_EQ(IndicatorManifest::bundled()->size(), 36u);
  EXPECT_TRUE(IndicatorManifest::bundled()->index_of("pre1960_housing").has_value());
  EXPECT_THROW(IncomeBinManifest::parse("a | a | 10\nb | b | 5\n"), DataError);
  EXPECT_THROW(IndicatorManifest::parse("x\nx\n"), DataError);
  const std::vector<Count> hh{1, 2, 3};
  EXPECT_TRUE(validate_income(hh, 6, 10, 3).ok());
  EXPECT_FALSE(validate_income(hh, 7, 10, 3).ok());
  EXPECT_FALSE(validate_income(hh, 6, 10, 4).ok());
}

TEST(Ingest, RawLodesAggregatesToTracts) {
  const auto a = balanced(40, LodesKind::RAC, 1), b = balanced(60, LodesKind::RAC, 2),
             c = balanced(7, LodesKind::RAC, 3);
  const std::string text = raw_lodes_csv(
      {{"530330001001000", a}, {"530330001002001", b}, {"530330002001000", c}}, LodesKind::RAC);
  const auto parsed = ingest::parse_lodes<BlockId>(text, ingest::ColumnMap::lodes_default(LodesKind::RAC),
                                                   LodesKind::RAC, {true, std::nullopt});
  ASSERT_EQ(parsed.records.size(), 3u);
  const auto tracts = ingest::aggregate_to_tract<BlockId>(parsed.records);
  ASSERT_EQ(tracts.size(), 2u);
  EXPECT_EQ(tracts[0].geo.str(), "53033000100");
  EXPECT_EQ(tracts[0].counts.total_jobs, 100);
  auto sum = a;
  sum += b;
  EXPECT_EQ(tracts[0].counts, sum);
  EXPECT_TRUE(validate(tracts[0]).ok());

  std::ostringstream out;
  ingest::write_canonical<TractId>(out, tracts, LodesKind::RAC);
  EXPECT_EQ(ingest::read_canonical_lodes(out.str(), LodesKind::RAC), tracts);
}

TEST(Ingest, BadInputsNameTheProblem) {
  auto c = balanced(10, LodesKind::RAC, 1);
  c.education[0] += 1;
  const std::string text = raw_lodes_csv({{"530330001001000", c}}, LodesKind::RAC);
  const auto map = ingest::ColumnMap::lodes_default(LodesKind::RAC);
  EXPECT_EQ(ingest::parse_lodes<BlockId>(text, map, LodesKind::RAC).warnings.size(), 1u);
  try {
    ingest::parse_lodes<BlockId>(text, map, LodesKind::RAC, {true, std::nullopt});
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("education"), std::string::npos);
  }
  const auto renamed = ingest::ColumnMap::parse("industry_3 = CNS99\n", map);
  try {
    ingest::parse_lodes<BlockId>(text, renamed, LodesKind::RAC);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("CNS99"), std::string::npos);
  }
  const std::string bad_geo = raw_lodes_csv({{"53033", balanced(1, LodesKind::RAC, 1)}}, LodesKind::RAC);
  EXPECT_THROW(ingest::parse_lodes<BlockId>(bad_geo, map, LodesKind::RAC), RowError);
}

TEST(Ingest, AcsAndDacRoundTrip) {
  const auto& bins = IncomeBinManifest::standard();
  std::ostringstream raw;
  CsvWriter w(raw);
  std::vector<std::string> header{"GEO_ID", "total_households", "total_population"};
  for (const auto& b : bins.bins()) header.push_back(b.key);
  w.row(header);
  for (int bg = 1; bg <= 2; ++bg) {
    std::vector<std::string> row{"1500000US53033000100" + std::to_string(bg), "17", "40"};
    for (std::size_t i = 0; i < bins.size(); ++i) row.push_back("1");
    w.row(row);
  }
  const auto acs = ingest::parse_acs<BlockGroupId>(raw.str(), ingest::ColumnMap::acs_default(), bins,
                                                   {true, std::nullopt});
  const auto tracts = ingest::aggregate_to_tract<BlockGroupId>(acs.records);
  ASSERT_EQ(tracts.size(), 1u);
  EXPECT_EQ(tracts[0].total_households, 34);
  EXPECT_EQ(tracts[0].total_population, 80);
  EXPECT_EQ(tracts[0].household_counts[5], 2);

  const auto man = IndicatorManifest::bundled();
  std::ostringstream dac;
  CsvWriter d(dac);
  std::vector<std::string> dh{"GEOID", "DAC"};
  for (std::size_t i = 0; i < man->size(); ++i) dh.push_back((*man)[i].key);
  d.row(dh);
  for (int t = 0; t < 3; ++t) {
    std::vector<std::string> row{"5303300010" + std::to_string(t), t == 0 ? "1" : "0"};
    for (std::size_t i = 0; i < man->size(); ++i) row.push_back(i == 4 && t == 1 ? "NA" : std::to_string(t + i));
    d.row(row);
  }
  auto recs = ingest::parse_dac(dac.str(), ingest::ColumnMap::dac_default(*man), man).records;
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_TRUE(recs[0].dac_flag);
  EXPECT_FALSE(recs[1].indicators.values[4].has_value());
  EXPECT_FALSE(recs[0].indicators.percentiles.has_value());
  scoring::assign_percentiles(recs);
  std::ostringstream canon;
  ingest::write_canonical(canon, recs, *man);
  EXPECT_EQ(ingest::read_canonical_dac(canon.str(), man), recs);
}

TEST(Scoring, PercentileMatchesCountingOracle) {
  Rng rng(2024);
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 100; ++t) {
    const auto n = 1 + rng.below(500);
    const auto v = random_column(rng, n);
    if (std::none_of(v.begin(), v.end(), [](const auto& x) { return x.has_value(); })) continue;
    const auto got = scoring::percentile_rank<Real>(v);
    Real present = 0;
    for (const auto& x : v) present += x.has_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i]) {
        EXPECT_FALSE(got[i].has_value());
        continue;
      }
      Real less = 0, equal = 0;
      for (const auto& u : v) {
        if (!u) continue;
        less += *u < *v[i];
        equal += *u == *v[i];
      }
      ASSERT_EQ(*got[i], 100 * (less + (equal - 1) / 2) / present);
      EXPECT_GE(*got[i], 0.0);
      EXPECT_LT(*got[i], 100.0);
    }
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

TEST(Scoring, HandExamplesAndMonotonicity) {
  const std::vector<OptionalReal> v{10.0, 20.0, 20.0, 30.0, std::nullopt};
  const auto p = scoring::percentile_rank<Real>(v);
  EXPECT_EQ(*p[0], 0.0);
  EXPECT_EQ(*p[1], 37.5);
  EXPECT_EQ(*p[2], 37.5);
  EXPECT_EQ(*p[3], 75.0);
  EXPECT_FALSE(p[4].has_value());
  const std::vector<OptionalReal> none{std::nullopt, std::nullopt};
  EXPECT_THROW(scoring::percentile_rank<Real>(none, "x"), DataError);
}

TEST(Scoring, ScoreAndSeparation) {
  auto man = std::make_shared<const IndicatorManifest>(std::vector<IndicatorInfo>{{"a", "A"}, {"b", "B"}});
  std::vector<DacRecord> recs;
  for (int i = 0; i < 6; ++i) {
    DacRecord r;
    r.tract = TractId::parse("5300100000" + std::to_string(i));
    r.indicators.tract = r.tract;
    r.indicators.manifest = man;
    r.indicators.values = {Real(i), Real(i % 2)};
    r.dac_flag = i >= 3;
    recs.push_back(r);
  }
  scoring::assign_percentiles(recs, 2);
  const auto& p = *recs[5].indicators.percentiles;
  EXPECT_DOUBLE_EQ(scoring::dac_score(recs[5].indicators), *p[0] + *p[1]);
  const auto rep = scoring::rank_separation(recs);
  EXPECT_EQ(rep.ranking[0].indicator, 0u);
  EXPECT_EQ(rep.ranking[0].rank, 1u);
  recs[0].indicators.percentiles->at(1).reset();
  EXPECT_THROW(scoring::dac_score(recs[0].indicators), DataError);
}

TEST(Features, VariantsExcludeDemographicsWhereRequired) {
  for (auto v : {features::Variant::V2a, features::Variant::V2b}) {
    for (const auto& name : features::feature_names(v)) EXPECT_FALSE(features::is_demographic_feature(name)) << name;
  }
  std::size_t demo = 0;
  for (const auto& name : features::feature_names(features::Variant::V1a)) demo += features::is_demographic_feature(name);
  EXPECT_EQ(demo, 13u);  // age 3, race 6, ethnicity 2, sex 2
  EXPECT_EQ(features::feature_names(features::Variant::V2b).size(), 1u + 20 + 17 + 20);
  EXPECT_EQ(features::parse_variant("LI(R+W)+ACS"), features::Variant::V2b);
}

TEST(Features, BuildNormalizesAndJoins) {
  std::vector<LodesTractRecord> rac, wac;
  std::vector<AcsTractIncomeRecord> acs;
  features::LabelMap labels;
  for (int t = 0; t < 4; ++t) {
    const auto id = TractId::parse("5303300010" + std::to_string(t));
    rac.push_back({id, LodesKind::RAC, balanced(50 + t, LodesKind::RAC, t)});
    if (t != 3) wac.push_back({id, LodesKind::WAC, balanced(20 + t, LodesKind::WAC, 10 + t)});
    AcsTractIncomeRecord a;
    a.geo = id;
    a.household_counts.assign(17, 1);
    a.total_households = 17;
    a.total_population = t == 2 ? 0 : 100;
    acs.push_back(a);
    labels[id] = t == 0;
  }
  features::BuildLog log;
  const auto m = features::build_variant(features::Variant::V2b, rac, wac, acs, &labels, 2018,
                                         IncomeBinManifest::standard(), &log);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(log.dropped_unjoined, 1u);
  EXPECT_EQ(log.dropped_zero_denominator, 1u);
  EXPECT_DOUBLE_EQ(m.values(0, 0), 50.0 / 100.0);
  EXPECT_DOUBLE_EQ(m.values(1, *m.column("acs_hhinc_lt10k")), 0.01);
  EXPECT_DOUBLE_EQ(m.values(1, *m.column("wac_industry_mining")), wac[1].counts.industry[1] / 100.0);

  const auto v1a = features::build_variant(features::Variant::V1a, rac, wac, acs, &labels, 2018);
  EXPECT_EQ(v1a.rows(), 4);
  // Each bin group of a LODES variant sums to one.
  EXPECT_NEAR(v1a.values.row(0).segment(0, 3).sum(), 1.0, 1e-12);

  std::ostringstream out;
  features::write_matrix_csv(out, m);
  const auto back = features::read_matrix_csv(out.str(), 2018);
  EXPECT_EQ(back.variant, features::Variant::V2b);
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.labels, m.labels);
}

TEST(Features, SplitArithmetic) {
  Matrix X = Matrix::Zero(1445, 1);
  std::vector<int> y(1445, 0);
  for (std::size_t i = 0; i < 262; ++i) y[i * 5] = 1;
  const auto m = dac::testing::make_matrix(X, y);
  const auto idx = features::split_indices(m, 0.67, 1);
  EXPECT_NEAR(static_cast<double>(idx.train.size()), 968.0, 1.0);
  EXPECT_NEAR(static_cast<double>(idx.test.size()), 477.0, 1.0);
  std::size_t train_pos = 0;
  for (auto i : idx.train) train_pos += y[i];
  EXPECT_NEAR(static_cast<double>(train_pos), 0.67 * 262, 1.0);
  EXPECT_EQ(idx.train.size() + idx.test.size(), 1445u);
  const auto again = features::split_indices(m, 0.67, 1);
  EXPECT_EQ(again.train, idx.train);
  EXPECT_NE(features::split_indices(m, 0.67, 2).train, idx.train);
}

TEST(Features, StandardizeUsesTrainingStatistics) {
  Matrix A(4, 2), B(2, 2);
  A << 1, 5, 2, 5, 3, 5, 4, 5;
  B << 5, 7, 0, 5;
  const auto s = features::standardize(dac::testing::make_matrix(A, {}), dac::testing::make_matrix(B, {}));
  EXPECT_DOUBLE_EQ(s.stats.mean(0), 2.5);
  EXPECT_DOUBLE_EQ(s.stats.stddev(0), std::sqrt(1.25));
  EXPECT_TRUE(s.stats.constant[1]);
  EXPECT_DOUBLE_EQ(s.test.values(0, 0), 2.5 / std::sqrt(1.25));
  EXPECT_EQ(s.test.values(0, 1), 0.0);
  EXPECT_NEAR(s.train.values.col(0).mean(), 0.0, 1e-15);
}
