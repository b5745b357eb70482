#include "dac/analysis.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace dac;
using namespace dac::analysis;

namespace {

models::PredictionSet prediction_set(const std::vector<int>& pred) {
  models::PredictionSet p;
  p.probabilities = Vector(static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p.tracts.push_back(TractId::parse(std::to_string(53001000001LL + static_cast<long long>(i))));
    p.labels.push_back(pred[i] != 0);
    p.probabilities(static_cast<Eigen::Index>(i)) = pred[i] ? 0.9 : 0.1;
  }
  return p;
}

features::LabelMap label_map(const std::vector<int>& actual) {
  features::LabelMap m;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    m[TractId::parse(std::to_string(53001000001LL + static_cast<long long>(i)))] = actual[i] != 0;
  }
  return m;
}

std::shared_ptr<const IndicatorManifest> small_manifest() {
  return std::make_shared<const IndicatorManifest>(
      std::vector<IndicatorInfo>{{"a", "Indicator A"}, {"b", "Indicator B"}, {"c", "Indicator C"}});
}

DacRecord record(long long id, std::vector<Real> pct, std::shared_ptr<const IndicatorManifest> manifest) {
  DacRecord r;
  r.tract = TractId::parse(std::to_string(id));
  r.indicators.tract = r.tract;
  r.indicators.manifest = manifest;
  for (Real p : pct) {
    r.indicators.values.emplace_back(p);
  }
  std::vector<OptionalReal> pcts(pct.begin(), pct.end());
  r.indicators.percentiles = pcts;
  return r;
}

}  // namespace

TEST(Metrics, WorkedExample) {
  // 3 TP, 1 FP, 2 FN, 4 TN
  const std::vector<int> pred{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<int> act{1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
  const auto r = evaluate(prediction_set(pred), label_map(act));
  EXPECT_EQ(r.counts.tp, 3);
  EXPECT_EQ(r.counts.fp, 1);
  EXPECT_EQ(r.counts.fn, 2);
  EXPECT_EQ(r.counts.tn, 4);
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.recall, 0.6);
  EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
}

TEST(Metrics, NoPositivePredictionsGiveZeroF1) {
  Confusion c;
  c.fn = 3;
  c.tn = 2;
  EXPECT_EQ(c.precision(), 0.0);
  EXPECT_EQ(c.f1(), 0.0);
  EXPECT_DOUBLE_EQ(c.accuracy(), 0.4);
}

TEST(Metrics, PropertiesOnRandomLabelings) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<bool> p(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(0.4);
      a[i] = rng.bernoulli(0.3);
    }
    const auto c = confusion(p, a);
    ASSERT_EQ(c.total(), static_cast<Count>(n));
    for (Real m : {c.precision(), c.recall(), c.f1(), c.accuracy()}) {
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
    }
    EXPECT_LE(c.f1(), std::max(c.precision(), c.recall()) + 1e-15);
    EXPECT_GE(c.f1(), std::min(c.precision(), c.recall()) - 1e-15);
    // Perfect predictions
    const auto perfect = confusion(a, a);
    EXPECT_EQ(perfect.accuracy(), 1.0);
    if (perfect.tp) EXPECT_EQ(perfect.f1(), 1.0);
  }
}

TEST(Metrics, MismatchedTractSetsNameTheDifference) {
  auto labels = label_map({1, 0, 1});
  labels.erase(labels.begin());
  labels[TractId::parse("53099000001")] = true;
  try {
    evaluate(prediction_set({1, 0, 1}), labels);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("53001000001"), std::string::npos);
    EXPECT_NE(msg.find("53099000001"), std::string::npos);
  }
}

TEST(Metrics, CsvListsAllCounts) {
  const auto r = evaluate(prediction_set({1, 0}), label_map({1, 1}));
  std::ostringstream out;
  write_metrics_csv(out, r);
  EXPECT_NE(out.str().find("f1,0.6666666666666666"), std::string::npos);
  std::ostringstream o2;
  write_outcomes_csv(o2, r);
  EXPECT_NE(o2.str().find("53001000002,FN"), std::string::npos);
}

TEST(Diagnose, SingleDeviatingIndicatorRanksFirst) {
  auto man = small_manifest();
  // Tracts 1-3 are TP, 4 is FN, 5 is TN. The FN differs from the TP median
  // only on indicator c.
  std::vector<DacRecord> recs{
      record(53001000001, {80, 70, 90}, man), record(53001000002, {82, 72, 92}, man),
      record(53001000003, {84, 74, 94}, man), record(53001000004, {82, 72, 12}, man),
      record(53001000005, {10, 10, 10}, man),
  };
  const auto eval = evaluate(prediction_set({1, 1, 1, 0, 0}), label_map({1, 1, 1, 1, 0}));
  const auto d = diagnose_errors(eval, recs);
  ASSERT_EQ(d.tracts.size(), 1u);
  EXPECT_EQ(d.tracts[0].outcome, Outcome::FN);
  ASSERT_EQ(d.false_negatives.ranking.size(), 3u);
  EXPECT_EQ(d.false_negatives.ranking[0].indicator, 2u);
  EXPECT_DOUBLE_EQ(*d.false_negatives.ranking[0].median_delta, -80.0);
  EXPECT_DOUBLE_EQ(*d.false_negatives.ranking[1].median_delta, 0.0);
  EXPECT_EQ(d.false_positives.size, 0u);
  EXPECT_FALSE(d.false_positives.ranking[0].median_delta.has_value());
}

TEST(Diagnose, NoErrorsGivesEmptyOutput) {
  auto man = small_manifest();
  std::vector<DacRecord> recs{record(53001000001, {1, 2, 3}, man), record(53001000002, {3, 2, 1}, man)};
  const auto eval = evaluate(prediction_set({1, 0}), label_map({1, 0}));
  EXPECT_TRUE(diagnose_errors(eval, recs).empty());
}

TEST(Diagnose, NoTruePositivesIsAnError) {
  auto man = small_manifest();
  std::vector<DacRecord> recs{record(53001000001, {1, 2, 3}, man), record(53001000002, {3, 2, 1}, man)};
  const auto eval = evaluate(prediction_set({0, 1}), label_map({1, 0}));
  EXPECT_THROW(diagnose_errors(eval, recs), DataError);
}

TEST(Diagnose, MissingIndicatorRanksLast) {
  auto man = small_manifest();
  auto fp = record(53001000003, {50, 60, 70}, man);
  (*fp.indicators.percentiles)[0].reset();
  std::vector<DacRecord> recs{record(53001000001, {90, 90, 90}, man), record(53001000002, {10, 10, 10}, man), fp};
  const auto eval = evaluate(prediction_set({1, 0, 1}), label_map({1, 0, 0}));
  const auto d = diagnose_errors(eval, recs);
  const auto& r = d.false_positives.ranking;
  EXPECT_EQ(r[0].indicator, 1u);  // |60-90| = 30 beats |70-90| = 20
  EXPECT_EQ(r[1].indicator, 2u);
  EXPECT_EQ(r[2].indicator, 0u);
  EXPECT_FALSE(r[2].median_delta.has_value());
  std::ostringstream out;
  write_rankings_csv(out, d);
  EXPECT_NE(out.str().find("FP,1,b,Indicator B,-30,30,1,1"), std::string::npos);
}

TEST(Correlation, PearsonMatchesClosedForm) {
  const std::vector<Real> a{1, 2, 3, 4, 5};
  const std::vector<Real> b{2, 4, 5, 4, 5};
  // Sxy = 6, Sxx = 10, Syy = 6
  EXPECT_NEAR(*pearson(a, b), 6.0 / std::sqrt(60.0), 1e-15);
  const std::vector<Real> flat{3, 3, 3, 3, 3};
  EXPECT_FALSE(pearson(a, flat).has_value());
}

TEST(Correlation, SpearmanUsesMidRanks) {
  const std::vector<Real> a{10, 20, 30, 40};
  const std::vector<Real> b{1, 3, 3, 9};  // ranks 1, 2.5, 2.5, 4
  // Pearson of (1,2,3,4) and (1,2.5,2.5,4): Sxy = 4.5, Sxx = 5, Syy = 4.5
  EXPECT_NEAR(*spearman(a, b), 4.5 / std::sqrt(5.0 * 4.5), 1e-15);
  const std::vector<Real> c{1, 8, 27, 64};
  EXPECT_NEAR(*spearman(a, c), 1.0, 1e-15);
}

TEST(Correlation, BoundsAndSymmetry) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<Real> a(6), b(6);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    const Real r = *pearson(a, b);
    EXPECT_LE(std::abs(r), 1.0 + 1e-12);
    EXPECT_NEAR(r, *pearson(b, a), 1e-14);
    std::vector<Real> scaled(a);
    for (auto& x : scaled) x = 3 * x + 1;
    EXPECT_NEAR(*pearson(scaled, b), r, 1e-12);
  }
}

TEST(Trend, NeedsThreeYears) {
  std::map<int, Count> counts{{2013, 5}, {2014, 6}};
  std::map<int, std::vector<Real>> means{{2013, {1.0}}, {2014, {2.0}}};
  EXPECT_THROW(correlate_trends(counts, means, {"x0"}), DataError);
  counts[2015] = 9;
  means[2015] = {2.5};
  const auto rep = correlate_trends(counts, means, {"x0"});
  ASSERT_EQ(rep.correlations.size(), 1u);
  const std::vector<Real> c{5, 6, 9}, m{1, 2, 2.5};
  EXPECT_NEAR(*rep.correlations[0].r, *pearson(c, m), 1e-15);
}

TEST(Infer, CountsMatchPredictions) {
  Matrix X(6, 1);
  X << 0, 1, 2, 3, 4, 5;
  const auto fm = dac::testing::make_matrix(X, {0, 0, 0, 1, 1, 1});
  models::ModelSpec spec;
  spec.family = models::Family::GLM;
  const auto model = models::train(spec, fm);
  std::map<int, features::FeatureMatrix> years{{2013, fm}, {2014, fm}};
  years[2014].values.array() += 10;
  const auto inf = infer_years(model, years);
  for (const auto& [year, y] : inf) {
    const auto direct = models::predict(model, years.at(year));
    EXPECT_EQ(y.predictions.labels, direct.labels);
    EXPECT_EQ(y.dac_count, std::count(direct.labels.begin(), direct.labels.end(), true));
  }
  EXPECT_EQ(inf.at(2014).dac_count, 6);

  features::FeatureMatrix wrong = fm;
  wrong.names[0] = "other";
  years[2015] = wrong;
  try {
    infer_years(model, years);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("2015"), std::string::npos);
  }
}

TEST(Trend, WeightedMeans) {
  Matrix X(3, 1);
  X << 1, 2, 6;
  auto fm = dac::testing::make_matrix(X, {});
  fm.weights << 1, 1, 2;
  std::map<int, features::FeatureMatrix> years{{2013, fm}};
  EXPECT_DOUBLE_EQ(yearly_feature_means(years, {"x0"}).at(2013)[0], 15.0 / 4.0);
  EXPECT_DOUBLE_EQ(yearly_feature_means(years, {"x0"}, false).at(2013)[0], 3.0);
}
