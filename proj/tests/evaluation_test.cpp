#include <cmath>

#include <gtest/gtest.h>

#include "error_kind.hpp"
#include "test_support.hpp"
#include "ultradense/evaluation.hpp"

namespace ultradense {
namespace {

using testing::kind_of;

std::vector<double> random_list(std::size_t n, std::mt19937_64& rng, int levels) {
  std::vector<double> v(n);
  if (levels > 0) {
    std::uniform_int_distribution<int> pick(0, levels - 1);
    for (double& x : v) x = pick(rng);
  } else {
    std::normal_distribution<double> normal;
    for (double& x : v) x = normal(rng);
  }
  return v;
}

TEST(Kendall, WorkedExamples) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_EQ(kendall_tau(x, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_EQ(kendall_tau(x, std::vector<double>{3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(x, std::vector<double>{1, 3, 2}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(kendall_tau(x, std::vector<double>{1, 3, 2}, TauVariant::TauA), 1.0 / 3.0);
}

TEST(Kendall, TiesAndErrors) {
  // One x-tied pair out of six, the other five concordant.
  const std::vector<double> x{1, 1, 2, 3}, y{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(kendall_tau(x, y), 5.0 / std::sqrt(5.0 * 6.0));
  EXPECT_DOUBLE_EQ(kendall_tau(x, y, TauVariant::TauA), 5.0 / 6.0);
  EXPECT_EQ(kind_of([] { kendall_tau(std::vector<double>{1, 2}, std::vector<double>{5, 5}); }),
            ErrorKind::UndefinedCorrelation);
  EXPECT_EQ(kind_of([] { kendall_tau(std::vector<double>{1}, std::vector<double>{1}); }), ErrorKind::DegenerateInput);
  EXPECT_EQ(kind_of([] { kendall_tau(std::vector<double>{1, 2}, std::vector<double>{1}); }),
            ErrorKind::DimensionMismatch);
}

TEST(Kendall, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2016);
  std::uniform_int_distribution<std::size_t> length(2, 200);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = length(rng);
    const int levels = trial % 3 == 0 ? 0 : (trial % 3 == 1 ? 3 : 12);
    const auto x = random_list(n, rng, levels);
    const auto y = random_list(n, rng, trial % 2 == 0 ? 0 : 5);
    const auto fast = kendall_counts(x, y);
    const auto slow = testing::brute_force_kendall(x, y);
    EXPECT_EQ(fast.pairs, slow.pairs);
    EXPECT_EQ(fast.tied_x, slow.tied_x);
    EXPECT_EQ(fast.tied_y, slow.tied_y);
    EXPECT_EQ(fast.concordant_minus_discordant, slow.concordant_minus_discordant);
  }
}

TEST(Kendall, SymmetriesAndMonotoneInvariance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_list(40, rng, trial % 2 == 0 ? 4 : 0);
    const auto y = random_list(40, rng, 0);
    std::vector<double> neg_y(y), warped_x(x);
    for (double& v : neg_y) v = -v;
    for (double& v : warped_x) v = std::exp(v) + 7.0;
    EXPECT_EQ(kendall_tau(x, neg_y), -kendall_tau(x, y));
    EXPECT_EQ(kendall_tau(warped_x, y), kendall_tau(x, y));
    EXPECT_EQ(kendall_tau(x, y), kendall_tau(y, x));
    const double t = kendall_tau(x, y);
    EXPECT_GE(t, -1.0);
    EXPECT_LE(t, 1.0);
  }
}

TEST(Evaluate, PerfectAndCoverage) {
  const OutputLexicon lex({{"a", 3}, {"b", 2}, {"c", 1}, {"d", -1}}, Property::Sentiment);
  const GoldList gold{{"a", 0.9}, {"b", 0.5}, {"c", 0.1}, {"d", -0.8}};
  const auto r = evaluate(lex, gold);
  EXPECT_EQ(r.tau, 1.0);
  EXPECT_EQ(r.n, 4u);
  EXPECT_EQ(r.coverage, 1.0);
  EXPECT_EQ(r.property, Property::Sentiment);
  EXPECT_EQ(format_report(r), "sentiment\t4\t1.000000\t1.000000\tultradense");

  const GoldList half{{"a", 1}, {"x", 0.5}, {"d", -1}, {"y", 0.2}};
  const auto h = evaluate(lex, half);
  EXPECT_EQ(h.coverage, 0.5);
  // OOV words score 0.0: predicted (3, 0, -1, 0) vs gold (1, .5, -1, .2).
  EXPECT_DOUBLE_EQ(h.tau, kendall_tau(std::vector<double>{3, 0, -1, 0}, std::vector<double>{1, 0.5, -1, 0.2}));
}

TEST(Evaluate, ScaleInvariantAndErrors) {
  const OutputLexicon lex({{"a", 0.3}, {"b", -2}, {"c", 1}}, Property::Other);
  const OutputLexicon scaled({{"a", 0.9}, {"b", -6}, {"c", 3}}, Property::Other);
  const GoldList gold{{"a", 1}, {"b", 2}, {"c", 3}};
  EXPECT_EQ(evaluate(lex, gold).tau, evaluate(scaled, gold).tau);
  EXPECT_EQ(kind_of([&] { evaluate(lex, GoldList{{"a", 1}, {"b", 1}}); }), ErrorKind::UndefinedCorrelation);
  EXPECT_EQ(kind_of([&] { evaluate(lex, GoldList{{"a", 1}}); }), ErrorKind::DegenerateInput);
}

TEST(Fisher, Examples) {
  const auto same = fisher_z_compare(0.5, 100, 0.5, 100);
  EXPECT_FALSE(same.significant);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_TRUE(fisher_z_compare(0.654, 985, 0.508, 985).significant);
  const auto small = fisher_z_compare(0.60, 10, 0.55, 10);
  EXPECT_FALSE(small.significant);
  EXPECT_NEAR(small.z, (std::atanh(0.60) - std::atanh(0.55)) / std::sqrt(2.0 / 7.0), 1e-12);
  EXPECT_NEAR(small.z, 0.1398, 1e-4);
  EXPECT_EQ(kind_of([] { fisher_z_compare(1.0, 10, 0.5, 10); }), ErrorKind::DegenerateInput);
  EXPECT_EQ(kind_of([] { fisher_z_compare(0.5, 3, 0.5, 10); }), ErrorKind::DegenerateInput);
}

TEST(Pca, LineAndVarianceAccounting) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const std::vector<double> dir{1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0};
  std::vector<std::string> words;
  std::vector<double> values;
  for (int i = 0; i < 50; ++i) {
    const double t = normal(rng);
    words.push_back("w" + std::to_string(i));
    for (double d : dir) values.push_back(1.0 + t * d);
  }
  const EmbeddingSet line(3, words, values);
  const Matrix p = pca_subspace(line, 1);
  EXPECT_GE(std::abs(dot(p.row(0), dir)), 1.0 - 1e-9);

  const auto iso = testing::random_embeddings(300, 5, 6);
  const Matrix full = pca_subspace(iso, 5);
  EXPECT_LE(frobenius_norm(full * full.transposed() - Matrix::identity(5)), 1e-9);
  std::vector<double> mean(5, 0.0);
  for (std::size_t i = 0; i < iso.size(); ++i)
    for (std::size_t k = 0; k < 5; ++k) mean[k] += iso.vector(i)[k] / 300.0;
  double total = 0.0, projected = 0.0;
  std::vector<double> per_component(5, 0.0);
  for (std::size_t i = 0; i < iso.size(); ++i) {
    std::vector<double> c(5);
    for (std::size_t k = 0; k < 5; ++k) c[k] = iso.vector(i)[k] - mean[k];
    total += dot(c, c);
    for (std::size_t r = 0; r < 5; ++r) {
      const double v = dot(full.row(r), c);
      projected += v * v;
      per_component[r] += v * v;
    }
  }
  EXPECT_NEAR(projected, total, 1e-6);
  for (std::size_t r = 1; r < 5; ++r) EXPECT_LE(per_component[r], per_component[r - 1] * (1 + 1e-12));
  EXPECT_EQ(kind_of([&] { pca_subspace(iso, 0); }), ErrorKind::InvalidDimension);
  EXPECT_EQ(kind_of([&] { pca_subspace(iso, 6); }), ErrorKind::InvalidDimension);
}

TEST(RandomSubspace, Selector) {
  const Matrix p = random_subspace(3, 2);
  const std::vector<double> v{7, -2, 5};
  EXPECT_EQ(multiply(p, v), (std::vector<double>{7, -2}));
  EXPECT_EQ(random_subspace(4, 4), Matrix::identity(4));
  EXPECT_EQ(kind_of([] { random_subspace(3, 4); }), ErrorKind::InvalidDimension);
  EXPECT_EQ(kind_of([] { random_subspace(3, 0); }), ErrorKind::InvalidDimension);
}

struct SweepFixture {
  testing::PlantedData data;
  TrainingTable table;
  GoldList gold;
  PipelineSettings settings;
};

SweepFixture sweep_fixture() {
  testing::PlantedOptions o;
  o.words = 400;
  o.dim = 8;
  o.seed = 44;
  SweepFixture f{testing::make_planted(o), {}, {}, {}};
  f.table = split(intersect(f.data.resource, f.data.embeddings), 0.2, 9);
  f.gold = testing::planted_gold(f.data, f.table);
  f.settings.train.iterations = 300;
  f.settings.train.seed = 3;
  return f;
}

TEST(Pipeline, TrainAndEvaluate) {
  const auto f = sweep_fixture();
  const auto r = train_and_evaluate(f.data.embeddings, f.table, f.gold, f.settings);
  EXPECT_GE(r.report.tau, 0.8);
  EXPECT_EQ(r.lexicon.size(), f.data.embeddings.size());
  EXPECT_FALSE(r.map.has_value());
  const auto multi = train_and_evaluate(f.data.embeddings, f.table, f.gold, f.settings, {0, 1});
  EXPECT_TRUE(multi.map.has_value());
  EXPECT_GE(multi.report.tau, 0.7);
}

TEST(Sweep, SubspaceSizes) {
  const auto f = sweep_fixture();
  const std::vector<std::size_t> sizes{1, 2, 4};
  const auto a = sweep_subspace_size(f.data.embeddings, f.table, f.gold, sizes, SweepMethod::Ultradense, f.settings);
  const auto b = sweep_subspace_size(f.data.embeddings, f.table, f.gold, sizes, SweepMethod::Ultradense, f.settings);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[1].size, 2u);

  // Selecting every coordinate is the full-space linear-map baseline.
  const std::vector<std::size_t> all{8};
  const auto random_full = sweep_subspace_size(f.data.embeddings, f.table, f.gold, all, SweepMethod::Random, f.settings);
  const auto lex = detail::mapped_lexicon(f.data.embeddings, Matrix::identity(8), f.table, Property::Sentiment).first;
  EXPECT_EQ(random_full[0].tau, evaluate(lex, f.gold).tau);

  const std::vector<std::size_t> bad{9};
  EXPECT_EQ(kind_of([&] { sweep_subspace_size(f.data.embeddings, f.table, f.gold, bad, SweepMethod::Pca, f.settings); }),
            ErrorKind::InvalidDimension);
}

TEST(Sweep, ResourceSizes) {
  const auto f = sweep_fixture();
  const std::vector<std::size_t> sizes{10, 50, 300};
  const auto a = sweep_resource_size(f.data.embeddings, f.table, f.gold, sizes, 5, f.settings);
  const auto b = sweep_resource_size(f.data.embeddings, f.table, f.gold, sizes, 5, f.settings);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  EXPECT_GE(a[2].tau, a[0].tau - 0.05);

  const std::vector<std::size_t> full{f.table.count(Split::Train)};
  const auto whole = sweep_resource_size(f.data.embeddings, f.table, f.gold, full, 5, f.settings);
  EXPECT_EQ(whole[0].tau, train_and_evaluate(f.data.embeddings, f.table, f.gold, f.settings).report.tau);

  const std::vector<std::size_t> tiny{3};
  EXPECT_EQ(kind_of([&] { sweep_resource_size(f.data.embeddings, f.table, f.gold, tiny, 5, f.settings); }),
            ErrorKind::MissingClass);
  const std::vector<std::size_t> huge{1000};
  EXPECT_EQ(kind_of([&] { sweep_resource_size(f.data.embeddings, f.table, f.gold, huge, 5, f.settings); }),
            ErrorKind::MissingClass);
}

TEST(Sweep, CurveFormat) {
  std::ostringstream out;
  const std::vector<CurvePoint> curve{{1, 0.5}, {4, -0.25}};
  write_curve(out, curve);
  EXPECT_EQ(out.str(), "1\t0.500000\n4\t-0.250000\n");
}

}  // namespace
}  // namespace ultradense
