#include <cmath>

#include <gtest/gtest.h>

#include "error_kind.hpp"
#include "test_support.hpp"
#include "ultradense/trainer.hpp"

namespace ultradense {
namespace {

using testing::kind_of;

struct Fixture {
  testing::PlantedData data;
  TrainingTable table;
};

Fixture planted(std::size_t words = 200, std::size_t dim = 8) {
  testing::PlantedOptions o;
  o.words = words;
  o.dim = dim;
  o.seed = 31;
  Fixture f{testing::make_planted(o), {}};
  f.table = split(intersect(f.data.resource, f.data.embeddings), 0.1, 4);
  return f;
}

TrainConfig config(std::size_t iterations, std::uint64_t seed = 5) {
  TrainConfig c;
  c.specs = {SubspaceSpec{Property::Sentiment, {0}, 0.4}};
  c.iterations = iterations;
  c.seed = seed;
  return c;
}

std::span<const TrainingTable> one(const TrainingTable& t) { return {&t, 1}; }

TEST(LearningRate, Schedule) {
  TrainConfig c;
  EXPECT_EQ(learning_rate(c, 0), 5.0);
  EXPECT_NEAR(learning_rate(c, 1), 4.95, 1e-15);
  c.lr_decay = 1.0;
  EXPECT_EQ(learning_rate(c, 100), 5.0);
  c.lr_decay = 0.9;
  for (std::size_t i = 0; i < 50; ++i) EXPECT_LT(learning_rate(c, i + 1), learning_rate(c, i));
}

TEST(TrainConfig, Validation) {
  auto bad = config(10);
  bad.lr0 = 0.0;
  EXPECT_EQ(kind_of([&] { validate(bad); }), ErrorKind::ConfigError);
  bad = config(10);
  bad.lr_decay = 1.5;
  EXPECT_EQ(kind_of([&] { validate(bad); }), ErrorKind::ConfigError);
  bad = config(10);
  bad.batch_size = 0;
  EXPECT_EQ(kind_of([&] { validate(bad); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([&] { validate(config(0)); }), ErrorKind::ConfigError);
}

TEST(Train, SingleIteration) {
  const auto f = planted();
  const auto r = train(config(1), f.data.embeddings, one(f.table));
  EXPECT_EQ(r.cost_history.size(), 1u);
  EXPECT_LE(orthogonality_error(r.q), 1e-8);
  EXPECT_NE(r.q, random_orthogonal(8, 5));
}

TEST(Train, StartsFromSeededRandomOrthogonal) {
  const auto f = planted();
  auto cfg = config(1);
  cfg.lr0 = 1e-300;
  const auto r = train(cfg, f.data.embeddings, one(f.table));
  EXPECT_LE(frobenius_norm(r.q - random_orthogonal(8, 5)), 1e-12);
}

TEST(Train, DeterministicPerSeed) {
  const auto f = planted();
  const auto a = train(config(100), f.data.embeddings, one(f.table));
  const auto b = train(config(100), f.data.embeddings, one(f.table));
  EXPECT_EQ(a.cost_history, b.cost_history);
  EXPECT_EQ(a.q, b.q);
  const auto c = train(config(100, 6), f.data.embeddings, one(f.table));
  EXPECT_NE(a.cost_history, c.cost_history);
}

TEST(Train, OrthogonalAfterEveryStep) {
  const auto f = planted();
  auto cfg = config(200);
  cfg.check_every_step = true;
  double worst = 0.0;
  std::size_t steps = 0;
  train(cfg, f.data.embeddings, one(f.table), [&](std::size_t, const Matrix& q) {
    worst = std::max(worst, orthogonality_error(q));
    ++steps;
  });
  EXPECT_EQ(steps, 200u);
  EXPECT_LE(worst, 1e-8);
}

TEST(Train, CostDeclinesAndRecoversDirection) {
  const auto f = planted(400, 10);
  const auto r = train(config(400), f.data.embeddings, one(f.table));
  ASSERT_EQ(r.cost_history.size(), 400u);
  auto mean = [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += r.cost_history[i];
    return s / static_cast<double>(hi - lo);
  };
  EXPECT_LT(mean(350, 400), mean(0, 10));
  EXPECT_GE(std::abs(testing::cosine(r.q.row(0), f.data.direction)), 0.9);
}

TEST(Train, SmallLearningRateMostlyMonotone) {
  // Separable classes: a strong label direction and very tight clusters, so the
  // sampled batch cost varies far less than one step improves it.
  testing::PlantedOptions o;
  o.words = 200;
  o.dim = 8;
  o.signal = 2.0;
  o.noise_variance = 1e-4;
  o.seed = 32;
  const auto data = testing::make_planted(o);
  const auto table = split(intersect(data.resource, data.embeddings), 0.1, 4);
  auto cfg = config(100);
  cfg.lr0 = 0.01;
  const auto h = train(cfg, data.embeddings, one(table)).cost_history;
  std::size_t non_increasing = 0;
  for (std::size_t i = 1; i < h.size(); ++i) non_increasing += h[i] <= h[i - 1];
  EXPECT_GE(static_cast<double>(non_increasing), 0.9 * static_cast<double>(h.size() - 1));
}

TEST(Train, EarlyStopStopsOnPlateau) {
  // Two tight clusters: every opposite pair has the same difference and every
  // same pair a zero one, so the sampled cost is exact and settles once Q does.
  const EmbeddingSet e(3, {"a", "b", "c", "d"}, {1, 0, 0, 1, 0, 0, -1, 0, 0, -1, 0, 0});
  TrainingTable t;
  t.entries = {{0, 1, Split::Train}, {1, 1, Split::Train}, {2, -1, Split::Train}, {3, -1, Split::Train}};
  auto cfg = config(1000);
  cfg.early_stop = true;
  cfg.early_stop_window = 5;
  const auto r = train(cfg, e, one(t));
  EXPECT_LT(r.cost_history.size(), 1000u);
  EXPECT_EQ(r.cost_history.size(), r.learning_rates.size());
  EXPECT_NEAR(r.cost_history.back(), -0.4 * 2.0, 1e-6);
  cfg.early_stop = false;
  EXPECT_EQ(train(cfg, e, one(t)).cost_history.size(), 1000u);
}

TEST(Train, Errors) {
  const auto f = planted();
  TrainingTable single = f.table;
  for (auto& e : single.entries) e.label = 1;
  EXPECT_EQ(kind_of([&] { train(config(5), f.data.embeddings, one(single)); }), ErrorKind::MissingClass);
  EXPECT_EQ(kind_of([&] { train(config(5), f.data.embeddings, {}); }), ErrorKind::ConfigError);
  auto overlap = config(5);
  overlap.specs.push_back({Property::Concreteness, {0}, 0.4});
  const std::vector<TrainingTable> tables{f.table, f.table};
  EXPECT_EQ(kind_of([&] { train(overlap, f.data.embeddings, tables); }), ErrorKind::OverlappingSubspaces);
}

TEST(Train, JointSpecs) {
  const auto f = planted();
  auto cfg = config(50);
  cfg.specs.push_back({Property::Concreteness, {3, 4}, 0.5});
  const std::vector<TrainingTable> tables{f.table, f.table};
  const auto r = train(cfg, f.data.embeddings, tables);
  EXPECT_EQ(r.cost_history.size(), 50u);
  EXPECT_LE(orthogonality_error(r.q), 1e-8);
}

TEST(TrainingLog, Format) {
  const auto f = planted();
  const auto r = train(config(3), f.data.embeddings, one(f.table));
  const auto dir = testing::temp_dir("trainlog");
  const auto path = (dir / "log.tsv").string();
  write_training_log(r, path);
  const std::string text = testing::read_file(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(text.rfind("0\t5\t", 0), 0u);
  EXPECT_NE(text.find("\n1\t4.9"), std::string::npos);
}

}  // namespace
}  // namespace ultradense
