#pragma once

// SGD on Q with an SVD retraction after every step: Q' = Q - lr * grad,
// Q = U Vᵀ where Q' = U S Vᵀ.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ultradense/embeddings.hpp"
#include "ultradense/error.hpp"
#include "ultradense/lexicon.hpp"
#include "ultradense/linalg.hpp"
#include "ultradense/objective.hpp"

namespace ultradense {

struct TrainConfig {
  std::vector<SubspaceSpec> specs;
  std::size_t batch_size = 100;
  double lr0 = 5.0;
  double lr_decay = 0.99;
  std::size_t iterations = 1000;
  std::uint64_t seed = 1;
  // Gradient accumulation is always a sequential reduction over pair index, so
  // runs are reproducible regardless; the flag is recorded for provenance.
  bool deterministic = true;
  // Stop once the relative change of the windowed mean cost drops below 1e-4.
  bool early_stop = false;
  std::size_t early_stop_window = 50;
  // Verify ‖QᵀQ − I‖_F after every step instead of only at the end.
  bool check_every_step = false;
};

inline constexpr double kOrthogonalityTolerance = 1e-8;

inline void validate(const TrainConfig& cfg) {
  if (cfg.specs.empty()) throw Error(ErrorKind::ConfigError, "no subspace to train");
  if (!(cfg.lr0 > 0.0)) throw Error(ErrorKind::ConfigError, "lr0 must be positive");
  if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0)) throw Error(ErrorKind::ConfigError, "lr_decay must lie in (0, 1]");
  if (cfg.batch_size == 0) throw Error(ErrorKind::ConfigError, "batch_size must be at least 1");
  if (cfg.iterations == 0) throw Error(ErrorKind::ConfigError, "iterations must be at least 1");
}

inline double learning_rate(const TrainConfig& cfg, std::size_t iter) {
  return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(iter));
}

struct TrainResult {
  Matrix q;
  std::vector<double> cost_history;  // pre-step sampled loss, one per iteration run
  std::vector<double> learning_rates;
  std::chrono::duration<double> wall_time{};
  TrainConfig config;
};

/// Called after each reorthogonalization with the iteration index and new Q.
using StepObserver = std::function<void(std::size_t, const Matrix&)>;

/// `tables[i]` supplies the pairs for `cfg.specs[i]`; only train-split entries
/// are sampled.
inline TrainResult train(const TrainConfig& cfg, const EmbeddingSet& e, std::span<const TrainingTable> tables,
                         const StepObserver& observer = {}) {
  validate(cfg);
  if (tables.size() != cfg.specs.size()) {
    throw Error(ErrorKind::ConfigError, std::to_string(cfg.specs.size()) + " subspaces but " +
                                            std::to_string(tables.size()) + " training tables");
  }
  for (const auto& spec : cfg.specs) validate_spec(spec, e.dim());
  require_disjoint(cfg.specs);
  for (std::size_t i = 0; i < tables.size(); ++i) {
    for (const auto& entry : tables[i].entries) {
      if (entry.index >= e.size()) {
        throw Error(ErrorKind::DimensionMismatch, "training table index " + std::to_string(entry.index) +
                                                      " outside the embedding set");
      }
    }
    require_both_classes(tables[i].select(Split::Train),
                         std::string(to_string(cfg.specs[i].property)) + " train split");
  }

  const auto start = std::chrono::steady_clock::now();
  TrainResult result{random_orthogonal(e.dim(), cfg.seed), {}, {}, {}, cfg};
  result.cost_history.reserve(cfg.iterations);
  result.learning_rates.reserve(cfg.iterations);

  // Separate stream from the one that seeded Q.
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<SpecBatches> batches(cfg.specs.size());
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    for (std::size_t i = 0; i < cfg.specs.size(); ++i) {
      batches[i].diff = sample_batch(tables[i], PairGroup::Different, cfg.batch_size, rng);
      batches[i].same = sample_batch(tables[i], PairGroup::Same, cfg.batch_size, rng);
    }
    auto step = multi_loss_and_gradient(result.q, e, cfg.specs, batches);
    const double lr = learning_rate(cfg, iter);
    result.cost_history.push_back(step.loss);
    result.learning_rates.push_back(lr);

    Matrix moved = result.q - lr * step.gradient;
    try {
      result.q = nearest_orthogonal(moved);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::DegenerateMatrix) throw;
      throw Error(ErrorKind::DegenerateMatrix, "reorthogonalization failed at iteration " + std::to_string(iter) +
                                                   ": " + err.message());
    }
    if (cfg.check_every_step && orthogonality_error(result.q) > kOrthogonalityTolerance) {
      throw Error(ErrorKind::DegenerateMatrix, "Q lost orthogonality at iteration " + std::to_string(iter));
    }
    if (observer) observer(iter, result.q);

    const std::size_t w = cfg.early_stop_window;
    if (cfg.early_stop && w > 0 && result.cost_history.size() >= 2 * w) {
      const auto& h = result.cost_history;
      double recent = 0.0, previous = 0.0;
      for (std::size_t k = 0; k < w; ++k) {
        recent += h[h.size() - 1 - k];
        previous += h[h.size() - 1 - w - k];
      }
      if (std::abs(recent - previous) < 1e-4 * std::max(std::abs(previous), 1e-12)) break;
    }
  }

  if (orthogonality_error(result.q) > kOrthogonalityTolerance) {
    throw Error(ErrorKind::DegenerateMatrix, "final Q is not orthogonal");
  }
  result.wall_time = std::chrono::steady_clock::now() - start;
  return result;
}

/// "iteration<TAB>learning_rate<TAB>cost" rows, no header.
inline void write_training_log(const TrainResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  char buf[128];
  for (std::size_t i = 0; i < r.cost_history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", i, r.learning_rates[i], r.cost_history[i]);
    out << buf;
  }
  if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

}  // namespace ultradense
