#pragma once

// The separation/alignment objective on an ultradense subspace and its exact
// gradient with respect to Q.
//
// For a subspace with row selector P (rows `dims` of Q) and weight alpha:
//
//   loss = alpha     * mean_{(v,w) in diff} -‖P Q (e_w - e_v)‖
//        + (1-alpha) * mean_{(v,w) in same}  ‖P Q (e_w - e_v)‖
//
// Batch means rather than raw sums keep alpha's meaning independent of the
// batch size. Pairs whose projected difference is (numerically) zero
// contribute nothing to the gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ultradense/embeddings.hpp"
#include "ultradense/error.hpp"
#include "ultradense/lexicon.hpp"
#include "ultradense/linalg.hpp"

namespace ultradense {

struct SubspaceSpec {
  Property property = Property::Sentiment;
  std::vector<std::size_t> dims;
  double alpha = 0.4;

  std::size_t size() const noexcept { return dims.size(); }
};

inline void validate_spec(const SubspaceSpec& spec, std::size_t dim) {
  const std::string name(to_string(spec.property));
  if (spec.dims.empty()) throw Error(ErrorKind::InvalidDimension, name + ": subspace has no dimensions");
  std::set<std::size_t> seen;
  for (std::size_t k : spec.dims) {
    if (k >= dim) {
      throw Error(ErrorKind::InvalidDimension, name + ": dimension " + std::to_string(k) +
                                                   " outside 0.." + std::to_string(dim - 1));
    }
    if (!seen.insert(k).second) {
      throw Error(ErrorKind::InvalidDimension, name + ": dimension " + std::to_string(k) + " listed twice");
    }
  }
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
    throw Error(ErrorKind::ConfigError, name + ": alpha must lie in [0, 1]");
  }
}

inline void require_disjoint(std::span<const SubspaceSpec> specs) {
  std::set<std::size_t> used;
  for (const auto& spec : specs) {
    for (std::size_t k : spec.dims) {
      if (!used.insert(k).second) {
        throw Error(ErrorKind::OverlappingSubspaces,
                    "dimension " + std::to_string(k) + " is assigned to more than one subspace");
      }
    }
  }
}

enum class PairGroup { Different, Same };

struct PairBatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // embedding indices (v, w)
  PairGroup group = PairGroup::Different;

  friend bool operator==(const PairBatch&, const PairBatch&) = default;
};

/// Draws `batch_size` pairs uniformly with replacement from the pair set
/// implied by the table's train split: opposite-label pairs for Different,
/// same-label pairs (pooled over both classes) for Same.
inline PairBatch sample_batch(const TrainingTable& table, PairGroup group, std::size_t batch_size,
                              std::mt19937_64& rng) {
  std::vector<std::size_t> pos, neg;
  for (const auto& e : table.entries) {
    if (e.split != Split::Train) continue;
    (e.label > 0 ? pos : neg).push_back(e.index);
  }
  PairBatch batch{{}, group};
  batch.pairs.reserve(batch_size);

  if (group == PairGroup::Different) {
    if (pos.empty() || neg.empty()) {
      throw Error(ErrorKind::MissingClass, "opposite-label pairs need both classes in the train split");
    }
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neg(0, neg.size() - 1);
    for (std::size_t k = 0; k < batch_size; ++k) {
      const std::size_t v = pos[pick_pos(rng)];
      const std::size_t w = neg[pick_neg(rng)];
      batch.pairs.emplace_back(v, w);
    }
    return batch;
  }

  // Each class is weighted by its number of unordered same-label pairs so the
  // draw is uniform over the pooled pair set.
  auto pair_count = [](std::size_t n) { return n < 2 ? 0.0 : 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); };
  const double wp = pair_count(pos.size());
  const double wn = pair_count(neg.size());
  if (wp + wn == 0.0) {
    throw Error(ErrorKind::MissingClass, "same-label pairs need a class with at least two train words");
  }
  std::bernoulli_distribution choose_pos(wp / (wp + wn));
  for (std::size_t k = 0; k < batch_size; ++k) {
    const auto& cls = choose_pos(rng) ? pos : neg;
    std::uniform_int_distribution<std::size_t> first(0, cls.size() - 1);
    std::uniform_int_distribution<std::size_t> second(0, cls.size() - 2);
    const std::size_t a = first(rng);
    std::size_t b = second(rng);
    if (b >= a) ++b;
    batch.pairs.emplace_back(cls[a], cls[b]);
  }
  return batch;
}

inline constexpr double kKinkTolerance = 1e-12;

namespace detail {

// Adds sign * coef * mean ‖P Q (e_w - e_v)‖ over the batch to the returned
// value and, when `grad` is set, the matching gradient rows.
inline double accumulate_batch(const Matrix& q, const EmbeddingSet& e, const SubspaceSpec& spec,
                               const PairBatch& batch, double coef, Matrix* grad) {
  if (batch.pairs.empty() || coef == 0.0) return 0.0;
  const std::size_t d = e.dim();
  const double scale = coef / static_cast<double>(batch.pairs.size());
  std::vector<double> diff(d);
  std::vector<double> y(spec.dims.size());
  double total = 0.0;
  for (const auto& [v, w] : batch.pairs) {
    const auto ev = e.vector(v);
    const auto ew = e.vector(w);
    for (std::size_t i = 0; i < d; ++i) diff[i] = ew[i] - ev[i];
    double sq = 0.0;
    for (std::size_t k = 0; k < spec.dims.size(); ++k) {
      y[k] = dot(q.row(spec.dims[k]), diff);
      sq += y[k] * y[k];
    }
    const double norm = std::sqrt(sq);
    total += norm;
    if (grad == nullptr || norm < kKinkTolerance) continue;
    for (std::size_t k = 0; k < spec.dims.size(); ++k) {
      const double f = scale * y[k] / norm;
      auto row = grad->row(spec.dims[k]);
      for (std::size_t i = 0; i < d; ++i) row[i] += f * diff[i];
    }
  }
  return scale * total;
}

inline void check_shapes(const Matrix& q, const EmbeddingSet& e, const SubspaceSpec& spec) {
  if (!q.is_square() || q.rows() != e.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "Q must be " + std::to_string(e.dim()) + "x" + std::to_string(e.dim()));
  }
  validate_spec(spec, e.dim());
}

}  // namespace detail

inline double loss(const Matrix& q, const EmbeddingSet& e, const SubspaceSpec& spec, const PairBatch& diff,
                   const PairBatch& same) {
  detail::check_shapes(q, e, spec);
  return detail::accumulate_batch(q, e, spec, diff, -spec.alpha, nullptr) +
         detail::accumulate_batch(q, e, spec, same, 1.0 - spec.alpha, nullptr);
}

/// ∂loss/∂Q. Only the rows in spec.dims are non-zero.
inline Matrix gradient(const Matrix& q, const EmbeddingSet& e, const SubspaceSpec& spec, const PairBatch& diff,
                       const PairBatch& same) {
  detail::check_shapes(q, e, spec);
  Matrix g(e.dim(), e.dim());
  detail::accumulate_batch(q, e, spec, diff, -spec.alpha, &g);
  detail::accumulate_batch(q, e, spec, same, 1.0 - spec.alpha, &g);
  return g;
}

struct SpecBatches {
  PairBatch diff{{}, PairGroup::Different};
  PairBatch same{{}, PairGroup::Same};
};

/// Loss and gradient in one pass; what the trainer calls each step.
struct LossAndGradient {
  double loss = 0.0;
  Matrix gradient;
};

inline LossAndGradient multi_loss_and_gradient(const Matrix& q, const EmbeddingSet& e,
                                               std::span<const SubspaceSpec> specs,
                                               std::span<const SpecBatches> batches) {
  if (specs.size() != batches.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one batch pair per subspace spec required");
  }
  require_disjoint(specs);
  LossAndGradient out{0.0, Matrix(e.dim(), e.dim())};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    detail::check_shapes(q, e, specs[i]);
    out.loss += detail::accumulate_batch(q, e, specs[i], batches[i].diff, -specs[i].alpha, &out.gradient);
    out.loss += detail::accumulate_batch(q, e, specs[i], batches[i].same, 1.0 - specs[i].alpha, &out.gradient);
  }
  return out;
}

inline double multi_loss(const Matrix& q, const EmbeddingSet& e, std::span<const SubspaceSpec> specs,
                         std::span<const SpecBatches> batches) {
  if (specs.size() != batches.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one batch pair per subspace spec required");
  }
  require_disjoint(specs);
  double total = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i) total += loss(q, e, specs[i], batches[i].diff, batches[i].same);
  return total;
}

inline Matrix multi_gradient(const Matrix& q, const EmbeddingSet& e, std::span<const SubspaceSpec> specs,
                             std::span<const SpecBatches> batches) {
  return multi_loss_and_gradient(q, e, specs, batches).gradient;
}

}  // namespace ultradense
