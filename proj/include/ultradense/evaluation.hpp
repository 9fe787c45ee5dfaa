#pragma once

// Rank-correlation evaluation of output lexicons, significance testing, the
// PCA and first-k-coordinates baselines, and the subspace-size and
// resource-size sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ultradense/embeddings.hpp"
#include "ultradense/error.hpp"
#include "ultradense/lexicon.hpp"
#include "ultradense/linalg.hpp"
#include "ultradense/objective.hpp"
#include "ultradense/projection.hpp"
#include "ultradense/trainer.hpp"

namespace ultradense {

enum class TauVariant { TauA, TauB };

constexpr std::string_view to_string(TauVariant v) { return v == TauVariant::TauA ? "tau_a" : "tau_b"; }

inline TauVariant parse_tau_variant(std::string_view s) {
  if (s == "tau_a") return TauVariant::TauA;
  if (s == "tau_b") return TauVariant::TauB;
  throw Error(ErrorKind::ConfigError, "unknown tau variant '" + std::string(s) + "'");
}

/// Pair counts behind Kendall's tau. `concordant_minus_discordant` is exact.
struct KendallCounts {
  std::int64_t pairs = 0;                        // n(n-1)/2
  std::int64_t tied_x = 0;                       // pairs tied in x (joint ties included)
  std::int64_t tied_y = 0;                       // pairs tied in y (joint ties included)
  std::int64_t concordant_minus_discordant = 0;
};

namespace detail {

inline std::int64_t tie_pairs(std::int64_t run) { return run * (run - 1) / 2; }

// Merge sort of `v` counting strict inversions (i < j with v[i] > v[j]).
inline std::int64_t sort_count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                                          std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = sort_count_inversions(v, buf, lo, mid) + sort_count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace detail

/// O(n log n) pair counting: sort by (x, y), count x-ties and joint ties, then
/// count the discordant pairs as inversions of y while merge-sorting it.
inline KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "kendall_tau needs equally long lists");
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error(ErrorKind::InvalidValue, "non-finite rank input");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });

  KendallCounts c;
  const auto nn = static_cast<std::int64_t>(n);
  c.pairs = nn * (nn - 1) / 2;
  std::int64_t joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    c.tied_x += detail::tie_pairs(static_cast<std::int64_t>(j - i));
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[order[b]] == y[order[a]]) ++b;
      joint += detail::tie_pairs(static_cast<std::int64_t>(b - a));
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::int64_t discordant = detail::sort_count_inversions(ys, buf, 0, n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && ys[j] == ys[i]) ++j;
    c.tied_y += detail::tie_pairs(static_cast<std::int64_t>(j - i));
    i = j;
  }
  const std::int64_t untied = c.pairs - c.tied_x - c.tied_y + joint;
  c.concordant_minus_discordant = untied - 2 * discordant;
  return c;
}

/// Final tau from pair counts. Shared with any independent pair counter so
/// equal counts always give bit-identical values.
inline double tau_from_counts(const KendallCounts& c, TauVariant variant) {
  const std::int64_t untied_x = c.pairs - c.tied_x;
  const std::int64_t untied_y = c.pairs - c.tied_y;
  if (c.pairs == 0 || untied_x == 0 || untied_y == 0) {
    throw Error(ErrorKind::UndefinedCorrelation, "one of the rankings is entirely tied");
  }
  const double num = static_cast<double>(c.concordant_minus_discordant);
  if (variant == TauVariant::TauA) return num / static_cast<double>(c.pairs);
  return num / std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

inline double kendall_tau(std::span<const double> x, std::span<const double> y,
                          TauVariant variant = TauVariant::TauB) {
  if (x.size() < 2) throw Error(ErrorKind::DegenerateInput, "kendall_tau needs at least two observations");
  return tau_from_counts(kendall_counts(x, y), variant);
}

using GoldList = std::vector<std::pair<std::string, double>>;

inline GoldList gold_from_resource(const LexiconResource& r) { return {r.entries.begin(), r.entries.end()}; }

/// Test-split words of `table` with their ±1 labels.
inline GoldList gold_from_split(const TrainingTable& table, const EmbeddingSet& e) {
  GoldList gold;
  for (const auto& entry : table.entries) {
    if (entry.split == Split::Test) gold.emplace_back(e.word(entry.index), static_cast<double>(entry.label));
  }
  return gold;
}

struct EvalReport {
  Property property = Property::Other;
  std::size_t n = 0;
  double tau = 0.0;
  double coverage = 0.0;
  TauVariant variant = TauVariant::TauB;
  std::string method = "ultradense";
  std::map<std::string, double> baseline_taus;
};

/// tau between gold values and lexicon scores over every gold word, scoring
/// out-of-vocabulary words as neutral (0.0).
inline EvalReport evaluate(const OutputLexicon& lex, const GoldList& gold, TauVariant variant = TauVariant::TauB) {
  if (gold.size() < 2) throw Error(ErrorKind::DegenerateInput, "evaluation needs at least two gold words");
  std::vector<double> predicted, expected;
  predicted.reserve(gold.size());
  expected.reserve(gold.size());
  std::size_t covered = 0;
  for (const auto& [token, value] : gold) {
    const auto s = lex.find(token);
    if (s) ++covered;
    predicted.push_back(s.value_or(0.0));
    expected.push_back(value);
  }
  EvalReport r;
  r.property = lex.property();
  r.n = gold.size();
  r.tau = kendall_tau(predicted, expected, variant);
  r.coverage = static_cast<double>(covered) / static_cast<double>(gold.size());
  r.variant = variant;
  return r;
}

/// "property<TAB>n<TAB>tau<TAB>coverage<TAB>method"
inline std::string format_report(const EvalReport& r) {
  char buf[64];
  std::string row(to_string(r.property));
  row += '\t' + std::to_string(r.n);
  std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\t", r.tau, r.coverage);
  row += buf;
  row += r.method;
  return row;
}

struct SignificanceResult {
  bool significant = false;
  double z = 0.0;
  double p_value = 1.0;
};

/// Two-sided test on atanh(tau) with variance 1/(n-3) per sample.
inline SignificanceResult fisher_z_compare(double tau1, std::size_t n1, double tau2, std::size_t n2,
                                           double alpha = 0.05) {
  if (n1 < 4 || n2 < 4) throw Error(ErrorKind::DegenerateInput, "Fisher z-test needs n >= 4");
  if (!(std::abs(tau1) < 1.0) || !(std::abs(tau2) < 1.0)) {
    throw Error(ErrorKind::DegenerateInput, "Fisher z-transformation is undefined at |tau| = 1");
  }
  const double se = std::sqrt(1.0 / static_cast<double>(n1 - 3) + 1.0 / static_cast<double>(n2 - 3));
  SignificanceResult r;
  r.z = (std::atanh(tau1) - std::atanh(tau2)) / se;
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  r.significant = r.p_value < alpha;
  return r;
}

/// Top `d_sub` principal directions (rows, orthonormal) of the mean-centred
/// embedding matrix, from its SVD.
inline Matrix pca_subspace(const EmbeddingSet& e, std::size_t d_sub) {
  if (d_sub == 0 || d_sub > e.dim()) {
    throw Error(ErrorKind::InvalidDimension, "PCA subspace size " + std::to_string(d_sub) + " outside 1.." +
                                                 std::to_string(e.dim()));
  }
  if (e.size() <= e.dim()) {
    throw Error(ErrorKind::InvalidDimension, "PCA needs more words than dimensions");
  }
  const std::size_t n = e.size();
  const std::size_t d = e.dim();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = e.vector(i);
    for (std::size_t k = 0; k < d; ++k) mean[k] += v[k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centred(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = e.vector(i);
    for (std::size_t k = 0; k < d; ++k) centred(i, k) = v[k] - mean[k];
  }
  const RightSingular rs = right_singular(centred);
  Matrix p(d_sub, d);
  for (std::size_t r = 0; r < d_sub; ++r)
    for (std::size_t k = 0; k < d; ++k) p(r, k) = rs.v(k, r);
  return p;
}

/// Selector of the first `d_sub` original coordinates.
inline Matrix random_subspace(std::size_t d, std::size_t d_sub) {
  if (d_sub == 0 || d_sub > d) {
    throw Error(ErrorKind::InvalidDimension, "subspace size " + std::to_string(d_sub) + " outside 1.." +
                                                 std::to_string(d));
  }
  Matrix p(d_sub, d);
  for (std::size_t r = 0; r < d_sub; ++r) p(r, r) = 1.0;
  return p;
}

// ---------------------------------------------------------------------------
// Pipelines and sweeps

struct PipelineSettings {
  TrainConfig train;         // specs are replaced per run
  Property property = Property::Sentiment;
  double alpha = 0.4;
  TauVariant variant = TauVariant::TauB;
};

struct PipelineResult {
  TransformMatrix transform;
  std::optional<LinearMap> map;
  OutputLexicon lexicon;
  EvalReport report;
  std::vector<double> cost_history;
};

namespace detail {

inline Matrix train_reps(const Matrix& reps, const TrainingTable& table, std::vector<double>& labels) {
  const auto train = table.select(Split::Train);
  Matrix out(train.size(), reps.cols());
  labels.clear();
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto src = reps.row(train[i].index);
    std::copy(src.begin(), src.end(), out.row(i).begin());
    labels.push_back(static_cast<double>(train[i].label));
  }
  return out;
}

// Lexicon from a fitted linear map over the projected representations.
inline std::pair<OutputLexicon, LinearMap> mapped_lexicon(const EmbeddingSet& e, const Matrix& projector,
                                                          const TrainingTable& table, Property property) {
  const Matrix reps = project_with(e, projector);
  std::vector<double> labels;
  const Matrix x = train_reps(reps, table, labels);
  LinearMap map = fit_linear_map(x, labels);
  std::vector<double> scores(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) scores[i] = map.apply(reps.row(i));
  return {lexicon_from_scores(e, scores, property, Orientation::AsIs), std::move(map)};
}

}  // namespace detail

/// Train Q on `dims`, build the output lexicon (oriented coordinate for a
/// single dimension, fitted linear map otherwise) and evaluate it on `gold`.
inline PipelineResult train_and_evaluate(const EmbeddingSet& e, const TrainingTable& table, const GoldList& gold,
                                         const PipelineSettings& settings, std::vector<std::size_t> dims = {0}) {
  TrainConfig cfg = settings.train;
  cfg.specs = {SubspaceSpec{settings.property, std::move(dims), settings.alpha}};
  const TrainResult trained = train(cfg, e, std::span<const TrainingTable>(&table, 1));

  PipelineResult out;
  out.cost_history = trained.cost_history;
  out.transform = TransformMatrix{trained.q, cfg.specs, {Orientation::AsIs}, "train_and_evaluate"};
  if (cfg.specs[0].size() == 1) {
    const Matrix reps = project(e, out.transform, settings.property);
    std::vector<double> scores(reps.values().begin(), reps.values().end());
    out.transform.orientations[0] = orient(scores, table);
    out.lexicon = emit_lexicon(e, out.transform, settings.property, out.transform.orientations[0]);
  } else {
    auto [lex, map] = detail::mapped_lexicon(e, subspace_rows(trained.q, cfg.specs[0]), table, settings.property);
    out.lexicon = std::move(lex);
    out.map = std::move(map);
  }
  out.report = evaluate(out.lexicon, gold, settings.variant);
  return out;
}

enum class SweepMethod { Ultradense, Pca, Random };

constexpr std::string_view to_string(SweepMethod m) {
  switch (m) {
    case SweepMethod::Ultradense: return "ultradense";
    case SweepMethod::Pca: return "pca";
    case SweepMethod::Random: return "random";
  }
  return "ultradense";
}

inline SweepMethod parse_sweep_method(std::string_view s) {
  for (SweepMethod m : {SweepMethod::Ultradense, SweepMethod::Pca, SweepMethod::Random})
    if (s == to_string(m)) return m;
  throw Error(ErrorKind::ConfigError, "unknown sweep method '" + std::string(s) + "'");
}

struct CurvePoint {
  std::size_t size = 0;
  double tau = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// tau of a subspace of each size, mapped to a scalar by a linear map fit on
/// the train split. Ultradense retrains Q with dims {0..size-1} per point.
inline std::vector<CurvePoint> sweep_subspace_size(const EmbeddingSet& e, const TrainingTable& table,
                                                   const GoldList& gold, std::span<const std::size_t> sizes,
                                                   SweepMethod method, const PipelineSettings& settings) {
  for (std::size_t s : sizes) {
    if (s == 0 || s > e.dim()) {
      throw Error(ErrorKind::InvalidDimension, "subspace size " + std::to_string(s) + " outside 1.." +
                                                   std::to_string(e.dim()));
    }
  }
  std::vector<CurvePoint> curve;
  for (std::size_t s : sizes) {
    Matrix projector;
    switch (method) {
      case SweepMethod::Ultradense: {
        TrainConfig cfg = settings.train;
        std::vector<std::size_t> dims(s);
        std::iota(dims.begin(), dims.end(), 0);
        cfg.specs = {SubspaceSpec{settings.property, dims, settings.alpha}};
        const TrainResult r = train(cfg, e, std::span<const TrainingTable>(&table, 1));
        projector = subspace_rows(r.q, cfg.specs[0]);
        break;
      }
      case SweepMethod::Pca: projector = pca_subspace(e, s); break;
      case SweepMethod::Random: projector = random_subspace(e.dim(), s); break;
    }
    const auto lex = detail::mapped_lexicon(e, projector, table, settings.property).first;
    curve.push_back({s, evaluate(lex, gold, settings.variant).tau});
  }
  return curve;
}

/// tau after training on balanced seeded subsamples of the train split; a
/// size equal to the whole train split uses it unchanged.
inline std::vector<CurvePoint> sweep_resource_size(const EmbeddingSet& e, const TrainingTable& table,
                                                   const GoldList& gold, std::span<const std::size_t> train_sizes,
                                                   std::uint64_t seed, const PipelineSettings& settings) {
  const std::size_t available = table.count(Split::Train);
  std::vector<CurvePoint> curve;
  for (std::size_t size : train_sizes) {
    if (size / 2 < 2) {
      throw Error(ErrorKind::MissingClass, "training size " + std::to_string(size) + " leaves fewer than 2 words per class");
    }
    const TrainingTable sub = size == available ? table : subsample_train(table, size, seed);
    curve.push_back({size, train_and_evaluate(e, sub, gold, settings).report.tau});
  }
  return curve;
}

/// "size<TAB>tau" rows.
inline void write_curve(std::ostream& out, std::span<const CurvePoint> curve) {
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\n", p.size, p.tau);
    out << buf;
  }
}

}  // namespace ultradense
