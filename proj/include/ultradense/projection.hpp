#pragma once

// Ultradense representations u_w = P Q e_w, their sign calibration, the
// linear map from a multi-dimensional subspace to a scalar scale, and the
// output lexicons built from them.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ultradense/embeddings.hpp"
#include "ultradense/error.hpp"
#include "ultradense/lexicon.hpp"
#include "ultradense/linalg.hpp"
#include "ultradense/objective.hpp"

namespace ultradense {

enum class Orientation { AsIs, Flipped };

constexpr std::string_view to_string(Orientation o) { return o == Orientation::AsIs ? "as-is" : "flipped"; }

constexpr double sign_of(Orientation o) { return o == Orientation::AsIs ? 1.0 : -1.0; }

struct TransformMatrix {
  Matrix q;
  std::vector<SubspaceSpec> specs;
  std::vector<Orientation> orientations;  // parallel to specs
  std::string provenance;

  std::size_t dim() const noexcept { return q.rows(); }

  std::size_t spec_index(Property p) const {
    for (std::size_t i = 0; i < specs.size(); ++i)
      if (specs[i].property == p) return i;
    throw Error(ErrorKind::UnknownProperty,
                "transform has no subspace for property '" + std::string(to_string(p)) + "'");
  }
  const SubspaceSpec& spec(Property p) const { return specs[spec_index(p)]; }
  Orientation orientation(Property p) const { return orientations[spec_index(p)]; }
};

inline void validate(const TransformMatrix& t) {
  if (!t.q.is_square()) throw Error(ErrorKind::InvalidMatrix, "transform matrix must be square");
  if (orthogonality_error(t.q) > 1e-8) throw Error(ErrorKind::InvalidMatrix, "transform matrix is not orthogonal");
  if (t.orientations.size() != t.specs.size()) {
    throw Error(ErrorKind::InvalidMatrix, "one orientation per subspace required");
  }
  for (const auto& s : t.specs) validate_spec(s, t.dim());
  require_disjoint(t.specs);
}

/// Rows `spec.dims` of Q: the d*×d map e_w -> u_w.
inline Matrix subspace_rows(const Matrix& q, const SubspaceSpec& spec) {
  Matrix p(spec.dims.size(), q.cols());
  for (std::size_t k = 0; k < spec.dims.size(); ++k) {
    const auto src = q.row(spec.dims[k]);
    std::copy(src.begin(), src.end(), p.row(k).begin());
  }
  return p;
}

/// Projects every embedding through a d_sub×d map; row i is word i.
inline Matrix project_with(const EmbeddingSet& e, const Matrix& projector) {
  if (projector.cols() != e.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "projector has " + std::to_string(projector.cols()) +
                                                  " columns, embeddings have dim " + std::to_string(e.dim()));
  }
  if (e.size() == 0) throw Error(ErrorKind::InvalidDimension, "empty embedding set");
  Matrix out(e.size(), projector.rows());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto x = e.vector(i);
    auto row = out.row(i);
    for (std::size_t k = 0; k < projector.rows(); ++k) row[k] = dot(projector.row(k), x);
  }
  return out;
}

inline Matrix project(const EmbeddingSet& e, const TransformMatrix& t, Property property) {
  const SubspaceSpec& spec = t.spec(property);
  if (t.dim() != e.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "transform dim " + std::to_string(t.dim()) +
                                                  " vs embedding dim " + std::to_string(e.dim()));
  }
  return project_with(e, subspace_rows(t.q, spec));
}

/// Flipped iff the positive train words score lower on average than the
/// negative ones. `scores` is indexed like the embedding set.
inline Orientation orient(std::span<const double> scores, const TrainingTable& table) {
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (const auto& entry : table.entries) {
    if (entry.split != Split::Train) continue;
    if (entry.index >= scores.size()) {
      throw Error(ErrorKind::DimensionMismatch, "table index outside the score list");
    }
    if (entry.label > 0) {
      pos_sum += scores[entry.index];
      ++pos_n;
    } else {
      neg_sum += scores[entry.index];
      ++neg_n;
    }
  }
  if (pos_n == 0 || neg_n == 0) throw Error(ErrorKind::MissingClass, "orientation needs both classes in train");
  const double pos_mean = pos_sum / static_cast<double>(pos_n);
  const double neg_mean = neg_sum / static_cast<double>(neg_n);
  return pos_mean < neg_mean ? Orientation::Flipped : Orientation::AsIs;
}

struct LinearMap {
  std::vector<double> weights;
  double bias = 0.0;
  bool rank_deficient = false;

  double apply(std::span<const double> u) const { return dot(weights, u) + bias; }
};

/// Least-squares fit of w·u + b ≈ label. Features are centred first, so a
/// rank-deficient design yields the minimum-norm weights with b absorbing the
/// label mean.
inline LinearMap fit_linear_map(const Matrix& reps, std::span<const double> labels) {
  const std::size_t n = reps.rows();
  const std::size_t p = reps.cols();
  if (n != labels.size()) throw Error(ErrorKind::DimensionMismatch, "one label per representation required");
  if (n < p + 1) {
    throw Error(ErrorKind::InvalidDimension, "fitting a " + std::to_string(p) + "-dimensional map needs at least " +
                                                 std::to_string(p + 1) + " points, got " + std::to_string(n));
  }
  std::vector<double> mean(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) mean[j] += reps(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  const double label_mean = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n);

  Matrix centred(n, p);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) centred(i, j) = reps(i, j) - mean[j];
    target[i] = labels[i] - label_mean;
  }
  const auto sol = least_squares(centred, target);
  LinearMap map{sol.w, label_mean - dot(sol.w, mean), sol.rank < p};
  return map;
}

/// Word scores sorted descending; ties broken by token byte order.
class OutputLexicon {
 public:
  OutputLexicon() = default;

  OutputLexicon(std::vector<std::pair<std::string, double>> entries, Property property,
                Orientation orientation = Orientation::AsIs)
      : entries_(std::move(entries)), property_(property), orientation_(orientation) {
    for (const auto& [token, score] : entries_) {
      if (!std::isfinite(score)) throw Error(ErrorKind::InvalidValue, "non-finite score for '" + token + "'");
    }
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i].first, i).second) {
        throw Error(ErrorKind::DuplicateWord, "token '" + entries_[i].first + "' appears more than once");
      }
    }
  }

  const std::vector<std::pair<std::string, double>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  Property property() const noexcept { return property_; }
  Orientation orientation() const noexcept { return orientation_; }

  std::optional<double> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].second;
  }

 private:
  std::vector<std::pair<std::string, double>> entries_;
  Property property_ = Property::Other;
  Orientation orientation_ = Orientation::AsIs;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Stored score, or the neutral 0.0 for out-of-vocabulary tokens.
inline double score_word(const OutputLexicon& lex, std::string_view token) { return lex.find(token).value_or(0.0); }

inline OutputLexicon lexicon_from_scores(const EmbeddingSet& e, std::span<const double> scores, Property property,
                                         Orientation orientation) {
  if (scores.size() != e.size()) throw Error(ErrorKind::DimensionMismatch, "one score per word required");
  std::vector<std::pair<std::string, double>> entries;
  entries.reserve(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) entries.emplace_back(e.word(i), scores[i]);
  return OutputLexicon(std::move(entries), property, orientation);
}

/// Scores every embedding word: the oriented subspace coordinate when d* = 1,
/// otherwise the oriented output of `map`.
inline OutputLexicon emit_lexicon(const EmbeddingSet& e, const TransformMatrix& t, Property property,
                                  Orientation orientation, const std::optional<LinearMap>& map = std::nullopt) {
  const SubspaceSpec& spec = t.spec(property);
  if (spec.size() > 1 && !map) {
    throw Error(ErrorKind::NeedsLinearMap, std::string(to_string(property)) + " subspace has " +
                                               std::to_string(spec.size()) + " dimensions; supply a linear map");
  }
  if (map && map->weights.size() != spec.size()) {
    throw Error(ErrorKind::DimensionMismatch, "linear map width does not match the subspace");
  }
  const Matrix reps = project(e, t, property);
  const double sign = sign_of(orientation);
  std::vector<double> scores(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) scores[i] = sign * (map ? map->apply(reps.row(i)) : reps(i, 0));
  return lexicon_from_scores(e, scores, property, orientation);
}

/// Affine rescaling of all scores onto [-1, 1]; ranking is unchanged.
inline OutputLexicon min_max_normalized(const OutputLexicon& lex) {
  if (lex.size() == 0) return lex;
  const double hi = lex.entries().front().second;
  const double lo = lex.entries().back().second;
  std::vector<std::pair<std::string, double>> entries = lex.entries();
  for (auto& [token, score] : entries) score = hi > lo ? 2.0 * (score - lo) / (hi - lo) - 1.0 : 0.0;
  return OutputLexicon(std::move(entries), lex.property(), lex.orientation());
}

// ---------------------------------------------------------------------------
// Files

/// "token<TAB>score" with 6 significant digits, in lexicon order.
inline void save_output_lexicon(const OutputLexicon& lex, const std::string& path) {
  std::ofstream out(path, std::ios::out | std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  char buf[64];
  for (const auto& [token, score] : lex.entries()) {
    std::snprintf(buf, sizeof buf, "%.6g", score);
    out << token << '\t' << buf << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

inline OutputLexicon load_output_lexicon(const std::string& path, Property property = Property::Other) {
  const LexiconResource r = load_lexicon(path, property, LabelKind::Continuous);
  std::vector<std::pair<std::string, double>> entries(r.entries.begin(), r.entries.end());
  return OutputLexicon(std::move(entries), property);
}

inline constexpr std::string_view kTransformMagic = "ULTRADENSE 1";

inline void save_transform(const TransformMatrix& t, const std::string& path) {
  validate(t);
  std::ofstream out(path, std::ios::out | std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  out << kTransformMagic << '\n' << t.dim() << '\n';
  for (std::size_t i = 0; i < t.specs.size(); ++i) {
    if (i > 0) out << ';';
    out << to_string(t.specs[i].property) << ':';
    for (std::size_t k = 0; k < t.specs[i].dims.size(); ++k) out << (k > 0 ? "," : "") << t.specs[i].dims[k];
  }
  out << '\n';
  for (std::size_t i = 0; i < t.specs.size(); ++i) {
    out << (i > 0 ? ";" : "") << to_string(t.specs[i].property) << ':' << to_string(t.orientations[i]);
  }
  out << '\n';
  char buf[40];
  for (std::size_t r = 0; r < t.dim(); ++r) {
    for (std::size_t c = 0; c < t.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", t.q(r, c));
      out << (c > 0 ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

namespace detail {

inline std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Subspace weights are not stored in the file; loaded specs carry alpha = 0.5.
inline TransformMatrix load_transform(const std::string& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading");
  auto fail = [&](std::size_t line, const std::string& msg) -> Error {
    return Error(ErrorKind::ParseError, path + ":" + std::to_string(line) + ": " + msg);
  };
  std::string line;
  if (!std::getline(in, line) || line != kTransformMagic) throw fail(1, "missing 'ULTRADENSE 1' header");
  if (!std::getline(in, line)) throw fail(2, "missing dimension");
  const std::size_t d = detail::parse_count(line, "dimension", path + ":2");
  if (d == 0) throw fail(2, "dimension must be positive");

  TransformMatrix t;
  if (!std::getline(in, line)) throw fail(3, "missing subspace dimensions");
  for (auto item : detail::split_on(line, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw fail(3, "expected 'property:idx,idx'");
    SubspaceSpec spec{parse_property(item.substr(0, colon)), {}, 0.5};
    for (auto idx : detail::split_on(item.substr(colon + 1), ',')) {
      spec.dims.push_back(detail::parse_count(idx, "dimension index", path + ":3"));
    }
    t.specs.push_back(std::move(spec));
  }
  if (!std::getline(in, line)) throw fail(4, "missing orientation flags");
  t.orientations.assign(t.specs.size(), Orientation::AsIs);
  for (auto item : detail::split_on(line, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw fail(4, "expected 'property:as-is|flipped'");
    const Property p = parse_property(item.substr(0, colon));
    const auto flag = item.substr(colon + 1);
    if (flag != "as-is" && flag != "flipped") throw fail(4, "unknown orientation '" + std::string(flag) + "'");
    t.orientations.at(t.spec_index(p)) = flag == "as-is" ? Orientation::AsIs : Orientation::Flipped;
  }

  std::vector<double> values;
  values.reserve(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    if (!std::getline(in, line)) throw fail(5 + r, "missing matrix row");
    const auto fields = detail::split_ws(line);
    if (fields.size() != d) throw fail(5 + r, "expected " + std::to_string(d) + " values");
    for (auto f : fields) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw fail(5 + r, "cannot parse value '" + std::string(f) + "'");
      }
      values.push_back(v);
    }
  }
  t.q = Matrix(d, d, std::move(values));
  t.provenance = path;
  validate(t);
  return t;
}

}  // namespace ultradense
