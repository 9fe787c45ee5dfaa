#pragma once

// Lexicon resources (word -> label tables) and the index-resolved training
// tables built by intersecting them with an embedding vocabulary.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ultradense/embeddings.hpp"
#include "ultradense/error.hpp"

namespace ultradense {

enum class Property { Sentiment, Concreteness, Frequency, Other };
enum class LabelKind { Binary, Continuous };

constexpr std::string_view to_string(Property p) {
  switch (p) {
    case Property::Sentiment: return "sentiment";
    case Property::Concreteness: return "concreteness";
    case Property::Frequency: return "frequency";
    case Property::Other: return "other";
  }
  return "other";
}

inline Property parse_property(std::string_view name) {
  for (Property p : {Property::Sentiment, Property::Concreteness, Property::Frequency, Property::Other}) {
    if (name == to_string(p)) return p;
  }
  throw Error(ErrorKind::UnknownProperty, "unknown property '" + std::string(name) + "'");
}

struct LexiconResource {
  std::map<std::string, double> entries;  // byte-wise token order
  LabelKind kind = LabelKind::Binary;
  Property property = Property::Other;
  std::string name;

  std::size_t size() const noexcept { return entries.size(); }
};

enum class Split : std::uint8_t { Train, Test };

struct TableEntry {
  std::size_t index;  // into the EmbeddingSet the table was built against
  int label;          // -1 or +1
  Split split = Split::Train;

  friend bool operator==(const TableEntry&, const TableEntry&) = default;
};

struct TrainingTable {
  std::vector<TableEntry> entries;
  std::size_t dropped = 0;  // resource tokens absent from the vocabulary

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [s](const TableEntry& e) { return e.split == s; }));
  }

  std::vector<TableEntry> select(Split s) const {
    std::vector<TableEntry> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [s](const TableEntry& e) { return e.split == s; });
    return out;
  }
};

inline void require_both_classes(const std::vector<TableEntry>& entries, std::string_view what) {
  const bool pos = std::any_of(entries.begin(), entries.end(), [](const TableEntry& e) { return e.label > 0; });
  const bool neg = std::any_of(entries.begin(), entries.end(), [](const TableEntry& e) { return e.label < 0; });
  if (!pos || !neg) {
    throw Error(ErrorKind::MissingClass, std::string(what) + " lacks " + (pos ? "negative" : "positive") +
                                             " entries");
  }
}

/// Reads "token<TAB>label" lines; '#' lines and blank lines are skipped.
inline LexiconResource load_lexicon(const std::string& path, Property property, LabelKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading");
  LexiconResource r{{}, kind, property, path};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorKind::ParseError, where + ": expected 'token<TAB>label'");
    }
    const std::string_view label_text = std::string_view(line).substr(tab + 1);
    double label = 0.0;
    auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size() || !std::isfinite(label)) {
      throw Error(ErrorKind::ParseError, where + ": cannot parse label '" + std::string(label_text) + "'");
    }
    if (kind == LabelKind::Binary && label != 1.0 && label != -1.0) {
      throw Error(ErrorKind::LabelDomainError, where + ": binary resource label must be -1 or 1, got " +
                                                   std::string(label_text));
    }
    std::string token = line.substr(0, tab);
    if (!r.entries.emplace(token, label).second) {
      throw Error(ErrorKind::DuplicateWord, where + ": token '" + token + "' appears more than once");
    }
  }
  return r;
}

inline constexpr double kDefaultDeadZone = 0.5;

/// Drops every entry with |label| <= dead_zone and maps the rest to their sign.
inline LexiconResource binarize(const LexiconResource& r, double dead_zone = kDefaultDeadZone) {
  LexiconResource out{{}, LabelKind::Binary, r.property, r.name};
  for (const auto& [token, label] : r.entries) {
    if (std::abs(label) <= dead_zone) continue;
    out.entries.emplace(token, label > 0 ? 1.0 : -1.0);
  }
  if (out.entries.empty()) {
    throw Error(ErrorKind::EmptyResource, "no entry of '" + r.name + "' lies outside the dead zone");
  }
  return out;
}

struct FrequencyRanks {
  std::size_t top = 2000;
  std::size_t low_start = 20000;
  std::size_t low_end = 22000;
};

/// +1 for the most frequent words, -1 for a band of lower-ranked words, taken
/// from the embedding file order.
inline LexiconResource frequency_lexicon(const EmbeddingSet& e, FrequencyRanks ranks = {}) {
  if (ranks.top > ranks.low_start || ranks.low_start >= ranks.low_end) {
    throw Error(ErrorKind::ConfigError, "frequency ranks must satisfy top <= low_start < low_end");
  }
  if (e.size() < ranks.low_end) {
    throw Error(ErrorKind::InsufficientVocabulary, "frequency lexicon needs " + std::to_string(ranks.low_end) +
                                                       " words, embedding set has " + std::to_string(e.size()));
  }
  LexiconResource r{{}, LabelKind::Binary, Property::Frequency, "frequency-rank"};
  for (std::size_t i = 0; i < ranks.top; ++i) r.entries.emplace(e.word(i), 1.0);
  for (std::size_t i = ranks.low_start; i < ranks.low_end; ++i) r.entries.emplace(e.word(i), -1.0);
  return r;
}

/// Entries are ordered by embedding index, i.e. by frequency rank.
inline TrainingTable intersect(const LexiconResource& r, const EmbeddingSet& e) {
  if (r.kind != LabelKind::Binary) {
    throw Error(ErrorKind::LabelDomainError, "intersect needs a binary resource; binarize '" + r.name + "' first");
  }
  TrainingTable t;
  for (const auto& [token, label] : r.entries) {
    if (auto idx = e.find(token)) {
      t.entries.push_back({*idx, label > 0 ? 1 : -1, Split::Train});
    } else {
      ++t.dropped;
    }
  }
  if (t.entries.empty()) {
    throw Error(ErrorKind::EmptyIntersection, "no token of '" + r.name + "' is in the embedding vocabulary");
  }
  std::sort(t.entries.begin(), t.entries.end(),
            [](const TableEntry& a, const TableEntry& b) { return a.index < b.index; });
  require_both_classes(t.entries, "intersection of '" + r.name + "' with the vocabulary");
  return t;
}

/// Tags ceil(test_fraction * n) entries as test after a seeded shuffle.
inline TrainingTable split(const TrainingTable& t, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::ConfigError, "test fraction must lie in (0, 1)");
  }
  const std::size_t n = t.entries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-12));

  TrainingTable out = t;
  for (auto& e : out.entries) e.split = Split::Train;
  for (std::size_t k = 0; k < n_test && k < n; ++k) out.entries[order[k]].split = Split::Test;
  require_both_classes(out.select(Split::Train), "train split");
  return out;
}

/// Balanced seeded subsample of the train split (ceil(size/2) positive,
/// floor(size/2) negative); test entries are kept as they are.
inline TrainingTable subsample_train(const TrainingTable& t, std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    if (t.entries[i].split != Split::Train) continue;
    (t.entries[i].label > 0 ? pos : neg).push_back(i);
  }
  const std::size_t want_pos = (size + 1) / 2;
  const std::size_t want_neg = size / 2;
  if (want_pos < 1 || want_neg < 1) {
    throw Error(ErrorKind::MissingClass, "a subsample of " + std::to_string(size) + " cannot hold both classes");
  }
  if (pos.size() < want_pos || neg.size() < want_neg) {
    throw Error(ErrorKind::MissingClass, "train split has " + std::to_string(pos.size()) + " positive and " +
                                             std::to_string(neg.size()) + " negative entries; a balanced subsample of " +
                                             std::to_string(size) + " needs " + std::to_string(want_pos) + " and " +
                                             std::to_string(want_neg));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::unordered_set<std::size_t> keep(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(want_pos));
  keep.insert(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(want_neg));

  TrainingTable out;
  out.dropped = t.dropped;
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    if (t.entries[i].split == Split::Test || keep.contains(i)) out.entries.push_back(t.entries[i]);
  }
  return out;
}

}  // namespace ultradense
