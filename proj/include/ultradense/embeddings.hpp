#pragma once

// Word embedding sets in the word2vec text and binary formats. Word order is
// file order, which for word2vec output is descending corpus frequency; the
// frequency lexicon and the top-k filter rely on it.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ultradense/error.hpp"
#include "ultradense/linalg.hpp"

namespace ultradense {

enum class EmbeddingFormat { Text, Binary };

class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  EmbeddingSet(std::size_t dim, std::vector<std::string> words, std::vector<double> values,
               std::string source = {})
      : dim_(dim), words_(std::move(words)), values_(std::move(values)), source_(std::move(source)) {
    if (dim_ == 0) throw Error(ErrorKind::InvalidDimension, "embedding dimension must be positive");
    if (values_.size() != words_.size() * dim_) {
      throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(words_.size() * dim_) +
                                                    " values, got " + std::to_string(values_.size()));
    }
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], i).second) {
        throw Error(ErrorKind::DuplicateWord, "token '" + words_[i] + "' appears more than once");
      }
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidValue, "non-finite embedding value");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  const std::string& source() const noexcept { return source_; }

  std::span<const double> vector(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> values() const noexcept { return values_; }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> values_;
  std::string source_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::size_t parse_count(std::string_view text, const std::string& what, const std::string& where) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::ParseError, where + ": cannot parse " + what + " from '" + std::string(text) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::pair<std::size_t, std::size_t> parse_header(std::string_view line, const std::string& path) {
  const auto fields = split_ws(line);
  if (fields.size() != 2) {
    throw Error(ErrorKind::ParseError, path + ":1: header must be '<vocab_count> <dim>'");
  }
  const std::size_t count = parse_count(fields[0], "vocabulary size", path + ":1");
  const std::size_t dim = parse_count(fields[1], "dimension", path + ":1");
  if (dim == 0) throw Error(ErrorKind::ParseError, path + ":1: dimension must be positive");
  return {count, dim};
}

inline std::ifstream open_input(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading");
  return in;
}

struct EmbeddingBuilder {
  std::size_t dim;
  std::vector<std::string> words;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> seen;

  void add(std::string token, const std::string& where) {
    if (!seen.emplace(token, words.size()).second) {
      throw Error(ErrorKind::DuplicateWord, where + ": token '" + token + "' appears more than once");
    }
    words.push_back(std::move(token));
  }

  void add_value(double v, const std::string& where) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidValue, where + ": non-finite value");
    values.push_back(v);
  }
};

inline EmbeddingSet load_text(const std::string& path, std::optional<std::size_t> max_vocab) {
  auto in = open_input(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path + ":1: missing header");
  const auto [count, dim] = parse_header(line, path);
  const std::size_t wanted = max_vocab ? std::min(*max_vocab, count) : count;

  EmbeddingBuilder b{dim, {}, {}, {}};
  b.words.reserve(wanted);
  b.values.reserve(wanted * dim);
  std::size_t line_no = 1;
  while (b.words.size() < wanted) {
    if (!std::getline(in, line)) {
      throw Error(ErrorKind::ParseError, path + ": header announces " + std::to_string(count) +
                                             " words, file ends after " + std::to_string(b.words.size()));
    }
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1) {
      throw Error(ErrorKind::ParseError, where + ": expected " + std::to_string(dim) + " values, found " +
                                             std::to_string(fields.size() - 1));
    }
    b.add(std::string(fields[0]), where);
    for (std::size_t k = 1; k <= dim; ++k) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(fields[k].data(), fields[k].data() + fields[k].size(), v);
      if (ec != std::errc() || ptr != fields[k].data() + fields[k].size()) {
        throw Error(ErrorKind::ParseError, where + ": cannot parse value '" + std::string(fields[k]) + "'");
      }
      b.add_value(v, where);
    }
  }
  return EmbeddingSet(dim, std::move(b.words), std::move(b.values), path);
}

inline EmbeddingSet load_binary(const std::string& path, std::optional<std::size_t> max_vocab) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path + ": missing header");
  const auto [count, dim] = parse_header(line, path);
  const std::size_t wanted = max_vocab ? std::min(*max_vocab, count) : count;

  EmbeddingBuilder b{dim, {}, {}, {}};
  b.words.reserve(wanted);
  b.values.reserve(wanted * dim);
  std::vector<char> raw(dim * sizeof(float));
  while (b.words.size() < wanted) {
    const std::string where = path + ": offset " + std::to_string(static_cast<long long>(in.tellg()));
    std::string token;
    char c = 0;
    while (in.get(c)) {
      if (c == ' ') break;
      // word2vec's own writer ends each record with '\n'; tolerate it.
      if (c == '\n' && token.empty()) continue;
      token.push_back(c);
    }
    if (!in || token.empty()) {
      throw Error(ErrorKind::ParseError, where + ": truncated record after " + std::to_string(b.words.size()) +
                                             " of " + std::to_string(count) + " words");
    }
    if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
      throw Error(ErrorKind::ParseError, where + ": truncated vector for '" + token + "'");
    }
    b.add(std::move(token), where);
    for (std::size_t k = 0; k < dim; ++k) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, raw.data() + k * sizeof(float), sizeof bits);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      b.add_value(static_cast<double>(std::bit_cast<float>(bits)), where);
    }
  }
  return EmbeddingSet(dim, std::move(b.words), std::move(b.values), path);
}

}  // namespace detail

inline EmbeddingSet load_embeddings(const std::string& path, EmbeddingFormat format,
                                    std::optional<std::size_t> max_vocab = std::nullopt) {
  return format == EmbeddingFormat::Text ? detail::load_text(path, max_vocab)
                                         : detail::load_binary(path, max_vocab);
}

inline constexpr std::size_t kDefaultTopK = 80000;

inline EmbeddingSet top_k_filter(const EmbeddingSet& e, std::size_t k = kDefaultTopK) {
  if (k == 0) throw Error(ErrorKind::InvalidDimension, "top-k filter needs k >= 1");
  const std::size_t n = std::min(k, e.size());
  std::vector<std::string> words(e.words().begin(), e.words().begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> values(e.values().begin(), e.values().begin() + static_cast<std::ptrdiff_t>(n * e.dim()));
  return EmbeddingSet(e.dim(), std::move(words), std::move(values), e.source());
}

/// Every vector replaced by Q·e_w; words and order unchanged.
inline EmbeddingSet transform_embeddings(const EmbeddingSet& e, const Matrix& q) {
  if (!q.is_square() || q.rows() != e.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "transform is " + std::to_string(q.rows()) + "x" +
                                                  std::to_string(q.cols()) + ", embeddings have dim " +
                                                  std::to_string(e.dim()));
  }
  std::vector<double> values;
  values.reserve(e.values().size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto y = multiply(q, e.vector(i));
    values.insert(values.end(), y.begin(), y.end());
  }
  return EmbeddingSet(e.dim(), e.words(), std::move(values), e.source());
}

/// Scales every non-zero vector to unit length. Off by default; the CLI
/// exposes it as an explicit option.
inline EmbeddingSet unit_normalize(const EmbeddingSet& e) {
  std::vector<double> values(e.values().begin(), e.values().end());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double n = norm2(e.vector(i));
    if (n == 0.0) continue;
    for (std::size_t k = 0; k < e.dim(); ++k) values[i * e.dim() + k] /= n;
  }
  return EmbeddingSet(e.dim(), e.words(), std::move(values), e.source());
}

inline void save_embeddings(const EmbeddingSet& e, const std::string& path, EmbeddingFormat format) {
  std::ofstream out(path, format == EmbeddingFormat::Binary ? std::ios::out | std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  out << e.size() << ' ' << e.dim() << '\n';
  if (format == EmbeddingFormat::Text) {
    char buf[64];
    for (std::size_t i = 0; i < e.size(); ++i) {
      out << e.word(i);
      for (double v : e.vector(i)) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
      }
      out << '\n';
    }
  } else {
    std::vector<char> raw(e.dim() * sizeof(float));
    for (std::size_t i = 0; i < e.size(); ++i) {
      out << e.word(i) << ' ';
      const auto vec = e.vector(i);
      for (std::size_t k = 0; k < e.dim(); ++k) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(vec[k]));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        std::memcpy(raw.data() + k * sizeof(float), &bits, sizeof bits);
      }
      out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    }
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

}  // namespace ultradense
