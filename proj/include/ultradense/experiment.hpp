#pragma once

// Flat "key = value" experiment configs and the end-to-end runs behind the
// command-line tool (train, sweep). Kept in the library so the runs can be
// tested without spawning processes.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ultradense/embeddings.hpp"
#include "ultradense/error.hpp"
#include "ultradense/evaluation.hpp"
#include "ultradense/lexicon.hpp"
#include "ultradense/objective.hpp"
#include "ultradense/projection.hpp"
#include "ultradense/trainer.hpp"

namespace ultradense {

/// Resource value that builds the frequency lexicon from embedding rank order.
inline constexpr std::string_view kFrequencyRankResource = "@rank";

struct PropertyConfig {
  Property property = Property::Sentiment;
  std::string resource;  // TSV path or kFrequencyRankResource
  LabelKind kind = LabelKind::Binary;
  double dead_zone = kDefaultDeadZone;
  std::vector<std::size_t> dims;
  double alpha = 0.4;
  std::string gold;  // optional TSV of held-out gold values
};

struct ExperimentConfig {
  std::string embeddings;
  EmbeddingFormat format = EmbeddingFormat::Text;
  std::optional<std::size_t> max_vocab;
  std::size_t top_k = kDefaultTopK;
  bool normalize = false;
  std::vector<PropertyConfig> properties;  // in property enum order
  FrequencyRanks frequency_ranks;
  double test_fraction = 0.1;
  std::uint64_t seed = 1;
  std::size_t iterations = 1000;
  std::size_t batch_size = 100;
  double lr0 = 5.0;
  double lr_decay = 0.99;
  bool deterministic = true;
  bool early_stop = false;
  std::string out_dir = ".";

  PropertyConfig* find(Property p) {
    for (auto& pc : properties)
      if (pc.property == p) return &pc;
    return nullptr;
  }
  const PropertyConfig* find(Property p) const { return const_cast<ExperimentConfig*>(this)->find(p); }
};

/// Zero-based default subspace assignment: sentiment {0}, concreteness {10},
/// frequency {20}, other {30}.
inline std::vector<std::size_t> default_dims(Property p) {
  switch (p) {
    case Property::Sentiment: return {0};
    case Property::Concreteness: return {10};
    case Property::Frequency: return {20};
    case Property::Other: return {30};
  }
  return {0};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::ConfigError, key + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

inline bool parse_bool(std::string_view text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(ErrorKind::ConfigError, key + ": expected true or false, got '" + std::string(text) + "'");
}

inline std::vector<std::size_t> parse_index_list(std::string_view text, const std::string& key) {
  std::vector<std::size_t> out;
  for (auto item : split_on(text, ',')) out.push_back(parse_number<std::size_t>(trim(item), key));
  return out;
}

inline std::string resolve(const std::filesystem::path& base, std::string_view value) {
  if (value.empty() || value.front() == '@') return std::string(value);
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal().string();
}

}  // namespace detail

/// Applies one key/value pair; `base` resolves relative paths.
inline void apply_setting(ExperimentConfig& cfg, std::string_view key_view, std::string_view value,
                          const std::filesystem::path& base = {}) {
  const std::string key(key_view);
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    const std::string field = key.substr(0, dot);
    const Property p = parse_property(std::string_view(key).substr(dot + 1));
    PropertyConfig* pc = cfg.find(p);
    if (pc == nullptr) {
      cfg.properties.push_back(PropertyConfig{p, {}, LabelKind::Binary, kDefaultDeadZone, default_dims(p), 0.4, {}});
      std::sort(cfg.properties.begin(), cfg.properties.end(),
                [](const auto& a, const auto& b) { return a.property < b.property; });
      pc = cfg.find(p);
    }
    if (field == "resource") pc->resource = detail::resolve(base, value);
    else if (field == "kind") {
      if (value == "binary") pc->kind = LabelKind::Binary;
      else if (value == "continuous") pc->kind = LabelKind::Continuous;
      else throw Error(ErrorKind::ConfigError, key + ": expected binary or continuous");
    } else if (field == "dims") pc->dims = detail::parse_index_list(value, key);
    else if (field == "alpha") pc->alpha = detail::parse_number<double>(value, key);
    else if (field == "dead_zone") pc->dead_zone = detail::parse_number<double>(value, key);
    else if (field == "gold") pc->gold = detail::resolve(base, value);
    else throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
    return;
  }

  if (key == "embeddings") cfg.embeddings = detail::resolve(base, value);
  else if (key == "embedding_format") {
    if (value == "text") cfg.format = EmbeddingFormat::Text;
    else if (value == "binary") cfg.format = EmbeddingFormat::Binary;
    else throw Error(ErrorKind::ConfigError, "embedding_format: expected text or binary");
  } else if (key == "max_vocab") cfg.max_vocab = detail::parse_number<std::size_t>(value, key);
  else if (key == "top_k") cfg.top_k = detail::parse_number<std::size_t>(value, key);
  else if (key == "normalize") cfg.normalize = detail::parse_bool(value, key);
  else if (key == "frequency_top") cfg.frequency_ranks.top = detail::parse_number<std::size_t>(value, key);
  else if (key == "frequency_low_start") cfg.frequency_ranks.low_start = detail::parse_number<std::size_t>(value, key);
  else if (key == "frequency_low_end") cfg.frequency_ranks.low_end = detail::parse_number<std::size_t>(value, key);
  else if (key == "test_fraction") cfg.test_fraction = detail::parse_number<double>(value, key);
  else if (key == "seed") cfg.seed = detail::parse_number<std::uint64_t>(value, key);
  else if (key == "iterations") cfg.iterations = detail::parse_number<std::size_t>(value, key);
  else if (key == "batch_size") cfg.batch_size = detail::parse_number<std::size_t>(value, key);
  else if (key == "lr0") cfg.lr0 = detail::parse_number<double>(value, key);
  else if (key == "lr_decay") cfg.lr_decay = detail::parse_number<double>(value, key);
  else if (key == "deterministic") cfg.deterministic = detail::parse_bool(value, key);
  else if (key == "early_stop") cfg.early_stop = detail::parse_bool(value, key);
  else if (key == "out_dir") cfg.out_dir = std::string(value);
  else throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& name = "<config>",
                                     const std::filesystem::path& base = {}) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError, name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(cfg, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)), base);
    } catch (const Error& e) {
      throw Error(e.kind(), name + ":" + std::to_string(line_no) + ": " + e.message());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
  return parse_config(in, path, std::filesystem::path(path).parent_path());
}

/// Checks referenced files exist and the subspace layout is consistent.
inline void validate(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.embeddings.empty()) throw Error(ErrorKind::ConfigError, "no embeddings configured");
  if (!fs::exists(cfg.embeddings)) throw Error(ErrorKind::IoError, "embedding file '" + cfg.embeddings + "' does not exist");
  if (cfg.properties.empty()) throw Error(ErrorKind::ConfigError, "no resource.<property> configured");
  std::vector<SubspaceSpec> specs;
  for (const auto& pc : cfg.properties) {
    const std::string name(to_string(pc.property));
    if (pc.resource.empty()) throw Error(ErrorKind::ConfigError, "resource." + name + " is not set");
    if (pc.resource == kFrequencyRankResource) {
      if (pc.property != Property::Frequency) {
        throw Error(ErrorKind::ConfigError, "resource." + name + ": @rank is only valid for frequency");
      }
    } else if (!fs::exists(pc.resource)) {
      throw Error(ErrorKind::IoError, "resource file '" + pc.resource + "' does not exist");
    }
    if (!pc.gold.empty() && !fs::exists(pc.gold)) {
      throw Error(ErrorKind::IoError, "gold file '" + pc.gold + "' does not exist");
    }
    if (!(pc.alpha >= 0.0 && pc.alpha <= 1.0)) throw Error(ErrorKind::ConfigError, "alpha." + name + " outside [0, 1]");
    specs.push_back({pc.property, pc.dims, pc.alpha});
  }
  require_disjoint(specs);
}

/// Normalised key = value listing, sorted, suitable as a provenance record.
inline std::string echo_config(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  kv["embeddings"] = cfg.embeddings;
  kv["embedding_format"] = cfg.format == EmbeddingFormat::Text ? "text" : "binary";
  if (cfg.max_vocab) kv["max_vocab"] = std::to_string(*cfg.max_vocab);
  kv["top_k"] = std::to_string(cfg.top_k);
  kv["normalize"] = cfg.normalize ? "true" : "false";
  kv["frequency_top"] = std::to_string(cfg.frequency_ranks.top);
  kv["frequency_low_start"] = std::to_string(cfg.frequency_ranks.low_start);
  kv["frequency_low_end"] = std::to_string(cfg.frequency_ranks.low_end);
  kv["test_fraction"] = num(cfg.test_fraction);
  kv["seed"] = std::to_string(cfg.seed);
  kv["iterations"] = std::to_string(cfg.iterations);
  kv["batch_size"] = std::to_string(cfg.batch_size);
  kv["lr0"] = num(cfg.lr0);
  kv["lr_decay"] = num(cfg.lr_decay);
  kv["deterministic"] = cfg.deterministic ? "true" : "false";
  kv["early_stop"] = cfg.early_stop ? "true" : "false";
  kv["out_dir"] = cfg.out_dir;
  for (const auto& pc : cfg.properties) {
    const std::string p(to_string(pc.property));
    kv["resource." + p] = pc.resource;
    kv["kind." + p] = pc.kind == LabelKind::Binary ? "binary" : "continuous";
    kv["dead_zone." + p] = num(pc.dead_zone);
    std::string dims;
    for (std::size_t k = 0; k < pc.dims.size(); ++k) dims += (k > 0 ? "," : "") + std::to_string(pc.dims[k]);
    kv["dims." + p] = dims;
    kv["alpha." + p] = num(pc.alpha);
    if (!pc.gold.empty()) kv["gold." + p] = pc.gold;
  }
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

inline TrainConfig make_train_config(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.batch_size = cfg.batch_size;
  t.lr0 = cfg.lr0;
  t.lr_decay = cfg.lr_decay;
  t.iterations = cfg.iterations;
  t.seed = cfg.seed;
  t.deterministic = cfg.deterministic;
  t.early_stop = cfg.early_stop;
  for (const auto& pc : cfg.properties) t.specs.push_back({pc.property, pc.dims, pc.alpha});
  return t;
}

/// Rethrows library errors with the pipeline stage prepended.
template <typename F>
auto in_stage(std::string_view stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + ": " + e.message());
  }
}

struct PreparedProperty {
  PropertyConfig config;
  TrainingTable table;  // indices into PreparedExperiment::training
  GoldList gold;
};

struct PreparedExperiment {
  EmbeddingSet embeddings;  // as loaded (optionally normalized)
  EmbeddingSet training;    // top-k prefix of `embeddings`
  std::vector<PreparedProperty> properties;

  const PreparedProperty& property(Property p) const {
    for (const auto& pp : properties)
      if (pp.config.property == p) return pp;
    throw Error(ErrorKind::UnknownProperty, "property '" + std::string(to_string(p)) + "' is not configured");
  }
};

/// Loads embeddings and resources, intersects with the top-k vocabulary and
/// splits each table. Gold values for evaluation come from gold.<property>
/// when set, else from the original (pre-binarization) labels of the test
/// split.
inline PreparedExperiment prepare(const ExperimentConfig& cfg) {
  validate(cfg);
  PreparedExperiment px;
  px.embeddings = in_stage("loading embeddings", [&] { return load_embeddings(cfg.embeddings, cfg.format, cfg.max_vocab); });
  if (cfg.normalize) px.embeddings = unit_normalize(px.embeddings);
  px.training = top_k_filter(px.embeddings, cfg.top_k);

  for (const auto& pc : cfg.properties) {
    const std::string stage = "preparing " + std::string(to_string(pc.property)) + " resource";
    in_stage(stage, [&] {
      LexiconResource raw = pc.resource == kFrequencyRankResource
                                ? frequency_lexicon(px.training, cfg.frequency_ranks)
                                : load_lexicon(pc.resource, pc.property, pc.kind);
      const LexiconResource binary = raw.kind == LabelKind::Binary ? raw : binarize(raw, pc.dead_zone);
      TrainingTable table = split(intersect(binary, px.training), cfg.test_fraction, cfg.seed);
      GoldList gold;
      if (!pc.gold.empty()) {
        gold = gold_from_resource(load_lexicon(pc.gold, pc.property, LabelKind::Continuous));
      } else {
        for (const auto& entry : table.entries) {
          if (entry.split != Split::Test) continue;
          const std::string& w = px.training.word(entry.index);
          gold.emplace_back(w, raw.entries.at(w));
        }
      }
      px.properties.push_back({pc, std::move(table), std::move(gold)});
    });
  }
  return px;
}

struct TrainArtifacts {
  std::filesystem::path transform;
  std::filesystem::path log;
  std::filesystem::path echo;
  std::vector<std::filesystem::path> gold;
  TrainResult result;
  TransformMatrix transform_matrix;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::out | std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw Error(ErrorKind::IoError, "write to '" + path.string() + "' failed");
}

/// Joint training of every configured subspace. Writes transform.txt,
/// train_log.tsv, config_echo.txt and <property>_gold.tsv into out_dir.
inline TrainArtifacts run_train(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const PreparedExperiment px = prepare(cfg);
  const TrainConfig tc = make_train_config(cfg);
  std::vector<TrainingTable> tables;
  for (const auto& pp : px.properties) tables.push_back(pp.table);

  TrainArtifacts art;
  art.result = in_stage("training", [&] { return train(tc, px.training, tables); });

  TransformMatrix t{art.result.q, tc.specs, {}, "seed=" + std::to_string(cfg.seed)};
  for (std::size_t i = 0; i < tc.specs.size(); ++i) {
    const Matrix p = subspace_rows(t.q, tc.specs[i]);
    // Orientation is defined on the first subspace coordinate.
    std::vector<double> scores(px.training.size());
    for (std::size_t w = 0; w < px.training.size(); ++w) scores[w] = dot(p.row(0), px.training.vector(w));
    t.orientations.push_back(orient(scores, tables[i]));
  }
  art.transform_matrix = t;

  in_stage("writing outputs", [&] {
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    art.transform = dir / "transform.txt";
    art.log = dir / "train_log.tsv";
    art.echo = dir / "config_echo.txt";
    save_transform(t, art.transform.string());
    write_training_log(art.result, art.log.string());
    write_text_file(art.echo, echo_config(cfg));
    for (const auto& pp : px.properties) {
      const fs::path g = dir / (std::string(to_string(pp.config.property)) + "_gold.tsv");
      std::string body;
      char buf[40];
      for (const auto& [token, value] : pp.gold) {
        std::snprintf(buf, sizeof buf, "%.17g", value);
        body += token + "\t" + buf + "\n";
      }
      write_text_file(g, body);
      art.gold.push_back(g);
    }
  });
  return art;
}

enum class SweepKind { Subspace, Resource };

inline std::vector<CurvePoint> run_sweep(const ExperimentConfig& cfg, SweepKind kind, Property property,
                                         std::span<const std::size_t> values, SweepMethod method,
                                         TauVariant variant = TauVariant::TauB) {
  const PreparedExperiment px = prepare(cfg);
  const PreparedProperty& pp = px.property(property);
  PipelineSettings settings;
  settings.train = make_train_config(cfg);
  settings.property = property;
  settings.alpha = pp.config.alpha;
  settings.variant = variant;
  return in_stage("sweep", [&] {
    return kind == SweepKind::Subspace
               ? sweep_subspace_size(px.training, pp.table, pp.gold, values, method, settings)
               : sweep_resource_size(px.training, pp.table, pp.gold, values, cfg.seed, settings);
  });
}

/// 0 ok, 2 input/IO, 3 configuration, 4 evaluation degeneracy, 5 numerical abort.
constexpr int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError:
    case ErrorKind::ParseError:
    case ErrorKind::DuplicateWord:
    case ErrorKind::InvalidValue:
    case ErrorKind::LabelDomainError:
      return 2;
    case ErrorKind::UndefinedCorrelation:
    case ErrorKind::DegenerateInput:
      return 4;
    case ErrorKind::DegenerateMatrix:
      return 5;
    default:
      return 3;
  }
}

}  // namespace ultradense
