// Command-line front end: train, lexicon, eval, sweep.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ultradense/embeddings.hpp"
#include "ultradense/error.hpp"
#include "ultradense/evaluation.hpp"
#include "ultradense/experiment.hpp"
#include "ultradense/projection.hpp"

namespace ud = ultradense;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> iterations;
  std::optional<std::string> out_dir;
  std::optional<double> alpha[4];
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_flag("--deterministic", o.deterministic, "Require reproducible training");
  cmd->add_option("--top-k", o.top_k, "Vocabulary prefix used for training");
  cmd->add_option("--iterations", o.iterations, "SGD iterations");
  cmd->add_option("--out-dir", o.out_dir, "Output directory");
  for (ud::Property p : {ud::Property::Sentiment, ud::Property::Concreteness, ud::Property::Frequency,
                         ud::Property::Other}) {
    cmd->add_option("--alpha-" + std::string(ud::to_string(p)), o.alpha[static_cast<int>(p)],
                    "Objective weight for the " + std::string(ud::to_string(p)) + " subspace")
        ->check(CLI::Range(0.0, 1.0));
  }
}

ud::ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
  ud::ExperimentConfig cfg = ud::load_config(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.deterministic) cfg.deterministic = true;
  if (o.top_k) cfg.top_k = *o.top_k;
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  for (int i = 0; i < 4; ++i) {
    if (!o.alpha[i]) continue;
    auto* pc = cfg.find(static_cast<ud::Property>(i));
    if (pc == nullptr) {
      throw ud::Error(ud::ErrorKind::ConfigError, "--alpha-" + std::string(ud::to_string(static_cast<ud::Property>(i))) +
                                                      " given but that property is not configured");
    }
    pc->alpha = *o.alpha[i];
  }
  return cfg;
}

std::vector<std::size_t> parse_values(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto item : ud::detail::split_on(text, ',')) {
    out.push_back(ud::detail::parse_number<std::size_t>(ud::detail::trim(item), "--values"));
  }
  return out;
}

ud::EmbeddingFormat parse_format(const std::string& s) {
  if (s == "text") return ud::EmbeddingFormat::Text;
  if (s == "binary") return ud::EmbeddingFormat::Binary;
  throw ud::Error(ud::ErrorKind::ConfigError, "unknown embedding format '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn orthogonal ultradense subspaces of word embeddings and build lexicons from them"};
  app.require_subcommand(1);

  Overrides train_ovr;
  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "Learn the orthogonal transform from a config file");
  train_cmd->add_option("--config", train_config, "Experiment config (key = value)")->required();
  add_overrides(train_cmd, train_ovr);

  std::string lex_transform, lex_embeddings, lex_format = "text", lex_property = "sentiment", lex_out;
  std::optional<std::size_t> lex_max_vocab;
  bool lex_minmax = false, lex_unit = false;
  auto* lex_cmd = app.add_subcommand("lexicon", "Score every embedding word on one learned subspace");
  lex_cmd->add_option("--transform", lex_transform, "Transform file written by 'train'")->required();
  lex_cmd->add_option("--embeddings", lex_embeddings, "word2vec embedding file")->required();
  lex_cmd->add_option("--format", lex_format, "text or binary")->check(CLI::IsMember({"text", "binary"}));
  lex_cmd->add_option("--max-vocab", lex_max_vocab, "Read only the first N words");
  lex_cmd->add_option("--property", lex_property, "Property subspace to score");
  lex_cmd->add_option("--out", lex_out, "Output lexicon TSV")->required();
  lex_cmd->add_flag("--normalize-scores", lex_minmax, "Rescale scores onto [-1, 1]");
  lex_cmd->add_flag("--unit-normalize", lex_unit, "Unit-normalize embeddings before projecting");

  std::string eval_lexicon, eval_gold, eval_variant = "tau_b", eval_property = "other", eval_method = "ultradense";
  auto* eval_cmd = app.add_subcommand("eval", "Kendall's tau of a lexicon against gold values");
  eval_cmd->add_option("--lexicon", eval_lexicon, "Output lexicon TSV")->required();
  eval_cmd->add_option("--gold", eval_gold, "Gold TSV (token<TAB>value)")->required();
  eval_cmd->add_option("--tau-variant", eval_variant, "tau_a or tau_b")->check(CLI::IsMember({"tau_a", "tau_b"}));
  eval_cmd->add_option("--property", eval_property, "Property name for the report row");
  eval_cmd->add_option("--method", eval_method, "Method name for the report row");

  Overrides sweep_ovr;
  std::string sweep_config, sweep_kind = "subspace", sweep_values, sweep_method = "ultradense",
                            sweep_property = "sentiment", sweep_variant = "tau_b", sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "tau as a function of subspace size or training resource size");
  sweep_cmd->add_option("--config", sweep_config, "Experiment config (key = value)")->required();
  sweep_cmd->add_option("--kind", sweep_kind, "subspace or resource")->check(CLI::IsMember({"subspace", "resource"}));
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated sizes")->required();
  sweep_cmd->add_option("--method", sweep_method, "ultradense, pca or random (subspace sweeps)")
      ->check(CLI::IsMember({"ultradense", "pca", "random"}));
  sweep_cmd->add_option("--property", sweep_property, "Property to sweep");
  sweep_cmd->add_option("--tau-variant", sweep_variant, "tau_a or tau_b")->check(CLI::IsMember({"tau_a", "tau_b"}));
  sweep_cmd->add_option("--out", sweep_out, "Curve TSV (default: stdout)");
  add_overrides(sweep_cmd, sweep_ovr);

  CLI11_PARSE(app, argc, argv);

  const char* command = app.get_subcommands().front()->get_name().c_str();
  try {
    if (*train_cmd) {
      const auto cfg = load_with_overrides(train_config, train_ovr);
      const auto art = ud::run_train(cfg);
      std::printf("wrote %s %s %s\n", art.transform.c_str(), art.log.c_str(), art.echo.c_str());
      std::printf("final cost %.6f after %zu iterations (%.2f s)\n", art.result.cost_history.back(),
                  art.result.cost_history.size(), art.result.wall_time.count());
    } else if (*lex_cmd) {
      const auto property = ud::parse_property(lex_property);
      const auto t = ud::in_stage("loading transform", [&] { return ud::load_transform(lex_transform); });
      t.spec_index(property);
      auto e = ud::in_stage("loading embeddings",
                            [&] { return ud::load_embeddings(lex_embeddings, parse_format(lex_format), lex_max_vocab); });
      if (lex_unit) e = ud::unit_normalize(e);
      auto lex = ud::emit_lexicon(e, t, property, t.orientation(property));
      if (lex_minmax) lex = ud::min_max_normalized(lex);
      ud::save_output_lexicon(lex, lex_out);
      std::printf("wrote %zu entries to %s\n", lex.size(), lex_out.c_str());
    } else if (*eval_cmd) {
      const auto property = ud::parse_property(eval_property);
      const auto lex = ud::in_stage("loading lexicon", [&] { return ud::load_output_lexicon(eval_lexicon, property); });
      const auto gold = ud::in_stage("loading gold", [&] {
        return ud::gold_from_resource(ud::load_lexicon(eval_gold, property, ud::LabelKind::Continuous));
      });
      auto report = ud::in_stage("evaluating", [&] { return ud::evaluate(lex, gold, ud::parse_tau_variant(eval_variant)); });
      report.method = eval_method;
      std::printf("%s\n", ud::format_report(report).c_str());
    } else if (*sweep_cmd) {
      const auto cfg = load_with_overrides(sweep_config, sweep_ovr);
      const auto values = parse_values(sweep_values);
      const auto curve = ud::run_sweep(cfg, sweep_kind == "subspace" ? ud::SweepKind::Subspace : ud::SweepKind::Resource,
                                       ud::parse_property(sweep_property), values,
                                       ud::parse_sweep_method(sweep_method), ud::parse_tau_variant(sweep_variant));
      if (sweep_out.empty()) {
        ud::write_curve(std::cout, curve);
      } else {
        std::ofstream out(sweep_out, std::ios::out | std::ios::binary);
        if (!out) throw ud::Error(ud::ErrorKind::IoError, "cannot open '" + sweep_out + "' for writing");
        ud::write_curve(out, curve);
      }
    }
  } catch (const ud::Error& e) {
    std::fprintf(stderr, "ultradense %s: %s\n", command, e.what());
    return ud::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ultradense %s: %s\n", command, e.what());
    return 2;
  }
  return 0;
}
