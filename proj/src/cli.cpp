#include "spred/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "spred/binary_io.hpp"
#include "spred/checkpoint.hpp"
#include "spred/config.hpp"
#include "spred/errors.hpp"

namespace spred {
namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> ablations;
  std::vector<std::string> overrides;
  bool dump_features = false;
  std::string data;
  std::string checkpoint;
};

void configure_logging() {
  auto logger = spdlog::get("spred");
  if (!logger) {
    logger = spdlog::stderr_color_mt("spred");
    logger->set_pattern("[%l] %v");
  }
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("SPRED_LOG_LEVEL");
  spdlog::set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::info);
}

void apply_ablation(Ablations& ab, const std::string& name) {
  if (name == "no-dkcp") {
    ab.no_dkcp = true;
  } else if (name == "no-npl") {
    ab.no_npl = true;
  } else if (name == "no-ls") {
    ab.no_ls = true;
  } else if (name == "no-danet") {
    ab.no_danet = true;
  } else if (name == "labeled-only") {
    ab.labeled_only = true;
  } else {
    throw ConfigError("unknown ablation '" + name + "' (expected no-dkcp, no-npl, no-ls, no-danet or labeled-only)");
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  for (const auto& s : g.overrides) apply_override(cfg, s);
  if (g.seed) cfg.pipeline.seed = *g.seed;
  if (!g.out.empty()) cfg.out = g.out;
  for (const auto& a : g.ablations) apply_ablation(cfg.pipeline.ablations, a);
  if (g.dump_features) cfg.dump_features = true;
  cfg.validate();
  return cfg;
}

std::string run_id(const std::string& command, const RunConfig& cfg, const GlobalOptions& g) {
  RunConfig keyed = cfg;
  keyed.out.clear();
  const std::string key = command + '\n' + render_config(keyed) + '\n' + g.data + '\n' + g.checkpoint;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(io::fnv1a(key)));
  return command + "-s" + std::to_string(cfg.seed()) + "-" + std::string(hash, 8);
}

fs::path prepare_run_dir(const std::string& command, const RunConfig& cfg, const GlobalOptions& g) {
  const fs::path dir = cfg.out / run_id(command, cfg, g);
  fs::create_directories(dir);
  std::ofstream(dir / "config.ini") << render_config(cfg);
  return dir;
}

Stream load_stream(const RunConfig& cfg, const GlobalOptions& g) {
  if (!g.data.empty()) return read_stream(g.data);
  return generate_stream(cfg.stream_config());
}

std::vector<DomainResult> flatten(std::span<const StageEval> evals) {
  std::vector<DomainResult> rows;
  for (const auto& ev : evals) rows.insert(rows.end(), ev.domains.begin(), ev.domains.end());
  return rows;
}

nlohmann::json summary_json(const Summary& s) {
  return {{"seen_avg_map", s.seen_avg_map},
          {"seen_avg_rank1", s.seen_avg_rank1},
          {"unseen_avg_map", s.unseen_avg_map},
          {"unseen_avg_rank1", s.unseen_avg_rank1},
          {"seen_domains", s.seen_domains},
          {"unseen_domains", s.unseen_domains}};
}

void print_table(std::ostream& out, const StageEval& ev) {
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-7s %-7s %8s %8s %8s\n", "stage", "domain", "split", "mAP", "R@1", "queries");
  out << line;
  for (const auto& d : ev.domains) {
    std::snprintf(line, sizeof line, "%-6d %-7d %-7s %8.4f %8.4f %8zu\n", ev.stage, d.domain,
                  d.seen ? "seen" : "unseen", d.retrieval.mAP, d.retrieval.rank1, d.retrieval.n_queries);
    out << line;
  }
  std::snprintf(line, sizeof line, "Seen-Avg   mAP %.4f  R@1 %.4f\n", ev.summary.seen_avg_map, ev.summary.seen_avg_rank1);
  out << line;
  if (ev.summary.unseen_domains > 0) {
    std::snprintf(line, sizeof line, "UnSeen-Avg mAP %.4f  R@1 %.4f\n", ev.summary.unseen_avg_map,
                  ev.summary.unseen_avg_rank1);
    out << line;
  }
}

void dump_features(const fs::path& path, const Mlp& model, const Stream& stream, int seen_stages) {
  Matrix features;
  std::vector<FeatureDumpEntry> entries;
  auto add = [&](const std::vector<Observation>& obs, int split) {
    for (const auto& o : obs) {
      features.append_row(encode(model, o));
      entries.push_back({o.domain, o.identity, o.camera, split});
    }
  };
  for (int s = 0; s < seen_stages; ++s) {
    const auto& ds = stream.seen[static_cast<std::size_t>(s)];
    add(ds.train, 0);
    add(ds.test.query, 1);
    add(ds.test.gallery, 2);
  }
  for (const auto& u : stream.unseen) {
    add(u.test.query, 1);
    add(u.test.gallery, 2);
  }
  write_feature_dump(path, features, entries);
}

int cmd_print_config(const GlobalOptions& g, std::ostream& out) {
  out << render_config(resolve_config(g));
  return 0;
}

int cmd_gen(const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const fs::path dir = prepare_run_dir("gen", cfg, g);
  write_stream(generate_stream(cfg.stream_config()), dir);
  out << dir.string() << '\n';
  return 0;
}

int cmd_train(const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const Stream stream = load_stream(cfg, g);
  const fs::path dir = prepare_run_dir("train", cfg, g);
  const std::uint64_t hash = config_hash(cfg);

  const LifelongResult result = run_lifelong(cfg.pipeline, stream, [&](const TrainState& s, const StageEval&) {
    save_checkpoint(dir / ("stage_" + std::to_string(s.stage) + ".ckpt"), {s.stage, hash, s.model, *s.bank, s.danet});
  });
  write_metrics_csv(dir / "metrics.csv", result.metrics);
  write_results_csv(dir / "results.csv", flatten(result.metrics.evaluations));

  const StageEval& last = result.metrics.evaluations.back();
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& ev : result.metrics.evaluations) {
    nlohmann::json row = summary_json(ev.summary);
    row["stage"] = ev.stage;
    stages.push_back(row);
  }
  std::vector<std::string> notes = result.metrics.warnings;
  const nlohmann::json summary = {{"run_id", dir.filename().string()},
                                  {"config_hash", hash},
                                  {"stages", stream.seen.size()},
                                  {"final", summary_json(last.summary)},
                                  {"per_stage", stages},
                                  {"notes", notes}};
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  if (cfg.dump_features) dump_features(dir / "features.bin", result.state.model, stream, result.state.stage);

  print_table(out, last);
  out << "run directory: " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const GlobalOptions& g, std::ostream& out) {
  if (g.checkpoint.empty()) throw ConfigError("eval requires --checkpoint");
  const RunConfig cfg = resolve_config(g);
  const Checkpoint ckpt = load_checkpoint(g.checkpoint);
  const Stream stream = load_stream(cfg, g);
  if (ckpt.model.input_dim() != stream.grid.size()) {
    throw std::invalid_argument("checkpoint expects inputs of width " + std::to_string(ckpt.model.input_dim()) +
                                " but the data has width " + std::to_string(stream.grid.size()));
  }
  if (ckpt.stage < 1 || static_cast<std::size_t>(ckpt.stage) > stream.seen.size()) {
    throw std::invalid_argument("checkpoint stage " + std::to_string(ckpt.stage) + " does not fit a stream of " +
                                std::to_string(stream.seen.size()) + " stages");
  }
  const fs::path dir = prepare_run_dir("eval", cfg, g);
  const StageEval ev = evaluate_stream(ckpt.model, stream, ckpt.stage);
  write_results_csv(dir / "results.csv", ev.domains);
  nlohmann::json summary = {{"checkpoint", g.checkpoint}, {"stage", ckpt.stage}, {"final", summary_json(ev.summary)}};
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  if (cfg.dump_features) dump_features(dir / "features.bin", ckpt.model, stream, ckpt.stage);
  print_table(out, ev);
  out << "run directory: " << dir.string() << '\n';
  return 0;
}

int cmd_sweep(const GlobalOptions& g, const std::string& key, const std::vector<std::string>& values,
              std::ostream& out) {
  const RunConfig base = resolve_config(g);
  const Stream stream = load_stream(base, g);
  GlobalOptions tagged = g;
  tagged.data += "|" + key;
  for (const auto& v : values) tagged.data += "," + v;
  const fs::path dir = prepare_run_dir("sweep", base, tagged);

  std::ofstream csv(dir / "sweep.csv", std::ios::binary);
  csv << "key,value,seen_avg_map,seen_avg_rank1,unseen_avg_map,unseen_avg_rank1\n";
  for (const auto& v : values) {
    RunConfig cfg = base;
    set_config_value(cfg, key, v);
    cfg.validate();
    const LifelongResult r = run_lifelong(cfg.pipeline, stream);
    const Summary& s = r.metrics.evaluations.back().summary;
    char line[256];
    std::snprintf(line, sizeof line, "%s,%s,%.10f,%.10f,%.10f,%.10f\n", key.c_str(), v.c_str(), s.seen_avg_map,
                  s.seen_avg_rank1, s.unseen_avg_map, s.unseen_avg_rank1);
    csv << line;
    out << line;
  }
  out << "run directory: " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Semi-supervised lifelong re-identification on synthetic streams"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "INI config file (defaults apply to missing keys)");
  app.add_option("--seed", g.seed, "Seed for data generation and training");
  app.add_option("--out", g.out, "Output root; each run writes into a run-id subfolder");
  app.add_option("--ablate", g.ablations, "no-dkcp | no-npl | no-ls | no-danet | labeled-only (repeatable)");
  app.add_option("--set", g.overrides, "Override one key, e.g. hyperparams.alpha=2 (repeatable)");
  app.add_flag("--dump-features", g.dump_features, "Write binary feature dumps of the test splits");
  app.add_option("--data", g.data, "Dataset directory written by `gen`; generated from the config when omitted");
  app.add_option("--checkpoint", g.checkpoint, "Checkpoint file for `eval`");

  auto* print = app.add_subcommand("print-config", "Print the effective configuration");
  auto* gen = app.add_subcommand("gen", "Generate the synthetic stream");
  auto* train = app.add_subcommand("train", "Run every stage and write checkpoints and metrics");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the stream's test splits");
  auto* sweep = app.add_subcommand("sweep", "Train once per value of one config key");
  std::string sweep_key;
  std::vector<std::string> sweep_values;
  sweep->add_option("--key", sweep_key, "Dotted key, e.g. hyperparams.alpha")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*print) return cmd_print_config(g, out);
    if (*gen) return cmd_gen(g, out);
    if (*train) return cmd_train(g, out);
    if (*eval) return cmd_eval(g, out);
    return cmd_sweep(g, sweep_key, sweep_values, out);
  } catch (const ConfigError& e) {
    err << "spred " << name << ": config error: " << e.what() << '\n';
    return 2;
  } catch (const io::FormatError& e) {
    err << "spred " << name << ": format error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "spred " << name << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace spred
