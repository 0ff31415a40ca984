// Command-line front end: training runs, seed sweeps, evaluation of saved
// policies, the temperature-update fidelity table and bank export.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tgrpo/report.hpp"
#include "tgrpo/softmax_entropy.hpp"
#include "tgrpo/synthetic_env.hpp"
#include "tgrpo/trainer.hpp"

namespace fs = std::filesystem;
using namespace tgrpo;

namespace {

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> mode;
  std::optional<std::string> dynamic_rollout;
  std::optional<int> eval_samples;
  std::vector<int> k;
  std::string out;
  std::string policy_path;
};

fs::path default_out_dir() {
  if (const char* env = std::getenv("TGRPO_OUT_DIR"); env && *env) return env;
  return "runs";
}

TrainConfig resolve_config(const RunOptions& o) {
  TrainConfig c = o.config_path.empty() ? TrainConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.mode) c.mode = parse_mode(*o.mode);
  if (o.dynamic_rollout) c.dynamic_rollout = *o.dynamic_rollout == "on";
  if (o.eval_samples) c.eval_samples = *o.eval_samples;
  if (!o.k.empty()) c.eval_k = o.k;
  c.validate();
  return c;
}

fs::path out_dir(const RunOptions& o) { return o.out.empty() ? default_out_dir() : fs::path(o.out); }

std::string pass_line(const PassAtKTable& t) {
  std::ostringstream s;
  for (std::size_t i = 0; i < t.k_values.size(); ++i)
    s << (i ? "  " : "") << "pass@" << t.k_values[i] << " " << format_number(t.pass[i]);
  return s.str();
}

TrainResult train_one(const TrainConfig& config, const fs::path& dir,
                      const std::string& stem) {
  RunManifest manifest;
  manifest.config = config;
  manifest.started_at = utc_now();
  TrainHooks hooks;
  hooks.on_log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  TrainResult result = run(config, hooks);
  manifest.finished_at = utc_now();

  const fs::path jsonl = dir / (stem + ".jsonl");
  const fs::path csv = dir / (stem + ".csv");
  const fs::path policy = dir / (stem + "_policy.json");
  const fs::path summary = dir / (stem + "_summary.json");
  manifest.artifacts = {jsonl, csv, policy, summary};
  write_atomically(jsonl, trace_jsonl(result.trace));
  write_atomically(csv, trace_csv(result.trace));
  write_atomically(policy, policy_json(result.policy).dump() + '\n');
  write_atomically(summary, summary_json(manifest, result).dump(2) + '\n');
  return result;
}

int cmd_train(const RunOptions& o) {
  const TrainConfig config = resolve_config(o);
  const fs::path dir = out_dir(o);
  const TrainResult r = train_one(config, dir, "trace");
  std::cout << mode_name(config.mode) << " seed " << config.seed << ": " << r.t_max
            << " steps, H_init " << format_number(r.h_init.value_or(0.0)) << ", final "
            << format_number(r.trace.back().entropy) << "\n"
            << pass_line(r.evals.back()) << "\n"
            << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_sweep(const RunOptions& o) {
  const TrainConfig base = resolve_config(o);
  if (o.seeds.empty()) throw CLI::ValidationError("--seeds", "needs at least one seed");
  const fs::path dir = out_dir(o);
  std::vector<std::vector<TraceRecord>> traces;
  nlohmann::ordered_json finals = nlohmann::ordered_json::array();
  for (std::uint64_t seed : o.seeds) {
    TrainConfig c = base;
    c.seed = seed;
    const TrainResult r = train_one(c, dir, "trace_seed" + std::to_string(seed));
    std::cout << "seed " << seed << ": " << pass_line(r.evals.back()) << "\n";
    nlohmann::ordered_json f;
    f["seed"] = seed;
    f["final"] = pass_table_json(r.evals.back());
    finals.push_back(f);
    traces.push_back(r.trace);
  }
  write_atomically(dir / "aggregate.csv", aggregate_csv(traces));
  nlohmann::ordered_json doc;
  doc["mode"] = std::string(mode_name(base.mode));
  doc["seeds"] = o.seeds;
  doc["runs"] = finals;
  write_atomically(dir / "sweep_summary.json", doc.dump(2) + '\n');
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const RunOptions& o) {
  const TrainConfig config = resolve_config(o);
  const PolicyTable policy =
      policy_from_json(nlohmann::json::parse(read_file(o.policy_path)));
  const RunBanks banks = build_banks(config);
  if (policy.slots() != config.bank.num_contexts ||
      policy.length() != config.bank.answer_length ||
      policy.vocab() != config.bank.vocab_size)
    throw std::runtime_error("policy shape does not match the configured bank");
  const PassAtKTable t = evaluate(policy, banks.eval, config.eval_samples, config.eval_k,
                                  1.0, config.seed);
  std::cout << pass_line(t) << "\n";
  if (!o.out.empty()) write_atomically(fs::path(o.out) / "eval.json", pass_table_json(t).dump(2) + '\n');
  return 0;
}

int cmd_validate_appendix() {
  const std::vector<std::int64_t> vocabs = {1000, 32000, 152064};
  const std::vector<double> entropies = {0.05, 0.1, 0.2, 0.5};
  const std::vector<double> alphas = {0.90, 0.95, 1.05, 1.10};
  const auto rows = run_fidelity_sweep(vocabs, entropies, alphas);
  std::printf("%8s %6s %6s %10s %10s %10s %9s %9s\n", "V", "H0", "alpha", "tau_cf",
              "tau_bisect", "ratio", "error", "tau_rel");
  bool ok = true;
  for (const auto& r : rows) {
    std::printf("%8lld %6.2f %6.2f %10.6f %10.6f %10.6f %9.6f %9.6f\n",
                static_cast<long long>(r.vocab_size), r.base_entropy, r.alpha,
                r.tau_closed_form, r.tau_bisection, r.realized_ratio, r.ratio_error,
                r.tau_rel_error);
    ok = ok && r.ratio_error <= 0.05 && r.tau_rel_error <= 0.10;
  }
  if (!ok) {
    std::cerr << "error: a cell exceeds the ratio (0.05) or temperature (10%) tolerance\n";
    return 1;
  }
  return 0;
}

int cmd_bank(const RunOptions& o) {
  const TrainConfig config = resolve_config(o);
  const RunBanks banks = build_banks(config);
  const fs::path dir = out_dir(o);
  std::ostringstream train, eval;
  export_bank(banks.train, train);
  export_bank(banks.eval, eval);
  write_atomically(dir / "train_bank.jsonl", train.str());
  write_atomically(dir / "eval_bank.jsonl", eval.str());
  std::cout << "train " << banks.train.size() << " of " << config.bank.size
            << " questions after balancing, eval " << banks.eval.size() << "\n"
            << "wrote " << dir.string() << "\n";
  return 0;
}

void add_run_flags(CLI::App* cmd, RunOptions& o, bool with_seed) {
  cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  if (with_seed) cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--mode", o.mode, "grpo, grpo+er, grpo+ts, grpo+ts+an or dapo_filter");
  cmd->add_option("--dynamic-rollout", o.dynamic_rollout, "on or off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--eval-samples", o.eval_samples, "samples per evaluation question");
  cmd->add_option("--k", o.k, "pass@k values, e.g. 1,16")->delimiter(',');
  cmd->add_option("--out", o.out, "output directory (default $TGRPO_OUT_DIR or ./runs)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temperature-scheduled GRPO with dynamic rollout budgets on a synthetic task"};
  app.require_subcommand(1);
  RunOptions o;

  auto* train = app.add_subcommand("train", "run one training run");
  add_run_flags(train, o, true);
  auto* sweep = app.add_subcommand("sweep", "repeat a run over several seeds");
  add_run_flags(sweep, o, false);
  sweep->add_option("--seeds", o.seeds, "comma-separated seeds")->delimiter(',')->required();
  auto* eval = app.add_subcommand("eval", "evaluate a saved policy on the held-out bank");
  add_run_flags(eval, o, true);
  eval->add_option("--policy", o.policy_path, "policy file written by train")
      ->required()
      ->check(CLI::ExistingFile);
  auto* appendix = app.add_subcommand("validate-appendix",
                                      "closed-form temperature update vs bisection");
  auto* bank = app.add_subcommand("bank", "generate, balance and export question banks");
  bank->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  bank->add_option("--seed", o.seed, "master seed");
  bank->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    if (train->parsed()) return cmd_train(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (eval->parsed()) return cmd_eval(o);
    if (appendix->parsed()) return cmd_validate_appendix();
    if (bank->parsed()) return cmd_bank(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
