// Command-line front end: train the SARSA mode-selection agent, run the
// static baselines, sweep the cache size, or evaluate saved weights.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "xhaul/sim.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string profile = "desk";
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file (overrides the profile)");
  cmd->add_option("--profile", args.profile, "Parameter profile")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "Master seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

xhaul::SystemConfig resolve_config(const CommonArgs& args) {
  xhaul::SystemConfig cfg = args.profile == "paper" ? xhaul::paper_profile()
                                                    : xhaul::desk_profile();
  if (!args.config_path.empty()) cfg = xhaul::load_config_file(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  xhaul::validate(cfg);
  return cfg;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

void print_eval(const std::string& label, const xhaul::EvalResult& ev) {
  std::cout << label << ": mean latency " << ev.mean << " symbols (90% CI [" << ev.ci_lo
            << ", " << ev.ci_hi << "], " << ev.episode_means.size() << " episodes)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-slot X-haul delivery-mode simulator"};
  app.require_subcommand(1);

  CommonArgs train_args, baseline_args, sweep_args, eval_args;
  std::string baseline_kind = "greedy";
  std::string schemes_csv = "rl,greedy,fronthaul,backhaul,offline";
  std::string weights_path;

  auto* train = app.add_subcommand("train", "Train the SARSA agent and evaluate it");
  add_common(train, train_args);

  auto* baseline = app.add_subcommand("baseline", "Evaluate a non-learning policy");
  add_common(baseline, baseline_args);
  baseline->add_option("--baseline", baseline_kind, "Policy to run")
      ->check(CLI::IsMember({"greedy", "fronthaul", "backhaul", "offline"}));

  auto* sweep = app.add_subcommand("sweep", "Average latency vs cache size per scheme");
  add_common(sweep, sweep_args);
  sweep->add_option("--schemes", schemes_csv, "Comma-separated scheme list");

  auto* eval = app.add_subcommand("eval", "Evaluate saved agent weights");
  add_common(eval, eval_args);
  eval->add_option("--weights", weights_path, "weights.json from a train run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = resolve_config(train_args);
      ensure_dir(train_args.out_dir);
      xhaul::LatencyMemo memo;
      auto result = xhaul::run_training(cfg, &memo);
      auto ev = xhaul::evaluate(cfg, xhaul::PolicyKind::rl, &result.agent, &memo);
      xhaul::write_slot_csv(join(train_args.out_dir, "train_slots.csv"), result.logs);
      xhaul::write_learning_curve_csv(join(train_args.out_dir, "learning_curve.csv"),
                                      result.episode_mean_latency);
      xhaul::write_weights_json(join(train_args.out_dir, "weights.json"), result.agent);
      xhaul::write_slot_csv(join(train_args.out_dir, "eval_slots.csv"), ev.logs);
      xhaul::write_summary_json(join(train_args.out_dir, "summary.json"), cfg, "train", &ev,
                                nullptr);
      print_eval("trained policy", ev);
    } else if (baseline->parsed()) {
      auto cfg = resolve_config(baseline_args);
      cfg.baseline = baseline_kind;
      ensure_dir(baseline_args.out_dir);
      auto ev = xhaul::evaluate(cfg, xhaul::policy_from_string(baseline_kind), nullptr);
      xhaul::write_slot_csv(join(baseline_args.out_dir, "eval_slots.csv"), ev.logs);
      xhaul::write_summary_json(join(baseline_args.out_dir, "summary.json"), cfg,
                                "baseline:" + baseline_kind, &ev, nullptr);
      print_eval(baseline_kind, ev);
    } else if (sweep->parsed()) {
      const auto cfg = resolve_config(sweep_args);
      ensure_dir(sweep_args.out_dir);
      std::vector<std::string> schemes;
      for (size_t pos = 0; pos < schemes_csv.size();) {
        size_t next = schemes_csv.find(',', pos);
        if (next == std::string::npos) next = schemes_csv.size();
        if (next > pos) schemes.push_back(schemes_csv.substr(pos, next - pos));
        pos = next + 1;
      }
      for (const auto& s : schemes) xhaul::policy_from_string(s);  // fail fast
      auto rows = xhaul::run_sweep(cfg, schemes);
      xhaul::write_sweep_csv(join(sweep_args.out_dir, "sweep.csv"), rows);
      xhaul::write_summary_json(join(sweep_args.out_dir, "summary.json"), cfg, "sweep",
                                nullptr, &rows);
      for (const auto& r : rows)
        std::cout << r.scheme << " cache=" << r.cache_capacity << " mean=" << r.mean
                  << " CI=[" << r.ci_lo << ", " << r.ci_hi << "]\n";
    } else if (eval->parsed()) {
      const auto cfg = resolve_config(eval_args);
      ensure_dir(eval_args.out_dir);
      auto agent = xhaul::load_weights_json(weights_path);
      auto ev = xhaul::evaluate(cfg, xhaul::PolicyKind::rl, &agent);
      xhaul::write_slot_csv(join(eval_args.out_dir, "eval_slots.csv"), ev.logs);
      xhaul::write_summary_json(join(eval_args.out_dir, "summary.json"), cfg, "eval", &ev,
                                nullptr);
      print_eval("saved policy", ev);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
