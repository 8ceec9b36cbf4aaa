// Command-line front end for the experiment pipeline.
//
// Exit codes: 0 success, 2 bad configuration or flags, 3 data or file
// problems, 4 violated cross-check invariant, 1 anything else.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "eegnet/experiment.hpp"
#include "eegnet/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args->seed, "master seed (overrides the config)");
  cmd->add_option("--out", args->out, "output directory (overrides the config)");
  cmd->add_flag("--deterministic", args->deterministic,
                "single-threaded bitwise-reproducible mode");
  cmd->add_option("--threads", args->threads, "worker threads for fold execution")
      ->check(CLI::PositiveNumber);
}

eegnet::ExperimentConfig resolve(const CommonArgs& args) {
  eegnet::ExperimentConfig cfg = eegnet::load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out.empty()) cfg.out = args.out;
  if (args.deterministic) cfg.deterministic = true;
  if (args.threads) cfg.threads = *args.threads;
  return cfg;
}

void print_bundle(const eegnet::RunBundle& b) {
  const char* metric = eegnet::metric_name(b.metric);
  for (const auto& f : b.folds) {
    std::cout << "  fold " << f.fold << ": best epoch " << f.report.best_epoch
              << ", val " << metric << " " << f.report.best_val_metric
              << ", test " << metric << " " << f.test_metric << "\n";
  }
  std::cout << b.label << ": test " << metric << " " << b.test_summary.mean
            << " +/- " << b.test_summary.stderr_value << " over "
            << b.folds.size() << " folds\n";
}

int run_verb(const std::string& verb, const CommonArgs& args,
             const std::string& bundle_a, const std::string& bundle_b,
             std::optional<double> q_flag, bool dependent_flag,
             const std::string& inspect_target) {
  using namespace eegnet;
  if (verb == "inspect") {
    std::cout << inspect_path(inspect_target);
    return 0;
  }
  if (verb == "compare") {
    double q = q_flag.value_or(0.05);
    const CompareReport rep =
        cmd_compare(bundle_a, bundle_b, q, dependent_flag,
                    args.out.empty() ? std::string(".") : args.out);
    for (const auto& row : rep.rows) {
      std::cout << row.label << ": mean diff " << row.mean_diff << ", p "
                << row.p << ", adjusted " << row.p_adjusted
                << (row.rejected ? " (significant)" : "") << "\n";
    }
    std::cout << rep.rows.size() << " comparisons at q " << rep.q
              << (rep.dependent ? " (dependence-adjusted)" : "") << "\n";
    return 0;
  }

  ExperimentConfig cfg = resolve(args);
  if (verb == "run") {
    const RunBundle b = cmd_run(cfg);
    print_bundle(b);
    std::cout << "wrote " << cfg.out << " (fingerprint " << b.fingerprint << ")\n";
  } else if (verb == "sweep") {
    const auto bundles = cmd_sweep(cfg);
    for (const auto& b : bundles) {
      std::cout << b.label << ": test " << metric_name(b.metric) << " "
                << b.test_summary.mean << " +/- " << b.test_summary.stderr_value
                << "\n";
    }
    std::cout << bundles.size() << " configurations, "
              << bundles.front().param_total << " parameters each; wrote "
              << cfg.out << "\n";
  } else if (verb == "ablation") {
    const auto bundles = cmd_ablation(cfg);
    for (const auto& b : bundles) {
      const auto& last = b.folds.front().report.history.back();
      std::cout << b.label << ": final val loss " << last.val_loss
                << ", test " << metric_name(b.metric) << " "
                << b.test_summary.mean << "\n";
    }
    std::cout << "wrote " << cfg.out << "\n";
  } else if (verb == "learn-curve") {
    const auto points = cmd_learning_curve(cfg);
    for (const auto& p : points) {
      std::cout << "k " << p.k << ": " << metric_name(cfg.metric) << " "
                << p.summary.mean << " +/- " << p.summary.stderr_value << " ("
                << p.summary.n << " reps)\n";
    }
    std::cout << "wrote " << cfg.out << "\n";
  } else if (verb == "gen-synth") {
    const std::string manifest = cmd_gen_synth(cfg);
    std::cout << "wrote " << manifest << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG classification experiments: training, sweeps, and statistics"};
  app.set_version_flag("--version", std::string(eegnet::kToolName) + " " +
                                        eegnet::kToolVersion);
  app.require_subcommand(1);

  CommonArgs common;
  std::string bundle_a, bundle_b, inspect_target;
  std::optional<double> q_flag;
  bool dependent_flag = false;

  for (const char* verb : {"run", "sweep", "ablation", "learn-curve", "gen-synth"}) {
    CLI::App* cmd = app.add_subcommand(verb);
    add_common(cmd, &common);
  }
  app.get_subcommand("run")->description("train and score one model over the fold plan");
  app.get_subcommand("sweep")->description("run all 12 kernel configurations and rank them");
  app.get_subcommand("ablation")->description("run the five architecture variants");
  app.get_subcommand("learn-curve")->description("score growing training-set subsamples");
  app.get_subcommand("gen-synth")->description("write a synthetic dataset and its manifest");

  CLI::App* compare = app.add_subcommand("compare", "paired statistics for two bundles");
  compare->add_option("bundle_a", bundle_a, "first bundle directory")->required();
  compare->add_option("bundle_b", bundle_b, "second bundle directory")->required();
  compare->add_option("--q", q_flag, "false discovery rate (default 0.05)");
  compare->add_flag("--dependent-fdr", dependent_flag,
                    "use the dependence-adjusted correction");
  compare->add_option("--out", common.out, "directory for stats.csv (default .)");

  CLI::App* inspect = app.add_subcommand("inspect", "describe a dataset, model, or bundle");
  inspect->add_option("path", inspect_target, "file or bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    return run_verb(verb, common, bundle_a, bundle_b, q_flag, dependent_flag,
                    inspect_target);
  } catch (const eegnet::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const eegnet::InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const eegnet::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const eegnet::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const eegnet::MetricError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
