// orthotune CLI: invariant checks, toy fine-tuning runs, energy reports and
// parameter accounting. Exit codes: 0 ok, 1 property/training failure,
// 2 usage/config error.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "orthotune/cli.hpp"

int main(int argc, char** argv) {
  using namespace orthotune;

  CLI::App app{"block-orthogonal adapter toolkit"};
  app.require_subcommand(1);

  selfcheck::CheckOptions check_opts;
  CLI::App* check = app.add_subcommand("check", "run the invariant suite");
  check->add_option("--filter", check_opts.filter, "run a single family");
  check->add_option("--inject-fault", check_opts.inject_fault,
                    "corrupt a computation to validate failure detection");
  check->add_option("--seed", check_opts.seed, "suite seed");

  std::string config_path, report_path = "report.json", checkpoint_path = "checkpoint.bin";
  std::optional<std::string> resume_path;
  CLI::App* train_cmd = app.add_subcommand("train", "fine-tune the toy dual tower");
  train_cmd->add_option("config", config_path, "run config JSON")->required();
  train_cmd->add_option("--report", report_path, "report output path");
  train_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint output path");
  train_cmd->add_option("--resume", resume_path, "checkpoint to continue from");

  std::string energy_config;
  std::optional<std::string> energy_ckpt;
  CLI::App* energy = app.add_subcommand("energy-report", "hyperspherical energy accounting");
  energy->add_option("config", energy_config, "run config JSON")->required();
  energy->add_option("checkpoint", energy_ckpt, "optional checkpoint to evaluate");

  std::string count_config;
  CLI::App* count = app.add_subcommand("param-count", "closed-form parameter accounting");
  count->add_option("config", count_config, "run config JSON")->required();

  app.add_subcommand("tprod-selftest", "tensor-product equivalence checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    if (check->parsed()) return cli::cmd_check(check_opts, std::cout);
    if (train_cmd->parsed())
      return cli::cmd_train(config_path, report_path, checkpoint_path, resume_path, std::cout);
    if (energy->parsed()) return cli::cmd_energy_report(energy_config, energy_ckpt, std::cout);
    if (count->parsed()) return cli::cmd_param_count(count_config, std::cout);
    return cli::cmd_tprod_selftest(std::cout);
  } catch (const contract_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitFailure;
  }
}
