#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "egdiff/config.hpp"
#include "egdiff/io.hpp"
#include "egdiff/prior.hpp"
#include "egdiff/runner.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitTrainingDivergence = 3;
constexpr int kExitIoError = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration (TOML)")
      ->required();
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "Override the config seed");
}

egdiff::RunConfig load(const CommonArgs& args, const std::string& verb) {
  egdiff::RunConfig cfg = egdiff::RunConfig::from_file(args.config_path, args.seed);
  if (cfg.kind != verb) {
    throw egdiff::ConfigError("config kind '" + cfg.kind +
                              "' does not match the '" + verb + "' command");
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-guided diffusion sampling toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* train_prior = app.add_subcommand("train-prior", "Train a diffusion prior");
  CLI::App* train_guidance =
      app.add_subcommand("train-guidance", "Train an energy guidance model");
  CLI::App* sample_cmd =
      app.add_subcommand("sample", "Sample from a trained prior with guidance");
  CLI::App* compare2d =
      app.add_subcommand("compare2d", "Compare guidance methods on a 2-D benchmark");
  CLI::App* qgpo = app.add_subcommand("qgpo", "Run the offline RL pipeline");
  CLI::App* oracle_grid =
      app.add_subcommand("oracle-grid", "Evaluate the exact oracle on a grid");
  for (CLI::App* cmd : {train_prior, train_guidance, sample_cmd, compare2d, qgpo,
                        oracle_grid}) {
    add_common(cmd, args);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_prior->parsed()) {
      egdiff::run_train_prior(load(args, "prior"), args.out_dir);
    } else if (train_guidance->parsed()) {
      egdiff::run_train_guidance(load(args, "guidance"), args.out_dir);
    } else if (sample_cmd->parsed()) {
      egdiff::run_sample(load(args, "sample"), args.out_dir);
    } else if (compare2d->parsed()) {
      egdiff::run_compare2d(load(args, "compare2d"), args.out_dir);
    } else if (qgpo->parsed()) {
      egdiff::run_qgpo(load(args, "qgpo"), args.out_dir);
    } else if (oracle_grid->parsed()) {
      egdiff::run_oracle_grid(load(args, "oracle-grid"), args.out_dir);
    }
  } catch (const egdiff::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const egdiff::TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitTrainingDivergence;
  } catch (const egdiff::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
