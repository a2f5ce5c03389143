#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmoe/errors.hpp"
#include "hmoe/experiment.hpp"

namespace {

// Shared configuration flags; explicit flags win over --set overrides,
// which win over the config file.
struct ConfigArgs {
  std::string config_file;
  std::string task;
  std::string variant;
  std::string seed;
  std::string out;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value config file");
    cmd->add_option("--task", task, "toy_regression or synthetic_dg");
    cmd->add_option("--variant", variant, "DL, ND or MU");
    cmd->add_option("--seed", seed, "experiment seed");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--set", overrides, "per-key override, key=value (repeatable)");
  }

  hmoe::ExperimentConfig resolve() const {
    hmoe::KvMap kv;
    if (!config_file.empty()) kv = hmoe::read_config_file(config_file);
    hmoe::apply_overrides(kv, overrides);
    if (!task.empty()) kv["task"] = task;
    if (!variant.empty()) kv["variant"] = variant;
    if (!seed.empty()) kv["seed"] = seed;
    if (!out.empty()) kv["out_dir"] = out;
    return hmoe::resolve_config(kv);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypernetwork mixture-of-experts experiment runner"};
  app.require_subcommand(1);

  ConfigArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model and emit run artifacts");
  train_args.attach(train);

  ConfigArgs gen_args;
  std::string gen_out = "dataset.csv";
  CLI::App* gendata = app.add_subcommand("gendata", "Write a dataset CSV");
  gen_args.attach(gendata);
  gendata->add_option("--out-file", gen_out, "destination CSV path");

  std::string eval_checkpoint, eval_data, eval_mode = "MIX", eval_out = "eval_out";
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset CSV");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
  eval->add_option("--data", eval_data, "dataset CSV path")->required();
  eval->add_option("--mode", eval_mode, "MIX or OOD");
  eval->add_option("--out", eval_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const std::string summary = hmoe::cmd_train(train_args.resolve());
      std::cout << summary << std::endl;
    } else if (gendata->parsed()) {
      hmoe::cmd_gendata(gen_args.resolve(), gen_out);
      std::cout << "wrote " << gen_out << std::endl;
    } else if (eval->parsed()) {
      hmoe::cmd_eval(eval_checkpoint, eval_data, eval_mode, eval_out);
    }
  } catch (const hmoe::Error& err) {
    std::cerr << "error: " << err.what() << std::endl;
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << std::endl;
    return 1;
  }
  return 0;
}
