#pragma once

#include <string>

#include "hmoe/config.hpp"

namespace hmoe {

/// Run a full experiment from a resolved configuration: build or load the
/// dataset, split it, train, and write metrics.csv, summary.json, the
/// checkpoint, and the gate/encoder dumps into config.out_dir. Returns
/// the summary as a JSON string.
std::string cmd_train(const ExperimentConfig& config);

/// Load a checkpoint, evaluate a dataset CSV in the given inference mode,
/// print metrics, and write predictions.csv next to the dataset metrics.
/// Returns the metrics as a JSON string.
std::string cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
                     const std::string& mode, const std::string& out_dir);

/// Generate a dataset CSV for a task.
void cmd_gendata(const ExperimentConfig& config, const std::string& out_path);

}  // namespace hmoe
