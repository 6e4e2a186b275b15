#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

namespace otm::cli {

// Each command validates its config, writes its outputs into `out` and
// returns the effective config (defaults filled in), which is also written
// next to the outputs and is itself a valid config for the same command.

/// train.jsonl, test.jsonl (when n_test > 0) and manifest.json.
nlohmann::json synth_gen(const nlohmann::json& config, const std::filesystem::path& out);

/// checkpoint.json, tree.json, train_log.csv and train_config.json.
nlohmann::json train(const nlohmann::json& config, const std::filesystem::path& out);

/// metrics.csv and summary.json.
nlohmann::json evaluate(const nlohmann::json& config, const std::filesystem::path& out);

/// toy.csv and toy_config.json.
nlohmann::json toy(const nlohmann::json& config, const std::filesystem::path& out);

/// level_distribution.csv and stats_config.json.
nlohmann::json stats(const nlohmann::json& config, const std::filesystem::path& out);

/// Full command line: parses flags, dispatches, and maps failures to exit
/// codes (0 ok, 2 config, 3 data, 4 divergence).
int main(int argc, char** argv);

}  // namespace otm::cli
