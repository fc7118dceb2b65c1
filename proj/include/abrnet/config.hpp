#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abrnet/datagen.hpp"
#include "abrnet/models.hpp"
#include "abrnet/trainer.hpp"

namespace abrnet::config {

using nlohmann::json;

// JSON converters. Parsers are strict: unknown keys and wrong types raise
// ConfigError naming the offending field, e.g. "train.lambda".
json to_json(const models::ModelConfig& c);
models::ModelConfig model_config_from_json(const json& j, const std::string& path);

json to_json(const trainer::TrainConfig& c);
trainer::TrainConfig train_config_from_json(const json& j, const std::string& path);

json to_json(const datagen::DomainPairSpec& c);
datagen::DomainPairSpec domain_pair_spec_from_json(const json& j, const std::string& path);

json to_json(const datagen::ImageTaskSpec& c);
datagen::ImageTaskSpec image_task_spec_from_json(const json& j, const std::string& path);

struct DataConfig {
    std::string kind = "rf"; // rf | image
    datagen::DomainPairSpec rf;
    datagen::ImageTaskSpec image;
    /// When set, datasets are loaded from this manifest instead of being
    /// regenerated.
    std::string manifest;
};

struct EvalConfig {
    std::string head = "mean"; // hat | tilde | mean
    double grid_cell_m = 0.5;
};

/// The one config record driving every CLI command.
struct ExperimentConfig {
    int version = 1;
    std::string method = "abrnet";
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::string output_dir = "out";
    models::ModelConfig model;
    trainer::TrainConfig train;
    DataConfig data;
    EvalConfig evaluation;
    std::vector<double> sweep_lambdas = {0.55, 0.6, 0.7, 0.8, 0.9, 1.0};

    void validate() const; // throws ConfigError with a named field
};

json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const json& j);

/// Reads + parses + validates. IoError when unreadable, ConfigError on
/// malformed JSON or schema violations.
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& c, const std::string& path);

/// Environment overrides (ABRNET_SEED, ABRNET_OUT) then explicit flag
/// overrides, strongest last.
void apply_env_overrides(ExperimentConfig& c);
void apply_flag_overrides(ExperimentConfig& c, const std::optional<std::uint64_t>& seed,
                          const std::optional<std::string>& output_dir);

/// gen-data output index: where each split lives plus the generating spec.
struct Manifest {
    int version = 1;
    std::string source_train;
    std::string source_test; // empty for the image task
    std::string target;
    std::string kind = "rf";
    json spec; // echo of the generating data config
};

void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

} // namespace abrnet::config
