#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsmi/causal.hpp"
#include "tsmi/model.hpp"
#include "tsmi/sae.hpp"
#include "tsmi/tokenizer.hpp"

namespace tsmi {

struct DataConfig {
    std::size_t suite_count_per_family = 4;
    std::size_t suite_length = 512;
    std::string csv_path;  // optional external series
    std::string csv_value_column = "OT";
    std::size_t context_len = 96;
    std::size_t pred_len = 24;
    std::size_t stride = 8;
    std::size_t max_windows_per_series = 32;
    double holdout_fraction = 0.2;
};

struct ModelTrainConfig {
    std::size_t train_steps = 600;
    std::size_t train_batch = 16;
    real base_lr = real(3e-4);
    std::size_t warmup_steps = 50;
};

struct AblationSection {
    std::string site = "enc1";
    std::vector<std::string> progressive_sites;
    std::size_t n_windows = 64;
    std::size_t n_samples = 4;
    std::size_t n_features = 64;
    std::size_t single_top = 16;
    std::vector<std::size_t> checkpoints{1, 2, 4, 8, 16, 32, 64};
    real temperature = real(1);
};

struct TaxonomySection {
    double r_threshold = 0.5;
    std::string site = "enc3";
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    DataConfig data;
    TokenizerConfig tokenizer;
    ModelConfig model;
    ModelTrainConfig model_train;
    std::vector<std::string> sites{"enc1", "enc3", "dec1", "cross1"};
    SaeTrainConfig sae;
    std::size_t sae_expansion_factor = 8;
    TaxonomySection taxonomy;
    AblationSection ablation;

    // Throws ConfigError listing every violated key at once.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// Stable FNV-1a hash of the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace tsmi
