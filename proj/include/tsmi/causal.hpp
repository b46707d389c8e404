#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "tsmi/model.hpp"
#include "tsmi/sae.hpp"
#include "tsmi/tokenizer.hpp"

namespace tsmi {

// A forecast window carrying the raw target values CRPS is scored against.
struct EvalWindow {
    TokenizedWindow tokens;
    std::vector<real> target_values;
};

EvalWindow make_eval_window(const Window& w, const TokenizerConfig& cfg);

struct AblationConfig {
    HookSite site;
    std::size_t n_windows = 256;
    std::size_t n_samples = 4;
    std::size_t n_features = 64;
    std::vector<std::size_t> checkpoints{1, 2, 4, 8, 16, 32, 64};
    std::uint64_t seed = 0;
    real temperature = real(1);

    void validate() const;
};

struct AblationRecord {
    std::uint32_t feature_id = 0;
    double crps_original = 0;
    double crps_ablated = 0;
    double delta = 0;  // crps_ablated - crps_original
};

struct AblationSummary {
    std::size_t n = 0;
    double mean = 0;
    double median = 0;  // lower-middle element for even n
    double max = 0;
    double stddev = 0;
    double positive_fraction = 0;
    std::optional<double> max_over_median;  // undefined when median <= 0
};

// CRPS of the empirical distribution of samples against observation y:
//   mean_i |x_i - y| - (1 / 2m^2) sum_{i,j} |x_i - x_j|
double crps_empirical(const std::vector<real>& samples, real y);

// Horizon-mean CRPS of one forecast sample set.
double window_crps(const ForecastSampleSet& samples, const std::vector<real>& target);

struct FeatureRanking {
    std::vector<std::uint32_t> order;  // descending decoder-norm contribution
    std::vector<double> scores;        // indexed by feature id
};

// score_j = mean over shard rows of |code value of j| * ||decoder column j||.
FeatureRanking rank_features(const SaeParams& sae, const ActivationShard& shard);

// Row-wise SAE reconstruction patch with the given features' contributions
// removed. An empty set gives the full-reconstruction baseline patch.
SiteEdit make_ablation_edit(const SaeParams& sae, const std::set<std::uint32_t>& ablated);

// Run-level CRPS (unweighted mean of horizon-mean window CRPS) with the
// ablation patch applied at the site. Windows run in parallel; per-window
// rng seeds derive from (cfg.seed, window index).
double patched_run_crps(const Model& model, const TokenizerConfig& tok,
                        const std::vector<EvalWindow>& windows, const SaeParams& sae,
                        const std::set<std::uint32_t>& ablated, const AblationConfig& cfg);

// Unpatched (clean-model) run CRPS, reported alongside the patched baseline.
double clean_run_crps(const Model& model, const TokenizerConfig& tok,
                      const std::vector<EvalWindow>& windows, const AblationConfig& cfg);

AblationRecord ablate_single(const Model& model, const TokenizerConfig& tok,
                             const SaeParams& sae, const std::vector<EvalWindow>& windows,
                             std::uint32_t feature, const AblationConfig& cfg,
                             std::optional<double> baseline_crps = std::nullopt);

// (checkpoint, run CRPS) pairs; the leading pair is the c=0 baseline.
std::vector<std::pair<std::size_t, double>> ablate_progressive(
    const Model& model, const TokenizerConfig& tok, const SaeParams& sae,
    const std::vector<EvalWindow>& windows, const FeatureRanking& ranking,
    const AblationConfig& cfg);

AblationSummary summarize(const std::vector<AblationRecord>& records);

}  // namespace tsmi
