#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tsmi/actstore.hpp"
#include "tsmi/sae.hpp"
#include "tsmi/series.hpp"

namespace tsmi {

enum class ConceptLabel : std::uint8_t {
    trend_up,
    trend_down,
    seasonality,
    level_shift_up,
    level_shift_down,
    frequency_high,
    frequency_low,
    high_volatility,
    low_volatility,
    noise,
    unknown,
};

constexpr std::size_t kNumConcepts = 11;  // ten named concepts + unknown
std::string concept_name(ConceptLabel c);

// Six physical signed channels; the four directional concept pairs each
// share one channel, resolved by correlation sign.
enum class Channel : std::uint8_t {
    trend,        // + -> trend_up, - -> trend_down
    seasonal,     // seasonality
    level_shift,  // + -> level_shift_up, - -> level_shift_down
    frequency,    // + -> frequency_high, - -> frequency_low
    volatility,   // + -> high_volatility, - -> low_volatility
    noise,        // noise
};
constexpr std::size_t kNumChannels = 6;

struct FeatureProfile {
    std::uint32_t feature_id = 0;
    std::array<double, kNumChannels> r{};  // signed Pearson r per channel
    ConceptLabel best_label = ConceptLabel::unknown;
    double best_score = 0;  // signed r of the winning channel
};

// Sparse-code value of every feature at every token position of the suite
// shard, concatenated in manifest order. (features x positions)
Matrix feature_trace(const SaeParams& sae, const ActivationShard& shard);

// Ground-truth channels aligned to the shard's token positions. Frequency,
// volatility and noise channels are z-scored. (kNumChannels x positions)
Matrix channel_matrix(const std::vector<Series>& suite, const ActivationShard& shard);

FeatureProfile classify(std::uint32_t feature_id, const real* trace_row,
                        std::size_t positions, const Matrix& channels, double r_threshold);

std::vector<FeatureProfile> classify_all(const Matrix& trace, const Matrix& channels,
                                         double r_threshold);

struct TaxonomyReport {
    std::array<std::size_t, kNumConcepts> counts{};  // indexed by ConceptLabel
    double labeled_fraction = 0;
};

TaxonomyReport taxonomy_report(const std::vector<FeatureProfile>& profiles);

double pearson(const real* a, const real* b, std::size_t n);

}  // namespace tsmi
