#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsmi/matrix.hpp"

namespace tsmi {

// Per-timestep ground-truth concept signals for a generated series.
struct PropertyChannels {
    std::vector<real> trend_slope;
    std::vector<real> seasonal_phase_indicator;
    std::vector<real> level_shift_indicator;  // -1, 0 or +1 per timestep
    std::vector<real> instantaneous_frequency;
    std::vector<real> rolling_volatility;  // >= 0
    std::vector<real> noise_amplitude;

    std::size_t length() const { return trend_slope.size(); }
};

struct Series {
    std::string name;
    std::vector<real> values;
    std::optional<PropertyChannels> channels;

    std::size_t length() const { return values.size(); }
};

struct Window {
    std::vector<real> context;
    std::vector<real> target;
    std::string source;       // originating series name
    std::size_t offset = 0;   // index of context[0] within the series
};

// Five generator families with randomized parameters, each emitting fully
// populated PropertyChannels. Pure function of (seed, count, length).
std::vector<Series> gen_diagnostic_suite(std::uint64_t seed, std::size_t count_per_family,
                                         std::size_t length);

// Reads one numeric column from a header-bearing CSV. Channels are absent.
Series load_csv(const std::string& path, const std::string& value_column);

// Slices a series into context/target windows at stride offsets, then
// deterministically subsamples down to max_windows when there are more.
std::vector<Window> make_windows(const Series& s, std::size_t context_len,
                                 std::size_t pred_len, std::size_t max_windows,
                                 std::size_t stride, std::uint64_t seed);

// Suite export: one values CSV per series plus a JSON sidecar with channels.
void export_suite(const std::vector<Series>& suite, const std::string& dir);
std::vector<Series> import_suite(const std::string& dir);

// Half-width (in timesteps) of the signed pulse written into
// level_shift_indicator around a shift time.
constexpr std::size_t kLevelShiftPulseHalfWidth = 8;

}  // namespace tsmi
