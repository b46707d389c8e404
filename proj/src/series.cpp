#include "tsmi/series.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "tsmi/errors.hpp"
#include "tsmi/rng.hpp"

namespace tsmi {
namespace {

using json = nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

real uniform_in(Rng& rng, double lo, double hi) {
    return static_cast<real>(lo + (hi - lo) * uniform01(rng));
}

// Realized local volatility: population std-dev of the values over a centered
// window. Distinct from noise_amplitude, which records the injected noise
// sigma only — signal movement (seasonality, chirps, shifts) counts as
// volatility but not as noise.
constexpr std::size_t kVolatilityHalfWindow = 6;

void fill_rolling_volatility(Series& s) {
    const std::size_t length = s.length();
    auto& vol = s.channels->rolling_volatility;
    for (std::size_t t = 0; t < length; ++t) {
        const std::size_t lo = t > kVolatilityHalfWindow ? t - kVolatilityHalfWindow : 0;
        const std::size_t hi = std::min(length, t + kVolatilityHalfWindow + 1);
        double sum = 0, sumsq = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            sum += s.values[i];
            sumsq += static_cast<double>(s.values[i]) * s.values[i];
        }
        const double n = static_cast<double>(hi - lo);
        const double mean = sum / n;
        vol[t] = static_cast<real>(std::sqrt(std::max(0.0, sumsq / n - mean * mean)));
    }
}

PropertyChannels zero_channels(std::size_t length) {
    PropertyChannels ch;
    ch.trend_slope.assign(length, 0);
    ch.seasonal_phase_indicator.assign(length, 0);
    ch.level_shift_indicator.assign(length, 0);
    ch.instantaneous_frequency.assign(length, 0);
    ch.rolling_volatility.assign(length, 0);
    ch.noise_amplitude.assign(length, 0);
    return ch;
}

Series gen_trend(Rng& rng, std::size_t length, const std::string& name) {
    const real intercept = uniform_in(rng, -2, 2);
    real slope = uniform_in(rng, 0.01, 0.05);
    if (uniform01(rng) < 0.5) slope = -slope;
    Series s;
    s.name = name;
    s.values.resize(length);
    auto ch = zero_channels(length);
    for (std::size_t t = 0; t < length; ++t) {
        s.values[t] = intercept + slope * static_cast<real>(t);
        ch.trend_slope[t] = slope;
    }
    s.channels = std::move(ch);
    fill_rolling_volatility(s);
    return s;
}

Series gen_seasonal(Rng& rng, std::size_t length, const std::string& name) {
    const real amplitude = uniform_in(rng, 0.5, 2.0);
    const real period = uniform_in(rng, 12, 48);
    const real phase = uniform_in(rng, 0, kTwoPi);
    Series s;
    s.name = name;
    s.values.resize(length);
    auto ch = zero_channels(length);
    for (std::size_t t = 0; t < length; ++t) {
        const real phi = static_cast<real>(
            std::sin(kTwoPi * static_cast<double>(t) / period + phase));
        s.values[t] = amplitude * phi;
        ch.seasonal_phase_indicator[t] = phi;
        ch.instantaneous_frequency[t] = real(1) / period;
    }
    s.channels = std::move(ch);
    fill_rolling_volatility(s);
    return s;
}

Series gen_level_shift(Rng& rng, std::size_t length, const std::string& name) {
    const real base = uniform_in(rng, -1, 1);
    real magnitude = uniform_in(rng, 1.0, 3.0);
    if (uniform01(rng) < 0.5) magnitude = -magnitude;
    const auto t0 = static_cast<std::size_t>(
        uniform_in(rng, static_cast<double>(length) / 4, 3.0 * static_cast<double>(length) / 4));
    const real sigma = uniform_in(rng, 0.02, 0.05);
    Series s;
    s.name = name;
    s.values.resize(length);
    auto ch = zero_channels(length);
    const std::size_t lo = t0 > kLevelShiftPulseHalfWidth ? t0 - kLevelShiftPulseHalfWidth : 0;
    const std::size_t hi = std::min(length, t0 + kLevelShiftPulseHalfWidth);
    for (std::size_t t = 0; t < length; ++t) {
        s.values[t] = base + (t >= t0 ? magnitude : real(0)) +
                      sigma * static_cast<real>(normal(rng));
        if (t >= lo && t < hi) ch.level_shift_indicator[t] = magnitude > 0 ? real(1) : real(-1);
        ch.noise_amplitude[t] = sigma;
    }
    s.channels = std::move(ch);
    fill_rolling_volatility(s);
    return s;
}

Series gen_freq_sweep(Rng& rng, std::size_t length, const std::string& name) {
    const real amplitude = uniform_in(rng, 0.5, 1.5);
    const real f0 = uniform_in(rng, 1.0 / 64, 1.0 / 32);
    const real f1 = uniform_in(rng, 1.0 / 16, 1.0 / 8);
    const double rate = static_cast<double>(f1 - f0) / static_cast<double>(length - 1);
    Series s;
    s.name = name;
    s.values.resize(length);
    auto ch = zero_channels(length);
    for (std::size_t t = 0; t < length; ++t) {
        const double td = static_cast<double>(t);
        const double phase = kTwoPi * (f0 * td + 0.5 * rate * td * td);
        s.values[t] = amplitude * static_cast<real>(std::sin(phase));
        ch.instantaneous_frequency[t] = f0 + static_cast<real>(rate * td);
    }
    s.channels = std::move(ch);
    fill_rolling_volatility(s);
    return s;
}

Series gen_hetero_noise(Rng& rng, std::size_t length, const std::string& name) {
    const real base = uniform_in(rng, -1, 1);
    // Piecewise-linear std-dev profile over a few random knots.
    const std::size_t n_knots = 3 + static_cast<std::size_t>(uniform01(rng) * 3);
    std::vector<real> knots(n_knots);
    for (auto& k : knots) k = uniform_in(rng, 0.2, 2.0);
    Series s;
    s.name = name;
    s.values.resize(length);
    auto ch = zero_channels(length);
    for (std::size_t t = 0; t < length; ++t) {
        const double pos = static_cast<double>(t) / static_cast<double>(length - 1) *
                           static_cast<double>(n_knots - 1);
        const auto k0 = std::min(n_knots - 2, static_cast<std::size_t>(pos));
        const double frac = pos - static_cast<double>(k0);
        const real sigma = static_cast<real>((1.0 - frac) * knots[k0] + frac * knots[k0 + 1]);
        s.values[t] = base + sigma * static_cast<real>(normal(rng));
        ch.noise_amplitude[t] = sigma;
    }
    s.channels = std::move(ch);
    fill_rolling_volatility(s);
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

json channels_to_json(const PropertyChannels& ch) {
    return json{{"trend_slope", ch.trend_slope},
                {"seasonal_phase_indicator", ch.seasonal_phase_indicator},
                {"level_shift_indicator", ch.level_shift_indicator},
                {"instantaneous_frequency", ch.instantaneous_frequency},
                {"rolling_volatility", ch.rolling_volatility},
                {"noise_amplitude", ch.noise_amplitude}};
}

PropertyChannels channels_from_json(const json& j) {
    PropertyChannels ch;
    ch.trend_slope = j.at("trend_slope").get<std::vector<real>>();
    ch.seasonal_phase_indicator = j.at("seasonal_phase_indicator").get<std::vector<real>>();
    ch.level_shift_indicator = j.at("level_shift_indicator").get<std::vector<real>>();
    ch.instantaneous_frequency = j.at("instantaneous_frequency").get<std::vector<real>>();
    ch.rolling_volatility = j.at("rolling_volatility").get<std::vector<real>>();
    ch.noise_amplitude = j.at("noise_amplitude").get<std::vector<real>>();
    return ch;
}

}  // namespace

std::vector<Series> gen_diagnostic_suite(std::uint64_t seed, std::size_t count_per_family,
                                         std::size_t length) {
    if (length < 128) throw ConfigError("gen_diagnostic_suite: length must be >= 128");
    struct Family {
        const char* tag;
        Series (*gen)(Rng&, std::size_t, const std::string&);
    };
    static const Family families[] = {
        {"trend", gen_trend},
        {"seasonal", gen_seasonal},
        {"level_shift", gen_level_shift},
        {"freq_sweep", gen_freq_sweep},
        {"hetero_noise", gen_hetero_noise},
    };
    std::vector<Series> suite;
    suite.reserve(5 * count_per_family);
    for (std::size_t f = 0; f < 5; ++f) {
        for (std::size_t i = 0; i < count_per_family; ++i) {
            Rng rng(mix_seed(seed, f * 1000 + i));
            suite.push_back(families[f].gen(rng, length,
                                            std::string(families[f].tag) + "_" +
                                                std::to_string(i)));
        }
    }
    return suite;
}

Series load_csv(const std::string& path, const std::string& value_column) {
    std::ifstream in(path);
    if (!in) throw FormatError("load_csv: cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("load_csv: empty file: " + path);
    const auto header = split_csv_line(line);
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (strip(header[i]) == value_column) {
            col = i;
            break;
        }
    }
    if (col == header.size())
        throw FormatError("load_csv: column '" + value_column + "' not found in " + path);

    Series s;
    s.name = std::filesystem::path(path).stem().string() + ":" + value_column;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (strip(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (col >= cells.size())
            throw FormatError("load_csv: row " + std::to_string(row) + " has only " +
                              std::to_string(cells.size()) + " cells");
        const std::string cell = strip(cells[col]);
        try {
            std::size_t consumed = 0;
            const double v = std::stod(cell, &consumed);
            if (consumed != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
            s.values.push_back(static_cast<real>(v));
        } catch (const std::exception&) {
            throw FormatError("load_csv: unparsable numeric cell '" + cell + "' at row " +
                              std::to_string(row) + " of " + path);
        }
    }
    return s;
}

std::vector<Window> make_windows(const Series& s, std::size_t context_len,
                                 std::size_t pred_len, std::size_t max_windows,
                                 std::size_t stride, std::uint64_t seed) {
    const std::size_t span = context_len + pred_len;
    if (s.length() < span)
        throw DimensionError("make_windows: series '" + s.name + "' has length " +
                             std::to_string(s.length()) + " < context+pred " +
                             std::to_string(span));
    if (stride == 0) stride = 1;
    std::vector<std::size_t> offsets;
    for (std::size_t off = 0; off + span <= s.length(); off += stride) offsets.push_back(off);
    if (offsets.size() > max_windows) {
        // Deterministic subsample without replacement.
        Rng rng(mix_seed(seed, 0x77696e));
        for (std::size_t i = offsets.size() - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
            std::swap(offsets[i], offsets[std::min(j, i)]);
        }
        offsets.resize(max_windows);
        std::sort(offsets.begin(), offsets.end());
    }
    std::vector<Window> windows;
    windows.reserve(offsets.size());
    for (std::size_t off : offsets) {
        Window w;
        w.source = s.name;
        w.offset = off;
        w.context.assign(s.values.begin() + static_cast<std::ptrdiff_t>(off),
                         s.values.begin() + static_cast<std::ptrdiff_t>(off + context_len));
        w.target.assign(s.values.begin() + static_cast<std::ptrdiff_t>(off + context_len),
                        s.values.begin() + static_cast<std::ptrdiff_t>(off + span));
        windows.push_back(std::move(w));
    }
    return windows;
}

void export_suite(const std::vector<Series>& suite, const std::string& dir) {
    std::filesystem::create_directories(dir);
    json index = json::array();
    for (const auto& s : suite) {
        index.push_back(s.name);
        std::ofstream csv(dir + "/" + s.name + ".csv");
        csv.precision(9);
        csv << "t,value\n";
        for (std::size_t t = 0; t < s.length(); ++t) csv << t << "," << s.values[t] << "\n";
        if (s.channels) {
            std::ofstream side(dir + "/" + s.name + ".channels.json");
            side << channels_to_json(*s.channels).dump(2) << "\n";
        }
    }
    std::ofstream idx(dir + "/suite.json");
    idx << json{{"series", index}}.dump(2) << "\n";
}

std::vector<Series> import_suite(const std::string& dir) {
    std::ifstream idx(dir + "/suite.json");
    if (!idx) throw MissingArtifactError("import_suite: no suite.json in " + dir);
    json j;
    idx >> j;
    std::vector<Series> suite;
    for (const auto& name : j.at("series")) {
        Series s = load_csv(dir + "/" + name.get<std::string>() + ".csv", "value");
        s.name = name.get<std::string>();
        std::ifstream side(dir + "/" + s.name + ".channels.json");
        if (side) {
            json cj;
            side >> cj;
            s.channels = channels_from_json(cj);
        }
        suite.push_back(std::move(s));
    }
    return suite;
}

}  // namespace tsmi
