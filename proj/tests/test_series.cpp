#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "tsmi/errors.hpp"
#include "tsmi/series.hpp"

using namespace tsmi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("tsmi_series_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const Series& find_series(const std::vector<Series>& suite, const std::string& name) {
    for (const auto& s : suite)
        if (s.name == name) return s;
    throw std::runtime_error("missing series " + name);
}

double linreg_slope(const std::vector<real>& v) {
    const double n = static_cast<double>(v.size());
    double st = 0, sv = 0, stt = 0, stv = 0;
    for (std::size_t t = 0; t < v.size(); ++t) {
        st += static_cast<double>(t);
        sv += v[t];
        stt += static_cast<double>(t) * t;
        stv += static_cast<double>(t) * v[t];
    }
    return (n * stv - st * sv) / (n * stt - st * st);
}

}  // namespace

TEST_CASE("suite generation is a pure function of its arguments") {
    const auto a = gen_diagnostic_suite(42, 2, 128);
    const auto b = gen_diagnostic_suite(42, 2, 128);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].values == b[i].values);
    }
    const auto c = gen_diagnostic_suite(43, 2, 128);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff |= (a[i].values != c[i].values);
    CHECK(any_diff);
}

TEST_CASE("every suite series carries fully populated channels") {
    const auto suite = gen_diagnostic_suite(7, 3, 256);
    REQUIRE(suite.size() == 15);
    for (const auto& s : suite) {
        REQUIRE(s.channels.has_value());
        CHECK(s.length() == 256);
        CHECK(s.channels->length() == 256);
        CHECK(s.channels->noise_amplitude.size() == 256);
    }
}

TEST_CASE("trend family: recovered slope equals the trend_slope channel") {
    const auto suite = gen_diagnostic_suite(5, 4, 256);
    for (int i = 0; i < 4; ++i) {
        const auto& s = find_series(suite, "trend_" + std::to_string(i));
        const double slope = linreg_slope(s.values);
        const double channel = s.channels->trend_slope[0];
        CHECK(slope == doctest::Approx(channel).epsilon(1e-4));
        CHECK(std::abs(channel) >= 0.01);
        CHECK(std::abs(channel) <= 0.05);
    }
}

TEST_CASE("seasonal family: values trace the phase indicator channel") {
    const auto suite = gen_diagnostic_suite(11, 2, 256);
    const auto& s = find_series(suite, "seasonal_0");
    // values = amplitude * phase_indicator exactly, so ratio is constant.
    const auto& phi = s.channels->seasonal_phase_indicator;
    double amplitude = 0;
    for (std::size_t t = 0; t < s.length(); ++t)
        if (std::abs(phi[t]) > 0.5) {
            amplitude = s.values[t] / phi[t];
            break;
        }
    CHECK(amplitude > 0.4);
    for (std::size_t t = 0; t < s.length(); ++t)
        CHECK(s.values[t] == doctest::Approx(amplitude * phi[t]).epsilon(1e-4).scale(1.0));
}

TEST_CASE("level shift family: mean steps by the marked magnitude at the pulse") {
    const auto suite = gen_diagnostic_suite(3, 6, 512);
    for (int i = 0; i < 6; ++i) {
        const auto& s = find_series(suite, "level_shift_" + std::to_string(i));
        const auto& ind = s.channels->level_shift_indicator;
        std::size_t first = 0, last = 0;
        for (std::size_t t = 0; t < ind.size(); ++t)
            if (ind[t] != 0) {
                if (first == 0) first = t;
                last = t;
            }
        REQUIRE(last > first);
        CHECK(last - first + 1 <= 2 * kLevelShiftPulseHalfWidth);
        // Compare means well before and well after the pulse.
        double before = 0, after = 0;
        const std::size_t nb = first > 32 ? 32 : first;
        for (std::size_t t = first - nb; t < first; ++t) before += s.values[t];
        before /= static_cast<double>(nb);
        const std::size_t na = std::min<std::size_t>(32, ind.size() - last - 1);
        for (std::size_t t = last + 1; t <= last + na; ++t) after += s.values[t];
        after /= static_cast<double>(na);
        const double step = after - before;
        CHECK(std::abs(step) > 0.8);
        CHECK(((step > 0) == (ind[first] > 0)));
    }
}

TEST_CASE("frequency sweep family: instantaneous frequency rises linearly") {
    const auto suite = gen_diagnostic_suite(9, 2, 256);
    const auto& s = find_series(suite, "freq_sweep_0");
    const auto& f = s.channels->instantaneous_frequency;
    CHECK(f.front() >= real(1.0 / 64) - real(1e-6));
    CHECK(f.front() <= real(1.0 / 32) + real(1e-6));
    CHECK(f.back() >= real(1.0 / 16) - real(1e-6));
    CHECK(f.back() <= real(1.0 / 8) + real(1e-6));
    const real step = f[1] - f[0];
    for (std::size_t t = 0; t + 1 < f.size(); ++t)
        CHECK(f[t + 1] - f[t] == doctest::Approx(step).epsilon(1e-3));
}

TEST_CASE("hetero noise family: sample spread tracks the volatility channel") {
    const auto suite = gen_diagnostic_suite(21, 2, 4096);
    const auto& s = find_series(suite, "hetero_noise_0");
    const auto& vol = s.channels->rolling_volatility;
    // Split into thirds; realized std must order like the channel means.
    auto realized = [&](std::size_t lo, std::size_t hi) {
        double mean = 0;
        for (std::size_t t = lo; t < hi; ++t) mean += s.values[t];
        mean /= static_cast<double>(hi - lo);
        double var = 0;
        for (std::size_t t = lo; t < hi; ++t)
            var += (s.values[t] - mean) * (s.values[t] - mean);
        return std::sqrt(var / static_cast<double>(hi - lo));
    };
    auto channel_mean = [&](std::size_t lo, std::size_t hi) {
        double m = 0;
        for (std::size_t t = lo; t < hi; ++t) m += vol[t];
        return m / static_cast<double>(hi - lo);
    };
    const std::size_t n = s.length();
    for (std::size_t third = 0; third < 3; ++third) {
        const std::size_t lo = third * n / 3, hi = (third + 1) * n / 3;
        CHECK(realized(lo, hi) == doctest::Approx(channel_mean(lo, hi)).epsilon(0.25));
    }
}

TEST_CASE("make_windows slices at stride offsets with aligned context/target") {
    Series s;
    s.name = "ramp";
    for (int t = 0; t < 100; ++t) s.values.push_back(static_cast<real>(t));
    const auto windows = make_windows(s, 16, 4, 1000, 8, 1);
    REQUIRE(windows.size() == (100 - 20) / 8 + 1);
    for (const auto& w : windows) {
        CHECK(w.source == "ramp");
        CHECK(w.context.size() == 16);
        CHECK(w.target.size() == 4);
        CHECK(w.context.front() == static_cast<real>(w.offset));
        CHECK(w.target.front() == static_cast<real>(w.offset + 16));
        CHECK(w.offset % 8 == 0);
    }
}

TEST_CASE("make_windows subsampling is deterministic and sorted") {
    Series s;
    s.name = "long";
    for (int t = 0; t < 2000; ++t) s.values.push_back(static_cast<real>(t));
    const auto a = make_windows(s, 32, 8, 10, 4, 99);
    const auto b = make_windows(s, 32, 8, 10, 4, 99);
    REQUIRE(a.size() == 10);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].offset == b[i].offset);
        if (i > 0) CHECK(a[i].offset > a[i - 1].offset);
        seen.insert(a[i].offset);
    }
    CHECK(seen.size() == 10);
    const auto c = make_windows(s, 32, 8, 10, 4, 100);
    bool diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) diff |= (a[i].offset != c[i].offset);
    CHECK(diff);
}

TEST_CASE("make_windows rejects series shorter than one window") {
    Series s;
    s.name = "tiny";
    s.values.assign(10, real(0));
    CHECK_THROWS_AS(make_windows(s, 16, 4, 10, 1, 0), DimensionError);
}

TEST_CASE("csv loader reads the named column and reports bad rows") {
    TempDir tmp;
    const auto p = (tmp.path / "series.csv").string();
    {
        std::ofstream f(p);
        f << "date,HUFL,OT\n";
        f << "2016-07-01,5.827,1.25\n";
        f << "2016-07-02,5.693,-0.5\n";
        f << "2016-07-03,5.157,3.75\n";
    }
    const Series s = load_csv(p, "OT");
    REQUIRE(s.length() == 3);
    CHECK(s.values[0] == doctest::Approx(1.25));
    CHECK(s.values[2] == doctest::Approx(3.75));

    CHECK_THROWS_AS(load_csv(p, "nope"), FormatError);
    CHECK_THROWS_AS(load_csv((tmp.path / "absent.csv").string(), "OT"), FormatError);

    {
        std::ofstream f(p, std::ios::app);
        f << "2016-07-04,5.1,not_a_number\n";
    }
    try {
        load_csv(p, "OT");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 5") != std::string::npos);  // offending row is named
    }
}

TEST_CASE("suite export/import round-trips values and channels") {
    TempDir tmp;
    const auto suite = gen_diagnostic_suite(13, 2, 128);
    export_suite(suite, tmp.path.string());
    const auto back = import_suite(tmp.path.string());
    REQUIRE(back.size() == suite.size());
    for (std::size_t i = 0; i < suite.size(); ++i) {
        CHECK(back[i].name == suite[i].name);
        REQUIRE(back[i].length() == suite[i].length());
        for (std::size_t t = 0; t < suite[i].length(); ++t)
            CHECK(back[i].values[t] == doctest::Approx(suite[i].values[t]).epsilon(1e-6));
        REQUIRE(back[i].channels.has_value());
        for (std::size_t t = 0; t < suite[i].length(); ++t) {
            CHECK(back[i].channels->trend_slope[t] ==
                  doctest::Approx(suite[i].channels->trend_slope[t]).epsilon(1e-6));
            CHECK(back[i].channels->rolling_volatility[t] ==
                  doctest::Approx(suite[i].channels->rolling_volatility[t]).epsilon(1e-6));
        }
    }
    CHECK_THROWS_AS(import_suite((tmp.path / "nothing").string()), MissingArtifactError);
}
