#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsmi/errors.hpp"
#include "tsmi/rng.hpp"
#include "tsmi/tokenizer.hpp"

using namespace tsmi;

TEST_CASE("vocabulary layout: bins then pad then eos") {
    TokenizerConfig cfg;
    cfg.n_bins = 64;
    CHECK(cfg.pad_id() == 64);
    CHECK(cfg.eos_id() == 65);
    CHECK(cfg.vocab_size() == 66);
}

TEST_CASE("scale is the mean absolute context value, floored") {
    CHECK(fit_scale({real(2), real(-4), real(6)}) == doctest::Approx(4.0));
    CHECK(fit_scale({real(0), real(0), real(0)}) == doctest::Approx(1e-6));
    CHECK(fit_scale({real(1e-9), real(-1e-9)}) == doctest::Approx(1e-6));
}

TEST_CASE("quantization is monotone and stays inside the bin range") {
    TokenizerConfig cfg;
    cfg.n_bins = 32;
    Rng rng(5);
    std::vector<real> values;
    for (int i = 0; i < 400; ++i)
        values.push_back(static_cast<real>(40.0 * (uniform01(rng) - 0.5)));
    const auto tokens = quantize(values, real(1), cfg);
    REQUIRE(tokens.size() == values.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        CHECK(tokens[i] < cfg.n_bins);
        for (std::size_t j = 0; j < tokens.size(); ++j)
            if (values[i] < values[j]) CHECK(tokens[i] <= tokens[j]);
    }
}

TEST_CASE("bin edges are half-open with the final bin closed") {
    TokenizerConfig cfg;
    cfg.n_bins = 30;
    cfg.clip_lo = real(-15);
    cfg.clip_hi = real(15);
    // bin width 1.0; value exactly on an interior edge falls in the upper bin
    const auto t = quantize({real(-15), real(-14), real(0), real(14.999), real(15), real(99)},
                            real(1), cfg);
    CHECK(t[0] == 0);
    CHECK(t[1] == 1);
    CHECK(t[2] == 15);
    CHECK(t[3] == 29);
    CHECK(t[4] == 29);  // top edge closed
    CHECK(t[5] == 29);  // clipped
}

TEST_CASE("dequantize returns scaled bin centers; round trip within half a bin") {
    TokenizerConfig cfg;
    cfg.n_bins = 256;
    const real scale = real(2.5);
    Rng rng(9);
    std::vector<real> values;
    for (int i = 0; i < 300; ++i)
        values.push_back(static_cast<real>(scale * 30.0 * (uniform01(rng) - 0.5)));
    const auto tokens = quantize(values, scale, cfg);
    const auto back = dequantize(tokens, scale, cfg);
    const double half_bin = 0.5 * cfg.bin_width() * scale;
    for (std::size_t i = 0; i < values.size(); ++i)
        CHECK(std::abs(static_cast<double>(back[i]) - values[i]) <= half_bin + 1e-5);
}

TEST_CASE("dequantize rejects special tokens") {
    TokenizerConfig cfg;
    cfg.n_bins = 16;
    CHECK_THROWS_AS(dequantize({cfg.pad_id()}, real(1), cfg), FormatError);
    CHECK_THROWS_AS(dequantize({cfg.eos_id()}, real(1), cfg), FormatError);
}

TEST_CASE("window tokenization shares the context-fit scale across both segments") {
    TokenizerConfig cfg;
    cfg.n_bins = 128;
    Window w;
    w.source = "s";
    w.offset = 7;
    for (int t = 0; t < 48; ++t) w.context.push_back(static_cast<real>(std::sin(0.3 * t) * 4));
    for (int t = 0; t < 12; ++t) w.target.push_back(static_cast<real>(std::sin(0.3 * (48 + t)) * 4));
    const TokenizedWindow tw = tokenize_window(w, cfg);
    CHECK(tw.source == "s");
    CHECK(tw.offset == 7);
    CHECK(tw.context_tokens.size() == 48);
    CHECK(tw.target_tokens.size() == 12);
    CHECK(tw.scale == doctest::Approx(fit_scale(w.context)));
    CHECK(tw.context_tokens == quantize(w.context, tw.scale, cfg));
    CHECK(tw.target_tokens == quantize(w.target, tw.scale, cfg));
}

TEST_CASE("config validation rejects degenerate ranges") {
    TokenizerConfig bad;
    bad.n_bins = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.n_bins = 16;
    bad.clip_lo = real(3);
    bad.clip_hi = real(-3);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
