#pragma once

#include <cstdint>
#include <vector>

#include "tsmi/matrix.hpp"
#include "tsmi/series.hpp"

namespace tsmi {

using TokenId = std::uint32_t;

// Uniform-bin value quantizer in the mean-scaled unit range.
// Bin ids occupy [0, n_bins); pad and eos follow immediately after.
struct TokenizerConfig {
    std::size_t n_bins = 256;
    real clip_lo = real(-15);
    real clip_hi = real(15);

    TokenId pad_id() const { return static_cast<TokenId>(n_bins); }
    TokenId eos_id() const { return static_cast<TokenId>(n_bins + 1); }
    std::size_t vocab_size() const { return n_bins + 2; }
    real bin_width() const { return (clip_hi - clip_lo) / static_cast<real>(n_bins); }

    void validate() const;
};

struct TokenizedWindow {
    std::vector<TokenId> context_tokens;
    std::vector<TokenId> target_tokens;
    real scale = real(1);
    std::string source;
    std::size_t offset = 0;
};

// Mean absolute value of the context, floored at 1e-6.
real fit_scale(const std::vector<real>& context);

// v/scale clipped to [clip_lo, clip_hi] then binned into half-open uniform
// intervals [edge_i, edge_{i+1}), final bin closed. Monotone in v.
std::vector<TokenId> quantize(const std::vector<real>& values, real scale,
                              const TokenizerConfig& cfg);

// Bin id -> bin center * scale. Throws FormatError on special tokens.
std::vector<real> dequantize(const std::vector<TokenId>& tokens, real scale,
                             const TokenizerConfig& cfg);

TokenizedWindow tokenize_window(const Window& w, const TokenizerConfig& cfg);

}  // namespace tsmi
