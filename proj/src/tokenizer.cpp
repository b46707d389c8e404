#include "tsmi/tokenizer.hpp"

#include <algorithm>
#include <cmath>

#include "tsmi/errors.hpp"

namespace tsmi {

void TokenizerConfig::validate() const {
    std::string bad;
    if (n_bins < 8) bad += "tokenizer.n_bins must be >= 8; ";
    if (!(clip_lo < clip_hi)) bad += "tokenizer.clip_lo must be < clip_hi; ";
    if (!bad.empty()) throw ConfigError(bad);
}

real fit_scale(const std::vector<real>& context) {
    if (context.empty()) throw DimensionError("fit_scale: empty context");
    double sum = 0;
    for (real v : context) sum += std::abs(static_cast<double>(v));
    const double scale = sum / static_cast<double>(context.size());
    return std::max(static_cast<real>(scale), real(1e-6));
}

std::vector<TokenId> quantize(const std::vector<real>& values, real scale,
                              const TokenizerConfig& cfg) {
    std::vector<TokenId> out;
    out.reserve(values.size());
    const real width = cfg.bin_width();
    for (real v : values) {
        const real x = std::clamp(v / scale, cfg.clip_lo, cfg.clip_hi);
        auto idx = static_cast<std::int64_t>(std::floor((x - cfg.clip_lo) / width));
        idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(cfg.n_bins) - 1);
        out.push_back(static_cast<TokenId>(idx));
    }
    return out;
}

std::vector<real> dequantize(const std::vector<TokenId>& tokens, real scale,
                             const TokenizerConfig& cfg) {
    std::vector<real> out;
    out.reserve(tokens.size());
    const real width = cfg.bin_width();
    for (TokenId id : tokens) {
        if (id >= cfg.n_bins)
            throw FormatError("dequantize: special token id " + std::to_string(id) +
                              " has no value");
        out.push_back((cfg.clip_lo + (static_cast<real>(id) + real(0.5)) * width) * scale);
    }
    return out;
}

TokenizedWindow tokenize_window(const Window& w, const TokenizerConfig& cfg) {
    TokenizedWindow tw;
    tw.scale = fit_scale(w.context);
    tw.context_tokens = quantize(w.context, tw.scale, cfg);
    tw.target_tokens = quantize(w.target, tw.scale, cfg);
    tw.source = w.source;
    tw.offset = w.offset;
    return tw;
}

}  // namespace tsmi
