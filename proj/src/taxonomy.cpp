#include "tsmi/taxonomy.hpp"

#include <cmath>
#include <map>

#include "tsmi/errors.hpp"

namespace tsmi {
namespace {

// Label for a winning channel given the sign of its correlation.
ConceptLabel resolve(Channel c, double r) {
    switch (c) {
        case Channel::trend: return r >= 0 ? ConceptLabel::trend_up : ConceptLabel::trend_down;
        case Channel::seasonal: return ConceptLabel::seasonality;
        case Channel::level_shift:
            return r >= 0 ? ConceptLabel::level_shift_up : ConceptLabel::level_shift_down;
        case Channel::frequency:
            return r >= 0 ? ConceptLabel::frequency_high : ConceptLabel::frequency_low;
        case Channel::volatility:
            return r >= 0 ? ConceptLabel::high_volatility : ConceptLabel::low_volatility;
        case Channel::noise: return ConceptLabel::noise;
    }
    return ConceptLabel::unknown;
}

void zscore_row(Matrix& m, std::size_t row) {
    const std::size_t n = m.cols();
    double sum = 0, sumsq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += m(row, i);
        sumsq += static_cast<double>(m(row, i)) * m(row, i);
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    if (var < 1e-24) {
        for (std::size_t i = 0; i < n; ++i) m(row, i) = 0;
        return;
    }
    const double inv = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i)
        m(row, i) = static_cast<real>((m(row, i) - mean) * inv);
}

}  // namespace

std::string concept_name(ConceptLabel c) {
    switch (c) {
        case ConceptLabel::trend_up: return "trend_up";
        case ConceptLabel::trend_down: return "trend_down";
        case ConceptLabel::seasonality: return "seasonality";
        case ConceptLabel::level_shift_up: return "level_shift_up";
        case ConceptLabel::level_shift_down: return "level_shift_down";
        case ConceptLabel::frequency_high: return "frequency_high";
        case ConceptLabel::frequency_low: return "frequency_low";
        case ConceptLabel::high_volatility: return "high_volatility";
        case ConceptLabel::low_volatility: return "low_volatility";
        case ConceptLabel::noise: return "noise";
        case ConceptLabel::unknown: return "unknown";
    }
    return "invalid";
}

double pearson(const real* a, const real* b, std::size_t n) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i], y = b[i];
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    const double nd = static_cast<double>(n);
    const double cov = sab - sa * sb / nd;
    const double va = saa - sa * sa / nd;
    const double vb = sbb - sb * sb / nd;
    if (va <= 0 || vb <= 0) return 0;
    return cov / std::sqrt(va * vb);
}

Matrix feature_trace(const SaeParams& sae, const ActivationShard& shard) {
    if (sae.site != shard.site)
        throw DimensionError("feature_trace: SAE trained at " + site_name(sae.site) +
                             " but shard holds " + site_name(shard.site));
    if (sae.d_model != shard.d_model)
        throw DimensionError("feature_trace: d_model mismatch");
    Matrix trace(sae.d_sae, shard.n_rows());
    const auto codes = sae_encode_batch(sae, shard.rows);
    for (std::size_t t = 0; t < codes.size(); ++t)
        for (std::size_t n = 0; n < codes[t].indices.size(); ++n)
            trace(codes[t].indices[n], t) = codes[t].values[n];
    return trace;
}

Matrix channel_matrix(const std::vector<Series>& suite, const ActivationShard& shard) {
    std::map<std::string, const Series*> by_name;
    for (const auto& s : suite) by_name[s.name] = &s;
    Matrix channels(kNumChannels, shard.n_rows());
    for (const auto& e : shard.manifest) {
        auto it = by_name.find(e.source);
        if (it == by_name.end())
            throw FormatError("channel_matrix: shard references unknown series '" + e.source +
                              "'");
        const Series& s = *it->second;
        if (!s.channels)
            throw FormatError("channel_matrix: series '" + s.name +
                              "' has no property channels");
        const PropertyChannels& ch = *s.channels;
        for (std::size_t i = 0; i < e.row_count; ++i) {
            const std::size_t t = e.series_start + i;
            if (t >= ch.length())
                throw DimensionError("channel_matrix: timestep " + std::to_string(t) +
                                     " beyond series '" + s.name + "'");
            const std::size_t pos = e.row_offset + i;
            channels(static_cast<std::size_t>(Channel::trend), pos) = ch.trend_slope[t];
            channels(static_cast<std::size_t>(Channel::seasonal), pos) =
                ch.seasonal_phase_indicator[t];
            channels(static_cast<std::size_t>(Channel::level_shift), pos) =
                ch.level_shift_indicator[t];
            channels(static_cast<std::size_t>(Channel::frequency), pos) =
                ch.instantaneous_frequency[t];
            channels(static_cast<std::size_t>(Channel::volatility), pos) =
                ch.rolling_volatility[t];
            channels(static_cast<std::size_t>(Channel::noise), pos) = ch.noise_amplitude[t];
        }
    }
    zscore_row(channels, static_cast<std::size_t>(Channel::frequency));
    zscore_row(channels, static_cast<std::size_t>(Channel::volatility));
    zscore_row(channels, static_cast<std::size_t>(Channel::noise));
    return channels;
}

FeatureProfile classify(std::uint32_t feature_id, const real* trace_row,
                        std::size_t positions, const Matrix& channels, double r_threshold) {
    if (channels.cols() != positions)
        throw DimensionError("classify: trace length " + std::to_string(positions) +
                             " != channel length " + std::to_string(channels.cols()));
    FeatureProfile profile;
    profile.feature_id = feature_id;
    // Zero-variance traces are unknown by definition.
    double sum = 0, sumsq = 0;
    for (std::size_t i = 0; i < positions; ++i) {
        sum += trace_row[i];
        sumsq += static_cast<double>(trace_row[i]) * trace_row[i];
    }
    const double nd = static_cast<double>(positions);
    if (sumsq - sum * sum / nd <= 0) return profile;

    std::size_t best = 0;
    for (std::size_t c = 0; c < kNumChannels; ++c) {
        profile.r[c] = pearson(trace_row, channels.row(c), positions);
        if (std::abs(profile.r[c]) > std::abs(profile.r[best])) best = c;
    }
    profile.best_score = profile.r[best];
    if (std::abs(profile.best_score) >= r_threshold)
        profile.best_label = resolve(static_cast<Channel>(best), profile.best_score);
    return profile;
}

std::vector<FeatureProfile> classify_all(const Matrix& trace, const Matrix& channels,
                                         double r_threshold) {
    std::vector<FeatureProfile> out(trace.rows());
    const auto n = static_cast<std::int64_t>(trace.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
        const auto idx = static_cast<std::size_t>(j);
        out[idx] = classify(static_cast<std::uint32_t>(idx), trace.row(idx), trace.cols(),
                            channels, r_threshold);
    }
    return out;
}

TaxonomyReport taxonomy_report(const std::vector<FeatureProfile>& profiles) {
    TaxonomyReport rep;
    for (const auto& p : profiles) rep.counts[static_cast<std::size_t>(p.best_label)] += 1;
    const std::size_t unknown = rep.counts[static_cast<std::size_t>(ConceptLabel::unknown)];
    rep.labeled_fraction =
        profiles.empty()
            ? 0.0
            : 1.0 - static_cast<double>(unknown) / static_cast<double>(profiles.size());
    return rep;
}

}  // namespace tsmi
