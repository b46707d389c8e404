#include "tsmi/causal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsmi/errors.hpp"
#include "tsmi/rng.hpp"

namespace tsmi {

EvalWindow make_eval_window(const Window& w, const TokenizerConfig& cfg) {
    EvalWindow ew;
    ew.tokens = tokenize_window(w, cfg);
    ew.target_values = w.target;
    return ew;
}

void AblationConfig::validate() const {
    std::string bad;
    if (n_windows == 0) bad += "ablation.n_windows must be >= 1; ";
    if (n_samples == 0) bad += "ablation.n_samples must be >= 1; ";
    for (std::size_t i = 1; i < checkpoints.size(); ++i)
        if (checkpoints[i] <= checkpoints[i - 1]) {
            bad += "ablation.checkpoints must be strictly ascending; ";
            break;
        }
    if (!checkpoints.empty() && checkpoints.back() > n_features)
        bad += "ablation.checkpoints must not exceed ablation.n_features; ";
    if (!bad.empty()) throw ConfigError(bad);
}

double crps_empirical(const std::vector<real>& samples, real y) {
    const std::size_t m = samples.size();
    if (m == 0) throw DimensionError("crps_empirical: no samples");
    double abs_err = 0;
    for (real x : samples) abs_err += std::abs(static_cast<double>(x) - y);
    double pairwise = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            pairwise += std::abs(static_cast<double>(samples[i]) - samples[j]);
    const double md = static_cast<double>(m);
    return abs_err / md - pairwise / (2.0 * md * md);
}

double window_crps(const ForecastSampleSet& set, const std::vector<real>& target) {
    if (set.samples.cols() != target.size())
        throw DimensionError("window_crps: horizon mismatch");
    double total = 0;
    std::vector<real> column(set.samples.rows());
    for (std::size_t h = 0; h < target.size(); ++h) {
        for (std::size_t s = 0; s < set.samples.rows(); ++s) column[s] = set.samples(s, h);
        total += crps_empirical(column, target[h]);
    }
    return total / static_cast<double>(target.size());
}

FeatureRanking rank_features(const SaeParams& sae, const ActivationShard& shard) {
    std::vector<double> mass(sae.d_sae, 0);
    const auto codes = sae_encode_batch(sae, shard.rows);
    for (const auto& code : codes)
        for (std::size_t n = 0; n < code.indices.size(); ++n)
            mass[code.indices[n]] += std::abs(static_cast<double>(code.values[n]));
    FeatureRanking ranking;
    ranking.scores.resize(sae.d_sae);
    const double inv_rows = 1.0 / static_cast<double>(shard.n_rows());
    for (std::size_t j = 0; j < sae.d_sae; ++j) {
        double col_norm = 0;
        for (std::size_t i = 0; i < sae.d_model; ++i)
            col_norm += static_cast<double>(sae.w_dec(i, j)) * sae.w_dec(i, j);
        ranking.scores[j] = mass[j] * inv_rows * std::sqrt(col_norm);
    }
    ranking.order.resize(sae.d_sae);
    std::iota(ranking.order.begin(), ranking.order.end(), 0);
    std::stable_sort(ranking.order.begin(), ranking.order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         if (ranking.scores[a] != ranking.scores[b])
                             return ranking.scores[a] > ranking.scores[b];
                         return a < b;
                     });
    return ranking;
}

SiteEdit make_ablation_edit(const SaeParams& sae, const std::set<std::uint32_t>& ablated) {
    return [&sae, ablated](const Matrix& act) {
        Matrix out(act.rows(), act.cols());
        for (std::size_t r = 0; r < act.rows(); ++r) {
            const auto code = sae_encode(sae, act.row(r));
            real* o = out.row(r);
            for (std::size_t i = 0; i < sae.d_model; ++i) o[i] = sae.b_dec.data()[i];
            for (std::size_t n = 0; n < code.indices.size(); ++n) {
                const std::uint32_t j = code.indices[n];
                if (ablated.count(j)) continue;
                const real v = code.values[n];
                for (std::size_t i = 0; i < sae.d_model; ++i) o[i] += v * sae.w_dec(i, j);
            }
        }
        return out;
    };
}

namespace {

double run_crps(const Model& model, const TokenizerConfig& tok,
                const std::vector<EvalWindow>& windows, const SiteEdits* edits,
                const AblationConfig& cfg) {
    const std::size_t n = std::min(cfg.n_windows, windows.size());
    if (n == 0) throw DimensionError("run_crps: no eval windows");
    std::vector<double> per_window(n, 0);
    const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t w = 0; w < nn; ++w) {
        const auto idx = static_cast<std::size_t>(w);
        const std::uint64_t seed = mix_seed(cfg.seed, idx);
        const ForecastSampleSet samples =
            edits ? forward_patch(model, windows[idx].tokens, tok, *edits, cfg.n_samples,
                                  cfg.temperature, seed)
                  : forecast(model, windows[idx].tokens, tok, cfg.n_samples, cfg.temperature,
                             seed);
        per_window[idx] = window_crps(samples, windows[idx].target_values);
    }
    double total = 0;
    for (double v : per_window) total += v;
    return total / static_cast<double>(n);
}

}  // namespace

double patched_run_crps(const Model& model, const TokenizerConfig& tok,
                        const std::vector<EvalWindow>& windows, const SaeParams& sae,
                        const std::set<std::uint32_t>& ablated, const AblationConfig& cfg) {
    SiteEdits edits;
    edits[cfg.site] = make_ablation_edit(sae, ablated);
    return run_crps(model, tok, windows, &edits, cfg);
}

double clean_run_crps(const Model& model, const TokenizerConfig& tok,
                      const std::vector<EvalWindow>& windows, const AblationConfig& cfg) {
    return run_crps(model, tok, windows, nullptr, cfg);
}

AblationRecord ablate_single(const Model& model, const TokenizerConfig& tok,
                             const SaeParams& sae, const std::vector<EvalWindow>& windows,
                             std::uint32_t feature, const AblationConfig& cfg,
                             std::optional<double> baseline_crps) {
    if (feature >= sae.d_sae)
        throw DimensionError("ablate_single: feature " + std::to_string(feature) +
                             " out of range d_sae=" + std::to_string(sae.d_sae));
    AblationRecord rec;
    rec.feature_id = feature;
    rec.crps_original =
        baseline_crps ? *baseline_crps : patched_run_crps(model, tok, windows, sae, {}, cfg);
    rec.crps_ablated = patched_run_crps(model, tok, windows, sae, {feature}, cfg);
    rec.delta = rec.crps_ablated - rec.crps_original;
    return rec;
}

std::vector<std::pair<std::size_t, double>> ablate_progressive(
    const Model& model, const TokenizerConfig& tok, const SaeParams& sae,
    const std::vector<EvalWindow>& windows, const FeatureRanking& ranking,
    const AblationConfig& cfg) {
    if (!cfg.checkpoints.empty() && cfg.checkpoints.back() > ranking.order.size())
        throw DimensionError("ablate_progressive: checkpoint exceeds ranking length");
    std::vector<std::pair<std::size_t, double>> curve;
    curve.emplace_back(0, patched_run_crps(model, tok, windows, sae, {}, cfg));
    for (std::size_t c : cfg.checkpoints) {
        std::set<std::uint32_t> ablated(ranking.order.begin(),
                                        ranking.order.begin() + static_cast<std::ptrdiff_t>(c));
        curve.emplace_back(c, patched_run_crps(model, tok, windows, sae, ablated, cfg));
    }
    return curve;
}

AblationSummary summarize(const std::vector<AblationRecord>& records) {
    if (records.empty()) throw DimensionError("summarize: no ablation records");
    AblationSummary s;
    s.n = records.size();
    std::vector<double> deltas;
    deltas.reserve(s.n);
    double sum = 0;
    std::size_t positive = 0;
    for (const auto& r : records) {
        deltas.push_back(r.delta);
        sum += r.delta;
        if (r.delta > 0) ++positive;
    }
    std::sort(deltas.begin(), deltas.end());
    s.mean = sum / static_cast<double>(s.n);
    s.median = deltas[(s.n - 1) / 2];  // lower-middle for even n
    s.max = deltas.back();
    double sq = 0;
    for (double d : deltas) sq += (d - s.mean) * (d - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(s.n));
    s.positive_fraction = static_cast<double>(positive) / static_cast<double>(s.n);
    if (s.median > 0) s.max_over_median = s.max / s.median;
    return s;
}

}  // namespace tsmi
