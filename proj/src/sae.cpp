#include "tsmi/sae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "tsmi/errors.hpp"
#include "tsmi/optim.hpp"
#include "tsmi/rng.hpp"

namespace tsmi {
namespace {

using json = nlohmann::json;

void renormalize_decoder_columns(Matrix& w_dec) {
    const std::size_t d = w_dec.rows(), n = w_dec.cols();
    for (std::size_t j = 0; j < n; ++j) {
        double norm = 0;
        for (std::size_t i = 0; i < d; ++i) norm += static_cast<double>(w_dec(i, j)) * w_dec(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) continue;
        const real inv = static_cast<real>(1.0 / norm);
        for (std::size_t i = 0; i < d; ++i) w_dec(i, j) *= inv;
    }
}

// Removes from each decoder-column gradient its component along the column,
// so the optimizer step stays tangent to the unit sphere.
void project_decoder_grad(const Matrix& w_dec, Matrix& grad) {
    const std::size_t d = w_dec.rows(), n = w_dec.cols();
    for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t i = 0; i < d; ++i)
            dot += static_cast<double>(grad(i, j)) * w_dec(i, j);
        for (std::size_t i = 0; i < d; ++i)
            grad(i, j) -= static_cast<real>(dot) * w_dec(i, j);
    }
}

}  // namespace

SparseCode sae_encode(const SaeParams& p, const real* x) {
    std::vector<real> centered(p.d_model);
    for (std::size_t i = 0; i < p.d_model; ++i) centered[i] = x[i] - p.b_dec.data()[i];
    std::vector<real> pre(p.d_sae);
    for (std::size_t j = 0; j < p.d_sae; ++j) {
        const real* row = p.w_enc.row(j);
        real acc = p.b_enc.data()[j];
        for (std::size_t i = 0; i < p.d_model; ++i) acc += row[i] * centered[i];
        pre[j] = acc;
    }
    const std::size_t keep = std::min(p.k, p.d_sae);
    std::vector<std::uint32_t> order(p.d_sae);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                      order.end(), [&](std::uint32_t a, std::uint32_t b) {
                          if (pre[a] != pre[b]) return pre[a] > pre[b];
                          return a < b;  // tie: lowest index wins
                      });
    SparseCode code;
    code.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(code.indices.begin(), code.indices.end());
    code.values.reserve(keep);
    for (std::uint32_t idx : code.indices) code.values.push_back(pre[idx]);
    return code;
}

std::vector<real> sae_decode(const SaeParams& p, const SparseCode& z) {
    std::vector<real> out(p.b_dec.data(), p.b_dec.data() + p.d_model);
    for (std::size_t n = 0; n < z.indices.size(); ++n) {
        const std::uint32_t j = z.indices[n];
        if (j >= p.d_sae)
            throw DimensionError("sae_decode: feature index " + std::to_string(j) +
                                 " out of range d_sae=" + std::to_string(p.d_sae));
        const real v = z.values[n];
        for (std::size_t i = 0; i < p.d_model; ++i) out[i] += v * p.w_dec(i, j);
    }
    return out;
}

std::vector<SparseCode> sae_encode_batch(const SaeParams& p, const Matrix& x) {
    if (x.cols() != p.d_model)
        throw DimensionError("sae_encode_batch: width " + std::to_string(x.cols()) +
                             " != d_model " + std::to_string(p.d_model));
    std::vector<SparseCode> codes(x.rows());
    const auto n = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < n; ++r)
        codes[static_cast<std::size_t>(r)] = sae_encode(p, x.row(static_cast<std::size_t>(r)));
    return codes;
}

DeadScanResult dead_feature_scan(const SaeParams& p, const Matrix& sample) {
    std::vector<char> fired(p.d_sae, 0);
    const auto codes = sae_encode_batch(p, sample);
    for (const auto& code : codes)
        for (std::uint32_t j : code.indices) fired[j] = 1;
    DeadScanResult res;
    std::size_t alive = 0;
    for (std::size_t j = 0; j < p.d_sae; ++j) {
        if (fired[j]) {
            ++alive;
        } else {
            res.dead_ids.push_back(static_cast<std::uint32_t>(j));
        }
    }
    res.active_fraction = static_cast<double>(alive) / static_cast<double>(p.d_sae);
    return res;
}

bool resample_dead(SaeParams& p, const std::vector<std::uint32_t>& dead_ids,
                   const Matrix& high_loss_inputs) {
    if (dead_ids.empty()) return true;
    // Residual directions of the worst-reconstructed inputs.
    std::vector<std::pair<double, std::vector<real>>> candidates;
    for (std::size_t r = 0; r < high_loss_inputs.rows(); ++r) {
        const real* x = high_loss_inputs.row(r);
        const auto code = sae_encode(p, x);
        const auto xhat = sae_decode(p, code);
        std::vector<real> resid(p.d_model);
        double norm = 0;
        for (std::size_t i = 0; i < p.d_model; ++i) {
            resid[i] = x[i] - xhat[i];
            norm += static_cast<double>(resid[i]) * resid[i];
        }
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        const real inv = static_cast<real>(1.0 / norm);
        for (auto& v : resid) v *= inv;
        candidates.emplace_back(norm, std::move(resid));
    }
    if (candidates.empty()) return false;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    // Average encoder-row norm over live features.
    std::vector<char> is_dead(p.d_sae, 0);
    for (std::uint32_t j : dead_ids) is_dead[j] = 1;
    double live_norm = 0;
    std::size_t live_count = 0;
    for (std::size_t j = 0; j < p.d_sae; ++j) {
        if (is_dead[j]) continue;
        double n2 = 0;
        const real* row = p.w_enc.row(j);
        for (std::size_t i = 0; i < p.d_model; ++i) n2 += static_cast<double>(row[i]) * row[i];
        live_norm += std::sqrt(n2);
        ++live_count;
    }
    const double enc_scale = 0.2 * (live_count > 0 ? live_norm / static_cast<double>(live_count)
                                                   : 1.0);
    for (std::size_t n = 0; n < dead_ids.size(); ++n) {
        const std::uint32_t j = dead_ids[n];
        const auto& dir = candidates[n % candidates.size()].second;
        real* enc_row = p.w_enc.row(j);
        for (std::size_t i = 0; i < p.d_model; ++i) {
            p.w_dec(i, j) = dir[i];
            enc_row[i] = static_cast<real>(enc_scale) * dir[i];
        }
        p.b_enc.data()[j] = 0;
    }
    return true;
}

double sae_fvu(const SaeParams& p, const Matrix& rows) {
    if (rows.rows() == 0) return 0;
    std::vector<double> mean(p.d_model, 0);
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t i = 0; i < p.d_model; ++i) mean[i] += rows(r, i);
    for (auto& m : mean) m /= static_cast<double>(rows.rows());
    double mse = 0, var = 0;
    const auto codes = sae_encode_batch(p, rows);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto xhat = sae_decode(p, codes[r]);
        for (std::size_t i = 0; i < p.d_model; ++i) {
            const double e = static_cast<double>(rows(r, i)) - xhat[i];
            const double c = static_cast<double>(rows(r, i)) - mean[i];
            mse += e * e;
            var += c * c;
        }
    }
    if (var <= 0) return mse > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    return mse / var;
}

double sae_loss_and_grad(const SaeParams& p, const Matrix& batch, Matrix& gw_enc,
                         Matrix& gb_enc, Matrix& gw_dec, Matrix& gb_dec) {
    const std::size_t d = p.d_model;
    const std::size_t b = batch.rows();
    if (batch.cols() != d)
        throw DimensionError("sae_loss_and_grad: batch cols " + std::to_string(batch.cols()) +
                             " != d_model " + std::to_string(d));
    if (!gw_enc.same_shape(p.w_enc) || !gb_enc.same_shape(p.b_enc) ||
        !gw_dec.same_shape(p.w_dec) || !gb_dec.same_shape(p.b_dec))
        throw DimensionError("sae_loss_and_grad: gradient shape mismatch");

    const auto codes = sae_encode_batch(p, batch);
    const double coef = 2.0 / (static_cast<double>(d) * static_cast<double>(b));
    double loss = 0;
    for (std::size_t r = 0; r < b; ++r) {
        const real* x = batch.row(r);
        const auto xhat = sae_decode(p, codes[r]);
        std::vector<real> dxhat(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double e = xhat[i] - static_cast<double>(x[i]);
            loss += e * e;
            dxhat[i] = static_cast<real>(coef * e);
        }
        // Decoder path.
        real* dbdec = gb_dec.data();
        for (std::size_t i = 0; i < d; ++i) dbdec[i] += dxhat[i];
        const auto& code = codes[r];
        for (std::size_t n = 0; n < code.indices.size(); ++n) {
            const std::uint32_t j = code.indices[n];
            const real zj = code.values[n];
            double dz = 0;
            for (std::size_t i = 0; i < d; ++i) {
                gw_dec(i, j) += dxhat[i] * zj;
                dz += static_cast<double>(p.w_dec(i, j)) * dxhat[i];
            }
            // Encoder path through the retained slot.
            gb_enc.data()[j] += static_cast<real>(dz);
            real* enc_row = gw_enc.row(j);
            const real* benc_dir = p.w_enc.row(j);
            for (std::size_t i = 0; i < d; ++i) {
                enc_row[i] += static_cast<real>(dz) * (x[i] - p.b_dec.data()[i]);
                dbdec[i] -= static_cast<real>(dz) * benc_dir[i];
            }
        }
    }
    return loss / (static_cast<double>(d) * static_cast<double>(b));
}

std::pair<SaeParams, SaeTrainLog> train_sae(const ActivationShard& shard,
                                            const HookSite& site, const SaeTrainConfig& cfg) {
    if (shard.n_rows() < cfg.batch)
        throw DimensionError("train_sae: shard has " + std::to_string(shard.n_rows()) +
                             " rows, need at least one batch of " + std::to_string(cfg.batch));
    const std::size_t d = shard.d_model;
    SaeParams p;
    p.d_model = d;
    p.d_sae = cfg.d_sae;
    p.k = cfg.k;
    p.site = site;

    Rng rng(mix_seed(cfg.seed, 0x736165));
    p.w_dec = Matrix(d, cfg.d_sae);
    for (std::size_t j = 0; j < cfg.d_sae; ++j) {
        double norm = 0;
        std::vector<double> col(d);
        for (std::size_t i = 0; i < d; ++i) {
            col[i] = normal(rng);
            norm += col[i] * col[i];
        }
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < d; ++i)
            p.w_dec(i, j) = static_cast<real>(col[i] / norm);
    }
    // b_dec = mean activation over a warmup sample.
    const std::size_t warmup = std::min(shard.n_rows(), cfg.batch * 10);
    p.b_dec = Matrix(1, d);
    {
        std::vector<double> mean(d, 0);
        for (std::size_t r = 0; r < warmup; ++r)
            for (std::size_t i = 0; i < d; ++i) mean[i] += shard.rows(r, i);
        for (std::size_t i = 0; i < d; ++i)
            p.b_dec.data()[i] = static_cast<real>(mean[i] / static_cast<double>(warmup));
    }
    // Encoder starts as the decoder transpose.
    p.w_enc = Matrix(cfg.d_sae, d);
    for (std::size_t j = 0; j < cfg.d_sae; ++j)
        for (std::size_t i = 0; i < d; ++i) p.w_enc(j, i) = p.w_dec(i, j);
    p.b_enc = Matrix(1, cfg.d_sae);

    SaeTrainLog log;
    if (cfg.steps == 0) {
        log.final_fvu = sae_fvu(p, shard.rows);
        return {p, log};
    }

    Parameter wenc("sae.w_enc", std::move(p.w_enc));
    Parameter benc("sae.b_enc", std::move(p.b_enc));
    Parameter wdec("sae.w_dec", std::move(p.w_dec));
    Parameter bdec("sae.b_dec", std::move(p.b_dec));
    auto sync = [&] {
        p.w_enc = wenc.value;
        p.b_enc = benc.value;
        p.w_dec = wdec.value;
        p.b_dec = bdec.value;
    };

    LrSchedule sched{cfg.base_lr, cfg.steps, std::min(cfg.warmup_steps, cfg.steps / 10)};
    BatchStream stream(shard, cfg.batch, cfg.seed);
    log.mse_per_step.reserve(cfg.steps);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const Matrix batch = stream.next();
        sync();
        const double loss =
            sae_loss_and_grad(p, batch, wenc.grad, benc.grad, wdec.grad, bdec.grad);
        if (!std::isfinite(loss))
            throw DivergenceError("train_sae: non-finite loss at step " + std::to_string(step));
        log.mse_per_step.push_back(loss);

        project_decoder_grad(wdec.value, wdec.grad);
        const real lr = sched.lr(step);
        adam_step(wenc, lr);
        adam_step(benc, lr);
        adam_step(wdec, lr);
        adam_step(bdec, lr);
        renormalize_decoder_columns(wdec.value);

        if (cfg.dead_scan_every > 0 && (step + 1) % cfg.dead_scan_every == 0 &&
            step + 1 < cfg.steps) {
            sync();
            // Scan sample and high-loss candidates from fresh stream batches.
            std::vector<Matrix> scan_batches;
            std::size_t scan_rows = 0;
            for (std::size_t i = 0; i < cfg.dead_scan_batches; ++i) {
                scan_batches.push_back(stream.next());
                scan_rows += scan_batches.back().rows();
            }
            Matrix sample(scan_rows, d);
            std::size_t cur = 0;
            for (const auto& m : scan_batches) {
                std::memcpy(sample.row(cur), m.data(), m.size() * sizeof(real));
                cur += m.rows();
            }
            const auto scan = dead_feature_scan(p, sample);
            if (!scan.dead_ids.empty()) {
                // Worst-reconstructed rows as resampling candidates.
                const auto codes2 = sae_encode_batch(p, sample);
                std::vector<std::pair<double, std::size_t>> losses(sample.rows());
                for (std::size_t r = 0; r < sample.rows(); ++r) {
                    const auto xhat = sae_decode(p, codes2[r]);
                    double e2 = 0;
                    for (std::size_t i = 0; i < d; ++i) {
                        const double e = static_cast<double>(sample(r, i)) - xhat[i];
                        e2 += e * e;
                    }
                    losses[r] = {e2, r};
                }
                std::stable_sort(losses.begin(), losses.end(),
                                 [](const auto& a, const auto& b) { return a.first > b.first; });
                const std::size_t n_cand = std::min<std::size_t>(scan.dead_ids.size() * 2 + 8,
                                                                 losses.size());
                Matrix worst(n_cand, d);
                for (std::size_t i = 0; i < n_cand; ++i)
                    std::memcpy(worst.row(i), sample.row(losses[i].second), d * sizeof(real));
                const bool ok = resample_dead(p, scan.dead_ids, worst);
                ResampleEvent ev{step + 1, scan.dead_ids.size(), !ok};
                log.resample_events.push_back(ev);
                if (ok) {
                    wenc.value = p.w_enc;
                    benc.value = p.b_enc;
                    wdec.value = p.w_dec;
                    // Zero Adam moments on the touched slices.
                    for (std::uint32_t j : scan.dead_ids) {
                        for (std::size_t i = 0; i < d; ++i) {
                            wenc.adam_m(j, i) = wenc.adam_v(j, i) = 0;
                            wdec.adam_m(i, j) = wdec.adam_v(i, j) = 0;
                        }
                        benc.adam_m.data()[j] = benc.adam_v.data()[j] = 0;
                    }
                }
            }
        }
    }
    sync();
    log.final_fvu = sae_fvu(p, shard.rows);
    {
        const std::size_t sample_rows = std::min(shard.n_rows(), cfg.batch * cfg.dead_scan_batches);
        Matrix sample(sample_rows, d);
        std::memcpy(sample.data(), shard.rows.data(), sample.size() * sizeof(real));
        log.final_active_fraction = dead_feature_scan(p, sample).active_fraction;
    }
    return {p, log};
}

namespace {

constexpr char kSaeMagic[4] = {'T', 'S', 'A', 'E'};
constexpr std::uint32_t kSaeVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is, const std::string& path) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw FormatError("sae checkpoint " + path + ": truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_mat(std::ostream& os, const Matrix& m) {
    write_u64(os, m.rows());
    write_u64(os, m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const float f = static_cast<float>(m.data()[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char buf[4];
        for (int b = 0; b < 4; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
        os.write(reinterpret_cast<const char*>(buf), 4);
    }
}

Matrix read_mat(std::istream& is, const std::string& path) {
    const std::uint64_t r = read_u64(is, path), c = read_u64(is, path);
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) {
        unsigned char buf[4];
        is.read(reinterpret_cast<char*>(buf), 4);
        if (!is) throw FormatError("sae checkpoint " + path + ": truncated blob");
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[b]) << (8 * b);
        float f;
        std::memcpy(&f, &bits, 4);
        m.data()[i] = static_cast<real>(f);
    }
    return m;
}

}  // namespace

void save_sae(const SaeParams& p, const SaeTrainConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("save_sae: cannot open " + path);
    os.write(kSaeMagic, 4);
    write_u64(os, kSaeVersion);
    write_u64(os, static_cast<std::uint64_t>(p.site.kind));
    write_u64(os, p.site.block);
    write_u64(os, p.d_model);
    write_u64(os, p.d_sae);
    write_u64(os, p.k);
    write_mat(os, p.w_enc);
    write_mat(os, p.b_enc);
    write_mat(os, p.w_dec);
    write_mat(os, p.b_dec);
    const json echo{{"d_sae", cfg.d_sae},   {"k", cfg.k},
                    {"steps", cfg.steps},   {"batch", cfg.batch},
                    {"base_lr", cfg.base_lr}, {"warmup_steps", cfg.warmup_steps},
                    {"dead_scan_every", cfg.dead_scan_every},
                    {"dead_scan_batches", cfg.dead_scan_batches},
                    {"seed", cfg.seed}};
    const std::string footer = echo.dump();
    const auto footer_offset = static_cast<std::uint64_t>(os.tellp());
    os.write(footer.data(), static_cast<std::streamsize>(footer.size()));
    write_u64(os, footer_offset);
    if (!os) throw FormatError("save_sae: write failed for " + path);
}

std::pair<SaeParams, SaeTrainConfig> load_sae(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("load_sae: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kSaeMagic, 4) != 0)
        throw FormatError("load_sae: bad magic in " + path);
    if (read_u64(is, path) != kSaeVersion)
        throw FormatError("load_sae: unsupported version in " + path);
    SaeParams p;
    p.site.kind = static_cast<HookKind>(read_u64(is, path));
    p.site.block = read_u64(is, path);
    p.d_model = read_u64(is, path);
    p.d_sae = read_u64(is, path);
    p.k = read_u64(is, path);
    p.w_enc = read_mat(is, path);
    p.b_enc = read_mat(is, path);
    p.w_dec = read_mat(is, path);
    p.b_dec = read_mat(is, path);
    is.seekg(-8, std::ios::end);
    const auto trailer_pos = is.tellg();
    const std::uint64_t footer_offset = read_u64(is, path);
    is.seekg(static_cast<std::streamoff>(footer_offset));
    std::string footer(static_cast<std::size_t>(trailer_pos - is.tellg()), '\0');
    is.read(footer.data(), static_cast<std::streamsize>(footer.size()));
    SaeTrainConfig cfg;
    try {
        const json echo = json::parse(footer);
        cfg.d_sae = echo.at("d_sae").get<std::size_t>();
        cfg.k = echo.at("k").get<std::size_t>();
        cfg.steps = echo.at("steps").get<std::size_t>();
        cfg.batch = echo.at("batch").get<std::size_t>();
        cfg.base_lr = echo.at("base_lr").get<real>();
        cfg.warmup_steps = echo.at("warmup_steps").get<std::size_t>();
        cfg.dead_scan_every = echo.at("dead_scan_every").get<std::size_t>();
        cfg.dead_scan_batches = echo.at("dead_scan_batches").get<std::size_t>();
        cfg.seed = echo.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError("load_sae: corrupt config footer in " + path + ": " + e.what());
    }
    return {p, cfg};
}

}  // namespace tsmi
