#include "tsmi/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "tsmi/errors.hpp"
#include "tsmi/rng.hpp"

namespace tsmi {
namespace {

constexpr real kNormEps = real(1e-6);
constexpr real kMaskValue = real(-1e30);

std::string u2s(std::size_t v) { return std::to_string(v); }

Matrix head_slice(const Matrix& m, std::size_t h, std::size_t dh) {
    Matrix out(m.rows(), dh);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const real* src = m.row(i) + h * dh;
        real* dst = out.row(i);
        for (std::size_t j = 0; j < dh; ++j) dst[j] = src[j];
    }
    return out;
}

void head_merge(Matrix& full, const Matrix& part, std::size_t h, std::size_t dh) {
    for (std::size_t i = 0; i < part.rows(); ++i) {
        const real* src = part.row(i);
        real* dst = full.row(i) + h * dh;
        for (std::size_t j = 0; j < dh; ++j) dst[j] += src[j];
    }
}

struct AttnCache {
    Matrix q, k, v;
    std::vector<Matrix> probs;  // one T x T_kv matrix per head
    Matrix ctx;
};

Matrix attn_forward(const AttentionWeights& w, const Matrix& xq, const Matrix& xkv,
                    std::size_t n_heads, bool causal, AttnCache* cache) {
    Matrix q = matmul_nt(xq, w.wq.value);
    Matrix k = matmul_nt(xkv, w.wk.value);
    Matrix v = matmul_nt(xkv, w.wv.value);
    const std::size_t d = q.cols();
    const std::size_t dh = d / n_heads;
    const real inv_scale = real(1) / std::sqrt(static_cast<real>(dh));
    Matrix ctx(q.rows(), d);
    std::vector<Matrix> probs_store;
    if (cache) probs_store.reserve(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const Matrix qh = head_slice(q, h, dh);
        const Matrix kh = head_slice(k, h, dh);
        const Matrix vh = head_slice(v, h, dh);
        Matrix scores = matmul_nt(qh, kh);
        scale_inplace(scores, inv_scale);
        if (causal) {
            for (std::size_t i = 0; i < scores.rows(); ++i)
                for (std::size_t j = i + 1; j < scores.cols(); ++j) scores(i, j) = kMaskValue;
        }
        Matrix probs = softmax_rows(scores);
        const Matrix ctxh = matmul(probs, vh);
        head_merge(ctx, ctxh, h, dh);
        if (cache) probs_store.push_back(std::move(probs));
    }
    Matrix out = matmul_nt(ctx, w.wo.value);
    if (cache) {
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs_store);
        cache->ctx = std::move(ctx);
    }
    return out;
}

// dxq and dxkv may alias (self-attention); both are accumulated into.
void attn_backward(AttentionWeights& w, const Matrix& xq, const Matrix& xkv,
                   const AttnCache& cache, const Matrix& dout, std::size_t n_heads,
                   Matrix& dxq, Matrix& dxkv) {
    const std::size_t d = dout.cols();
    const std::size_t dh = d / n_heads;
    const real inv_scale = real(1) / std::sqrt(static_cast<real>(dh));

    add_inplace(w.wo.grad, matmul_tn(dout, cache.ctx));
    const Matrix dctx = matmul(dout, w.wo.value);

    Matrix dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const Matrix dctxh = head_slice(dctx, h, dh);
        const Matrix kh = head_slice(cache.k, h, dh);
        const Matrix qh = head_slice(cache.q, h, dh);
        const Matrix vh = head_slice(cache.v, h, dh);
        const Matrix& probs = cache.probs[h];
        const Matrix dprobs = matmul_nt(dctxh, vh);
        head_merge(dv, matmul_tn(probs, dctxh), h, dh);
        Matrix dscores = softmax_rows_backward(probs, dprobs);
        scale_inplace(dscores, inv_scale);
        head_merge(dq, matmul(dscores, kh), h, dh);
        head_merge(dk, matmul_tn(dscores, qh), h, dh);
    }
    add_inplace(w.wq.grad, matmul_tn(dq, xq));
    add_inplace(w.wk.grad, matmul_tn(dk, xkv));
    add_inplace(w.wv.grad, matmul_tn(dv, xkv));
    add_inplace(dxq, matmul(dq, w.wq.value));
    add_inplace(dxkv, matmul(dk, w.wk.value));
    add_inplace(dxkv, matmul(dv, w.wv.value));
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    real* d = out.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (d[i] < real(0)) d[i] = real(0);
    return out;
}

struct EncBlockCache {
    Matrix x_in, n1, x1, n2, hidden;
    AttnCache attn;
};

struct DecBlockCache {
    Matrix y_in, n1, y1, nc, y2, n2, hidden;
    AttnCache self_attn, cross;
};

struct EncCache {
    std::vector<EncBlockCache> blocks;
    Matrix x_final;  // input to the final norm
};

struct DecCache {
    std::vector<DecBlockCache> blocks;
    Matrix y_final;
    Matrix yn;  // normalized decoder output feeding the head
};

void apply_site(const HookSite& site, Matrix& act, const SiteEdits* edits,
                SiteCapture* capture) {
    if (capture) {
        auto it = capture->find(site);
        if (it != capture->end()) it->second = act;
    }
    if (edits) {
        auto it = edits->find(site);
        if (it != edits->end()) {
            Matrix edited = it->second(act);
            if (!edited.same_shape(act))
                throw DimensionError("forward_patch: edit at " + site_name(site) +
                                     " changed activation shape");
            act = std::move(edited);
        }
    }
}

}  // namespace

std::string site_name(const HookSite& s) {
    switch (s.kind) {
        case HookKind::encoder_block_out: return "enc" + u2s(s.block);
        case HookKind::decoder_block_out: return "dec" + u2s(s.block);
        case HookKind::cross_attention_out: return "cross" + u2s(s.block);
    }
    return "invalid";
}

HookSite parse_site(const std::string& name) {
    auto tail = [&](std::size_t n) {
        return static_cast<std::size_t>(std::stoul(name.substr(n)));
    };
    try {
        if (name.rfind("enc", 0) == 0) return {HookKind::encoder_block_out, tail(3)};
        if (name.rfind("dec", 0) == 0) return {HookKind::decoder_block_out, tail(3)};
        if (name.rfind("cross", 0) == 0) return {HookKind::cross_attention_out, tail(5)};
    } catch (const std::exception&) {
    }
    throw ConfigError("unrecognized hook site '" + name + "' (expected encN/decN/crossN)");
}

void ModelConfig::validate() const {
    std::string bad;
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
        bad += "model.d_model must be a positive multiple of model.n_heads; ";
    if (n_encoder_blocks == 0) bad += "model.n_encoder_blocks must be >= 1; ";
    if (n_decoder_blocks == 0) bad += "model.n_decoder_blocks must be >= 1; ";
    if (d_ff == 0) bad += "model.d_ff must be >= 1; ";
    if (vocab < 3) bad += "model.vocab must cover bins plus specials; ";
    if (max_context == 0) bad += "model.max_context must be >= 1; ";
    if (!bad.empty()) throw ConfigError(bad);
}

bool ModelConfig::site_valid(const HookSite& s) const {
    switch (s.kind) {
        case HookKind::encoder_block_out: return s.block < n_encoder_blocks;
        case HookKind::decoder_block_out: return s.block < n_decoder_blocks;
        case HookKind::cross_attention_out: return s.block < n_decoder_blocks;
    }
    return false;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    Rng rng(mix_seed(cfg.seed, 0x6d6f64656c));
    auto init = [&](const std::string& name, std::size_t r, std::size_t c, double std_dev) {
        Matrix m(r, c);
        real* d = m.data();
        for (std::size_t i = 0; i < m.size(); ++i)
            d[i] = static_cast<real>(normal(rng) * std_dev);
        return Parameter(name, std::move(m));
    };
    auto ones = [](const std::string& name, std::size_t n) {
        return Parameter(name, Matrix(1, n, real(1)));
    };
    const double w_std = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    const double ff_std = 1.0 / std::sqrt(static_cast<double>(cfg.d_ff));

    tok_emb = init("tok_emb", cfg.vocab, cfg.d_model, 0.02);
    pos_emb = init("pos_emb", cfg.max_context, cfg.d_model, 0.02);
    auto make_attn = [&](const std::string& prefix) {
        AttentionWeights w;
        w.wq = init(prefix + ".wq", cfg.d_model, cfg.d_model, w_std);
        w.wk = init(prefix + ".wk", cfg.d_model, cfg.d_model, w_std);
        w.wv = init(prefix + ".wv", cfg.d_model, cfg.d_model, w_std);
        w.wo = init(prefix + ".wo", cfg.d_model, cfg.d_model, w_std);
        return w;
    };
    for (std::size_t i = 0; i < cfg.n_encoder_blocks; ++i) {
        EncoderBlock b;
        const std::string p = "enc" + u2s(i);
        b.norm1 = ones(p + ".norm1", cfg.d_model);
        b.attn = make_attn(p + ".attn");
        b.norm2 = ones(p + ".norm2", cfg.d_model);
        b.ff_w1 = init(p + ".ff_w1", cfg.d_ff, cfg.d_model, w_std);
        b.ff_w2 = init(p + ".ff_w2", cfg.d_model, cfg.d_ff, ff_std);
        encoder.push_back(std::move(b));
    }
    for (std::size_t i = 0; i < cfg.n_decoder_blocks; ++i) {
        DecoderBlock b;
        const std::string p = "dec" + u2s(i);
        b.norm1 = ones(p + ".norm1", cfg.d_model);
        b.self_attn = make_attn(p + ".self_attn");
        b.norm_cross = ones(p + ".norm_cross", cfg.d_model);
        b.cross_attn = make_attn(p + ".cross_attn");
        b.norm2 = ones(p + ".norm2", cfg.d_model);
        b.ff_w1 = init(p + ".ff_w1", cfg.d_ff, cfg.d_model, w_std);
        b.ff_w2 = init(p + ".ff_w2", cfg.d_model, cfg.d_ff, ff_std);
        decoder.push_back(std::move(b));
    }
    enc_final_norm = ones("enc_final_norm", cfg.d_model);
    dec_final_norm = ones("dec_final_norm", cfg.d_model);
    head = init("head", cfg.vocab, cfg.d_model, w_std);
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out{&tok_emb, &pos_emb};
    auto add_attn = [&](AttentionWeights& w) {
        out.push_back(&w.wq);
        out.push_back(&w.wk);
        out.push_back(&w.wv);
        out.push_back(&w.wo);
    };
    for (auto& b : encoder) {
        out.push_back(&b.norm1);
        add_attn(b.attn);
        out.push_back(&b.norm2);
        out.push_back(&b.ff_w1);
        out.push_back(&b.ff_w2);
    }
    for (auto& b : decoder) {
        out.push_back(&b.norm1);
        add_attn(b.self_attn);
        out.push_back(&b.norm_cross);
        add_attn(b.cross_attn);
        out.push_back(&b.norm2);
        out.push_back(&b.ff_w1);
        out.push_back(&b.ff_w2);
    }
    out.push_back(&enc_final_norm);
    out.push_back(&dec_final_norm);
    out.push_back(&head);
    return out;
}

namespace {

Matrix embed(const Model& m, const std::vector<TokenId>& tokens) {
    const auto& cfg = m.config();
    if (tokens.size() > cfg.max_context)
        throw DimensionError("sequence length " + u2s(tokens.size()) +
                             " exceeds max_context " + u2s(cfg.max_context));
    Matrix x(tokens.size(), cfg.d_model);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] >= cfg.vocab)
            throw DimensionError("token id " + std::to_string(tokens[t]) +
                                 " out of vocab " + u2s(cfg.vocab));
        const real* te = m.tok_emb.value.row(tokens[t]);
        const real* pe = m.pos_emb.value.row(t);
        real* xr = x.row(t);
        for (std::size_t j = 0; j < cfg.d_model; ++j) xr[j] = te[j] + pe[j];
    }
    return x;
}

Matrix encoder_forward(const Model& m, const std::vector<TokenId>& tokens,
                       const SiteEdits* edits, SiteCapture* capture, EncCache* cache) {
    const auto& cfg = m.config();
    if (cache) cache->blocks.resize(cfg.n_encoder_blocks);
    Matrix x = embed(m, tokens);
    for (std::size_t i = 0; i < cfg.n_encoder_blocks; ++i) {
        const auto& b = m.encoder[i];
        EncBlockCache* bc = cache ? &cache->blocks[i] : nullptr;
        Matrix n1 = rmsnorm(x, b.norm1.value, kNormEps);
        Matrix a = attn_forward(b.attn, n1, n1, cfg.n_heads, false, bc ? &bc->attn : nullptr);
        add_inplace(a, x);  // a becomes x1
        Matrix n2 = rmsnorm(a, b.norm2.value, kNormEps);
        Matrix hidden = relu(matmul_nt(n2, b.ff_w1.value));
        Matrix ff = matmul_nt(hidden, b.ff_w2.value);
        add_inplace(ff, a);  // ff becomes x2
        if (bc) {
            bc->x_in = std::move(x);
            bc->n1 = std::move(n1);
            bc->x1 = a;
            bc->n2 = std::move(n2);
            bc->hidden = std::move(hidden);
        }
        apply_site({HookKind::encoder_block_out, i}, ff, edits, capture);
        x = std::move(ff);
    }
    if (cache) cache->x_final = x;
    return rmsnorm(x, m.enc_final_norm.value, kNormEps);
}

Matrix decoder_forward(const Model& m, const Matrix& memory,
                       const std::vector<TokenId>& tokens, const SiteEdits* edits,
                       SiteCapture* capture, DecCache* cache) {
    const auto& cfg = m.config();
    if (cache) cache->blocks.resize(cfg.n_decoder_blocks);
    Matrix y = embed(m, tokens);
    for (std::size_t i = 0; i < cfg.n_decoder_blocks; ++i) {
        const auto& b = m.decoder[i];
        DecBlockCache* bc = cache ? &cache->blocks[i] : nullptr;
        Matrix n1 = rmsnorm(y, b.norm1.value, kNormEps);
        Matrix a =
            attn_forward(b.self_attn, n1, n1, cfg.n_heads, true, bc ? &bc->self_attn : nullptr);
        add_inplace(a, y);  // y1
        Matrix nc = rmsnorm(a, b.norm_cross.value, kNormEps);
        Matrix cross =
            attn_forward(b.cross_attn, nc, memory, cfg.n_heads, false, bc ? &bc->cross : nullptr);
        apply_site({HookKind::cross_attention_out, i}, cross, edits, capture);
        add_inplace(cross, a);  // y2
        Matrix n2 = rmsnorm(cross, b.norm2.value, kNormEps);
        Matrix hidden = relu(matmul_nt(n2, b.ff_w1.value));
        Matrix ff = matmul_nt(hidden, b.ff_w2.value);
        add_inplace(ff, cross);  // y3
        if (bc) {
            bc->y_in = std::move(y);
            bc->n1 = std::move(n1);
            bc->y1 = a;
            bc->nc = std::move(nc);
            bc->y2 = cross;
            bc->n2 = std::move(n2);
            bc->hidden = std::move(hidden);
        }
        apply_site({HookKind::decoder_block_out, i}, ff, edits, capture);
        y = std::move(ff);
    }
    if (cache) cache->y_final = y;
    Matrix yn = rmsnorm(y, m.dec_final_norm.value, kNormEps);
    Matrix logits = matmul_nt(yn, m.head.value);
    if (cache) cache->yn = std::move(yn);
    return logits;
}

Matrix relu_backward(const Matrix& hidden, const Matrix& dhidden) {
    Matrix out = dhidden;
    const real* h = hidden.data();
    real* d = out.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (h[i] <= real(0)) d[i] = real(0);
    return out;
}

void embed_backward(Model& m, const std::vector<TokenId>& tokens, const Matrix& dx) {
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const real* g = dx.row(t);
        real* te = m.tok_emb.grad.row(tokens[t]);
        real* pe = m.pos_emb.grad.row(t);
        for (std::size_t j = 0; j < dx.cols(); ++j) {
            te[j] += g[j];
            pe[j] += g[j];
        }
    }
}

// Returns the gradient wrt the block input; dmemory accumulates.
void decoder_backward(Model& m, const std::vector<TokenId>& tokens, const Matrix& memory,
                      DecCache& cache, const Matrix& dlogits, Matrix& dmemory) {
    const auto& cfg = m.config();
    add_inplace(m.head.grad, matmul_tn(dlogits, cache.yn));
    Matrix dyn = matmul(dlogits, m.head.value);
    Matrix dy =
        rmsnorm_backward(cache.y_final, m.dec_final_norm.value, kNormEps, dyn,
                         m.dec_final_norm.grad);
    for (std::size_t i = cfg.n_decoder_blocks; i-- > 0;) {
        auto& b = m.decoder[i];
        auto& bc = cache.blocks[i];
        // Feed-forward sublayer.
        Matrix dhidden = matmul(dy, b.ff_w2.value);
        add_inplace(b.ff_w2.grad, matmul_tn(dy, bc.hidden));
        Matrix dpre = relu_backward(bc.hidden, dhidden);
        add_inplace(b.ff_w1.grad, matmul_tn(dpre, bc.n2));
        Matrix dn2 = matmul(dpre, b.ff_w1.value);
        Matrix dy2 = rmsnorm_backward(bc.y2, b.norm2.value, kNormEps, dn2, b.norm2.grad);
        add_inplace(dy2, dy);
        // Cross-attention sublayer.
        Matrix dnc(bc.nc.rows(), bc.nc.cols());
        attn_backward(b.cross_attn, bc.nc, memory, bc.cross, dy2, cfg.n_heads, dnc, dmemory);
        Matrix dy1 =
            rmsnorm_backward(bc.y1, b.norm_cross.value, kNormEps, dnc, b.norm_cross.grad);
        add_inplace(dy1, dy2);
        // Causal self-attention sublayer.
        Matrix dn1(bc.n1.rows(), bc.n1.cols());
        attn_backward(b.self_attn, bc.n1, bc.n1, bc.self_attn, dy1, cfg.n_heads, dn1, dn1);
        Matrix dy_in = rmsnorm_backward(bc.y_in, b.norm1.value, kNormEps, dn1, b.norm1.grad);
        add_inplace(dy_in, dy1);
        dy = std::move(dy_in);
    }
    embed_backward(m, tokens, dy);
}

void encoder_backward(Model& m, const std::vector<TokenId>& tokens, EncCache& cache,
                      const Matrix& dmemory) {
    const auto& cfg = m.config();
    Matrix dx = rmsnorm_backward(cache.x_final, m.enc_final_norm.value, kNormEps, dmemory,
                                 m.enc_final_norm.grad);
    for (std::size_t i = cfg.n_encoder_blocks; i-- > 0;) {
        auto& b = m.encoder[i];
        auto& bc = cache.blocks[i];
        Matrix dhidden = matmul(dx, b.ff_w2.value);
        add_inplace(b.ff_w2.grad, matmul_tn(dx, bc.hidden));
        Matrix dpre = relu_backward(bc.hidden, dhidden);
        add_inplace(b.ff_w1.grad, matmul_tn(dpre, bc.n2));
        Matrix dn2 = matmul(dpre, b.ff_w1.value);
        Matrix dx1 = rmsnorm_backward(bc.x1, b.norm2.value, kNormEps, dn2, b.norm2.grad);
        add_inplace(dx1, dx);
        Matrix dn1(bc.n1.rows(), bc.n1.cols());
        attn_backward(b.attn, bc.n1, bc.n1, bc.attn, dx1, cfg.n_heads, dn1, dn1);
        Matrix dx_in = rmsnorm_backward(bc.x_in, b.norm1.value, kNormEps, dn1, b.norm1.grad);
        add_inplace(dx_in, dx1);
        dx = std::move(dx_in);
    }
    embed_backward(m, tokens, dx);
}

std::vector<TokenId> teacher_forced_input(const Model& m, const TokenizedWindow& w) {
    // Decoder start token is pad (vocab layout: bins, pad, eos).
    const TokenId start = static_cast<TokenId>(m.config().vocab - 2);
    std::vector<TokenId> dec{start};
    dec.insert(dec.end(), w.target_tokens.begin(), w.target_tokens.end() - 1);
    return dec;
}

}  // namespace

Matrix Model::run_encoder(const std::vector<TokenId>& tokens, const SiteEdits* edits,
                          SiteCapture* capture) const {
    return encoder_forward(*this, tokens, edits, capture, nullptr);
}

Matrix Model::run_decoder(const Matrix& memory, const std::vector<TokenId>& tokens,
                          const SiteEdits* edits, SiteCapture* capture) const {
    return decoder_forward(*this, memory, tokens, edits, capture, nullptr);
}

double Model::loss_and_grad(const std::vector<TokenizedWindow>& batch, bool compute_grad) {
    if (batch.empty()) throw DimensionError("loss_and_grad: empty batch");
    double total = 0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const auto& w : batch) {
        if (w.target_tokens.empty()) throw DimensionError("loss_and_grad: empty target");
        EncCache ec;
        DecCache dc;
        const std::vector<TokenId> dec_tokens = teacher_forced_input(*this, w);
        const Matrix memory =
            encoder_forward(*this, w.context_tokens, nullptr, nullptr, compute_grad ? &ec : nullptr);
        const Matrix logits = decoder_forward(*this, memory, dec_tokens, nullptr, nullptr,
                                              compute_grad ? &dc : nullptr);
        const std::size_t horizon = w.target_tokens.size();
        const double inv_h = 1.0 / static_cast<double>(horizon);
        Matrix dlogits(logits.rows(), logits.cols());
        double window_loss = 0;
        for (std::size_t t = 0; t < horizon; ++t) {
            const real* row = logits.row(t);
            real mx = row[0];
            for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, row[j]);
            double sum = 0;
            for (std::size_t j = 0; j < logits.cols(); ++j)
                sum += std::exp(static_cast<double>(row[j] - mx));
            const TokenId y = w.target_tokens[t];
            window_loss += std::log(sum) + static_cast<double>(mx) - static_cast<double>(row[y]);
            if (compute_grad) {
                real* g = dlogits.row(t);
                const real coef = static_cast<real>(inv_h * inv_batch);
                for (std::size_t j = 0; j < logits.cols(); ++j)
                    g[j] = static_cast<real>(std::exp(static_cast<double>(row[j] - mx)) / sum) *
                           coef;
                g[y] -= coef;
            }
        }
        total += window_loss * inv_h;
        if (compute_grad) {
            Matrix dmemory(memory.rows(), memory.cols());
            decoder_backward(*this, dec_tokens, memory, dc, dlogits, dmemory);
            encoder_backward(*this, w.context_tokens, ec, dmemory);
        }
    }
    return total * inv_batch;
}

TrainLog train(Model& model, const std::vector<TokenizedWindow>& windows, std::size_t steps,
               std::size_t batch, const LrSchedule& sched, std::uint64_t seed,
               const AdamConfig& adam) {
    if (windows.empty()) throw DimensionError("train: no windows");
    if (batch == 0) batch = 1;
    TrainLog log;
    log.loss_per_step.reserve(steps);
    auto params = model.parameters();
    for (std::size_t step = 0; step < steps; ++step) {
        Rng rng(mix_seed(seed, 0x747261696e + step));
        std::vector<TokenizedWindow> picked;
        picked.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            const auto idx = std::min(
                windows.size() - 1,
                static_cast<std::size_t>(uniform01(rng) * static_cast<double>(windows.size())));
            picked.push_back(windows[idx]);
        }
        const double loss = model.loss_and_grad(picked, true);
        if (!std::isfinite(loss))
            throw DivergenceError("train: non-finite loss at step " + u2s(step));
        const real lr = sched.lr(step);
        for (Parameter* p : params) adam_step(*p, lr, adam);
        log.loss_per_step.push_back(loss);
    }
    return log;
}

double eval_cross_entropy(Model& model, const std::vector<TokenizedWindow>& windows) {
    return model.loss_and_grad(windows, false);
}

namespace {

ForecastSampleSet sample_forecast(const Model& model, const TokenizedWindow& w,
                                  const TokenizerConfig& tok, std::size_t n_samples,
                                  real temperature, std::uint64_t seed,
                                  const SiteEdits* edits) {
    if (n_samples == 0) throw DimensionError("forecast: n_samples must be >= 1");
    const auto& cfg = model.config();
    const std::size_t horizon = w.target_tokens.size();
    // Encoder runs exactly once; encoder-site edits fire once per forecast.
    const Matrix memory = model.run_encoder(w.context_tokens, edits, nullptr);
    ForecastSampleSet out;
    out.samples = Matrix(n_samples, horizon);
    out.source = w.source;
    out.offset = w.offset;
    const TokenId start = static_cast<TokenId>(cfg.vocab - 2);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Rng rng(mix_seed(seed, 0x73616d70 + s));
        std::vector<TokenId> tokens{start};
        std::vector<TokenId> drawn;
        for (std::size_t h = 0; h < horizon; ++h) {
            const Matrix logits = model.run_decoder(memory, tokens, edits, nullptr);
            const real* row = logits.row(logits.rows() - 1);
            TokenId next = 0;
            if (temperature < real(1e-6)) {
                real best = row[0];
                for (std::size_t j = 1; j < tok.n_bins; ++j)
                    if (row[j] > best) {
                        best = row[j];
                        next = static_cast<TokenId>(j);
                    }
            } else {
                real mx = row[0];
                for (std::size_t j = 1; j < tok.n_bins; ++j) mx = std::max(mx, row[j]);
                std::vector<double> cdf(tok.n_bins);
                double sum = 0;
                for (std::size_t j = 0; j < tok.n_bins; ++j) {
                    sum += std::exp(static_cast<double>(row[j] - mx) /
                                    static_cast<double>(temperature));
                    cdf[j] = sum;
                }
                const double u = uniform01(rng) * sum;
                next = static_cast<TokenId>(tok.n_bins - 1);
                for (std::size_t j = 0; j < tok.n_bins; ++j)
                    if (u < cdf[j]) {
                        next = static_cast<TokenId>(j);
                        break;
                    }
            }
            tokens.push_back(next);
            drawn.push_back(next);
        }
        const auto values = dequantize(drawn, w.scale, tok);
        for (std::size_t h = 0; h < horizon; ++h) out.samples(s, h) = values[h];
    }
    return out;
}

}  // namespace

ForecastSampleSet forecast(const Model& model, const TokenizedWindow& w,
                           const TokenizerConfig& tok, std::size_t n_samples,
                           real temperature, std::uint64_t seed) {
    return sample_forecast(model, w, tok, n_samples, temperature, seed, nullptr);
}

ForecastSampleSet forward_patch(const Model& model, const TokenizedWindow& w,
                                const TokenizerConfig& tok, const SiteEdits& edits,
                                std::size_t n_samples, real temperature, std::uint64_t seed) {
    for (const auto& [site, edit] : edits)
        if (!model.config().site_valid(site))
            throw DimensionError("forward_patch: invalid site " + site_name(site));
    return sample_forecast(model, w, tok, n_samples, temperature, seed, &edits);
}

SiteCapture forward_capture(const Model& model, const TokenizedWindow& w,
                            const std::vector<HookSite>& sites) {
    SiteCapture capture;
    for (const auto& s : sites) {
        if (!model.config().site_valid(s))
            throw DimensionError("forward_capture: invalid site " + site_name(s));
        capture[s] = Matrix();
    }
    if (sites.empty()) return capture;
    const Matrix memory = model.run_encoder(w.context_tokens, nullptr, &capture);
    const std::vector<TokenId> dec_tokens = teacher_forced_input(model, w);
    (void)model.run_decoder(memory, dec_tokens, nullptr, &capture);
    return capture;
}

namespace {

constexpr char kModelMagic[4] = {'T', 'S', 'L', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw FormatError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_floats(std::ostream& os, const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        const float f = static_cast<float>(m.data()[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char buf[4];
        for (int b = 0; b < 4; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
        os.write(reinterpret_cast<const char*>(buf), 4);
    }
}

void read_floats(std::istream& is, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        unsigned char buf[4];
        is.read(reinterpret_cast<char*>(buf), 4);
        if (!is) throw FormatError("checkpoint: truncated parameter block");
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[b]) << (8 * b);
        float f;
        std::memcpy(&f, &bits, 4);
        m.data()[i] = static_cast<real>(f);
    }
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("save_checkpoint: cannot open " + path);
    os.write(kModelMagic, 4);
    write_u64(os, kModelVersion);
    const auto& c = model.config();
    for (std::uint64_t v : {static_cast<std::uint64_t>(c.n_encoder_blocks),
                            static_cast<std::uint64_t>(c.n_decoder_blocks),
                            static_cast<std::uint64_t>(c.d_model),
                            static_cast<std::uint64_t>(c.n_heads),
                            static_cast<std::uint64_t>(c.d_ff),
                            static_cast<std::uint64_t>(c.vocab),
                            static_cast<std::uint64_t>(c.max_context), c.seed})
        write_u64(os, v);
    auto params = const_cast<Model&>(model).parameters();
    write_u64(os, params.size());
    for (const Parameter* p : params) {
        write_u64(os, p->name.size());
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u64(os, p->value.rows());
        write_u64(os, p->value.cols());
        write_floats(os, p->value);
    }
    if (!os) throw FormatError("save_checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("load_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kModelMagic, 4) != 0)
        throw FormatError("load_checkpoint: bad magic in " + path);
    if (read_u64(is) != kModelVersion)
        throw FormatError("load_checkpoint: unsupported version in " + path);
    ModelConfig c;
    c.n_encoder_blocks = read_u64(is);
    c.n_decoder_blocks = read_u64(is);
    c.d_model = read_u64(is);
    c.n_heads = read_u64(is);
    c.d_ff = read_u64(is);
    c.vocab = read_u64(is);
    c.max_context = read_u64(is);
    c.seed = read_u64(is);
    Model model(c);
    auto params = model.parameters();
    const std::uint64_t n = read_u64(is);
    if (n != params.size()) throw FormatError("load_checkpoint: parameter count mismatch");
    for (Parameter* p : params) {
        const std::uint64_t len = read_u64(is);
        std::string name(len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(len));
        if (!is || name != p->name)
            throw FormatError("load_checkpoint: expected parameter '" + p->name + "', found '" +
                              name + "'");
        const std::uint64_t r = read_u64(is), cc = read_u64(is);
        if (r != p->value.rows() || cc != p->value.cols())
            throw FormatError("load_checkpoint: shape mismatch for '" + p->name + "'");
        read_floats(is, p->value);
    }
    return model;
}

}  // namespace tsmi
