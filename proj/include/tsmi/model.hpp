#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tsmi/matrix.hpp"
#include "tsmi/optim.hpp"
#include "tsmi/tokenizer.hpp"

namespace tsmi {

enum class HookKind : std::uint32_t {
    encoder_block_out = 0,
    decoder_block_out = 1,
    cross_attention_out = 2,
};

// A tap point in the forward pass. encoder/decoder_block_out is the block
// output after its final residual addition; cross_attention_out is the
// cross-attention sublayer output before it joins the residual stream.
struct HookSite {
    HookKind kind = HookKind::encoder_block_out;
    std::size_t block = 0;

    auto operator<=>(const HookSite&) const = default;
};

std::string site_name(const HookSite& s);
HookSite parse_site(const std::string& name);

struct ModelConfig {
    std::size_t n_encoder_blocks = 4;
    std::size_t n_decoder_blocks = 4;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t d_ff = 256;
    std::size_t vocab = 258;
    std::size_t max_context = 128;
    std::uint64_t seed = 0;

    void validate() const;
    bool site_valid(const HookSite& s) const;
};

struct AttentionWeights {
    Parameter wq, wk, wv, wo;  // each d_model x d_model
};

struct EncoderBlock {
    Parameter norm1;
    AttentionWeights attn;
    Parameter norm2;
    Parameter ff_w1;  // d_ff x d_model
    Parameter ff_w2;  // d_model x d_ff
};

struct DecoderBlock {
    Parameter norm1;
    AttentionWeights self_attn;
    Parameter norm_cross;
    AttentionWeights cross_attn;
    Parameter norm2;
    Parameter ff_w1;
    Parameter ff_w2;
};

// Replaces the activation matrix at a hook site; must preserve shape.
using SiteEdit = std::function<Matrix(const Matrix&)>;
using SiteEdits = std::map<HookSite, SiteEdit>;
using SiteCapture = std::map<HookSite, Matrix>;

struct ForecastSampleSet {
    Matrix samples;  // n_samples x H, dequantized values
    std::string source;
    std::size_t offset = 0;
};

struct TrainLog {
    std::vector<double> loss_per_step;
};

class Model {
public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter*> parameters();

    // Encoder over context tokens; returns the normalized memory (C x d).
    Matrix run_encoder(const std::vector<TokenId>& tokens, const SiteEdits* edits,
                       SiteCapture* capture) const;
    // Teacher-forced decoder pass; returns logits (T x vocab).
    Matrix run_decoder(const Matrix& memory, const std::vector<TokenId>& tokens,
                       const SiteEdits* edits, SiteCapture* capture) const;

    // Mean per-token cross-entropy of the batch; accumulates gradients into
    // every Parameter when compute_grad is set.
    double loss_and_grad(const std::vector<TokenizedWindow>& batch, bool compute_grad);

    ModelConfig cfg_;
    Parameter tok_emb;  // vocab x d_model
    Parameter pos_emb;  // max_context x d_model
    std::vector<EncoderBlock> encoder;
    std::vector<DecoderBlock> decoder;
    Parameter enc_final_norm;
    Parameter dec_final_norm;
    Parameter head;  // vocab x d_model
};

TrainLog train(Model& model, const std::vector<TokenizedWindow>& windows, std::size_t steps,
               std::size_t batch, const LrSchedule& sched, std::uint64_t seed,
               const AdamConfig& adam = {});

double eval_cross_entropy(Model& model, const std::vector<TokenizedWindow>& windows);

ForecastSampleSet forecast(const Model& model, const TokenizedWindow& w,
                           const TokenizerConfig& tok, std::size_t n_samples,
                           real temperature, std::uint64_t seed);

SiteCapture forward_capture(const Model& model, const TokenizedWindow& w,
                            const std::vector<HookSite>& sites);

ForecastSampleSet forward_patch(const Model& model, const TokenizedWindow& w,
                                const TokenizerConfig& tok, const SiteEdits& edits,
                                std::size_t n_samples, real temperature, std::uint64_t seed);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace tsmi
