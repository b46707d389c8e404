#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsmi/actstore.hpp"
#include "tsmi/matrix.hpp"
#include "tsmi/model.hpp"

namespace tsmi {

// TopK sparse autoencoder:
//   z = TopK(W_enc (x - b_dec) + b_enc, k),  x_hat = W_dec z + b_dec
// Decoder columns are kept at unit L2 norm throughout training.
struct SaeParams {
    Matrix w_enc;  // d_sae x d_model
    Matrix b_enc;  // 1 x d_sae
    Matrix w_dec;  // d_model x d_sae
    Matrix b_dec;  // 1 x d_model
    std::size_t k = 16;
    std::size_t d_sae = 0;
    std::size_t d_model = 0;
    HookSite site;
};

// Retained pre-activations, index-sorted. Values may be negative; the k
// largest by value win, ties broken by lowest feature index.
struct SparseCode {
    std::vector<std::uint32_t> indices;
    std::vector<real> values;
};

struct SaeTrainConfig {
    std::size_t d_sae = 512;
    std::size_t k = 16;
    std::size_t steps = 5000;
    std::size_t batch = 256;
    real base_lr = real(3e-4);
    std::size_t warmup_steps = 100;
    std::size_t dead_scan_every = 500;
    std::size_t dead_scan_batches = 50;
    std::uint64_t seed = 0;
};

struct ResampleEvent {
    std::size_t step = 0;
    std::size_t dead_count = 0;
    bool degenerate = false;  // no usable residual directions
};

struct SaeTrainLog {
    std::vector<double> mse_per_step;
    std::vector<ResampleEvent> resample_events;
    double final_fvu = 0;           // MSE / input variance
    double final_active_fraction = 0;
};

SparseCode sae_encode(const SaeParams& p, const real* x);
std::vector<real> sae_decode(const SaeParams& p, const SparseCode& z);

// Batch encode; returns one code per row of x.
std::vector<SparseCode> sae_encode_batch(const SaeParams& p, const Matrix& x);

// Batch-mean reconstruction loss ||x - x_hat||^2 / d_model with analytic
// gradients (TopK support held fixed) accumulated into the four matrices.
double sae_loss_and_grad(const SaeParams& p, const Matrix& batch, Matrix& gw_enc,
                         Matrix& gb_enc, Matrix& gw_dec, Matrix& gb_dec);

std::pair<SaeParams, SaeTrainLog> train_sae(const ActivationShard& shard,
                                            const HookSite& site, const SaeTrainConfig& cfg);

struct DeadScanResult {
    std::vector<std::uint32_t> dead_ids;
    double active_fraction = 0;
};

// A feature is dead iff it enters no TopK set over the sampled batches.
DeadScanResult dead_feature_scan(const SaeParams& p, const Matrix& sample);

// Revives dead features from high-residual inputs: decoder column = the
// normalized residual direction, encoder row = 0.2 x average live row norm
// along it, encoder bias zeroed. Returns false when the inputs carry no
// usable residual direction (degenerate case, params untouched).
bool resample_dead(SaeParams& p, const std::vector<std::uint32_t>& dead_ids,
                   const Matrix& high_loss_inputs);

// Reconstruction diagnostics over a full pass.
double sae_fvu(const SaeParams& p, const Matrix& rows);

void save_sae(const SaeParams& p, const SaeTrainConfig& cfg, const std::string& path);
std::pair<SaeParams, SaeTrainConfig> load_sae(const std::string& path);

}  // namespace tsmi
