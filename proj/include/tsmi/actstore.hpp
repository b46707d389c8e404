#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsmi/matrix.hpp"
#include "tsmi/model.hpp"

namespace tsmi {

// One manifest entry per captured window: which rows of the shard came from
// where, and the absolute timestep of the first row within its series (so
// downstream correlation can align rows with ground-truth channels).
struct ShardManifestEntry {
    std::size_t window_id = 0;
    std::string source;
    std::size_t row_offset = 0;   // first row in the shard
    std::size_t row_count = 0;
    std::size_t series_start = 0;  // timestep of the first row within the series
};

struct ActivationShard {
    HookSite site;
    std::size_t d_model = 0;
    Matrix rows;  // n_rows x d_model
    std::vector<ShardManifestEntry> manifest;

    std::size_t n_rows() const { return rows.rows(); }
};

struct ShardStats {
    std::vector<real> mean;    // per dimension
    std::vector<real> stddev;  // per dimension
    real mean_l2 = 0;          // mean row L2 norm
};

// Runs forward_capture over every window and writes one shard per site.
// Encoder sites store context-position rows, decoder/cross sites store
// decoded-position rows. Returns the shard paths in site order.
std::vector<std::string> extract_activations(const Model& model,
                                             const std::vector<TokenizedWindow>& windows,
                                             const std::vector<HookSite>& sites,
                                             const std::string& out_dir);

std::string shard_path(const std::string& dir, const HookSite& site);

void write_shard(const ActivationShard& shard, const std::string& path);
ActivationShard read_shard(const std::string& path);

ShardStats compute_stats(const ActivationShard& shard);

// Deterministically shuffled epoch batches over an in-memory shard. Each
// epoch visits every row exactly once; the final batch may be short.
class BatchStream {
public:
    BatchStream(const ActivationShard& shard, std::size_t batch, std::uint64_t shuffle_seed);

    // Batch matrix (b x d_model); advances to the next epoch automatically.
    Matrix next();
    std::size_t epoch() const { return epoch_; }

private:
    const ActivationShard& shard_;
    std::size_t batch_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;

    void reshuffle();
};

}  // namespace tsmi
