#include "tsmi/actstore.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tsmi/errors.hpp"
#include "tsmi/rng.hpp"

namespace tsmi {
namespace {

using json = nlohmann::json;

constexpr char kShardMagic[4] = {'T', 'S', 'A', 'C'};
constexpr std::uint32_t kShardVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is, const std::string& path, const char* what) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is)
        throw FormatError("shard " + path + ": truncated while reading " + what + " at byte " +
                          std::to_string(is.tellg()));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

std::string shard_path(const std::string& dir, const HookSite& site) {
    return dir + "/" + site_name(site) + ".tsac";
}

void write_shard(const ActivationShard& shard, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("write_shard: cannot open " + path);
    os.write(kShardMagic, 4);
    write_u64(os, kShardVersion);
    write_u64(os, static_cast<std::uint64_t>(shard.site.kind));
    write_u64(os, shard.site.block);
    write_u64(os, shard.d_model);
    write_u64(os, shard.n_rows());
    // Contiguous little-endian float32 block.
    for (std::size_t i = 0; i < shard.rows.size(); ++i) {
        const float f = static_cast<float>(shard.rows.data()[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char buf[4];
        for (int b = 0; b < 4; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
        os.write(reinterpret_cast<const char*>(buf), 4);
    }
    const auto footer_offset = static_cast<std::uint64_t>(os.tellp());
    json manifest = json::array();
    for (const auto& e : shard.manifest) {
        manifest.push_back({{"window_id", e.window_id},
                            {"source", e.source},
                            {"row_offset", e.row_offset},
                            {"row_count", e.row_count},
                            {"series_start", e.series_start}});
    }
    const std::string footer = manifest.dump();
    os.write(footer.data(), static_cast<std::streamsize>(footer.size()));
    write_u64(os, footer_offset);
    if (!os) throw FormatError("write_shard: write failed for " + path);
}

ActivationShard read_shard(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("read_shard: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kShardMagic, 4) != 0)
        throw FormatError("shard " + path + ": bad magic at byte 0");
    if (read_u64(is, path, "version") != kShardVersion)
        throw FormatError("shard " + path + ": unsupported version");
    ActivationShard shard;
    shard.site.kind = static_cast<HookKind>(read_u64(is, path, "site kind"));
    shard.site.block = read_u64(is, path, "site block");
    shard.d_model = read_u64(is, path, "d_model");
    const std::uint64_t n_rows = read_u64(is, path, "n_rows");
    shard.rows = Matrix(n_rows, shard.d_model);
    for (std::size_t i = 0; i < shard.rows.size(); ++i) {
        unsigned char buf[4];
        is.read(reinterpret_cast<char*>(buf), 4);
        if (!is)
            throw FormatError("shard " + path + ": truncated float block at byte " +
                              std::to_string(44 + 4 * i));
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[b]) << (8 * b);
        float f;
        std::memcpy(&f, &bits, 4);
        shard.rows.data()[i] = static_cast<real>(f);
    }
    const auto footer_start = is.tellg();
    is.seekg(-8, std::ios::end);
    const auto trailer_pos = is.tellg();
    const std::uint64_t footer_offset = read_u64(is, path, "footer offset");
    if (footer_offset != static_cast<std::uint64_t>(footer_start))
        throw FormatError("shard " + path + ": footer offset mismatch (header says " +
                          std::to_string(footer_offset) + ")");
    const auto footer_len = static_cast<std::size_t>(trailer_pos - footer_start);
    std::string footer(footer_len, '\0');
    is.seekg(footer_start);
    is.read(footer.data(), static_cast<std::streamsize>(footer_len));
    json manifest;
    try {
        manifest = json::parse(footer);
    } catch (const json::exception& e) {
        throw FormatError("shard " + path + ": corrupt manifest footer at byte " +
                          std::to_string(footer_offset) + ": " + e.what());
    }
    for (const auto& e : manifest) {
        ShardManifestEntry m;
        m.window_id = e.at("window_id").get<std::size_t>();
        m.source = e.at("source").get<std::string>();
        m.row_offset = e.at("row_offset").get<std::size_t>();
        m.row_count = e.at("row_count").get<std::size_t>();
        m.series_start = e.at("series_start").get<std::size_t>();
        shard.manifest.push_back(std::move(m));
    }
    return shard;
}

std::vector<std::string> extract_activations(const Model& model,
                                             const std::vector<TokenizedWindow>& windows,
                                             const std::vector<HookSite>& sites,
                                             const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::size_t d = model.config().d_model;
    std::vector<ActivationShard> shards(sites.size());
    for (std::size_t s = 0; s < sites.size(); ++s) {
        shards[s].site = sites[s];
        shards[s].d_model = d;
    }
    // First pass: row counts per site (encoder sites yield C rows, decoder
    // sites H rows), so the row block can be filled in one allocation.
    std::vector<std::size_t> totals(sites.size(), 0);
    for (const auto& w : windows) {
        for (std::size_t s = 0; s < sites.size(); ++s) {
            totals[s] += sites[s].kind == HookKind::encoder_block_out ? w.context_tokens.size()
                                                                      : w.target_tokens.size();
        }
    }
    for (std::size_t s = 0; s < sites.size(); ++s) shards[s].rows = Matrix(totals[s], d);

    std::vector<std::size_t> cursor(sites.size(), 0);
    for (std::size_t wid = 0; wid < windows.size(); ++wid) {
        const auto& w = windows[wid];
        SiteCapture cap = forward_capture(model, w, sites);
        for (std::size_t s = 0; s < sites.size(); ++s) {
            const Matrix& act = cap.at(sites[s]);
            if (act.cols() != d)
                throw DimensionError("extract: site " + site_name(sites[s]) +
                                     " produced width " + std::to_string(act.cols()) +
                                     ", shard expects " + std::to_string(d));
            ShardManifestEntry e;
            e.window_id = wid;
            e.source = w.source;
            e.row_offset = cursor[s];
            e.row_count = act.rows();
            e.series_start = sites[s].kind == HookKind::encoder_block_out
                                 ? w.offset
                                 : w.offset + w.context_tokens.size();
            for (std::size_t r = 0; r < act.rows(); ++r)
                std::memcpy(shards[s].rows.row(cursor[s] + r), act.row(r), d * sizeof(real));
            cursor[s] += act.rows();
            shards[s].manifest.push_back(std::move(e));
        }
    }
    std::vector<std::string> paths;
    for (const auto& shard : shards) {
        std::string path = shard_path(out_dir, shard.site);
        write_shard(shard, path);
        paths.push_back(std::move(path));
    }
    return paths;
}

ShardStats compute_stats(const ActivationShard& shard) {
    ShardStats st;
    const std::size_t d = shard.d_model;
    const std::size_t n = shard.n_rows();
    st.mean.assign(d, 0);
    st.stddev.assign(d, 0);
    if (n == 0) return st;
    std::vector<double> sum(d, 0), sumsq(d, 0);
    double l2 = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const real* row = shard.rows.row(r);
        double rowsq = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = row[j];
            sum[j] += v;
            sumsq[j] += v * v;
            rowsq += v * v;
        }
        l2 += std::sqrt(rowsq);
    }
    for (std::size_t j = 0; j < d; ++j) {
        const double mu = sum[j] / static_cast<double>(n);
        st.mean[j] = static_cast<real>(mu);
        const double var = std::max(0.0, sumsq[j] / static_cast<double>(n) - mu * mu);
        st.stddev[j] = static_cast<real>(std::sqrt(var));
    }
    st.mean_l2 = static_cast<real>(l2 / static_cast<double>(n));
    return st;
}

BatchStream::BatchStream(const ActivationShard& shard, std::size_t batch,
                         std::uint64_t shuffle_seed)
    : shard_(shard), batch_(batch == 0 ? 1 : batch), seed_(shuffle_seed) {
    if (shard.n_rows() == 0) throw DimensionError("BatchStream: empty shard");
    order_.resize(shard.n_rows());
    reshuffle();
}

void BatchStream::reshuffle() {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    Rng rng(mix_seed(seed_, 0x65706f63 + epoch_));
    for (std::size_t i = order_.size() - 1; i > 0; --i) {
        const auto j = std::min(
            i, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1)));
        std::swap(order_[i], order_[j]);
    }
    cursor_ = 0;
}

Matrix BatchStream::next() {
    if (cursor_ >= order_.size()) {
        ++epoch_;
        reshuffle();
    }
    const std::size_t count = std::min(batch_, order_.size() - cursor_);
    Matrix out(count, shard_.d_model);
    for (std::size_t i = 0; i < count; ++i)
        std::memcpy(out.row(i), shard_.rows.row(order_[cursor_ + i]),
                    shard_.d_model * sizeof(real));
    cursor_ += count;
    return out;
}

}  // namespace tsmi
