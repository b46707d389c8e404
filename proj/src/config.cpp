#include "tsmi/config.hpp"

#include <fstream>

#include <json.hpp>

#include "tsmi/errors.hpp"

namespace tsmi {
namespace {

using json = nlohmann::json;

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
    std::string bad;
    auto note = [&](const std::string& msg) { bad += msg + "; "; };
    try {
        tokenizer.validate();
    } catch (const ConfigError& e) {
        bad += e.what();
    }
    try {
        model.validate();
    } catch (const ConfigError& e) {
        bad += e.what();
    }
    if (data.suite_length < 128) note("data.suite_length must be >= 128");
    if (data.context_len + data.pred_len > data.suite_length)
        note("data.context_len + data.pred_len must fit in data.suite_length");
    if (data.pred_len == 0) note("data.pred_len must be >= 1");
    if (data.holdout_fraction < 0 || data.holdout_fraction >= 1)
        note("data.holdout_fraction must be in [0, 1)");
    if (model.max_context < data.context_len || model.max_context < data.pred_len + 1)
        note("model.max_context must cover context_len and pred_len + 1");
    if (model.vocab != tokenizer.vocab_size())
        note("model.vocab must equal tokenizer.n_bins + 2");
    if (sae.d_sae != sae_expansion_factor * model.d_model)
        note("sae.d_sae must equal sae_expansion_factor * model.d_model");
    if (sae.k > sae.d_sae) note("sae.k must be <= d_sae");
    if (sites.empty()) note("sites must name at least one hook site");
    auto check_site = [&](const std::string& s, const std::string& key) {
        try {
            if (!model.site_valid(parse_site(s))) note(key + " '" + s + "' out of range");
        } catch (const ConfigError&) {
            note(key + " '" + s + "' unrecognized");
        }
    };
    for (const auto& s : sites) check_site(s, "sites entry");
    check_site(taxonomy.site, "taxonomy.site");
    check_site(ablation.site, "ablation.site");
    for (const auto& s : ablation.progressive_sites) check_site(s, "ablation.progressive_sites");
    if (taxonomy.r_threshold < 0 || taxonomy.r_threshold > 1)
        note("taxonomy.r_threshold must be in [0, 1]");
    try {
        AblationConfig ac;
        ac.n_windows = ablation.n_windows;
        ac.n_samples = ablation.n_samples;
        ac.n_features = ablation.n_features;
        ac.checkpoints = ablation.checkpoints;
        ac.validate();
    } catch (const ConfigError& e) {
        bad += e.what();
    }
    if (ablation.single_top == 0) note("ablation.single_top must be >= 1");
    if (ablation.n_features > sae.d_sae) note("ablation.n_features must be <= sae.d_sae");
    if (!bad.empty()) throw ConfigError("invalid configuration: " + bad);
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    ExperimentConfig c;
    try {
        get_if(j, "seed", c.seed);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            get_if(d, "suite_count_per_family", c.data.suite_count_per_family);
            get_if(d, "suite_length", c.data.suite_length);
            get_if(d, "csv_path", c.data.csv_path);
            get_if(d, "csv_value_column", c.data.csv_value_column);
            get_if(d, "context_len", c.data.context_len);
            get_if(d, "pred_len", c.data.pred_len);
            get_if(d, "stride", c.data.stride);
            get_if(d, "max_windows_per_series", c.data.max_windows_per_series);
            get_if(d, "holdout_fraction", c.data.holdout_fraction);
        }
        if (j.contains("tokenizer")) {
            const auto& t = j.at("tokenizer");
            get_if(t, "n_bins", c.tokenizer.n_bins);
            get_if(t, "clip_lo", c.tokenizer.clip_lo);
            get_if(t, "clip_hi", c.tokenizer.clip_hi);
        }
        if (j.contains("model")) {
            const auto& m = j.at("model");
            get_if(m, "n_encoder_blocks", c.model.n_encoder_blocks);
            get_if(m, "n_decoder_blocks", c.model.n_decoder_blocks);
            get_if(m, "d_model", c.model.d_model);
            get_if(m, "n_heads", c.model.n_heads);
            get_if(m, "d_ff", c.model.d_ff);
            get_if(m, "train_steps", c.model_train.train_steps);
            get_if(m, "train_batch", c.model_train.train_batch);
            get_if(m, "base_lr", c.model_train.base_lr);
            get_if(m, "warmup_steps", c.model_train.warmup_steps);
        }
        get_if(j, "sites", c.sites);
        if (j.contains("sae")) {
            const auto& s = j.at("sae");
            get_if(s, "expansion_factor", c.sae_expansion_factor);
            get_if(s, "k", c.sae.k);
            get_if(s, "steps", c.sae.steps);
            get_if(s, "batch", c.sae.batch);
            get_if(s, "base_lr", c.sae.base_lr);
            get_if(s, "warmup_steps", c.sae.warmup_steps);
            get_if(s, "dead_scan_every", c.sae.dead_scan_every);
            get_if(s, "dead_scan_batches", c.sae.dead_scan_batches);
        }
        if (j.contains("taxonomy")) {
            const auto& t = j.at("taxonomy");
            get_if(t, "r_threshold", c.taxonomy.r_threshold);
            get_if(t, "site", c.taxonomy.site);
        }
        if (j.contains("ablation")) {
            const auto& a = j.at("ablation");
            get_if(a, "site", c.ablation.site);
            get_if(a, "progressive_sites", c.ablation.progressive_sites);
            get_if(a, "n_windows", c.ablation.n_windows);
            get_if(a, "n_samples", c.ablation.n_samples);
            get_if(a, "n_features", c.ablation.n_features);
            get_if(a, "single_top", c.ablation.single_top);
            get_if(a, "checkpoints", c.ablation.checkpoints);
            get_if(a, "temperature", c.ablation.temperature);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field has wrong type: ") + e.what());
    }
    // Derived fields: the model vocabulary tracks the tokenizer, seeds are
    // global, sequence budget covers both segments.
    c.model.vocab = c.tokenizer.vocab_size();
    c.model.max_context = std::max(c.data.context_len, c.data.pred_len + 1);
    c.model.seed = c.seed;
    c.sae.seed = c.seed;
    c.sae.d_sae = c.sae_expansion_factor * c.model.d_model;
    if (c.ablation.progressive_sites.empty())
        c.ablation.progressive_sites.push_back(c.ablation.site);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["data"] = {{"suite_count_per_family", c.data.suite_count_per_family},
                 {"suite_length", c.data.suite_length},
                 {"csv_path", c.data.csv_path},
                 {"csv_value_column", c.data.csv_value_column},
                 {"context_len", c.data.context_len},
                 {"pred_len", c.data.pred_len},
                 {"stride", c.data.stride},
                 {"max_windows_per_series", c.data.max_windows_per_series},
                 {"holdout_fraction", c.data.holdout_fraction}};
    j["tokenizer"] = {{"n_bins", c.tokenizer.n_bins},
                      {"clip_lo", c.tokenizer.clip_lo},
                      {"clip_hi", c.tokenizer.clip_hi}};
    j["model"] = {{"n_encoder_blocks", c.model.n_encoder_blocks},
                  {"n_decoder_blocks", c.model.n_decoder_blocks},
                  {"d_model", c.model.d_model},
                  {"n_heads", c.model.n_heads},
                  {"d_ff", c.model.d_ff},
                  {"train_steps", c.model_train.train_steps},
                  {"train_batch", c.model_train.train_batch},
                  {"base_lr", c.model_train.base_lr},
                  {"warmup_steps", c.model_train.warmup_steps}};
    j["sites"] = c.sites;
    j["sae"] = {{"expansion_factor", c.sae_expansion_factor},
                {"k", c.sae.k},
                {"steps", c.sae.steps},
                {"batch", c.sae.batch},
                {"base_lr", c.sae.base_lr},
                {"warmup_steps", c.sae.warmup_steps},
                {"dead_scan_every", c.sae.dead_scan_every},
                {"dead_scan_batches", c.sae.dead_scan_batches}};
    j["taxonomy"] = {{"r_threshold", c.taxonomy.r_threshold}, {"site", c.taxonomy.site}};
    j["ablation"] = {{"site", c.ablation.site},
                     {"progressive_sites", c.ablation.progressive_sites},
                     {"n_windows", c.ablation.n_windows},
                     {"n_samples", c.ablation.n_samples},
                     {"n_features", c.ablation.n_features},
                     {"single_top", c.ablation.single_top},
                     {"checkpoints", c.ablation.checkpoints},
                     {"temperature", c.ablation.temperature}};
    return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string s = serialize_config(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace tsmi
