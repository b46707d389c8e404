#include "tsmi/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "tsmi/actstore.hpp"
#include "tsmi/causal.hpp"
#include "tsmi/errors.hpp"
#include "tsmi/rng.hpp"
#include "tsmi/svg.hpp"
#include "tsmi/taxonomy.hpp"

namespace tsmi::pipeline {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void require(const std::string& path, const std::string& producing_stage) {
    if (!fs::exists(path))
        throw MissingArtifactError("missing artifact " + path + "; run `" + producing_stage +
                                   "` first");
}

void update_manifest(const ExperimentConfig& cfg, const Paths& paths, const std::string& stage,
                     const std::vector<std::string>& artifacts) {
    json m;
    {
        std::ifstream in(paths.manifest());
        if (in) {
            try {
                in >> m;
            } catch (const json::exception&) {
                m = json::object();
            }
        }
    }
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    m["config_hash"] = hash;
    m["format_version"] = 1;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    m["stages"][stage] = {
        {"artifacts", artifacts},
        {"unix_time", std::chrono::duration_cast<std::chrono::seconds>(now).count()}};
    std::ofstream out(paths.manifest());
    out << m.dump(2) << "\n";
}

std::vector<HookSite> selected_sites(const ExperimentConfig& cfg,
                                     const std::optional<std::string>& filter) {
    std::vector<HookSite> sites;
    for (const auto& s : cfg.sites) {
        if (filter && *filter != s) continue;
        sites.push_back(parse_site(s));
    }
    if (filter && sites.empty())
        throw ConfigError("--site '" + *filter + "' is not in the configured site list");
    return sites;
}

std::vector<TokenizedWindow> tokenize_all(const std::vector<Window>& windows,
                                          const TokenizerConfig& cfg) {
    std::vector<TokenizedWindow> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(tokenize_window(w, cfg));
    return out;
}

// Shard restricted to rows whose source series carries property channels.
ActivationShard filter_to_suite(const ActivationShard& shard,
                                const std::vector<Series>& suite) {
    std::set<std::string> names;
    for (const auto& s : suite) names.insert(s.name);
    std::size_t rows = 0;
    for (const auto& e : shard.manifest)
        if (names.count(e.source)) rows += e.row_count;
    ActivationShard out;
    out.site = shard.site;
    out.d_model = shard.d_model;
    out.rows = Matrix(rows, shard.d_model);
    std::size_t cursor = 0;
    for (const auto& e : shard.manifest) {
        if (!names.count(e.source)) continue;
        ShardManifestEntry copy = e;
        copy.row_offset = cursor;
        for (std::size_t i = 0; i < e.row_count; ++i)
            std::memcpy(out.rows.row(cursor + i), shard.rows.row(e.row_offset + i),
                        shard.d_model * sizeof(real));
        cursor += e.row_count;
        out.manifest.push_back(std::move(copy));
    }
    return out;
}

AblationConfig ablation_runtime_config(const ExperimentConfig& cfg, const HookSite& site) {
    AblationConfig ac;
    ac.site = site;
    ac.n_windows = cfg.ablation.n_windows;
    ac.n_samples = cfg.ablation.n_samples;
    ac.n_features = cfg.ablation.n_features;
    ac.checkpoints = cfg.ablation.checkpoints;
    ac.seed = cfg.seed;
    ac.temperature = cfg.ablation.temperature;
    ac.validate();
    return ac;
}

const std::array<std::pair<ConceptLabel, int>, 10> kConceptColumns = {{
    {ConceptLabel::trend_up, +1},
    {ConceptLabel::trend_down, -1},
    {ConceptLabel::seasonality, +1},
    {ConceptLabel::level_shift_up, +1},
    {ConceptLabel::level_shift_down, -1},
    {ConceptLabel::frequency_high, +1},
    {ConceptLabel::frequency_low, -1},
    {ConceptLabel::high_volatility, +1},
    {ConceptLabel::low_volatility, -1},
    {ConceptLabel::noise, +1},
}};

Channel channel_of(ConceptLabel c) {
    switch (c) {
        case ConceptLabel::trend_up:
        case ConceptLabel::trend_down: return Channel::trend;
        case ConceptLabel::seasonality: return Channel::seasonal;
        case ConceptLabel::level_shift_up:
        case ConceptLabel::level_shift_down: return Channel::level_shift;
        case ConceptLabel::frequency_high:
        case ConceptLabel::frequency_low: return Channel::frequency;
        case ConceptLabel::high_volatility:
        case ConceptLabel::low_volatility: return Channel::volatility;
        default: return Channel::noise;
    }
}

}  // namespace

Datasets load_datasets(const ExperimentConfig& cfg, const Paths& paths) {
    require(paths.suite_dir() + "/suite.json", "gen-data");
    Datasets ds;
    ds.suite = import_suite(paths.suite_dir());
    ds.series = ds.suite;
    if (!cfg.data.csv_path.empty()) {
        require(paths.external_csv(), "gen-data");
        Series ext = load_csv(paths.external_csv(), "value");
        ext.name = "external";
        ds.series.push_back(std::move(ext));
    }
    // Deterministic split: one window in every 1/holdout_fraction goes to
    // the holdout partition, round-robin across the concatenated list.
    const std::size_t modulus =
        cfg.data.holdout_fraction > 0
            ? std::max<std::size_t>(2, static_cast<std::size_t>(
                                           std::llround(1.0 / cfg.data.holdout_fraction)))
            : 0;
    std::size_t counter = 0;
    for (const auto& s : ds.series) {
        const auto windows =
            make_windows(s, cfg.data.context_len, cfg.data.pred_len,
                         cfg.data.max_windows_per_series, cfg.data.stride,
                         mix_seed(cfg.seed, std::hash<std::string>{}(s.name)));
        for (const auto& w : windows) {
            if (modulus != 0 && counter % modulus == 0) {
                ds.holdout_windows.push_back(w);
            } else {
                ds.train_windows.push_back(w);
            }
            ++counter;
        }
    }
    if (ds.train_windows.empty())
        throw ConfigError("dataset produces no training windows; widen stride or series");
    return ds;
}

void run_gen_data(const ExperimentConfig& cfg, const Paths& paths) {
    fs::create_directories(paths.workdir + "/data");
    const auto suite = gen_diagnostic_suite(cfg.seed, cfg.data.suite_count_per_family,
                                            cfg.data.suite_length);
    export_suite(suite, paths.suite_dir());
    std::vector<std::string> artifacts{paths.suite_dir()};
    if (!cfg.data.csv_path.empty()) {
        const Series ext = load_csv(cfg.data.csv_path, cfg.data.csv_value_column);
        std::ofstream out(paths.external_csv());
        out.precision(9);
        out << "t,value\n";
        for (std::size_t t = 0; t < ext.length(); ++t) out << t << "," << ext.values[t] << "\n";
        artifacts.push_back(paths.external_csv());
    }
    update_manifest(cfg, paths, "gen-data", artifacts);
}

void run_train_model(const ExperimentConfig& cfg, const Paths& paths) {
    const Datasets ds = load_datasets(cfg, paths);
    fs::create_directories(paths.workdir + "/model");
    const auto train_tokens = tokenize_all(ds.train_windows, cfg.tokenizer);
    const auto holdout_tokens = tokenize_all(ds.holdout_windows, cfg.tokenizer);

    Model model(cfg.model);
    const double init_ce =
        holdout_tokens.empty() ? 0.0 : eval_cross_entropy(model, holdout_tokens);
    LrSchedule sched{cfg.model_train.base_lr, cfg.model_train.train_steps,
                     cfg.model_train.warmup_steps};
    const TrainLog log = train(model, train_tokens, cfg.model_train.train_steps,
                               cfg.model_train.train_batch, sched, cfg.seed);
    const double final_ce =
        holdout_tokens.empty() ? 0.0 : eval_cross_entropy(model, holdout_tokens);
    save_checkpoint(model, paths.model_ckpt());

    {
        std::ofstream out(paths.train_log());
        out << "step,loss,lr\n";
        for (std::size_t i = 0; i < log.loss_per_step.size(); ++i)
            out << i << "," << fmt9(log.loss_per_step[i]) << "," << fmt9(sched.lr(i)) << "\n";
    }
    {
        std::ofstream out(paths.model_metrics());
        out << json{{"init_holdout_ce", init_ce},
                    {"final_holdout_ce", final_ce},
                    {"final_train_loss",
                     log.loss_per_step.empty() ? 0.0 : log.loss_per_step.back()},
                    {"train_windows", ds.train_windows.size()},
                    {"holdout_windows", ds.holdout_windows.size()}}
                   .dump(2)
            << "\n";
    }
    update_manifest(cfg, paths, "train-model",
                    {paths.model_ckpt(), paths.train_log(), paths.model_metrics()});
}

void run_extract(const ExperimentConfig& cfg, const Paths& paths,
                 const std::optional<std::string>& site_filter) {
    require(paths.model_ckpt(), "train-model");
    const Datasets ds = load_datasets(cfg, paths);
    const Model model = load_checkpoint(paths.model_ckpt());
    const auto tokens = tokenize_all(ds.train_windows, cfg.tokenizer);
    const auto sites = selected_sites(cfg, site_filter);
    const auto shard_paths = extract_activations(model, tokens, sites, paths.acts_dir());
    update_manifest(cfg, paths, "extract", shard_paths);
}

void run_train_sae(const ExperimentConfig& cfg, const Paths& paths,
                   const std::optional<std::string>& site_filter) {
    fs::create_directories(paths.sae_dir());
    std::vector<std::string> artifacts;
    for (const auto& site : selected_sites(cfg, site_filter)) {
        const std::string name = site_name(site);
        const std::string spath = shard_path(paths.acts_dir(), site);
        require(spath, "extract");
        const ActivationShard shard = read_shard(spath);
        const auto [params, log] = train_sae(shard, site, cfg.sae);
        save_sae(params, cfg.sae, paths.sae_ckpt(name));
        {
            std::ofstream out(paths.sae_dir() + "/" + name + "_log.csv");
            out << "step,mse\n";
            for (std::size_t i = 0; i < log.mse_per_step.size(); ++i)
                out << i << "," << fmt9(log.mse_per_step[i]) << "\n";
        }
        {
            std::ofstream out(paths.sae_dir() + "/" + name + "_summary.json");
            json resamples = json::array();
            for (const auto& ev : log.resample_events)
                resamples.push_back({{"step", ev.step},
                                     {"dead_count", ev.dead_count},
                                     {"degenerate", ev.degenerate}});
            out << json{{"site", name},
                        {"final_fvu", log.final_fvu},
                        {"final_active_fraction", log.final_active_fraction},
                        {"resample_events", resamples}}
                       .dump(2)
                << "\n";
        }
        artifacts.push_back(paths.sae_ckpt(name));
    }
    update_manifest(cfg, paths, "train-sae", artifacts);
}

void run_taxonomy(const ExperimentConfig& cfg, const Paths& paths) {
    fs::create_directories(paths.reports_dir());
    const std::string site_str = cfg.taxonomy.site;
    const HookSite site = parse_site(site_str);
    require(paths.sae_ckpt(site_str), "train-sae");
    require(shard_path(paths.acts_dir(), site), "extract");
    const Datasets ds = load_datasets(cfg, paths);
    const SaeParams sae = load_sae(paths.sae_ckpt(site_str)).first;
    const ActivationShard shard =
        filter_to_suite(read_shard(shard_path(paths.acts_dir(), site)), ds.suite);
    const Matrix trace = feature_trace(sae, shard);
    const Matrix channels = channel_matrix(ds.suite, shard);
    const auto profiles = classify_all(trace, channels, cfg.taxonomy.r_threshold);

    {
        std::ofstream out(paths.taxonomy_csv());
        out << "feature_id,site,label,best_score";
        for (const auto& [label, sign] : kConceptColumns)
            out << ",r_" << concept_name(label);
        out << "\n";
        for (const auto& p : profiles) {
            out << p.feature_id << "," << site_str << "," << concept_name(p.best_label) << ","
                << fmt9(p.best_score);
            for (const auto& [label, sign] : kConceptColumns)
                out << ","
                    << fmt9(sign * p.r[static_cast<std::size_t>(channel_of(label))]);
            out << "\n";
        }
    }
    const TaxonomyReport rep = taxonomy_report(profiles);
    {
        json counts;
        for (std::size_t c = 0; c < kNumConcepts; ++c)
            counts[concept_name(static_cast<ConceptLabel>(c))] = rep.counts[c];
        std::ofstream out(paths.taxonomy_summary());
        out << json{{"site", site_str},
                    {"labeled_fraction", rep.labeled_fraction},
                    {"r_threshold", cfg.taxonomy.r_threshold},
                    {"counts", counts}}
                   .dump(2)
            << "\n";
    }
    update_manifest(cfg, paths, "taxonomy", {paths.taxonomy_csv(), paths.taxonomy_summary()});
}

void run_ablate(const ExperimentConfig& cfg, const Paths& paths) {
    require(paths.model_ckpt(), "train-model");
    fs::create_directories(paths.reports_dir());
    const Datasets ds = load_datasets(cfg, paths);
    const Model model = load_checkpoint(paths.model_ckpt());

    std::vector<EvalWindow> eval;
    for (const auto& w : ds.holdout_windows) eval.push_back(make_eval_window(w, cfg.tokenizer));
    if (eval.empty())
        for (const auto& w : ds.train_windows) eval.push_back(make_eval_window(w, cfg.tokenizer));

    // Single-feature ablation at the configured site.
    const HookSite single_site = parse_site(cfg.ablation.site);
    require(paths.sae_ckpt(cfg.ablation.site), "train-sae");
    require(shard_path(paths.acts_dir(), single_site), "extract");
    const SaeParams sae = load_sae(paths.sae_ckpt(cfg.ablation.site)).first;
    const ActivationShard shard = read_shard(shard_path(paths.acts_dir(), single_site));
    const FeatureRanking ranking = rank_features(sae, shard);
    const AblationConfig ac = ablation_runtime_config(cfg, single_site);

    const double clean = clean_run_crps(model, cfg.tokenizer, eval, ac);
    const double baseline = patched_run_crps(model, cfg.tokenizer, eval, sae, {}, ac);
    std::vector<AblationRecord> records;
    for (std::size_t i = 0; i < std::min(cfg.ablation.single_top, ranking.order.size()); ++i)
        records.push_back(ablate_single(model, cfg.tokenizer, sae, eval, ranking.order[i], ac,
                                        baseline));
    {
        std::ofstream out(paths.ablation_csv());
        out << "site,feature,crps_orig,crps_ablated,delta\n";
        for (const auto& r : records)
            out << cfg.ablation.site << "," << r.feature_id << "," << fmt9(r.crps_original)
                << "," << fmt9(r.crps_ablated) << "," << fmt9(r.delta) << "\n";
    }

    // Progressive curves per requested site.
    {
        std::ofstream out(paths.progressive_csv());
        out << "site,checkpoint,crps\n";
        for (const auto& ps : cfg.ablation.progressive_sites) {
            const HookSite s = parse_site(ps);
            require(paths.sae_ckpt(ps), "train-sae");
            require(shard_path(paths.acts_dir(), s), "extract");
            const SaeParams psae = load_sae(paths.sae_ckpt(ps)).first;
            const ActivationShard pshard = read_shard(shard_path(paths.acts_dir(), s));
            const FeatureRanking prank = rank_features(psae, pshard);
            const AblationConfig pac = ablation_runtime_config(cfg, s);
            const auto curve =
                ablate_progressive(model, cfg.tokenizer, psae, eval, prank, pac);
            for (const auto& [cp, crps] : curve)
                out << ps << "," << cp << "," << fmt9(crps) << "\n";
        }
    }
    {
        std::ofstream out(paths.reports_dir() + "/ablation_meta.json");
        out << json{{"clean_crps", clean},
                    {"reconstruction_patched_baseline_crps", baseline},
                    {"eval_windows", std::min(ac.n_windows, eval.size())},
                    {"site", cfg.ablation.site}}
                   .dump(2)
            << "\n";
    }
    update_manifest(cfg, paths, "ablate", {paths.ablation_csv(), paths.progressive_csv()});
}

void run_report(const ExperimentConfig& cfg, const Paths& paths, bool print_tables) {
    require(paths.ablation_csv(), "ablate");
    require(paths.progressive_csv(), "ablate");
    require(paths.taxonomy_summary(), "taxonomy");
    fs::create_directories(paths.reports_dir());

    // Ablation summary (Table-1 shape).
    std::vector<AblationRecord> records;
    std::string site_label = cfg.ablation.site;
    {
        std::ifstream in(paths.ablation_csv());
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            AblationRecord r;
            char site_buf[64];
            unsigned feature = 0;
            if (std::sscanf(line.c_str(), "%63[^,],%u,%lf,%lf,%lf", site_buf, &feature,
                            &r.crps_original, &r.crps_ablated, &r.delta) == 5) {
                r.feature_id = feature;
                site_label = site_buf;
                records.push_back(r);
            }
        }
    }
    if (records.empty()) throw FormatError("report: ablation records CSV holds no rows");
    const AblationSummary sum = summarize(records);
    {
        std::ofstream out(paths.summary_csv());
        out << "site,n,mean,median,max,std,positive_fraction,max_over_median\n";
        out << site_label << "," << sum.n << "," << fmt9(sum.mean) << "," << fmt9(sum.median)
            << "," << fmt9(sum.max) << "," << fmt9(sum.stddev) << ","
            << fmt9(sum.positive_fraction) << ","
            << (sum.max_over_median ? fmt9(*sum.max_over_median) : std::string("undefined"))
            << "\n";
    }

    // Progressive curves -> SVG overlay.
    std::map<std::string, SvgCurve> curves;
    std::vector<std::string> curve_order;
    {
        std::ifstream in(paths.progressive_csv());
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            char site_buf[64];
            unsigned long cp = 0;
            double crps = 0;
            if (std::sscanf(line.c_str(), "%63[^,],%lu,%lf", site_buf, &cp, &crps) == 3) {
                if (!curves.count(site_buf)) {
                    curves[site_buf].label = site_buf;
                    curve_order.push_back(site_buf);
                }
                curves[site_buf].points.emplace_back(cp, crps);
            }
        }
    }
    std::vector<SvgCurve> ordered;
    for (const auto& s : curve_order) ordered.push_back(curves[s]);
    write_progressive_svg(ordered, paths.progressive_svg());

    // Taxonomy counts (Table-2 shape).
    json tax;
    {
        std::ifstream in(paths.taxonomy_summary());
        in >> tax;
    }
    {
        std::ofstream out(paths.taxonomy_counts_csv());
        out << "concept," << tax.at("site").get<std::string>() << "\n";
        for (std::size_t c = 0; c < kNumConcepts; ++c) {
            const std::string name = concept_name(static_cast<ConceptLabel>(c));
            out << name << "," << tax.at("counts").at(name).get<std::size_t>() << "\n";
        }
        out << "labeled_fraction," << fmt9(tax.at("labeled_fraction").get<double>()) << "\n";
    }

    if (print_tables) {
        std::printf("Single-feature ablation summary\n");
        std::printf("%-8s %4s %8s %8s %8s %8s %7s %8s\n", "Site", "n", "Mean", "Med.", "Max",
                    "Std", "+Frac", "Max/Med");
        std::printf("%-8s %4zu %8.3f %8.3f %8.3f %8.3f %7.2f %8s\n", site_label.c_str(), sum.n,
                    sum.mean, sum.median, sum.max, sum.stddev, sum.positive_fraction,
                    sum.max_over_median ? fmt9(*sum.max_over_median).c_str() : "--");
        std::printf("\nFeature taxonomy (%s), counts below 10 omitted\n",
                    tax.at("site").get<std::string>().c_str());
        for (std::size_t c = 0; c < kNumConcepts - 1; ++c) {
            const std::string name = concept_name(static_cast<ConceptLabel>(c));
            const auto count = tax.at("counts").at(name).get<std::size_t>();
            std::printf("%-18s %s\n", name.c_str(),
                        count < 10 ? "--" : std::to_string(count).c_str());
        }
        std::printf("%-18s %.1f%%\n", "Labeled",
                    100.0 * tax.at("labeled_fraction").get<double>());
    }
    update_manifest(cfg, paths, "report",
                    {paths.summary_csv(), paths.taxonomy_counts_csv(),
                     paths.progressive_svg()});
}

void run_all(const ExperimentConfig& cfg, const Paths& paths, bool print_tables) {
    run_gen_data(cfg, paths);
    run_train_model(cfg, paths);
    run_extract(cfg, paths);
    run_train_sae(cfg, paths);
    run_taxonomy(cfg, paths);
    run_ablate(cfg, paths);
    run_report(cfg, paths, print_tables);
}

}  // namespace tsmi::pipeline
