#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsmi/config.hpp"
#include "tsmi/series.hpp"

namespace tsmi::pipeline {

// Artifact layout under the work directory.
struct Paths {
    std::string workdir;

    std::string suite_dir() const { return workdir + "/data/suite"; }
    std::string external_csv() const { return workdir + "/data/external.csv"; }
    std::string model_ckpt() const { return workdir + "/model/model.tslm"; }
    std::string model_metrics() const { return workdir + "/model/metrics.json"; }
    std::string train_log() const { return workdir + "/model/train_log.csv"; }
    std::string acts_dir() const { return workdir + "/acts"; }
    std::string sae_dir() const { return workdir + "/sae"; }
    std::string sae_ckpt(const std::string& site) const {
        return sae_dir() + "/" + site + ".tsae";
    }
    std::string reports_dir() const { return workdir + "/reports"; }
    std::string taxonomy_csv() const { return reports_dir() + "/taxonomy.csv"; }
    std::string taxonomy_summary() const { return reports_dir() + "/taxonomy_summary.json"; }
    std::string ablation_csv() const { return reports_dir() + "/ablation_records.csv"; }
    std::string progressive_csv() const { return reports_dir() + "/progressive.csv"; }
    std::string summary_csv() const { return reports_dir() + "/summary.csv"; }
    std::string taxonomy_counts_csv() const { return reports_dir() + "/taxonomy_counts.csv"; }
    std::string progressive_svg() const { return reports_dir() + "/progressive.svg"; }
    std::string manifest() const { return workdir + "/manifest.json"; }
};

// Windows split deterministically into train and holdout partitions.
struct Datasets {
    std::vector<Series> series;          // suite + optional external
    std::vector<Series> suite;           // channel-bearing subset
    std::vector<Window> train_windows;
    std::vector<Window> holdout_windows;
};

Datasets load_datasets(const ExperimentConfig& cfg, const Paths& paths);

void run_gen_data(const ExperimentConfig& cfg, const Paths& paths);
void run_train_model(const ExperimentConfig& cfg, const Paths& paths);
void run_extract(const ExperimentConfig& cfg, const Paths& paths,
                 const std::optional<std::string>& site_filter = std::nullopt);
void run_train_sae(const ExperimentConfig& cfg, const Paths& paths,
                   const std::optional<std::string>& site_filter = std::nullopt);
void run_taxonomy(const ExperimentConfig& cfg, const Paths& paths);
void run_ablate(const ExperimentConfig& cfg, const Paths& paths);
void run_report(const ExperimentConfig& cfg, const Paths& paths, bool print_tables = true);

// All seven stages in order.
void run_all(const ExperimentConfig& cfg, const Paths& paths, bool print_tables = false);

}  // namespace tsmi::pipeline
