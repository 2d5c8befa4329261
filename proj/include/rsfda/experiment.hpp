#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsfda/adapt.hpp"
#include "rsfda/config.hpp"

namespace rsfda {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "rsfda-0.3.0";

// Accuracy of one model on one split under one attack profile.
struct Evaluation {
    std::string method;        // shot, ours_both, source_standard, ...
    std::string model;         // role of the evaluated model
    std::string split = "target_test";
    std::string attack_profile = "attack_eval";
    double clean_acc = 0.0;
    double adv_acc = 0.0;
    double clean_macro = 0.0;
    double adv_macro = 0.0;
    std::vector<double> per_class_clean;
    std::vector<double> per_class_adv;
};

struct PseudoLabelRecord {
    std::string phase;         // "standard:<source model>" or "robust:<method>"
    std::string source;        // kmeans / standard_model / robust_model
    int epoch = 0;
    double accuracy = 0.0;
};

struct CurvePoint {
    std::string track;
    int epoch = 0;
    LossBreakdown loss;
    double val_metric = 0.0;
};

struct RunReport {
    ExperimentConfig config;
    std::vector<Evaluation> evaluations;
    std::vector<PseudoLabelRecord> pseudo_labels;
    std::vector<CurvePoint> curves;
    double wall_clock_s = 0.0;

    // The method's final model on the target test split.
    const Evaluation& find(const std::string& method) const;

    // Everything except wall-clock time; identical for identical
    // (config, seed, code version).
    nlohmann::json metrics_json() const;
    nlohmann::json to_json() const;
};

// Trained models kept across runs that share a seed and source-side
// configuration (ablation grids, repeated evaluations).
class SourceCache {
public:
    const Model* find(const std::string& key) const;
    const Model& put(const std::string& key, Model m);

private:
    std::map<std::string, Model> models_;
};

struct RunOptions {
    bool write_outputs = true;
    SourceCache* cache = nullptr;
};

// Source training per the methods' needs, target adaptation, then
// evaluation on the target test split with the eval attack profile.
RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct AblationRow {
    std::string name;
    RunReport report;
};

std::vector<std::string> ablation_row_names();
ExperimentConfig ablation_config(const ExperimentConfig& base, const std::string& row);

// One ours_both run per Table-2 style row; writes ablation.csv when asked.
std::vector<AblationRow> run_ablation_grid(const ExperimentConfig& base,
                                           const std::vector<std::uint64_t>& seeds,
                                           const RunOptions& opts = {});

struct SweepPoint {
    int k = 0;
    std::uint64_t seed = 0;
    double both_adv = 0.0;
    double standard_adv = 0.0;
    double both_clean = 0.0;
    double standard_clean = 0.0;
    double advantage() const { return both_adv - standard_adv; }
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<int> ks;
    std::vector<double> mean_advantage;   // per k, averaged over seeds
    double rank_correlation = 0.0;        // Spearman(k, mean advantage)
};

SweepResult run_class_sweep(const ExperimentConfig& base, const std::vector<int>& ks,
                            const std::vector<std::uint64_t>& seeds, const RunOptions& opts = {});

double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Synthetic or CSV-backed source/target pair as configured (class subset
// applied).
std::pair<DomainDataset, DomainDataset> load_domains(const ExperimentConfig& cfg);

// One CSV row per sample: encoder features, true label, predicted
// (pseudo-)label, correctness flag. Attacked rows are PGD-perturbed with the
// true labels first.
void export_features(const Model& model, const DomainDataset& data, bool attacked,
                     const AttackConfig& atk, std::uint64_t seed, const std::string& path);

nlohmann::json model_to_json(const Model& m, std::uint64_t cfg_hash);
Model model_from_json(const nlohmann::json& j);
void save_checkpoint(const Model& m, std::uint64_t cfg_hash, const std::string& path);
Model load_checkpoint(const std::string& path);

// Output root: RSFDA_OUTPUT_ROOT prefixes relative output directories.
std::string resolve_output_dir(const std::string& dir);

}  // namespace rsfda
