#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rsfda/adapt.hpp"
#include "rsfda/attack.hpp"
#include "rsfda/data.hpp"
#include "rsfda/errors.hpp"
#include "rsfda/losses.hpp"
#include "rsfda/model.hpp"

namespace rsfda {

// Raised with every violated field collected, not just the first.
class ValidationError : public ConfigError {
public:
    explicit ValidationError(std::vector<std::string> fields);
    const char* kind() const noexcept override { return "validation"; }
    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    std::vector<std::string> fields_;
};

// Attack profile as written in config files: the step size is relative to
// epsilon and the clamp box defaults to the dataset's input range.
struct AttackProfile {
    double epsilon = 0.0;
    int steps = 20;
    double rel_step = 0.1;
    bool random_start = false;
    std::optional<double> clamp_lo;
    std::optional<double> clamp_hi;

    AttackConfig resolve(double data_lo, double data_hi) const;
};

struct AblationToggles {
    bool contrastive = true;
    bool pseudo_ce = true;       // robust phase only
    bool entropy = true;
    bool diversity = true;
    bool adv_images = true;      // false: robust phase trains on clean inputs
    bool robust_pseudo_labels = false;
};

struct DataConfig {
    std::optional<std::string> source_csv;
    std::optional<std::string> target_csv;
    std::optional<std::pair<double, double>> csv_input_range;
    ShiftSpec source;
    ShiftSpec target;
    SplitFractions split;
    std::optional<int> class_subset;
};

// Method names accepted in ExperimentConfig::methods.
inline const std::vector<std::string> kMethodNames = {
    "shot", "shot_robust", "ours_robust_source", "ours_standard_source", "ours_both"};

std::string method_for_case(AvailabilityCase c);

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";
    DataConfig data;
    AvailabilityCase availability = AvailabilityCase::both;
    std::vector<std::string> methods;   // empty: the case's own method
    ModelSpec model;
    LossWeights weights;
    std::size_t contrastive_max_pairs = 0;
    DistanceMetric kmeans_metric = DistanceMetric::cosine;
    AttackProfile attack_train;
    AttackProfile attack_eval;
    TrainSchedule source_schedule{20, 1, 64, 5};
    TrainSchedule target_schedule{10, 1, 64, 5};
    LearningRates source_rates{1e-3, 1e-3};
    LearningRates target_rates{1e-5, 1e-3};
    LearningRates robust_rates{1e-5, 1e-3};
    AblationToggles ablation;

    std::vector<std::string> resolved_methods() const;

    // Throws ValidationError listing every violated field.
    void validate() const;
};

ExperimentConfig default_config();

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Reads a JSON file; // and /* */ comments are allowed.
nlohmann::json read_config_file(const std::string& path);

// Applies "a.b.c" = value onto a config document. The path must already
// exist in the fully populated default document.
void apply_override(nlohmann::json& doc, const std::string& dotted_path, const std::string& value);

std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace rsfda
