#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rsfda/attack.hpp"
#include "rsfda/data.hpp"
#include "rsfda/losses.hpp"
#include "rsfda/model.hpp"
#include "rsfda/optim.hpp"
#include "rsfda/pseudo.hpp"

namespace rsfda {

enum class AvailabilityCase { robust_source_only, standard_source_only, both };

AvailabilityCase case_from_string(const std::string& s);
std::string to_string(AvailabilityCase c);

struct TrainSchedule {
    int max_epochs = 20;
    int pseudo_refresh_interval = 1;
    int batch_size = 64;
    int early_stop_patience = 5;

    // max_epochs may be 0 (no training); everything else must be positive
    // and the refresh interval may not exceed a nonzero epoch budget.
    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    LossBreakdown loss;       // source phases fill only `total`
    double val_metric = 0.0;
    bool improved = false;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;      // -1: initial parameters kept
    bool stopped_early = false;
};

struct SourceTrainOptions {
    TrainSchedule schedule;
    LearningRates rates{1e-3, 1e-3};
    ModelSpec model;
    std::uint64_t seed = 0;
};

// Mini-batch Adam on cross-entropy; keeps the parameters with the best
// validation clean accuracy (early stopping on patience).
Model train_source_standard(const DomainDataset& train, const DomainDataset& val,
                            const SourceTrainOptions& opts, TrainLog* log = nullptr);

// Same loop, but every batch is replaced by PGD examples against the
// current model; selection uses validation adversarial accuracy.
Model train_source_robust(const DomainDataset& train, const DomainDataset& val,
                          const SourceTrainOptions& opts, const AttackConfig& atk,
                          TrainLog* log = nullptr);

// Optional hooks for instrumentation. Target phases never see labels; the
// caller may compare emitted pseudo-labels against ground truth it holds.
struct AdaptObserver {
    std::function<void(const PseudoLabelSet&)> on_pseudo_labels;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct AdaptOptions {
    TrainSchedule schedule{10, 1, 64, 5};
    LearningRates rates{1e-5, 1e-3};
    TargetObjective objective;
    DistanceMetric metric = DistanceMetric::cosine;
    std::uint64_t seed = 0;
};

// Which inputs the robust-phase objective sees.
enum class RobustInputs { adversarial, clean, both };

RobustInputs robust_inputs_from_string(const std::string& s);
std::string to_string(RobustInputs r);

struct RobustAdaptOptions {
    AdaptOptions base;
    AttackConfig attack;
    RobustInputs inputs = RobustInputs::adversarial;
};

// Encoder initialized from `source`, classifier frozen. Pseudo-labels come
// from two-step weighted k-means over the full train split at every epoch
// with epoch % refresh_interval == 0. Selection: lowest validation
// information-maximization loss (ent + alpha * div).
Model adapt_target_standard(const Model& source, const UnlabeledData& train,
                            const UnlabeledData& val, const AdaptOptions& opts,
                            TrainLog* log = nullptr, const AdaptObserver* obs = nullptr);

// Pseudo-labels are computed once from `labeler` before the epoch loop and
// stay fixed. Each batch is attacked against the current model with those
// labels and the combined objective is stepped on the attacked batch.
// Selection: validation accuracy against the labeler's pseudo-labels under
// the same attack.
Model adapt_target_robust(const Model& init, const Model& labeler, LabelSource label_source,
                          const UnlabeledData& train, const UnlabeledData& val,
                          const RobustAdaptOptions& opts, TrainLog* log = nullptr,
                          const AdaptObserver* obs = nullptr);

struct SourceModels {
    std::optional<Model> standard;
    std::optional<Model> robust;
};

struct CaseOptions {
    AvailabilityCase availability = AvailabilityCase::both;
    AdaptOptions standard_phase;
    RobustAdaptOptions robust_phase;
    // Robust phase labels from the robust-track model instead of the
    // standard target model (ablation; `both` case only).
    bool robust_pseudo_labels = false;
};

struct CaseResult {
    AvailabilityCase availability = AvailabilityCase::both;
    Model standard_track;           // f_t (adapted from f_s, or from f_s^r when robust-only)
    Model robust_track;             // f_t^r, the model used for final inference
    std::optional<Model> robust_labeler;  // standard adaptation of f_s^r when it supplied labels
    PseudoLabelSet robust_phase_labels;
    TrainLog standard_log, robust_log;
};

// Precomputed standard-phase models that run_case may reuse instead of
// retraining. Reuse is only valid for identical options and seeds.
struct CaseCache {
    const Model* standard_from_standard = nullptr;  // adapt_target_standard(f_s)
    const Model* standard_from_robust = nullptr;    // adapt_target_standard(f_s^r)
};

struct CaseObservers {
    const AdaptObserver* standard = nullptr;
    const AdaptObserver* robust = nullptr;
};

CaseResult run_case(const SourceModels& sources, const UnlabeledData& train,
                    const UnlabeledData& val, const CaseOptions& opts,
                    const CaseCache& cache = {}, const CaseObservers& obs = {});

}  // namespace rsfda
