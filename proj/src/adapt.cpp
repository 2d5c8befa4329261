#include "rsfda/adapt.hpp"

#include <algorithm>
#include <numeric>

#include "rsfda/errors.hpp"
#include "rsfda/softmax.hpp"

namespace rsfda {

AvailabilityCase case_from_string(const std::string& s) {
    if (s == "robust_source_only") return AvailabilityCase::robust_source_only;
    if (s == "standard_source_only") return AvailabilityCase::standard_source_only;
    if (s == "both") return AvailabilityCase::both;
    throw ConfigError("unknown availability case '" + s + "'");
}

std::string to_string(AvailabilityCase c) {
    switch (c) {
        case AvailabilityCase::robust_source_only: return "robust_source_only";
        case AvailabilityCase::standard_source_only: return "standard_source_only";
        case AvailabilityCase::both: return "both";
    }
    return "unknown";
}

RobustInputs robust_inputs_from_string(const std::string& s) {
    if (s == "adversarial") return RobustInputs::adversarial;
    if (s == "clean") return RobustInputs::clean;
    if (s == "both") return RobustInputs::both;
    throw ConfigError("unknown robust-phase input mode '" + s + "'");
}

std::string to_string(RobustInputs r) {
    switch (r) {
        case RobustInputs::adversarial: return "adversarial";
        case RobustInputs::clean: return "clean";
        case RobustInputs::both: return "both";
    }
    return "unknown";
}

void TrainSchedule::validate() const {
    if (max_epochs < 0) throw ConfigError("schedule: max_epochs must be >= 0");
    if (pseudo_refresh_interval < 1) throw ConfigError("schedule: pseudo_refresh_interval must be >= 1");
    if (batch_size < 1) throw ConfigError("schedule: batch_size must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("schedule: early_stop_patience must be >= 1");
    if (max_epochs > 0 && pseudo_refresh_interval > max_epochs)
        throw ConfigError("schedule: pseudo_refresh_interval exceeds max_epochs");
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng& rng) {
    auto perm = rng.permutation(n);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; s += batch)
        out.emplace_back(perm.begin() + s, perm.begin() + std::min(n, s + batch));
    return out;
}

// Tracks the best validation score and the parameters that produced it.
class EarlyStopper {
public:
    EarlyStopper(const Model& init, int patience, bool higher_is_better)
        : best_(init), patience_(patience), higher_(higher_is_better) {}

    // Returns true when the score improved on the best so far.
    bool observe(const Model& m, double score, int epoch) {
        const bool better = !has_score_ || (higher_ ? score > best_score_ : score < best_score_);
        if (better) {
            best_ = m;
            best_score_ = score;
            best_epoch_ = epoch;
            has_score_ = true;
            stale_ = 0;
        } else {
            ++stale_;
        }
        return better;
    }

    bool should_stop() const { return stale_ >= patience_; }
    const Model& best() const { return best_; }
    int best_epoch() const { return best_epoch_; }

private:
    Model best_;
    double best_score_ = 0.0;
    int best_epoch_ = -1;
    int patience_;
    bool higher_;
    bool has_score_ = false;
    int stale_ = 0;
};

void require_split(const DomainDataset& d, const char* what) {
    if (d.size() == 0) throw ConfigError(std::string(what) + " split is empty");
    d.validate();
}

Model train_source(const DomainDataset& train, const DomainDataset& val,
                   const SourceTrainOptions& opts, const AttackConfig* atk, TrainLog* log) {
    opts.schedule.validate();
    require_split(train, "source train");
    if (atk) atk->validate();
    Rng init_rng(opts.seed, streams::init);
    Model model = Model::create(train.input_dim(), train.class_count, opts.model, init_rng);
    if (opts.schedule.max_epochs == 0) return model;

    // Both source models draw from the same shuffle/attack streams so that an
    // epsilon = 0 robust run replays the standard run exactly.
    Rng shuffle_rng(opts.seed, streams::shuffle);
    Rng attack_rng(opts.seed, streams::attack);
    Rng eval_rng(opts.seed, streams::eval_attack);
    OptimizerState state = OptimizerState::for_model(model, opts.rates);
    const bool has_val = val.size() > 0;
    EarlyStopper stopper(model, opts.schedule.early_stop_patience, true);
    TrainLog local;
    TrainLog& lg = log ? *log : local;
    lg = TrainLog{};

    for (int epoch = 0; epoch < opts.schedule.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (const auto& idx : make_batches(train.size(), opts.schedule.batch_size, shuffle_rng)) {
            Tensor xb = train.x.gather_rows(idx);
            std::vector<int> yb;
            for (auto i : idx) yb.push_back(train.y[i]);
            if (atk) xb = pgd_attack(model, xb, yb, *atk, &attack_rng);
            Tape tape;
            BoundModel bm = bind(tape, model, true);
            ForwardVars fw = forward(tape, bm, tape.leaf(std::move(xb)));
            Var loss = cross_entropy(tape, fw.logits, yb);
            tape.backward(loss);
            adam_step(state, model, collect_grads(tape, bm));
            loss_sum += tape.value(loss).item() * static_cast<double>(idx.size());
            seen += idx.size();
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss.total = loss_sum / static_cast<double>(seen);
        const DomainDataset& sel = has_val ? val : train;
        rec.val_metric = atk ? adv_accuracy(model, sel.x, sel.y, *atk, &eval_rng)
                             : clean_accuracy(model, sel.x, sel.y);
        rec.improved = stopper.observe(model, rec.val_metric, epoch);
        lg.epochs.push_back(rec);
        if (stopper.should_stop()) {
            lg.stopped_early = true;
            break;
        }
    }
    lg.best_epoch = stopper.best_epoch();
    return stopper.best();
}

Model frozen_copy(const Model& m) {
    Model out = m;
    out.classifier.set_frozen(true);
    return out;
}

void require_target(const UnlabeledData& d, const Model& m, const char* what) {
    if (d.x.empty()) throw ConfigError(std::string(what) + " split is empty");
    require_matrix(d.x, m.input_dim(), what);
}

// Label-free selection score for the standard track.
double im_loss(const Model& m, const Tensor& x, const LossWeights& w) {
    const Tensor logits = predict_logits(m, x);
    return entropy_loss(logits) + w.alpha * diversity_loss(logits);
}

PseudoLabelSet kmeans_for(const Model& m, const Tensor& x, DistanceMetric metric, int epoch) {
    const ForwardResult fr = forward(m, x);
    PseudoLabelSet p = kmeans_pseudo_labels(fr.features, softmax(fr.logits), metric);
    p.epoch_stamp = epoch;
    return p;
}

double pseudo_adv_accuracy(const Model& m, const Tensor& x, const PseudoLabelSet& labels,
                           const AttackConfig& atk, Rng& rng) {
    return adv_accuracy(m, x, labels.labels, atk, &rng);
}

}  // namespace

Model train_source_standard(const DomainDataset& train, const DomainDataset& val,
                            const SourceTrainOptions& opts, TrainLog* log) {
    return train_source(train, val, opts, nullptr, log);
}

Model train_source_robust(const DomainDataset& train, const DomainDataset& val,
                          const SourceTrainOptions& opts, const AttackConfig& atk, TrainLog* log) {
    return train_source(train, val, opts, &atk, log);
}

Model adapt_target_standard(const Model& source, const UnlabeledData& train,
                            const UnlabeledData& val, const AdaptOptions& opts, TrainLog* log,
                            const AdaptObserver* obs) {
    opts.schedule.validate();
    opts.objective.weights.validate();
    require_target(train, source, "target train");
    Model model = frozen_copy(source);
    const std::uint64_t cls_hash = model.classifier_hash();
    TrainLog local;
    TrainLog& lg = log ? *log : local;
    lg = TrainLog{};
    if (opts.schedule.max_epochs == 0) return model;

    Rng shuffle_rng(opts.seed, streams::shuffle);
    Rng pair_rng(opts.seed, streams::pairs);
    OptimizerState state = OptimizerState::for_model(model, opts.rates);
    const Tensor& sel_x = val.x.empty() ? train.x : val.x;
    EarlyStopper stopper(model, opts.schedule.early_stop_patience, false);
    PseudoLabelSet pseudo;

    for (int epoch = 0; epoch < opts.schedule.max_epochs; ++epoch) {
        if (epoch % opts.schedule.pseudo_refresh_interval == 0) {
            pseudo = kmeans_for(model, train.x, opts.metric, epoch);
            if (obs && obs->on_pseudo_labels) obs->on_pseudo_labels(pseudo);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t seen = 0;
        for (const auto& idx : make_batches(train.x.rows(), opts.schedule.batch_size, shuffle_rng)) {
            Tape tape;
            BoundModel bm = bind(tape, model, true);
            ForwardVars fw = forward(tape, bm, tape.leaf(train.x.gather_rows(idx)));
            TargetLoss tl = target_loss(tape, fw.logits, fw.features, pseudo, idx, opts.objective, &pair_rng);
            tape.backward(tl.total);
            adam_step(state, model, collect_grads(tape, bm));
            const double w = static_cast<double>(idx.size());
            rec.loss.ent += w * tl.parts.ent;
            rec.loss.div += w * tl.parts.div;
            rec.loss.pseudo += w * tl.parts.pseudo;
            rec.loss.con += w * tl.parts.con;
            rec.loss.total += w * tl.parts.total;
            seen += idx.size();
        }
        for (double* v : {&rec.loss.ent, &rec.loss.div, &rec.loss.pseudo, &rec.loss.con, &rec.loss.total})
            *v /= static_cast<double>(seen);
        rec.val_metric = im_loss(model, sel_x, opts.objective.weights);
        rec.improved = stopper.observe(model, rec.val_metric, epoch);
        lg.epochs.push_back(rec);
        if (obs && obs->on_epoch) obs->on_epoch(rec);
        if (stopper.should_stop()) {
            lg.stopped_early = true;
            break;
        }
    }
    if (stopper.best().classifier_hash() != cls_hash)
        throw StateError("classifier changed during target adaptation");
    lg.best_epoch = stopper.best_epoch();
    return stopper.best();
}

Model adapt_target_robust(const Model& init, const Model& labeler, LabelSource label_source,
                          const UnlabeledData& train, const UnlabeledData& val,
                          const RobustAdaptOptions& opts, TrainLog* log, const AdaptObserver* obs) {
    const AdaptOptions& base = opts.base;
    base.schedule.validate();
    base.objective.weights.validate();
    opts.attack.validate();
    require_target(train, init, "target train");
    if (labeler.input_dim() != init.input_dim() || labeler.classes() != init.classes())
        throw ConfigError("robust adaptation: labeler and initial model are incompatible");
    Model model = frozen_copy(init);
    const std::uint64_t cls_hash = model.classifier_hash();
    TrainLog local;
    TrainLog& lg = log ? *log : local;
    lg = TrainLog{};

    PseudoLabelSet pseudo = model_pseudo_labels(labeler, train.x, label_source);
    if (obs && obs->on_pseudo_labels) obs->on_pseudo_labels(pseudo);
    if (base.schedule.max_epochs == 0) return model;

    const bool has_val = !val.x.empty();
    const Tensor& sel_x = has_val ? val.x : train.x;
    const PseudoLabelSet sel_labels = has_val ? model_pseudo_labels(labeler, val.x, label_source) : pseudo;

    Rng shuffle_rng(base.seed, streams::shuffle);
    Rng pair_rng(base.seed, streams::pairs);
    Rng attack_rng(base.seed, streams::attack);
    Rng eval_rng(base.seed, streams::eval_attack);
    OptimizerState state = OptimizerState::for_model(model, base.rates);
    EarlyStopper stopper(model, base.schedule.early_stop_patience, true);

    for (int epoch = 0; epoch < base.schedule.max_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t seen = 0;
        for (const auto& idx : make_batches(train.x.rows(), base.schedule.batch_size, shuffle_rng)) {
            const Tensor clean = train.x.gather_rows(idx);
            const auto labels = pseudo.gather(idx);
            Tape tape;
            BoundModel bm = bind(tape, model, true);
            LossBreakdown parts;
            Var total;
            auto step_on = [&](const Tensor& xb) {
                ForwardVars fw = forward(tape, bm, tape.leaf(xb));
                return robust_target_loss(tape, fw.logits, fw.features, pseudo, idx, base.objective,
                                          &pair_rng);
            };
            if (opts.inputs == RobustInputs::clean) {
                TargetLoss tl = step_on(clean);
                total = tl.total;
                parts = tl.parts;
            } else {
                const Tensor adv = pgd_attack(model, clean, labels, opts.attack, &attack_rng);
                TargetLoss tl = step_on(adv);
                total = tl.total;
                parts = tl.parts;
                if (opts.inputs == RobustInputs::both) {
                    TargetLoss tc = step_on(clean);
                    const Var terms[] = {tl.total, tc.total};
                    const double half[] = {0.5, 0.5};
                    total = ops::weighted_sum(tape, terms, half);
                    parts.total = tape.value(total).item();
                }
            }
            tape.backward(total);
            adam_step(state, model, collect_grads(tape, bm));
            const double w = static_cast<double>(idx.size());
            rec.loss.ent += w * parts.ent;
            rec.loss.div += w * parts.div;
            rec.loss.pseudo += w * parts.pseudo;
            rec.loss.con += w * parts.con;
            rec.loss.total += w * parts.total;
            seen += idx.size();
        }
        for (double* v : {&rec.loss.ent, &rec.loss.div, &rec.loss.pseudo, &rec.loss.con, &rec.loss.total})
            *v /= static_cast<double>(seen);
        rec.val_metric = pseudo_adv_accuracy(model, sel_x, sel_labels, opts.attack, eval_rng);
        rec.improved = stopper.observe(model, rec.val_metric, epoch);
        lg.epochs.push_back(rec);
        if (obs && obs->on_epoch) obs->on_epoch(rec);
        if (stopper.should_stop()) {
            lg.stopped_early = true;
            break;
        }
    }
    if (stopper.best().classifier_hash() != cls_hash)
        throw StateError("classifier changed during robust target adaptation");
    lg.best_epoch = stopper.best_epoch();
    return stopper.best();
}

CaseResult run_case(const SourceModels& sources, const UnlabeledData& train,
                    const UnlabeledData& val, const CaseOptions& opts, const CaseCache& cache,
                    const CaseObservers& obs) {
    CaseResult r;
    r.availability = opts.availability;
    const bool need_standard = opts.availability != AvailabilityCase::robust_source_only;
    const bool need_robust = opts.availability != AvailabilityCase::standard_source_only ||
                             opts.robust_pseudo_labels;
    if (need_standard && !sources.standard)
        throw ConfigError("case " + to_string(opts.availability) + " needs a standard source model");
    if (need_robust && !sources.robust)
        throw ConfigError("case " + to_string(opts.availability) + " needs a robust source model");
    if (opts.robust_pseudo_labels && opts.availability != AvailabilityCase::both)
        throw ConfigError("robust pseudo-label ablation applies to the 'both' case only");

    auto standard_from = [&](const Model& src, const Model* cached) {
        if (cached) return *cached;
        return adapt_target_standard(src, train, val, opts.standard_phase, &r.standard_log, obs.standard);
    };

    switch (opts.availability) {
        case AvailabilityCase::both: {
            r.standard_track = standard_from(*sources.standard, cache.standard_from_standard);
            const Model* labeler = &r.standard_track;
            LabelSource tag = LabelSource::standard_model;
            if (opts.robust_pseudo_labels) {
                TrainLog scratch;
                r.robust_labeler = cache.standard_from_robust
                                       ? *cache.standard_from_robust
                                       : adapt_target_standard(*sources.robust, train, val,
                                                               opts.standard_phase, &scratch);
                labeler = &*r.robust_labeler;
                tag = LabelSource::robust_model;
            }
            r.robust_track = adapt_target_robust(*sources.robust, *labeler, tag, train, val,
                                                 opts.robust_phase, &r.robust_log, obs.robust);
            r.robust_phase_labels = model_pseudo_labels(*labeler, train.x, tag);
            break;
        }
        case AvailabilityCase::standard_source_only: {
            r.standard_track = standard_from(*sources.standard, cache.standard_from_standard);
            r.robust_track = adapt_target_robust(r.standard_track, r.standard_track,
                                                 LabelSource::standard_model, train, val,
                                                 opts.robust_phase, &r.robust_log, obs.robust);
            r.robust_phase_labels = model_pseudo_labels(r.standard_track, train.x, LabelSource::standard_model);
            break;
        }
        case AvailabilityCase::robust_source_only: {
            r.standard_track = standard_from(*sources.robust, cache.standard_from_robust);
            r.robust_labeler = r.standard_track;
            r.robust_track = adapt_target_robust(*sources.robust, r.standard_track,
                                                 LabelSource::robust_model, train, val,
                                                 opts.robust_phase, &r.robust_log, obs.robust);
            r.robust_phase_labels = model_pseudo_labels(r.standard_track, train.x, LabelSource::robust_model);
            break;
        }
    }
    return r;
}

}  // namespace rsfda
