#include "rsfda/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "rsfda/softmax.hpp"

namespace rsfda {

using nlohmann::json;
namespace fs = std::filesystem;

const Evaluation& RunReport::find(const std::string& method) const {
    for (const auto& e : evaluations)
        if (e.method == method && e.model == "final" && e.split == "target_test") return e;
    throw ConfigError("report has no final evaluation for method '" + method + "'");
}

const Model* SourceCache::find(const std::string& key) const {
    auto it = models_.find(key);
    return it == models_.end() ? nullptr : &it->second;
}

const Model& SourceCache::put(const std::string& key, Model m) {
    return models_.insert_or_assign(key, std::move(m)).first->second;
}

std::string resolve_output_dir(const std::string& dir) {
    const fs::path p(dir);
    if (p.is_absolute()) return p.string();
    if (const char* root = std::getenv("RSFDA_OUTPUT_ROOT"); root && *root)
        return (fs::path(root) / p).string();
    return p.string();
}

std::pair<DomainDataset, DomainDataset> load_domains(const ExperimentConfig& cfg) {
    std::pair<DomainDataset, DomainDataset> out;
    if (cfg.data.source_csv) {
        CsvSchema schema;
        schema.input_range = cfg.data.csv_input_range;
        schema.domain_tag = "source";
        out.first = load_csv(*cfg.data.source_csv, schema);
        schema.domain_tag = "target";
        out.second = load_csv(*cfg.data.target_csv, schema);
        if (out.first.input_dim() != out.second.input_dim())
            throw ConfigError("source and target CSV files have different feature counts");
        const int C = std::max(out.first.class_count, out.second.class_count);
        out.first.class_count = out.second.class_count = C;
    } else {
        out = make_domain_pair(cfg.data.source, cfg.data.target, cfg.seed);
    }
    if (cfg.data.class_subset) {
        out.first = class_subset(out.first, *cfg.data.class_subset);
        out.second = class_subset(out.second, *cfg.data.class_subset);
    }
    return out;
}

namespace {

Evaluation evaluate(const std::string& method, const std::string& model_role, const Model& m,
                    const DomainDataset& test, const AttackConfig& atk, std::uint64_t seed) {
    Evaluation e;
    e.method = method;
    e.model = model_role;
    const auto clean = argmax_rows(predict_logits(m, test.x));
    Rng rng(seed, streams::eval_attack);
    const auto adv = adv_predictions(m, test.x, test.y, atk, &rng);
    const std::size_t C = static_cast<std::size_t>(test.class_count);
    std::vector<double> hit_c(C, 0.0), hit_a(C, 0.0), count(C, 0.0);
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int y = test.y[i];
        count[y] += 1;
        hit_c[y] += clean[i] == y;
        hit_a[y] += adv[i] == y;
    }
    const double n = static_cast<double>(test.size());
    e.clean_acc = std::accumulate(hit_c.begin(), hit_c.end(), 0.0) / n;
    e.adv_acc = std::accumulate(hit_a.begin(), hit_a.end(), 0.0) / n;
    double present = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        const double pc = count[c] > 0 ? hit_c[c] / count[c] : 0.0;
        const double pa = count[c] > 0 ? hit_a[c] / count[c] : 0.0;
        e.per_class_clean.push_back(pc);
        e.per_class_adv.push_back(pa);
        if (count[c] > 0) {
            present += 1;
            e.clean_macro += pc;
            e.adv_macro += pa;
        }
    }
    if (present > 0) {
        e.clean_macro /= present;
        e.adv_macro /= present;
    }
    return e;
}

std::string source_key(const ExperimentConfig& cfg, const char* role) {
    const json j = config_to_json(cfg);
    json key = {{"role", role},
                {"seed", cfg.seed},
                {"data", j["data"]},
                {"model", j["model"]},
                {"source_schedule", j["source_schedule"]},
                {"source_rates", j["source_rates"]}};
    if (std::string(role) == "robust") key["attack_train"] = j["attack_train"];
    return key.dump();
}

bool uses(const std::vector<std::string>& methods, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (std::find(methods.begin(), methods.end(), n) != methods.end()) return true;
    return false;
}

struct PseudoDump {
    std::string phase;
    PseudoLabelSet labels;
};

void append_curve(std::vector<CurvePoint>& curves, const std::string& track, const TrainLog& log) {
    for (const auto& e : log.epochs) curves.push_back({track, e.epoch, e.loss, e.val_metric});
}

json breakdown_json(const LossBreakdown& b) {
    return {{"ent", b.ent}, {"div", b.div}, {"pseudo", b.pseudo}, {"con", b.con}, {"total", b.total}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string metrics_csv(const RunReport& r) {
    std::string s = "method,model,split,attack_profile,clean_acc,adv_acc,clean_macro,adv_macro\n";
    for (const auto& e : r.evaluations)
        s += e.method + "," + e.model + "," + e.split + "," + e.attack_profile + "," +
             format_double(e.clean_acc) + "," + format_double(e.adv_acc) + "," +
             format_double(e.clean_macro) + "," + format_double(e.adv_macro) + "\n";
    return s;
}

}  // namespace

json RunReport::metrics_json() const {
    json evals = json::array();
    for (const auto& e : evaluations)
        evals.push_back({{"method", e.method},
                         {"model", e.model},
                         {"split", e.split},
                         {"attack_profile", e.attack_profile},
                         {"clean_acc", e.clean_acc},
                         {"adv_acc", e.adv_acc},
                         {"clean_macro", e.clean_macro},
                         {"adv_macro", e.adv_macro},
                         {"per_class_clean", e.per_class_clean},
                         {"per_class_adv", e.per_class_adv}});
    json pl = json::array();
    for (const auto& p : pseudo_labels)
        pl.push_back({{"phase", p.phase}, {"source", p.source}, {"epoch", p.epoch}, {"accuracy", p.accuracy}});
    json curve = json::array();
    for (const auto& c : curves)
        curve.push_back({{"track", c.track},
                         {"epoch", c.epoch},
                         {"loss", breakdown_json(c.loss)},
                         {"val_metric", c.val_metric}});
    return {{"evaluations", evals}, {"pseudo_labels", pl}, {"curves", curve}};
}

json RunReport::to_json() const {
    const json cfg = config_to_json(config);
    const json eval_attack = config_to_json(config)["attack_eval"];
    return {{"schema_version", kReportSchemaVersion},
            {"code_version", kCodeVersion},
            {"config", cfg},
            {"attack_profiles", {{"attack_eval", eval_attack}, {"attack_train", cfg["attack_train"]}}},
            {"metrics", metrics_json()},
            {"timing", {{"wall_clock_s", wall_clock_s}}}};
}

RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    RunReport report;
    report.config = cfg;

    auto [source, target] = load_domains(cfg);
    const DatasetSplits src = split(source, cfg.data.split, cfg.seed);
    const DatasetSplits tgt = split(target, cfg.data.split, splitmix64(cfg.seed));
    if (tgt.test.size() == 0) throw ConfigError("target test split is empty");

    const AttackConfig src_atk = cfg.attack_train.resolve(source.input_lo, source.input_hi);
    const AttackConfig tgt_atk = cfg.attack_train.resolve(target.input_lo, target.input_hi);
    const AttackConfig eval_atk = cfg.attack_eval.resolve(target.input_lo, target.input_hi);
    const AttackConfig src_eval_atk = cfg.attack_eval.resolve(source.input_lo, source.input_hi);
    src_atk.validate();
    eval_atk.validate();

    const auto methods = cfg.resolved_methods();
    const bool need_standard = uses(methods, {"shot", "ours_standard_source", "ours_both"});
    const bool need_robust = uses(methods, {"shot_robust", "ours_robust_source", "ours_both"}) ||
                             cfg.ablation.robust_pseudo_labels;

    SourceTrainOptions sopts{cfg.source_schedule, cfg.source_rates, cfg.model, cfg.seed};
    SourceModels sources;
    SourceCache local_cache;
    SourceCache& cache = opts.cache ? *opts.cache : local_cache;
    if (need_standard) {
        const auto key = source_key(cfg, "standard");
        const Model* m = cache.find(key);
        sources.standard = m ? *m : cache.put(key, train_source_standard(src.train, src.val, sopts));
        report.evaluations.push_back(evaluate("source_standard", "final", *sources.standard, tgt.test,
                                              eval_atk, cfg.seed));
        if (src.test.size() > 0) {
            report.evaluations.push_back(
                evaluate("source_standard", "final", *sources.standard, src.test, src_eval_atk, cfg.seed));
            report.evaluations.back().split = "source_test";
        }
    }
    if (need_robust) {
        const auto key = source_key(cfg, "robust");
        const Model* m = cache.find(key);
        sources.robust = m ? *m : cache.put(key, train_source_robust(src.train, src.val, sopts, src_atk));
        report.evaluations.push_back(evaluate("source_robust", "final", *sources.robust, tgt.test,
                                              eval_atk, cfg.seed));
        if (src.test.size() > 0) {
            report.evaluations.push_back(
                evaluate("source_robust", "final", *sources.robust, src.test, src_eval_atk, cfg.seed));
            report.evaluations.back().split = "source_test";
        }
    }

    const UnlabeledData tgt_train = UnlabeledData::from(tgt.train);
    const UnlabeledData tgt_val = UnlabeledData::from(tgt.val);
    const auto& ab = cfg.ablation;
    TargetObjective std_obj{cfg.weights, {ab.entropy, ab.diversity, true, ab.contrastive},
                            cfg.contrastive_max_pairs};
    TargetObjective shot_obj = std_obj;
    shot_obj.toggles.contrastive = false;
    TargetObjective rob_obj{cfg.weights, {ab.entropy, ab.diversity, ab.pseudo_ce, ab.contrastive},
                            cfg.contrastive_max_pairs};
    const AdaptOptions std_opts{cfg.target_schedule, cfg.target_rates, std_obj, cfg.kmeans_metric, cfg.seed};
    AdaptOptions shot_opts = std_opts;
    shot_opts.objective = shot_obj;
    RobustAdaptOptions rob_opts{{cfg.target_schedule, cfg.robust_rates, rob_obj, cfg.kmeans_metric, cfg.seed},
                                tgt_atk,
                                ab.adv_images ? RobustInputs::adversarial : RobustInputs::clean};

    std::vector<PseudoDump> dumps;
    auto label_observer = [&](const std::string& phase) {
        AdaptObserver o;
        o.on_pseudo_labels = [&, phase](const PseudoLabelSet& p) {
            report.pseudo_labels.push_back(
                {phase, to_string(p.source), p.epoch_stamp, pseudo_label_accuracy(p, tgt.train.y)});
            dumps.push_back({phase, p});
        };
        return o;
    };

    // Standard-phase models, each trained at most once per run.
    std::map<std::string, Model> tracks;
    auto standard_track = [&](const std::string& name, const Model& src_model,
                              const AdaptOptions& o) -> const Model& {
        auto it = tracks.find(name);
        if (it != tracks.end()) return it->second;
        TrainLog log;
        const AdaptObserver obs = label_observer("standard:" + name);
        Model m = adapt_target_standard(src_model, tgt_train, tgt_val, o, &log, &obs);
        append_curve(report.curves, "standard:" + name, log);
        return tracks.emplace(name, std::move(m)).first->second;
    };

    std::map<std::string, const Model*> finals;
    for (const auto& method : methods) {
        if (method == "shot") {
            const Model& m = standard_track("shot", *sources.standard, shot_opts);
            report.evaluations.push_back(evaluate(method, "final", m, tgt.test, eval_atk, cfg.seed));
            finals[method] = &m;
            continue;
        }
        if (method == "shot_robust") {
            const Model& m = standard_track("shot_robust", *sources.robust, shot_opts);
            report.evaluations.push_back(evaluate(method, "final", m, tgt.test, eval_atk, cfg.seed));
            finals[method] = &m;
            continue;
        }
        CaseOptions co;
        co.standard_phase = std_opts;
        co.robust_phase = rob_opts;
        co.availability = method == "ours_both"              ? AvailabilityCase::both
                          : method == "ours_standard_source" ? AvailabilityCase::standard_source_only
                                                             : AvailabilityCase::robust_source_only;
        co.robust_pseudo_labels = ab.robust_pseudo_labels && co.availability == AvailabilityCase::both;
        CaseCache cc;
        if (co.availability != AvailabilityCase::robust_source_only)
            cc.standard_from_standard = &standard_track("from_standard", *sources.standard, std_opts);
        if (co.availability == AvailabilityCase::robust_source_only || co.robust_pseudo_labels)
            cc.standard_from_robust = &standard_track("from_robust", *sources.robust, std_opts);
        const AdaptObserver robust_obs = label_observer("robust:" + method);
        CaseResult res = run_case(sources, tgt_train, tgt_val, co, cc, {nullptr, &robust_obs});
        append_curve(report.curves, "robust:" + method, res.robust_log);
        report.evaluations.push_back(
            evaluate(method, "standard_track", res.standard_track, tgt.test, eval_atk, cfg.seed));
        report.evaluations.push_back(evaluate(method, "final", res.robust_track, tgt.test, eval_atk, cfg.seed));
        tracks.emplace("final:" + method, std::move(res.robust_track));
        finals[method] = &tracks.at("final:" + method);
    }

    report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (opts.write_outputs) {
        const fs::path dir = resolve_output_dir(cfg.output_dir);
        fs::create_directories(dir / "checkpoints");
        const std::uint64_t h = config_hash(cfg);
        write_text(dir / "report.json", report.to_json().dump(2) + "\n");
        write_text(dir / "metrics.csv", metrics_csv(report));
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
        std::uint64_t code_hash = 1469598103934665603ULL;
        for (unsigned char ch : std::string(kCodeVersion)) code_hash = (code_hash ^ ch) * 1099511628211ULL;
        char code_hex[32];
        std::snprintf(code_hex, sizeof code_hex, "%016llx", static_cast<unsigned long long>(code_hash));
        const json manifest = {{"schema_version", kReportSchemaVersion},
                               {"seed", cfg.seed},
                               {"config_hash", hex},
                               {"code_version", kCodeVersion},
                               {"code_hash", code_hex},
                               {"config", config_to_json(cfg)},
                               {"files", {"report.json", "metrics.csv", "pseudo_labels.csv", "checkpoints/"}}};
        write_text(dir / "manifest.json", manifest.dump(2) + "\n");
        if (sources.standard) save_checkpoint(*sources.standard, h, (dir / "checkpoints/source_standard.json").string());
        if (sources.robust) save_checkpoint(*sources.robust, h, (dir / "checkpoints/source_robust.json").string());
        for (const auto& [name, m] : finals) save_checkpoint(*m, h, (dir / "checkpoints" / (name + ".json")).string());
        for (const auto& [name, m] : tracks)
            if (name.rfind("final:", 0) != 0)
                save_checkpoint(m, h, (dir / "checkpoints" / ("standard_" + name + ".json")).string());
        std::string csv = "phase,sample_id,label,source,epoch\n";
        for (const auto& d : dumps)
            for (std::size_t i = 0; i < d.labels.size(); ++i)
                csv += d.phase + "," + std::to_string(tgt.train_idx[i]) + "," +
                       std::to_string(d.labels.labels[i]) + "," + to_string(d.labels.source) + "," +
                       std::to_string(d.labels.epoch_stamp) + "\n";
        write_text(dir / "pseudo_labels.csv", csv);
    }
    return report;
}

std::vector<std::string> ablation_row_names() {
    return {"no_contrastive", "no_cross_entropy", "no_entropy", "no_adv_images", "no_diversity", "full"};
}

ExperimentConfig ablation_config(const ExperimentConfig& base, const std::string& row) {
    ExperimentConfig c = base;
    c.availability = AvailabilityCase::both;
    c.methods = {"ours_both"};
    c.ablation = AblationToggles{};
    if (row == "no_contrastive") c.ablation.contrastive = false;
    else if (row == "no_cross_entropy") c.ablation.pseudo_ce = false;
    else if (row == "no_entropy") c.ablation.entropy = false;
    else if (row == "no_adv_images") c.ablation.adv_images = false;
    else if (row == "no_diversity") c.ablation.diversity = false;
    else if (row != "full") throw ConfigError("unknown ablation row '" + row + "'");
    return c;
}

std::vector<AblationRow> run_ablation_grid(const ExperimentConfig& base,
                                           const std::vector<std::uint64_t>& seeds,
                                           const RunOptions& opts) {
    base.validate();
    SourceCache local;
    RunOptions inner = opts;
    if (!inner.cache) inner.cache = &local;
    std::vector<AblationRow> rows;
    std::string csv = "row,seed,clean_acc,adv_acc\n";
    for (const auto& name : ablation_row_names()) {
        for (auto seed : seeds) {
            ExperimentConfig c = ablation_config(base, name);
            c.seed = seed;
            c.output_dir = (fs::path(base.output_dir) / ("ablation_" + name + "_seed" + std::to_string(seed))).string();
            RunReport r = run_experiment(c, inner);
            const auto& e = r.find("ours_both");
            csv += name + "," + std::to_string(seed) + "," + format_double(e.clean_acc) + "," +
                   format_double(e.adv_acc) + "\n";
            rows.push_back({name, std::move(r)});
        }
    }
    if (opts.write_outputs) {
        const fs::path dir = resolve_output_dir(base.output_dir);
        fs::create_directories(dir);
        write_text(dir / "ablation.csv", csv);
    }
    return rows;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw DimensionError("spearman needs two equal-length series");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < order.size();) {
            std::size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0 || vb == 0) return 0.0;
    return cov / std::sqrt(va * vb);
}

SweepResult run_class_sweep(const ExperimentConfig& base, const std::vector<int>& ks,
                            const std::vector<std::uint64_t>& seeds, const RunOptions& opts) {
    base.validate();
    if (ks.empty() || seeds.empty()) throw ConfigError("class sweep needs at least one k and one seed");
    SweepResult out;
    out.ks = ks;
    std::string csv = "k,seed,both_adv,standard_adv,both_clean,standard_clean,advantage\n";
    for (int k : ks) {
        double adv_sum = 0.0;
        for (auto seed : seeds) {
            ExperimentConfig c = base;
            c.seed = seed;
            c.data.class_subset = k;
            c.methods = {"ours_both", "ours_standard_source"};
            c.output_dir = (fs::path(base.output_dir) / ("sweep_k" + std::to_string(k) + "_seed" + std::to_string(seed))).string();
            c.validate();
            RunOptions inner = opts;
            const RunReport r = run_experiment(c, inner);
            SweepPoint p;
            p.k = k;
            p.seed = seed;
            p.both_adv = r.find("ours_both").adv_acc;
            p.standard_adv = r.find("ours_standard_source").adv_acc;
            p.both_clean = r.find("ours_both").clean_acc;
            p.standard_clean = r.find("ours_standard_source").clean_acc;
            adv_sum += p.advantage();
            csv += std::to_string(k) + "," + std::to_string(seed) + "," + format_double(p.both_adv) + "," +
                   format_double(p.standard_adv) + "," + format_double(p.both_clean) + "," +
                   format_double(p.standard_clean) + "," + format_double(p.advantage()) + "\n";
            out.points.push_back(p);
        }
        out.mean_advantage.push_back(adv_sum / static_cast<double>(seeds.size()));
    }
    if (ks.size() >= 2) {
        std::vector<double> kd(ks.begin(), ks.end());
        out.rank_correlation = spearman(kd, out.mean_advantage);
    }
    if (opts.write_outputs) {
        const fs::path dir = resolve_output_dir(base.output_dir);
        fs::create_directories(dir);
        write_text(dir / "sweep.csv", csv);
        json j = {{"ks", out.ks}, {"mean_advantage", out.mean_advantage},
                  {"rank_correlation", out.rank_correlation}};
        write_text(dir / "sweep.json", j.dump(2) + "\n");
    }
    return out;
}

void export_features(const Model& model, const DomainDataset& data, bool attacked,
                     const AttackConfig& atk, std::uint64_t seed, const std::string& path) {
    if (data.size() == 0) throw DomainError("export_features: empty dataset");
    require_matrix(data.x, model.input_dim(), "export_features input");
    Tensor x = data.x;
    if (attacked) {
        Rng rng(seed, streams::eval_attack);
        Tensor adv({data.size(), data.input_dim()});
        constexpr std::size_t chunk = 256;
        for (std::size_t s = 0; s < data.size(); s += chunk) {
            std::vector<std::size_t> idx;
            for (std::size_t i = s; i < std::min(data.size(), s + chunk); ++i) idx.push_back(i);
            const std::vector<int> yb(data.y.begin() + s, data.y.begin() + s + idx.size());
            const Tensor a = pgd_attack(model, x.gather_rows(idx), yb, atk, &rng);
            std::copy(a.data().begin(), a.data().end(), adv.data().begin() + s * data.input_dim());
        }
        x = std::move(adv);
    }
    const ForwardResult fr = forward(model, x);
    const auto pred = argmax_rows(fr.logits);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    const std::size_t d = fr.features.cols();
    for (std::size_t k = 0; k < d; ++k) out << 'z' << k << ',';
    out << "label,pseudo_label,correct\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t k = 0; k < d; ++k) out << format_double(fr.features(i, k)) << ',';
        out << data.y[i] << ',' << pred[i] << ',' << (pred[i] == data.y[i] ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {
json tensor_json(const Tensor& t) { return {{"shape", t.shape()}, {"data", t.data()}}; }

Tensor tensor_from(const json& j) {
    return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}
}  // namespace

json model_to_json(const Model& m, std::uint64_t cfg_hash) {
    json layers = json::array();
    for (const auto& l : m.encoder.layers())
        layers.push_back({{"weight", tensor_json(l.weight)}, {"bias", tensor_json(l.bias)}});
    return {{"format", "rsfda-checkpoint"},
            {"version", 1},
            {"config_hash", cfg_hash},
            {"widths", m.encoder.widths()},
            {"activation", to_string(m.encoder.activation())},
            {"classes", m.classes()},
            {"classifier_frozen", m.classifier.frozen()},
            {"encoder", layers},
            {"classifier", {{"weight", tensor_json(m.classifier.layer().weight)},
                            {"bias", tensor_json(m.classifier.layer().bias)}}}};
}

Model model_from_json(const json& j) {
    try {
        if (j.at("format") != "rsfda-checkpoint") throw SchemaError("not an rsfda checkpoint");
        const auto widths = j.at("widths").get<std::vector<std::size_t>>();
        Rng scratch(0, 0);
        ModelSpec spec;
        spec.hidden.assign(widths.begin() + 1, widths.end() - 1);
        spec.feature_dim = widths.back();
        spec.activation = activation_from_string(j.at("activation").get<std::string>());
        Model m = Model::create(widths.front(), j.at("classes").get<std::size_t>(), spec, scratch);
        const auto& layers = j.at("encoder");
        if (layers.size() != m.encoder.layers().size()) throw SchemaError("checkpoint layer count mismatch");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Linear& l = m.encoder.layers()[i];
            Tensor w = tensor_from(layers[i].at("weight"));
            Tensor b = tensor_from(layers[i].at("bias"));
            if (w.shape() != l.weight.shape() || b.shape() != l.bias.shape())
                throw SchemaError("checkpoint tensor shape mismatch in encoder layer " + std::to_string(i));
            l.weight = std::move(w);
            l.bias = std::move(b);
        }
        Linear& c = m.classifier.layer();
        Tensor w = tensor_from(j.at("classifier").at("weight"));
        Tensor b = tensor_from(j.at("classifier").at("bias"));
        if (w.shape() != c.weight.shape() || b.shape() != c.bias.shape())
            throw SchemaError("checkpoint classifier shape mismatch");
        c.weight = std::move(w);
        c.bias = std::move(b);
        m.classifier.set_frozen(j.at("classifier_frozen").get<bool>());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Model& m, std::uint64_t cfg_hash, const std::string& path) {
    write_text(path, model_to_json(m, cfg_hash).dump() + "\n");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    try {
        return model_from_json(json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("checkpoint '" + path + "': " + e.what());
    }
}

}  // namespace rsfda
