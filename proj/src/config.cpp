#include "rsfda/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rsfda {

using nlohmann::json;

namespace {
std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& f : v) s += (s.empty() ? "" : "; ") + f;
    return s;
}
}  // namespace

ValidationError::ValidationError(std::vector<std::string> fields)
    : ConfigError("invalid config: " + join(fields)), fields_(std::move(fields)) {}

AttackConfig AttackProfile::resolve(double data_lo, double data_hi) const {
    return AttackConfig::relative(epsilon, steps, rel_step, clamp_lo.value_or(data_lo),
                                  clamp_hi.value_or(data_hi), random_start);
}

std::string method_for_case(AvailabilityCase c) {
    switch (c) {
        case AvailabilityCase::robust_source_only: return "ours_robust_source";
        case AvailabilityCase::standard_source_only: return "ours_standard_source";
        case AvailabilityCase::both: return "ours_both";
    }
    return "ours_both";
}

std::vector<std::string> ExperimentConfig::resolved_methods() const {
    if (methods.empty()) return {method_for_case(availability)};
    return methods;
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    // Rotated-cluster fixture: four blobs on a ring in the first two
    // coordinates (robust under the attack budget) plus 40 low-noise code
    // coordinates whose class shift is smaller than epsilon.
    c.data.source.classes = 4;
    c.data.source.input_dim = 42;
    c.data.source.samples_per_class = 300;
    c.data.source.scale = 2.0;
    c.data.source.noise_sigma = 0.3;
    c.data.source.weak_shift = 0.12;
    c.data.source.weak_sigma = 0.1;
    c.data.target = c.data.source;
    c.data.target.rotation = 0.6;
    c.attack_train = {0.25, 10, 0.25, false, std::nullopt, std::nullopt};
    c.attack_eval = {0.25, 20, 0.1, false, std::nullopt, std::nullopt};
    c.target_rates = {1e-5, 1e-4};
    c.robust_rates = {1e-3, 1e-3};
    return c;
}

namespace {

json shift_to_json(const ShiftSpec& s) {
    return {{"family", to_string(s.family)},
            {"rotation", s.rotation},
            {"translation", s.translation},
            {"scale", s.scale},
            {"noise_sigma", s.noise_sigma},
            {"classes", s.classes},
            {"samples_per_class", s.samples_per_class},
            {"input_dim", s.input_dim},
            {"weak_shift", s.weak_shift},
            {"weak_sigma", s.weak_sigma}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json attack_to_json(const AttackProfile& a) {
    return {{"epsilon", a.epsilon},     {"steps", a.steps},
            {"rel_step", a.rel_step},   {"random_start", a.random_start},
            {"clamp_lo", optional_json(a.clamp_lo)}, {"clamp_hi", optional_json(a.clamp_hi)}};
}

json schedule_to_json(const TrainSchedule& s) {
    return {{"max_epochs", s.max_epochs},
            {"pseudo_refresh_interval", s.pseudo_refresh_interval},
            {"batch_size", s.batch_size},
            {"early_stop_patience", s.early_stop_patience}};
}

json rates_to_json(const LearningRates& r) { return {{"backbone", r.backbone}, {"head", r.head}}; }

// Reads typed fields out of the merged document and records every failure.
class Reader {
public:
    explicit Reader(const json& doc) : doc_(doc) {}

    template <typename T>
    T get(const std::string& path, T fallback) {
        try {
            return doc_.at(json::json_pointer(path)).get<T>();
        } catch (const json::exception&) {
            errors.push_back(path.substr(1) + ": wrong type");
            return fallback;
        }
    }

    template <typename T>
    std::optional<T> optional(const std::string& path) {
        const auto ptr = json::json_pointer(path);
        if (!doc_.contains(ptr) || doc_.at(ptr).is_null()) return std::nullopt;
        return get<T>(path, T{});
    }

    template <typename T, typename Parse>
    T enumerated(const std::string& path, T fallback, Parse parse) {
        const auto s = get<std::string>(path, "");
        try {
            return parse(s);
        } catch (const ConfigError&) {
            errors.push_back(path.substr(1) + ": unknown value '" + s + "'");
            return fallback;
        }
    }

    std::vector<std::string> errors;

private:
    const json& doc_;
};

ShiftSpec read_shift(Reader& r, const std::string& base) {
    ShiftSpec s;
    s.family = r.enumerated(base + "/family", s.family, family_from_string);
    s.rotation = r.get(base + "/rotation", s.rotation);
    s.translation = r.get(base + "/translation", s.translation);
    s.scale = r.get(base + "/scale", s.scale);
    s.noise_sigma = r.get(base + "/noise_sigma", s.noise_sigma);
    s.classes = r.get(base + "/classes", s.classes);
    s.samples_per_class = r.get(base + "/samples_per_class", s.samples_per_class);
    s.input_dim = r.get(base + "/input_dim", s.input_dim);
    s.weak_shift = r.get(base + "/weak_shift", s.weak_shift);
    s.weak_sigma = r.get(base + "/weak_sigma", s.weak_sigma);
    return s;
}

AttackProfile read_attack(Reader& r, const std::string& base) {
    AttackProfile a;
    a.epsilon = r.get(base + "/epsilon", a.epsilon);
    a.steps = r.get(base + "/steps", a.steps);
    a.rel_step = r.get(base + "/rel_step", a.rel_step);
    a.random_start = r.get(base + "/random_start", a.random_start);
    a.clamp_lo = r.optional<double>(base + "/clamp_lo");
    a.clamp_hi = r.optional<double>(base + "/clamp_hi");
    return a;
}

TrainSchedule read_schedule(Reader& r, const std::string& base) {
    TrainSchedule s;
    s.max_epochs = r.get(base + "/max_epochs", s.max_epochs);
    s.pseudo_refresh_interval = r.get(base + "/pseudo_refresh_interval", s.pseudo_refresh_interval);
    s.batch_size = r.get(base + "/batch_size", s.batch_size);
    s.early_stop_patience = r.get(base + "/early_stop_patience", s.early_stop_patience);
    return s;
}

LearningRates read_rates(Reader& r, const std::string& base) {
    LearningRates l;
    l.backbone = r.get(base + "/backbone", l.backbone);
    l.head = r.get(base + "/head", l.head);
    return l;
}

// Every key in `user` must exist in `schema` (the fully populated default
// document). Arrays and scalars are leaves.
void check_keys(const json& user, const json& schema, const std::string& path,
                std::vector<std::string>& errors) {
    if (!user.is_object()) return;
    if (!schema.is_object()) {
        if (!schema.is_null()) errors.push_back(path + ": expected a value, got an object");
        return;
    }
    for (const auto& [key, value] : user.items()) {
        const std::string p = path.empty() ? key : path + "." + key;
        if (!schema.contains(key)) {
            errors.push_back(p + ": unknown field");
            continue;
        }
        check_keys(value, schema.at(key), p, errors);
    }
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
    json data = {{"source_csv", c.data.source_csv ? json(*c.data.source_csv) : json(nullptr)},
                 {"target_csv", c.data.target_csv ? json(*c.data.target_csv) : json(nullptr)},
                 {"csv_input_range", c.data.csv_input_range
                                         ? json::array({c.data.csv_input_range->first,
                                                        c.data.csv_input_range->second})
                                         : json(nullptr)},
                 {"source", shift_to_json(c.data.source)},
                 {"target", shift_to_json(c.data.target)},
                 {"split", {{"train", c.data.split.train}, {"val", c.data.split.val}, {"test", c.data.split.test}}},
                 {"class_subset", c.data.class_subset ? json(*c.data.class_subset) : json(nullptr)}};
    std::vector<std::size_t> hidden = c.model.hidden;
    return {{"seed", c.seed},
            {"output_dir", c.output_dir},
            {"data", data},
            {"case", to_string(c.availability)},
            {"methods", c.methods},
            {"model", {{"hidden", hidden}, {"feature_dim", c.model.feature_dim},
                       {"activation", to_string(c.model.activation)}}},
            {"weights", {{"alpha", c.weights.alpha}, {"beta", c.weights.beta},
                         {"gamma", c.weights.gamma}, {"margin", c.weights.margin}}},
            {"contrastive_max_pairs", c.contrastive_max_pairs},
            {"kmeans_metric", to_string(c.kmeans_metric)},
            {"attack_train", attack_to_json(c.attack_train)},
            {"attack_eval", attack_to_json(c.attack_eval)},
            {"source_schedule", schedule_to_json(c.source_schedule)},
            {"target_schedule", schedule_to_json(c.target_schedule)},
            {"source_rates", rates_to_json(c.source_rates)},
            {"target_rates", rates_to_json(c.target_rates)},
            {"robust_rates", rates_to_json(c.robust_rates)},
            {"ablation", {{"contrastive", c.ablation.contrastive},
                          {"pseudo_ce", c.ablation.pseudo_ce},
                          {"entropy", c.ablation.entropy},
                          {"diversity", c.ablation.diversity},
                          {"adv_images", c.ablation.adv_images},
                          {"robust_pseudo_labels", c.ablation.robust_pseudo_labels}}}};
}

ExperimentConfig config_from_json(const json& user) {
    const json defaults = config_to_json(default_config());
    std::vector<std::string> errors;
    if (!user.is_object()) throw ValidationError({"<root>: config must be a JSON object"});
    check_keys(user, defaults, "", errors);
    json doc = defaults;
    doc.merge_patch(user);

    Reader r(doc);
    ExperimentConfig c;
    c.seed = r.get<std::uint64_t>("/seed", 0);
    c.output_dir = r.get<std::string>("/output_dir", c.output_dir);
    c.data.source_csv = r.optional<std::string>("/data/source_csv");
    c.data.target_csv = r.optional<std::string>("/data/target_csv");
    if (auto range = r.optional<std::vector<double>>("/data/csv_input_range")) {
        if (range->size() == 2)
            c.data.csv_input_range = std::make_pair((*range)[0], (*range)[1]);
        else
            r.errors.push_back("data.csv_input_range: expected [lo, hi]");
    }
    c.data.source = read_shift(r, "/data/source");
    c.data.target = read_shift(r, "/data/target");
    c.data.split.train = r.get("/data/split/train", c.data.split.train);
    c.data.split.val = r.get("/data/split/val", c.data.split.val);
    c.data.split.test = r.get("/data/split/test", c.data.split.test);
    c.data.class_subset = r.optional<int>("/data/class_subset");
    c.availability = r.enumerated("/case", c.availability, case_from_string);
    c.methods = r.get("/methods", c.methods);
    c.model.hidden = r.get("/model/hidden", c.model.hidden);
    c.model.feature_dim = r.get("/model/feature_dim", c.model.feature_dim);
    c.model.activation = r.enumerated("/model/activation", c.model.activation, activation_from_string);
    c.weights.alpha = r.get("/weights/alpha", c.weights.alpha);
    c.weights.beta = r.get("/weights/beta", c.weights.beta);
    c.weights.gamma = r.get("/weights/gamma", c.weights.gamma);
    c.weights.margin = r.get("/weights/margin", c.weights.margin);
    c.contrastive_max_pairs = r.get("/contrastive_max_pairs", c.contrastive_max_pairs);
    c.kmeans_metric = r.enumerated("/kmeans_metric", c.kmeans_metric, metric_from_string);
    c.attack_train = read_attack(r, "/attack_train");
    c.attack_eval = read_attack(r, "/attack_eval");
    c.source_schedule = read_schedule(r, "/source_schedule");
    c.target_schedule = read_schedule(r, "/target_schedule");
    c.source_rates = read_rates(r, "/source_rates");
    c.target_rates = read_rates(r, "/target_rates");
    c.robust_rates = read_rates(r, "/robust_rates");
    c.ablation.contrastive = r.get("/ablation/contrastive", true);
    c.ablation.pseudo_ce = r.get("/ablation/pseudo_ce", true);
    c.ablation.entropy = r.get("/ablation/entropy", true);
    c.ablation.diversity = r.get("/ablation/diversity", true);
    c.ablation.adv_images = r.get("/ablation/adv_images", true);
    c.ablation.robust_pseudo_labels = r.get("/ablation/robust_pseudo_labels", false);

    errors.insert(errors.end(), r.errors.begin(), r.errors.end());
    if (!errors.empty()) throw ValidationError(errors);
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    std::vector<std::string> e;
    auto check_shift = [&](const ShiftSpec& s, const char* name) {
        try {
            s.validate();
        } catch (const ConfigError& err) {
            e.push_back(std::string(name) + ": " + err.what());
        }
    };
    if (output_dir.empty()) e.push_back("output_dir: must not be empty");
    if (data.source_csv.has_value() != data.target_csv.has_value())
        e.push_back("data.source_csv/target_csv: give both or neither");
    if (!data.source_csv) {
        check_shift(data.source, "data.source");
        check_shift(data.target, "data.target");
        if (data.source.classes != data.target.classes)
            e.push_back("data.target.classes: must equal data.source.classes");
        if (data.source.input_dim != data.target.input_dim)
            e.push_back("data.target.input_dim: must equal data.source.input_dim");
        if (data.source.family != data.target.family)
            e.push_back("data.target.family: must equal data.source.family");
        if (data.class_subset && (*data.class_subset < 1 || *data.class_subset > data.source.classes))
            e.push_back("data.class_subset: must lie in [1, classes]");
    } else if (data.class_subset && *data.class_subset < 1) {
        e.push_back("data.class_subset: must be >= 1");
    }
    if (data.csv_input_range && !(data.csv_input_range->first < data.csv_input_range->second))
        e.push_back("data.csv_input_range: lo must be < hi");
    const auto& f = data.split;
    if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
        e.push_back("data.split: fractions must be nonnegative and sum to 1");
    if (f.train <= 0) e.push_back("data.split.train: must be positive");
    if (f.test <= 0) e.push_back("data.split.test: must be positive");

    for (const auto& m : methods)
        if (std::find(kMethodNames.begin(), kMethodNames.end(), m) == kMethodNames.end())
            e.push_back("methods: unknown method '" + m + "'");
    if (model.feature_dim == 0) e.push_back("model.feature_dim: must be positive");
    for (auto h : model.hidden)
        if (h == 0) e.push_back("model.hidden: widths must be positive");

    if (!(weights.alpha >= 0)) e.push_back("weights.alpha: must be >= 0");
    if (!(weights.beta >= 0)) e.push_back("weights.beta: must be >= 0");
    if (!(weights.gamma >= 0)) e.push_back("weights.gamma: must be >= 0");
    if (!(weights.margin > 0)) e.push_back("weights.margin: must be > 0");

    auto check_attack = [&](const AttackProfile& a, const std::string& name) {
        if (!(a.epsilon >= 0)) e.push_back(name + ".epsilon: must be >= 0");
        if (a.steps < 1) e.push_back(name + ".steps: must be >= 1");
        if (!(a.rel_step > 0)) e.push_back(name + ".rel_step: must be > 0");
        if (a.clamp_lo && a.clamp_hi && !(*a.clamp_lo < *a.clamp_hi))
            e.push_back(name + ".clamp_lo: must be < clamp_hi");
    };
    check_attack(attack_train, "attack_train");
    check_attack(attack_eval, "attack_eval");

    auto check_schedule = [&](const TrainSchedule& s, const std::string& name) {
        if (s.max_epochs < 0) e.push_back(name + ".max_epochs: must be >= 0");
        if (s.pseudo_refresh_interval < 1) e.push_back(name + ".pseudo_refresh_interval: must be >= 1");
        if (s.max_epochs > 0 && s.pseudo_refresh_interval > s.max_epochs)
            e.push_back(name + ".pseudo_refresh_interval: must not exceed max_epochs");
        if (s.batch_size < 1) e.push_back(name + ".batch_size: must be >= 1");
        if (s.early_stop_patience < 1) e.push_back(name + ".early_stop_patience: must be >= 1");
    };
    check_schedule(source_schedule, "source_schedule");
    check_schedule(target_schedule, "target_schedule");

    auto check_rates = [&](const LearningRates& r, const std::string& name) {
        if (!(r.backbone > 0)) e.push_back(name + ".backbone: must be > 0");
        if (!(r.head > 0)) e.push_back(name + ".head: must be > 0");
    };
    check_rates(source_rates, "source_rates");
    check_rates(target_rates, "target_rates");
    check_rates(robust_rates, "robust_rates");
    if (!e.empty()) throw ValidationError(e);
}

json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
}

void apply_override(json& doc, const std::string& dotted_path, const std::string& value) {
    static const json schema = config_to_json(default_config());
    std::string pointer;
    std::stringstream ss(dotted_path);
    std::string part;
    while (std::getline(ss, part, '.')) pointer += "/" + part;
    const json::json_pointer ptr(pointer);
    if (!schema.contains(ptr)) throw ValidationError({dotted_path + ": unknown field"});
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;
    }
    doc[ptr] = parsed;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string text = config_to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace rsfda
