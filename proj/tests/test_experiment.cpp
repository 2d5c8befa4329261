#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "rsfda/experiment.hpp"
#include "support.hpp"

using namespace rsfda;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::size_t columns(const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

int run_cli(const std::string& args, const std::string& err_path) {
    const std::string cmd = std::string(RSFDA_CLI_PATH) + " " + args + " >/dev/null 2>" + err_path;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("zero eval epsilon makes adversarial and clean accuracy agree") {
    ExperimentConfig c = testing::tiny_config();
    c.attack_eval.epsilon = 0.0;
    const RunReport r = run_experiment(c, {false, nullptr});
    REQUIRE_FALSE(r.evaluations.empty());
    for (const auto& e : r.evaluations) {
        CHECK(e.adv_acc == e.clean_acc);
        CHECK(e.per_class_adv == e.per_class_clean);
    }
}

TEST_CASE("reports carry every method and model role") {
    const RunReport r = run_experiment(testing::tiny_config(), {false, nullptr});
    for (const auto& m : {"shot", "shot_robust", "ours_both"}) {
        const Evaluation& e = r.find(m);
        CHECK(e.split == "target_test");
        CHECK(e.per_class_clean.size() == 3);
        CHECK(e.clean_acc >= 0.0);
        CHECK(e.clean_acc <= 1.0);
    }
    CHECK_THROWS(r.find("ours_robust_source"));
    bool source_rows = false;
    for (const auto& e : r.evaluations) source_rows = source_rows || e.split == "source_test";
    CHECK(source_rows);
    CHECK_FALSE(r.pseudo_labels.empty());
    CHECK_FALSE(r.curves.empty());
    const json j = r.to_json();
    CHECK(j.at("schema_version") == kReportSchemaVersion);
    CHECK(j.at("config") == config_to_json(r.config));
}

TEST_CASE("identical configs give identical metrics") {
    const ExperimentConfig c = testing::tiny_config(3);
    const auto a = run_experiment(c, {false, nullptr}).metrics_json().dump();
    const auto b = run_experiment(c, {false, nullptr}).metrics_json().dump();
    CHECK(a == b);
    ExperimentConfig other = c;
    other.seed = 4;
    CHECK(run_experiment(other, {false, nullptr}).metrics_json().dump() != a);
}

TEST_CASE("the source cache does not change results") {
    const ExperimentConfig c = testing::tiny_config(2);
    SourceCache cache;
    const auto cold = run_experiment(c, {false, &cache}).metrics_json().dump();
    const auto warm = run_experiment(c, {false, &cache}).metrics_json().dump();
    CHECK(cold == warm);
    CHECK(run_experiment(c, {false, nullptr}).metrics_json().dump() == cold);
}

TEST_CASE("runs write their artifacts") {
    ExperimentConfig c = testing::tiny_config();
    c.output_dir = testing::scratch_dir("run");
    const RunReport r = run_experiment(c);
    for (const char* f : {"report.json", "metrics.csv", "manifest.json", "pseudo_labels.csv"})
        CHECK(std::filesystem::exists(c.output_dir + "/" + f));
    const json report = json::parse(slurp(c.output_dir + "/report.json"));
    CHECK(report.at("metrics") == r.metrics_json());
    CHECK(lines_of(c.output_dir + "/pseudo_labels.csv").at(0) == "phase,sample_id,label,source,epoch");
    CHECK_FALSE(std::filesystem::is_empty(c.output_dir + "/checkpoints"));
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3}, {5, 5, 5}) == 0.0);
    // Average ranks: b = (1, 2.5, 2.5, 4) against a = (1, 2, 3, 4).
    const double expected = 4.5 / std::sqrt(5.0 * 4.5);
    CHECK(spearman({1, 2, 3, 4}, {0.1, 0.5, 0.5, 0.9}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(spearman({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}) == doctest::Approx(0.8));
}

TEST_CASE("checkpoints round trip exactly") {
    const Model m = testing::small_model(5, 3, Activation::tanh, 4, {6, 7}, 3);
    const auto dir = testing::scratch_dir("ckpt");
    save_checkpoint(m, 42, dir + "/m.json");
    const Model back = load_checkpoint(dir + "/m.json");
    CHECK(back.parameter_hash() == m.parameter_hash());
    CHECK(back.encoder.widths() == m.encoder.widths());
    CHECK(back.encoder.activation() == Activation::tanh);
    json j = model_to_json(m, 42);
    j["widths"] = json::array({5, 6, 3});
    CHECK_THROWS_AS(model_from_json(j), SchemaError);
    j = model_to_json(m, 42);
    j["format"] = "other";
    CHECK_THROWS_AS(model_from_json(j), SchemaError);
    std::ofstream(dir + "/bad.json") << "{";
    CHECK_THROWS_AS(load_checkpoint(dir + "/bad.json"), ParseError);
    CHECK_THROWS_AS(load_checkpoint(dir + "/none.json"), IoError);
}

TEST_CASE("feature export writes features, labels and predictions") {
    const Model m = testing::small_model(3, 2, Activation::relu, 4, {5}, 2);
    DomainDataset d;
    Rng rng(1, 0);
    d.x = testing::random_tensor({12, 3}, rng);
    d.y = testing::random_labels(12, 2, rng);
    d.class_count = 2;
    d.input_lo = -1;
    d.input_hi = 1;
    const auto dir = testing::scratch_dir("export");
    export_features(m, d, false, AttackConfig::relative(0.3, 5, 0.1, -1, 1), 1, dir + "/clean.csv");
    const auto clean = lines_of(dir + "/clean.csv");
    REQUIRE(clean.size() == 13);
    CHECK(clean[0] == "z0,z1,label,pseudo_label,correct");
    for (const auto& l : clean) CHECK(columns(l) == 5);

    export_features(m, d, true, AttackConfig::relative(0.0, 5, 0.1, -1, 1), 1, dir + "/eps0.csv");
    CHECK(lines_of(dir + "/eps0.csv") == clean);
    export_features(m, d, true, AttackConfig::relative(0.3, 5, 0.1, -1, 1), 1, dir + "/adv.csv");
    const auto adv = lines_of(dir + "/adv.csv");
    const Tensor moved = pgd_attack(m, d.x, d.y, AttackConfig::relative(0.3, 5, 0.1, -1, 1));
    for (std::size_t i = 0; i < 12; ++i) {
        bool same_input = true;
        for (std::size_t k = 0; k < 3; ++k) same_input = same_input && moved(i, k) == d.x(i, k);
        if (same_input) CHECK(adv[i + 1] == clean[i + 1]);
    }
    CHECK(adv != clean);
    CHECK_THROWS_AS(export_features(m, d, false, AttackConfig::relative(0.3, 5, 0.1, -1, 1), 1,
                                    dir + "/no/such/dir/x.csv"),
                    IoError);
}

TEST_CASE("the full ablation row is a plain both-case run") {
    const ExperimentConfig base = testing::tiny_config(5);
    ExperimentConfig plain = base;
    plain.availability = AvailabilityCase::both;
    plain.methods = {"ours_both"};
    const ExperimentConfig full = ablation_config(base, "full");
    CHECK(config_hash(full) == config_hash(plain));
    const auto rows = run_ablation_grid(base, {5}, {false, nullptr});
    REQUIRE(rows.size() == ablation_row_names().size());
    const RunReport direct = run_experiment(plain, {false, nullptr});
    for (const auto& row : rows)
        if (row.name == "full") CHECK(row.report.metrics_json() == direct.metrics_json());
    CHECK_FALSE(ablation_config(base, "no_adv_images").ablation.adv_images);
    CHECK_FALSE(ablation_config(base, "no_contrastive").ablation.contrastive);
    CHECK_FALSE(ablation_config(base, "no_cross_entropy").ablation.pseudo_ce);
    CHECK_THROWS(ablation_config(base, "no_everything"));
}

TEST_CASE("a single sweep point is a pair of class-subset runs") {
    ExperimentConfig base = testing::tiny_config(6);
    const SweepResult s = run_class_sweep(base, {2}, {6}, {false, nullptr});
    REQUIRE(s.points.size() == 1);
    ExperimentConfig c = base;
    c.data.class_subset = 2;
    c.methods = {"ours_both", "ours_standard_source"};
    const RunReport r = run_experiment(c, {false, nullptr});
    CHECK(s.points[0].both_adv == r.find("ours_both").adv_acc);
    CHECK(s.points[0].standard_adv == r.find("ours_standard_source").adv_acc);
    const SweepResult one = run_class_sweep(base, {1}, {6}, {false, nullptr});
    CHECK(one.points[0].both_adv == 1.0);
    CHECK(one.points[0].standard_adv == 1.0);
}

TEST_CASE("the CLI rejects unknown flags with a JSON error") {
    const auto dir = testing::scratch_dir("cli");
    const std::string err = dir + "/err.txt";
    CHECK(run_cli("run --weights.delta 1", err) != 0);
    const json e = json::parse(slurp(err));
    CHECK(e.contains("error"));
    CHECK(e.contains("message"));
    CHECK(run_cli("frobnicate", err) != 0);
    CHECK(json::parse(slurp(err)).contains("error"));
    CHECK(run_cli("run --weights.alpha -1 --attack_eval.steps 0", err) != 0);
    const json v = json::parse(slurp(err));
    CHECK(v.at("fields").size() >= 2);
}

TEST_CASE("the CLI runs a configured experiment") {
    const auto dir = testing::scratch_dir("cli_run");
    ExperimentConfig c = testing::tiny_config();
    c.output_dir = dir + "/out";
    std::ofstream(dir + "/c.json") << config_to_json(c).dump(2);
    CHECK(run_cli("run --config " + dir + "/c.json --seed 2", dir + "/err.txt") == 0);
    const json report = json::parse(slurp(dir + "/out/report.json"));
    CHECK(report.at("config").at("seed") == 2);
    CHECK(run_cli("gen-data --config " + dir + "/c.json --out-dir " + dir + "/data", dir + "/err.txt") == 0);
    CHECK(std::filesystem::exists(dir + "/data/source.csv"));
}
