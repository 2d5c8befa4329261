#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsfda/experiment.hpp"

using nlohmann::json;
using namespace rsfda;

namespace {

// Every leaf of the default config document becomes one "--a.b.c" flag.
void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
    if (j.is_object() && !j.empty()) {
        for (const auto& [k, v] : j.items()) collect_leaves(v, prefix.empty() ? k : prefix + "." + k, out);
        return;
    }
    out.push_back(prefix);
}

struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "Experiment config file (JSON, comments allowed)")
            ->check(CLI::ExistingFile);
        static std::vector<std::string> leaves = [] {
            std::vector<std::string> v;
            collect_leaves(config_to_json(default_config()), "", v);
            return v;
        }();
        for (const auto& leaf : leaves)
            app->add_option("--" + leaf, values[leaf], "Overrides config field " + leaf);
    }

    ExperimentConfig resolve(const CLI::App* app) const {
        json doc = config_path.empty() ? json::object() : read_config_file(config_path);
        json full = config_to_json(config_from_json(doc));
        for (const auto& [leaf, value] : values)
            if (app->count("--" + leaf) > 0) apply_override(full, leaf, value);
        return config_from_json(full);
    }
};

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw ConfigError("bad seed list entry '" + part + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    for (auto v : parse_seeds(s)) out.push_back(static_cast<int>(v));
    return out;
}

void print_error(const std::string& kind, const std::string& message, const json& extra = nullptr) {
    json j = {{"error", kind}, {"message", message}};
    if (!extra.is_null()) j["fields"] = extra;
    std::cerr << j.dump() << "\n";
}

void print_summary(const RunReport& r) {
    std::printf("%-22s %-15s %9s %9s\n", "method", "model", "clean", "adv");
    for (const auto& e : r.evaluations)
        std::printf("%-22s %-15s %9.4f %9.4f\n", e.method.c_str(), e.model.c_str(), e.clean_acc, e.adv_acc);
    std::printf("wall clock %.2f s\n", r.wall_clock_s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Source-free robust domain adaptation experiments"};
    app.require_subcommand(1);

    ConfigFlags run_flags, ablate_flags, sweep_flags, export_flags, gen_flags;

    auto* run = app.add_subcommand("run", "Train, adapt and evaluate the configured methods");
    run_flags.attach(run);

    auto* ablate = app.add_subcommand("ablate", "Ablation grid for the both-models case");
    ablate_flags.attach(ablate);
    std::string ablate_seeds = "0";
    ablate->add_option("--seeds", ablate_seeds, "Comma-separated seed list");

    auto* sweep = app.add_subcommand("sweep-classes", "Both-case vs standard-source-only over class counts");
    sweep_flags.attach(sweep);
    std::string sweep_seeds = "0", sweep_ks = "2,4";
    sweep->add_option("--seeds", sweep_seeds, "Comma-separated seed list");
    sweep->add_option("--ks", sweep_ks, "Comma-separated class counts");

    auto* exp = app.add_subcommand("export-features", "Write encoder features of a checkpoint to CSV");
    export_flags.attach(exp);
    std::string checkpoint, out_path, domain = "target", part = "test";
    bool attacked = false;
    exp->add_option("--checkpoint", checkpoint, "Model checkpoint JSON")->required();
    exp->add_option("--out", out_path, "Output CSV path")->required();
    exp->add_option("--domain", domain, "source or target")->check(CLI::IsMember({"source", "target"}));
    exp->add_option("--part", part, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
    exp->add_flag("--attacked", attacked, "Perturb inputs with the eval attack first");

    auto* gen = app.add_subcommand("gen-data", "Write the configured synthetic domains as CSV");
    gen_flags.attach(gen);
    std::string gen_dir;
    gen->add_option("--out-dir", gen_dir, "Directory for source.csv and target.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (run->parsed()) {
            const auto cfg = run_flags.resolve(run);
            const RunReport r = run_experiment(cfg);
            print_summary(r);
            std::printf("outputs in %s\n", resolve_output_dir(cfg.output_dir).c_str());
        } else if (ablate->parsed()) {
            const auto cfg = ablate_flags.resolve(ablate);
            const auto rows = run_ablation_grid(cfg, parse_seeds(ablate_seeds));
            std::printf("%-18s %6s %9s %9s\n", "row", "seed", "clean", "adv");
            for (const auto& row : rows) {
                const auto& e = row.report.find("ours_both");
                std::printf("%-18s %6llu %9.4f %9.4f\n", row.name.c_str(),
                            static_cast<unsigned long long>(row.report.config.seed), e.clean_acc, e.adv_acc);
            }
        } else if (sweep->parsed()) {
            const auto cfg = sweep_flags.resolve(sweep);
            const auto res = run_class_sweep(cfg, parse_ints(sweep_ks), parse_seeds(sweep_seeds));
            std::printf("%4s %12s\n", "k", "advantage");
            for (std::size_t i = 0; i < res.ks.size(); ++i)
                std::printf("%4d %12.4f\n", res.ks[i], res.mean_advantage[i]);
            std::printf("rank correlation %.4f\n", res.rank_correlation);
        } else if (exp->parsed()) {
            const auto cfg = export_flags.resolve(exp);
            const Model m = load_checkpoint(checkpoint);
            auto [source, target] = load_domains(cfg);
            const DomainDataset& d = domain == "source" ? source : target;
            const auto parts = split(d, cfg.data.split, domain == "source" ? cfg.seed : splitmix64(cfg.seed));
            const DomainDataset& chosen = part == "train" ? parts.train : part == "val" ? parts.val : parts.test;
            const AttackConfig atk = cfg.attack_eval.resolve(d.input_lo, d.input_hi);
            export_features(m, chosen, attacked, atk, cfg.seed, out_path);
            std::printf("wrote %zu rows to %s\n", chosen.size(), out_path.c_str());
        } else if (gen->parsed()) {
            const auto cfg = gen_flags.resolve(gen);
            auto [source, target] = load_domains(cfg);
            std::filesystem::create_directories(gen_dir);
            export_csv(source, (std::filesystem::path(gen_dir) / "source.csv").string());
            export_csv(target, (std::filesystem::path(gen_dir) / "target.csv").string());
            std::printf("wrote %zu source and %zu target rows to %s\n", source.size(), target.size(),
                        gen_dir.c_str());
        }
    } catch (const ValidationError& e) {
        print_error(e.kind(), e.what(), e.fields());
        return 1;
    } catch (const Error& e) {
        print_error(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
