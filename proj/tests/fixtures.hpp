#pragma once

#include <filesystem>
#include <string>

#include "rsfda/config.hpp"

namespace testing {

// A seconds-scale experiment: three classes, short schedules, a cheap attack.
inline rsfda::ExperimentConfig tiny_config(std::uint64_t seed = 1) {
    rsfda::ExperimentConfig c = rsfda::default_config();
    c.seed = seed;
    c.data.source.classes = 3;
    c.data.source.input_dim = 6;
    c.data.source.samples_per_class = 40;
    c.data.target = c.data.source;
    c.data.target.rotation = 0.5;
    c.model.hidden = {16};
    c.model.feature_dim = 4;
    c.source_schedule = {3, 1, 32, 5};
    c.target_schedule = {2, 1, 32, 5};
    c.attack_train.steps = 2;
    c.attack_eval.steps = 3;
    c.methods = {"shot", "shot_robust", "ours_both"};
    return c;
}

inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "rsfda_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace testing
