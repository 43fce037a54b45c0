#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "lfcap/model.hpp"
#include "lfcap/training.hpp"

namespace lfcap {

/// "k->V": k coded measurements reconstructing V = M * N views.
struct TaskSpec {
    std::size_t measurements = 4;
    std::size_t views = 49;

    static TaskSpec parse(const std::string& text);
    std::string str() const;
    /// Square angular side length; throws unless V is a perfect square.
    std::size_t side() const;
};

/// Kernel (ku, kv) whose sliding positions over M x N give exactly k measurements.
/// Among all factorizations k = a * b the most balanced one is chosen.
std::pair<std::size_t, std::size_t> kernel_for(std::size_t M, std::size_t N, std::size_t k);

struct RunConfig {
    std::string preset = "paper";
    TaskSpec task;
    std::size_t height = 64; ///< synthetic scene size
    std::size_t width = 64;
    std::size_t channels = 1;
    bool per_channel = false; ///< "multiple" masks instead of one "single" shared mask
    std::size_t stages = 6;
    std::size_t depth = 9;
    std::size_t features = 64;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    TrainConfig train;
    std::size_t train_scenes = 8;
    std::size_t test_scenes = 4;
    double max_disparity = 1.0;
    std::string output_dir = "runs";

    static RunConfig preset_config(const std::string& name);
    /// Starts from the preset named in j (default "paper") and applies every present field.
    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    void validate() const;
    ModelConfig model_config() const;
    LfShape scene_shape() const;
};

/// Reads a config file if given, else the preset; then applies LFCAP_SEED when set.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::string& preset);
/// Replaces cfg.seed (and the training seed) with LFCAP_SEED if the variable is set.
void apply_seed_env(RunConfig& cfg);
/// LFCAP_SEED if set, else fallback.
std::uint64_t seed_from_env(std::uint64_t fallback);

} // namespace lfcap
