#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lfcap::cli {

using Path = std::filesystem::path;

struct GenOptions {
    Path out;
    std::string preset = "tiny";
    std::optional<Path> config;
    std::optional<Path> scene; ///< explicit SceneSpec JSON
    std::optional<std::string> shape; ///< "MxNxHxW"
    std::optional<std::size_t> channels;
    std::size_t layers = 1;        ///< foreground layers of random scenes
    std::optional<double> disparity; ///< single planar layer with this disparity
    double max_disparity = 1.0;
    std::size_t count = 1;
    std::optional<std::uint64_t> seed;
};

struct CaptureOptions {
    Path lf;
    Path out;
    std::optional<Path> code;
    std::optional<Path> checkpoint;
    bool random_code = false;
    std::optional<std::string> kernel; ///< "kuxkv" for --random-code
    std::optional<std::size_t> measurements;
    double noise = 0.0;
    std::optional<std::uint64_t> seed;
};

struct TrainOptions {
    Path dataset;
    Path out;
    std::string preset = "paper";
    std::optional<Path> config;
    std::optional<std::size_t> steps;
    std::optional<Path> resume;
    std::optional<Path> log;
    std::size_t save_every = 0;
    bool quiet = false;
};

struct ReconstructOptions {
    Path measurements;
    Path checkpoint;
    Path out;
};

struct EvalOptions {
    Path recon;
    Path gt;
    Path out;
    std::string name;
    std::string task;
    std::optional<Path> maps;
};

struct AblateOptions {
    Path out;
    std::string preset = "tiny";
    std::optional<Path> config;
    std::string sweep = "all"; ///< T, D, sigma or all
    std::vector<double> values;
    std::optional<std::size_t> steps;
    bool quiet = false;
};

void cmd_gen(const GenOptions& o);
void cmd_capture(const CaptureOptions& o);
void cmd_train(const TrainOptions& o);
void cmd_reconstruct(const ReconstructOptions& o);
void cmd_eval(const EvalOptions& o);
void cmd_ablate(const AblateOptions& o);

/// Writes `<artifact>.json` next to an output.
void write_sidecar(const Path& artifact, const nlohmann::json& provenance);

/// Maps an exception to the process exit code: 1 for validation, 2 for I/O.
int exit_code_for(const std::exception& e);

} // namespace lfcap::cli
