#include "lfcap/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

namespace lfcap {

TaskSpec TaskSpec::parse(const std::string& text)
{
    const auto arrow = text.find("->");
    try {
        if (arrow == std::string::npos)
            throw std::invalid_argument("missing ->");
        std::size_t used = 0;
        TaskSpec t;
        const std::string a = text.substr(0, arrow), b = text.substr(arrow + 2);
        t.measurements = std::stoul(a, &used);
        if (used != a.size())
            throw std::invalid_argument("trailing text");
        t.views = std::stoul(b, &used);
        if (used != b.size())
            throw std::invalid_argument("trailing text");
        if (t.measurements == 0 || t.views == 0)
            throw std::invalid_argument("zero");
        (void)t.side();
        return t;
    } catch (const std::logic_error&) {
        throw ValidationError("task must look like 4->49, got '" + text + "'");
    }
}

std::string TaskSpec::str() const
{
    return std::to_string(measurements) + "->" + std::to_string(views);
}

std::size_t TaskSpec::side() const
{
    const auto s = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(views))));
    if (s * s != views)
        throw ValidationError("view count " + std::to_string(views) + " is not a square");
    return s;
}

std::pair<std::size_t, std::size_t> kernel_for(std::size_t M, std::size_t N, std::size_t k)
{
    std::optional<std::pair<std::size_t, std::size_t>> best;
    for (std::size_t a = 1; a <= k; ++a) {
        if (k % a != 0)
            continue;
        const std::size_t b = k / a;
        if (a > M || b > N)
            continue;
        auto spread = [](std::size_t p, std::size_t q) { return p > q ? p - q : q - p; };
        if (!best || spread(a, b) < spread(best->first, best->second))
            best = {a, b};
    }
    if (!best)
        throw ValidationError("no kernel gives " + std::to_string(k) + " measurements on " +
                              std::to_string(M) + "x" + std::to_string(N) + " views");
    return {M - best->first + 1, N - best->second + 1};
}

RunConfig RunConfig::preset_config(const std::string& name)
{
    RunConfig c;
    c.preset = name;
    if (name == "paper")
        return c;
    if (name == "tiny") {
        c.task = {2, 25};
        c.height = c.width = 32;
        c.stages = 3;
        c.depth = 3;
        c.features = 16;
        c.train.steps = 2000;
        c.train.batch = 4;
        c.train.patch = 16;
        c.train.lr = 2e-3;
        c.train.lr_reduced = 2e-4;
        c.train.eval_every = 50;
        c.train_scenes = 32;
        return c;
    }
    throw ValidationError("unknown preset '" + name + "' (expected paper or tiny)");
}

RunConfig RunConfig::from_json(const nlohmann::json& j)
{
    try {
        RunConfig c = preset_config(j.value("preset", std::string("paper")));
        if (j.contains("task"))
            c.task = TaskSpec::parse(j.at("task").get<std::string>());
        c.height = j.value("height", c.height);
        c.width = j.value("width", c.width);
        c.channels = j.value("channels", c.channels);
        if (j.contains("channel_mode")) {
            const auto mode = j.at("channel_mode").get<std::string>();
            if (mode != "single" && mode != "multiple")
                throw ValidationError("channel_mode must be single or multiple");
            c.per_channel = mode == "multiple";
        }
        c.stages = j.value("stages", c.stages);
        c.depth = j.value("depth", c.depth);
        c.features = j.value("features", c.features);
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
        c.seed = j.value("seed", c.seed);
        if (j.contains("train")) {
            nlohmann::json merged = c.train.to_json();
            merged.update(j.at("train"));
            c.train = TrainConfig::from_json(merged);
        }
        c.train_scenes = j.value("train_scenes", c.train_scenes);
        c.test_scenes = j.value("test_scenes", c.test_scenes);
        c.max_disparity = j.value("max_disparity", c.max_disparity);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad run config: ") + e.what());
    }
}

nlohmann::json RunConfig::to_json() const
{
    return {{"preset", preset},
            {"task", task.str()},
            {"height", height},
            {"width", width},
            {"channels", channels},
            {"channel_mode", per_channel ? "multiple" : "single"},
            {"stages", stages},
            {"depth", depth},
            {"features", features},
            {"noise_sigma", noise_sigma},
            {"seed", seed},
            {"train", train.to_json()},
            {"train_scenes", train_scenes},
            {"test_scenes", test_scenes},
            {"max_disparity", max_disparity},
            {"output_dir", output_dir}};
}

void RunConfig::validate() const
{
    if (stages < 1 || depth < 1 || features < 1)
        throw ValidationError("stages, depth and features must be at least 1");
    if (channels != 1 && channels != 3)
        throw ValidationError("channels must be 1 or 3");
    if (per_channel && channels != 3)
        throw ValidationError("channel_mode multiple needs 3 channels");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw ValidationError("noise_sigma must be finite and >= 0");
    const std::size_t s = task.side();
    (void)kernel_for(s, s, task.measurements);
    if (height < train.patch || width < train.patch)
        throw ValidationError("scene size is smaller than the training patch");
}

ModelConfig RunConfig::model_config() const
{
    validate();
    ModelConfig m;
    m.M = m.N = task.side();
    std::tie(m.ku, m.kv) = kernel_for(m.M, m.N, task.measurements);
    m.channels = channels;
    m.per_channel = per_channel;
    m.stages = stages;
    m.sas.depth = depth;
    m.sas.features = features;
    return m;
}

LfShape RunConfig::scene_shape() const
{
    return {task.side(), task.side(), height, width, channels};
}

std::uint64_t seed_from_env(std::uint64_t fallback)
{
    const char* env = std::getenv("LFCAP_SEED");
    if (!env || !*env)
        return fallback;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env, &used);
        if (used != std::char_traits<char>::length(env))
            throw std::invalid_argument("trailing text");
        return v;
    } catch (const std::logic_error&) {
        throw ValidationError(std::string("LFCAP_SEED is not an unsigned integer: ") + env);
    }
}

void apply_seed_env(RunConfig& cfg)
{
    cfg.seed = seed_from_env(cfg.seed);
    cfg.train.seed = cfg.seed;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::string& preset)
{
    RunConfig cfg;
    if (path) {
        std::ifstream in(*path);
        if (!in)
            throw IoError("cannot open config " + path->string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("config " + path->string() + " is not valid JSON: " + e.what());
        }
        if (!j.contains("preset"))
            j["preset"] = preset;
        cfg = RunConfig::from_json(j);
    } else {
        cfg = RunConfig::preset_config(preset);
    }
    cfg.train.seed = cfg.seed;
    apply_seed_env(cfg);
    return cfg;
}

} // namespace lfcap
