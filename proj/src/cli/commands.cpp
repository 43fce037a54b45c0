#include "lfcap/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "lfcap/config.hpp"
#include "lfcap/data.hpp"
#include "lfcap/experiment.hpp"
#include "lfcap/lf_io.hpp"
#include "lfcap/metrics.hpp"

namespace lfcap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

json read_json_file(const Path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + " is not valid JSON: " + e.what());
    }
}

void write_json_file(const Path& path, const json& j)
{
    std::ofstream out(path);
    if (!out || !(out << j.dump(2) << '\n'))
        throw IoError("cannot write " + path.string());
}

Path with_suffix(const Path& p, const std::string& suffix)
{
    // "dir/" names the directory itself
    Path out = p.has_filename() ? p : p.parent_path();
    out += suffix;
    return out;
}

void ensure_parent(const Path& p)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
}

std::vector<std::size_t> parse_dims(const std::string& text, std::size_t count, const char* what)
{
    std::vector<std::size_t> dims;
    std::size_t pos = 0;
    try {
        while (pos <= text.size()) {
            const auto x = text.find('x', pos);
            const std::string part = text.substr(pos, x == std::string::npos ? x : x - pos);
            std::size_t used = 0;
            dims.push_back(std::stoul(part, &used));
            if (used != part.size() || dims.back() == 0)
                throw std::invalid_argument("bad");
            if (x == std::string::npos)
                break;
            pos = x + 1;
        }
    } catch (const std::logic_error&) {
        dims.clear();
    }
    if (dims.size() != count)
        throw ValidationError(std::string("bad ") + what + " '" + text + "'");
    return dims;
}

json provenance(const char* command)
{
    return {{"command", command}, {"version", kVersion}};
}

struct LoadedModel {
    UnrolledModel<float> model;
    json meta;
    std::optional<diff::AdamState<float>> adam;
};

LoadedModel load_model(const Path& path)
{
    auto ck = diff::load_checkpoint<float>(path);
    json meta;
    try {
        meta = json::parse(ck.meta);
    } catch (const json::exception& e) {
        throw ValidationError("checkpoint metadata is not JSON: " + std::string(e.what()));
    }
    if (!meta.contains("model"))
        throw ValidationError("checkpoint " + path.string() + " has no model configuration");
    const ModelConfig mc = ModelConfig::from_json(meta.at("model"));
    return {UnrolledModel<float>(mc, std::move(ck.params)), meta, std::move(ck.adam)};
}

} // namespace

void write_sidecar(const Path& artifact, const json& provenance_json)
{
    write_json_file(with_suffix(artifact, ".json"), provenance_json);
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
        return 2;
    return 1;
}

void cmd_gen(const GenOptions& o)
{
    RunConfig cfg = load_run_config(o.config, o.preset);
    const std::uint64_t seed = o.seed ? *o.seed : cfg.seed;
    LfShape shape = cfg.scene_shape();
    if (o.shape) {
        const auto d = parse_dims(*o.shape, 4, "shape (expected MxNxHxW)");
        shape = {d[0], d[1], d[2], d[3], shape.C};
    }
    if (o.channels)
        shape.C = *o.channels;
    validate_shape(shape);
    if (o.count == 0)
        throw ValidationError("count must be positive");

    std::vector<SceneSpec> specs;
    if (o.scene) {
        specs.push_back(SceneSpec::from_json(read_json_file(*o.scene)));
    } else {
        for (std::size_t i = 0; i < o.count; ++i) {
            const std::uint64_t s = o.count == 1 ? seed : derive_seed(seed, i, 0);
            if (o.disparity) {
                SceneSpec spec;
                spec.shape = shape;
                LayerSpec layer;
                layer.texture.seed = s;
                layer.disparity = *o.disparity;
                spec.layers.push_back(layer);
                specs.push_back(spec);
            } else {
                specs.push_back(random_scene(shape, s, o.layers, o.max_disparity));
            }
        }
    }

    json scenes = json::array();
    if (specs.size() == 1) {
        ensure_parent(o.out);
        write_lf(render_synthetic(specs[0]), o.out);
        scenes.push_back(specs[0].to_json());
    } else {
        fs::create_directories(o.out);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "scene_%03zu.lf", i);
            write_lf(render_synthetic(specs[i]), o.out / name);
            scenes.push_back(specs[i].to_json());
        }
    }
    json p = provenance("gen");
    p["seed"] = seed;
    p["scenes"] = scenes;
    write_sidecar(o.out, p);
    std::cout << "wrote " << specs.size() << " light field(s) to " << o.out.string() << '\n';
}

void cmd_capture(const CaptureOptions& o)
{
    const int sources = int(o.code.has_value()) + int(o.checkpoint.has_value()) + int(o.random_code);
    if (sources != 1)
        throw ValidationError("give exactly one of --code, --checkpoint or --random-code");
    const LightField lf = read_lf(o.lf);
    const LfShape& s = lf.shape();
    const std::uint64_t seed = o.seed ? *o.seed : seed_from_env(0);

    ApertureCode code;
    if (o.code) {
        code = ApertureCode::from_json(read_json_file(*o.code));
    } else if (o.checkpoint) {
        code = load_model(*o.checkpoint).model.acquisition_code();
    } else {
        std::size_t ku = 0, kv = 0;
        if (o.kernel) {
            const auto d = parse_dims(*o.kernel, 2, "kernel (expected KUxKV)");
            ku = d[0];
            kv = d[1];
        } else if (o.measurements) {
            std::tie(ku, kv) = kernel_for(s.M, s.N, *o.measurements);
        } else {
            throw ValidationError("--random-code needs --kernel or --measurements");
        }
        code = ApertureCode::random(ku, kv, seed);
    }
    code.check_fits(s);

    MeasurementSet meas = forward_project(lf, code);
    if (o.noise != 0.0)
        meas = add_measurement_noise(meas, o.noise, derive_seed(seed, 0, 7));
    ensure_parent(o.out);
    write_measurements(meas, o.out);
    write_json_file(with_suffix(o.out, ".code.json"), code.to_json());

    json p = provenance("capture");
    p["input"] = o.lf.string();
    p["seed"] = seed;
    p["code"] = code.to_json();
    p["measurements"] = meas.k;
    p["noise_sigma"] = meas.noise_sigma ? json(*meas.noise_sigma) : json();
    write_sidecar(o.out, p);
    std::cout << "captured " << meas.k << " measurement(s) of " << to_string(s) << '\n';
}

void cmd_train(const TrainOptions& o)
{
    RunConfig cfg = load_run_config(o.config, o.preset);
    std::optional<LoadedModel> resumed;
    if (o.resume) {
        resumed.emplace(load_model(*o.resume));
        if (!resumed->adam || !resumed->meta.contains("trainer") || !resumed->meta.contains("run"))
            throw ValidationError("checkpoint " + o.resume->string() + " cannot be resumed");
        cfg = RunConfig::from_json(resumed->meta.at("run"));
    }
    if (o.steps)
        cfg.train.steps = *o.steps;

    std::vector<LightField> data;
    json names = json::array();
    if (fs::is_directory(o.dataset) && !fs::exists(o.dataset / "manifest.json")) {
        for (auto& entry : ingest_dataset(o.dataset)) {
            names.push_back(entry.name);
            data.push_back(std::move(entry.lf));
        }
    } else {
        data.push_back(read_lf(o.dataset));
        names.push_back(o.dataset.filename().string());
    }
    if (data.empty())
        throw ValidationError("dataset " + o.dataset.string() + " is empty");

    const ModelConfig mc = resumed ? resumed->model.config() : cfg.model_config();
    const LfShape s = data[0].shape();
    if (s.M != mc.M || s.N != mc.N || s.C != mc.channels)
        throw ValidationError("dataset " + to_string(s) + " does not match task " + cfg.task.str() +
                              " with " + std::to_string(mc.channels) + " channel(s)");

    UnrolledModel<float> model = resumed ? std::move(resumed->model) : UnrolledModel<float>(mc, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.noise_sigma = cfg.noise_sigma;
    Trainer trainer(model, tc, std::move(data));
    if (resumed)
        trainer.restore(*resumed->adam, resumed->meta.at("trainer"));

    auto save = [&](const Path& path) {
        json meta = {{"model", mc.to_json()}, {"run", cfg.to_json()}, {"trainer", trainer.state_json()}};
        ensure_parent(path);
        diff::save_checkpoint(path, model.params(), &trainer.adam(), meta.dump());
    };

    const Path log_path = o.log ? *o.log : with_suffix(o.out, ".loss.csv");
    const bool append = resumed && fs::exists(log_path);
    ensure_parent(log_path);
    std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log)
        throw IoError("cannot write " + log_path.string());
    if (!append)
        log << "step,loss,lr\n";
    log << std::setprecision(9);

    while (trainer.steps_done() < tc.steps) {
        const std::size_t step = trainer.steps_done();
        const double lr = trainer.lr();
        const double loss = trainer.step();
        log << step << ',' << loss << ',' << lr << '\n';
        if (!o.quiet && (step % 50 == 0 || step + 1 == tc.steps))
            std::cout << "step " << step << " loss " << loss << " lr " << lr << std::endl;
        if (o.save_every && trainer.steps_done() % o.save_every == 0)
            save(o.out);
    }
    if (!log.flush())
        throw IoError("failed writing " + log_path.string());
    save(o.out);

    json p = provenance("train");
    p["run"] = cfg.to_json();
    p["model"] = mc.to_json();
    p["dataset"] = names;
    p["steps"] = trainer.steps_done();
    p["resumed_from"] = o.resume ? json(o.resume->string()) : json();
    p["parameters"] = model.params().parameter_count();
    write_sidecar(o.out, p);
    std::cout << "saved " << o.out.string() << " after " << trainer.steps_done() << " steps\n";
}

void cmd_reconstruct(const ReconstructOptions& o)
{
    const MeasurementSet meas = read_measurements(o.measurements);
    const LoadedModel loaded = load_model(o.checkpoint);
    const LightField rec = unrolled_reconstruct(meas, loaded.model);
    ensure_parent(o.out);
    write_lf(rec, o.out);
    json p = provenance("reconstruct");
    p["measurements"] = o.measurements.string();
    p["checkpoint"] = o.checkpoint.string();
    p["model"] = loaded.model.config().to_json();
    p["shape"] = to_string(rec.shape());
    write_sidecar(o.out, p);
    std::cout << "reconstructed " << to_string(rec.shape()) << '\n';
}

void cmd_eval(const EvalOptions& o)
{
    const LightField recon = read_lf(o.recon);
    const LightField gt = read_lf(o.gt);
    const double p = psnr(recon, gt);
    const double s = lf_ssim(recon, gt);
    const double e = epi_ssim(recon, gt);
    auto fmt = [](double v) {
        std::ostringstream os;
        os << std::setprecision(10);
        if (std::isfinite(v))
            os << v;
        else
            os << "inf";
        return os.str();
    };
    const std::string name = o.name.empty() ? o.recon.filename().string() : o.name;

    const bool fresh = !fs::exists(o.out) || fs::file_size(o.out) == 0;
    ensure_parent(o.out);
    std::ofstream out(o.out, std::ios::app);
    if (!out)
        throw IoError("cannot write " + o.out.string());
    if (fresh)
        out << "name,task,psnr,ssim,epi_ssim\n";
    out << name << ',' << o.task << ',' << fmt(p) << ',' << fmt(s) << ',' << fmt(e) << '\n';
    if (!out.flush())
        throw IoError("failed writing " + o.out.string());

    const ViewPsnrMap map = per_view_psnr(recon, gt);
    if (o.maps) {
        fs::create_directories(*o.maps);
        write_psnr_map_csv(map, *o.maps / "per_view_psnr.csv");
        double lo = kPsnrExact, hi = -kPsnrExact;
        for (double v : map.values)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        } else if (hi <= lo) {
            hi = lo + 1.0;
        }
        write_false_color_png({map.M, map.N, map.values}, lo, hi, *o.maps / "per_view_psnr.png");
        const LfShape& sh = gt.shape();
        const Image2D diff = luma_difference(recon, gt, sh.M / 2, sh.N / 2);
        double peak = 0.0;
        for (double v : diff.values)
            peak = std::max(peak, v);
        write_false_color_png(diff, 0.0, peak > 0.0 ? peak : 1.0, *o.maps / "center_error.png");
    }

    json side = provenance("eval");
    side["recon"] = o.recon.string();
    side["gt"] = o.gt.string();
    side["name"] = name;
    side["task"] = o.task;
    side["psnr"] = std::isfinite(p) ? json(p) : json("inf");
    side["ssim"] = s;
    side["epi_ssim"] = e;
    side["per_view_psnr_mean"] = std::isfinite(map.mean()) ? json(map.mean()) : json("inf");
    write_sidecar(o.out, side);
    std::cout << "psnr " << fmt(p) << " ssim " << fmt(s) << " epi_ssim " << fmt(e) << '\n';
}

void cmd_ablate(const AblateOptions& o)
{
    RunConfig base = load_run_config(o.config, o.preset);
    if (o.steps)
        base.train.steps = *o.steps;
    const Benchmark bench = make_benchmark(base);

    struct Sweep {
        std::string name;
        std::vector<double> values;
    };
    std::vector<Sweep> sweeps;
    auto pick = [&](const std::string& name, std::vector<double> defaults) {
        if (o.sweep == "all" || o.sweep == name)
            sweeps.push_back({name, o.values.empty() || o.sweep == "all" ? defaults : o.values});
    };
    pick("T", {1, 3, 6});
    pick("D", {3, 6, 9});
    pick("sigma", {0, 3, 6, 30});
    if (sweeps.empty())
        throw ValidationError("sweep must be T, D, sigma or all");

    fs::create_directories(o.out);
    for (const auto& sweep : sweeps) {
        const Path csv_path = o.out / ("ablation_" + sweep.name + ".csv");
        std::ofstream csv(csv_path);
        if (!csv)
            throw IoError("cannot write " + csv_path.string());
        csv << sweep.name << ",psnr,ssim,epi_ssim,final_loss,seconds\n" << std::setprecision(10);
        json plot = {{"sweep", sweep.name}, {"x", json::array()}, {"psnr", json::array()},
                     {"ssim", json::array()}, {"epi_ssim", json::array()}};
        for (double value : sweep.values) {
            RunConfig cfg = base;
            if (sweep.name == "T") {
                if (value < 1 || value != std::floor(value))
                    throw ValidationError("stage counts must be positive integers");
                cfg.stages = static_cast<std::size_t>(value);
            } else if (sweep.name == "D") {
                if (value < 1 || value != std::floor(value))
                    throw ValidationError("depths must be positive integers");
                cfg.depth = static_cast<std::size_t>(value);
            } else {
                cfg.noise_sigma = value;
            }
            cfg.validate();
            const ExperimentResult r = run_experiment(cfg, bench);
            csv << value << ',' << r.test.psnr << ',' << r.test.ssim << ',' << r.test.epi_ssim << ','
                << (r.losses.empty() ? 0.0 : r.losses.back()) << ',' << r.seconds << '\n';
            plot["x"].push_back(value);
            plot["psnr"].push_back(r.test.psnr);
            plot["ssim"].push_back(r.test.ssim);
            plot["epi_ssim"].push_back(r.test.epi_ssim);
            if (!o.quiet)
                std::cout << sweep.name << '=' << value << " psnr " << r.test.psnr << " ssim "
                          << r.test.ssim << " (" << r.seconds << " s)" << std::endl;
        }
        if (!csv.flush())
            throw IoError("failed writing " + csv_path.string());
        plot["config"] = base.to_json();
        const Path json_path = o.out / ("ablation_" + sweep.name + ".json");
        write_json_file(json_path, plot);
        json p = provenance("ablate");
        p["sweep"] = sweep.name;
        p["values"] = sweep.values;
        p["config"] = base.to_json();
        write_sidecar(csv_path, p);
    }
}

} // namespace lfcap::cli
