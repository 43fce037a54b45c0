#include <iostream>

#include <CLI11.hpp>

#include "lfcap/commands.hpp"
#include "lfcap/error.hpp"

using namespace lfcap::cli;

int main(int argc, char** argv)
{
    CLI::App app{"Coded-aperture light-field capture and unrolled reconstruction"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* g = app.add_subcommand("gen", "Render synthetic layered light fields");
    g->add_option("-o,--out", gen.out, "Output .lf file, image-grid directory, or directory for --count > 1")->required();
    g->add_option("--preset", gen.preset, "paper or tiny")->check(CLI::IsMember({"paper", "tiny"}));
    g->add_option("--config", gen.config, "Run configuration JSON");
    g->add_option("--scene", gen.scene, "Scene specification JSON");
    g->add_option("--shape", gen.shape, "MxNxHxW");
    g->add_option("--channels", gen.channels, "1 or 3");
    g->add_option("--layers", gen.layers, "Foreground layers of random scenes");
    g->add_option("--disparity", gen.disparity, "Single planar layer with this disparity");
    g->add_option("--max-disparity", gen.max_disparity, "Largest layer disparity of random scenes");
    g->add_option("--count", gen.count, "Number of scenes");
    g->add_option("--seed", gen.seed, "Scene seed");

    CaptureOptions cap;
    auto* c = app.add_subcommand("capture", "Simulate coded-aperture measurements");
    c->add_option("--lf", cap.lf, "Input light field")->required();
    c->add_option("-o,--out", cap.out, "Output measurement file")->required();
    c->add_option("--code", cap.code, "Aperture code JSON");
    c->add_option("--checkpoint", cap.checkpoint, "Use a trained model's acquisition code");
    c->add_flag("--random-code", cap.random_code, "Draw a random code");
    c->add_option("--kernel", cap.kernel, "KUxKV of the random code");
    c->add_option("--measurements", cap.measurements, "Measurement count of the random code");
    c->add_option("--noise", cap.noise, "Gaussian noise sigma on the 8-bit scale");
    c->add_option("--seed", cap.seed, "Seed for code and noise");

    TrainOptions tr;
    auto* t = app.add_subcommand("train", "Train an unrolled reconstruction model");
    t->add_option("--dataset", tr.dataset, "Light-field file or dataset directory")->required();
    t->add_option("-o,--out", tr.out, "Output checkpoint")->required();
    t->add_option("--preset", tr.preset, "paper or tiny")->check(CLI::IsMember({"paper", "tiny"}));
    t->add_option("--config", tr.config, "Run configuration JSON");
    t->add_option("--steps", tr.steps, "Total optimizer steps");
    t->add_option("--resume", tr.resume, "Continue from a checkpoint");
    t->add_option("--log", tr.log, "Loss CSV (default <out>.loss.csv)");
    t->add_option("--save-every", tr.save_every, "Checkpoint interval in steps");
    t->add_flag("-q,--quiet", tr.quiet, "No progress output");

    ReconstructOptions rec;
    auto* r = app.add_subcommand("reconstruct", "Reconstruct a light field from measurements");
    r->add_option("--meas", rec.measurements, "Measurement file")->required();
    r->add_option("--checkpoint", rec.checkpoint, "Trained model")->required();
    r->add_option("-o,--out", rec.out, "Output light field")->required();

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Score a reconstruction against ground truth");
    e->add_option("--recon", ev.recon, "Reconstructed light field")->required();
    e->add_option("--gt", ev.gt, "Ground-truth light field")->required();
    e->add_option("-o,--out", ev.out, "CSV file; rows are appended")->required();
    e->add_option("--name", ev.name, "Row name (default: recon file name)");
    e->add_option("--task", ev.task, "Task label such as 2->25");
    e->add_option("--maps", ev.maps, "Directory for per-view PSNR grids and error images");

    AblateOptions ab;
    auto* a = app.add_subcommand("ablate", "Stage-count, depth and noise sweeps");
    a->add_option("-o,--out", ab.out, "Output directory")->required();
    a->add_option("--preset", ab.preset, "paper or tiny")->check(CLI::IsMember({"paper", "tiny"}));
    a->add_option("--config", ab.config, "Run configuration JSON");
    a->add_option("--sweep", ab.sweep, "T, D, sigma or all")->check(CLI::IsMember({"T", "D", "sigma", "all"}));
    a->add_option("--values", ab.values, "Sweep values (default T 1 3 6, D 3 6 9, sigma 0 3 6 30)");
    a->add_option("--steps", ab.steps, "Training steps per point");
    a->add_flag("-q,--quiet", ab.quiet, "No progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*g)
            cmd_gen(gen);
        else if (*c)
            cmd_capture(cap);
        else if (*t)
            cmd_train(tr);
        else if (*r)
            cmd_reconstruct(rec);
        else if (*e)
            cmd_eval(ev);
        else if (*a)
            cmd_ablate(ab);
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return exit_code_for(ex);
    }
}
