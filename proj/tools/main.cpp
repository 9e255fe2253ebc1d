// patchsurf CLI: dataset generation, training, evaluation and export for the
// multi-patch surface library. Exit codes: 0 ok, 2 usage/input error,
// 3 numerical failure during training.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "patchsurf/data.hpp"
#include "patchsurf/metrics.hpp"
#include "patchsurf/surface.hpp"
#include "patchsurf/trainer.hpp"

namespace fs = std::filesystem;
using namespace patchsurf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct GenArgs {
    std::string kind = "wavy-cloth";
    int n = 8000;
    double noise = 0.0;
    std::uint64_t seed = 0;
    double amplitude = 0.1;
    double frequency = 1.0;
    std::string out_dir = ".";
};

int run_gen(const GenArgs& a) {
    data::SyntheticSurfaceSpec spec;
    spec.kind = data::surface_kind_from_string(a.kind);
    spec.count = a.n;
    spec.noise_sigma = a.noise;
    spec.seed = a.seed;
    spec.amplitude = a.amplitude;
    spec.frequency = a.frequency;

    const auto ds = data::generate(spec);
    fs::create_directories(a.out_dir);
    const std::string cloud_path = (fs::path(a.out_dir) / "cloud.ply").string();
    const std::string area_path = (fs::path(a.out_dir) / "area.txt").string();
    data::PlyExtras extras;
    extras["c_mean"] = ds.gt_c_mean;
    extras["c_gauss"] = ds.gt_c_gauss;
    data::save_ply(cloud_path, ds.cloud, extras);
    data::save_area_sidecar(area_path, ds.gt_area);

    std::cout << "generated " << ds.cloud.size() << " points (" << a.kind << ", noise "
              << a.noise << ", seed " << a.seed << ")\n"
              << "surface area " << ds.gt_area << "\n"
              << "wrote " << cloud_path << "\n"
              << "wrote " << area_path << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string data_dir;
    std::string cloud_file;
    double gt_area = 0.0;
    std::string out_dir = ".";
    std::string preset;
    trainer::TrainConfig cfg;
    // raw weight flags; only applied when the user passed them
    double alpha_def = 0.0, alpha_ol = 0.0, alpha_E = 1.0, alpha_G = 1.0, alpha_sk = 1.0,
           alpha_str = 1.0;
};

void apply_preset(const std::string& name, losses::LossWeights& w) {
    // "ours" and "basic" are the two headline configurations; the ablation
    // presets toggle the four deformation components.
    if (name == "ours") {
        w = {1e-3, 1e2, 1, 1, 1, 1};
    } else if (name == "basic") {
        w = {0, 0, 1, 1, 1, 1};
    } else if (name == "ablation:free") {
        w = {1e-3, 1e2, 0, 0, 0, 0};
    } else if (name == "ablation:no-collapse") {
        w = {1e-3, 1e2, 1, 1, 0, 0};
    } else if (name == "ablation:no-skew") {
        w = {1e-3, 1e2, 1, 1, 1, 0};
    } else if (name == "ablation:no-stretch") {
        w = {1e-3, 1e2, 1, 1, 0, 1};
    } else if (name == "ablation:full") {
        w = {1e-3, 1e2, 1, 1, 1, 1};
    } else {
        throw CLI::ValidationError("--preset", "unknown preset '" + name + "'");
    }
}

struct LoadedTarget {
    data::PointCloud cloud;
    double area = 0.0;
};

LoadedTarget load_target(const std::string& data_dir, const std::string& cloud_file,
                         double area_flag) {
    LoadedTarget t;
    std::string cloud_path;
    if (!data_dir.empty()) {
        cloud_path = (fs::path(data_dir) / "cloud.ply").string();
        const auto area_path = fs::path(data_dir) / "area.txt";
        if (fs::exists(area_path)) t.area = data::load_area_sidecar(area_path.string());
    } else {
        cloud_path = cloud_file;
    }
    if (cloud_path.empty()) {
        throw std::invalid_argument("no input: pass --data DIR or --cloud FILE");
    }
    if (cloud_path.size() > 4 && cloud_path.substr(cloud_path.size() - 4) == ".obj") {
        auto res = data::load_obj(cloud_path);
        if (res.skipped_directives > 0) {
            std::cerr << "note: skipped " << res.skipped_directives
                      << " non-point directives in " << cloud_path << "\n";
        }
        t.cloud = std::move(res.cloud);
    } else {
        t.cloud = data::load_ply(cloud_path);
    }
    if (area_flag > 0.0) t.area = area_flag;  // explicit flag wins over sidecar
    return t;
}

int run_train(TrainArgs& a, const CLI::App& cmd) {
    if (!a.preset.empty()) apply_preset(a.preset, a.cfg.weights);
    if (cmd.count("--alpha-def")) a.cfg.weights.alpha_def = a.alpha_def;
    if (cmd.count("--alpha-ol")) a.cfg.weights.alpha_ol = a.alpha_ol;
    if (cmd.count("--alpha-E")) a.cfg.weights.alpha_E = a.alpha_E;
    if (cmd.count("--alpha-G")) a.cfg.weights.alpha_G = a.alpha_G;
    if (cmd.count("--alpha-sk")) a.cfg.weights.alpha_sk = a.alpha_sk;
    if (cmd.count("--alpha-str")) a.cfg.weights.alpha_str = a.alpha_str;

    const LoadedTarget target = load_target(a.data_dir, a.cloud_file, a.gt_area);
    fs::create_directories(a.out_dir);
    a.cfg.checkpoint_path = (fs::path(a.out_dir) / "checkpoint.psrf").string();
    a.cfg.log_path = (fs::path(a.out_dir) / "train_log.tsv").string();

    try {
        const auto res = trainer::fit(target.cloud, target.area, a.cfg);
        std::cout << (res.converged ? "converged" : "step budget reached") << " after "
                  << res.steps_run << " steps\n";
        metrics::write_report_table(std::cout, res.final_metrics);
        const std::string metrics_path = (fs::path(a.out_dir) / "metrics.tsv").string();
        const std::string names[] = {"target"};
        metrics::write_report_tsv(metrics_path, names, std::span(&res.final_metrics, 1));
        std::cout << "wrote " << a.cfg.checkpoint_path << "\n"
                  << "wrote " << a.cfg.log_path << "\n"
                  << "wrote " << metrics_path << "\n";
    } catch (const trainer::TrainAbort& e) {
        const std::string dump_path = (fs::path(a.out_dir) / "abort_diagnostics.txt").string();
        std::ofstream dump(dump_path);
        dump << e.what() << "\n" << e.diagnostics();
        std::cerr << "training aborted: " << e.what() << "\ndiagnostics: " << dump_path << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data_dir;
    std::string cloud_file;
    double gt_area = 0.0;
    std::vector<double> olap_t{0.01, 0.05, 0.1};
    int eval_res = 64;
    std::string out_file;
    std::string distortion_dir;
};

void write_distortion_maps(const std::string& dir, const trainer::Model& model) {
    std::vector<const surface::SurfaceMapping*> mappings;
    std::vector<surface::DecoderMapping> holders;
    holders.reserve(model.patches.size());
    for (const auto& p : model.patches) holders.emplace_back(p);
    for (const auto& h : holders) mappings.push_back(&h);
    const auto dm = metrics::distortion_map(mappings, model.codewords[0], 32);
    fs::create_directories(dir);
    const char* names[] = {"E", "G", "sk", "str"};
    for (std::size_t k = 0; k < dm.patches.size(); ++k) {
        const std::vector<double>* grids[] = {&dm.patches[k].d_E, &dm.patches[k].d_G,
                                              &dm.patches[k].d_sk, &dm.patches[k].d_str};
        for (int q = 0; q < 4; ++q) {
            const std::string path =
                (fs::path(dir) / ("dmap_patch" + std::to_string(k) + "_" + names[q] + ".tsv")).string();
            std::ofstream out(path);
            for (int i = 0; i < dm.resolution; ++i) {
                for (int j = 0; j < dm.resolution; ++j) {
                    out << (*grids[q])[i * dm.resolution + j]
                        << (j + 1 == dm.resolution ? '\n' : '\t');
                }
            }
        }
    }
    std::cout << "wrote distortion maps to " << dir << "\n";
}

int run_eval(const EvalArgs& a) {
    const auto ckpt = trainer::load_checkpoint(a.checkpoint);
    const LoadedTarget target = load_target(a.data_dir, a.cloud_file, a.gt_area);

    metrics::EvalConfig ec;
    ec.grid_resolution = a.eval_res;
    ec.olap_thresholds = a.olap_t;
    const auto report =
        metrics::evaluate(ckpt.model.patches, ckpt.model.codewords[0], target.cloud, ec);
    metrics::write_report_table(std::cout, report);
    if (!a.out_file.empty()) {
        const std::string names[] = {"target"};
        metrics::write_report_tsv(a.out_file, names, std::span(&report, 1));
        // per-patch areas next to the metrics file
        const std::string areas_path = a.out_file + ".areas.txt";
        std::ofstream areas(areas_path);
        for (std::size_t k = 0; k < report.patch_areas.size(); ++k) {
            areas << k << '\t' << report.patch_areas[k] << '\n';
        }
        std::cout << "wrote " << a.out_file << "\nwrote " << areas_path << "\n";
    }
    if (!a.distortion_dir.empty()) write_distortion_maps(a.distortion_dir, ckpt.model);
    return kExitOk;
}

struct ExportArgs {
    std::string checkpoint;
    int res = 64;
    std::string out = "surface.ply";
    bool curvature = false;
};

int run_export(const ExportArgs& a) {
    if (a.res < 2) throw std::invalid_argument("export: resolution must be >= 2");
    const auto ckpt = trainer::load_checkpoint(a.checkpoint);
    const auto& model = ckpt.model;

    // Left-aligned lattice {i/res} so a coarse export is a subset of any
    // export whose resolution is a multiple of it.
    data::PointCloud cloud;
    std::vector<double> c_mean, c_gauss, degenerate;
    const std::size_t total = model.patches.size() * a.res * a.res;
    cloud.points.reserve(total);
    cloud.normals.reserve(total);
    cloud.patch_ids.reserve(total);
    int degenerate_count = 0;
    for (std::size_t k = 0; k < model.patches.size(); ++k) {
        for (int i = 0; i < a.res; ++i) {
            for (int j = 0; j < a.res; ++j) {
                const surface::UvPoint r{static_cast<double>(i) / a.res,
                                         static_cast<double>(j) / a.res};
                const auto sp =
                    geometry::surface_point(surface::decode(model.patches[k], model.codewords[0], r));
                cloud.points.push_back(sp.position);
                cloud.normals.push_back(sp.degenerate ? Vec3{0, 0, 0} : sp.normal);
                cloud.patch_ids.push_back(static_cast<int>(k));
                degenerate.push_back(sp.degenerate ? 1.0 : 0.0);
                if (sp.degenerate) ++degenerate_count;
                if (a.curvature) {
                    c_mean.push_back(sp.degenerate ? 0.0 : sp.c_mean);
                    c_gauss.push_back(sp.degenerate ? 0.0 : sp.c_gauss);
                }
            }
        }
    }
    data::PlyExtras extras;
    extras["degenerate"] = degenerate;
    if (a.curvature) {
        extras["c_mean"] = c_mean;
        extras["c_gauss"] = c_gauss;
    }
    data::save_ply(a.out, cloud, extras);
    std::cout << "exported " << cloud.size() << " points (" << model.patches.size()
              << " patches at " << a.res << "x" << a.res << ", " << degenerate_count
              << " degenerate) to " << a.out << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable multi-patch surface fitting for point clouds"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen", "Generate a synthetic target cloud with exact normals");
    cmd_gen->add_option("--kind", gen.kind, "plane | sphere-cap | cylinder | wavy-cloth")
        ->default_val(gen.kind);
    cmd_gen->add_option("--n", gen.n, "number of points")->default_val(gen.n);
    cmd_gen->add_option("--noise", gen.noise, "Gaussian position noise sigma")->default_val(gen.noise);
    cmd_gen->add_option("--seed", gen.seed, "sampling seed")->default_val(gen.seed);
    cmd_gen->add_option("--amplitude", gen.amplitude, "wavy-cloth amplitude")->default_val(gen.amplitude);
    cmd_gen->add_option("--frequency", gen.frequency, "wavy-cloth frequency")->default_val(gen.frequency);
    cmd_gen->add_option("--out", gen.out_dir, "output directory")->default_val(gen.out_dir);

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "Fit patch decoders to a target cloud");
    cmd_train->set_config("--config", "", "flat key=value config file");
    cmd_train->add_option("--data", train.data_dir, "dataset directory from 'gen'");
    cmd_train->add_option("--cloud", train.cloud_file, "target cloud file (.ply or .obj)");
    cmd_train->add_option("--gt-area", train.gt_area, "target surface area (overrides sidecar)");
    cmd_train->add_option("--out", train.out_dir, "output directory")->default_val(train.out_dir);
    cmd_train->add_option("--preset", train.preset,
                          "ours | basic | ablation:{free,no-collapse,no-skew,no-stretch,full}");
    cmd_train->add_option("--patches", train.cfg.patches)->default_val(train.cfg.patches);
    cmd_train->add_option("--points", train.cfg.points_per_patch, "points per patch per step")
        ->default_val(train.cfg.points_per_patch);
    cmd_train->add_option("--steps", train.cfg.steps)->default_val(train.cfg.steps);
    cmd_train->add_option("--lr", train.cfg.lr)->default_val(train.cfg.lr);
    cmd_train->add_option("--seed", train.cfg.seed)->default_val(train.cfg.seed);
    cmd_train->add_option("--latent", train.cfg.latent_dim)->default_val(train.cfg.latent_dim);
    cmd_train->add_option("--hidden", train.cfg.hidden_layers)->default_val(train.cfg.hidden_layers);
    cmd_train->add_option("--width", train.cfg.width)->default_val(train.cfg.width);
    cmd_train->add_option("--eval-res", train.cfg.eval_resolution)->default_val(train.cfg.eval_resolution);
    cmd_train->add_option("--alpha-def", train.alpha_def, "deformation loss weight");
    cmd_train->add_option("--alpha-ol", train.alpha_ol, "overlap loss weight");
    cmd_train->add_option("--alpha-E", train.alpha_E);
    cmd_train->add_option("--alpha-G", train.alpha_G);
    cmd_train->add_option("--alpha-sk", train.alpha_sk);
    cmd_train->add_option("--alpha-str", train.alpha_str);
    cmd_train->add_flag("--grad-through-area-norm", train.cfg.grad_through_area_norm,
                        "let gradients flow through the conformal-term area normalizers");

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint against a target cloud");
    cmd_eval->add_option("--checkpoint", eval.checkpoint)->required();
    cmd_eval->add_option("--data", eval.data_dir, "dataset directory from 'gen'");
    cmd_eval->add_option("--cloud", eval.cloud_file, "target cloud file");
    cmd_eval->add_option("--gt-area", eval.gt_area);
    cmd_eval->add_option("--olap-t", eval.olap_t, "overlap thresholds")->delimiter(',');
    cmd_eval->add_option("--eval-res", eval.eval_res)->default_val(eval.eval_res);
    cmd_eval->add_option("--out", eval.out_file, "metrics TSV path");
    cmd_eval->add_option("--distortion-maps", eval.distortion_dir,
                         "directory for per-patch distortion grids");

    ExportArgs exp;
    auto* cmd_export = app.add_subcommand("export", "Decode a checkpoint onto a UV grid and write a PLY");
    cmd_export->add_option("--checkpoint", exp.checkpoint)->required();
    cmd_export->add_option("--res", exp.res, "grid resolution per patch side")->default_val(exp.res);
    cmd_export->add_option("--out", exp.out)->default_val(exp.out);
    cmd_export->add_flag("--curvature", exp.curvature, "include analytic curvature properties");

    try {
        app.parse(argc, argv);
        if (cmd_gen->parsed()) return run_gen(gen);
        if (cmd_train->parsed()) return run_train(train, *cmd_train);
        if (cmd_eval->parsed()) return run_eval(eval);
        if (cmd_export->parsed()) return run_export(exp);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const trainer::TrainAbort& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}
