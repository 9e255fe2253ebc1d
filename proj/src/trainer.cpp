#include "patchsurf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace patchsurf::trainer {

void TrainConfig::validate() const {
    if (patches < 1) throw std::invalid_argument("config: need at least one patch");
    if (points_per_patch < 1) throw std::invalid_argument("config: need at least one point per patch");
    if (steps < 1) throw std::invalid_argument("config: need at least one step");
    if (!(lr > 0.0)) throw std::invalid_argument("config: learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw std::invalid_argument("config: Adam betas must lie in [0, 1)");
    }
    if (latent_dim < 0 || hidden_layers < 1 || width < 1) {
        throw std::invalid_argument("config: bad decoder architecture");
    }
    if (convergence_window < 1) throw std::invalid_argument("config: bad convergence window");
    weights.validate();
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto& p : patches) n += p.weights.size();
    for (const auto& c : codewords) n += c.values.size();
    return n;
}

std::vector<double> Model::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& p : patches) flat.insert(flat.end(), p.weights.begin(), p.weights.end());
    for (const auto& c : codewords) flat.insert(flat.end(), c.values.begin(), c.values.end());
    return flat;
}

void Model::unflatten(std::span<const double> flat) {
    std::size_t off = 0;
    for (auto& p : patches) {
        std::copy(flat.begin() + off, flat.begin() + off + p.weights.size(), p.weights.begin());
        off += p.weights.size();
    }
    for (auto& c : codewords) {
        std::copy(flat.begin() + off, flat.begin() + off + c.values.size(), c.values.begin());
        off += c.values.size();
    }
}

Model init_model(const TrainConfig& cfg, int shape_count) {
    cfg.validate();
    if (shape_count < 1) throw std::invalid_argument("init_model: need at least one shape");
    Model model;
    model.patches.reserve(cfg.patches);
    for (int k = 0; k < cfg.patches; ++k) {
        auto dec = surface::init_decoder(mix_seed(cfg.seed, k), cfg.latent_dim,
                                         cfg.hidden_layers, cfg.width);
        dec.patch_index = k;
        model.patches.push_back(std::move(dec));
    }
    Rng rng(mix_seed(cfg.seed, 0x636f6465));  // codeword stream
    model.codewords.resize(shape_count);
    for (auto& c : model.codewords) {
        c.values.resize(cfg.latent_dim);
        for (auto& v : c.values) v = 0.1 * rng.normal();
    }
    return model;
}

void adam_update(std::span<double> params, std::span<const double> grad,
                 OptimizerState& state, const TrainConfig& cfg) {
    if (params.size() != grad.size()) throw std::invalid_argument("adam: size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam: moment size mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        params[i] -= cfg.lr * (state.m[i] / bc1) / (std::sqrt(state.v[i] / bc2) + cfg.eps);
    }
}

double clip_gradient(std::span<double> grad, double max_norm) {
    double sq = 0.0;
    for (const double g : grad) sq += g * g;
    const double n = std::sqrt(sq);
    if (n > max_norm && n > 0.0) {
        const double s = max_norm / n;
        for (double& g : grad) g *= s;
    }
    return n;
}

namespace {

std::string format_diagnostics(std::uint64_t step, const losses::LossReport& r, int patch) {
    std::ostringstream os;
    os << "step " << step << "\n"
       << "chd " << r.chd << "\n"
       << "l_E " << r.l_E << "\nl_G " << r.l_G << "\nl_sk " << r.l_sk << "\nl_str " << r.l_str << "\n"
       << "l_def " << r.l_def << "\nl_ol " << r.l_ol << "\ntotal " << r.total << "\n"
       << "offending_patch " << patch << "\n";
    return os.str();
}

bool report_finite(const losses::LossReport& r) {
    return std::isfinite(r.chd) && std::isfinite(r.l_def) && std::isfinite(r.l_ol) &&
           std::isfinite(r.total);
}

void accumulate(losses::LossReport& acc, const losses::LossReport& r) {
    acc.chd += r.chd;
    acc.l_E += r.l_E;
    acc.l_G += r.l_G;
    acc.l_sk += r.l_sk;
    acc.l_str += r.l_str;
    acc.l_def += r.l_def;
    acc.l_ol += r.l_ol;
    acc.total += r.total;
}

void scale_report(losses::LossReport& r, double s) {
    r.chd *= s;
    r.l_E *= s;
    r.l_G *= s;
    r.l_sk *= s;
    r.l_str *= s;
    r.l_def *= s;
    r.l_ol *= s;
    r.total *= s;
}

}  // namespace

losses::LossReport train_step(Model& model, std::span<const ShapeSample> batch,
                              const TrainConfig& cfg, OptimizerState& state) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const int K = static_cast<int>(model.patches.size());
    const int M = cfg.points_per_patch;
    const std::size_t weight_count = model.patches.empty() ? 0 : model.patches[0].weights.size();

    std::vector<double> flat = model.flatten();
    std::vector<double> grad_total(flat.size(), 0.0);
    std::vector<double> grad;
    losses::LossReport mean_report{};

    // UV draws depend on (seed, step) only, not on optimizer history, so a
    // resumed run replays the exact same samples.
    Rng uv_rng(mix_seed(cfg.seed, 0x75760000ULL + state.step));

    jets::Tape tape(flat);
    for (const ShapeSample& sample : batch) {
        tape.clear();
        const std::uint32_t code_off = static_cast<std::uint32_t>(
            K * weight_count + sample.codeword_index * cfg.latent_dim);
        std::vector<jets::VarId> latent_vars;
        latent_vars.reserve(cfg.latent_dim);
        for (int i = 0; i < cfg.latent_dim; ++i) {
            latent_vars.push_back(tape.param(code_off + i));
        }

        std::vector<std::vector<surface::TracedPoint>> per_patch(K);
        for (int k = 0; k < K; ++k) {
            per_patch[k].reserve(M);
            const std::uint32_t w_off = static_cast<std::uint32_t>(k * weight_count);
            for (int i = 0; i < M; ++i) {
                const surface::UvPoint r{uv_rng.uniform(), uv_rng.uniform()};
                per_patch[k].push_back(
                    surface::decode_traced(tape, model.patches[k].shape, w_off, latent_vars, r));
            }
        }

        losses::TracedLoss traced;
        try {
            traced = losses::assemble_traced(tape, per_patch, *sample.index, cfg.weights,
                                             sample.gt_area, cfg.grad_through_area_norm);
        } catch (const losses::DegeneratePatchError& e) {
            throw TrainAbort("patch collapsed during training",
                             format_diagnostics(state.step, losses::LossReport{}, e.patch_index()));
        }
        if (!report_finite(traced.report)) {
            int patch = -1;
            for (std::size_t k = 0; k < traced.patch_areas.size(); ++k) {
                if (!std::isfinite(traced.patch_areas[k])) patch = static_cast<int>(k);
            }
            throw TrainAbort("non-finite loss",
                             format_diagnostics(state.step, traced.report, patch));
        }
        tape.backward(traced.total, grad);
        for (std::size_t i = 0; i < grad.size(); ++i) grad_total[i] += grad[i];
        accumulate(mean_report, traced.report);
    }

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad_total) g *= inv_b;
    scale_report(mean_report, inv_b);
    for (const double g : grad_total) {
        if (!std::isfinite(g)) {
            throw TrainAbort("non-finite gradient", format_diagnostics(state.step, mean_report, -1));
        }
    }

    if (cfg.clip_norm > 0.0) clip_gradient(grad_total, cfg.clip_norm);
    adam_update(flat, grad_total, state, cfg);
    model.unflatten(flat);
    return mean_report;
}

FitResult fit(const data::PointCloud& target, double gt_area, const TrainConfig& cfg) {
    cfg.validate();
    if (target.size() == 0) throw std::invalid_argument("fit: empty target cloud");
    if (cfg.weights.overlap_active() && !(gt_area > 0.0)) {
        throw std::invalid_argument("fit: overlap term requires a positive target area");
    }

    FitResult res;
    res.model = init_model(cfg, 1);
    const neighbors::KdIndex gt_index(target.points);
    const ShapeSample sample{&target, &gt_index, gt_area, 0};
    OptimizerState state;

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path, std::ios::app);
        if (!log) throw std::runtime_error("cannot open log for writing: " + cfg.log_path);
        log << "step\tchd\tl_E\tl_G\tl_sk\tl_str\tl_def\tl_ol\ttotal\twall_ms\n";
    }

    res.history.reserve(cfg.steps);
    const int w = cfg.convergence_window;
    bool stalled = false;
    for (int step = 0; step < cfg.steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto report = train_step(res.model, std::span(&sample, 1), cfg, state);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back(report);
        if (log) {
            log << step << '\t' << report.chd << '\t' << report.l_E << '\t' << report.l_G << '\t'
                << report.l_sk << '\t' << report.l_str << '\t' << report.l_def << '\t'
                << report.l_ol << '\t' << report.total << '\t' << wall_ms << '\n';
        }
        res.steps_run = step + 1;

        if (res.steps_run >= 2 * w && res.steps_run % w == 0) {
            double prev = 0.0, cur = 0.0;
            for (int i = res.steps_run - 2 * w; i < res.steps_run - w; ++i) prev += res.history[i].total;
            for (int i = res.steps_run - w; i < res.steps_run; ++i) cur += res.history[i].total;
            prev /= w;
            cur /= w;
            if (prev - cur < cfg.convergence_rel_improvement * prev) {
                // two consecutive stalled windows, so a transient plateau
                // while the loss terms rebalance does not end the run
                if (stalled) {
                    res.converged = true;
                    break;
                }
                stalled = true;
            } else {
                stalled = false;
            }
        }
    }

    metrics::EvalConfig ec;
    ec.grid_resolution = cfg.eval_resolution;
    ec.olap_thresholds = cfg.olap_thresholds;
    res.final_metrics = metrics::evaluate(res.model.patches, res.model.codewords[0], target, ec);

    if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, res.model, &state);
    return res;
}

// --- checkpoint io -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'P', 'S', 'R', 'F'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated checkpoint: " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated checkpoint: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in, const std::string& path) {
    const std::uint64_t bits = read_u64(in, path);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const OptimizerState* opt) {
    if (model.patches.empty() || model.codewords.empty()) {
        throw std::invalid_argument("save_checkpoint: empty model");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const auto& shape = model.patches[0].shape;
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(model.patches.size()));
    write_u32(out, static_cast<std::uint32_t>(shape.latent_dim));
    write_u32(out, static_cast<std::uint32_t>(shape.hidden_layers));
    write_u32(out, static_cast<std::uint32_t>(shape.width));
    write_u32(out, static_cast<std::uint32_t>(model.codewords.size()));
    write_u32(out, opt ? 1u : 0u);
    for (const auto& p : model.patches) {
        for (const double v : p.weights) write_f64(out, v);
    }
    for (const auto& c : model.codewords) {
        for (const double v : c.values) write_f64(out, v);
    }
    if (opt) {
        write_u64(out, opt->step);
        for (const double v : opt->m) write_f64(out, v);
        for (const double v : opt->v) write_f64(out, v);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    }
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 ": " + path);
    }
    const std::uint32_t K = read_u32(in, path);
    const std::uint32_t D = read_u32(in, path);
    const std::uint32_t H = read_u32(in, path);
    const std::uint32_t W = read_u32(in, path);
    const std::uint32_t S = read_u32(in, path);
    const std::uint32_t has_opt = read_u32(in, path);
    if (K == 0 || S == 0 || H == 0 || W == 0 || K > 4096 || S > 1u << 20) {
        throw std::runtime_error("corrupt checkpoint header: " + path);
    }

    Checkpoint ckpt;
    const surface::MlpShape shape{static_cast<int>(D), static_cast<int>(H), static_cast<int>(W)};
    ckpt.model.patches.resize(K);
    for (std::uint32_t k = 0; k < K; ++k) {
        auto& p = ckpt.model.patches[k];
        p.shape = shape;
        p.patch_index = static_cast<int>(k);
        p.weights.resize(shape.weight_count());
        for (auto& v : p.weights) v = read_f64(in, path);
    }
    ckpt.model.codewords.resize(S);
    for (auto& c : ckpt.model.codewords) {
        c.values.resize(D);
        for (auto& v : c.values) v = read_f64(in, path);
    }
    if (has_opt) {
        OptimizerState st;
        st.step = read_u64(in, path);
        const std::size_t n = ckpt.model.param_count();
        st.m.resize(n);
        st.v.resize(n);
        for (auto& v : st.m) v = read_f64(in, path);
        for (auto& v : st.v) v = read_f64(in, path);
        ckpt.opt = std::move(st);
    }
    return ckpt;
}

void verify_checkpoint_config(const Checkpoint& ckpt, const TrainConfig& cfg) {
    const auto& shape = ckpt.model.patches.at(0).shape;
    if (static_cast<int>(ckpt.model.patches.size()) != cfg.patches ||
        shape.latent_dim != cfg.latent_dim || shape.hidden_layers != cfg.hidden_layers ||
        shape.width != cfg.width) {
        throw std::runtime_error("checkpoint configuration (K, D, H, W) does not match the trainer config");
    }
}

}  // namespace patchsurf::trainer
