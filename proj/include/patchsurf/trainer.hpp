#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchsurf/data.hpp"
#include "patchsurf/losses.hpp"
#include "patchsurf/metrics.hpp"
#include "patchsurf/neighbors.hpp"
#include "patchsurf/surface.hpp"

namespace patchsurf::trainer {

struct TrainConfig {
    int patches = 4;           // K
    int points_per_patch = 128;  // M, resampled fresh every step
    int steps = 2000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    losses::LossWeights weights;
    std::uint64_t seed = 0;
    int latent_dim = 64;
    int hidden_layers = 3;
    int width = 128;
    double clip_norm = 10.0;  // global gradient norm; spikes happen early on
    bool grad_through_area_norm = false;

    // "until convergence": stop when the trailing-window mean of the total
    // loss improves by less than this fraction, checked once per window.
    int convergence_window = 200;
    double convergence_rel_improvement = 1e-3;

    int eval_resolution = 64;
    std::vector<double> olap_thresholds{0.01, 0.05, 0.1};
    std::string checkpoint_path;  // written at the end of fit() when set
    std::string log_path;         // per-step loss log (TSV) when set

    surface::MlpShape mlp_shape() const { return {latent_dim, hidden_layers, width}; }
    void validate() const;
};

/// Patch decoders plus free per-shape latent codes, optimized jointly
/// (no encoder anywhere).
struct Model {
    std::vector<surface::PatchDecoder> patches;
    std::vector<surface::Codeword> codewords;

    std::size_t param_count() const;
    /// Flat order: patch 0 weights, patch 1 weights, ..., then codewords.
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);
};

/// Decoders seeded per patch from cfg.seed; `shape_count` codewords drawn
/// from N(0, 0.01).
Model init_model(const TrainConfig& cfg, int shape_count = 1);

struct OptimizerState {
    std::vector<double> m, v;  // Adam moments, flat-parameter order
    std::uint64_t step = 0;
};

/// Bias-corrected Adam on the flat parameter vector. Moments are allocated on
/// first use and must match the parameter count afterwards.
void adam_update(std::span<double> params, std::span<const double> grad,
                 OptimizerState& state, const TrainConfig& cfg);

/// Scales `grad` in place to the given L2 norm when it exceeds it; returns the
/// pre-clip norm.
double clip_gradient(std::span<double> grad, double max_norm);

/// Non-finite loss or a collapsed patch mid-training. `diagnostics` is a
/// printable dump of the step, per-term values and the offending patch.
class TrainAbort : public std::runtime_error {
public:
    TrainAbort(std::string message, std::string diagnostics)
        : std::runtime_error(std::move(message)), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const { return diagnostics_; }

private:
    std::string diagnostics_;
};

struct ShapeSample {
    const data::PointCloud* cloud = nullptr;
    const neighbors::KdIndex* index = nullptr;  // over cloud->points
    double gt_area = 0.0;                       // needed when the overlap term is on
    int codeword_index = 0;
};

/// One forward/backward/update over the batch. UV samples are drawn fresh,
/// derived from (cfg.seed, state.step) only, so a reloaded checkpoint
/// continues bit-identically. Gradients are reduced over the batch in order.
losses::LossReport train_step(Model& model, std::span<const ShapeSample> batch,
                              const TrainConfig& cfg, OptimizerState& state);

struct FitResult {
    Model model;
    std::vector<losses::LossReport> history;
    metrics::MetricsReport final_metrics;
    int steps_run = 0;
    bool converged = false;
};

/// Auto-decoder fit of one target cloud.
FitResult fit(const data::PointCloud& target, double gt_area, const TrainConfig& cfg);

struct Checkpoint {
    Model model;
    std::optional<OptimizerState> opt;
};

/// Versioned little-endian binary: header (magic, version, K, D, H, W, shape
/// count), per-patch weight arrays, per-shape codewords, then optional Adam
/// moments. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Model& model,
                     const OptimizerState* opt = nullptr);
Checkpoint load_checkpoint(const std::string& path);

/// Throws std::runtime_error when the checkpoint was written under a
/// different (K, D, H, W) than the config expects.
void verify_checkpoint_config(const Checkpoint& ckpt, const TrainConfig& cfg);

}  // namespace patchsurf::trainer
