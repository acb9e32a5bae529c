#pragma once

#include <optional>
#include <string>
#include <vector>

#include "awdiff/conditioning.hpp"
#include "awdiff/denoiser.hpp"
#include "awdiff/diffusion.hpp"
#include "awdiff/image.hpp"
#include "awdiff/wavelet.hpp"

namespace awdiff {

/// All knobs of a training run. Every key has a default so a minimal
/// config file is valid; parsing accepts flat `key=value` lines with
/// `#` comments.
struct TrainingConfig {
    long steps = 2000;
    int batch_size = 16;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double lambda1 = 0.1;    // alignment-loss weight
    double ema_decay = 0.999;
    std::uint64_t seed = 0;
    int schedule_steps = 100; // T
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int scales = 4; // wavelet scales S
    int channels = 16;
    int kernel_size = 3;
    int stages = 2;
    int embed_dim = 16;
    long checkpoint_every = 500;
    // 0 applies the alignment loss at every t; a positive value restricts
    // it to steps with t <= align_t_max.
    int align_t_max = 0;

    void validate() const;
    ArchitectureConfig architecture() const;
    NoiseSchedule schedule() const { return linear_beta_schedule(schedule_steps, beta_start, beta_end); }

    std::string to_key_values() const;
    static TrainingConfig from_key_values(const std::string& text);
    static TrainingConfig from_file(const std::string& path);

    /// Everything except `steps` must agree for a checkpoint resume.
    bool compatible_with(const TrainingConfig& other) const;
};

struct DatasetItem {
    Image image;
    LabelPrompt label;
    WaveletPyramid features; // precomputed from the clean image
    ConditioningEmbedding z_y;
};

/// Training corpus; all images share dims and every cached pyramid is
/// verified against its image on construction.
struct Dataset {
    std::vector<DatasetItem> items;

    std::size_t size() const { return items.size(); }

    static Dataset from_labeled_images(const std::vector<std::pair<Image, std::string>>& pairs,
                                       int scales, int embed_dim);

    /// Directory layout: images/*.pgm plus labels.tsv (filename TAB label);
    /// an optional embeddings/manifest.tsv (label TAB tensor path, relative
    /// to the dataset dir) overrides the toy text embedder.
    static Dataset load(const std::string& dir, int scales, int embed_dim);
};

struct StepMetrics {
    double total = 0.0;
    double mse = 0.0;
    double align = 0.0;
};

struct LossRow {
    long step = 0;
    double total = 0.0;
    double mse = 0.0;
    double align = 0.0;
};

/// Mean of squared differences (mean, not sum, so lambda1 is
/// resolution-independent).
double mse_loss(const Image& eps, const Image& eps_pred);

/// One optimizer step over a batch: per example draw t and eps, corrupt,
/// predict, assemble the weighted loss gradient, then one Adam update and
/// one EMA update. Per-example work may run in parallel; the gradient
/// reduction is an ordered sum so results are bitwise reproducible.
StepMetrics training_step(DenoiserParams& params, ParamSet& ema, AdamState& opt_state,
                          const std::vector<const DatasetItem*>& batch, const NoiseSchedule& sched,
                          const TrainingConfig& cfg, const ToyImageEmbedder& embedder,
                          SeededRng& rng);

struct TrainOptions {
    std::string out_dir;           // checkpoints + loss.csv; empty = keep in memory only
    std::string resume_checkpoint; // checkpoint directory to continue from
    bool verbose = false;
};

struct TrainResult {
    DenoiserParams params;
    ParamSet ema;
    std::vector<LossRow> curve;
};

TrainResult train(const Dataset& dataset, const TrainingConfig& cfg, const TrainOptions& options = {});

// Checkpoints: a directory holding the config snapshot, the step counter,
// the RNG state, the parameter blocks (manifest + blob), the EMA shadow
// under the .ema suffix, and both Adam moment sets. Enables exact resume.
struct Checkpoint {
    TrainingConfig config;
    long step = 0;
    std::array<std::uint64_t, 4> rng_state{};
    DenoiserParams params;
    ParamSet ema;
    AdamState adam;
};

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& dir);

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows);

} // namespace awdiff
