#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "probembed/encoder.hpp"
#include "probembed/objective.hpp"
#include "probembed/store.hpp"
#include "probembed/synth.hpp"

namespace probembed {

enum class LrSchedule { constant, cosine };
enum class Objective { prob, infonce };

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    double base_lr = 5e-5;
    double min_lr = 0.0;
    double weight_decay = 1e-4;
    double clip_max_norm = 1.0;
    LrSchedule schedule = LrSchedule::cosine;
    std::uint64_t seed = 42;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t embed_dim = 16;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 32;
    Objective objective = Objective::prob;
    double infonce_temperature = 0.07;
};

// Scheduled learning rate at `step` of `total_steps`. Cosine anneals from
// base_lr at step 0 to min_lr at step == total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct DualEncoderModel {
    EncoderParams image, text;
    MatchScalars scalars;
};

// Gradient accumulator mirroring DualEncoderModel. raw_scale holds the
// gradient with respect to the unconstrained scale parameter.
struct ModelGrads {
    EncoderParams image, text;
    double raw_scale = 0.0;
    double offset = 0.0;

    static ModelGrads zeros_like(const DualEncoderModel& model);
    void zero();
};

struct ParamView {
    double* data = nullptr;
    std::size_t size = 0;
};

// Flattened parameter views in a fixed order (image layers, text layers,
// raw scale, offset). The optimizer, clipping, checkpointing, and the
// finite-difference check all iterate this order.
std::vector<ParamView> param_views(DualEncoderModel& model);
std::vector<ParamView> param_views(ModelGrads& grads);
std::size_t param_count(const DualEncoderModel& model);

struct AdamWState {
    std::vector<double> m, v;
    std::uint64_t step = 0;
};

struct TrainerState {
    DualEncoderModel model;
    AdamWState opt;
    std::size_t total_steps = 0;
};

TrainerState init_trainer(std::size_t image_input_dim, std::size_t text_input_dim,
                          const TrainConfig& cfg);

// Scales all gradients so the global L2 norm is at most max_norm; returns
// the pre-clip norm.
double clip_global_norm(std::vector<ParamView>& grads, double max_norm);

// One decoupled-weight-decay adaptive update. Decay is applied as an
// exact multiplicative factor (1 - lr * weight_decay) before the moment
// step, so zero gradients shrink parameters by exactly that factor.
void adamw_update(std::vector<ParamView>& params, std::vector<ParamView>& grads, AdamWState& opt,
                  double lr, const TrainConfig& cfg);

// Composite loss of the configured objective over one batch; accumulates
// exact parameter gradients when `grads` is non-null. For the InfoNCE
// objective only the `inter` and `total` fields are populated and the
// match scalars receive no gradient.
LossBreakdown batch_loss(const DualEncoderModel& model, std::span<const SynthStudy> batch,
                         const TrainConfig& cfg, const LossConfig& loss_cfg, ModelGrads* grads);

// Forward, backward, clip, and update for one batch. Aborts with a
// diagnostic if the loss goes non-finite.
LossBreakdown train_step(TrainerState& state, std::span<const SynthStudy> batch,
                         const TrainConfig& cfg, const LossConfig& loss_cfg);

struct FitResult {
    TrainerState state;
    std::vector<LossBreakdown> history;  // per-epoch means
};

// Full training loop: seeded init, per-epoch shuffling, cosine schedule
// over epochs * ceil(n / batch_size) steps. Identical seeds and inputs
// give bit-identical results.
FitResult fit(const std::vector<SynthStudy>& dataset, const TrainConfig& cfg,
              const LossConfig& loss_cfg);

// Encodes view-1 and section-1 of every study (single-input inference).
std::pair<EmbeddingStore, EmbeddingStore> encode_corpus(const DualEncoderModel& model,
                                                        const std::vector<SynthStudy>& dataset);

// Versioned binary checkpoint: all parameters, optimizer moments, and the
// step counter. Layout documented in the README.
void save_checkpoint(const TrainerState& state, const std::string& path);
TrainerState load_checkpoint(const std::string& path);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t params_checked = 0;
};

// Central finite-difference check of every trainable scalar against the
// analytic gradients of batch_loss. Relative error uses
// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult gradient_check(TrainerState& state, std::span<const SynthStudy> batch,
                               const TrainConfig& cfg, const LossConfig& loss_cfg,
                               double step_size = 1e-5);

}  // namespace probembed
