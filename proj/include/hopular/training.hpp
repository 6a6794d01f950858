#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hopular/model.hpp"

namespace hopular {

enum class MaskAction : uint8_t { keep, mask, replace };

// Per-attribute masking decisions for one sample. Replacement donors are
// positions within the training-row list, drawn uniformly among the other
// training samples.
struct MaskPlan {
    std::vector<MaskAction> actions;
    std::vector<int64_t> donors;  // donor position for replace actions, else -1
};

struct MaskProbs {
    double mask = 0.025;
    double replace = 0.175;
};

// One uniform draw per feature: u < mask -> mask, mask <= u < mask + replace
// -> replace (mutually exclusive, mask first). Targets are always masked.
MaskPlan draw_mask_plan(const TableSchema& schema, const MaskProbs& probs, int64_t self_position,
                        int64_t train_count, Rng& rng);
// Inference contract: exactly the target positions are masked.
MaskPlan inference_mask_plan(const TableSchema& schema);

struct MaskedSample {
    ModelInput input;
    std::vector<int64_t> feature_loss_positions;  // attributes entering L_f
};

// Applies a plan to a row: masked positions are flagged for the mask token,
// replaced positions carry the donor's value and join the feature-loss set.
// Ground-truth labels are never altered.
MaskedSample apply_mask(const Dataset& ds, std::span<const int64_t> train_rows, int64_t row,
                        const MaskPlan& plan);

// Cosine annealing from 1 at epoch 0 to 0 at epoch == total.
double gamma_schedule(int64_t epoch, int64_t total);

struct LossBreakdown {
    double loss_feature = 0.0;
    double loss_target = 0.0;
    double gamma = 1.0;
    double total = 0.0;
};

struct TruthValue {
    bool categorical = false;
    int64_t category = -1;
    double value = 0.0;
};

struct LossPosition {
    int64_t sample = 0;
    int64_t attr = 0;
    bool is_target = false;
};

double cross_entropy_logits(const Tensor& logits, int64_t truth);

// Plain evaluation form: predictions[sample][attr] are logits (categorical)
// or a 1-element tensor (continuous). L_f and L_t are joint means over their
// position sets; the total follows L = gamma L_f + (1 - gamma) L_t.
LossBreakdown compute_loss(const std::vector<std::vector<Tensor>>& predictions,
                           const std::vector<std::vector<TruthValue>>& truths,
                           const std::vector<LossPosition>& positions, double gamma);

struct OptimizerConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-6;
    double weight_decay = 0.0;
    double trust_clip = 10.0;
    double ema_alpha = 0.005;
    int64_t ema_every = 1;
};

// LAMB with bias-corrected Adam moments and a [0, trust_clip]-clamped trust
// ratio per parameter block, plus an exponential-moving-average copy of the
// weights used for evaluation and early stopping (fast weights are never
// overwritten by the slow ones).
class LambOptimizer {
public:
    explicit LambOptimizer(OptimizerConfig config) : config_(config) {}

    void step(std::span<const std::string> names, std::span<Tensor* const> params,
              std::span<const Tensor> grads);
    void ema_update(std::span<Tensor* const> params);

    const std::vector<Tensor>& slow_weights() const { return slow_; }
    int64_t step_count() const { return step_count_; }

private:
    OptimizerConfig config_;
    std::vector<Tensor> m_, v_, slow_;
    int64_t step_count_ = 0;
};

struct TrainConfig {
    int64_t epochs = 10000;
    int64_t patience = 500;
    MaskProbs mask_probs;
    double gamma_start = 1.0;
    OptimizerConfig opt;
    int64_t full_batch_limit = 2048;
    int64_t batch_size = 256;
    uint64_t seed = 0;
};

struct EpochRecord {
    int64_t epoch = 0;
    double gamma = 0.0;
    double loss_feature = 0.0;
    double loss_target = 0.0;
    double loss_total = 0.0;
    double val_metric = 0.0;
};

struct FitResult {
    std::vector<EpochRecord> history;
    int64_t best_epoch = -1;
    double best_val_metric = 0.0;
    int64_t epochs_run = 0;
};

// One JSON object per epoch, deterministic for a given seed and config.
void write_history_line(std::ostream& out, const EpochRecord& record);

struct TrainingBatchLoss {
    Var total;
    Var loss_feature;
    Var loss_target;
    int64_t feature_positions = 0;
    int64_t target_positions = 0;
};

// Masked-batch objective: builds the shared memory (targets masked, with the
// query's own column carrying its mask pattern), runs forward for every batch
// sample, and assembles L = gamma L_f + (1 - gamma) L_t on the tape.
TrainingBatchLoss build_training_loss(ForwardContext& ctx, const BoundModel& bound,
                                      const Dataset& ds,
                                      std::span<const EncodedSample> train_enc,
                                      std::span<const MaskedSample> masked,
                                      std::span<const int64_t> batch, double gamma);

// Full-model finite-difference check on a fixed masked batch (dropout off):
// max over parameters of the central-difference relative error.
double model_gradient_check(const HopularModel& model, const Dataset& ds, double gamma,
                            double eps);

// Trains the model: per epoch masked forward over the training split,
// backward, one LAMB step, one EMA update; validation on the slow weights
// drives early stopping. On return the model carries the slow weights of the
// best validation epoch.
FitResult fit(HopularModel& model, const Dataset& ds, const TrainConfig& config,
              std::ostream* history_out);

// Mean target loss (cross-entropy or squared error in normalized space) of
// the frozen model on a split, with inference-time masking.
double evaluate_target_loss(const HopularModel& model, const Dataset& ds, int split);

struct EvalMetric {
    std::string name;  // "accuracy" or "mse_x1000"
    double value = 0.0;
};

// Task metric on a split: classification accuracy, or mean squared error on
// de-normalized targets multiplied by 1000.
EvalMetric evaluate_model(const HopularModel& model, const Dataset& ds, int split);

}  // namespace hopular
