#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resflow/losses.hpp"
#include "resflow/metrics.hpp"
#include "resflow/network.hpp"
#include "resflow/scene.hpp"

namespace resflow {

enum class TrainMode { full, hybrid, self_supervised };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

LossWeights preset_weights(TrainMode mode);

struct TrainConfig {
    TrainMode mode = TrainMode::hybrid;
    int epochs = 30;
    double learning_rate = 1e-4;
    double lr_decay = 0.7;
    int lr_decay_every = 35;
    int batch_size = 1;  // the pipeline is built for B = 1; enforced
    int k_train = 1;
    uint64_t seed = 7;
    int checkpoint_every = 0;  // epochs, 0 = only the final checkpoint
    int eval_every = 0;        // epochs, 0 = no in-training evaluation
    bool ego_motion = true;
    std::optional<LossWeights> weights_override;
    NetConfig net;
    int start_epoch = 0;  // resumed runs continue the decay schedule here

    LossWeights resolved_weights() const;
};

/// alpha(e) = learning_rate * decay^floor(e / decay_every)
double schedule_alpha(const TrainConfig& config, int epoch);

struct AdamState {
    std::vector<Eigen::MatrixXd> m, v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update; state is lazily sized to the parameter list.
void adam_step(NetworkParams& params, const std::vector<Eigen::MatrixXd>& grads,
               AdamState& state, double alpha);

struct LossCurveRow {
    long step = 0;
    int epoch = 0;
    double total = 0, epe3d = 0, nonrigid = 0, rigid = 0, fb = 0, nn = 0;
    double alpha = 0;
};

struct TrainHooks {
    std::function<void(int epoch, const NetworkParams&)> on_checkpoint;
    std::function<void(int epoch, const MetricsReport&)> on_eval;
};

struct TrainResult {
    NetworkParams params;
    std::vector<LossCurveRow> curve;
    std::vector<std::pair<int, MetricsReport>> evals;
};

/// Sequential B=1 loop: seeded shuffle, pipeline forward with k_train,
/// weighted objective, backprop, Adam. Throws NonFiniteLoss with diagnostics
/// when the objective stops being finite. Resumes from `initial` when given.
TrainResult train(const std::vector<ScenePair>& dataset, const TrainConfig& config,
                  const TrainHooks& hooks = {}, const NetworkParams* initial = nullptr);

void write_loss_csv(std::ostream& os, const std::vector<LossCurveRow>& curve);

struct EvalOptions {
    int k_infer = 1;
    bool ego_motion = true;
    int threads = 0;  // 0: RF_THREADS env var, else hardware concurrency
};

struct EvalResult {
    std::vector<SceneMetricsRow> per_scene;
    MetricsReport aggregate;
    ErrorHistogram hist;
    std::vector<double> pooled_epe;
};

using ScenePredictor = std::function<Predictions(const ScenePair&)>;

/// Parallel over scenes with a deterministic merge; per-point flow metrics
/// pool across all points, pose metrics average per scene.
EvalResult evaluate_with(const std::vector<ScenePair>& dataset,
                         const ScenePredictor& predictor, const EvalOptions& opts);

EvalResult evaluate(const std::vector<ScenePair>& dataset, const NetworkParams& params,
                    const EvalOptions& opts);

}  // namespace resflow
