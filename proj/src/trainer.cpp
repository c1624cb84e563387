#include "resflow/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace resflow {

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::full: return "full";
        case TrainMode::hybrid: return "hybrid";
        case TrainMode::self_supervised: return "self_supervised";
    }
    return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "full") return TrainMode::full;
    if (s == "hybrid") return TrainMode::hybrid;
    if (s == "self_supervised") return TrainMode::self_supervised;
    throw InvalidConfig("unknown training mode '" + s + "'");
}

LossWeights preset_weights(TrainMode mode) {
    switch (mode) {
        case TrainMode::full: return LossWeights::full();
        case TrainMode::hybrid: return LossWeights::hybrid();
        case TrainMode::self_supervised: return LossWeights::self_supervised();
    }
    return LossWeights::hybrid();
}

LossWeights TrainConfig::resolved_weights() const {
    LossWeights w = weights_override ? *weights_override : preset_weights(mode);
    if (!ego_motion) {
        // Monolithic ablation has no decomposed prediction to supervise.
        w.w_nr = 0;
        w.w_r = 0;
    }
    return w;
}

double schedule_alpha(const TrainConfig& config, int epoch) {
    const int periods = config.lr_decay_every > 0 ? epoch / config.lr_decay_every : 0;
    return config.learning_rate * std::pow(config.lr_decay, periods);
}

void adam_step(NetworkParams& params, const std::vector<Eigen::MatrixXd>& grads,
               AdamState& state, double alpha) {
    if (grads.size() != params.groups.size()) {
        throw ShapeMismatch("adam_step: gradient list does not match parameter groups");
    }
    if (state.m.empty()) {
        state.m.reserve(grads.size());
        state.v.reserve(grads.size());
        for (const auto& [name, t] : params.groups) {
            state.m.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
            state.v.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
        }
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < grads.size(); ++i) {
        auto& [name, tensor] = params.groups[i];
        const Eigen::MatrixXd& g = grads[i];
        if (g.rows() != tensor.rows() || g.cols() != tensor.cols()) {
            throw ShapeMismatch("adam_step: gradient shape mismatch for '" + name + "'");
        }
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
        const Eigen::MatrixXd m_hat = state.m[i] / bc1;
        const Eigen::MatrixXd v_hat = state.v[i] / bc2;
        tensor.mutable_value() -=
            alpha * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
    }
}

namespace {

double term_value(const ad::Tensor& t) {
    return t.valid() ? t.value()(0, 0) : 0.0;
}

}  // namespace

TrainResult train(const std::vector<ScenePair>& dataset, const TrainConfig& config,
                  const TrainHooks& hooks, const NetworkParams* initial) {
    if (dataset.empty()) {
        throw InvalidConfig("train: dataset is empty");
    }
    if (config.batch_size != 1) {
        throw InvalidConfig("train: batch size must be 1");
    }
    if (config.epochs < 1 || config.learning_rate <= 0 || config.k_train < 1) {
        throw InvalidConfig("train: bad epochs, learning rate or k_train");
    }

    const LossWeights weights = config.resolved_weights();

    TrainResult result;
    result.params = initial ? *initial : NetworkParams::init(config.net, config.seed);

    std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    AdamState adam;
    long step = 0;

    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = config.start_epoch; epoch < config.start_epoch + config.epochs; ++epoch) {
        const double alpha = schedule_alpha(config, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (size_t pick : order) {
            const ScenePair& sample = dataset[pick];

            ad::Tensor p1 = ad::Tensor::constant(sample.p1.pts);
            ad::Tensor p2 = ad::Tensor::constant(sample.p2.pts);
            PipelineGraph pipeline = build_pipeline(p1, p2, result.params, config.k_train,
                                                    nullptr, config.ego_motion);
            LossGraph loss = build_total_loss(sample, pipeline, result.params, weights,
                                              nullptr);

            const double value = loss.total.value()(0, 0);
            if (!std::isfinite(value)) {
                std::ostringstream msg;
                msg << "non-finite loss " << value << " at step " << step << " (epoch "
                    << epoch << ", scene '" << sample.scene_id << "', alpha " << alpha
                    << ")";
                throw NonFiniteLoss(msg.str());
            }

            LossCurveRow row;
            row.step = step;
            row.epoch = epoch;
            row.total = value;
            row.epe3d = term_value(loss.epe3d);
            row.nonrigid = term_value(loss.nonrigid);
            row.rigid = term_value(loss.rigid);
            row.fb = term_value(loss.fb);
            row.nn = term_value(loss.nn);
            row.alpha = alpha;
            result.curve.push_back(row);

            result.params.zero_grads();
            loss.total.backward();
            std::vector<Eigen::MatrixXd> grads;
            grads.reserve(result.params.groups.size());
            for (const auto& [name, t] : result.params.groups) {
                grads.push_back(t.grad());
            }
            adam_step(result.params, grads, adam, alpha);
            ++step;
        }

        const int done = epoch + 1;
        if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 &&
            hooks.on_checkpoint) {
            hooks.on_checkpoint(done, result.params);
        }
        if (config.eval_every > 0 && done % config.eval_every == 0) {
            EvalOptions opts;
            opts.k_infer = config.k_train;
            opts.ego_motion = config.ego_motion;
            const EvalResult ev = evaluate(dataset, result.params, opts);
            result.evals.emplace_back(done, ev.aggregate);
            if (hooks.on_eval) hooks.on_eval(done, ev.aggregate);
        }
    }
    return result;
}

void write_loss_csv(std::ostream& os, const std::vector<LossCurveRow>& curve) {
    os << "step,epoch,L_total,L_epe3d,L_nr,L_r,L_fb,L_nn,alpha\n";
    for (const auto& r : curve) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%ld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.step, r.epoch, r.total, r.epe3d, r.nonrigid, r.rigid, r.fb, r.nn,
                      r.alpha);
        os << buf;
    }
}

namespace {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("RF_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

EvalResult evaluate_with(const std::vector<ScenePair>& dataset,
                         const ScenePredictor& predictor, const EvalOptions& opts) {
    if (dataset.empty()) {
        throw InvalidConfig("evaluate: dataset is empty");
    }

    struct SceneOut {
        SceneMetricsRow row;
        std::vector<double> epe;
    };
    std::vector<SceneOut> outs(dataset.size());

    auto run_scene = [&](size_t i) {
        const ScenePair& sample = dataset[i];
        const Predictions pred = predictor(sample);

        MetricsReport r;
        const FlowField& gt = sample.gt_total();
        const Metrics3d m3 = evaluate_3d(pred.d_total, gt);
        r.epe3d = m3.epe3d;
        r.acc3d_strict = m3.acc_strict;
        r.acc3d_relaxed = m3.acc_relaxed;
        r.outliers3d = m3.outliers;
        r.point_count = static_cast<long>(sample.p1.size());
        if (sample.intrinsics) {
            const Metrics2d m2 = evaluate_2d(sample.p1, pred.d_total, gt, *sample.intrinsics);
            r.epe2d = m2.epe2d;
            r.acc2d = m2.acc2d;
            r.has_2d = true;
        }
        if (pred.has_pose && sample.has_pose_gt()) {
            const PoseMetrics pm = evaluate_pose(pred.pose, sample.gt_relative());
            r.rle = pm.rle;
            r.roe = pm.roe;
            r.has_pose = true;
        }
        outs[i].row = {sample.scene_id, r};
        outs[i].epe = per_point_epe3d(pred.d_total, gt);
    };

    const int threads = std::min<int>(resolve_threads(opts.threads),
                                      static_cast<int>(dataset.size()));
    if (threads <= 1) {
        for (size_t i = 0; i < dataset.size(); ++i) run_scene(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        std::atomic<bool> failed{false};
        std::string error;
        std::mutex error_mutex;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const size_t i = next.fetch_add(1);
                    if (i >= dataset.size() || failed.load()) return;
                    try {
                        run_scene(i);
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        failed = true;
                        if (error.empty()) error = e.what();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failed) {
            throw ValidationError("evaluate: " + error);
        }
    }

    // Deterministic merge in dataset order.
    EvalResult result;
    result.per_scene.reserve(outs.size());
    for (auto& o : outs) {
        result.per_scene.push_back(std::move(o.row));
        result.pooled_epe.insert(result.pooled_epe.end(), o.epe.begin(), o.epe.end());
    }
    result.aggregate = aggregate_reports(result.per_scene);
    result.hist = histogram(result.pooled_epe, 50);
    return result;
}

EvalResult evaluate(const std::vector<ScenePair>& dataset, const NetworkParams& params,
                    const EvalOptions& opts) {
    RefineConfig refine;
    refine.k_infer = opts.k_infer;
    ScenePredictor predictor = [&params, refine, &opts](const ScenePair& sample) {
        return pipeline_forward(sample.p1, sample.p2, params, refine, opts.ego_motion);
    };
    return evaluate_with(dataset, predictor, opts);
}

}  // namespace resflow
