#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "resflow/icp.hpp"
#include "resflow/scene.hpp"
#include "resflow/trainer.hpp"

namespace resflow {

/// Flat "key = value" experiment configuration with section-prefixed keys
/// (gen., train., refine., loss., icp.). Unknown keys are rejected; the
/// fully resolved config is echoed into each run's output directory.
struct ExperimentConfig {
    SceneGenConfig gen;
    TrainConfig train;
    RefineConfig refine;
    IcpConfig icp;
    std::map<std::string, double> loss_overrides;  // explicit loss.* keys

    /// Mode preset with any loss.* overrides applied, ego toggle honored.
    LossWeights resolved_loss_weights() const;

    static ExperimentConfig parse_file(const std::filesystem::path& path);
    static ExperimentConfig parse_text(const std::string& text);

    /// Canonical echo of every key, suitable for config.resolved.
    std::string resolved_text() const;
};

}  // namespace resflow
