#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "resflow/point_cloud.hpp"

namespace resflow {

/// One evaluation run. Fractions live in [0, 1]; a perfect prediction gives
/// zero errors, unit accuracies and zero outliers. has_2d / has_pose flag
/// which metric families were computable for this run.
struct MetricsReport {
    double epe3d = 0;        // meters
    double acc3d_strict = 0; // EPE3D < 0.05 m or relative error < 5%
    double acc3d_relaxed = 0;// EPE3D < 0.1 m or relative error < 10%
    double outliers3d = 0;   // EPE3D > 0.3 m or relative error > 10%
    double epe2d = 0;        // pixels
    double acc2d = 0;        // EPE2D < 3 px or relative error < 5%
    double rle = 0;          // meters
    double roe = 0;          // degrees
    long point_count = 0;
    bool has_2d = false;
    bool has_pose = false;
};

struct Metrics3d {
    double epe3d, acc_strict, acc_relaxed, outliers;
};

struct Metrics2d {
    double epe2d, acc2d;
};

struct PoseMetrics {
    double rle, roe;
};

/// Relative error uses the ground-truth magnitude as denominator; for
/// near-zero ground truth (< 1e-12) only the absolute criterion applies.
Metrics3d evaluate_3d(const FlowField& d_hat, const FlowField& d_gt);

std::vector<double> per_point_epe3d(const FlowField& d_hat, const FlowField& d_gt);

/// 2D flows are projections pi(x + d) - pi(x); throws NonPositiveDepth
/// (listing the offending point indices) when any original or warped point
/// has depth <= 0.
Metrics2d evaluate_2d(const PointCloud& p1, const FlowField& d_hat,
                      const FlowField& d_gt, const CameraIntrinsics& k);

PoseMetrics evaluate_pose(const RigidTransform& t_hat, const RigidTransform& t_gt);

struct ErrorHistogram {
    std::vector<double> bin_edges;  // bins + 1 ascending edges, meters
    std::vector<long> counts;       // right-open bins; last bin right-closed
};

/// Equal-width bins over [0, max]. Throws EmptyInput for an empty list.
ErrorHistogram histogram(const std::vector<double>& per_point_epe3d, int bins = 50);

// CSV report: one row per scene plus an aggregate row, fixed column order
// scene_id, n, epe3d, acc3d_005, acc3d_01, outliers3d, epe2d, acc2d, rle_m,
// roe_deg. Unavailable values print "-".
struct SceneMetricsRow {
    std::string scene_id;
    MetricsReport report;
};

/// Pooled aggregation: flow metrics weighted by point count, pose metrics
/// averaged over scenes that carry them.
MetricsReport aggregate_reports(const std::vector<SceneMetricsRow>& rows);

void write_metrics_csv(std::ostream& os, const std::vector<SceneMetricsRow>& rows,
                       const MetricsReport& aggregate);
void write_histogram_csv(std::ostream& os, const ErrorHistogram& hist);

}  // namespace resflow
