#include "resflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "resflow/geometry.hpp"

namespace resflow {

namespace {

constexpr double kZeroFlow = 1e-12;

void check_fields(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a) + " vs " +
                                std::to_string(b) + " rows");
    }
    if (a < 1) {
        throw DimensionMismatch(std::string(what) + ": empty input");
    }
}

}  // namespace

Metrics3d evaluate_3d(const FlowField& d_hat, const FlowField& d_gt) {
    check_fields(d_hat.size(), d_gt.size(), "evaluate_3d");
    const Eigen::Index n = d_gt.size();
    long strict = 0, relaxed = 0, outliers = 0;
    double epe_sum = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = (d_gt.vec.row(i) - d_hat.vec.row(i)).norm();
        const double mag = d_gt.vec.row(i).norm();
        const bool has_rel = mag >= kZeroFlow;
        const double rel = has_rel ? e / mag : 0.0;
        epe_sum += e;
        if (e < 0.05 || (has_rel && rel < 0.05)) ++strict;
        if (e < 0.1 || (has_rel && rel < 0.1)) ++relaxed;
        if (e > 0.3 || (has_rel && rel > 0.1)) ++outliers;
    }
    const double inv = 1.0 / static_cast<double>(n);
    return {epe_sum * inv, strict * inv, relaxed * inv, outliers * inv};
}

std::vector<double> per_point_epe3d(const FlowField& d_hat, const FlowField& d_gt) {
    check_fields(d_hat.size(), d_gt.size(), "per_point_epe3d");
    std::vector<double> out(static_cast<size_t>(d_gt.size()));
    for (Eigen::Index i = 0; i < d_gt.size(); ++i) {
        out[static_cast<size_t>(i)] = (d_gt.vec.row(i) - d_hat.vec.row(i)).norm();
    }
    return out;
}

Metrics2d evaluate_2d(const PointCloud& p1, const FlowField& d_hat,
                      const FlowField& d_gt, const CameraIntrinsics& k) {
    check_fields(d_hat.size(), d_gt.size(), "evaluate_2d");
    check_fields(p1.size(), d_gt.size(), "evaluate_2d");

    std::vector<Eigen::Index> bad;
    auto depth_ok = [](const Eigen::Vector3d& x) { return x.z() > 1e-9; };
    for (Eigen::Index i = 0; i < p1.size(); ++i) {
        const Eigen::Vector3d x = p1.point(i);
        if (!depth_ok(x) || !depth_ok(x + d_gt.vec.row(i).transpose()) ||
            !depth_ok(x + d_hat.vec.row(i).transpose())) {
            bad.push_back(i);
        }
    }
    if (!bad.empty()) {
        std::ostringstream msg;
        msg << "evaluate_2d: non-positive depth at indices";
        for (size_t j = 0; j < bad.size() && j < 16; ++j) msg << ' ' << bad[j];
        if (bad.size() > 16) msg << " ...";
        throw NonPositiveDepth(msg.str());
    }

    const Eigen::Index n = p1.size();
    double epe_sum = 0;
    long acc = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d x = p1.point(i);
        const Eigen::Vector2d base = project(x, k);
        const Eigen::Vector2d o_gt = project(x + d_gt.vec.row(i).transpose(), k) - base;
        const Eigen::Vector2d o_hat = project(x + d_hat.vec.row(i).transpose(), k) - base;
        const double e = (o_gt - o_hat).norm();
        const double mag = o_gt.norm();
        const bool has_rel = mag >= kZeroFlow;
        epe_sum += e;
        if (e < 3.0 || (has_rel && e / mag < 0.05)) ++acc;
    }
    const double inv = 1.0 / static_cast<double>(n);
    return {epe_sum * inv, acc * inv};
}

PoseMetrics evaluate_pose(const RigidTransform& t_hat, const RigidTransform& t_gt) {
    return {translation_error(t_hat.translation, t_gt.translation),
            rotation_error_deg(t_hat.rotation, t_gt.rotation)};
}

ErrorHistogram histogram(const std::vector<double>& per_point, int bins) {
    if (per_point.empty()) {
        throw EmptyInput("histogram: no values");
    }
    if (bins < 1) {
        throw InvalidConfig("histogram: bins must be >= 1");
    }
    double lo = 0.0;
    double hi = *std::max_element(per_point.begin(), per_point.end());
    for (double v : per_point) {
        if (!std::isfinite(v) || v < 0) {
            throw ValidationError("histogram: values must be finite and nonnegative");
        }
    }
    if (hi <= lo) hi = 1.0;  // degenerate all-zero input keeps edges ascending

    ErrorHistogram h;
    h.bin_edges.resize(static_cast<size_t>(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b) {
        h.bin_edges[static_cast<size_t>(b)] = lo + width * b;
    }
    h.bin_edges.back() = hi;
    h.counts.assign(static_cast<size_t>(bins), 0);
    for (double v : per_point) {
        int b = static_cast<int>((v - lo) / width);
        if (b >= bins) b = bins - 1;  // right-closed last bin
        if (b < 0) b = 0;
        ++h.counts[static_cast<size_t>(b)];
    }
    return h;
}

MetricsReport aggregate_reports(const std::vector<SceneMetricsRow>& rows) {
    MetricsReport agg;
    long total_points = 0, points_2d = 0;
    long pose_scenes = 0;
    for (const auto& row : rows) {
        const MetricsReport& r = row.report;
        const double w = static_cast<double>(r.point_count);
        agg.epe3d += r.epe3d * w;
        agg.acc3d_strict += r.acc3d_strict * w;
        agg.acc3d_relaxed += r.acc3d_relaxed * w;
        agg.outliers3d += r.outliers3d * w;
        total_points += r.point_count;
        if (r.has_2d) {
            agg.epe2d += r.epe2d * w;
            agg.acc2d += r.acc2d * w;
            points_2d += r.point_count;
        }
        if (r.has_pose) {
            agg.rle += r.rle;
            agg.roe += r.roe;
            ++pose_scenes;
        }
    }
    if (total_points > 0) {
        agg.epe3d /= total_points;
        agg.acc3d_strict /= total_points;
        agg.acc3d_relaxed /= total_points;
        agg.outliers3d /= total_points;
    }
    if (points_2d > 0) {
        agg.epe2d /= points_2d;
        agg.acc2d /= points_2d;
        agg.has_2d = true;
    }
    if (pose_scenes > 0) {
        agg.rle /= pose_scenes;
        agg.roe /= pose_scenes;
        agg.has_pose = true;
    }
    agg.point_count = total_points;
    return agg;
}

namespace {

void print_cell(std::ostream& os, double v, bool available) {
    if (!available) {
        os << ",-";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    os << ',' << buf;
}

void print_row(std::ostream& os, const std::string& id, const MetricsReport& r) {
    os << id << ',' << r.point_count;
    print_cell(os, r.epe3d, true);
    print_cell(os, r.acc3d_strict, true);
    print_cell(os, r.acc3d_relaxed, true);
    print_cell(os, r.outliers3d, true);
    print_cell(os, r.epe2d, r.has_2d);
    print_cell(os, r.acc2d, r.has_2d);
    print_cell(os, r.rle, r.has_pose);
    print_cell(os, r.roe, r.has_pose);
    os << '\n';
}

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<SceneMetricsRow>& rows,
                       const MetricsReport& aggregate) {
    os << "scene_id,n,epe3d,acc3d_005,acc3d_01,outliers3d,epe2d,acc2d,rle_m,roe_deg\n";
    for (const auto& row : rows) {
        print_row(os, row.scene_id, row.report);
    }
    print_row(os, "aggregate", aggregate);
}

void write_histogram_csv(std::ostream& os, const ErrorHistogram& hist) {
    os << "bin_lo,bin_hi,count\n";
    for (size_t b = 0; b < hist.counts.size(); ++b) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%ld\n", hist.bin_edges[b],
                      hist.bin_edges[b + 1], hist.counts[b]);
        os << buf;
    }
}

}  // namespace resflow
