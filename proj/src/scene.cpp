#include "resflow/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace resflow {

const FlowField& ScenePair::gt_total() const {
    if (!gt_total_field) {
        throw MissingGroundTruth("scene '" + scene_id + "' has no total-flow ground truth");
    }
    ++access.total;
    return *gt_total_field;
}

const FlowField& ScenePair::gt_nonrigid() const {
    if (!gt_nonrigid_field) {
        throw MissingGroundTruth("scene '" + scene_id + "' has no non-rigid ground truth");
    }
    ++access.nonrigid;
    return *gt_nonrigid_field;
}

const RigidTransform& ScenePair::gt_relative() const {
    if (!gt_relative_field) {
        throw MissingGroundTruth("scene '" + scene_id + "' has no relative-pose ground truth");
    }
    ++access.relative;
    return *gt_relative_field;
}

// ---------------------------------------------------------------------------
// generation

namespace {

// Scene volume in the camera frame: +y up, positive depth throughout so
// every point stays projectable.
constexpr double kBoxX = 2.0;          // x in [-kBoxX, kBoxX]
constexpr double kBoxYLow = 0.5;       // non-ground y range
constexpr double kBoxYHigh = 3.0;
constexpr double kBoxZNear = 2.0;      // z in [near, far]
constexpr double kBoxZFar = 6.0;
constexpr double kGroundFraction = 0.25;
constexpr double kGroundJitter = 0.08;

struct RbfField {
    std::vector<Eigen::Vector3d> centers;
    std::vector<double> inv_two_sigma2;
    std::vector<Eigen::Vector3d> amplitudes;

    Eigen::Vector3d eval(const Eigen::Vector3d& x) const {
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        for (size_t j = 0; j < centers.size(); ++j) {
            d += amplitudes[j] * std::exp(-(x - centers[j]).squaredNorm() * inv_two_sigma2[j]);
        }
        return d;
    }
};

Eigen::Vector3d random_unit_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Vector3d v;
    do {
        v = {gauss(rng), gauss(rng), gauss(rng)};
    } while (v.norm() < 1e-9);
    return v.normalized();
}

Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Eigen::Matrix3d k;
    k << 0, -axis.z(), axis.y(),
         axis.z(), 0, -axis.x(),
         -axis.y(), axis.x(), 0;
    return Eigen::Matrix3d::Identity() + s * k + (1.0 - c) * (k * k);
}

}  // namespace

ScenePair generate_scene(const SceneGenConfig& config) {
    if (config.n < 1 || config.m < 1) {
        throw InvalidConfig("generate_scene: point counts must be >= 1");
    }
    if (config.dropout < 0.0 || config.dropout >= 1.0) {
        throw InvalidConfig("generate_scene: dropout must be in [0, 1)");
    }
    if (config.max_rotation_deg < 0 || config.max_translation < 0 ||
        config.noise_sigma < 0 || config.rbf.count < 0 || config.rbf.amplitude < 0 ||
        config.rbf.width_min <= 0 || config.rbf.width_max < config.rbf.width_min) {
        throw InvalidConfig("generate_scene: negative or empty ranges");
    }

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> ux(-kBoxX, kBoxX);
    std::uniform_real_distribution<double> uy(kBoxYLow, kBoxYHigh);
    std::uniform_real_distribution<double> uz(kBoxZNear, kBoxZFar);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto sample_point = [&]() -> Eigen::Vector3d {
        if (config.ground_plane && unit(rng) < kGroundFraction) {
            return {ux(rng), config.ground_height + kGroundJitter * unit(rng), uz(rng)};
        }
        return {ux(rng), uy(rng), uz(rng)};
    };

    Points p1(config.n, 3);
    for (int i = 0; i < config.n; ++i) {
        p1.row(i) = sample_point().transpose();
    }

    // Camera motion: geodesic rotation angle bounded by max_rotation_deg.
    const double angle = unit(rng) * config.max_rotation_deg * M_PI / 180.0;
    const Eigen::Vector3d axis = random_unit_vector(rng);
    RigidTransform t_rel{axis_angle_rotation(axis, angle),
                         random_unit_vector(rng) * (unit(rng) * config.max_translation)};

    RbfField field;
    std::uniform_real_distribution<double> uw(config.rbf.width_min, config.rbf.width_max);
    for (int j = 0; j < config.rbf.count; ++j) {
        field.centers.push_back({ux(rng), uy(rng), uz(rng)});
        const double w = uw(rng);
        field.inv_two_sigma2.push_back(1.0 / (2.0 * w * w));
        field.amplitudes.push_back(random_unit_vector(rng) * (unit(rng) * config.rbf.amplitude));
    }

    ScenePair sample;
    sample.p1 = PointCloud(p1);
    sample.gt_relative_field = t_rel;
    sample.time_delta = config.time_delta;
    sample.intrinsics = CameraIntrinsics{};

    FlowField d_nr;
    d_nr.kind = FlowKind::non_rigid;
    d_nr.vec.resize(config.n, 3);
    for (int i = 0; i < config.n; ++i) {
        d_nr.vec.row(i) = field.eval(p1.row(i).transpose()).transpose();
    }
    sample.gt_nonrigid_field = d_nr;

    // Total flow assembled through the same ego_motion_flow used everywhere,
    // so the decomposition identity holds bitwise.
    FlowField d_total;
    d_total.kind = FlowKind::total;
    d_total.vec = d_nr.vec + ego_motion_flow(sample.p1, t_rel).vec;
    sample.gt_total_field = d_total;

    // p2: warped survivors of p1 plus fresh surface samples at time t+delta,
    // then optional jitter and an independent shuffle.
    const Points warped = p1 + d_total.vec;
    std::vector<int> survivors(config.n);
    std::iota(survivors.begin(), survivors.end(), 0);
    std::shuffle(survivors.begin(), survivors.end(), rng);
    const int keep = std::max(1, static_cast<int>(std::llround(
                         (1.0 - config.dropout) * config.n)));
    survivors.resize(std::min<size_t>(survivors.size(), static_cast<size_t>(keep)));

    std::vector<Eigen::Vector3d> p2_rows;
    p2_rows.reserve(static_cast<size_t>(config.m));
    for (int idx : survivors) {
        if (static_cast<int>(p2_rows.size()) >= config.m) break;
        p2_rows.push_back(warped.row(idx).transpose());
    }
    while (static_cast<int>(p2_rows.size()) < config.m) {
        // Extra observation of the scene surface, moved by its own analytic
        // motion. Keeps m > n cases meaningful.
        const Eigen::Vector3d x = sample_point();
        const Eigen::Vector3d moved = t_rel.apply(x + field.eval(x));
        p2_rows.push_back(moved);
    }

    Points p2(config.m, 3);
    for (int i = 0; i < config.m; ++i) {
        p2.row(i) = p2_rows[static_cast<size_t>(i)].transpose();
    }
    if (config.noise_sigma > 0) {
        for (int i = 0; i < config.m; ++i) {
            p2.row(i) += config.noise_sigma *
                         Eigen::RowVector3d(gauss(rng), gauss(rng), gauss(rng));
        }
    }
    std::vector<int> perm(config.m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Points p2_shuffled(config.m, 3);
    for (int i = 0; i < config.m; ++i) {
        p2_shuffled.row(i) = p2.row(perm[static_cast<size_t>(i)]);
    }
    sample.p2 = PointCloud(p2_shuffled);

    std::ostringstream id;
    id << "scene_" << config.seed;
    sample.scene_id = id.str();
    return sample;
}

std::pair<PointCloud, std::vector<int>> remove_ground(const PointCloud& p, double height) {
    std::vector<int> kept;
    kept.reserve(static_cast<size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p.pts(i, 1) >= height) {
            kept.push_back(static_cast<int>(i));
        }
    }
    if (kept.empty()) {
        throw EmptyResult("remove_ground: no points at or above height " +
                          std::to_string(height));
    }
    Points out(static_cast<Eigen::Index>(kept.size()), 3);
    for (size_t i = 0; i < kept.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = p.pts.row(kept[i]);
    }
    return {PointCloud(out), kept};
}

namespace {

Points select_rows(const Points& src, const std::vector<int>& rows) {
    Points out(static_cast<Eigen::Index>(rows.size()), 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
    }
    return out;
}

}  // namespace

ScenePair remove_ground_scene(const ScenePair& sample, double height) {
    auto [p1f, kept1] = remove_ground(sample.p1, height);
    auto [p2f, kept2] = remove_ground(sample.p2, height);
    ScenePair out;
    out.p1 = std::move(p1f);
    out.p2 = std::move(p2f);
    if (sample.gt_total_field) {
        out.gt_total_field =
            FlowField(select_rows(sample.gt_total_field->vec, kept1), FlowKind::total);
    }
    if (sample.gt_nonrigid_field) {
        out.gt_nonrigid_field =
            FlowField(select_rows(sample.gt_nonrigid_field->vec, kept1), FlowKind::non_rigid);
    }
    out.gt_relative_field = sample.gt_relative_field;
    out.intrinsics = sample.intrinsics;
    out.scene_id = sample.scene_id;
    out.time_delta = sample.time_delta;
    return out;
}

ScenePair augment_pair(const ScenePair& sample, const RigidTransform& g) {
    ScenePair out;
    out.p1 = transform_cloud(sample.p1, g);
    out.p2 = transform_cloud(sample.p2, g);
    if (sample.gt_relative_field) {
        out.gt_relative_field = compose(compose(g, *sample.gt_relative_field), inverse(g));
    }
    if (sample.gt_total_field) {
        out.gt_total_field =
            FlowField(sample.gt_total_field->vec * g.rotation.transpose(), FlowKind::total);
    }
    if (sample.gt_nonrigid_field) {
        out.gt_nonrigid_field = FlowField(sample.gt_nonrigid_field->vec * g.rotation.transpose(),
                                          FlowKind::non_rigid);
    }
    out.intrinsics = sample.intrinsics;
    out.scene_id = sample.scene_id;
    out.time_delta = sample.time_delta;
    return out;
}

// ---------------------------------------------------------------------------
// file format

namespace {

void append_real(std::string& line, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    line += ' ';
    line += buf;
}

struct LineReader {
    std::istream& is;
    int line_no = 0;

    bool next(std::string& line) {
        if (!std::getline(is, line)) return false;
        ++line_no;
        return true;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("scene file line " + std::to_string(line_no) + ": " + what);
    }
};

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

double parse_real(LineReader& r, const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
        r.fail("bad real '" + tok + "'");
    }
    if (!std::isfinite(v)) {
        throw ValidationError("scene file line " + std::to_string(r.line_no) +
                              ": non-finite value '" + tok + "'");
    }
    return v;
}

}  // namespace

void write_scene(const std::filesystem::path& path, const ScenePair& sample) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw ParseError("write_scene: cannot open '" + path.string() + "'");
    }
    const Eigen::Index n = sample.p1.size();
    const Eigen::Index m = sample.p2.size();
    if (sample.gt_total_field && sample.gt_total_field->size() != n) {
        throw DimensionMismatch("write_scene: total flow rows != n");
    }
    if (sample.gt_nonrigid_field && sample.gt_nonrigid_field->size() != n) {
        throw DimensionMismatch("write_scene: non-rigid flow rows != n");
    }

    std::string line = "RFSP 1\n";
    os << line;
    line.clear();
    line = "n";
    append_real(line, static_cast<double>(n));
    line += " m";
    append_real(line, static_cast<double>(m));
    line += " delta";
    append_real(line, sample.time_delta);
    os << line << '\n';

    if (sample.gt_relative_field) {
        line = "pose";
        const auto& t = *sample.gt_relative_field;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) append_real(line, t.rotation(r, c));
        }
        for (int i = 0; i < 3; ++i) append_real(line, t.translation(i));
        os << line << '\n';
    } else {
        os << "pose none\n";
    }

    if (sample.intrinsics) {
        line = "intrinsics";
        append_real(line, sample.intrinsics->fx);
        append_real(line, sample.intrinsics->fy);
        append_real(line, sample.intrinsics->cx);
        append_real(line, sample.intrinsics->cy);
        os << line << '\n';
    }

    const bool labeled = sample.has_flow_gt();
    for (Eigen::Index i = 0; i < n; ++i) {
        line = "p1";
        for (int c = 0; c < 3; ++c) append_real(line, sample.p1.pts(i, c));
        if (labeled) {
            for (int c = 0; c < 3; ++c) append_real(line, sample.gt_total_field->vec(i, c));
            for (int c = 0; c < 3; ++c) append_real(line, sample.gt_nonrigid_field->vec(i, c));
        }
        os << line << '\n';
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        line = "p2";
        for (int c = 0; c < 3; ++c) append_real(line, sample.p2.pts(i, c));
        os << line << '\n';
    }
    if (!os) {
        throw ParseError("write_scene: write failed for '" + path.string() + "'");
    }
}

ScenePair read_scene(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ParseError("read_scene: cannot open '" + path.string() + "'");
    }
    LineReader reader{is};
    std::string line;

    if (!reader.next(line)) reader.fail("missing header");
    {
        auto toks = split_ws(line);
        if (toks.size() != 2 || toks[0] != "RFSP") reader.fail("bad magic");
        if (toks[1] != "1") {
            throw VersionMismatch("scene file '" + path.string() +
                                  "': unsupported version " + toks[1]);
        }
    }

    ScenePair sample;
    sample.scene_id = path.stem().string();

    long n = 0, m = 0;
    if (!reader.next(line)) reader.fail("missing size line");
    {
        auto toks = split_ws(line);
        if (toks.size() != 6 || toks[0] != "n" || toks[2] != "m" || toks[4] != "delta") {
            reader.fail("expected 'n <n> m <m> delta <delta>'");
        }
        n = std::lround(parse_real(reader, toks[1]));
        m = std::lround(parse_real(reader, toks[3]));
        sample.time_delta = parse_real(reader, toks[5]);
        if (n < 1 || m < 1) reader.fail("point counts must be >= 1");
    }

    bool has_pose = false;
    if (!reader.next(line)) reader.fail("missing pose line");
    {
        auto toks = split_ws(line);
        if (toks.empty() || toks[0] != "pose") reader.fail("expected pose line");
        if (toks.size() == 2 && toks[1] == "none") {
            has_pose = false;
        } else if (toks.size() == 13) {
            RigidTransform t;
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    t.rotation(r, c) = parse_real(reader, toks[static_cast<size_t>(1 + 3 * r + c)]);
                }
            }
            for (int i = 0; i < 3; ++i) {
                t.translation(i) = parse_real(reader, toks[static_cast<size_t>(10 + i)]);
            }
            if (!is_rotation(t.rotation, 1e-6)) {
                throw ValidationError("scene file '" + path.string() +
                                      "': pose rotation is not orthonormal");
            }
            sample.gt_relative_field = t;
            has_pose = true;
        } else {
            reader.fail("pose line needs 12 reals or 'none'");
        }
    }

    // Peek the optional intrinsics line.
    if (!reader.next(line)) reader.fail("missing point lines");
    {
        auto toks = split_ws(line);
        if (!toks.empty() && toks[0] == "intrinsics") {
            if (toks.size() != 5) reader.fail("intrinsics line needs 4 reals");
            CameraIntrinsics k;
            k.fx = parse_real(reader, toks[1]);
            k.fy = parse_real(reader, toks[2]);
            k.cx = parse_real(reader, toks[3]);
            k.cy = parse_real(reader, toks[4]);
            if (k.fx <= 0 || k.fy <= 0) {
                throw ValidationError("scene file '" + path.string() +
                                      "': focal lengths must be positive");
            }
            sample.intrinsics = k;
            if (!reader.next(line)) reader.fail("missing point lines");
        }
    }

    Points p1(n, 3);
    Points d_total(n, 3), d_nr(n, 3);
    bool labeled = false;
    for (long i = 0; i < n; ++i) {
        if (i > 0 && !reader.next(line)) reader.fail("truncated p1 block");
        auto toks = split_ws(line);
        if (toks.empty() || toks[0] != "p1") reader.fail("expected p1 line");
        if (i == 0) {
            if (toks.size() == 10) {
                labeled = true;
            } else if (toks.size() != 4) {
                reader.fail("p1 line needs 3 or 9 reals");
            }
        }
        if (toks.size() != (labeled ? 10u : 4u)) {
            reader.fail("inconsistent p1 line width");
        }
        for (int c = 0; c < 3; ++c) p1(i, c) = parse_real(reader, toks[static_cast<size_t>(1 + c)]);
        if (labeled) {
            for (int c = 0; c < 3; ++c) d_total(i, c) = parse_real(reader, toks[static_cast<size_t>(4 + c)]);
            for (int c = 0; c < 3; ++c) d_nr(i, c) = parse_real(reader, toks[static_cast<size_t>(7 + c)]);
        }
    }

    Points p2(m, 3);
    for (long i = 0; i < m; ++i) {
        if (!reader.next(line)) reader.fail("truncated p2 block");
        auto toks = split_ws(line);
        if (toks.size() != 4 || toks[0] != "p2") reader.fail("expected 'p2 x y z'");
        for (int c = 0; c < 3; ++c) p2(i, c) = parse_real(reader, toks[static_cast<size_t>(1 + c)]);
    }

    sample.p1 = PointCloud(p1);
    sample.p2 = PointCloud(p2);
    if (labeled) {
        sample.gt_total_field = FlowField(d_total, FlowKind::total);
        sample.gt_nonrigid_field = FlowField(d_nr, FlowKind::non_rigid);
        if (has_pose) {
            // Revalidate the decomposition identity on load.
            const Points em = ego_motion_flow(sample.p1, *sample.gt_relative_field).vec;
            const double err = (d_total - (d_nr + em)).rowwise().norm().maxCoeff();
            if (err > 1e-9) {
                throw ValidationError("scene file '" + path.string() +
                                      "': flow decomposition violated by " +
                                      std::to_string(err));
            }
        }
    }
    return sample;
}

ScenePair strip_labels(const ScenePair& sample) {
    ScenePair out;
    out.p1 = sample.p1;
    out.p2 = sample.p2;
    out.intrinsics = sample.intrinsics;
    out.scene_id = sample.scene_id;
    out.time_delta = sample.time_delta;
    return out;
}

std::vector<ScenePair> load_scene_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".rfsp") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<ScenePair> scenes;
    scenes.reserve(files.size());
    for (const auto& f : files) {
        scenes.push_back(read_scene(f));
    }
    return scenes;
}

}  // namespace resflow
