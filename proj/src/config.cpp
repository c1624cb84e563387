#include "resflow/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace resflow {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_real(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw InvalidConfig("config: bad numeric value for '" + key + "': " + value);
    }
    return v;
}

// Correspondence gating defaults to infinity, so that one key admits "inf".
double to_real_or_inf(const std::string& key, const std::string& value) {
    if (value == "inf" || value == "infinity") {
        return std::numeric_limits<double>::infinity();
    }
    return to_real(key, value);
}

long to_int(const std::string& key, const std::string& value) {
    const double v = to_real(key, value);
    const long i = std::lround(v);
    if (static_cast<double>(i) != v) {
        throw InvalidConfig("config: expected integer for '" + key + "': " + value);
    }
    return i;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw InvalidConfig("config: expected true/false for '" + key + "': " + value);
}

std::string real_str(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

LossWeights ExperimentConfig::resolved_loss_weights() const {
    LossWeights w = preset_weights(train.mode);
    for (const auto& [key, value] : loss_overrides) {
        if (key == "w_epe3d") w.w_epe3d = value;
        else if (key == "w_nr") w.w_nr = value;
        else if (key == "w_r") w.w_r = value;
        else if (key == "w_rot") w.w_rot = value;
        else if (key == "w_fb") w.w_fb = value;
        else if (key == "w_nn") w.w_nn = value;
    }
    if (w.w_epe3d < 0 || w.w_nr < 0 || w.w_r < 0 || w.w_rot < 0 || w.w_fb < 0 ||
        w.w_nn < 0) {
        throw InvalidConfig("config: loss weights must be nonnegative");
    }
    return w;
}

ExperimentConfig ExperimentConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw InvalidConfig("config: cannot open '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str());
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config line " + std::to_string(line_no) +
                                ": expected 'key = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw InvalidConfig("config line " + std::to_string(line_no) +
                                ": empty key or value");
        }

        if (key == "gen.n") cfg.gen.n = static_cast<int>(to_int(key, value));
        else if (key == "gen.m") cfg.gen.m = static_cast<int>(to_int(key, value));
        else if (key == "gen.max_rotation_deg") cfg.gen.max_rotation_deg = to_real(key, value);
        else if (key == "gen.max_translation") cfg.gen.max_translation = to_real(key, value);
        else if (key == "gen.rbf_count") cfg.gen.rbf.count = static_cast<int>(to_int(key, value));
        else if (key == "gen.rbf_width_min") cfg.gen.rbf.width_min = to_real(key, value);
        else if (key == "gen.rbf_width_max") cfg.gen.rbf.width_max = to_real(key, value);
        else if (key == "gen.rbf_amplitude") cfg.gen.rbf.amplitude = to_real(key, value);
        else if (key == "gen.noise_sigma") cfg.gen.noise_sigma = to_real(key, value);
        else if (key == "gen.dropout") cfg.gen.dropout = to_real(key, value);
        else if (key == "gen.ground_plane") cfg.gen.ground_plane = to_bool(key, value);
        else if (key == "gen.ground_height") cfg.gen.ground_height = to_real(key, value);
        else if (key == "gen.seed") cfg.gen.seed = static_cast<uint64_t>(to_int(key, value));
        else if (key == "gen.delta") cfg.gen.time_delta = to_real(key, value);
        else if (key == "train.mode") cfg.train.mode = train_mode_from_string(value);
        else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(to_int(key, value));
        else if (key == "train.learning_rate") cfg.train.learning_rate = to_real(key, value);
        else if (key == "train.lr_decay") cfg.train.lr_decay = to_real(key, value);
        else if (key == "train.lr_decay_every") cfg.train.lr_decay_every = static_cast<int>(to_int(key, value));
        else if (key == "train.seed") cfg.train.seed = static_cast<uint64_t>(to_int(key, value));
        else if (key == "train.checkpoint_every") cfg.train.checkpoint_every = static_cast<int>(to_int(key, value));
        else if (key == "train.eval_every") cfg.train.eval_every = static_cast<int>(to_int(key, value));
        else if (key == "train.ego_motion") cfg.train.ego_motion = to_bool(key, value);
        else if (key == "train.enc_width") cfg.train.net.enc_width = static_cast<int>(to_int(key, value));
        else if (key == "train.head_width") cfg.train.net.head_width = static_cast<int>(to_int(key, value));
        else if (key == "train.flow_width") cfg.train.net.flow_width = static_cast<int>(to_int(key, value));
        else if (key == "refine.k_train") cfg.refine.k_train = static_cast<int>(to_int(key, value));
        else if (key == "refine.k_infer") cfg.refine.k_infer = static_cast<int>(to_int(key, value));
        else if (key.rfind("loss.", 0) == 0) {
            const std::string name = key.substr(5);
            if (name != "w_epe3d" && name != "w_nr" && name != "w_r" && name != "w_rot" &&
                name != "w_fb" && name != "w_nn") {
                throw InvalidConfig("config: unknown key '" + key + "'");
            }
            cfg.loss_overrides[name] = to_real(key, value);
        } else if (key == "icp.max_iterations") cfg.icp.max_iterations = static_cast<int>(to_int(key, value));
        else if (key == "icp.tolerance") cfg.icp.convergence_tol = to_real(key, value);
        else if (key == "icp.max_corr_dist") cfg.icp.max_correspondence_distance = to_real_or_inf(key, value);
        else {
            throw InvalidConfig("config: unknown key '" + key + "'");
        }
    }

    cfg.train.k_train = cfg.refine.k_train;
    return cfg;
}

std::string ExperimentConfig::resolved_text() const {
    const LossWeights w = resolved_loss_weights();
    std::ostringstream os;
    os << "gen.n = " << gen.n << '\n';
    os << "gen.m = " << gen.m << '\n';
    os << "gen.max_rotation_deg = " << real_str(gen.max_rotation_deg) << '\n';
    os << "gen.max_translation = " << real_str(gen.max_translation) << '\n';
    os << "gen.rbf_count = " << gen.rbf.count << '\n';
    os << "gen.rbf_width_min = " << real_str(gen.rbf.width_min) << '\n';
    os << "gen.rbf_width_max = " << real_str(gen.rbf.width_max) << '\n';
    os << "gen.rbf_amplitude = " << real_str(gen.rbf.amplitude) << '\n';
    os << "gen.noise_sigma = " << real_str(gen.noise_sigma) << '\n';
    os << "gen.dropout = " << real_str(gen.dropout) << '\n';
    os << "gen.ground_plane = " << (gen.ground_plane ? "true" : "false") << '\n';
    os << "gen.ground_height = " << real_str(gen.ground_height) << '\n';
    os << "gen.seed = " << gen.seed << '\n';
    os << "gen.delta = " << real_str(gen.time_delta) << '\n';
    os << "train.mode = " << to_string(train.mode) << '\n';
    os << "train.epochs = " << train.epochs << '\n';
    os << "train.learning_rate = " << real_str(train.learning_rate) << '\n';
    os << "train.lr_decay = " << real_str(train.lr_decay) << '\n';
    os << "train.lr_decay_every = " << train.lr_decay_every << '\n';
    os << "train.seed = " << train.seed << '\n';
    os << "train.checkpoint_every = " << train.checkpoint_every << '\n';
    os << "train.eval_every = " << train.eval_every << '\n';
    os << "train.ego_motion = " << (train.ego_motion ? "true" : "false") << '\n';
    os << "train.enc_width = " << train.net.enc_width << '\n';
    os << "train.head_width = " << train.net.head_width << '\n';
    os << "train.flow_width = " << train.net.flow_width << '\n';
    os << "refine.k_train = " << refine.k_train << '\n';
    os << "refine.k_infer = " << refine.k_infer << '\n';
    os << "loss.w_epe3d = " << real_str(w.w_epe3d) << '\n';
    os << "loss.w_nr = " << real_str(w.w_nr) << '\n';
    os << "loss.w_r = " << real_str(w.w_r) << '\n';
    os << "loss.w_rot = " << real_str(w.w_rot) << '\n';
    os << "loss.w_fb = " << real_str(w.w_fb) << '\n';
    os << "loss.w_nn = " << real_str(w.w_nn) << '\n';
    os << "icp.max_iterations = " << icp.max_iterations << '\n';
    os << "icp.tolerance = " << real_str(icp.convergence_tol) << '\n';
    os << "icp.max_corr_dist = " << real_str(icp.max_correspondence_distance) << '\n';
    return os.str();
}

}  // namespace resflow
