#include "resflow/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace resflow {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'N', 'W'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
    // Host is little-endian on every supported target; memcpy keeps the
    // representation byte-exact.
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    char buf[sizeof(T)];
    is.read(buf, sizeof(T));
    if (!is) {
        throw ParseError("checkpoint: unexpected end of file");
    }
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw ParseError("checkpoint: cannot open '" + path.string() + "' for writing");
    }
    os.write(kMagic, 4);
    write_le<uint32_t>(os, kVersion);
    write_le<uint64_t>(os, params.seed);
    write_le<uint32_t>(os, static_cast<uint32_t>(params.groups.size()));
    for (const auto& [name, tensor] : params.groups) {
        write_le<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Eigen::MatrixXd& v = tensor.value();
        write_le<uint64_t>(os, static_cast<uint64_t>(v.rows()));
        write_le<uint64_t>(os, static_cast<uint64_t>(v.cols()));
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            for (Eigen::Index c = 0; c < v.cols(); ++c) {
                write_le<double>(os, v(r, c));
            }
        }
    }
    if (!os) {
        throw ParseError("checkpoint: write failed for '" + path.string() + "'");
    }
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ParseError("checkpoint: cannot open '" + path.string() + "'");
    }
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("checkpoint: bad magic in '" + path.string() + "'");
    }
    const uint32_t version = read_le<uint32_t>(is);
    if (version != kVersion) {
        throw VersionMismatch("checkpoint: unsupported format version " +
                              std::to_string(version));
    }
    NetworkParams params;
    params.seed = read_le<uint64_t>(is);
    const uint32_t n_groups = read_le<uint32_t>(is);
    for (uint32_t g = 0; g < n_groups; ++g) {
        const uint32_t name_len = read_le<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) {
            throw ParseError("checkpoint: truncated group name");
        }
        const uint64_t rows = read_le<uint64_t>(is);
        const uint64_t cols = read_le<uint64_t>(is);
        Eigen::MatrixXd v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            for (Eigen::Index c = 0; c < v.cols(); ++c) {
                v(r, c) = read_le<double>(is);
            }
        }
        params.groups.emplace_back(name, ad::Tensor::param(v));
    }
    return params;
}

}  // namespace resflow
