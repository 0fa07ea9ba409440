#include "facesyn/container.hpp"

#include "facesyn/errors.hpp"

#include <cstring>
#include <fstream>

namespace facesyn {

namespace {

// The payload is written on little-endian hosts as raw doubles; this build
// targets little-endian platforms only and the loader checks a marker value.
void write_u64(std::ofstream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

} // namespace

const Eigen::MatrixXd& Container::matrix(const std::string& name) const {
    for (const auto& [n, m] : matrices)
        if (n == name) return m;
    throw DataError("container is missing matrix \"" + name + "\"");
}

bool Container::has(const std::string& name) const {
    for (const auto& [n, m] : matrices)
        if (n == name) return true;
    return false;
}

void Container::save(const std::string& path) const {
    nlohmann::json header = meta;
    header["format_version"] = kContainerVersion;
    header["matrices"] = nlohmann::json::array();
    for (const auto& [name, m] : matrices)
        header["matrices"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write container: " + path);
    out.write(kContainerMagic, 8);
    write_u64(out, htext.size());
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& [name, m] : matrices) {
        // Row-major on disk.
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
        out.write(reinterpret_cast<const char*>(rm.data()),
                  static_cast<std::streamsize>(sizeof(double) * rm.size()));
    }
    if (!out) throw DataError("write failed: " + path);
}

Container Container::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open container: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kContainerMagic, 8) != 0)
        throw DataError(path + ": not a model container (bad magic)");
    const std::uint64_t hlen = read_u64(in);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError(path + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad container header: " + e.what());
    }
    if (header.value("format_version", -1) != kContainerVersion)
        throw DataError(path + ": unsupported container version");

    Container c;
    for (const auto& entry : header["matrices"]) {
        const auto rows = entry["rows"].get<Eigen::Index>();
        const auto cols = entry["cols"].get<Eigen::Index>();
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
        in.read(reinterpret_cast<char*>(rm.data()),
                static_cast<std::streamsize>(sizeof(double) * rm.size()));
        if (!in) throw DataError(path + ": truncated payload for \"" +
                                 entry["name"].get<std::string>() + "\"");
        c.matrices.emplace_back(entry["name"].get<std::string>(), Eigen::MatrixXd(rm));
    }
    header.erase("matrices");
    header.erase("format_version");
    c.meta = header;
    return c;
}

} // namespace facesyn
