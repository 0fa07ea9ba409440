#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace facesyn {

// One on-disk container format for every model artifact: a JSON header
// describing named double matrices, followed by their row-major
// little-endian payloads. Readers validate the magic and version.

inline constexpr int kContainerVersion = 1;
inline constexpr char kContainerMagic[8] = {'F', 'S', 'Y', 'N', 'M', 'D', 'L', '1'};

struct Container {
    nlohmann::json meta;                              // free-form header fields
    std::vector<std::pair<std::string, Eigen::MatrixXd>> matrices;

    const Eigen::MatrixXd& matrix(const std::string& name) const;
    bool has(const std::string& name) const;

    void save(const std::string& path) const;
    static Container load(const std::string& path);
};

} // namespace facesyn
