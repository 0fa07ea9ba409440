#include "facesyn/mesh_io.hpp"

#include "facesyn/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace facesyn {

TriMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open OBJ file: " + path);

    std::vector<std::array<double, 3>> verts;
    std::vector<std::array<double, 3>> colors;
    std::vector<std::array<int, 3>> faces;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            std::array<double, 3> v{};
            if (!(ss >> v[0] >> v[1] >> v[2]))
                throw DataError(path + ":" + std::to_string(line_no) + ": malformed vertex");
            verts.push_back(v);
            std::array<double, 3> c{};
            if (ss >> c[0] >> c[1] >> c[2]) colors.push_back(c);
        } else if (tag == "f") {
            std::array<int, 3> f{};
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                if (!(ss >> tok))
                    throw DataError(path + ":" + std::to_string(line_no) + ": face needs 3 indices");
                // Accept "i", "i/t", "i/t/n" forms; only the vertex index is used.
                f[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            std::string extra;
            if (ss >> extra)
                throw DataError(path + ":" + std::to_string(line_no) + ": only triangles supported");
            faces.push_back(f);
        }
    }

    if (!colors.empty() && colors.size() != verts.size())
        throw DataError(path + ": vertex colors present on some but not all vertices");

    TriMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i)
        mesh.vertices.row(static_cast<Eigen::Index>(i)) << verts[i][0], verts[i][1], verts[i][2];
    mesh.triangles.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i)
        mesh.triangles.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
    if (!colors.empty()) {
        mesh.per_vertex_color.resize(static_cast<Eigen::Index>(colors.size()), 3);
        for (std::size_t i = 0; i < colors.size(); ++i)
            mesh.per_vertex_color.row(static_cast<Eigen::Index>(i))
                << colors[i][0], colors[i][1], colors[i][2];
    }
    mesh.validate();
    return mesh;
}

void write_obj(const TriMesh& mesh, const std::string& path) {
    mesh.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write OBJ file: " + path);
    char buf[256];
    const bool with_color = mesh.has_colors();
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        if (with_color)
            std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g %.17g %.17g %.17g\n",
                          mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2),
                          mesh.per_vertex_color(i, 0), mesh.per_vertex_color(i, 1),
                          mesh.per_vertex_color(i, 2));
        else
            std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", mesh.vertices(i, 0),
                          mesh.vertices(i, 1), mesh.vertices(i, 2));
        out << buf;
    }
    for (Eigen::Index i = 0; i < mesh.triangles.rows(); ++i)
        out << "f " << mesh.triangles(i, 0) + 1 << ' ' << mesh.triangles(i, 1) + 1 << ' '
            << mesh.triangles(i, 2) + 1 << '\n';
}

Landmarks2D read_landmarks_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open landmarks file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    if (!j.contains("points") || !j.contains("vertex_map"))
        throw DataError(path + ": landmarks JSON needs \"points\" and \"vertex_map\"");
    const auto& pts = j["points"];
    const auto& vmap = j["vertex_map"];
    if (pts.size() != 68 || vmap.size() != 68)
        throw DataError(path + ": landmarks require exactly 68 entries");

    Landmarks2D lm;
    for (int i = 0; i < 68; ++i) {
        lm.points(i, 0) = pts[i][0].get<double>();
        lm.points(i, 1) = pts[i][1].get<double>();
        lm.vertex_map[i] = vmap[i].get<int>();
    }
    return lm;
}

void write_landmarks_json(const Landmarks2D& lm, const std::string& path) {
    nlohmann::json j;
    j["points"] = nlohmann::json::array();
    j["vertex_map"] = nlohmann::json::array();
    for (int i = 0; i < 68; ++i) {
        j["points"].push_back({lm.points(i, 0), lm.points(i, 1)});
        j["vertex_map"].push_back(lm.vertex_map[i]);
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write landmarks file: " + path);
    out << j.dump(2) << '\n';
}

} // namespace facesyn
