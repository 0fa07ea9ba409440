#pragma once

#include "facesyn/geometry.hpp"

#include <string>

namespace facesyn {

// OBJ with v/f records only (optional vertex colors as "v x y z r g b",
// a common extension). Faces must be triangles; indices are 1-based on disk.
TriMesh read_obj(const std::string& path);
void write_obj(const TriMesh& mesh, const std::string& path);

// Landmarks as JSON: { "points": [[x,y], ...68], "vertex_map": [...68] }.
Landmarks2D read_landmarks_json(const std::string& path);
void write_landmarks_json(const Landmarks2D& lm, const std::string& path);

} // namespace facesyn
