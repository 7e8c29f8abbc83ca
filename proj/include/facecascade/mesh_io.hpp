#pragma once

#include "facecascade/model.hpp"

#include <filesystem>
#include <vector>

namespace facecascade {

struct Mesh {
	Points3 vertices;
	std::vector<Triangle> faces;
};

/// Wavefront OBJ with `v` and triangular `f` records (1-based indices).
void write_obj(const Shape& shape, const std::vector<Triangle>& faces, const std::filesystem::path& path);
/// Reads `v` and `f` records; polygon faces are fan-triangulated and
/// `v/vt/vn` index forms accepted. Other records are ignored.
Mesh read_obj(const std::filesystem::path& path);

} // namespace facecascade
