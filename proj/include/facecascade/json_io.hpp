#pragma once

#include "facecascade/camera.hpp"
#include "facecascade/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace facecascade {

nlohmann::json to_json(const ShapeParams& params);
ShapeParams params_from_json(const BilinearModel& model, const nlohmann::json& j);

/// {"scale": a, "rotation": [[r11, r12, r13], ...], "translation": [t1, t2]}
/// with the translation in the internal y-up frame.
nlohmann::json to_json(const CameraPose& pose);
CameraPose pose_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Points2& points);
Points2 points2_from_json(const nlohmann::json& j, const std::string& field);

nlohmann::json to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j, const std::string& field);

/// Parses a whole JSON file; syntax errors become ParseError.
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

} // namespace facecascade
