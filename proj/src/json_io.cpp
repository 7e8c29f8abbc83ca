#include "facecascade/json_io.hpp"

#include <cmath>
#include <fstream>

namespace facecascade {

using nlohmann::json;

json to_json(const Vec& v)
{
	json out = json::array();
	for (Eigen::Index i = 0; i < v.size(); ++i)
		out.push_back(v[i]);
	return out;
}

Vec vec_from_json(const json& j, const std::string& field)
{
	if (!j.is_array())
		throw ParseError(field, "expected a numeric array");
	Vec v(static_cast<Eigen::Index>(j.size()));
	for (std::size_t i = 0; i < j.size(); ++i) {
		if (!j[i].is_number())
			throw ParseError(field, "expected a number");
		v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
		if (!std::isfinite(v[static_cast<Eigen::Index>(i)]))
			throw ParseError(field, "non-finite value");
	}
	return v;
}

json to_json(const ShapeParams& params)
{
	return {{"alpha", to_json(params.alpha)}, {"beta", to_json(params.beta)}};
}

ShapeParams params_from_json(const BilinearModel& model, const json& j)
{
	if (!j.is_object() || !j.contains("alpha") || !j.contains("beta"))
		throw ParseError("alpha/beta", "missing shape parameters");
	ShapeParams p{vec_from_json(j["alpha"], "alpha"), vec_from_json(j["beta"], "beta")};
	if (p.alpha.size() != model.d_id)
		throw ParseError("alpha", "dimension does not match model");
	if (p.beta.size() != model.d_exp)
		throw ParseError("beta", "dimension does not match model");
	return p;
}

json to_json(const CameraPose& pose)
{
	json rot = json::array();
	for (int r = 0; r < 3; ++r)
		rot.push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)});
	return {{"scale", pose.scale}, {"rotation", rot}, {"translation", {pose.translation.x(), pose.translation.y()}}};
}

CameraPose pose_from_json(const json& j)
{
	if (!j.is_object() || !j.contains("scale") || !j.contains("rotation") || !j.contains("translation"))
		throw ParseError("pose", "expected scale, rotation and translation");
	CameraPose pose;
	if (!j["scale"].is_number())
		throw ParseError("pose.scale", "expected a number");
	pose.scale = j["scale"].get<double>();
	const auto& rot = j["rotation"];
	if (!rot.is_array() || rot.size() != 3)
		throw ParseError("pose.rotation", "expected a 3x3 array");
	for (int r = 0; r < 3; ++r) {
		Vec row = vec_from_json(rot[static_cast<std::size_t>(r)], "pose.rotation");
		if (row.size() != 3)
			throw ParseError("pose.rotation", "expected a 3x3 array");
		pose.rotation.row(r) = row.transpose();
	}
	Vec t = vec_from_json(j["translation"], "pose.translation");
	if (t.size() != 2)
		throw ParseError("pose.translation", "expected two values");
	pose.translation = t;
	try {
		pose.validate();
	} catch (const std::invalid_argument& e) {
		throw ParseError("pose", e.what());
	}
	return pose;
}

json to_json(const Points2& points)
{
	json out = json::array();
	for (Eigen::Index i = 0; i < points.rows(); ++i)
		out.push_back({points(i, 0), points(i, 1)});
	return out;
}

Points2 points2_from_json(const json& j, const std::string& field)
{
	if (!j.is_array())
		throw ParseError(field, "expected an array of [x, y] pairs");
	Points2 pts(static_cast<Eigen::Index>(j.size()), 2);
	for (std::size_t i = 0; i < j.size(); ++i) {
		Vec p = vec_from_json(j[i], field);
		if (p.size() != 2)
			throw ParseError(field, "expected an array of [x, y] pairs");
		pts.row(static_cast<Eigen::Index>(i)) = p.transpose();
	}
	return pts;
}

json read_json(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw std::runtime_error("cannot open " + path.string());
	try {
		return json::parse(in);
	} catch (const json::parse_error& e) {
		throw ParseError(path.filename().string(), e.what());
	}
}

void write_json(const json& j, const std::filesystem::path& path)
{
	std::ofstream out(path, std::ios::trunc);
	if (!out)
		throw std::runtime_error("cannot write " + path.string());
	out << j.dump(2) << '\n';
}

} // namespace facecascade
