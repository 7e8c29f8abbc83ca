#pragma once

#include "facecascade/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace fctest {

using namespace facecascade;

/// Random dense model with landmarks on the first `n_landmarks` vertices.
inline BilinearModel random_model(std::mt19937_64& rng, std::uint32_t n, std::uint32_t d_id, std::uint32_t d_exp,
                                  std::uint32_t n_landmarks = 0)
{
	std::normal_distribution<double> g;
	std::uniform_real_distribution<double> u(0.5, 2.0);
	BilinearModel m;
	m.n_vertices = n;
	m.d_id = d_id;
	m.d_exp = d_exp;
	m.core.resize(3 * static_cast<std::size_t>(n) * d_id * d_exp);
	for (auto& c : m.core)
		c = g(rng);
	m.mu_id = Vec::NullaryExpr(d_id, [&] { return g(rng); });
	m.mu_exp = Vec::NullaryExpr(d_exp, [&] { return g(rng); });
	m.var_id = Vec::NullaryExpr(d_id, [&] { return u(rng); });
	m.var_exp = Vec::NullaryExpr(d_exp, [&] { return u(rng); });
	for (std::uint32_t i = 0; i < n_landmarks && i < n; ++i)
		m.landmark_indices.push_back(i);
	return m;
}

inline ShapeParams random_params(std::mt19937_64& rng, const BilinearModel& m)
{
	std::normal_distribution<double> g;
	return {Vec::NullaryExpr(m.d_id, [&] { return g(rng); }), Vec::NullaryExpr(m.d_exp, [&] { return g(rng); })};
}

/// Random rotation from a normalized Gaussian quaternion.
inline Mat3 random_rotation(std::mt19937_64& rng)
{
	std::normal_distribution<double> g;
	Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
	q.normalize();
	return q.toRotationMatrix();
}

inline double max_rel_diff(const Mat& a, const Mat& b)
{
	const double scale = std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
	return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
	const auto dir = std::filesystem::temp_directory_path() / ("facecascade_test_" + name);
	std::filesystem::remove_all(dir);
	std::filesystem::create_directories(dir);
	return dir;
}

inline std::vector<char> file_bytes(const std::filesystem::path& p)
{
	std::ifstream in(p, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace fctest
