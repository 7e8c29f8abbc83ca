#pragma once

#include "facecascade/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace facecascade {

using Triangle = std::array<std::uint32_t, 3>;

/**
 * Bilinear identity x expression shape model.
 *
 * The core tensor has shape (3n) x d_id x d_exp and is stored contiguously
 * with the first mode fastest: element (r, a, e) lives at
 * r + 3n * (a + d_id * e), where r runs over x0, y0, z0, x1, ... Contracting
 * the expression mode first therefore leaves a column-major (3n) x d_id
 * matrix, the identity basis for that expression.
 */
struct BilinearModel {
	std::uint32_t n_vertices = 0;
	std::uint32_t d_id = 0;
	std::uint32_t d_exp = 0;
	std::vector<double> core;
	Vec mu_id;
	Vec mu_exp;
	Vec var_id;
	Vec var_exp;
	std::vector<std::uint32_t> landmark_indices;
	std::vector<Triangle> faces;

	std::size_t rows() const { return 3 * static_cast<std::size_t>(n_vertices); }
	std::size_t num_landmarks() const { return landmark_indices.size(); }
	std::size_t num_params() const { return static_cast<std::size_t>(d_id) + d_exp; }

	double core_at(std::size_t r, std::size_t a, std::size_t e) const
	{
		return core[r + rows() * (a + d_id * e)];
	}

	/// Throws std::invalid_argument describing the first violated invariant.
	void validate() const;

	bool operator==(const BilinearModel&) const = default;
};

struct ShapeParams {
	Vec alpha;
	Vec beta;

	/// g = [alpha; beta]
	Vec stacked() const;
	static ShapeParams from_stacked(const BilinearModel& model, const Vec& g);
	static ShapeParams mean(const BilinearModel& model);

	bool operator==(const ShapeParams&) const = default;
};

struct Shape {
	Points3 positions;
};

void check_params(const BilinearModel& model, const ShapeParams& params);

Shape synthesize(const BilinearModel& model, const ShapeParams& params);

Vec3 vertex_position(const BilinearModel& model, const ShapeParams& params, std::size_t i);

/// Rows are the landmark vertices in landmark_indices order.
Points3 landmark_positions(const BilinearModel& model, const ShapeParams& params);

/// (3n) x d_id matrix B with B * alpha == flatten(synthesize(alpha, beta)).
Mat shape_basis_id(const BilinearModel& model, const Vec& beta);

/// (3n) x d_exp matrix E with E * beta == flatten(synthesize(alpha, beta)).
Mat shape_basis_exp(const BilinearModel& model, const Vec& alpha);

/// Restrictions of the bases above to a vertex subset: row 3k + c belongs to
/// coordinate c of vertices[k].
Mat shape_basis_id(const BilinearModel& model, const Vec& beta, std::span<const std::uint32_t> vertices);
Mat shape_basis_exp(const BilinearModel& model, const Vec& alpha, std::span<const std::uint32_t> vertices);

/// The shape is bilinear, so (s1 alpha, s2 beta) synthesizes s1 * s2 times
/// the shape of (alpha, beta). Returns the point of that two-parameter orbit
/// closest to the prior means in Mahalanobis distance, and the factor s1 * s2
/// through `shape_scale`. Factors that are not positive are replaced by 1.
ShapeParams prior_gauge(const BilinearModel& model, const ShapeParams& params, double* shape_scale = nullptr);

/// Row-major (x0, y0, z0, x1, ...) flattening of a shape.
Vec flatten(const Shape& shape);

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Writes the binary container and a JSON sidecar at `path` + ".json".
void save_model(const BilinearModel& model, const std::filesystem::path& path);
BilinearModel load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_model(const BilinearModel& model);
BilinearModel deserialize_model(std::span<const std::uint8_t> bytes);

/// 64-bit FNV-1a over the serialized model.
std::uint64_t model_fingerprint(const BilinearModel& model);

} // namespace facecascade
