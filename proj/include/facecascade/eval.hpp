#pragma once

#include "facecascade/model.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace facecascade {

struct RegionMask {
	std::string name;
	std::vector<std::uint32_t> indices;

	/// Throws std::invalid_argument if empty or out of range.
	void validate(std::size_t n_vertices) const;
};

RegionMask whole_mask(std::size_t n_vertices);

/// Vertices within `radius_fraction` of the bounding-sphere radius of `shape`
/// from the centroid of the nose region. The nose region is the set of
/// landmark vertices closest to the landmark centroid (`nose_landmarks` of
/// them), unless `nose_vertices` is given explicitly.
RegionMask center_mask(const BilinearModel& model, const Shape& shape, double radius_fraction = 0.6,
                       std::size_t nose_landmarks = 9, const std::vector<std::uint32_t>& nose_vertices = {});

/// Root mean squared z difference over the mask.
double rmse_z(const Shape& gt, const Shape& rec, const RegionMask& mask);
/// Mean per-vertex Euclidean distance over the mask.
double mae(const Shape& gt, const Shape& rec, const RegionMask& mask);
/// Per-vertex Euclidean distances (all vertices).
Vec vertex_errors(const Shape& gt, const Shape& rec);

/// Similarity-aligns `rec` onto `gt` over the mask vertices (optional
/// cross-source comparison).
Shape procrustes_align(const Shape& gt, const Shape& rec, const RegionMask& mask);

/// Fraction of errors <= each threshold.
std::vector<double> ced(const std::vector<double>& errors, const std::vector<double>& thresholds);

struct ClassTable {
	/// Sorted by label.
	std::map<std::string, double> mean;
	std::map<std::string, std::size_t> count;
	double overall_mean = 0;
	/// max over class pairs of |m_i - m_j| / min(m_i, m_j).
	double max_relative_difference = 0;
};

ClassTable aggregate_by_class(const std::vector<double>& errors, const std::vector<std::string>& labels);

struct SampleMetrics {
	std::string id;
	std::string split;
	std::string yaw_class;
	std::string expression_class;
	double rmse_center = 0;
	double rmse_whole = 0;
	double mae_center = 0;
	double mae_whole = 0;
	/// Landmark-fit-only (cascade initialization) MAE over the whole face.
	double mae_init = 0;
};

void write_sample_csv(const std::vector<SampleMetrics>& rows, const std::filesystem::path& path);
void write_class_csv(const ClassTable& table, const std::string& label_kind, const std::filesystem::path& path);
void write_ced_csv(const std::vector<double>& thresholds, const std::vector<double>& fractions,
                   const std::filesystem::path& path);
void write_vertex_error_csv(const Shape& gt, const Shape& rec, const std::filesystem::path& path);

} // namespace facecascade
