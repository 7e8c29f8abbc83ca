#include "facecascade/eval.hpp"

#include "facecascade/dataprep.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace facecascade {

void RegionMask::validate(std::size_t n_vertices) const
{
	if (indices.empty())
		throw std::invalid_argument("region mask '" + name + "' is empty");
	for (std::uint32_t i : indices)
		if (i >= n_vertices)
			throw std::invalid_argument("region mask '" + name + "' index out of range");
}

RegionMask whole_mask(std::size_t n_vertices)
{
	RegionMask m{"whole", std::vector<std::uint32_t>(n_vertices)};
	std::iota(m.indices.begin(), m.indices.end(), 0u);
	return m;
}

RegionMask center_mask(const BilinearModel& model, const Shape& shape, double radius_fraction,
                       std::size_t nose_landmarks, const std::vector<std::uint32_t>& nose_vertices)
{
	const Points3& p = shape.positions;
	if (static_cast<std::size_t>(p.rows()) != model.n_vertices)
		throw std::invalid_argument("center_mask: shape does not match model");

	std::vector<std::uint32_t> nose = nose_vertices;
	if (nose.empty()) {
		if (model.num_landmarks() == 0)
			throw std::invalid_argument("center_mask: model has no landmarks");
		Eigen::RowVector3d lc = Eigen::RowVector3d::Zero();
		for (std::uint32_t i : model.landmark_indices)
			lc += p.row(i);
		lc /= static_cast<double>(model.num_landmarks());
		nose = model.landmark_indices;
		std::stable_sort(nose.begin(), nose.end(), [&](std::uint32_t a, std::uint32_t b) {
			return (p.row(a) - lc).head<2>().squaredNorm() < (p.row(b) - lc).head<2>().squaredNorm();
		});
		nose.resize(std::min(std::max<std::size_t>(nose_landmarks, 1), nose.size()));
	}
	Eigen::RowVector3d nc = Eigen::RowVector3d::Zero();
	for (std::uint32_t i : nose) {
		if (i >= model.n_vertices)
			throw std::invalid_argument("center_mask: nose vertex out of range");
		nc += p.row(i);
	}
	nc /= static_cast<double>(nose.size());

	const Eigen::RowVector3d centroid = p.colwise().mean();
	const double radius = (p.rowwise() - centroid).rowwise().norm().maxCoeff();
	const double limit = radius_fraction * radius;

	RegionMask m{"center", {}};
	for (std::uint32_t i = 0; i < model.n_vertices; ++i)
		if ((p.row(i) - nc).norm() <= limit)
			m.indices.push_back(i);
	m.validate(model.n_vertices);
	return m;
}

namespace {

void check_pair(const Shape& gt, const Shape& rec, const RegionMask& mask)
{
	if (gt.positions.rows() != rec.positions.rows())
		throw std::invalid_argument("vertex count mismatch between ground truth and reconstruction");
	mask.validate(static_cast<std::size_t>(gt.positions.rows()));
}

} // namespace

double rmse_z(const Shape& gt, const Shape& rec, const RegionMask& mask)
{
	check_pair(gt, rec, mask);
	double sum = 0.0;
	for (std::uint32_t i : mask.indices) {
		const double d = gt.positions(i, 2) - rec.positions(i, 2);
		sum += d * d;
	}
	return std::sqrt(sum / static_cast<double>(mask.indices.size()));
}

double mae(const Shape& gt, const Shape& rec, const RegionMask& mask)
{
	check_pair(gt, rec, mask);
	double sum = 0.0;
	for (std::uint32_t i : mask.indices)
		sum += (gt.positions.row(i) - rec.positions.row(i)).norm();
	return sum / static_cast<double>(mask.indices.size());
}

Vec vertex_errors(const Shape& gt, const Shape& rec)
{
	if (gt.positions.rows() != rec.positions.rows())
		throw std::invalid_argument("vertex count mismatch between ground truth and reconstruction");
	return (gt.positions - rec.positions).rowwise().norm();
}

Shape procrustes_align(const Shape& gt, const Shape& rec, const RegionMask& mask)
{
	check_pair(gt, rec, mask);
	Points3 src(static_cast<Eigen::Index>(mask.indices.size()), 3);
	Points3 dst(src.rows(), 3);
	for (std::size_t k = 0; k < mask.indices.size(); ++k) {
		src.row(static_cast<Eigen::Index>(k)) = rec.positions.row(mask.indices[k]);
		dst.row(static_cast<Eigen::Index>(k)) = gt.positions.row(mask.indices[k]);
	}
	return Shape{procrustes3d(src, dst).apply(rec.positions)};
}

std::vector<double> ced(const std::vector<double>& errors, const std::vector<double>& thresholds)
{
	if (errors.empty())
		throw std::invalid_argument("ced: no errors");
	std::vector<double> sorted = errors;
	std::sort(sorted.begin(), sorted.end());
	std::vector<double> out;
	out.reserve(thresholds.size());
	for (double t : thresholds) {
		const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
		out.push_back(static_cast<double>(n) / static_cast<double>(sorted.size()));
	}
	return out;
}

ClassTable aggregate_by_class(const std::vector<double>& errors, const std::vector<std::string>& labels)
{
	if (errors.size() != labels.size())
		throw std::invalid_argument("aggregate_by_class: errors and labels differ in length");
	if (errors.empty())
		throw std::invalid_argument("aggregate_by_class: no samples");
	ClassTable t;
	std::map<std::string, double> sum;
	for (std::size_t i = 0; i < errors.size(); ++i) {
		sum[labels[i]] += errors[i];
		++t.count[labels[i]];
	}
	for (const auto& [label, s] : sum)
		t.mean[label] = s / static_cast<double>(t.count[label]);
	t.overall_mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());

	for (auto a = t.mean.begin(); a != t.mean.end(); ++a) {
		for (auto b = std::next(a); b != t.mean.end(); ++b) {
			const double lo = std::min(a->second, b->second), hi = std::max(a->second, b->second);
			double rel = 0.0;
			if (hi > lo)
				rel = lo > 0.0 ? (hi - lo) / lo : std::numeric_limits<double>::infinity();
			t.max_relative_difference = std::max(t.max_relative_difference, rel);
		}
	}
	return t;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path)
{
	std::ofstream out(path);
	if (!out)
		throw std::runtime_error("cannot write " + path.string());
	return out;
}

} // namespace

void write_sample_csv(const std::vector<SampleMetrics>& rows, const std::filesystem::path& path)
{
	auto out = open_csv(path);
	out << "id,split,yaw_class,expression_class,rmse_center,rmse_whole,mae_center,mae_whole,mae_init\n";
	for (const auto& r : rows)
		out << fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.id, r.split, r.yaw_class,
		                   r.expression_class, r.rmse_center, r.rmse_whole, r.mae_center, r.mae_whole, r.mae_init);
}

void write_class_csv(const ClassTable& table, const std::string& label_kind, const std::filesystem::path& path)
{
	auto out = open_csv(path);
	out << label_kind << ",count,mean\n";
	for (const auto& [label, m] : table.mean)
		out << fmt::format("{},{},{:.17g}\n", label, table.count.at(label), m);
	out << fmt::format("overall,{},{:.17g}\n", std::accumulate(table.count.begin(), table.count.end(), std::size_t{0},
	                                                          [](std::size_t s, const auto& kv) { return s + kv.second; }),
	                   table.overall_mean);
	out << fmt::format("max_relative_difference,,{:.17g}\n", table.max_relative_difference);
}

void write_ced_csv(const std::vector<double>& thresholds, const std::vector<double>& fractions,
                   const std::filesystem::path& path)
{
	if (thresholds.size() != fractions.size())
		throw std::invalid_argument("write_ced_csv: size mismatch");
	auto out = open_csv(path);
	out << "threshold,fraction\n";
	for (std::size_t i = 0; i < thresholds.size(); ++i)
		out << fmt::format("{:.17g},{:.17g}\n", thresholds[i], fractions[i]);
}

void write_vertex_error_csv(const Shape& gt, const Shape& rec, const std::filesystem::path& path)
{
	const Vec e = vertex_errors(gt, rec);
	auto out = open_csv(path);
	out << "vertex,error\n";
	for (Eigen::Index i = 0; i < e.size(); ++i)
		out << fmt::format("{},{:.17g}\n", i, e[i]);
}

} // namespace facecascade
