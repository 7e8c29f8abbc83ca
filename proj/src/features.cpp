#include "facecascade/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace facecascade {

void HogConfig::validate() const
{
	if (patch_size <= 0 || cell_size <= 0 || patch_size % cell_size != 0)
		throw std::invalid_argument("HOG patch_size must be a positive multiple of cell_size");
	if (block_cells <= 0 || block_cells > cells_per_side())
		throw std::invalid_argument("HOG block_cells must be in [1, cells per side]");
	if (block_stride_cells <= 0)
		throw std::invalid_argument("HOG block stride must be positive");
	if (orientation_bins <= 0)
		throw std::invalid_argument("HOG orientation_bins must be positive");
	if (!(clip > 0.0) || !(epsilon > 0.0))
		throw std::invalid_argument("HOG clip and epsilon must be positive");
	if (!(patch_reference_scale > 0.0))
		throw std::invalid_argument("patch_reference_scale must be positive");
}

Vec FeatureVector::joint() const
{
	Vec f(hog.size() + ld.size());
	f << hog, ld;
	return f;
}

Image extract_patch(const Image& image, const Vec2& center, int size)
{
	// Any center beyond this range yields a fully edge-replicated patch.
	auto safe = [](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, -1e9, 1e9); };
	const long cx = std::lround(safe(center.x()));
	const long cy = std::lround(safe(center.y()));
	const long x0 = cx - size / 2;
	const long y0 = cy - size / 2;
	Image patch(size, size);
	for (int y = 0; y < size; ++y) {
		const int sy = static_cast<int>(std::clamp<long>(y0 + y, 0, image.height - 1));
		for (int x = 0; x < size; ++x) {
			const int sx = static_cast<int>(std::clamp<long>(x0 + x, 0, image.width - 1));
			patch.at(x, y) = image.at(sx, sy);
		}
	}
	return patch;
}

namespace {

// Bilinear resampling of a (size * factor)-pixel window onto size x size.
Image extract_scaled_patch(const Image& image, const Vec2& center, int size, double factor)
{
	Image patch(size, size);
	for (int y = 0; y < size; ++y) {
		const double sy = center.y() + (y + 0.5 - 0.5 * size) * factor - 0.5;
		const int iy = static_cast<int>(std::floor(sy));
		const double fy = sy - iy;
		for (int x = 0; x < size; ++x) {
			const double sx = center.x() + (x + 0.5 - 0.5 * size) * factor - 0.5;
			const int ix = static_cast<int>(std::floor(sx));
			const double fx = sx - ix;
			patch.at(x, y) = (1 - fy) * ((1 - fx) * image.clamped(ix, iy) + fx * image.clamped(ix + 1, iy)) +
			                 fy * ((1 - fx) * image.clamped(ix, iy + 1) + fx * image.clamped(ix + 1, iy + 1));
		}
	}
	return patch;
}

void l2_normalize(double* v, int n, double eps)
{
	double sq = 0.0;
	for (int i = 0; i < n; ++i)
		sq += v[i] * v[i];
	const double inv = 1.0 / std::sqrt(sq + eps * eps);
	for (int i = 0; i < n; ++i)
		v[i] *= inv;
}

} // namespace

Vec hog_descriptor(const Image& patch, const HogConfig& config)
{
	config.validate();
	if (patch.width != config.patch_size || patch.height != config.patch_size)
		throw std::invalid_argument("hog_descriptor: patch size does not match config");

	const int size = config.patch_size;
	const int cells = config.cells_per_side();
	const int bins = config.orientation_bins;
	const double bin_width = std::numbers::pi / bins;
	std::vector<double> hist(static_cast<std::size_t>(cells) * cells * bins, 0.0);

	for (int y = 0; y < size; ++y) {
		for (int x = 0; x < size; ++x) {
			double gx = patch.clamped(x + 1, y) - patch.clamped(x - 1, y);
			double gy = patch.clamped(x, y + 1) - patch.clamped(x, y - 1);
			// Fold into the upper half-plane so opposite gradients share an
			// orientation exactly.
			if (gy < 0.0 || (gy == 0.0 && gx < 0.0)) {
				gx = -gx;
				gy = -gy;
			}
			const double mag = std::sqrt(gx * gx + gy * gy);
			if (mag == 0.0)
				continue;
			double angle = std::atan2(gy, gx);
			if (angle >= std::numbers::pi)
				angle = 0.0;
			const double pos = angle / bin_width - 0.5;
			const double lo = std::floor(pos);
			const double frac = pos - lo;
			const int b0 = (static_cast<int>(lo) + bins) % bins;
			const int b1 = (b0 + 1) % bins;
			double* h = &hist[(static_cast<std::size_t>(y / config.cell_size) * cells + x / config.cell_size) * bins];
			h[b0] += mag * (1.0 - frac);
			h[b1] += mag * frac;
		}
	}

	const int nb = config.blocks_per_side();
	const int bc = config.block_cells;
	const int block_len = bc * bc * bins;
	Vec out(config.descriptor_size());
	for (int by = 0; by < nb; ++by) {
		for (int bx = 0; bx < nb; ++bx) {
			double* block = out.data() + static_cast<std::size_t>(by * nb + bx) * block_len;
			int k = 0;
			for (int cy = 0; cy < bc; ++cy)
				for (int cx = 0; cx < bc; ++cx) {
					const int cell_y = by * config.block_stride_cells + cy;
					const int cell_x = bx * config.block_stride_cells + cx;
					const double* h = &hist[(static_cast<std::size_t>(cell_y) * cells + cell_x) * bins];
					for (int b = 0; b < bins; ++b)
						block[k++] = h[b];
				}
			l2_normalize(block, block_len, config.epsilon);
			for (int i = 0; i < block_len; ++i)
				block[i] = std::min(block[i], config.clip);
			l2_normalize(block, block_len, config.epsilon);
		}
	}
	return out;
}

Vec ld_feature(const LandmarkSet& landmarks, const Points2& projections, double scale)
{
	if (landmarks.points.rows() != projections.rows())
		throw std::invalid_argument("ld_feature: landmark and projection counts differ");
	if (!(scale > 0.0))
		throw std::invalid_argument("ld_feature: scale must be positive");
	Vec u(2 * projections.rows());
	for (Eigen::Index i = 0; i < projections.rows(); ++i) {
		u[2 * i] = (landmarks.points(i, 0) - projections(i, 0)) / scale;
		u[2 * i + 1] = (landmarks.points(i, 1) - projections(i, 1)) / scale;
	}
	return u;
}

FeatureVector joint_feature(const Image& image, const BilinearModel& model, const ShapeParams& params,
                            const CameraPose& pose, const LandmarkSet& landmarks, const HogConfig& config)
{
	config.validate();
	image.validate();
	if (static_cast<std::size_t>(landmarks.points.rows()) != model.num_landmarks())
		throw std::invalid_argument("joint_feature: landmark count does not match model");

	const Points2 proj = project(pose, landmark_positions(model, params));
	const Eigen::Index n_lm = proj.rows();
	const int dim = config.descriptor_size();
	FeatureVector f;
	f.hog.resize(n_lm * dim);
	for (Eigen::Index i = 0; i < n_lm; ++i) {
		const Vec2 center = pixel_from_frame(Vec2(proj.row(i).transpose()));
		const Image patch =
			config.scale_patch
				? extract_scaled_patch(image, center, config.patch_size, pose.scale / config.patch_reference_scale)
				: extract_patch(image, center, config.patch_size);
		f.hog.segment(i * dim, dim) = hog_descriptor(patch, config);
	}
	f.ld = ld_feature(landmarks, proj, config.normalize_ld ? pose.scale : 1.0);
	return f;
}

} // namespace facecascade
