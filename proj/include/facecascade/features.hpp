#pragma once

#include "facecascade/camera.hpp"
#include "facecascade/image.hpp"
#include "facecascade/landmark_fit.hpp"
#include "facecascade/model.hpp"

namespace facecascade {

struct HogConfig {
	int patch_size = 64;
	int cell_size = 8;
	int block_cells = 2;
	int block_stride_cells = 1;
	int orientation_bins = 9;
	double clip = 0.2;
	double epsilon = 1e-6;
	/// Divide landmark displacements by the pose scale.
	bool normalize_ld = true;
	/// Sample patch_size * pose.scale / patch_reference_scale pixels and
	/// resample to patch_size. Off: fixed patch_size pixels.
	bool scale_patch = false;
	double patch_reference_scale = 1.0;

	void validate() const;
	int cells_per_side() const { return patch_size / cell_size; }
	int blocks_per_side() const { return (cells_per_side() - block_cells) / block_stride_cells + 1; }
	/// Descriptor length for one patch (1764 with defaults).
	int descriptor_size() const
	{
		return blocks_per_side() * blocks_per_side() * block_cells * block_cells * orientation_bins;
	}

	bool operator==(const HogConfig&) const = default;
};

struct FeatureVector {
	Vec hog;
	Vec ld;

	/// [hog; ld]
	Vec joint() const;
};

/// Row-major size x size crop centered at the rounded pixel `center`
/// (x right, y down), edge-replicated outside the image.
Image extract_patch(const Image& image, const Vec2& center, int size);

Vec hog_descriptor(const Image& patch, const HogConfig& config);

/// Stacks (l_i - p_i) per landmark, divided by `scale` (pass 1 for raw
/// pixels).
Vec ld_feature(const LandmarkSet& landmarks, const Points2& projections, double scale = 1.0);

FeatureVector joint_feature(const Image& image, const BilinearModel& model, const ShapeParams& params,
                            const CameraPose& pose, const LandmarkSet& landmarks, const HogConfig& config);

} // namespace facecascade
