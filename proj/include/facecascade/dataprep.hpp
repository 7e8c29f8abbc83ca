#pragma once

#include "facecascade/model.hpp"

#include <filesystem>
#include <vector>

namespace facecascade {

struct PointCloud {
	Points3 points;
	/// Labeled 3D landmarks, one row per model landmark.
	Points3 landmark3d;
};

/// x -> scale * rotation * x + translation
struct RigidTransform3D {
	double scale = 1.0;
	Mat3 rotation = Mat3::Identity();
	Vec3 translation = Vec3::Zero();

	Points3 apply(const Points3& points) const;
	RigidTransform3D inverse() const;
};

/// Closed-form similarity alignment of `src` onto `dst` (k >= 3 rows, not
/// collinear). Throws DegenerateConfiguration.
RigidTransform3D procrustes3d(const Points3& src, const Points3& dst);

struct IcpConfig {
	int iterations = 30;
	double lambda1 = 0.5;
	double lambda2 = 0.5;
	double landmark_weight = 10.0;
	/// Correspondences farther than this multiple of the median distance are
	/// dropped each iteration.
	double outlier_factor = 3.0;
	double rel_tol = 1e-6;
	int threads = 1;
};

struct IcpResult {
	ShapeParams params;
	/// Maps model coordinates into the scan frame.
	RigidTransform3D transform;
	/// Scan-frame objective at the fresh correspondences of every iteration,
	/// starting with the landmark initialization.
	std::vector<double> residual_trace;
	/// Completed update iterations.
	int iterations = 0;
};

/// Landmark-initialized dense fit of the model to a scan. Scale is shared
/// between the transform and the parameters (the model is bilinear); the
/// returned split is the prior-optimal one (see prior_gauge). Throws
/// std::invalid_argument on an empty cloud.
IcpResult icp_fit(const BilinearModel& model, const PointCloud& cloud, const IcpConfig& config);

/// ASCII PLY, vertex x/y/z properties (other properties ignored).
Points3 read_ply(const std::filesystem::path& path);
void write_ply(const Points3& points, const std::filesystem::path& path);

/// JSON sidecar: {"landmarks": [[x, y, z], ...]} in landmark-index order.
Points3 read_landmarks3d(const std::filesystem::path& path);
void write_landmarks3d(const Points3& landmarks, const std::filesystem::path& path);

} // namespace facecascade
