#pragma once

#include "facecascade/types.hpp"

namespace facecascade {

/// Scaled orthographic camera: p = scale * R.topRows(2) * v + translation.
///
/// All pose math happens in a right-handed frame with y up. Image rows grow
/// downward, so pixel coordinates are converted with `frame_from_pixel` when
/// landmarks are ingested and back with `pixel_from_frame` whenever an image
/// is sampled or written.
struct CameraPose {
	double scale = 1.0;
	Mat3 rotation = Mat3::Identity();
	Vec2 translation = Vec2::Zero();

	/// Throws std::invalid_argument if the rotation is not orthonormal with
	/// det +1 (tolerance 1e-9) or scale is not positive.
	void validate() const;
};

inline Vec2 frame_from_pixel(const Vec2& pixel) { return {pixel.x(), -pixel.y()}; }
inline Vec2 pixel_from_frame(const Vec2& p) { return {p.x(), -p.y()}; }
Points2 frame_from_pixel(const Points2& pixels);
Points2 pixel_from_frame(const Points2& points);

Points2 project(const CameraPose& pose, const Points3& points);

/// Pose from 2D-3D correspondences (m >= 4, 3D points not collinear).
/// Planar 3D configurations have two exact solutions with det(R) = +1 and the
/// same r33: tilts by +theta and -theta about an in-plane axis image the plane
/// identically. The one with r1 . n >= 0 is returned, n being the plane normal
/// signed so that its largest-magnitude component is positive.
/// Throws DegenerateConfiguration.
CameraPose solve_pose(const Points2& points2d, const Points3& points3d);

/// Lowers sum ||l_i - scale * R.topRows(2) * v_i - t||^2 from `start` by
/// alternating between completing each 2D point with the depth of its current
/// model point and a 3D similarity alignment onto the completed points. Each
/// pass never increases the error; stops after `max_iterations` passes or
/// when the relative decrease falls below `rel_tol`.
CameraPose refine_pose(const Points2& points2d, const Points3& points3d, const CameraPose& start,
                       int max_iterations = 50, double rel_tol = 1e-12);

/// Closest rotation in Frobenius norm (orthogonal Procrustes with
/// determinant correction).
Mat3 nearest_rotation(const Mat3& m);

/// R = Rz(roll) * Rx(pitch) * Ry(yaw); angles in radians.
Mat3 rotation_from_euler(double yaw, double pitch, double roll);

} // namespace facecascade
