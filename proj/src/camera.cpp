#include "facecascade/camera.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <limits>

namespace facecascade {

void CameraPose::validate() const
{
	if (!(scale > 0.0) || !std::isfinite(scale))
		throw std::invalid_argument("camera scale must be positive and finite");
	if (!rotation.allFinite() || !translation.allFinite())
		throw std::invalid_argument("camera pose must be finite");
	if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
		throw std::invalid_argument("camera rotation is not orthonormal");
	if (std::abs(rotation.determinant() - 1.0) > 1e-9)
		throw std::invalid_argument("camera rotation must have determinant +1");
}

Points2 frame_from_pixel(const Points2& pixels)
{
	Points2 out = pixels;
	out.col(1) = -pixels.col(1);
	return out;
}

Points2 pixel_from_frame(const Points2& points)
{
	return frame_from_pixel(points);
}

Points2 project(const CameraPose& pose, const Points3& points)
{
	const Eigen::Matrix<double, 2, 3> m = pose.scale * pose.rotation.topRows<2>();
	Points2 out(points.rows(), 2);
	for (Eigen::Index i = 0; i < points.rows(); ++i)
		out.row(i) = (m * points.row(i).transpose() + pose.translation).transpose();
	return out;
}

Mat3 nearest_rotation(const Mat3& m)
{
	if (!m.allFinite())
		throw std::invalid_argument("nearest_rotation: non-finite input");
	Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
	const Mat3& u = svd.matrixU();
	const Mat3& v = svd.matrixV();
	Mat3 d = Mat3::Identity();
	d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
	return u * d * v.transpose();
}

Mat3 rotation_from_euler(double yaw, double pitch, double roll)
{
	const double cy = std::cos(yaw), sy = std::sin(yaw);
	const double cp = std::cos(pitch), sp = std::sin(pitch);
	const double cr = std::cos(roll), sr = std::sin(roll);
	Mat3 ry, rx, rz;
	ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
	rx << 1, 0, 0, 0, cp, -sp, 0, sp, cp;
	rz << cr, -sr, 0, sr, cr, 0, 0, 0, 1;
	return rz * rx * ry;
}

namespace {

// Rows m1, m2 of the 2x3 affine map -> (scale, rotation).
std::pair<double, Mat3> rotation_from_rows(const Vec3& m1, const Vec3& m2)
{
	const double n1 = m1.norm(), n2 = m2.norm();
	if (!(n1 > 0.0) || !(n2 > 0.0))
		throw DegenerateConfiguration("solve_pose: projection collapses to a point");
	Mat3 stacked;
	const Vec3 r1 = m1 / n1;
	const Vec3 r2 = m2 / n2;
	Vec3 r3 = r1.cross(r2);
	const double n3 = r3.norm();
	if (!(n3 > 0.0))
		throw DegenerateConfiguration("solve_pose: image rows are parallel");
	r3 /= n3;
	stacked.row(0) = r1.transpose();
	stacked.row(1) = r2.transpose();
	stacked.row(2) = r3.transpose();
	return {0.5 * (n1 + n2), nearest_rotation(stacked)};
}

} // namespace

CameraPose solve_pose(const Points2& points2d, const Points3& points3d)
{
	const Eigen::Index m = points3d.rows();
	if (points2d.rows() != m)
		throw std::invalid_argument("solve_pose: point count mismatch");
	if (m < 4)
		throw DegenerateConfiguration("solve_pose: at least 4 correspondences are required");
	if (!points2d.allFinite() || !points3d.allFinite())
		throw std::invalid_argument("solve_pose: non-finite input");

	const Eigen::RowVector3d c3 = points3d.colwise().mean();
	const Eigen::RowVector2d c2 = points2d.colwise().mean();
	const Points3 v = points3d.rowwise() - c3;
	const Points2 l = points2d.rowwise() - c2;

	Eigen::SelfAdjointEigenSolver<Mat3> eig(v.transpose() * v);
	const Vec3 ev = eig.eigenvalues(); // ascending
	if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2])
		throw DegenerateConfiguration("solve_pose: 3D points are coincident or collinear");

	double scale = 0.0;
	Mat3 rotation;
	if (ev[0] > 1e-14 * ev[2]) {
		// Full-rank: least-squares 2x3 affine map, v * M^T = l.
		const Eigen::Matrix<double, 3, 2> mt = v.colPivHouseholderQr().solve(l);
		std::tie(scale, rotation) = rotation_from_rows(mt.col(0), mt.col(1));
	} else {
		// Planar: the map is only observed inside the plane. Complete each row
		// with a normal component so the rows are orthogonal and of equal
		// length; this has two solutions related by a depth flip.
		const Vec3 e1 = eig.eigenvectors().col(2);
		const Vec3 e2 = eig.eigenvectors().col(1);
		Vec3 normal = eig.eigenvectors().col(0);
		Eigen::Index big = 0;
		normal.cwiseAbs().maxCoeff(&big);
		if (normal[big] < 0.0)
			normal = -normal;
		Eigen::Matrix<double, Eigen::Dynamic, 2> vp(m, 2);
		vp.col(0) = v * e1;
		vp.col(1) = v * e2;
		const Eigen::Matrix2d mp = vp.colPivHouseholderQr().solve(l).transpose();
		const Eigen::Vector2d q1 = mp.row(0).transpose(), q2 = mp.row(1).transpose();
		const std::complex<double> w2(q2.squaredNorm() - q1.squaredNorm(), -2.0 * q1.dot(q2));
		// The square root amplifies rounding near zero tilt; snap that to exactly frontal.
		const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (q1.squaredNorm() + q2.squaredNorm());
		const std::complex<double> w = std::abs(w2) <= noise ? std::complex<double>() : std::sqrt(w2);
		const Vec3 base1 = q1[0] * e1 + q1[1] * e2;
		const Vec3 base2 = q2[0] * e1 + q2[1] * e2;
		auto [s_plus, r_plus] = rotation_from_rows(base1 + w.real() * normal, base2 + w.imag() * normal);
		auto [s_minus, r_minus] = rotation_from_rows(base1 - w.real() * normal, base2 - w.imag() * normal);
		// Both candidates share r33 up to rounding (a tilt by +theta or
		// -theta about an in-plane axis images the plane identically); on a
		// tie keep the one with r1 . normal >= 0.
		if (r_minus(2, 2) > r_plus(2, 2) + 1e-12) {
			scale = s_minus;
			rotation = r_minus;
		} else {
			scale = s_plus;
			rotation = r_plus;
		}
	}

	CameraPose pose;
	pose.scale = scale;
	pose.rotation = rotation;
	pose.translation = c2.transpose() - scale * rotation.topRows<2>() * c3.transpose();
	return pose;
}

namespace {

double projection_error(const CameraPose& pose, const Points2& points2d, const Points3& points3d)
{
	return (points2d - project(pose, points3d)).squaredNorm();
}

} // namespace

CameraPose refine_pose(const Points2& points2d, const Points3& points3d, const CameraPose& start, int max_iterations,
                       double rel_tol)
{
	if (points2d.rows() != points3d.rows())
		throw std::invalid_argument("refine_pose: point count mismatch");
	const Eigen::Index m = points3d.rows();
	const Eigen::RowVector3d c3 = points3d.colwise().mean();
	const Points3 v = points3d.rowwise() - c3;
	const double spread = v.squaredNorm();
	if (!(spread > 0.0))
		throw DegenerateConfiguration("refine_pose: 3D points are coincident");

	CameraPose pose = start;
	double error = projection_error(pose, points2d, points3d);
	for (int it = 0; it < max_iterations; ++it) {
		// Completed targets: observed x, y and the current model depth.
		Points3 q(m, 3);
		q.leftCols<2>() = points2d;
		q.col(2) = pose.scale * (points3d * pose.rotation.row(2).transpose());
		const Eigen::RowVector3d cq = q.colwise().mean();
		const Mat3 h = (q.rowwise() - cq).transpose() * v;
		CameraPose next;
		next.rotation = nearest_rotation(h);
		next.scale = (next.rotation.transpose() * h).trace() / spread;
		if (!(next.scale > 0.0))
			break;
		next.translation = (cq.transpose() - next.scale * next.rotation * c3.transpose()).head<2>();
		const double next_error = projection_error(next, points2d, points3d);
		if (!(next_error <= error))
			break;
		const double drop = error - next_error;
		pose = next;
		error = next_error;
		if (drop <= rel_tol * std::max(error, 1e-300))
			break;
	}
	return pose;
}

} // namespace facecascade
