#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace facecascade {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// m x 2 array of image-plane points, one point per row.
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;
/// m x 3 array of 3D points, one point per row.
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// 2D and 3D point sets do not span enough dimensions to determine a pose
/// or alignment.
class DegenerateConfiguration : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// A normal matrix was singular (only reachable with zero regularization).
class NumericalRankError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Malformed input file. `field()` names the element that failed to parse.
class ParseError : public std::runtime_error {
public:
	ParseError(std::string field, const std::string& what)
		: std::runtime_error(what + " (field: " + field + ")"), field_(std::move(field)) {}
	const std::string& field() const noexcept { return field_; }

private:
	std::string field_;
};

/// File written by an incompatible format version.
class VersionError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Cascade trained against a different model than the one supplied.
class FingerprintMismatch : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

} // namespace facecascade
