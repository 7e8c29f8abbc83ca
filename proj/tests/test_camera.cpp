#include "support.hpp"

#include "facecascade/camera.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace facecascade;

namespace {

Points3 random_points(std::mt19937_64& rng, int m)
{
	std::normal_distribution<double> g;
	return Points3::NullaryExpr(m, 3, [&] { return g(rng); });
}

CameraPose random_pose(std::mt19937_64& rng)
{
	std::uniform_real_distribution<double> s(0.5, 200.0), t(-300.0, 300.0);
	CameraPose p;
	p.scale = s(rng);
	p.rotation = fctest::random_rotation(rng);
	p.translation = Vec2(t(rng), t(rng));
	return p;
}

} // namespace

TEST_CASE("project hand examples")
{
	Points3 p(1, 3);
	p << 3, 4, 7;
	CHECK(project(CameraPose{}, p).row(0) == Eigen::RowVector2d(3, 4));

	CameraPose c;
	c.scale = 2;
	c.translation = Vec2(10, 20);
	p << 1, 1, 5;
	CHECK(project(c, p).row(0) == Eigen::RowVector2d(12, 22));

	// Rotation by +90 degrees about y, composed by hand: x -> -z, z -> x.
	Mat3 ry;
	ry << 0, 0, 1, 0, 1, 0, -1, 0, 0;
	CHECK((rotation_from_euler(std::numbers::pi / 2, 0, 0) - ry).cwiseAbs().maxCoeff() <= 1e-15);
	Points3 q(2, 3);
	q << 1, 0, 0, 0, 0, 1;
	CameraPose yaw;
	yaw.rotation = ry;
	const Points2 out = project(yaw, q);
	CHECK(std::abs(out(0, 0)) <= 1e-15); // x axis now points along the depth axis
	CHECK(out(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("pixel frame conversion flips y")
{
	CHECK(frame_from_pixel(Vec2(3, 5)) == Vec2(3, -5));
	CHECK(pixel_from_frame(frame_from_pixel(Vec2(-2, 7))) == Vec2(-2, 7));
}

TEST_CASE("solve_pose recovers random poses")
{
	std::mt19937_64 rng(11);
	for (int t = 0; t < 200; ++t) {
		const Points3 pts = random_points(rng, 4 + t % 30);
		const CameraPose truth = random_pose(rng);
		const Points2 obs = project(truth, pts);
		const CameraPose est = solve_pose(obs, pts);
		CHECK((est.rotation - truth.rotation).cwiseAbs().maxCoeff() <= 1e-8);
		CHECK(std::abs(est.scale - truth.scale) / truth.scale <= 1e-8);
		CHECK((est.translation - truth.translation).norm() <= 1e-6);
		CHECK((project(est, pts) - obs).rowwise().norm().maxCoeff() <= 1e-6);
		CHECK_NOTHROW(est.validate());
	}
}

TEST_CASE("solve_pose on planar point sets")
{
	std::mt19937_64 rng(12);
	std::uniform_real_distribution<double> u(-1, 1), small(-0.5, 0.5);
	Eigen::DiagonalMatrix<double, 3> flip(1, 1, -1);
	for (int t = 0; t < 50; ++t) {
		Points3 pts(8, 3);
		for (int i = 0; i < 8; ++i)
			pts.row(i) << u(rng), u(rng), 0.0;

		// Frontal (in-plane roll only): unique and exact.
		CameraPose frontal;
		frontal.scale = 3.0;
		frontal.rotation = rotation_from_euler(0, 0, 3 * small(rng));
		frontal.translation = Vec2(u(rng), u(rng)) * 50;
		const CameraPose ef = solve_pose(project(frontal, pts), pts);
		CHECK((ef.rotation - frontal.rotation).cwiseAbs().maxCoeff() <= 1e-8);
		CHECK(std::abs(ef.scale - 3.0) <= 1e-8);
		CHECK((ef.translation - frontal.translation).norm() <= 1e-6);

		// Tilted: the truth or its mirror tilt, both reprojecting exactly.
		CameraPose truth = frontal;
		truth.rotation = rotation_from_euler(small(rng), small(rng), small(rng));
		const Points2 obs = project(truth, pts);
		const CameraPose est = solve_pose(obs, pts);
		const Mat3 mirror = flip * truth.rotation * flip;
		const double err = std::min((est.rotation - truth.rotation).cwiseAbs().maxCoeff(),
		                            (est.rotation - mirror).cwiseAbs().maxCoeff());
		CHECK(err <= 1e-8);
		CHECK(std::abs(est.rotation(2, 2) - truth.rotation(2, 2)) <= 1e-8);
		CHECK(est.rotation(0, 2) >= -1e-12); // plane normal is +z here
		CHECK((project(est, pts) - obs).cwiseAbs().maxCoeff() <= 1e-6);
	}
}

TEST_CASE("solve_pose degenerate inputs")
{
	Points3 same = Points3::Ones(6, 3);
	Points2 obs = Points2::Random(6, 2);
	CHECK_THROWS_AS(solve_pose(obs, same), DegenerateConfiguration);

	Points3 line(6, 3);
	for (int i = 0; i < 6; ++i)
		line.row(i) << i, 2.0 * i, -i;
	CHECK_THROWS_AS(solve_pose(obs, line), DegenerateConfiguration);

	std::mt19937_64 rng(13);
	const Points3 three = random_points(rng, 3);
	CHECK_THROWS_AS(solve_pose(Points2::Random(3, 2), three), DegenerateConfiguration);
}

TEST_CASE("solve_pose translation equivariance")
{
	std::mt19937_64 rng(14);
	const Points3 pts = random_points(rng, 12);
	const CameraPose truth = random_pose(rng);
	const Points2 obs = project(truth, pts);
	const Vec2 shift(17.0, -4.5);
	const CameraPose a = solve_pose(obs, pts);
	const CameraPose b = solve_pose(obs.rowwise() + shift.transpose(), pts);
	CHECK((a.rotation - b.rotation).cwiseAbs().maxCoeff() <= 1e-10);
	CHECK(std::abs(a.scale - b.scale) <= 1e-10 * a.scale);
	CHECK((b.translation - a.translation - shift).norm() <= 1e-9);
}

TEST_CASE("nearest_rotation fixed point and scale removal")
{
	std::mt19937_64 rng(15);
	const Mat3 r = fctest::random_rotation(rng);
	CHECK((nearest_rotation(r) - r).cwiseAbs().maxCoeff() <= 1e-12);
	CHECK((nearest_rotation(2.0 * Mat3::Identity()) - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
	Mat3 bad = Mat3::Identity();
	bad(1, 1) = std::nan("");
	CHECK_THROWS_AS(nearest_rotation(bad), std::invalid_argument);
}

TEST_CASE("nearest_rotation of a reflection beats a rotation grid")
{
	Mat3 m;
	m << 0.9, 0.2, -0.1, -0.3, 1.1, 0.25, 0.05, 0.15, -0.8;
	REQUIRE(m.determinant() < 0);
	const Mat3 r = nearest_rotation(m);
	CHECK(std::abs(r.determinant() - 1.0) <= 1e-12);
	CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);

	const double d_solver = (r - m).norm();
	double best = 1e300;
	Mat3 best_r;
	const double step = std::numbers::pi / 90; // 2 degrees
	for (double y = -std::numbers::pi; y < std::numbers::pi; y += step)
		for (double p = -std::numbers::pi / 2; p <= std::numbers::pi / 2; p += step)
			for (double z = -std::numbers::pi; z < std::numbers::pi; z += step) {
				const Mat3 c = rotation_from_euler(y, p, z);
				const double d = (c - m).norm();
				if (d < best) {
					best = d;
					best_r = c;
				}
			}
	CHECK(d_solver <= best + 1e-12);
	CHECK((best_r - r).cwiseAbs().maxCoeff() <= 0.05); // grid optimum sits next to the solver's answer
}

TEST_CASE("nearest_rotation output is always a rotation")
{
	std::mt19937_64 rng(16);
	std::normal_distribution<double> g;
	for (int t = 0; t < 200; ++t) {
		const Mat3 m = Mat3::NullaryExpr([&] { return g(rng); });
		const Mat3 r = nearest_rotation(m);
		CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
		CHECK(std::abs(r.determinant() - 1.0) <= 1e-12);
	}
}

TEST_CASE("pose validation")
{
	CameraPose p;
	CHECK_NOTHROW(p.validate());
	p.scale = 0;
	CHECK_THROWS_AS(p.validate(), std::invalid_argument);
	p.scale = 1;
	p.rotation(0, 0) = -1;
	CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
