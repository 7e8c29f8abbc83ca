#include "support.hpp"

#include "facecascade/model.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>

using namespace facecascade;
using fctest::max_rel_diff;

namespace {

// Independent reference: sums over (a, e) directly from the flat index formula.
Points3 brute_force(const BilinearModel& m, const ShapeParams& p)
{
	Points3 out = Points3::Zero(m.n_vertices, 3);
	const std::size_t rows = 3 * static_cast<std::size_t>(m.n_vertices);
	for (std::size_t v = 0; v < m.n_vertices; ++v)
		for (std::size_t c = 0; c < 3; ++c)
			for (std::size_t a = 0; a < m.d_id; ++a)
				for (std::size_t e = 0; e < m.d_exp; ++e)
					out(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(c)) +=
						m.core[(3 * v + c) + rows * (a + m.d_id * e)] * p.alpha[static_cast<Eigen::Index>(a)] *
						p.beta[static_cast<Eigen::Index>(e)];
	return out;
}

} // namespace

TEST_CASE("synthesize of a zero core is zero")
{
	std::mt19937_64 rng(1);
	auto m = fctest::random_model(rng, 5, 3, 2);
	std::fill(m.core.begin(), m.core.end(), 0.0);
	const auto p = fctest::random_params(rng, m);
	CHECK(synthesize(m, p).positions.isZero(0.0));
	CHECK(vertex_position(m, p, 3).isZero(0.0));
}

TEST_CASE("scalar contraction")
{
	BilinearModel m;
	m.n_vertices = 1;
	m.d_id = m.d_exp = 1;
	m.core = {1.5, -2.0, 0.25};
	m.mu_id = m.mu_exp = Vec::Zero(1);
	m.var_id = m.var_exp = Vec::Ones(1);
	const ShapeParams p{Vec::Constant(1, 2.0), Vec::Constant(1, 3.0)};
	const Shape s = synthesize(m, p);
	CHECK(s.positions(0, 0) == 9.0);
	CHECK(s.positions(0, 1) == -12.0);
	CHECK(s.positions(0, 2) == 1.5);
}

TEST_CASE("synthesize matches a brute-force contraction")
{
	std::mt19937_64 rng(2);
	for (int t = 0; t < 20; ++t) {
		const auto m = fctest::random_model(rng, 4, 1 + t % 4, 1 + t % 3);
		const auto p = fctest::random_params(rng, m);
		CHECK(max_rel_diff(synthesize(m, p).positions, brute_force(m, p)) <= 1e-12);
	}
}

TEST_CASE("vertex_position and landmark_positions agree with synthesize")
{
	std::mt19937_64 rng(3);
	auto m = fctest::random_model(rng, 12, 4, 3, 5);
	const auto p = fctest::random_params(rng, m);
	const Shape s = synthesize(m, p);
	for (std::size_t i = 0; i < m.n_vertices; ++i)
		CHECK(vertex_position(m, p, i).transpose() == s.positions.row(static_cast<Eigen::Index>(i)));
	CHECK_THROWS_AS(vertex_position(m, p, m.n_vertices), std::invalid_argument);

	m.landmark_indices = {0};
	const Points3 one = landmark_positions(m, p);
	REQUIRE(one.rows() == 1);
	CHECK(one.row(0) == s.positions.row(0));

	m.landmark_indices = {7, 2, 9, 4};
	const Points3 a = landmark_positions(m, p);
	m.landmark_indices = {4, 9, 7, 2};
	const Points3 b = landmark_positions(m, p);
	CHECK(a.row(0) == b.row(2));
	CHECK(a.row(1) == b.row(3));
	CHECK(a.row(2) == b.row(1));
	CHECK(a.row(3) == b.row(0));
}

TEST_CASE("shape bases reproduce synthesize")
{
	std::mt19937_64 rng(4);
	const auto m = fctest::random_model(rng, 9, 4, 3);
	const auto p = fctest::random_params(rng, m);
	const Vec s = flatten(synthesize(m, p));
	CHECK(max_rel_diff(shape_basis_id(m, p.beta) * p.alpha, s) <= 1e-12);
	CHECK(max_rel_diff(shape_basis_exp(m, p.alpha) * p.beta, s) <= 1e-12);
	CHECK(shape_basis_id(m, Vec::Zero(m.d_exp)).isZero(0.0));

	const std::vector<std::uint32_t> subset = {8, 0, 3};
	const Mat full = shape_basis_id(m, p.beta);
	const Mat sub = shape_basis_id(m, p.beta, subset);
	for (std::size_t k = 0; k < subset.size(); ++k)
		for (int c = 0; c < 3; ++c)
			CHECK(sub.row(static_cast<Eigen::Index>(3 * k + c)) == full.row(3 * subset[k] + c));
	CHECK_THROWS_AS(shape_basis_id(m, Vec::Zero(m.d_exp + 1)), std::invalid_argument);
	CHECK_THROWS_AS(shape_basis_exp(m, Vec::Zero(m.d_id + 1)), std::invalid_argument);
}

TEST_CASE("single identity column is the unit-basis shape")
{
	std::mt19937_64 rng(5);
	const auto m = fctest::random_model(rng, 6, 1, 3);
	const auto p = fctest::random_params(rng, m);
	const Mat b = shape_basis_id(m, p.beta);
	REQUIRE(b.cols() == 1);
	CHECK(max_rel_diff(b.col(0), flatten(synthesize(m, {Vec::Ones(1), p.beta}))) <= 1e-15);
}

TEST_CASE("bilinearity and additivity")
{
	std::mt19937_64 rng(6);
	const auto m = fctest::random_model(rng, 10, 5, 4);
	const auto p = fctest::random_params(rng, m);
	const auto q = fctest::random_params(rng, m);
	const Points3 s = synthesize(m, p).positions;
	CHECK(max_rel_diff(synthesize(m, {2.5 * p.alpha, p.beta}).positions, 2.5 * s) <= 1e-12);
	CHECK(max_rel_diff(synthesize(m, {p.alpha, -0.75 * p.beta}).positions, -0.75 * s) <= 1e-12);
	CHECK(max_rel_diff(synthesize(m, {p.alpha + q.alpha, p.beta}).positions,
	                   s + synthesize(m, {q.alpha, p.beta}).positions) <= 1e-12);
}

TEST_CASE("prior_gauge keeps the shape and lowers the prior")
{
	std::mt19937_64 rng(7);
	auto m = fctest::random_model(rng, 8, 4, 3);
	m.mu_id = Vec::Zero(4);
	m.mu_id[0] = 1.0;
	m.mu_exp = Vec::Zero(3);
	m.mu_exp[0] = 1.0;
	auto prior = [&](const ShapeParams& p) {
		return ((p.alpha - m.mu_id).array().square() / m.var_id.array()).sum() +
		       ((p.beta - m.mu_exp).array().square() / m.var_exp.array()).sum();
	};
	auto p = fctest::random_params(rng, m);
	p.alpha[0] = std::abs(p.alpha[0]) + 0.5;
	p.beta[0] = std::abs(p.beta[0]) + 0.5;
	const ShapeParams scaled{3.0 * p.alpha, 0.5 * p.beta};
	double factor = 0;
	const ShapeParams g = prior_gauge(m, scaled, &factor);
	CHECK(max_rel_diff(synthesize(m, g).positions, factor * synthesize(m, scaled).positions) <= 1e-12);
	CHECK(prior(g) <= prior(scaled) + 1e-12);
	// Orbit invariance: every point of the orbit maps to the same representative.
	double f2 = 0;
	const ShapeParams g2 = prior_gauge(m, {0.2 * p.alpha, 4.0 * p.beta}, &f2);
	CHECK(max_rel_diff(g.stacked(), g2.stacked()) <= 1e-12);
	// Brute-force line search along each block scale finds nothing better.
	for (double s1 = 0.5; s1 <= 1.5; s1 += 0.05)
		for (double s2 = 0.5; s2 <= 1.5; s2 += 0.05)
			CHECK(prior(g) <= prior({s1 * g.alpha, s2 * g.beta}) + 1e-12);
}

TEST_CASE("model serialization round trip and errors")
{
	std::mt19937_64 rng(8);
	auto m = fctest::random_model(rng, 6, 3, 2, 4);
	m.faces = {{0, 1, 2}, {2, 3, 4}, {3, 4, 5}};
	const auto bytes = serialize_model(m);
	CHECK(deserialize_model(bytes) == m);

	const auto dir = fctest::scratch_dir("model");
	save_model(m, dir / "m.bin");
	CHECK(std::filesystem::exists(dir / "m.bin.json"));
	CHECK(load_model(dir / "m.bin") == m);

	SUBCASE("truncated")
	{
		for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
			const std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
			CHECK_THROWS_AS(deserialize_model(t), ParseError);
		}
	}
	SUBCASE("n_vertices inconsistent with core")
	{
		auto bad = bytes;
		std::uint32_t n = 0;
		std::memcpy(&n, bad.data() + 8, 4);
		++n;
		std::memcpy(bad.data() + 8, &n, 4);
		CHECK_THROWS_AS(deserialize_model(bad), ParseError);
	}
	SUBCASE("version")
	{
		auto bad = bytes;
		bad[4] = 99;
		CHECK_THROWS_AS(deserialize_model(bad), VersionError);
	}
	SUBCASE("magic")
	{
		auto bad = bytes;
		bad[0] = 'X';
		try {
			deserialize_model(bad);
			FAIL("expected ParseError");
		} catch (const ParseError& e) {
			CHECK(e.field() == "magic");
		}
	}
	SUBCASE("in-memory validation")
	{
		auto bad = m;
		bad.core.pop_back();
		CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
		bad = m;
		bad.var_id[0] = 0;
		CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
		bad = m;
		bad.landmark_indices.push_back(bad.landmark_indices[0]);
		CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
	}
}

TEST_CASE("fingerprint tracks content")
{
	std::mt19937_64 rng(9);
	const auto m = fctest::random_model(rng, 5, 2, 2, 3);
	auto m2 = m;
	CHECK(model_fingerprint(m) == model_fingerprint(m2));
	m2.core[7] += 1e-9;
	CHECK(model_fingerprint(m) != model_fingerprint(m2));
}

TEST_CASE("parameter dimension checks")
{
	std::mt19937_64 rng(10);
	const auto m = fctest::random_model(rng, 5, 3, 2);
	CHECK_THROWS_AS(synthesize(m, {Vec::Zero(2), Vec::Zero(2)}), std::invalid_argument);
	CHECK_THROWS_AS(synthesize(m, {Vec::Zero(3), Vec::Zero(3)}), std::invalid_argument);
	const Vec g = ShapeParams::mean(m).stacked();
	CHECK(ShapeParams::from_stacked(m, g) == ShapeParams::mean(m));
}
