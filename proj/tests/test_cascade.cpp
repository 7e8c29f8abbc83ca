#include "support.hpp"

#include "facecascade/cascade.hpp"
#include "facecascade/synth.hpp"

#include <doctest.h>

#include <cstring>

using namespace facecascade;

namespace {

Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
	std::normal_distribution<double> g;
	return Mat::NullaryExpr(r, c, [&] { return g(rng); });
}

// Centered primal normal equations, solved densely.
RidgeSolution oracle_primal(const Mat& x, const Mat& y, double lambda)
{
	const Eigen::RowVectorXd xm = x.colwise().mean(), ym = y.colwise().mean();
	const Mat xc = x.rowwise() - xm, yc = y.rowwise() - ym;
	Mat a = xc.transpose() * xc;
	a.diagonal().array() += lambda;
	RidgeSolution s;
	s.weights = a.fullPivLu().solve(xc.transpose() * yc);
	s.bias = (ym - xm * s.weights).transpose();
	return s;
}

// Centered dual form W = Xc^T (Xc Xc^T + lambda I)^-1 Yc.
RidgeSolution oracle_dual(const Mat& x, const Mat& y, double lambda)
{
	const Eigen::RowVectorXd xm = x.colwise().mean(), ym = y.colwise().mean();
	const Mat xc = x.rowwise() - xm, yc = y.rowwise() - ym;
	Mat k = xc * xc.transpose();
	k.diagonal().array() += lambda;
	RidgeSolution s;
	s.weights = xc.transpose() * k.fullPivLu().solve(yc);
	s.bias = (ym - xm * s.weights).transpose();
	return s;
}

struct Data {
	SynthConfig config;
	BilinearModel model;
	std::vector<SynthSample> synth;
	std::vector<TrainingSample> samples;
	Data()
	{
		config.n_samples = 16;
		config.seed = 77;
		model = make_synthetic_model(config);
		synth = generate_dataset(model, config);
		for (const auto& s : synth)
			samples.push_back(s.sample);
	}
};

const Data& data()
{
	static const Data d;
	return d;
}

const TrainResult& trained()
{
	static const TrainResult r = [] {
		CascadeConfig cc;
		cc.stages = 3;
		return train(data().model, data().samples, HogConfig{}, FitConfig{}, cc);
	}();
	return r;
}

} // namespace

TEST_CASE("ridge recovers a planted solution")
{
	std::mt19937_64 rng(41);
	const Mat x = random_mat(rng, 60, 6);
	const Mat w = random_mat(rng, 6, 3);
	const Vec b = random_mat(rng, 3, 1);
	const Mat y = (x * w).rowwise() + b.transpose();
	const RidgeSolution s = ridge_fit(x, y, 1e-10);
	CHECK((s.weights - w).cwiseAbs().maxCoeff() <= 1e-6);
	CHECK((s.bias - b).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("ridge with huge lambda predicts the mean")
{
	std::mt19937_64 rng(42);
	const Mat x = random_mat(rng, 10, 4), y = random_mat(rng, 10, 2);
	const RidgeSolution s = ridge_fit(x, y, 1e14);
	CHECK(s.weights.cwiseAbs().maxCoeff() <= 1e-10);
	CHECK((s.bias - y.colwise().mean().transpose()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("ridge primal and dual forms agree with dense oracles")
{
	std::mt19937_64 rng(43);
	std::uniform_int_distribution<int> nd(1, 20), dd(1, 10);
	std::uniform_real_distribution<double> ll(-3, 2);
	for (int t = 0; t < 100; ++t) {
		const int n = nd(rng), d = dd(rng);
		const double lambda = std::pow(10.0, ll(rng));
		const Mat x = random_mat(rng, n, d), y = random_mat(rng, n, 3);
		const RidgeSolution s = ridge_fit(x, y, lambda);
		const RidgeSolution p = oracle_primal(x, y, lambda), q = oracle_dual(x, y, lambda);
		CHECK(fctest::max_rel_diff(s.weights, p.weights) <= 1e-9);
		CHECK(fctest::max_rel_diff(s.weights, q.weights) <= 1e-9);
		CHECK(fctest::max_rel_diff(s.bias, p.bias) <= 1e-9);
	}
	// The small fixed instance: N = 5, d = 3.
	const Mat x = random_mat(rng, 5, 3), y = random_mat(rng, 5, 2);
	CHECK(fctest::max_rel_diff(oracle_primal(x, y, 0.5).weights, oracle_dual(x, y, 0.5).weights) <= 1e-9);
	CHECK(fctest::max_rel_diff(ridge_fit(x, y, 0.5).weights, oracle_dual(x, y, 0.5).weights) <= 1e-9);
}

TEST_CASE("ridge input validation")
{
	CHECK_THROWS_AS(ridge_fit(Mat::Ones(3, 2), Mat::Ones(4, 1), 1.0), std::invalid_argument);
	CHECK_THROWS_AS(ridge_fit(Mat::Ones(3, 2), Mat::Ones(3, 1), 0.0), std::invalid_argument);
	Mat bad = Mat::Ones(3, 2);
	bad(1, 1) = std::nan("");
	CHECK_THROWS_AS(ridge_fit(bad, Mat::Ones(3, 1), 1.0), std::invalid_argument);
}

TEST_CASE("sparse projection is a deterministic linear map")
{
	std::mt19937_64 rng(44);
	const Vec a = random_mat(rng, 500, 1), b = random_mat(rng, 500, 1);
	CHECK(sparse_projection(a, 20, 5) == sparse_projection(a, 20, 5));
	CHECK(sparse_projection(a, 20, 5) != sparse_projection(a, 20, 6));
	CHECK((sparse_projection(a + 2.0 * b, 20, 5) - sparse_projection(a, 20, 5) - 2.0 * sparse_projection(b, 20, 5))
	          .cwiseAbs()
	          .maxCoeff() <= 1e-12);
	// Each input column has four entries of magnitude 1/2.
	const Vec e = sparse_projection(Vec::Unit(500, 17), 20, 5);
	CHECK(e.cwiseAbs().sum() <= 2.0 + 1e-15);
	CHECK(e.cwiseAbs().maxCoeff() >= 0.5);
}

TEST_CASE("training error trace is non-increasing and beats the constant predictor")
{
	const TrainResult& r = trained();
	REQUIRE(r.log.size() == 4);
	CHECK(r.regressor.stages.size() == 3);
	CHECK(r.kept.size() == data().samples.size());
	for (std::size_t k = 1; k < r.log.size(); ++k) {
		CHECK(r.log[k].mean_sq_error <= r.log[k - 1].mean_sq_error);
		CHECK(r.log[k].mean_sq_error <= r.log[k].constant_mse + 1e-12);
	}
}

TEST_CASE("fit_image on a training sample replays training exactly")
{
	const TrainResult& r = trained();
	for (std::size_t j : {std::size_t{0}, std::size_t{5}, r.kept.size() - 1}) {
		const auto& s = data().samples[r.kept[j]];
		const FitResult f = fit_image(r.regressor, data().model, s.image, s.landmarks);
		REQUIRE(f.ok);
		CHECK(f.params == r.final_params[j]);
		CHECK(f.trace.size() == r.regressor.stages.size() + 1);
		CHECK(f.params.alpha.allFinite());
	}
}

TEST_CASE("zero-stage regressor returns the landmark fit")
{
	CascadeRegressor reg = trained().regressor;
	reg.stages.clear();
	const auto& s = data().samples[3];
	const FitResult f = fit_image(reg, data().model, s.image, s.landmarks);
	const LandmarkFitResult init = landmark_fit(data().model, s.landmarks, reg.fit);
	REQUIRE(f.ok);
	CHECK(f.params == init.params);
	CHECK(f.pose.rotation == init.pose.rotation);
}

TEST_CASE("fit_image reports failures instead of throwing")
{
	const auto& s = data().samples[0];
	LandmarkSet bad = s.landmarks;
	bad.points.setConstant(5.0); // coincident landmarks: no pose
	const FitResult f = fit_image(trained().regressor, data().model, s.image, bad);
	CHECK_FALSE(f.ok);
	CHECK_FALSE(f.error.empty());

	BilinearModel other = data().model;
	other.core[0] += 1.0;
	CHECK_THROWS_AS(fit_image(trained().regressor, other, s.image, s.landmarks), FingerprintMismatch);
}

TEST_CASE("training is independent of the thread count")
{
	CascadeConfig cc;
	cc.stages = 1;
	const std::vector<TrainingSample> few(data().samples.begin(), data().samples.begin() + 6);
	const TrainResult a = train(data().model, few, HogConfig{}, FitConfig{}, cc, {}, 1);
	const TrainResult b = train(data().model, few, HogConfig{}, FitConfig{}, cc, {}, 3);
	CHECK(serialize_cascade(a.regressor) == serialize_cascade(b.regressor));
}

TEST_CASE("zero residues give a zero-update fixed point")
{
	std::vector<TrainingSample> samples(data().samples.begin(), data().samples.begin() + 6);
	for (auto& s : samples)
		s.g_star = landmark_fit(data().model, s.landmarks, FitConfig{}).params;
	CascadeConfig cc;
	cc.stages = 2;
	const TrainResult r = train(data().model, samples, HogConfig{}, FitConfig{}, cc);
	CHECK(r.log.front().mean_sq_error == 0.0);
	for (const auto& e : r.log)
		CHECK(e.mean_sq_error <= 1e-20);
	for (const auto& st : r.regressor.stages) {
		CHECK(st.weights.cwiseAbs().maxCoeff() <= 1e-12);
		CHECK(st.bias.cwiseAbs().maxCoeff() <= 1e-12);
	}
}

TEST_CASE("two-sample stage matches a hand-assembled ridge solve")
{
	const auto& d = data();
	const std::vector<TrainingSample> two(d.samples.begin(), d.samples.begin() + 2);
	CascadeConfig cc;
	cc.stages = 1;
	cc.hog_projection_dim = 12;
	cc.lambda_r = 0.3;
	const TrainResult r = train(d.model, two, HogConfig{}, FitConfig{}, cc);
	REQUIRE(r.kept.size() == 2);
	const RegressorStage& st = r.regressor.stages.at(0);
	REQUIRE(st.hog_projection_dim == 12);

	// Raw features at the initialization, standardized by hand.
	Mat x(2, 12 + 2 * static_cast<Eigen::Index>(d.model.num_landmarks()));
	Mat y(2, static_cast<Eigen::Index>(d.model.num_params()));
	const Vec sd = (Vec(d.model.num_params()) << d.model.var_id, d.model.var_exp).finished().cwiseSqrt();
	std::vector<ShapeParams> init;
	for (int j = 0; j < 2; ++j) {
		const LandmarkFitResult lf = landmark_fit(d.model, two[j].landmarks, FitConfig{});
		init.push_back(lf.params);
		const FeatureVector f = joint_feature(two[j].image, d.model, lf.params, lf.pose, two[j].landmarks, HogConfig{});
		Vec raw(x.cols());
		raw << sparse_projection(f.hog, 12, st.hog_projection_seed), f.ld;
		x.row(j) = raw.transpose();
		y.row(j) = ((two[j].g_star.stacked() - lf.params.stacked()).array() / sd.array()).matrix().transpose();
	}
	Mat z = x;
	for (Eigen::Index c = 0; c < x.cols(); ++c) {
		const double m = 0.5 * (x(0, c) + x(1, c));
		const double s = std::abs(x(0, c) - x(1, c)) / 2.0;
		for (int j = 0; j < 2; ++j)
			z(j, c) = (x(j, c) - m) / (s > 1e-12 ? s : 1.0);
	}
	const RidgeSolution want = oracle_dual(z, y, 0.3);
	CHECK(fctest::max_rel_diff(st.weights, want.weights) <= 1e-9);
	CHECK(fctest::max_rel_diff(st.bias, want.bias) <= 1e-9);
	for (int j = 0; j < 2; ++j) {
		const Vec pred = ((z.row(j) * want.weights).transpose() + want.bias).cwiseProduct(sd);
		CHECK(fctest::max_rel_diff(r.final_params[static_cast<std::size_t>(j)].stacked(), init[j].stacked() + pred) <=
		      1e-9);
	}
}

TEST_CASE("cascade serialization")
{
	const CascadeRegressor& reg = trained().regressor;
	const auto bytes = serialize_cascade(reg);
	CHECK(deserialize_cascade(bytes) == reg);
	CHECK(deserialize_cascade(bytes, model_fingerprint(data().model)) == reg);
	CHECK_THROWS_AS(deserialize_cascade(bytes, model_fingerprint(data().model) + 1), FingerprintMismatch);

	const auto dir = fctest::scratch_dir("cascade");
	save_cascade(reg, dir / "c.bin");
	CHECK(load_cascade(dir / "c.bin") == reg);

	SUBCASE("corrupted stage count")
	{
		for (std::uint32_t k : {0u, 2u, 4u, 1000u}) {
			auto bad = bytes;
			std::memcpy(bad.data() + 8, &k, 4);
			CHECK_THROWS_AS(deserialize_cascade(bad), ParseError);
		}
	}
	SUBCASE("truncated and trailing bytes")
	{
		const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 9);
		CHECK_THROWS_AS(deserialize_cascade(cut), ParseError);
		auto extra = bytes;
		extra.push_back(0);
		CHECK_THROWS_AS(deserialize_cascade(extra), ParseError);
	}
	SUBCASE("version")
	{
		auto bad = bytes;
		bad[4] = 7;
		CHECK_THROWS_AS(deserialize_cascade(bad), VersionError);
	}
}

TEST_CASE("whitened error")
{
	const auto& m = data().model;
	const ShapeParams mu = ShapeParams::mean(m);
	CHECK(whitened_error(m, mu, mu) == 0.0);
	ShapeParams p = mu;
	p.alpha[1] += 2.0 * std::sqrt(m.var_id[1]);
	CHECK(whitened_error(m, mu, p) == doctest::Approx(2.0).epsilon(1e-12));
}
