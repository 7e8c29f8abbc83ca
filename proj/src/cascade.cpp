#include "facecascade/cascade.hpp"

#include "binary_io.hpp"
#include "parallel.hpp"

#include <fmt/format.h>

#include <cmath>

namespace facecascade {

namespace {

void check_finite(const Mat& m, const char* what)
{
	if (!m.allFinite())
		throw std::invalid_argument(std::string("ridge_fit: non-finite ") + what);
}

// Ridge on already-centered inputs; `xc` is N x d, `yc` is N x p.
Mat ridge_centered(const Mat& xc, const Mat& yc, double lambda)
{
	const Eigen::Index n = xc.rows(), d = xc.cols();
	if (n >= d) {
		Mat normal = Mat::Zero(d, d);
		normal.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
		normal.diagonal().array() += lambda;
		return normal.selfadjointView<Eigen::Lower>().llt().solve(xc.transpose() * yc);
	}
	// Dual form: W = Xc^T (Xc Xc^T + lambda I)^-1 Yc.
	Mat gram = Mat::Zero(n, n);
	gram.selfadjointView<Eigen::Lower>().rankUpdate(xc);
	gram.diagonal().array() += lambda;
	const Mat a = gram.selfadjointView<Eigen::Lower>().llt().solve(yc);
	return xc.transpose() * a;
}

} // namespace

RidgeSolution ridge_fit(const Mat& x, const Mat& y, double lambda)
{
	if (x.rows() < 1 || x.rows() != y.rows())
		throw std::invalid_argument("ridge_fit: need N >= 1 rows in both X and Y");
	if (!(lambda > 0.0) || !std::isfinite(lambda))
		throw std::invalid_argument("ridge_fit: lambda must be positive and finite");
	check_finite(x, "X");
	check_finite(y, "Y");
	const Eigen::RowVectorXd xm = x.colwise().mean();
	const Eigen::RowVectorXd ym = y.colwise().mean();
	const Mat xc = x.rowwise() - xm;
	const Mat yc = y.rowwise() - ym;
	RidgeSolution s;
	s.weights = ridge_centered(xc, yc, lambda);
	s.bias = (ym - xm * s.weights).transpose();
	return s;
}

void CascadeConfig::validate() const
{
	if (stages < 1)
		throw std::invalid_argument("cascade needs at least one stage");
	if (!(lambda_r > 0.0) || !std::isfinite(lambda_r))
		throw std::invalid_argument("lambda_r must be positive and finite");
	if (hog_projection_dim < 0)
		throw std::invalid_argument("hog_projection_dim must be non-negative");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

} // namespace

Vec sparse_projection(const Vec& x, std::uint32_t out_dim, std::uint64_t seed)
{
	if (out_dim == 0)
		throw std::invalid_argument("sparse_projection: output dimension must be positive");
	Vec out = Vec::Zero(out_dim);
	for (Eigen::Index j = 0; j < x.size(); ++j) {
		std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(j)));
		for (int k = 0; k < 4; ++k) {
			h = splitmix64(h);
			const auto row = static_cast<Eigen::Index>(h % out_dim);
			const double sign = (h >> 63) ? -0.5 : 0.5;
			out[row] += sign * x[j];
		}
	}
	return out;
}

Vec RegressorStage::raw_input(const FeatureVector& f) const
{
	const Vec hog = hog_projection_dim > 0 ? sparse_projection(f.hog, hog_projection_dim, hog_projection_seed) : f.hog;
	Vec x(hog.size() + f.ld.size());
	x << hog, f.ld;
	return x;
}

Vec RegressorStage::prepare(const FeatureVector& f) const
{
	Vec z = raw_input(f);
	if (z.size() != feature_mean.size())
		throw std::invalid_argument("regressor stage: feature length does not match training");
	for (Eigen::Index i = 0; i < z.size(); ++i)
		z[i] = (z[i] - feature_mean[i]) / feature_scale[i];
	return z;
}

Vec RegressorStage::predict_prepared(const Vec& z) const
{
	if (z.size() != weights.rows())
		throw std::invalid_argument("regressor stage: input length does not match weights");
	// Explicit loops fix the summation order independently of alignment.
	Vec out(weights.cols());
	for (Eigen::Index p = 0; p < weights.cols(); ++p) {
		const double* w = weights.col(p).data();
		double s = 0.0;
		for (Eigen::Index i = 0; i < z.size(); ++i)
			s += w[i] * z[i];
		out[p] = (s + bias[p]) * param_scale[p];
	}
	return out;
}

double whitened_error(const BilinearModel& model, const ShapeParams& truth, const ShapeParams& estimate)
{
	return std::sqrt(((truth.alpha - estimate.alpha).array().square() / model.var_id.array()).sum() +
	                 ((truth.beta - estimate.beta).array().square() / model.var_exp.array()).sum());
}

namespace {

Vec param_scales(const BilinearModel& model)
{
	Vec s(model.num_params());
	s << model.var_id.cwiseSqrt(), model.var_exp.cwiseSqrt();
	return s;
}

// Alg. step 6 / inference pose update; a failed re-solve keeps the old pose.
CameraPose update_pose(const BilinearModel& model, const LandmarkSet& landmarks, const ShapeParams& params,
                       const CameraPose& previous)
{
	try {
		return solve_pose(landmarks.points, landmark_positions(model, params));
	} catch (const DegenerateConfiguration&) {
		return previous;
	}
}

ShapeParams apply_increment(const BilinearModel& model, const ShapeParams& params, const Vec& delta)
{
	return ShapeParams::from_stacked(model, params.stacked() + delta);
}

} // namespace

TrainResult train(const BilinearModel& model, const std::vector<TrainingSample>& samples, const HogConfig& hog,
                  const FitConfig& fit, const CascadeConfig& config, const ProgressFn& progress, int threads)
{
	hog.validate();
	fit.validate();
	config.validate();
	if (samples.size() < 2)
		throw std::invalid_argument("train: need at least two samples");
	auto log = [&](const std::string& msg) {
		if (progress)
			progress(msg);
	};

	TrainResult result;
	result.regressor.hog = hog;
	result.regressor.fit = fit;
	result.regressor.config = config;
	result.regressor.model_fingerprint = model_fingerprint(model);

	// Step 1: landmark-fit initialization; failures are dropped.
	std::vector<std::optional<LandmarkFitResult>> init(samples.size());
	std::vector<std::string> errors(samples.size());
	detail::parallel_for(samples.size(), threads, [&](std::size_t j) {
		try {
			check_params(model, samples[j].g_star);
			init[j] = landmark_fit(model, samples[j].landmarks, fit);
		} catch (const std::exception& e) {
			errors[j] = e.what();
		}
	});
	std::vector<ShapeParams> params;
	std::vector<CameraPose> poses;
	for (std::size_t j = 0; j < samples.size(); ++j) {
		if (!init[j]) {
			result.warnings.push_back(fmt::format("sample {} dropped: landmark fit failed: {}", j, errors[j]));
			continue;
		}
		result.kept.push_back(j);
		params.push_back(init[j]->params);
		poses.push_back(init[j]->pose);
	}
	const std::size_t n = result.kept.size();
	if (n < 2)
		throw std::runtime_error("train: fewer than two samples survived initialization");

	const Vec scale = param_scales(model);
	auto residues = [&] {
		Mat y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.num_params()));
		for (std::size_t j = 0; j < n; ++j)
			y.row(static_cast<Eigen::Index>(j)) =
				((samples[result.kept[j]].g_star.stacked() - params[j].stacked()).array() / scale.array()).transpose();
		return y;
	};
	auto record = [&](int stage, double constant_mse) {
		const Mat y = residues();
		StageLog entry{stage, y.rowwise().squaredNorm().mean(), y.rowwise().norm().mean(), constant_mse};
		result.log.push_back(entry);
		log(fmt::format("stage {}: mean whitened error {:.6f} (mse {:.6f})", stage, entry.mean_error,
		                entry.mean_sq_error));
	};
	record(0, 0.0);

	const std::uint32_t hog_dim = static_cast<std::uint32_t>(model.num_landmarks() * hog.descriptor_size());
	const bool project_hog = config.hog_projection_dim > 0 && static_cast<std::uint32_t>(config.hog_projection_dim) < hog_dim;

	for (int k = 1; k <= config.stages; ++k) {
		RegressorStage stage;
		stage.param_scale = scale;
		if (project_hog) {
			stage.hog_projection_dim = static_cast<std::uint32_t>(config.hog_projection_dim);
			stage.hog_projection_seed = splitmix64(config.projection_seed + static_cast<std::uint64_t>(k));
		}

		// Step 3: features at the current estimate, one row per sample.
		const Eigen::Index d_feat =
			static_cast<Eigen::Index>((project_hog ? stage.hog_projection_dim : hog_dim) + 2 * model.num_landmarks());
		Mat x(static_cast<Eigen::Index>(n), d_feat);
		detail::parallel_for(n, threads, [&](std::size_t j) {
			const auto& s = samples[result.kept[j]];
			const FeatureVector f = joint_feature(s.image, model, params[j], poses[j], s.landmarks, hog);
			x.row(static_cast<Eigen::Index>(j)) = stage.raw_input(f).transpose();
		});

		// Standardize in place; constant columns keep unit scale.
		stage.feature_mean = x.colwise().mean().transpose();
		stage.feature_scale.resize(d_feat);
		for (Eigen::Index c = 0; c < d_feat; ++c) {
			auto col = x.col(c);
			const double mean = stage.feature_mean[c];
			const double sd = std::sqrt((col.array() - mean).square().mean());
			const double s = sd > 1e-12 ? sd : 1.0;
			stage.feature_scale[c] = s;
			for (Eigen::Index r = 0; r < col.size(); ++r)
				col[r] = (col[r] - mean) / s;
		}

		// Step 4: ridge on whitened residues. Standardized columns are already
		// centered up to rounding, which the bias absorbs; x stays untouched so
		// step 5 sees exactly the inputs inference would compute.
		const Mat y = residues();
		const Eigen::RowVectorXd ym = y.colwise().mean();
		const Eigen::RowVectorXd zm = x.colwise().mean();
		const Mat yc = y.rowwise() - ym;
		stage.weights = ridge_centered(x, yc, config.lambda_r);
		stage.bias = (ym - zm * stage.weights).transpose();
		const double constant_mse = yc.rowwise().squaredNorm().mean();

		// Step 5: apply through the same path used at inference.
		for (std::size_t j = 0; j < n; ++j) {
			const Vec z = x.row(static_cast<Eigen::Index>(j)).transpose();
			params[j] = apply_increment(model, params[j], stage.predict_prepared(z));
		}
		x.resize(0, 0);

		// Step 6: pose from detected landmarks and the updated shape.
		detail::parallel_for(n, threads, [&](std::size_t j) {
			poses[j] = update_pose(model, samples[result.kept[j]].landmarks, params[j], poses[j]);
		});

		result.regressor.stages.push_back(std::move(stage));
		record(k, constant_mse);
	}
	result.final_params = params;
	return result;
}

FitResult fit_image(const CascadeRegressor& regressor, const BilinearModel& model, const Image& image,
                    const LandmarkSet& landmarks)
{
	if (regressor.model_fingerprint != model_fingerprint(model))
		throw FingerprintMismatch("cascade was trained against a different model");
	FitResult r;
	try {
		const LandmarkFitResult init = landmark_fit(model, landmarks, regressor.fit);
		r.params = init.params;
		r.pose = init.pose;
	} catch (const std::exception& e) {
		r.error = std::string("landmark fit failed: ") + e.what();
		return r;
	}
	r.trace.push_back(r.params);
	for (const auto& stage : regressor.stages) {
		const FeatureVector f = joint_feature(image, model, r.params, r.pose, landmarks, regressor.hog);
		r.params = apply_increment(model, r.params, stage.predict(f));
		r.pose = update_pose(model, landmarks, r.params, r.pose);
		r.trace.push_back(r.params);
	}
	if (!r.params.alpha.allFinite() || !r.params.beta.allFinite()) {
		r.error = "regression produced non-finite parameters";
		return r;
	}
	r.shape = synthesize(model, r.params);
	r.ok = true;
	return r;
}

namespace {

template <typename Writer>
void write_hog(Writer& w, const HogConfig& h)
{
	w.u32(static_cast<std::uint32_t>(h.patch_size));
	w.u32(static_cast<std::uint32_t>(h.cell_size));
	w.u32(static_cast<std::uint32_t>(h.block_cells));
	w.u32(static_cast<std::uint32_t>(h.block_stride_cells));
	w.u32(static_cast<std::uint32_t>(h.orientation_bins));
	w.f64(h.clip);
	w.f64(h.epsilon);
	w.u32(h.normalize_ld ? 1 : 0);
	w.u32(h.scale_patch ? 1 : 0);
	w.f64(h.patch_reference_scale);
}

HogConfig read_hog(detail::ByteReader& r)
{
	HogConfig h;
	h.patch_size = static_cast<int>(r.u32("hog.patch_size"));
	h.cell_size = static_cast<int>(r.u32("hog.cell_size"));
	h.block_cells = static_cast<int>(r.u32("hog.block_cells"));
	h.block_stride_cells = static_cast<int>(r.u32("hog.block_stride_cells"));
	h.orientation_bins = static_cast<int>(r.u32("hog.orientation_bins"));
	h.clip = r.finite_f64("hog.clip");
	h.epsilon = r.finite_f64("hog.epsilon");
	h.normalize_ld = r.u32("hog.normalize_ld") != 0;
	h.scale_patch = r.u32("hog.scale_patch") != 0;
	h.patch_reference_scale = r.finite_f64("hog.patch_reference_scale");
	try {
		h.validate();
	} catch (const std::invalid_argument& e) {
		throw ParseError("hog", e.what());
	}
	return h;
}

} // namespace

// Layout: "CSC1", version, K, d_id + d_exp, model fingerprint, HogConfig,
// FitConfig, CascadeConfig, then per stage: d_feat, projection (dim, seed),
// weights (column-major), bias, feature_mean, feature_scale, param_scale.
std::vector<std::uint8_t> serialize_cascade(const CascadeRegressor& reg)
{
	detail::ByteWriter w;
	w.bytes("CSC1", 4);
	w.u32(kCascadeFormatVersion);
	w.u32(static_cast<std::uint32_t>(reg.stages.size()));
	const std::uint32_t d_param = reg.stages.empty() ? 0 : static_cast<std::uint32_t>(reg.stages.front().bias.size());
	w.u32(d_param);
	w.u64(reg.model_fingerprint);
	write_hog(w, reg.hog);
	w.f64(reg.fit.lambda1);
	w.f64(reg.fit.lambda2);
	w.u32(static_cast<std::uint32_t>(reg.fit.max_alternations));
	w.f64(reg.fit.rel_tol);
	w.u32(static_cast<std::uint32_t>(reg.config.stages));
	w.f64(reg.config.lambda_r);
	w.u32(static_cast<std::uint32_t>(reg.config.hog_projection_dim));
	w.u64(reg.config.projection_seed);
	for (const auto& s : reg.stages) {
		if (s.weights.rows() != s.feature_mean.size() || s.weights.cols() != d_param ||
		    s.feature_scale.size() != s.feature_mean.size() || s.param_scale.size() != d_param ||
		    s.bias.size() != d_param)
			throw std::invalid_argument("serialize_cascade: inconsistent stage dimensions");
		w.u32(static_cast<std::uint32_t>(s.weights.rows()));
		w.u32(s.hog_projection_dim);
		w.u64(s.hog_projection_seed);
		w.f64s(s.weights.reshaped());
		w.f64s(s.bias);
		w.f64s(s.feature_mean);
		w.f64s(s.feature_scale);
		w.f64s(s.param_scale);
	}
	return w.take();
}

CascadeRegressor deserialize_cascade(std::span<const std::uint8_t> bytes,
                                     std::optional<std::uint64_t> expected_fingerprint)
{
	detail::ByteReader r(bytes);
	char magic[4];
	r.bytes(magic, 4, "magic");
	if (std::string(magic, 4) != "CSC1")
		throw ParseError("magic", "not a CSC1 cascade file");
	const auto version = r.u32("version");
	if (version != kCascadeFormatVersion)
		throw VersionError(fmt::format("cascade format version {} is not supported (expected {})", version,
		                               kCascadeFormatVersion));
	const auto k = r.u32("stage_count");
	const auto d_param = r.u32("d_param");
	if (k == 0)
		throw ParseError("stage_count", "cascade has no stages");
	if (d_param == 0)
		throw ParseError("d_param", "parameter dimension must be positive");
	CascadeRegressor reg;
	reg.model_fingerprint = r.u64("fingerprint");
	if (expected_fingerprint && *expected_fingerprint != reg.model_fingerprint)
		throw FingerprintMismatch(fmt::format("cascade fingerprint {:016x} does not match model {:016x}",
		                                      reg.model_fingerprint, *expected_fingerprint));
	reg.hog = read_hog(r);
	reg.fit.lambda1 = r.finite_f64("fit.lambda1");
	reg.fit.lambda2 = r.finite_f64("fit.lambda2");
	reg.fit.max_alternations = static_cast<int>(r.u32("fit.max_alternations"));
	reg.fit.rel_tol = r.finite_f64("fit.rel_tol");
	reg.config.stages = static_cast<int>(r.u32("config.stages"));
	reg.config.lambda_r = r.finite_f64("config.lambda_r");
	reg.config.hog_projection_dim = static_cast<int>(r.u32("config.hog_projection_dim"));
	reg.config.projection_seed = r.u64("config.projection_seed");
	if (static_cast<std::uint32_t>(reg.config.stages) != k)
		throw ParseError("stage_count", "stage count disagrees with the stored configuration");
	for (std::uint32_t i = 0; i < k; ++i) {
		const std::string field = fmt::format("stage[{}]", i);
		RegressorStage s;
		const auto d_feat = r.u32(field + ".d_feat");
		if (d_feat == 0)
			throw ParseError(field + ".d_feat", "feature dimension must be positive");
		s.hog_projection_dim = r.u32(field + ".projection_dim");
		s.hog_projection_seed = r.u64(field + ".projection_seed");
		r.expect(8 * (static_cast<std::size_t>(d_feat) * d_param), field + ".weights");
		s.weights.resize(d_feat, d_param);
		for (auto& v : s.weights.reshaped())
			v = r.finite_f64(field + ".weights");
		s.bias = r.vec(d_param, field + ".bias");
		s.feature_mean = r.vec(d_feat, field + ".feature_mean");
		s.feature_scale = r.vec(d_feat, field + ".feature_scale");
		s.param_scale = r.vec(d_param, field + ".param_scale");
		reg.stages.push_back(std::move(s));
	}
	if (!r.at_end())
		throw ParseError("trailer", "unexpected bytes after the last stage");
	return reg;
}

void save_cascade(const CascadeRegressor& regressor, const std::filesystem::path& path)
{
	detail::write_file(path.string(), serialize_cascade(regressor));
}

CascadeRegressor load_cascade(const std::filesystem::path& path, std::optional<std::uint64_t> expected_fingerprint)
{
	return deserialize_cascade(detail::read_file(path.string()), expected_fingerprint);
}

} // namespace facecascade
