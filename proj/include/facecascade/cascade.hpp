#pragma once

#include "facecascade/features.hpp"
#include "facecascade/landmark_fit.hpp"
#include "facecascade/model.hpp"
#include "facecascade/sample.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace facecascade {

struct RidgeSolution {
	Mat weights; ///< d x p
	Vec bias;    ///< p
};

/// Affine ridge regression Y ~ X W + 1 b^T with the intercept unpenalized.
/// Columns are centered; the N x N dual system is used when N < d.
RidgeSolution ridge_fit(const Mat& x, const Mat& y, double lambda);

struct RegressorStage {
	Mat weights;          ///< d_feat x d_param
	Vec bias;             ///< d_param
	Vec feature_mean;     ///< d_feat
	Vec feature_scale;    ///< d_feat
	Vec param_scale;      ///< d_param, sqrt of the model variances
	/// Optional sparse random projection of the HOG block (applied before
	/// standardization), regenerated from its seed; dim 0 disables it.
	std::uint32_t hog_projection_dim = 0;
	std::uint64_t hog_projection_seed = 0;

	/// Raw stage input: [hog (possibly projected); ld].
	Vec raw_input(const FeatureVector& f) const;
	/// Standardized stage input.
	Vec prepare(const FeatureVector& f) const;
	/// Parameter increment delta g from a standardized input.
	Vec predict_prepared(const Vec& z) const;
	Vec predict(const FeatureVector& f) const { return predict_prepared(prepare(f)); }

	bool operator==(const RegressorStage&) const = default;
};

struct CascadeConfig {
	int stages = 5;
	double lambda_r = 100.0;
	/// 0 disables HOG dimensionality reduction.
	int hog_projection_dim = 0;
	std::uint64_t projection_seed = 7;

	void validate() const;
	bool operator==(const CascadeConfig&) const = default;
};

struct CascadeRegressor {
	std::vector<RegressorStage> stages;
	HogConfig hog;
	FitConfig fit;
	CascadeConfig config;
	std::uint64_t model_fingerprint = 0;

	bool operator==(const CascadeRegressor&) const = default;
};

struct StageLog {
	int stage = 0;              ///< 0 is the landmark-fit initialization
	double mean_sq_error = 0;   ///< mean over samples of ||(g* - g) / sigma||^2
	double mean_error = 0;      ///< mean over samples of ||(g* - g) / sigma||
	double constant_mse = 0;    ///< bias-only predictor MSE on the stage targets (stages >= 1)
};

struct TrainResult {
	CascadeRegressor regressor;
	std::vector<StageLog> log;
	/// Indices (into the input list) of samples that were used; the rest
	/// failed initialization.
	std::vector<std::size_t> kept;
	std::vector<std::string> warnings;
	/// Final parameters per kept sample, aligned with `kept`.
	std::vector<ShapeParams> final_params;
};

using ProgressFn = std::function<void(const std::string&)>;

/// `threads` only affects wall time; results are identical for any value.
TrainResult train(const BilinearModel& model, const std::vector<TrainingSample>& samples, const HogConfig& hog,
                  const FitConfig& fit, const CascadeConfig& config, const ProgressFn& progress = {},
                  int threads = 1);

/// Sparse sign projection (4 non-zeros per input column, scaled by 1/2)
/// from `in_dim` to `out_dim`, fully determined by `seed`.
Vec sparse_projection(const Vec& x, std::uint32_t out_dim, std::uint64_t seed);

struct FitResult {
	bool ok = false;
	std::string error;
	ShapeParams params;
	CameraPose pose;
	Shape shape;
	/// Parameters after initialization and after each stage.
	std::vector<ShapeParams> trace;
};

/// Initialization plus all stages. Initialization failures are reported in
/// the result instead of thrown. Throws FingerprintMismatch when the
/// regressor was trained against a different model.
FitResult fit_image(const CascadeRegressor& regressor, const BilinearModel& model, const Image& image,
                    const LandmarkSet& landmarks);

inline constexpr std::uint32_t kCascadeFormatVersion = 1;

void save_cascade(const CascadeRegressor& regressor, const std::filesystem::path& path);
/// Without `expected_fingerprint` the model check is skipped (forced load).
CascadeRegressor load_cascade(const std::filesystem::path& path,
                              std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

std::vector<std::uint8_t> serialize_cascade(const CascadeRegressor& regressor);
CascadeRegressor deserialize_cascade(std::span<const std::uint8_t> bytes,
                                     std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

/// Whitened parameter error ||(g* - g) / sqrt(var)||.
double whitened_error(const BilinearModel& model, const ShapeParams& truth, const ShapeParams& estimate);

} // namespace facecascade
