#pragma once

#include "facecascade/camera.hpp"
#include "facecascade/model.hpp"

#include <string>
#include <vector>

namespace facecascade {

/// Detected 2D landmarks, one row per model landmark, in the internal y-up
/// frame (see `frame_from_pixel`).
struct LandmarkSet {
	Points2 points;
	std::string source_tag;
};

struct FitConfig {
	double lambda1 = 0.5;
	double lambda2 = 0.5;
	int max_alternations = 5;
	double rel_tol = 1e-6;

	void validate() const;
	bool operator==(const FitConfig&) const = default;
};

enum class ParamBlock { alpha, beta };

/// Squared reprojection error plus the Mahalanobis priors on both blocks.
double fit_objective(const BilinearModel& model, const LandmarkSet& landmarks, const ShapeParams& params,
                     const CameraPose& pose, const FitConfig& config);

/// Mean Euclidean distance between landmarks and projected model landmarks.
double mean_reprojection_error(const BilinearModel& model, const LandmarkSet& landmarks, const ShapeParams& params,
                               const CameraPose& pose);

/// Pose of the mean shape against the landmarks.
CameraPose init_pose(const BilinearModel& model, const LandmarkSet& landmarks);

/// Exact minimizer of `fit_objective` over the free block (the one not named
/// by `fixed`), holding the pose and the fixed block at their current values.
/// Throws NumericalRankError if the regularized normal matrix is singular.
ShapeParams solve_params_given_pose(const BilinearModel& model, const LandmarkSet& landmarks, const CameraPose& pose,
                                    const FitConfig& config, ParamBlock fixed, const ShapeParams& current);

struct LandmarkFitResult {
	ShapeParams params;
	CameraPose pose;
	/// Objective after the initial pose solve, then after every block step
	/// (alpha, beta, pose) of every round.
	std::vector<double> objective_trace;
	int rounds = 0;
};

LandmarkFitResult landmark_fit(const BilinearModel& model, const LandmarkSet& landmarks, const FitConfig& config);

} // namespace facecascade
