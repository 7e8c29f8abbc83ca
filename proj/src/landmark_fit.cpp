#include "facecascade/landmark_fit.hpp"

#include <algorithm>
#include <cmath>

namespace facecascade {

void FitConfig::validate() const
{
	if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
		throw std::invalid_argument("fit lambdas must be finite and non-negative");
	if (max_alternations < 1)
		throw std::invalid_argument("max_alternations must be positive");
	if (!(rel_tol >= 0.0))
		throw std::invalid_argument("rel_tol must be non-negative");
}

namespace {

void check_landmarks(const BilinearModel& model, const LandmarkSet& landmarks)
{
	if (static_cast<std::size_t>(landmarks.points.rows()) != model.num_landmarks())
		throw std::invalid_argument("landmark count does not match model");
	if (!landmarks.points.allFinite())
		throw std::invalid_argument("landmarks must be finite");
}

double prior(const Vec& x, const Vec& mu, const Vec& var)
{
	return ((x - mu).array().square() / var.array()).sum();
}

} // namespace

double fit_objective(const BilinearModel& model, const LandmarkSet& landmarks, const ShapeParams& params,
                     const CameraPose& pose, const FitConfig& config)
{
	check_landmarks(model, landmarks);
	const Points2 proj = project(pose, landmark_positions(model, params));
	const double data = (landmarks.points - proj).squaredNorm();
	return data + config.lambda1 * prior(params.alpha, model.mu_id, model.var_id) +
	       config.lambda2 * prior(params.beta, model.mu_exp, model.var_exp);
}

double mean_reprojection_error(const BilinearModel& model, const LandmarkSet& landmarks, const ShapeParams& params,
                               const CameraPose& pose)
{
	check_landmarks(model, landmarks);
	const Points2 proj = project(pose, landmark_positions(model, params));
	return (landmarks.points - proj).rowwise().norm().mean();
}

CameraPose init_pose(const BilinearModel& model, const LandmarkSet& landmarks)
{
	check_landmarks(model, landmarks);
	return solve_pose(landmarks.points, landmark_positions(model, ShapeParams::mean(model)));
}

ShapeParams solve_params_given_pose(const BilinearModel& model, const LandmarkSet& landmarks, const CameraPose& pose,
                                    const FitConfig& config, ParamBlock fixed, const ShapeParams& current)
{
	check_landmarks(model, landmarks);
	check_params(model, current);

	const bool solve_alpha = fixed == ParamBlock::beta;
	const Mat basis = solve_alpha ? shape_basis_id(model, current.beta, model.landmark_indices)
	                              : shape_basis_exp(model, current.alpha, model.landmark_indices);
	const Vec& mu = solve_alpha ? model.mu_id : model.mu_exp;
	const Vec& var = solve_alpha ? model.var_id : model.var_exp;
	const double lambda = solve_alpha ? config.lambda1 : config.lambda2;

	// Projected landmarks are affine in the free block: p = J x + t.
	const Eigen::Index n_lm = static_cast<Eigen::Index>(model.num_landmarks());
	const Eigen::Matrix<double, 2, 3> proj = pose.scale * pose.rotation.topRows<2>();
	Mat jac(2 * n_lm, basis.cols());
	Vec rhs(2 * n_lm);
	for (Eigen::Index k = 0; k < n_lm; ++k) {
		jac.middleRows<2>(2 * k) = proj * basis.middleRows<3>(3 * k);
		rhs.segment<2>(2 * k) = landmarks.points.row(k).transpose() - pose.translation;
	}

	const Vec q = var.cwiseInverse();
	Mat normal = jac.transpose() * jac;
	normal.diagonal() += lambda * q;
	const Vec b = jac.transpose() * rhs + lambda * q.cwiseProduct(mu);

	Eigen::LDLT<Mat> ldlt(normal);
	if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13)
		throw NumericalRankError("landmark fit: normal matrix is singular (zero regularization and rank-deficient "
		                         "landmark basis)");
	const Vec x = ldlt.solve(b);

	ShapeParams out = current;
	(solve_alpha ? out.alpha : out.beta) = x;
	return out;
}

LandmarkFitResult landmark_fit(const BilinearModel& model, const LandmarkSet& landmarks, const FitConfig& config)
{
	config.validate();
	LandmarkFitResult result;
	result.params = ShapeParams::mean(model);
	result.pose = init_pose(model, landmarks);
	double objective = fit_objective(model, landmarks, result.params, result.pose, config);
	result.objective_trace.push_back(objective);

	for (int round = 0; round < config.max_alternations; ++round) {
		const double start = objective;

		result.params = solve_params_given_pose(model, landmarks, result.pose, config, ParamBlock::beta, result.params);
		result.objective_trace.push_back(fit_objective(model, landmarks, result.params, result.pose, config));
		result.params = solve_params_given_pose(model, landmarks, result.pose, config, ParamBlock::alpha, result.params);
		objective = fit_objective(model, landmarks, result.params, result.pose, config);
		result.objective_trace.push_back(objective);

		// Closed-form re-solve, then descent on the data term from the better
		// of it and the current pose. The guard keeps the objective monotone.
		const Points3 shape_lm = landmark_positions(model, result.params);
		const CameraPose solved = solve_pose(landmarks.points, shape_lm);
		const bool take_solved = (landmarks.points - project(solved, shape_lm)).squaredNorm() <
		                         (landmarks.points - project(result.pose, shape_lm)).squaredNorm();
		const CameraPose candidate = refine_pose(landmarks.points, shape_lm, take_solved ? solved : result.pose);
		const double with_candidate = fit_objective(model, landmarks, result.params, candidate, config);
		if (with_candidate <= objective) {
			result.pose = candidate;
			objective = with_candidate;
		}
		result.objective_trace.push_back(objective);
		result.rounds = round + 1;

		if (std::abs(start - objective) <= config.rel_tol * std::max(start, 1e-300))
			break;
	}
	return result;
}

} // namespace facecascade
