#include "facecascade/dataprep.hpp"

#include "parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace facecascade {

Points3 RigidTransform3D::apply(const Points3& points) const
{
	return ((scale * points * rotation.transpose()).rowwise() + translation.transpose()).eval();
}

RigidTransform3D RigidTransform3D::inverse() const
{
	RigidTransform3D inv;
	inv.scale = 1.0 / scale;
	inv.rotation = rotation.transpose();
	inv.translation = -inv.scale * (inv.rotation * translation);
	return inv;
}

namespace {

// Weighted Umeyama alignment; weights need not be normalized.
RigidTransform3D weighted_procrustes(const Points3& src, const Points3& dst, const Vec& w)
{
	if (src.rows() != dst.rows() || src.rows() != w.size())
		throw std::invalid_argument("procrustes3d: point sets differ in size");
	if (src.rows() < 3)
		throw DegenerateConfiguration("procrustes3d: need at least 3 points");
	if (!src.allFinite() || !dst.allFinite())
		throw std::invalid_argument("procrustes3d: points must be finite");
	const double wsum = w.sum();
	if (!(wsum > 0.0))
		throw DegenerateConfiguration("procrustes3d: zero total weight");

	const Vec3 ms = (src.transpose() * w) / wsum;
	const Vec3 md = (dst.transpose() * w) / wsum;
	const Points3 sc = src.rowwise() - ms.transpose();
	const Points3 dc = dst.rowwise() - md.transpose();

	const Mat3 src_cov = (sc.transpose() * w.asDiagonal() * sc) / wsum;
	Eigen::SelfAdjointEigenSolver<Mat3> es(src_cov);
	const Vec3 ev = es.eigenvalues();
	if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2])
		throw DegenerateConfiguration("procrustes3d: source points are coincident or collinear");

	const Mat3 cov = (dc.transpose() * w.asDiagonal() * sc) / wsum;
	Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
	Vec3 s(1.0, 1.0, 1.0);
	if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0)
		s[2] = -1.0;

	RigidTransform3D out;
	out.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
	const double var_src = src_cov.trace();
	out.scale = svd.singularValues().dot(s) / var_src;
	if (!(out.scale > 0.0))
		throw DegenerateConfiguration("procrustes3d: target points collapse");
	out.translation = md - out.scale * out.rotation * ms;
	return out;
}

void check_cloud(const BilinearModel& model, const PointCloud& cloud)
{
	if (cloud.points.rows() == 0)
		throw std::invalid_argument("icp_fit: empty point cloud");
	if (static_cast<std::size_t>(cloud.landmark3d.rows()) != model.num_landmarks())
		throw std::invalid_argument("icp_fit: landmark count does not match model");
	if (cloud.points.rows() < cloud.landmark3d.rows())
		throw std::invalid_argument("icp_fit: cloud has fewer points than landmarks");
	if (!cloud.points.allFinite() || !cloud.landmark3d.allFinite())
		throw std::invalid_argument("icp_fit: cloud must be finite");
}

double prior(const Vec& x, const Vec& mu, const Vec& var)
{
	return ((x - mu).array().square() / var.array()).sum();
}

Points3 rows_of(const Points3& points, const std::vector<std::uint32_t>& idx)
{
	Points3 out(static_cast<Eigen::Index>(idx.size()), 3);
	for (std::size_t k = 0; k < idx.size(); ++k)
		out.row(static_cast<Eigen::Index>(k)) = points.row(idx[k]);
	return out;
}

// Residual terms expressed in model coordinates: target points are pulled
// back through the current transform.
struct Terms {
	std::vector<std::uint32_t> vertices;
	Points3 targets;
	Vec weights;
};

Terms make_terms(const BilinearModel& model, const PointCloud& cloud, const RigidTransform3D& transform,
                 const std::vector<std::uint32_t>& dense_vertices, const std::vector<Eigen::Index>& dense_match,
                 double landmark_weight)
{
	const std::size_t nd = dense_vertices.size();
	const std::size_t nl = model.num_landmarks();
	Terms t;
	t.vertices.reserve(nd + nl);
	Points3 scan(static_cast<Eigen::Index>(nd + nl), 3);
	t.weights.resize(static_cast<Eigen::Index>(nd + nl));
	for (std::size_t k = 0; k < nd; ++k) {
		t.vertices.push_back(dense_vertices[k]);
		scan.row(static_cast<Eigen::Index>(k)) = cloud.points.row(dense_match[k]);
		t.weights[static_cast<Eigen::Index>(k)] = 1.0;
	}
	for (std::size_t k = 0; k < nl; ++k) {
		t.vertices.push_back(model.landmark_indices[k]);
		scan.row(static_cast<Eigen::Index>(nd + k)) = cloud.landmark3d.row(static_cast<Eigen::Index>(k));
		t.weights[static_cast<Eigen::Index>(nd + k)] = landmark_weight;
	}
	t.targets = transform.inverse().apply(scan);
	return t;
}

// Scan-frame objective: sum w ||T(v) - c||^2 = s^2 sum w ||v - T^-1(c)||^2,
// plus the priors.
double terms_objective(const BilinearModel& model, const ShapeParams& params, const RigidTransform3D& transform,
                       const Terms& t, const IcpConfig& config)
{
	const Points3 verts = rows_of(synthesize(model, params).positions, t.vertices);
	const double data =
		transform.scale * transform.scale *
		((verts - t.targets).rowwise().squaredNorm().transpose().array() * t.weights.transpose().array()).sum();
	return data + config.lambda1 * prior(params.alpha, model.mu_id, model.var_id) +
	       config.lambda2 * prior(params.beta, model.mu_exp, model.var_exp);
}

// Closed-form ridge solve of one parameter block with the other fixed.
ShapeParams solve_block(const BilinearModel& model, const ShapeParams& current, double scale, const Terms& t,
                        const IcpConfig& config, bool solve_alpha)
{
	const Mat basis = solve_alpha ? shape_basis_id(model, current.beta, t.vertices)
	                              : shape_basis_exp(model, current.alpha, t.vertices);
	const Vec& mu = solve_alpha ? model.mu_id : model.mu_exp;
	const Vec& var = solve_alpha ? model.var_id : model.var_exp;
	const double lambda = solve_alpha ? config.lambda1 : config.lambda2;

	Vec row_w(basis.rows());
	Vec target(basis.rows());
	for (Eigen::Index k = 0; k < t.targets.rows(); ++k) {
		row_w.segment<3>(3 * k).setConstant(t.weights[k]);
		target.segment<3>(3 * k) = t.targets.row(k).transpose();
	}

	const Vec q = var.cwiseInverse();
	const double s2 = scale * scale;
	Mat normal = s2 * (basis.transpose() * row_w.asDiagonal() * basis);
	normal.diagonal() += lambda * q;
	const Vec b = s2 * (basis.transpose() * row_w.cwiseProduct(target)) + lambda * q.cwiseProduct(mu);
	Eigen::LDLT<Mat> ldlt(normal);
	if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13)
		throw NumericalRankError("icp_fit: normal matrix is singular");

	ShapeParams out = current;
	(solve_alpha ? out.alpha : out.beta) = ldlt.solve(b);
	return out;
}

} // namespace

RigidTransform3D procrustes3d(const Points3& src, const Points3& dst)
{
	return weighted_procrustes(src, dst, Vec::Ones(src.rows()));
}

IcpResult icp_fit(const BilinearModel& model, const PointCloud& cloud, const IcpConfig& config)
{
	check_cloud(model, cloud);
	if (config.iterations < 0 || !(config.landmark_weight > 0.0) || !(config.outlier_factor > 0.0) ||
	    !(config.lambda1 >= 0.0) || !(config.lambda2 >= 0.0) || !(config.rel_tol >= 0.0))
		throw std::invalid_argument("icp_fit: invalid configuration");

	IcpResult result;
	result.params = ShapeParams::mean(model);
	const Eigen::Index m = cloud.points.rows();

	// Parameter update for fixed correspondences: alpha, then beta, then a
	// move along the scale orbit of the bilinear model, which leaves the data
	// term unchanged and is accepted only if it lowers the priors.
	auto update_params = [&](const Terms& t) {
		result.params = solve_block(model, result.params, result.transform.scale, t, config, true);
		result.params = solve_block(model, result.params, result.transform.scale, t, config, false);
		if (config.lambda1 > 0.0 && config.lambda2 > 0.0) {
			double factor = 1.0;
			const ShapeParams gauged = prior_gauge(model, result.params, &factor);
			RigidTransform3D moved = result.transform;
			moved.scale /= factor;
			Terms moved_terms = t;
			moved_terms.targets *= factor; // pulled back through the moved transform
			if (terms_objective(model, gauged, moved, moved_terms, config) <=
			    terms_objective(model, result.params, result.transform, t, config)) {
				result.params = gauged;
				result.transform = moved;
			}
		}
	};

	// Landmark-only initialization.
	const std::vector<std::uint32_t> none;
	const std::vector<Eigen::Index> no_match;
	result.transform = procrustes3d(landmark_positions(model, result.params), cloud.landmark3d);
	for (int pass = 0; pass < 2; ++pass) {
		update_params(make_terms(model, cloud, result.transform, none, no_match, config.landmark_weight));
		result.transform = procrustes3d(landmark_positions(model, result.params), cloud.landmark3d);
	}

	double previous = 0.0;
	for (int it = 0;; ++it) {
		// Nearest cloud point for every transformed model vertex.
		const Shape shape = synthesize(model, result.params);
		const Points3 placed = result.transform.apply(shape.positions);
		std::vector<Eigen::Index> match(model.n_vertices);
		std::vector<double> dist(model.n_vertices);
		detail::parallel_for(model.n_vertices, config.threads, [&](std::size_t i) {
			const Eigen::RowVector3d p = placed.row(static_cast<Eigen::Index>(i));
			double best = std::numeric_limits<double>::infinity();
			Eigen::Index arg = 0;
			for (Eigen::Index j = 0; j < m; ++j) {
				const double d = (cloud.points.row(j) - p).squaredNorm();
				if (d < best) {
					best = d;
					arg = j;
				}
			}
			match[i] = arg;
			dist[i] = std::sqrt(best);
		});

		std::vector<double> sorted = dist;
		std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
		const double cutoff = config.outlier_factor * sorted[sorted.size() / 2];
		std::vector<std::uint32_t> kept;
		std::vector<Eigen::Index> kept_match;
		for (std::uint32_t i = 0; i < model.n_vertices; ++i) {
			if (dist[i] <= cutoff) {
				kept.push_back(i);
				kept_match.push_back(match[i]);
			}
		}

		// Objective at the fresh correspondences, before this iteration's
		// updates.
		const Terms before = make_terms(model, cloud, result.transform, kept, kept_match, config.landmark_weight);
		const double objective = terms_objective(model, result.params, result.transform, before, config);
		result.residual_trace.push_back(objective);
		if (it > 0 && std::abs(previous - objective) < config.rel_tol * std::max(previous, 1e-300))
			break;
		if (it == config.iterations)
			break;
		previous = objective;
		result.iterations = it + 1;

		// Rigid re-solve on the dense and landmark correspondences.
		Points3 src(static_cast<Eigen::Index>(kept.size()) + cloud.landmark3d.rows(), 3);
		Points3 dst(src.rows(), 3);
		Vec w(src.rows());
		for (std::size_t k = 0; k < kept.size(); ++k) {
			src.row(static_cast<Eigen::Index>(k)) = shape.positions.row(kept[k]);
			dst.row(static_cast<Eigen::Index>(k)) = cloud.points.row(kept_match[k]);
			w[static_cast<Eigen::Index>(k)] = 1.0;
		}
		const Points3 lm = rows_of(shape.positions, model.landmark_indices);
		for (Eigen::Index k = 0; k < lm.rows(); ++k) {
			const Eigen::Index r = static_cast<Eigen::Index>(kept.size()) + k;
			src.row(r) = lm.row(k);
			dst.row(r) = cloud.landmark3d.row(k);
			w[r] = config.landmark_weight;
		}
		result.transform = weighted_procrustes(src, dst, w);
		update_params(make_terms(model, cloud, result.transform, kept, kept_match, config.landmark_weight));
	}
	return result;
}

Points3 read_ply(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw std::runtime_error("cannot open " + path.string());
	std::string line;
	if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
		throw ParseError("magic", "not a PLY file");

	struct Element {
		std::string name;
		long count = 0;
		std::vector<std::string> props;
	};
	std::vector<Element> elements;
	bool ascii = false;
	while (true) {
		if (!std::getline(in, line))
			throw ParseError("header", "missing end_header");
		std::istringstream ls(line);
		std::string key;
		ls >> key;
		if (key == "end_header")
			break;
		if (key == "format") {
			std::string fmt;
			ls >> fmt;
			ascii = fmt == "ascii";
		}
		else if (key == "element") {
			Element e;
			ls >> e.name >> e.count;
			if (!ls || e.count < 0)
				throw ParseError("element", "bad element declaration");
			elements.push_back(e);
		}
		else if (key == "property") {
			if (elements.empty())
				throw ParseError("property", "property before element");
			std::string type, name;
			ls >> type;
			if (type == "list") {
				std::string a, b;
				ls >> a >> b;
			}
			ls >> name;
			elements.back().props.push_back(name);
		}
	}
	if (!ascii)
		throw ParseError("format", "only ASCII PLY is supported");

	for (const Element& e : elements) {
		if (e.name != "vertex") {
			for (long i = 0; i < e.count; ++i)
				if (!std::getline(in, line))
					throw ParseError(e.name, "unexpected end of file");
			continue;
		}
		int ix = -1, iy = -1, iz = -1;
		for (std::size_t p = 0; p < e.props.size(); ++p) {
			if (e.props[p] == "x")
				ix = static_cast<int>(p);
			else if (e.props[p] == "y")
				iy = static_cast<int>(p);
			else if (e.props[p] == "z")
				iz = static_cast<int>(p);
		}
		if (ix < 0 || iy < 0 || iz < 0)
			throw ParseError("vertex", "missing x/y/z properties");
		Points3 out(e.count, 3);
		std::vector<double> vals(e.props.size());
		for (long i = 0; i < e.count; ++i) {
			if (!std::getline(in, line))
				throw ParseError("vertex", "unexpected end of file");
			std::istringstream ls(line);
			for (double& v : vals)
				if (!(ls >> v))
					throw ParseError("vertex", "malformed vertex line " + std::to_string(i));
			out(i, 0) = vals[static_cast<std::size_t>(ix)];
			out(i, 1) = vals[static_cast<std::size_t>(iy)];
			out(i, 2) = vals[static_cast<std::size_t>(iz)];
			if (!out.row(i).allFinite())
				throw ParseError("vertex", "non-finite coordinate");
		}
		return out;
	}
	throw ParseError("vertex", "no vertex element");
}

void write_ply(const Points3& points, const std::filesystem::path& path)
{
	std::ofstream out(path);
	if (!out)
		throw std::runtime_error("cannot write " + path.string());
	out << "ply\nformat ascii 1.0\nelement vertex " << points.rows()
	    << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
	out.precision(17);
	for (Eigen::Index i = 0; i < points.rows(); ++i)
		out << points(i, 0) << ' ' << points(i, 1) << ' ' << points(i, 2) << '\n';
	if (!out)
		throw std::runtime_error("failed writing " + path.string());
}

Points3 read_landmarks3d(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw std::runtime_error("cannot open " + path.string());
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(in);
	}
	catch (const nlohmann::json::exception& e) {
		throw ParseError("json", e.what());
	}
	if (!j.is_object() || !j.contains("landmarks") || !j["landmarks"].is_array())
		throw ParseError("landmarks", "expected an array");
	const auto& arr = j["landmarks"];
	Points3 out(static_cast<Eigen::Index>(arr.size()), 3);
	for (std::size_t i = 0; i < arr.size(); ++i) {
		const auto& p = arr[i];
		if (!p.is_array() || p.size() != 3)
			throw ParseError("landmarks", "entry " + std::to_string(i) + " is not a 3-vector");
		for (int c = 0; c < 3; ++c) {
			if (!p[static_cast<std::size_t>(c)].is_number())
				throw ParseError("landmarks", "non-numeric coordinate");
			out(static_cast<Eigen::Index>(i), c) = p[static_cast<std::size_t>(c)].get<double>();
		}
	}
	return out;
}

void write_landmarks3d(const Points3& landmarks, const std::filesystem::path& path)
{
	nlohmann::json arr = nlohmann::json::array();
	for (Eigen::Index i = 0; i < landmarks.rows(); ++i)
		arr.push_back({landmarks(i, 0), landmarks(i, 1), landmarks(i, 2)});
	std::ofstream out(path);
	if (!out)
		throw std::runtime_error("cannot write " + path.string());
	out << nlohmann::json{{"landmarks", arr}}.dump(2) << '\n';
}

} // namespace facecascade
