#include "facecascade/synth.hpp"

#include "facecascade/json_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace facecascade {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Spread of the constant modes (alpha[0], beta[0]), which scale the base mesh.
constexpr double kConstantModeStd = 0.05;

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index)
{
	std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
	                  static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
	return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
	if (lo == hi)
		return lo;
	return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Field {
	enum Dir { normal, tangent_x, tangent_y } dir;
	int p, q;
	double amplitude;
};

double cosine_basis(int p, int q, double u, double v)
{
	return std::cos(p * std::numbers::pi * (u + 1) / 2) * std::cos(q * std::numbers::pi * (v + 1) / 2);
}

// Deformation templates ordered by spatial frequency. Pure translations and
// uniform inflation are left out because the camera absorbs them.
std::vector<Field> identity_fields(std::size_t count)
{
	static const std::vector<Field> base = {
		{Field::normal, 0, 1, 0.10},    {Field::tangent_x, 1, 0, 0.08}, {Field::normal, 1, 1, 0.10},
		{Field::tangent_y, 0, 1, 0.08}, {Field::normal, 2, 0, 0.10},    {Field::tangent_x, 1, 2, 0.06},
		{Field::normal, 0, 2, 0.10},    {Field::tangent_y, 2, 1, 0.06}, {Field::normal, 2, 2, 0.08},
		{Field::tangent_x, 3, 0, 0.06}, {Field::normal, 1, 3, 0.08},    {Field::tangent_y, 0, 3, 0.06},
	};
	std::vector<Field> out;
	for (std::size_t i = 0; i < count; ++i) {
		Field f = base[i % base.size()];
		const int octave = static_cast<int>(i / base.size());
		f.p += 3 * octave;
		f.q += 2 * octave;
		f.amplitude /= (1 + octave);
		out.push_back(f);
	}
	return out;
}

std::vector<Field> expression_fields(std::size_t count)
{
	static const std::vector<Field> base = {
		{Field::tangent_y, 1, 3, 0.07}, {Field::tangent_x, 2, 3, 0.07}, {Field::normal, 3, 1, 0.08},
		{Field::tangent_y, 3, 2, 0.06}, {Field::normal, 0, 3, 0.08},    {Field::tangent_x, 0, 2, 0.06},
		{Field::normal, 3, 3, 0.06},    {Field::tangent_y, 2, 0, 0.06},
	};
	std::vector<Field> out;
	for (std::size_t i = 0; i < count; ++i) {
		Field f = base[i % base.size()];
		const int octave = static_cast<int>(i / base.size());
		f.p += 2 * octave;
		f.q += 3 * octave;
		f.amplitude /= (1 + octave);
		out.push_back(f);
	}
	return out;
}

struct SurfaceGrid {
	int side = 0;
	std::vector<double> u, v;
	Points3 positions;
	Points3 normals;
};

SurfaceGrid ellipsoid_grid(std::uint32_t n_vertices)
{
	SurfaceGrid g;
	g.side = std::max(10, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_vertices)))));
	const int n = g.side * g.side;
	const double rx = 1.0, ry = 1.25, rz = 0.9;
	const double theta_max = 70 * kDeg, phi_max = 60 * kDeg;
	g.positions.resize(n, 3);
	g.normals.resize(n, 3);
	for (int r = 0; r < g.side; ++r)
		for (int c = 0; c < g.side; ++c) {
			const int i = r * g.side + c;
			const double u = -1.0 + 2.0 * c / (g.side - 1);
			const double v = 1.0 - 2.0 * r / (g.side - 1);
			g.u.push_back(u);
			g.v.push_back(v);
			const double th = u * theta_max, ph = v * phi_max;
			const Vec3 p(rx * std::sin(th) * std::cos(ph), ry * std::sin(ph), rz * std::cos(th) * std::cos(ph));
			g.positions.row(i) = p.transpose();
			g.normals.row(i) = Vec3(p.x() / (rx * rx), p.y() / (ry * ry), p.z() / (rz * rz)).normalized().transpose();
		}
	// Center the mesh on its bounding box so rotations keep it in frame.
	const Eigen::RowVector3d center = 0.5 * (g.positions.colwise().minCoeff() + g.positions.colwise().maxCoeff());
	g.positions.rowwise() -= center;
	return g;
}

Vec field_values(const SurfaceGrid& g, const Field& f)
{
	const Eigen::Index n = g.positions.rows();
	Vec out(3 * n);
	for (Eigen::Index i = 0; i < n; ++i) {
		const double s = f.amplitude * cosine_basis(f.p, f.q, g.u[static_cast<std::size_t>(i)],
		                                            g.v[static_cast<std::size_t>(i)]);
		Vec3 d = Vec3::Zero();
		switch (f.dir) {
		case Field::normal: d = g.normals.row(i).transpose(); break;
		case Field::tangent_x: d = Vec3::UnitX(); break;
		case Field::tangent_y: d = Vec3::UnitY(); break;
		}
		out.segment<3>(3 * i) = s * d;
	}
	return out;
}

double correlation(const Vec& a, const Vec& b)
{
	const Vec ca = a.array() - a.mean();
	const Vec cb = b.array() - b.mean();
	const double denom = ca.norm() * cb.norm();
	return denom > 0 ? ca.dot(cb) / denom : 0.0;
}

std::vector<std::uint32_t> grid_landmarks(int side)
{
	auto at = [side](double frac) { return static_cast<int>(std::lround(frac * (side - 1))); };
	std::vector<std::uint32_t> out;
	// 49 inner points on a 7 x 7 lattice.
	for (int r = 0; r < 7; ++r)
		for (int c = 0; c < 7; ++c)
			out.push_back(static_cast<std::uint32_t>(at(0.2 + 0.1 * r) * side + at(0.2 + 0.1 * c)));
	// 17 boundary points along a U-shaped contour.
	const double rows[] = {0.15, 0.3, 0.45, 0.6, 0.75, 0.9};
	for (double fr : rows)
		out.push_back(static_cast<std::uint32_t>(at(fr) * side + 1));
	for (double fc : {0.2, 0.35, 0.5, 0.65, 0.8})
		out.push_back(static_cast<std::uint32_t>((side - 2) * side + at(fc)));
	for (auto it = std::rbegin(rows); it != std::rend(rows); ++it)
		out.push_back(static_cast<std::uint32_t>(at(*it) * side + side - 2));
	return out;
}

} // namespace

void SynthConfig::validate() const
{
	if (n_samples < 0)
		throw std::invalid_argument("n_samples must be non-negative");
	if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
		throw std::invalid_argument("test_fraction must be in [0, 1]");
	if (d_id < 1 || d_exp < 1 || n_vertices < 1)
		throw std::invalid_argument("model dimensions must be positive");
	if (yaw_min > yaw_max || pitch_min > pitch_max || roll_min > roll_max)
		throw std::invalid_argument("pose angle ranges must be ordered");
	if (!(scale_min > 0.0) || scale_min > scale_max)
		throw std::invalid_argument("scale range must be positive and ordered");
	if (!(translation_range >= 0.0) || !(landmark_sigma >= 0.0) || !(param_spread >= 0.0))
		throw std::invalid_argument("translation range, landmark sigma and param spread must be non-negative");
	if (image_size < 8)
		throw std::invalid_argument("image_size must be at least 8");
	if (!light_dir.allFinite() || light_dir.norm() == 0.0)
		throw std::invalid_argument("light_dir must be a finite non-zero vector");
	if (yaw_classes.empty())
		throw std::invalid_argument("yaw_classes must not be empty");
}

const std::vector<std::string>& expression_class_names()
{
	static const std::vector<std::string> names = {"neutral",   "mode1_pos", "mode1_neg", "mode2_pos",
	                                               "mode2_neg", "mode3_pos", "mode3_neg"};
	return names;
}

std::vector<Vec> expression_centroids(const BilinearModel& model)
{
	std::vector<Vec> out{model.mu_exp};
	for (std::uint32_t e = 1; e <= 3 && e < model.d_exp; ++e)
		for (double sign : {1.0, -1.0}) {
			Vec c = model.mu_exp;
			c[e] += sign * std::sqrt(model.var_exp[e]);
			out.push_back(c);
		}
	return out;
}

std::string expression_class(const BilinearModel& model, const Vec& beta)
{
	const auto centroids = expression_centroids(model);
	const Vec inv_std = model.var_exp.cwiseSqrt().cwiseInverse();
	std::size_t best = 0;
	double best_d = std::numeric_limits<double>::infinity();
	for (std::size_t k = 0; k < centroids.size(); ++k) {
		const double d = (beta - centroids[k]).cwiseProduct(inv_std).squaredNorm();
		if (d < best_d) {
			best_d = d;
			best = k;
		}
	}
	return expression_class_names()[best];
}

std::string yaw_class(const SynthConfig& config, double yaw_degrees)
{
	double best = config.yaw_classes.front();
	for (double c : config.yaw_classes)
		if (std::abs(std::abs(yaw_degrees) - c) < std::abs(std::abs(yaw_degrees) - best))
			best = c;
	return fmt::format("{:g}", best);
}

BilinearModel make_synthetic_model(const SynthConfig& config, double* max_mode_correlation)
{
	config.validate();
	const SurfaceGrid grid = ellipsoid_grid(config.n_vertices);
	const auto id_fields = identity_fields(config.d_id - 1);
	const auto exp_fields = expression_fields(config.d_exp - 1);

	BilinearModel m;
	m.n_vertices = static_cast<std::uint32_t>(grid.positions.rows());
	m.d_id = config.d_id;
	m.d_exp = config.d_exp;
	const std::size_t rows = m.rows();
	m.core.assign(rows * m.d_id * m.d_exp, 0.0);
	auto slice = [&](std::size_t a, std::size_t e) { return m.core.data() + rows * (a + m.d_id * e); };

	std::vector<Vec> id_vals, exp_vals;
	for (const auto& f : id_fields)
		id_vals.push_back(field_values(grid, f));
	for (const auto& f : exp_fields)
		exp_vals.push_back(field_values(grid, f));

	// Mode (0, 0) is the base mesh; with alpha = e0 and beta = e0 as the
	// means, the remaining slices act as identity and expression offsets.
	// Mixed slices couple the two so the model is genuinely bilinear.
	for (Eigen::Index i = 0; i < grid.positions.rows(); ++i)
		for (int c = 0; c < 3; ++c)
			slice(0, 0)[3 * i + c] = grid.positions(i, c);
	for (std::size_t a = 1; a < m.d_id; ++a)
		Eigen::Map<Vec>(slice(a, 0), static_cast<Eigen::Index>(rows)) = id_vals[a - 1];
	for (std::size_t e = 1; e < m.d_exp; ++e)
		Eigen::Map<Vec>(slice(0, e), static_cast<Eigen::Index>(rows)) = exp_vals[e - 1];
	for (std::size_t a = 1; a < m.d_id; ++a)
		for (std::size_t e = 1; e < m.d_exp; ++e) {
			Vec mixed(static_cast<Eigen::Index>(rows));
			for (Eigen::Index i = 0; i < grid.positions.rows(); ++i) {
				const double w = 0.25 * std::cos(static_cast<double>(e) * std::numbers::pi *
				                                 (grid.v[static_cast<std::size_t>(i)] + 1) / 2);
				mixed.segment<3>(3 * i) = w * id_vals[a - 1].segment<3>(3 * i);
			}
			Eigen::Map<Vec>(slice(a, e), static_cast<Eigen::Index>(rows)) = mixed;
		}

	m.mu_id = Vec::Zero(m.d_id);
	m.mu_id[0] = 1.0;
	m.mu_exp = Vec::Zero(m.d_exp);
	m.mu_exp[0] = 1.0;
	m.var_id = Vec::Ones(m.d_id);
	m.var_id[0] = kConstantModeStd * kConstantModeStd;
	m.var_exp = Vec::Ones(m.d_exp);
	m.var_exp[0] = kConstantModeStd * kConstantModeStd;

	m.landmark_indices = grid_landmarks(grid.side);
	for (int r = 0; r + 1 < grid.side; ++r)
		for (int c = 0; c + 1 < grid.side; ++c) {
			const auto v00 = static_cast<std::uint32_t>(r * grid.side + c);
			const auto v01 = v00 + 1;
			const auto v10 = v00 + static_cast<std::uint32_t>(grid.side);
			const auto v11 = v10 + 1;
			m.faces.push_back({v00, v10, v01});
			m.faces.push_back({v01, v10, v11});
		}

	if (max_mode_correlation) {
		std::vector<Vec> all = id_vals;
		all.insert(all.end(), exp_vals.begin(), exp_vals.end());
		double worst = 0.0;
		for (std::size_t i = 0; i < all.size(); ++i)
			for (std::size_t j = i + 1; j < all.size(); ++j)
				worst = std::max(worst, std::abs(correlation(all[i], all[j])));
		*max_mode_correlation = worst;
	}
	m.validate();
	return m;
}

GroundTruth sample_ground_truth(const BilinearModel& model, const SynthConfig& config, std::mt19937_64& rng)
{
	std::normal_distribution<double> normal(0.0, 1.0);
	GroundTruth gt;
	gt.params.alpha = model.mu_id;
	for (Eigen::Index a = 0; a < gt.params.alpha.size(); ++a)
		gt.params.alpha[a] += config.param_spread * std::sqrt(model.var_id[a]) * normal(rng);
	gt.params.beta = model.mu_exp;
	for (Eigen::Index e = 0; e < gt.params.beta.size(); ++e)
		gt.params.beta[e] += config.param_spread * std::sqrt(model.var_exp[e]) * normal(rng);

	gt.yaw_degrees = uniform(rng, config.yaw_min, config.yaw_max);
	gt.pitch_degrees = uniform(rng, config.pitch_min, config.pitch_max);
	gt.roll_degrees = uniform(rng, config.roll_min, config.roll_max);
	gt.pose.rotation = rotation_from_euler(gt.yaw_degrees * kDeg, gt.pitch_degrees * kDeg, gt.roll_degrees * kDeg);
	gt.pose.scale = uniform(rng, config.scale_min, config.scale_max);
	const double half = 0.5 * config.image_size;
	const double dx = uniform(rng, -config.translation_range, config.translation_range);
	const double dy = uniform(rng, -config.translation_range, config.translation_range);
	gt.pose.translation = frame_from_pixel(Vec2(half + dx, half + dy));
	return gt;
}

Image render(const BilinearModel& model, const ShapeParams& params, const CameraPose& pose, int image_size,
             const Vec3& light_dir)
{
	const Shape shape = synthesize(model, params);
	const Vec3 light = light_dir.normalized();
	const Eigen::Index n = shape.positions.rows();

	Points3 cam(n, 3);
	Eigen::Matrix<double, Eigen::Dynamic, 2> pix(n, 2);
	for (Eigen::Index i = 0; i < n; ++i) {
		const Vec3 q = pose.rotation * shape.positions.row(i).transpose();
		cam.row(i) = q.transpose();
		const Vec2 p = pixel_from_frame(Vec2(pose.scale * q.head<2>() + pose.translation));
		pix.row(i) = p.transpose();
	}

	Image img(image_size, image_size, 0.0);
	std::vector<double> depth(img.intensity.size(), -std::numeric_limits<double>::infinity());
	for (const auto& f : model.faces) {
		const Vec3 q0 = cam.row(f[0]).transpose(), q1 = cam.row(f[1]).transpose(), q2 = cam.row(f[2]).transpose();
		Vec3 normal = (q1 - q0).cross(q2 - q0);
		const double len = normal.norm();
		if (!(len > 0.0))
			continue;
		normal /= len;
		if (normal.z() <= 0.0)
			continue;
		const double shade = std::max(0.0, normal.dot(light));

		const Vec2 p0 = pix.row(f[0]).transpose(), p1 = pix.row(f[1]).transpose(), p2 = pix.row(f[2]).transpose();
		const double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
		if (area == 0.0)
			continue;
		const int xmin = std::max(0, static_cast<int>(std::ceil(std::min({p0.x(), p1.x(), p2.x()}))));
		const int xmax = std::min(image_size - 1, static_cast<int>(std::floor(std::max({p0.x(), p1.x(), p2.x()}))));
		const int ymin = std::max(0, static_cast<int>(std::ceil(std::min({p0.y(), p1.y(), p2.y()}))));
		const int ymax = std::min(image_size - 1, static_cast<int>(std::floor(std::max({p0.y(), p1.y(), p2.y()}))));
		for (int y = ymin; y <= ymax; ++y)
			for (int x = xmin; x <= xmax; ++x) {
				const double w0 = ((p1.x() - x) * (p2.y() - y) - (p2.x() - x) * (p1.y() - y)) / area;
				const double w1 = ((p2.x() - x) * (p0.y() - y) - (p0.x() - x) * (p2.y() - y)) / area;
				const double w2 = 1.0 - w0 - w1;
				if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
					continue;
				const double z = w0 * q0.z() + w1 * q1.z() + w2 * q2.z();
				double& zb = depth[static_cast<std::size_t>(y) * image_size + x];
				if (z > zb) {
					zb = z;
					img.at(x, y) = shade;
				}
			}
	}
	return img;
}

void quantize_8bit(Image& image)
{
	for (double& v : image.intensity)
		v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
}

std::vector<SynthSample> generate_dataset(const BilinearModel& model, const SynthConfig& config)
{
	config.validate();
	const int n_test = static_cast<int>(std::lround(config.test_fraction * config.n_samples));
	std::vector<SynthSample> out(static_cast<std::size_t>(config.n_samples));
	for (int j = 0; j < config.n_samples; ++j) {
		auto rng = sample_rng(config.seed, static_cast<std::uint64_t>(j));
		SynthSample& s = out[static_cast<std::size_t>(j)];
		s.id = fmt::format("s{:05d}", j);
		s.truth = sample_ground_truth(model, config, rng);
		s.sample.g_star = s.truth.params;
		s.sample.image = render(model, s.truth.params, s.truth.pose, config.image_size, config.light_dir);
		quantize_8bit(s.sample.image);
		s.clean_landmarks = project(s.truth.pose, landmark_positions(model, s.truth.params));
		s.sample.landmarks.points = s.clean_landmarks;
		std::normal_distribution<double> noise(0.0, 1.0);
		for (Eigen::Index i = 0; i < s.clean_landmarks.rows(); ++i)
			for (int c = 0; c < 2; ++c)
				s.sample.landmarks.points(i, c) += config.landmark_sigma * noise(rng);
		s.sample.landmarks.source_tag = fmt::format("synthetic sigma={:g}", config.landmark_sigma);
		s.yaw_class = yaw_class(config, s.truth.yaw_degrees);
		s.expression_class = expression_class(model, s.truth.params.beta);
		s.test = j >= config.n_samples - n_test;
	}
	return out;
}

SyntheticScan make_synthetic_scan(const BilinearModel& model, const SynthConfig& config, std::uint64_t index,
                                  int points_per_face)
{
	config.validate();
	if (points_per_face < 0)
		throw std::invalid_argument("points_per_face must be non-negative");
	// Offset the stream so scans never share draws with image samples.
	auto rng = sample_rng(config.seed ^ 0x5ca75ca75ca75ca7ULL, index);
	SyntheticScan scan;
	const GroundTruth gt = sample_ground_truth(model, config, rng);
	// A scan fixes the parameters only up to the bilinear scale orbit, so the
	// planted parameters are its prior-optimal representative; the factor
	// goes into the transform and the scanned surface is unchanged.
	double factor = 1.0;
	scan.params = prior_gauge(model, gt.params, &factor);
	scan.transform.rotation = gt.pose.rotation;
	scan.transform.scale = uniform(rng, 50.0, 150.0) / factor;
	for (int c = 0; c < 3; ++c)
		scan.transform.translation[c] = uniform(rng, -100.0, 100.0);

	const Shape shape = synthesize(model, scan.params);
	const Eigen::Index n = shape.positions.rows();
	Points3 pts(n + static_cast<Eigen::Index>(model.faces.size()) * points_per_face, 3);
	pts.topRows(n) = shape.positions;
	Eigen::Index row = n;
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	for (const Triangle& f : model.faces)
		for (int k = 0; k < points_per_face; ++k) {
			double u = unit(rng), v = unit(rng);
			if (u + v > 1.0) {
				u = 1.0 - u;
				v = 1.0 - v;
			}
			pts.row(row++) = (1.0 - u - v) * shape.positions.row(f[0]) + u * shape.positions.row(f[1]) +
			                 v * shape.positions.row(f[2]);
		}
	scan.cloud.points = scan.transform.apply(pts);
	scan.cloud.landmark3d = scan.transform.apply(landmark_positions(model, scan.params));
	return scan;
}

void write_landmarks(const LandmarkSet& landmarks, const std::string& image_path, const std::filesystem::path& path)
{
	json j = {{"image", image_path},
	          {"landmarks", to_json(pixel_from_frame(landmarks.points))},
	          {"source_tag", landmarks.source_tag}};
	write_json(j, path);
}

LandmarkSet read_landmarks(const std::filesystem::path& path, std::string* image_path)
{
	const json j = read_json(path);
	if (!j.is_object() || !j.contains("landmarks"))
		throw ParseError("landmarks", "missing landmarks in " + path.string());
	LandmarkSet out;
	out.points = frame_from_pixel(points2_from_json(j["landmarks"], "landmarks"));
	if (j.contains("source_tag") && j["source_tag"].is_string())
		out.source_tag = j["source_tag"].get<std::string>();
	if (image_path) {
		if (!j.contains("image") || !j["image"].is_string())
			throw ParseError("image", "missing image path in " + path.string());
		*image_path = j["image"].get<std::string>();
	}
	return out;
}

GroundTruth read_ground_truth(const BilinearModel& model, const std::filesystem::path& path)
{
	const json j = read_json(path);
	GroundTruth gt;
	gt.params = params_from_json(model, j);
	if (!j.contains("pose"))
		throw ParseError("pose", "missing pose in " + path.string());
	gt.pose = pose_from_json(j["pose"]);
	gt.yaw_degrees = j.value("yaw_degrees", 0.0);
	gt.pitch_degrees = j.value("pitch_degrees", 0.0);
	gt.roll_degrees = j.value("roll_degrees", 0.0);
	return gt;
}

void write_dataset(const std::vector<SynthSample>& samples, const SynthConfig& config,
                   const std::filesystem::path& dir)
{
	namespace fs = std::filesystem;
	fs::create_directories(dir / "images");
	fs::create_directories(dir / "landmarks");
	fs::create_directories(dir / "gt");
	json entries = json::array();
	for (const auto& s : samples) {
		const std::string image_rel = "images/" + s.id + ".pgm";
		const std::string lm_rel = "landmarks/" + s.id + ".json";
		const std::string gt_rel = "gt/" + s.id + ".json";
		write_pgm(s.sample.image, dir / image_rel);
		write_landmarks(s.sample.landmarks, image_rel, dir / lm_rel);
		json gt = to_json(s.truth.params);
		gt["pose"] = to_json(s.truth.pose);
		gt["yaw_degrees"] = s.truth.yaw_degrees;
		gt["pitch_degrees"] = s.truth.pitch_degrees;
		gt["roll_degrees"] = s.truth.roll_degrees;
		gt["clean_landmarks"] = to_json(pixel_from_frame(s.clean_landmarks));
		write_json(gt, dir / gt_rel);
		entries.push_back({{"id", s.id},
		                   {"image", image_rel},
		                   {"landmarks", lm_rel},
		                   {"gt", gt_rel},
		                   {"split", s.test ? "test" : "train"},
		                   {"yaw_class", s.yaw_class},
		                   {"expression_class", s.expression_class}});
	}
	json manifest = {{"format", "facecascade-dataset"},
	                 {"version", 1},
	                 {"seed", config.seed},
	                 {"n_samples", samples.size()},
	                 {"image_size", config.image_size},
	                 {"landmark_sigma", config.landmark_sigma},
	                 {"yaw_range", {config.yaw_min, config.yaw_max}},
	                 {"samples", entries}};
	write_json(manifest, dir / "manifest.json");
}

Dataset read_manifest(const std::filesystem::path& dir)
{
	const auto path = dir / "manifest.json";
	if (!std::filesystem::exists(path))
		throw std::runtime_error("dataset manifest not found: " + path.string());
	const json j = read_json(path);
	if (!j.is_object() || j.value("format", "") != "facecascade-dataset")
		throw ParseError("format", "not a facecascade dataset manifest");
	if (j.value("version", 0) != 1)
		throw VersionError("unsupported dataset manifest version");
	if (!j.contains("samples") || !j["samples"].is_array())
		throw ParseError("samples", "manifest has no sample list");
	Dataset ds;
	ds.root = dir;
	for (const auto& e : j["samples"]) {
		auto str = [&](const char* key) {
			if (!e.contains(key) || !e[key].is_string())
				throw ParseError(std::string("samples.") + key, "missing or not a string");
			return e[key].get<std::string>();
		};
		DatasetEntry entry{str("id"),  str("image"),     str("landmarks"),       str("gt"),
		                   str("split"), str("yaw_class"), str("expression_class")};
		if (entry.split != "train" && entry.split != "test")
			throw ParseError("samples.split", "split must be train or test");
		ds.entries.push_back(std::move(entry));
	}
	return ds;
}

SynthSample load_sample(const BilinearModel& model, const Dataset& dataset, const DatasetEntry& entry)
{
	SynthSample s;
	s.id = entry.id;
	s.sample.image = read_image(dataset.root / entry.image);
	s.sample.landmarks = read_landmarks(dataset.root / entry.landmarks);
	s.truth = read_ground_truth(model, dataset.root / entry.gt);
	const json gt = read_json(dataset.root / entry.gt);
	if (gt.contains("clean_landmarks"))
		s.clean_landmarks = frame_from_pixel(points2_from_json(gt["clean_landmarks"], "clean_landmarks"));
	s.sample.g_star = s.truth.params;
	s.yaw_class = entry.yaw_class;
	s.expression_class = entry.expression_class;
	s.test = entry.split == "test";
	return s;
}

} // namespace facecascade
