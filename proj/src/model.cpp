#include "facecascade/model.hpp"

#include "binary_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace facecascade {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw std::runtime_error("cannot open " + path);
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes)
{
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw std::runtime_error("cannot write " + path);
	out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
	if (!out)
		throw std::runtime_error("write failed: " + path);
}

} // namespace detail

void BilinearModel::validate() const
{
	if (n_vertices == 0 || d_id == 0 || d_exp == 0)
		throw std::invalid_argument("model dimensions must be positive");
	if (core.size() != rows() * d_id * d_exp)
		throw std::invalid_argument("core size does not match 3n x d_id x d_exp");
	if (mu_id.size() != d_id || var_id.size() != d_id)
		throw std::invalid_argument("identity statistics do not match d_id");
	if (mu_exp.size() != d_exp || var_exp.size() != d_exp)
		throw std::invalid_argument("expression statistics do not match d_exp");
	if (!(var_id.array() > 0.0).all() || !(var_exp.array() > 0.0).all())
		throw std::invalid_argument("parameter variances must be strictly positive");
	if (!mu_id.allFinite() || !mu_exp.allFinite() || !var_id.allFinite() || !var_exp.allFinite())
		throw std::invalid_argument("parameter statistics must be finite");
	std::set<std::uint32_t> seen;
	for (auto idx : landmark_indices) {
		if (idx >= n_vertices)
			throw std::invalid_argument("landmark index out of range");
		if (!seen.insert(idx).second)
			throw std::invalid_argument("duplicate landmark index");
	}
	for (const auto& f : faces) {
		for (auto v : f)
			if (v >= n_vertices)
				throw std::invalid_argument("face references invalid vertex");
		if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
			throw std::invalid_argument("face references repeated vertex");
	}
}

Vec ShapeParams::stacked() const
{
	Vec g(alpha.size() + beta.size());
	g << alpha, beta;
	return g;
}

ShapeParams ShapeParams::from_stacked(const BilinearModel& model, const Vec& g)
{
	if (static_cast<std::size_t>(g.size()) != model.num_params())
		throw std::invalid_argument("stacked parameter length does not match model");
	return {g.head(model.d_id), g.tail(model.d_exp)};
}

ShapeParams ShapeParams::mean(const BilinearModel& model)
{
	return {model.mu_id, model.mu_exp};
}

namespace {

// argmin_s sum_i (s x_i - mu_i)^2 / var_i
double gauge_factor(const Vec& x, const Vec& mu, const Vec& var)
{
	const double den = x.cwiseAbs2().cwiseQuotient(var).sum();
	const double num = x.cwiseProduct(mu).cwiseQuotient(var).sum();
	const double s = den > 0.0 ? num / den : 1.0;
	return s > 0.0 && std::isfinite(s) ? s : 1.0;
}

} // namespace

ShapeParams prior_gauge(const BilinearModel& model, const ShapeParams& params, double* shape_scale)
{
	check_params(model, params);
	const double s1 = gauge_factor(params.alpha, model.mu_id, model.var_id);
	const double s2 = gauge_factor(params.beta, model.mu_exp, model.var_exp);
	if (shape_scale)
		*shape_scale = s1 * s2;
	return {s1 * params.alpha, s2 * params.beta};
}

void check_params(const BilinearModel& model, const ShapeParams& params)
{
	if (params.alpha.size() != model.d_id)
		throw std::invalid_argument("alpha dimension does not match model d_id");
	if (params.beta.size() != model.d_exp)
		throw std::invalid_argument("beta dimension does not match model d_exp");
}

namespace {

// Sum over e of core(r, a, e) * beta(e), accumulated in ascending e. Every
// contraction below goes through this so that whole-shape and per-vertex
// results are bit-identical.
inline double contract_exp(const BilinearModel& m, std::size_t r, std::size_t a, const Vec& beta)
{
	const std::size_t stride = m.rows() * m.d_id;
	const double* p = m.core.data() + r + m.rows() * a;
	double s = 0.0;
	for (std::size_t e = 0; e < m.d_exp; ++e)
		s += p[e * stride] * beta[static_cast<Eigen::Index>(e)];
	return s;
}

inline double contract_row(const BilinearModel& m, std::size_t r, const Vec& alpha, const Vec& beta)
{
	double s = 0.0;
	for (std::size_t a = 0; a < m.d_id; ++a)
		s += contract_exp(m, r, a, beta) * alpha[static_cast<Eigen::Index>(a)];
	return s;
}

inline double contract_id(const BilinearModel& m, std::size_t r, std::size_t e, const Vec& alpha)
{
	const double* p = m.core.data() + r + m.rows() * m.d_id * e;
	double s = 0.0;
	for (std::size_t a = 0; a < m.d_id; ++a)
		s += p[a * m.rows()] * alpha[static_cast<Eigen::Index>(a)];
	return s;
}

} // namespace

Shape synthesize(const BilinearModel& model, const ShapeParams& params)
{
	check_params(model, params);
	Shape shape;
	shape.positions.resize(model.n_vertices, 3);
	for (std::size_t i = 0; i < model.n_vertices; ++i)
		for (std::size_t c = 0; c < 3; ++c)
			shape.positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
				contract_row(model, 3 * i + c, params.alpha, params.beta);
	return shape;
}

Vec3 vertex_position(const BilinearModel& model, const ShapeParams& params, std::size_t i)
{
	check_params(model, params);
	if (i >= model.n_vertices)
		throw std::invalid_argument("vertex index out of range");
	return {contract_row(model, 3 * i, params.alpha, params.beta),
	        contract_row(model, 3 * i + 1, params.alpha, params.beta),
	        contract_row(model, 3 * i + 2, params.alpha, params.beta)};
}

Points3 landmark_positions(const BilinearModel& model, const ShapeParams& params)
{
	Points3 out(static_cast<Eigen::Index>(model.num_landmarks()), 3);
	for (std::size_t k = 0; k < model.num_landmarks(); ++k)
		out.row(static_cast<Eigen::Index>(k)) = vertex_position(model, params, model.landmark_indices[k]).transpose();
	return out;
}

Mat shape_basis_id(const BilinearModel& model, const Vec& beta)
{
	if (beta.size() != model.d_exp)
		throw std::invalid_argument("beta dimension does not match model d_exp");
	Mat basis(static_cast<Eigen::Index>(model.rows()), model.d_id);
	for (std::size_t a = 0; a < model.d_id; ++a)
		for (std::size_t r = 0; r < model.rows(); ++r)
			basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)) = contract_exp(model, r, a, beta);
	return basis;
}

Mat shape_basis_exp(const BilinearModel& model, const Vec& alpha)
{
	if (alpha.size() != model.d_id)
		throw std::invalid_argument("alpha dimension does not match model d_id");
	Mat basis(static_cast<Eigen::Index>(model.rows()), model.d_exp);
	for (std::size_t e = 0; e < model.d_exp; ++e)
		for (std::size_t r = 0; r < model.rows(); ++r)
			basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e)) = contract_id(model, r, e, alpha);
	return basis;
}

Mat shape_basis_id(const BilinearModel& model, const Vec& beta, std::span<const std::uint32_t> vertices)
{
	if (beta.size() != model.d_exp)
		throw std::invalid_argument("beta dimension does not match model d_exp");
	Mat basis(static_cast<Eigen::Index>(3 * vertices.size()), model.d_id);
	for (std::size_t k = 0; k < vertices.size(); ++k) {
		if (vertices[k] >= model.n_vertices)
			throw std::invalid_argument("vertex index out of range");
		for (std::size_t c = 0; c < 3; ++c)
			for (std::size_t a = 0; a < model.d_id; ++a)
				basis(static_cast<Eigen::Index>(3 * k + c), static_cast<Eigen::Index>(a)) =
					contract_exp(model, 3 * vertices[k] + c, a, beta);
	}
	return basis;
}

Mat shape_basis_exp(const BilinearModel& model, const Vec& alpha, std::span<const std::uint32_t> vertices)
{
	if (alpha.size() != model.d_id)
		throw std::invalid_argument("alpha dimension does not match model d_id");
	Mat basis(static_cast<Eigen::Index>(3 * vertices.size()), model.d_exp);
	for (std::size_t k = 0; k < vertices.size(); ++k) {
		if (vertices[k] >= model.n_vertices)
			throw std::invalid_argument("vertex index out of range");
		for (std::size_t c = 0; c < 3; ++c)
			for (std::size_t e = 0; e < model.d_exp; ++e)
				basis(static_cast<Eigen::Index>(3 * k + c), static_cast<Eigen::Index>(e)) =
					contract_id(model, 3 * vertices[k] + c, e, alpha);
	}
	return basis;
}

Vec flatten(const Shape& shape)
{
	Vec v(shape.positions.rows() * 3);
	for (Eigen::Index i = 0; i < shape.positions.rows(); ++i)
		v.segment<3>(3 * i) = shape.positions.row(i).transpose();
	return v;
}

namespace {

// Layout: "BFM3", version, n, d_id, d_exp, L, face count, then f64 arrays
// core, mu_id, mu_exp, var_id, var_exp, landmark_indices, faces (3 per face).
template <typename Writer>
void write_model(const BilinearModel& model, Writer& w)
{
	w.bytes("BFM3", 4);
	w.u32(kModelFormatVersion);
	w.u32(model.n_vertices);
	w.u32(model.d_id);
	w.u32(model.d_exp);
	w.u32(static_cast<std::uint32_t>(model.landmark_indices.size()));
	w.u32(static_cast<std::uint32_t>(model.faces.size()));
	w.f64s(model.core);
	w.f64s(model.mu_id);
	w.f64s(model.mu_exp);
	w.f64s(model.var_id);
	w.f64s(model.var_exp);
	for (auto idx : model.landmark_indices)
		w.f64(idx);
	for (const auto& f : model.faces)
		for (auto v : f)
			w.f64(v);
}

} // namespace

std::vector<std::uint8_t> serialize_model(const BilinearModel& model)
{
	model.validate();
	detail::ByteWriter w;
	write_model(model, w);
	return w.take();
}

namespace {

std::uint32_t read_index(detail::ByteReader& r, const std::string& field)
{
	double v = r.f64(field);
	if (!(v >= 0.0) || v > std::numeric_limits<std::uint32_t>::max() || v != std::floor(v))
		throw ParseError(field, "expected a non-negative integer index");
	return static_cast<std::uint32_t>(v);
}

} // namespace

BilinearModel deserialize_model(std::span<const std::uint8_t> bytes)
{
	detail::ByteReader r(bytes);
	char magic[4];
	r.bytes(magic, 4, "magic");
	if (std::string(magic, 4) != "BFM3")
		throw ParseError("magic", "not a BFM3 model file");
	auto version = r.u32("version");
	if (version != kModelFormatVersion)
		throw VersionError("model format version " + std::to_string(version) + " is not supported (expected " +
		                   std::to_string(kModelFormatVersion) + ")");
	BilinearModel m;
	m.n_vertices = r.u32("n_vertices");
	m.d_id = r.u32("d_id");
	m.d_exp = r.u32("d_exp");
	auto n_landmarks = r.u32("landmark_count");
	auto n_faces = r.u32("face_count");
	if (m.n_vertices == 0 || m.d_id == 0 || m.d_exp == 0)
		throw ParseError("dimensions", "model dimensions must be positive");

	// Guard the size product against overflow before touching the payload.
	const std::size_t remaining = bytes.size();
	std::size_t core_len = m.rows();
	if (core_len > remaining / m.d_id)
		throw ParseError("core", "unexpected end of file");
	core_len *= m.d_id;
	if (core_len > remaining / m.d_exp)
		throw ParseError("core", "unexpected end of file");
	core_len *= m.d_exp;
	r.expect(8 * core_len, "core");
	m.core.resize(core_len);
	for (auto& v : m.core)
		v = r.finite_f64("core");
	m.mu_id = r.vec(m.d_id, "mu_id");
	m.mu_exp = r.vec(m.d_exp, "mu_exp");
	m.var_id = r.vec(m.d_id, "var_id");
	m.var_exp = r.vec(m.d_exp, "var_exp");
	r.expect(8 * static_cast<std::size_t>(n_landmarks), "landmark_indices");
	m.landmark_indices.resize(n_landmarks);
	for (auto& idx : m.landmark_indices)
		idx = read_index(r, "landmark_indices");
	r.expect(24 * static_cast<std::size_t>(n_faces), "faces");
	m.faces.resize(n_faces);
	for (auto& f : m.faces)
		for (auto& v : f)
			v = read_index(r, "faces");
	if (!r.at_end())
		throw ParseError("trailer", "unexpected bytes after faces");
	try {
		m.validate();
	} catch (const std::invalid_argument& e) {
		throw ParseError("validation", e.what());
	}
	return m;
}

void save_model(const BilinearModel& model, const std::filesystem::path& path)
{
	auto bytes = serialize_model(model);
	detail::write_file(path.string(), bytes);

	nlohmann::json meta = {
		{"format", "BFM3"},
		{"version", kModelFormatVersion},
		{"n_vertices", model.n_vertices},
		{"d_id", model.d_id},
		{"d_exp", model.d_exp},
		{"landmark_count", model.landmark_indices.size()},
		{"face_count", model.faces.size()},
		{"fingerprint", detail::fnv1a(bytes)},
		{"landmark_indices", model.landmark_indices},
		{"arrays", {"core", "mu_id", "mu_exp", "var_id", "var_exp", "landmark_indices", "faces"}},
	};
	std::ofstream sidecar(path.string() + ".json", std::ios::trunc);
	sidecar << meta.dump(2) << '\n';
}

BilinearModel load_model(const std::filesystem::path& path)
{
	auto bytes = detail::read_file(path.string());
	return deserialize_model(bytes);
}

std::uint64_t model_fingerprint(const BilinearModel& model)
{
	detail::HashWriter w;
	write_model(model, w);
	return w.value();
}

} // namespace facecascade
