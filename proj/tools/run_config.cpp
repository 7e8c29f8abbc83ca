#include "run_config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace facecascade::cli {

namespace {

std::string trim(const std::string& s)
{
	const auto b = s.find_first_not_of(" \t\r");
	if (b == std::string::npos)
		return {};
	const auto e = s.find_last_not_of(" \t\r");
	return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v)
{
	double out = 0;
	const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
	if (ec != std::errc() || p != v.data() + v.size())
		throw std::invalid_argument(fmt::format("{}: '{}' is not a number", key, v));
	return out;
}

long long to_int(const std::string& key, const std::string& v)
{
	long long out = 0;
	const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
	if (ec != std::errc() || p != v.data() + v.size())
		throw std::invalid_argument(fmt::format("{}: '{}' is not an integer", key, v));
	return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v)
{
	std::uint64_t out = 0;
	const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
	if (ec != std::errc() || p != v.data() + v.size())
		throw std::invalid_argument(fmt::format("{}: '{}' is not a non-negative integer", key, v));
	return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
	if (v == "true" || v == "1")
		return true;
	if (v == "false" || v == "0")
		return false;
	throw std::invalid_argument(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<double> to_list(const std::string& key, const std::string& v)
{
	std::vector<double> out;
	std::size_t start = 0;
	while (start <= v.size()) {
		const auto comma = v.find(',', start);
		const std::string item = trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
		out.push_back(to_double(key, item));
		if (comma == std::string::npos)
			break;
		start = comma + 1;
	}
	return out;
}

std::string num(double v) { return fmt::format("{:g}", v); }

std::string list(const std::vector<double>& v)
{
	std::string s;
	for (std::size_t i = 0; i < v.size(); ++i)
		s += (i ? "," : "") + num(v[i]);
	return s;
}

int narrow_int(const std::string& key, long long v)
{
	if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
		throw std::invalid_argument(key + ": out of range");
	return static_cast<int>(v);
}

std::uint32_t narrow_u32(const std::string& key, long long v)
{
	if (v < 0 || v > static_cast<long long>(std::numeric_limits<std::uint32_t>::max()))
		throw std::invalid_argument(key + ": out of range");
	return static_cast<std::uint32_t>(v);
}

#define FC_DOUBLE(name, field, help)                                                                                   \
	RunConfig::Entry{name, help, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); },             \
	                 [](const RunConfig& c) { return num(c.field); }}
#define FC_INT(name, field, help)                                                                                      \
	RunConfig::Entry{name, help,                                                                                       \
	                 [](RunConfig& c, const std::string& v) { c.field = narrow_int(name, to_int(name, v)); },     \
	                 [](const RunConfig& c) { return std::to_string(c.field); }}
#define FC_U32(name, field, help)                                                                                      \
	RunConfig::Entry{name, help, [](RunConfig& c, const std::string& v) { c.field = narrow_u32(name, to_int(name, v)); }, \
	                 [](const RunConfig& c) { return std::to_string(c.field); }}
#define FC_U64(name, field, help)                                                                                      \
	RunConfig::Entry{name, help, [](RunConfig& c, const std::string& v) { c.field = to_u64(name, v); },                \
	                 [](const RunConfig& c) { return std::to_string(c.field); }}
#define FC_BOOL(name, field, help)                                                                                     \
	RunConfig::Entry{name, help, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); },               \
	                 [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}

} // namespace

const std::vector<RunConfig::Entry>& RunConfig::entries()
{
	static const std::vector<Entry> table = {
		FC_U64("seed", synth.seed, "seed for dataset and scan generation"),
		FC_INT("n_samples", synth.n_samples, "number of synthetic samples"),
		FC_DOUBLE("test_fraction", synth.test_fraction, "trailing fraction of samples held out"),
		FC_U32("d_id", synth.d_id, "identity dimensions of the synthetic model"),
		FC_U32("d_exp", synth.d_exp, "expression dimensions of the synthetic model"),
		FC_U32("n_vertices", synth.n_vertices, "synthetic model vertices (rounded to a square grid)"),
		FC_DOUBLE("yaw_min", synth.yaw_min, "degrees"),
		FC_DOUBLE("yaw_max", synth.yaw_max, "degrees"),
		FC_DOUBLE("pitch_min", synth.pitch_min, "degrees"),
		FC_DOUBLE("pitch_max", synth.pitch_max, "degrees"),
		FC_DOUBLE("roll_min", synth.roll_min, "degrees"),
		FC_DOUBLE("roll_max", synth.roll_max, "degrees"),
		FC_DOUBLE("scale_min", synth.scale_min, "pixels per model unit"),
		FC_DOUBLE("scale_max", synth.scale_max, "pixels per model unit"),
		FC_DOUBLE("translation_range", synth.translation_range, "max face-center offset from image center, px"),
		FC_DOUBLE("landmark_sigma", synth.landmark_sigma, "detected-landmark noise sd, px"),
		FC_DOUBLE("param_spread", synth.param_spread, "multiplier on parameter sd when sampling"),
		FC_INT("image_size", synth.image_size, "rendered image side, px"),
		Entry{"light_dir", "light direction x,y,z (camera frame, +z towards viewer)",
		      [](RunConfig& c, const std::string& v) {
			      const auto l = to_list("light_dir", v);
			      if (l.size() != 3)
				      throw std::invalid_argument("light_dir: expected three values");
			      c.synth.light_dir = Vec3(l[0], l[1], l[2]);
		      },
		      [](const RunConfig& c) {
			      return list({c.synth.light_dir.x(), c.synth.light_dir.y(), c.synth.light_dir.z()});
		      }},
		Entry{"yaw_classes", "yaw class centers, degrees of |yaw|",
		      [](RunConfig& c, const std::string& v) { c.synth.yaw_classes = to_list("yaw_classes", v); },
		      [](const RunConfig& c) { return list(c.synth.yaw_classes); }},

		FC_INT("hog.patch_size", hog.patch_size, "patch side, px"),
		FC_INT("hog.cell_size", hog.cell_size, "cell side, px"),
		FC_INT("hog.block_cells", hog.block_cells, "block side, cells"),
		FC_INT("hog.block_stride_cells", hog.block_stride_cells, "block stride, cells"),
		FC_INT("hog.orientation_bins", hog.orientation_bins, "unsigned orientation bins"),
		FC_DOUBLE("hog.clip", hog.clip, "L2-hys clipping value"),
		FC_DOUBLE("hog.epsilon", hog.epsilon, "block normalization epsilon"),
		FC_BOOL("hog.normalize_ld", hog.normalize_ld, "divide landmark displacements by the pose scale"),
		FC_BOOL("hog.scale_patch", hog.scale_patch, "scale the sampled patch with the pose scale"),
		FC_DOUBLE("hog.patch_reference_scale", hog.patch_reference_scale, "pose scale at which patches are patch_size"),

		FC_DOUBLE("lambda1", fit.lambda1, "identity prior weight in the landmark fit"),
		FC_DOUBLE("lambda2", fit.lambda2, "expression prior weight in the landmark fit"),
		FC_INT("max_alternations", fit.max_alternations, "landmark-fit alternation rounds"),
		FC_DOUBLE("rel_tol", fit.rel_tol, "landmark-fit relative objective tolerance"),

		FC_INT("stages", cascade.stages, "cascade stages K"),
		FC_DOUBLE("lambda_r", cascade.lambda_r, "ridge regularization on standardized features"),
		FC_INT("hog_projection_dim", cascade.hog_projection_dim, "random projection of the HOG block (0 = off)"),
		FC_U64("projection_seed", cascade.projection_seed, "seed of the HOG random projection"),

		FC_INT("icp.iterations", icp.iterations, "ICP iterations"),
		FC_DOUBLE("icp.lambda1", icp.lambda1, "identity prior weight in the scan fit"),
		FC_DOUBLE("icp.lambda2", icp.lambda2, "expression prior weight in the scan fit"),
		FC_DOUBLE("icp.landmark_weight", icp.landmark_weight, "landmark term weight relative to dense term"),
		FC_DOUBLE("icp.outlier_factor", icp.outlier_factor, "drop correspondences beyond this x median distance"),
		FC_DOUBLE("icp.rel_tol", icp.rel_tol, "ICP relative residual tolerance"),

		FC_DOUBLE("eval.center_radius", eval.center_radius, "center mask radius, fraction of bounding-sphere radius"),
		FC_DOUBLE("eval.ced_max", eval.ced_max, "largest CED threshold (<= 0: max observed error)"),
		FC_INT("eval.ced_steps", eval.ced_steps, "number of CED intervals"),
		FC_BOOL("eval.align", eval.align, "similarity-align reconstructions before scoring"),
	};
	return table;
}

void RunConfig::set(const std::string& key, const std::string& value)
{
	for (const auto& e : entries()) {
		if (e.key == key) {
			e.set(*this, trim(value));
			return;
		}
	}
	throw std::invalid_argument("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw std::runtime_error("cannot open config file " + path.string());
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		const auto hash = line.find('#');
		if (hash != std::string::npos)
			line.erase(hash);
		line = trim(line);
		if (line.empty())
			continue;
		const auto eq = line.find('=');
		if (eq == std::string::npos)
			throw std::invalid_argument(fmt::format("{}:{}: expected key=value", path.string(), line_no));
		try {
			set(trim(line.substr(0, eq)), line.substr(eq + 1));
		}
		catch (const std::invalid_argument& e) {
			throw std::invalid_argument(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
		}
	}
}

void RunConfig::validate() const
{
	synth.validate();
	hog.validate();
	fit.validate();
	cascade.validate();
	if (icp.iterations < 0 || !(icp.landmark_weight >= 0) || !(icp.outlier_factor > 0) || !(icp.lambda1 >= 0) ||
	    !(icp.lambda2 >= 0) || !(icp.rel_tol >= 0))
		throw std::invalid_argument("invalid icp.* settings");
	if (!(eval.center_radius > 0) || eval.ced_steps < 1)
		throw std::invalid_argument("invalid eval.* settings");
}

std::string RunConfig::describe_defaults()
{
	const RunConfig defaults;
	std::string out = "Config keys (key=value file via --config, or --set key=value), with defaults:\n";
	for (const auto& e : entries())
		out += fmt::format("  {:<26} {:<16} {}\n", e.key, e.get(defaults), e.help);
	return out;
}

} // namespace facecascade::cli
