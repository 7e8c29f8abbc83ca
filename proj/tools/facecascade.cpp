#include "run_config.hpp"

#include "facecascade/cascade.hpp"
#include "facecascade/dataprep.hpp"
#include "facecascade/eval.hpp"
#include "facecascade/json_io.hpp"
#include "facecascade/mesh_io.hpp"
#include "facecascade/synth.hpp"

#include "parallel.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>

namespace fs = std::filesystem;
using namespace facecascade;
using nlohmann::json;

namespace {

struct Common {
	std::string config_file;
	std::vector<std::string> overrides;
	std::optional<std::uint64_t> seed;
	int threads = 1;
	bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c)
{
	cmd->add_option("--config", c.config_file, "key=value config file")->check(CLI::ExistingFile);
	cmd->add_option("--set", c.overrides, "override one config key (key=value); repeatable");
	cmd->add_option("--seed", c.seed, "seed for all stochastic steps (sets seed and projection_seed)");
	cmd->add_option("--threads", c.threads, "worker threads; results do not depend on it")
		->capture_default_str()
		->check(CLI::PositiveNumber);
	cmd->add_flag("--quiet", c.quiet, "suppress progress output");
	cmd->footer(cli::RunConfig::describe_defaults());
}

cli::RunConfig resolve(const Common& c)
{
	cli::RunConfig rc;
	if (!c.config_file.empty())
		rc.load_file(c.config_file);
	for (const auto& kv : c.overrides) {
		const auto eq = kv.find('=');
		if (eq == std::string::npos)
			throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
		rc.set(kv.substr(0, eq), kv.substr(eq + 1));
	}
	if (c.seed) {
		rc.synth.seed = *c.seed;
		rc.cascade.projection_seed = *c.seed;
	}
	rc.icp.threads = c.threads;
	rc.validate();
	return rc;
}

void ensure_parent(const fs::path& p)
{
	if (p.has_parent_path())
		fs::create_directories(p.parent_path());
}

ProgressFn progress(const Common& c)
{
	if (c.quiet)
		return {};
	return [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); };
}

// model-gen --------------------------------------------------------------

void run_model_gen(const Common& c, const fs::path& out)
{
	const auto rc = resolve(c);
	double corr = 0.0;
	const BilinearModel model = make_synthetic_model(rc.synth, &corr);
	ensure_parent(out);
	save_model(model, out);
	const BilinearModel check = load_model(out);
	if (!(check == model))
		throw std::runtime_error("written model does not reload identically");
	std::printf("model: %u vertices, d_id %u, d_exp %u, %zu landmarks, %zu faces, max mode correlation %.3f\n",
	            model.n_vertices, model.d_id, model.d_exp, model.num_landmarks(), model.faces.size(), corr);
	std::printf("fingerprint %016llx -> %s\n", static_cast<unsigned long long>(model_fingerprint(model)),
	            out.string().c_str());
}

// data-gen ---------------------------------------------------------------

void run_data_gen(const Common& c, const fs::path& model_path, const fs::path& out)
{
	const auto rc = resolve(c);
	const BilinearModel model = load_model(model_path);
	const auto samples = generate_dataset(model, rc.synth);
	write_dataset(samples, rc.synth, out);
	const Dataset ds = read_manifest(out);
	if (ds.entries.size() != samples.size())
		throw std::runtime_error("manifest does not list every sample");
	const auto n_test = std::count_if(samples.begin(), samples.end(), [](const SynthSample& s) { return s.test; });
	std::printf("dataset: %zu samples (%zu train, %ld test) -> %s\n", samples.size(), samples.size() - n_test,
	            static_cast<long>(n_test), out.string().c_str());
}

// train ------------------------------------------------------------------

std::vector<SynthSample> load_split(const BilinearModel& model, const Dataset& ds, const std::string& split,
                                    int threads)
{
	std::vector<const DatasetEntry*> picked;
	for (const auto& e : ds.entries)
		if (split == "all" || e.split == split)
			picked.push_back(&e);
	std::vector<SynthSample> out(picked.size());
	detail::parallel_for(picked.size(), threads, [&](std::size_t i) { out[i] = load_sample(model, ds, *picked[i]); });
	return out;
}

void run_train(const Common& c, const fs::path& model_path, const fs::path& dataset, const fs::path& out,
               const fs::path& log_path, const fs::path& final_params_path)
{
	const auto rc = resolve(c);
	const BilinearModel model = load_model(model_path);
	if (!fs::exists(dataset / "manifest.json"))
		throw std::runtime_error("no dataset manifest at " + (dataset / "manifest.json").string());
	const Dataset ds = read_manifest(dataset);
	const auto loaded = load_split(model, ds, "train", c.threads);
	if (loaded.size() < 2)
		throw std::runtime_error("training split has fewer than 2 samples");
	std::vector<TrainingSample> samples;
	samples.reserve(loaded.size());
	for (const auto& s : loaded)
		samples.push_back(s.sample);

	const TrainResult result = train(model, samples, rc.hog, rc.fit, rc.cascade, progress(c), c.threads);
	for (const auto& w : result.warnings)
		std::fprintf(stderr, "warning: %s\n", w.c_str());

	ensure_parent(out);
	save_cascade(result.regressor, out);
	if (!(load_cascade(out, model_fingerprint(model)) == result.regressor))
		throw std::runtime_error("written cascade does not reload identically");

	if (!log_path.empty()) {
		ensure_parent(log_path);
		std::ofstream log(log_path);
		if (!log)
			throw std::runtime_error("cannot write " + log_path.string());
		log << "stage,mean_sq_error,mean_error,constant_mse\n";
		for (const auto& s : result.log)
			log << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", s.stage, s.mean_sq_error, s.mean_error, s.constant_mse);
	}
	if (!final_params_path.empty()) {
		json j = json::object();
		for (std::size_t k = 0; k < result.kept.size(); ++k)
			j[loaded[result.kept[k]].id] = to_json(result.final_params[k]);
		ensure_parent(final_params_path);
		write_json(j, final_params_path);
	}
	std::printf("trained %zu stages on %zu samples (%zu dropped); training error %.6f -> %.6f -> %s\n",
	            result.regressor.stages.size(), result.kept.size(), samples.size() - result.kept.size(),
	            result.log.front().mean_error, result.log.back().mean_error, out.string().c_str());
}

// fit --------------------------------------------------------------------

void run_fit(const Common& c, const fs::path& model_path, const fs::path& cascade_path, const fs::path& image_path,
             const fs::path& landmarks_path, const fs::path& out_params, const fs::path& out_obj, bool force)
{
	resolve(c);
	const BilinearModel model = load_model(model_path);
	const CascadeRegressor reg =
		force ? load_cascade(cascade_path) : load_cascade(cascade_path, model_fingerprint(model));
	const Image image = read_image(image_path);
	const LandmarkSet landmarks = read_landmarks(landmarks_path);
	const FitResult r = fit_image(reg, model, image, landmarks);
	if (!r.ok)
		throw std::runtime_error("fit failed: " + r.error);

	json j = to_json(r.params);
	j["pose"] = to_json(r.pose);
	ensure_parent(out_params);
	write_json(j, out_params);
	if (!out_obj.empty()) {
		ensure_parent(out_obj);
		write_obj(r.shape, model.faces, out_obj);
		if (static_cast<std::uint32_t>(read_obj(out_obj).vertices.rows()) != model.n_vertices)
			throw std::runtime_error("written OBJ does not reload with the model vertex count");
	}
	std::printf("fit: %zu stages applied -> %s\n", reg.stages.size(), out_params.string().c_str());
}

// eval -------------------------------------------------------------------

void run_eval(const Common& c, const fs::path& model_path, const fs::path& cascade_path, const fs::path& dataset,
              const fs::path& out_dir, const std::string& split, const std::string& vertex_errors_id)
{
	const auto rc = resolve(c);
	const BilinearModel model = load_model(model_path);
	const CascadeRegressor reg = load_cascade(cascade_path, model_fingerprint(model));
	const Dataset ds = read_manifest(dataset);
	const auto samples = load_split(model, ds, split, c.threads);
	if (samples.empty())
		throw std::runtime_error("no samples in split '" + split + "'");

	const RegionMask whole = whole_mask(model.n_vertices);
	std::vector<std::optional<SampleMetrics>> rows(samples.size());
	std::vector<Shape> recon(samples.size());
	detail::parallel_for(samples.size(), c.threads, [&](std::size_t i) {
		const SynthSample& s = samples[i];
		const FitResult r = fit_image(reg, model, s.sample.image, s.sample.landmarks);
		if (!r.ok)
			return;
		const Shape gt = synthesize(model, s.truth.params);
		Shape rec = r.shape;
		Shape init = synthesize(model, r.trace.front());
		const RegionMask center = center_mask(model, gt, rc.eval.center_radius);
		if (rc.eval.align) {
			rec = procrustes_align(gt, rec, whole);
			init = procrustes_align(gt, init, whole);
		}
		SampleMetrics m;
		m.id = s.id;
		m.split = s.test ? "test" : "train";
		m.yaw_class = s.yaw_class;
		m.expression_class = s.expression_class;
		m.rmse_center = rmse_z(gt, rec, center);
		m.rmse_whole = rmse_z(gt, rec, whole);
		m.mae_center = mae(gt, rec, center);
		m.mae_whole = mae(gt, rec, whole);
		m.mae_init = mae(gt, init, whole);
		rows[i] = m;
		recon[i] = std::move(rec);
	});

	std::vector<SampleMetrics> ok;
	std::size_t failed = 0;
	for (const auto& r : rows) {
		if (r)
			ok.push_back(*r);
		else
			++failed;
	}
	if (ok.empty())
		throw std::runtime_error("every sample failed to fit");

	fs::create_directories(out_dir);
	write_sample_csv(ok, out_dir / "per_sample.csv");
	std::vector<double> mae_whole, rmse_whole;
	std::vector<std::string> yaw, expr;
	for (const auto& m : ok) {
		mae_whole.push_back(m.mae_whole);
		rmse_whole.push_back(m.rmse_whole);
		yaw.push_back(m.yaw_class);
		expr.push_back(m.expression_class);
	}
	const ClassTable by_yaw = aggregate_by_class(mae_whole, yaw);
	const ClassTable by_expr = aggregate_by_class(mae_whole, expr);
	write_class_csv(by_yaw, "yaw_class", out_dir / "mae_by_yaw.csv");
	write_class_csv(by_expr, "expression_class", out_dir / "mae_by_expression.csv");

	auto write_curve = [&](const std::vector<double>& errors, const fs::path& path) {
		const double top = rc.eval.ced_max > 0 ? rc.eval.ced_max : *std::max_element(errors.begin(), errors.end());
		std::vector<double> thresholds;
		for (int k = 0; k <= rc.eval.ced_steps; ++k)
			thresholds.push_back(top * k / rc.eval.ced_steps);
		write_ced_csv(thresholds, ced(errors, thresholds), path);
	};
	write_curve(rmse_whole, out_dir / "ced_rmse.csv");
	write_curve(mae_whole, out_dir / "ced_mae.csv");

	if (!vertex_errors_id.empty()) {
		bool found = false;
		for (std::size_t i = 0; i < samples.size(); ++i) {
			if (samples[i].id == vertex_errors_id && rows[i]) {
				write_vertex_error_csv(synthesize(model, samples[i].truth.params), recon[i],
				                       out_dir / ("vertex_errors_" + vertex_errors_id + ".csv"));
				found = true;
			}
		}
		if (!found)
			throw std::runtime_error("no fitted sample with id " + vertex_errors_id);
	}

	double init_mean = 0.0;
	for (const auto& m : ok)
		init_mean += m.mae_init;
	init_mean /= static_cast<double>(ok.size());
	json summary = {{"split", split},
	                {"samples", ok.size()},
	                {"failed", failed},
	                {"mae_whole_mean", by_yaw.overall_mean},
	                {"mae_init_mean", init_mean},
	                {"expression_max_relative_difference", by_expr.max_relative_difference},
	                {"yaw_max_relative_difference", by_yaw.max_relative_difference},
	                {"aligned", rc.eval.align}};
	write_json(summary, out_dir / "summary.json");
	std::printf("eval: %zu samples (%zu failed), MAE %.5f (landmark fit only %.5f), expression spread %.2f%% -> %s\n",
	            ok.size(), failed, by_yaw.overall_mean, init_mean, 100.0 * by_expr.max_relative_difference,
	            out_dir.string().c_str());
}

// prep / scan-gen --------------------------------------------------------

void run_prep(const Common& c, const fs::path& model_path, const fs::path& cloud_path, const fs::path& lm_path,
              const fs::path& out, const fs::path& trace_path)
{
	const auto rc = resolve(c);
	const BilinearModel model = load_model(model_path);
	if (!fs::exists(lm_path))
		throw std::runtime_error("missing 3D landmark sidecar " + lm_path.string());
	PointCloud cloud{read_ply(cloud_path), read_landmarks3d(lm_path)};
	const IcpResult r = icp_fit(model, cloud, rc.icp);

	json j = to_json(r.params);
	json rot = json::array();
	for (int i = 0; i < 3; ++i)
		rot.push_back({r.transform.rotation(i, 0), r.transform.rotation(i, 1), r.transform.rotation(i, 2)});
	j["transform"] = {{"scale", r.transform.scale},
	                  {"rotation", rot},
	                  {"translation", {r.transform.translation[0], r.transform.translation[1], r.transform.translation[2]}}};
	j["residual_trace"] = r.residual_trace;
	j["iterations"] = r.iterations;
	ensure_parent(out);
	write_json(j, out);
	if (!trace_path.empty()) {
		ensure_parent(trace_path);
		std::ofstream t(trace_path);
		if (!t)
			throw std::runtime_error("cannot write " + trace_path.string());
		t << "iteration,objective\n";
		for (std::size_t k = 0; k < r.residual_trace.size(); ++k)
			t << fmt::format("{},{:.17g}\n", k, r.residual_trace[k]);
	}
	std::printf("prep: %d iterations, objective %.6g -> %.6g -> %s\n", r.iterations, r.residual_trace.front(),
	            r.residual_trace.back(), out.string().c_str());
}

void run_scan_gen(const Common& c, const fs::path& model_path, std::uint64_t index, const fs::path& cloud_out,
                  const fs::path& lm_out, const fs::path& truth_out)
{
	const auto rc = resolve(c);
	const BilinearModel model = load_model(model_path);
	const SyntheticScan scan = make_synthetic_scan(model, rc.synth, index);
	ensure_parent(cloud_out);
	write_ply(scan.cloud.points, cloud_out);
	ensure_parent(lm_out);
	write_landmarks3d(scan.cloud.landmark3d, lm_out);
	if (!truth_out.empty()) {
		json j = to_json(scan.params);
		json rot = json::array();
		for (int i = 0; i < 3; ++i)
			rot.push_back({scan.transform.rotation(i, 0), scan.transform.rotation(i, 1), scan.transform.rotation(i, 2)});
		j["transform"] = {{"scale", scan.transform.scale},
		                  {"rotation", rot},
		                  {"translation",
		                   {scan.transform.translation[0], scan.transform.translation[1], scan.transform.translation[2]}}};
		ensure_parent(truth_out);
		write_json(j, truth_out);
	}
	std::printf("scan: %ld points -> %s\n", static_cast<long>(scan.cloud.points.rows()), cloud_out.string().c_str());
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"Cascaded-regression fitting of a bilinear 3D face model"};
	app.footer(cli::RunConfig::describe_defaults());
	app.require_subcommand(1);

	Common common;
	fs::path model, dataset, out, cascade, image, landmarks, log, final_params, obj, cloud, trace, truth;
	std::string split = "test", vertex_errors;
	bool force = false;
	std::uint64_t index = 0;

	auto* mg = app.add_subcommand("model-gen", "write a synthetic bilinear model");
	add_common(mg, common);
	mg->add_option("--out", out, "model file")->required();

	auto* dg = app.add_subcommand("data-gen", "render a synthetic dataset");
	add_common(dg, common);
	dg->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
	dg->add_option("--out", out, "dataset directory")->required();

	auto* tr = app.add_subcommand("train", "train a cascade on the train split");
	add_common(tr, common);
	tr->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
	tr->add_option("--dataset", dataset, "dataset directory")->required();
	tr->add_option("--out", out, "cascade file")->required();
	tr->add_option("--log", log, "per-stage training error CSV");
	tr->add_option("--final-params", final_params, "JSON of training-time final parameters per sample id");

	auto* ft = app.add_subcommand("fit", "fit one image");
	add_common(ft, common);
	ft->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
	ft->add_option("--cascade", cascade, "cascade file")->required()->check(CLI::ExistingFile);
	ft->add_option("--image", image, "PGM/PPM/PNG image")->required()->check(CLI::ExistingFile);
	ft->add_option("--landmarks", landmarks, "landmark JSON (pixel coordinates)")->required()->check(CLI::ExistingFile);
	ft->add_option("--out", out, "parameter and pose JSON")->required();
	ft->add_option("--obj", obj, "OBJ mesh export");
	ft->add_flag("--force", force, "skip the model fingerprint check");

	auto* ev = app.add_subcommand("eval", "evaluate a cascade on a dataset split");
	add_common(ev, common);
	ev->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
	ev->add_option("--cascade", cascade, "cascade file")->required()->check(CLI::ExistingFile);
	ev->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
	ev->add_option("--out", out, "output directory")->required();
	ev->add_option("--split", split, "train, test or all")->capture_default_str()->check(
		CLI::IsMember({"train", "test", "all"}));
	ev->add_option("--vertex-errors", vertex_errors, "sample id whose per-vertex errors are exported");

	auto* pp = app.add_subcommand("prep", "fit the model to a 3D scan");
	add_common(pp, common);
	pp->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
	pp->add_option("--cloud", cloud, "ASCII PLY point cloud")->required()->check(CLI::ExistingFile);
	pp->add_option("--landmarks", landmarks, "3D landmark JSON sidecar")->required();
	pp->add_option("--out", out, "parameter JSON")->required();
	pp->add_option("--trace", trace, "residual trace CSV");

	auto* sg = app.add_subcommand("scan-gen", "write a synthetic scan with 3D landmarks");
	add_common(sg, common);
	sg->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
	sg->add_option("--index", index, "scan index within the seed")->capture_default_str();
	sg->add_option("--out", out, "PLY output")->required();
	sg->add_option("--landmarks", landmarks, "3D landmark JSON output")->required();
	sg->add_option("--truth", truth, "planted parameter JSON output");

	try {
		app.parse(argc, argv);
	}
	catch (const CLI::ParseError& e) {
		return app.exit(e);
	}

	try {
		if (*mg)
			run_model_gen(common, out);
		else if (*dg)
			run_data_gen(common, model, out);
		else if (*tr)
			run_train(common, model, dataset, out, log, final_params);
		else if (*ft)
			run_fit(common, model, cascade, image, landmarks, out, obj, force);
		else if (*ev)
			run_eval(common, model, cascade, dataset, out, split, vertex_errors);
		else if (*pp)
			run_prep(common, model, cloud, landmarks, out, trace);
		else if (*sg)
			run_scan_gen(common, model, index, out, landmarks, truth);
	}
	catch (const std::exception& e) {
		std::fprintf(stderr, "facecascade: error: %s\n", e.what());
		return 1;
	}
	return 0;
}
