#pragma once

#include "facecascade/cascade.hpp"
#include "facecascade/dataprep.hpp"
#include "facecascade/features.hpp"
#include "facecascade/landmark_fit.hpp"
#include "facecascade/synth.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace facecascade::cli {

struct EvalOptions {
	double center_radius = 0.6;
	/// CED thresholds are ced_steps + 1 evenly spaced values in [0, ced_max];
	/// ced_max <= 0 means "the largest observed error".
	double ced_max = 0.0;
	int ced_steps = 100;
	bool align = false;
};

struct RunConfig {
	SynthConfig synth;
	HogConfig hog;
	FitConfig fit;
	CascadeConfig cascade;
	IcpConfig icp;
	EvalOptions eval;

	/// Applies one key=value assignment. Throws std::invalid_argument on an
	/// unknown key or unparsable value.
	void set(const std::string& key, const std::string& value);
	/// Reads a line-oriented key=value file ('#' starts a comment).
	void load_file(const std::filesystem::path& path);
	void validate() const;

	struct Entry {
		std::string key;
		std::string help;
		std::function<void(RunConfig&, const std::string&)> set;
		std::function<std::string(const RunConfig&)> get;
	};
	static const std::vector<Entry>& entries();
	/// One line per key with its default value and description.
	static std::string describe_defaults();
};

} // namespace facecascade::cli
