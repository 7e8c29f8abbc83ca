#pragma once

#include "facecascade/camera.hpp"
#include "facecascade/dataprep.hpp"
#include "facecascade/image.hpp"
#include "facecascade/landmark_fit.hpp"
#include "facecascade/model.hpp"
#include "facecascade/sample.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace facecascade {

struct SynthConfig {
	std::uint64_t seed = 42;
	int n_samples = 600;
	/// Trailing fraction of samples marked as the held-out split.
	double test_fraction = 1.0 / 6.0;

	std::uint32_t d_id = 8;
	std::uint32_t d_exp = 5;
	/// Rounded to the nearest square grid, at least 10 x 10.
	std::uint32_t n_vertices = 400;

	double yaw_min = -45.0, yaw_max = 45.0;
	double pitch_min = -10.0, pitch_max = 10.0;
	double roll_min = -10.0, roll_max = 10.0;
	double scale_min = 70.0, scale_max = 90.0;
	/// Offset of the face center from the image center, pixels.
	double translation_range = 10.0;
	double landmark_sigma = 1.5;
	/// Multiplies the parameter standard deviations when sampling (0 pins
	/// every draw to the model means).
	double param_spread = 1.0;
	int image_size = 256;
	Vec3 light_dir = Vec3(0.4, 0.3, 1.0);

	/// Yaw class labels (degrees of |yaw|); a sample gets the nearest class.
	std::vector<double> yaw_classes = {0, 10, 20, 30, 45, 90};

	void validate() const;
};

/// Labels of the synthetic expression clusters, index-aligned with the
/// centroids returned by `expression_centroids`.
const std::vector<std::string>& expression_class_names();
/// Seven beta centroids: the mean expression plus +/- offsets along the first
/// three non-constant expression modes.
std::vector<Vec> expression_centroids(const BilinearModel& model);
std::string expression_class(const BilinearModel& model, const Vec& beta);
std::string yaw_class(const SynthConfig& config, double yaw_degrees);

/// Also returns the largest absolute pairwise correlation between the
/// deformation fields of distinct modes through `max_mode_correlation`.
BilinearModel make_synthetic_model(const SynthConfig& config, double* max_mode_correlation = nullptr);

struct GroundTruth {
	ShapeParams params;
	CameraPose pose;
	double yaw_degrees = 0;
	double pitch_degrees = 0;
	double roll_degrees = 0;
};

GroundTruth sample_ground_truth(const BilinearModel& model, const SynthConfig& config, std::mt19937_64& rng);

/// Flat-shaded, z-buffered rendering; `light_dir` is in the camera frame
/// (+z towards the viewer). Background is 0.
Image render(const BilinearModel& model, const ShapeParams& params, const CameraPose& pose, int image_size,
             const Vec3& light_dir);

/// Rounds intensities to the 8-bit grid so in-memory and on-disk images match.
void quantize_8bit(Image& image);

struct SynthSample {
	std::string id;
	TrainingSample sample;
	GroundTruth truth;
	/// Noise-free landmark projections (internal frame).
	Points2 clean_landmarks;
	std::string yaw_class;
	std::string expression_class;
	bool test = false;
};

std::vector<SynthSample> generate_dataset(const BilinearModel& model, const SynthConfig& config);

/// Layout: manifest.json, images/<id>.pgm, landmarks/<id>.json, gt/<id>.json.
void write_dataset(const std::vector<SynthSample>& samples, const SynthConfig& config,
                   const std::filesystem::path& dir);

struct DatasetEntry {
	std::string id;
	std::filesystem::path image;
	std::filesystem::path landmarks;
	std::filesystem::path gt;
	std::string split;
	std::string yaw_class;
	std::string expression_class;
};

struct Dataset {
	std::filesystem::path root;
	std::vector<DatasetEntry> entries;
};

/// Throws ParseError on malformed manifests.
Dataset read_manifest(const std::filesystem::path& dir);

/// Landmark JSON: {"image": path, "landmarks": [[x, y], ...], "source_tag": s},
/// pixel coordinates with the origin top-left. Converted to the internal frame.
LandmarkSet read_landmarks(const std::filesystem::path& path, std::string* image_path = nullptr);
void write_landmarks(const LandmarkSet& landmarks, const std::string& image_path, const std::filesystem::path& path);

/// Ground-truth JSON: {"alpha": [...], "beta": [...], "pose": {...}}.
GroundTruth read_ground_truth(const BilinearModel& model, const std::filesystem::path& path);

/// Loads the image, landmarks and ground truth of one manifest entry.
SynthSample load_sample(const BilinearModel& model, const Dataset& dataset, const DatasetEntry& entry);

struct SyntheticScan {
	PointCloud cloud;
	ShapeParams params;
	/// Model-to-scan transform used to place the shape.
	RigidTransform3D transform;
};

/// Scan of a sampled shape: every vertex plus `points_per_face` random
/// surface points per triangle, under a random similarity transform, with
/// exact 3D landmarks. `params` is the prior_gauge representative of the
/// sampled parameters. Deterministic in (config.seed, index).
SyntheticScan make_synthetic_scan(const BilinearModel& model, const SynthConfig& config, std::uint64_t index,
                                  int points_per_face = 2);

} // namespace facecascade
