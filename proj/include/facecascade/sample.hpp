#pragma once

#include "facecascade/image.hpp"
#include "facecascade/landmark_fit.hpp"
#include "facecascade/model.hpp"

namespace facecascade {

/// One supervised example: image, detected landmarks and target parameters.
struct TrainingSample {
	Image image;
	LandmarkSet landmarks;
	ShapeParams g_star;
};

} // namespace facecascade
