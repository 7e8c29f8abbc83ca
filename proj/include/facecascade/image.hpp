#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace facecascade {

/// Grayscale image, row-major intensities in [0, 1].
struct Image {
	int width = 0;
	int height = 0;
	std::vector<double> intensity;

	Image() = default;
	Image(int w, int h, double fill = 0.0);

	double& at(int x, int y) { return intensity[static_cast<std::size_t>(y) * width + x]; }
	double at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * width + x]; }
	/// Edge-replicated access.
	double clamped(int x, int y) const;

	void validate() const;
	bool operator==(const Image&) const = default;
};

/// Standard 0.299 / 0.587 / 0.114 luma.
double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Reads binary PGM (P5) or PPM (P6), or 8-bit PNG (gray, gray+alpha, RGB,
/// RGBA). Color input is converted to luma; alpha is composited onto black.
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit binary PGM; intensities are clamped and rounded.
void write_pgm(const Image& image, const std::filesystem::path& path);

} // namespace facecascade
