#include "facecascade/image.hpp"

#include "facecascade/types.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace facecascade {

Image::Image(int w, int h, double fill)
	: width(w), height(h), intensity(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill)
{
}

double Image::clamped(int x, int y) const
{
	return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
}

void Image::validate() const
{
	if (width <= 0 || height <= 0)
		throw std::invalid_argument("image dimensions must be positive");
	if (intensity.size() != static_cast<std::size_t>(width) * height)
		throw std::invalid_argument("image buffer size does not match dimensions");
	for (double v : intensity)
		if (!std::isfinite(v))
			throw std::invalid_argument("image intensities must be finite");
}

double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
	return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
}

namespace {

std::string next_token(std::istream& in)
{
	std::string tok;
	while (in) {
		int c = in.peek();
		if (c == '#') {
			std::string skip;
			std::getline(in, skip);
		} else if (std::isspace(c)) {
			in.get();
		} else {
			break;
		}
	}
	in >> tok;
	return tok;
}

Image read_pnm(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw std::runtime_error("cannot open " + path.string());
	const std::string magic = next_token(in);
	if (magic != "P5" && magic != "P6")
		throw ParseError("magic", "unsupported PNM variant in " + path.string());
	int w = 0, h = 0, maxval = 0;
	try {
		w = std::stoi(next_token(in));
		h = std::stoi(next_token(in));
		maxval = std::stoi(next_token(in));
	} catch (const std::exception&) {
		throw ParseError("header", "malformed PNM header in " + path.string());
	}
	if (w <= 0 || h <= 0 || maxval != 255)
		throw ParseError("header", "only 8-bit PNM images are supported");
	in.get();
	const int channels = magic == "P6" ? 3 : 1;
	std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
	in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
	if (in.gcount() != static_cast<std::streamsize>(raw.size()))
		throw ParseError("pixels", "truncated PNM data in " + path.string());
	Image img(w, h);
	for (std::size_t i = 0; i < img.intensity.size(); ++i)
		img.intensity[i] =
			channels == 1 ? raw[i] / 255.0 : luma(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
	return img;
}

Image read_png(const std::filesystem::path& path)
{
	png_image png{};
	png.version = PNG_IMAGE_VERSION;
	if (!png_image_begin_read_from_file(&png, path.string().c_str()))
		throw ParseError("png", std::string("cannot decode PNG: ") + png.message);
	png.format = PNG_FORMAT_RGB;
	std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
	if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
		png_image_free(&png);
		throw ParseError("png", std::string("cannot decode PNG: ") + png.message);
	}
	Image img(static_cast<int>(png.width), static_cast<int>(png.height));
	for (std::size_t i = 0; i < img.intensity.size(); ++i)
		img.intensity[i] = luma(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
	return img;
}

} // namespace

Image read_image(const std::filesystem::path& path)
{
	std::ifstream probe(path, std::ios::binary);
	if (!probe)
		throw std::runtime_error("cannot open " + path.string());
	char sig[8] = {};
	probe.read(sig, 8);
	if (probe.gcount() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(sig), 0, 8) == 0)
		return read_png(path);
	return read_pnm(path);
}

void write_pgm(const Image& image, const std::filesystem::path& path)
{
	image.validate();
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw std::runtime_error("cannot write " + path.string());
	out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
	std::vector<std::uint8_t> raw(image.intensity.size());
	for (std::size_t i = 0; i < raw.size(); ++i)
		raw[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.intensity[i], 0.0, 1.0) * 255.0));
	out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

} // namespace facecascade
