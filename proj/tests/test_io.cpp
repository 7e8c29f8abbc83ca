#include "support.hpp"

#include "facecascade/image.hpp"
#include "facecascade/json_io.hpp"
#include "facecascade/mesh_io.hpp"

#include <doctest.h>
#include <png.h>

#include <fstream>

using namespace facecascade;

namespace {

void write_png(const std::filesystem::path& path, int w, int h, png_uint_32 format, const std::vector<std::uint8_t>& px)
{
	png_image img{};
	img.version = PNG_IMAGE_VERSION;
	img.width = static_cast<png_uint_32>(w);
	img.height = static_cast<png_uint_32>(h);
	img.format = format;
	REQUIRE(png_image_write_to_file(&img, path.c_str(), 0, px.data(), 0, nullptr) != 0);
}

} // namespace

TEST_CASE("PGM round trip")
{
	const auto dir = fctest::scratch_dir("io_pgm");
	Image img(5, 3);
	for (std::size_t i = 0; i < img.intensity.size(); ++i)
		img.intensity[i] = static_cast<double>(i * 17) / 255.0;
	write_pgm(img, dir / "a.pgm");
	const Image back = read_image(dir / "a.pgm");
	REQUIRE(back.width == 5);
	REQUIRE(back.height == 3);
	for (std::size_t i = 0; i < img.intensity.size(); ++i)
		CHECK(back.intensity[i] == img.intensity[i]);
	CHECK(back.at(4, 2) == img.at(4, 2));
}

TEST_CASE("PNG decoding")
{
	const auto dir = fctest::scratch_dir("io_png");
	write_png(dir / "g.png", 2, 2, PNG_FORMAT_GRAY, {0, 51, 102, 255});
	const Image g = read_image(dir / "g.png");
	CHECK(g.at(0, 0) == 0.0);
	CHECK(g.at(1, 0) == doctest::Approx(51.0 / 255.0).epsilon(1e-12));
	CHECK(g.at(0, 1) == doctest::Approx(102.0 / 255.0).epsilon(1e-12));
	CHECK(g.at(1, 1) == 1.0);

	write_png(dir / "c.png", 2, 1, PNG_FORMAT_RGB, {255, 0, 0, 10, 200, 30});
	const Image c = read_image(dir / "c.png");
	CHECK(c.at(0, 0) == doctest::Approx(luma(255, 0, 0)).epsilon(1e-12));
	CHECK(c.at(1, 0) == doctest::Approx(luma(10, 200, 30)).epsilon(1e-12));
	CHECK(luma(255, 255, 255) == doctest::Approx(1.0).epsilon(1e-12));

	// Alpha is composited onto black.
	write_png(dir / "a.png", 3, 1, PNG_FORMAT_RGBA, {0, 255, 0, 255, 0, 255, 0, 128, 0, 255, 0, 0});
	const Image a = read_image(dir / "a.png");
	CHECK(a.at(0, 0) == doctest::Approx(luma(0, 255, 0)).epsilon(1e-12));
	CHECK((a.at(1, 0) > 0.0 && a.at(1, 0) < a.at(0, 0)));
	CHECK(a.at(2, 0) == 0.0);
}

TEST_CASE("broken images")
{
	const auto dir = fctest::scratch_dir("io_bad");
	{
		std::ofstream out(dir / "t.pgm", std::ios::binary);
		out << "P5\n4 4\n255\nab";
	}
	CHECK_THROWS(read_image(dir / "t.pgm"));
	{
		std::ofstream out(dir / "x.txt");
		out << "hello";
	}
	CHECK_THROWS(read_image(dir / "x.txt"));
	CHECK_THROWS(read_image(dir / "none.png"));
}

TEST_CASE("OBJ round trip and parsing")
{
	const auto dir = fctest::scratch_dir("io_obj");
	Shape s{Points3::Random(4, 3)};
	const std::vector<Triangle> faces = {{0, 1, 2}, {0, 2, 3}};
	write_obj(s, faces, dir / "m.obj");
	const Mesh m = read_obj(dir / "m.obj");
	CHECK(m.vertices.rows() == 4);
	CHECK((m.vertices - s.positions).cwiseAbs().maxCoeff() == 0.0);
	CHECK(m.faces == faces);

	{
		std::ofstream out(dir / "q.obj");
		out << "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3 -1\n";
	}
	const Mesh q = read_obj(dir / "q.obj");
	REQUIRE(q.faces.size() == 2);
	CHECK(q.faces[0] == Triangle{0, 1, 2});
	CHECK(q.faces[1] == Triangle{0, 2, 3});
	{
		std::ofstream out(dir / "bad.obj");
		out << "v 0 0 0\nf 1 2 3\n";
	}
	CHECK_THROWS_AS(read_obj(dir / "bad.obj"), ParseError);
}

TEST_CASE("JSON helpers")
{
	std::mt19937_64 rng(81);
	const auto m = fctest::random_model(rng, 3, 4, 2);
	const ShapeParams p = fctest::random_params(rng, m);
	CHECK(params_from_json(m, to_json(p)) == p);

	CameraPose pose;
	pose.scale = 3.25;
	pose.rotation = fctest::random_rotation(rng);
	pose.translation = Vec2(1.5, -7);
	const CameraPose back = pose_from_json(to_json(pose));
	CHECK(back.scale == pose.scale);
	CHECK(back.rotation == pose.rotation);
	CHECK(back.translation == pose.translation);

	const auto dir = fctest::scratch_dir("io_json");
	write_json(to_json(p), dir / "p.json");
	CHECK(params_from_json(m, read_json(dir / "p.json")) == p);
	{
		std::ofstream out(dir / "bad.json");
		out << "{\"alpha\": [1, 2,";
	}
	CHECK_THROWS_AS(read_json(dir / "bad.json"), ParseError);
	CHECK_THROWS(params_from_json(m, nlohmann::json::parse(R"({"alpha":[1],"beta":[1,2]})")));
}
