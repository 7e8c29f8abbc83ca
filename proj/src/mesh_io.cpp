#include "facecascade/mesh_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace facecascade {

void write_obj(const Shape& shape, const std::vector<Triangle>& faces, const std::filesystem::path& path)
{
	std::ofstream out(path);
	if (!out)
		throw std::runtime_error("cannot write " + path.string());
	out.precision(17);
	const Points3& p = shape.positions;
	for (Eigen::Index i = 0; i < p.rows(); ++i)
		out << "v " << p(i, 0) << ' ' << p(i, 1) << ' ' << p(i, 2) << '\n';
	for (const Triangle& f : faces) {
		if (f[0] >= p.rows() || f[1] >= p.rows() || f[2] >= p.rows())
			throw std::invalid_argument("write_obj: face index out of range");
		out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
	}
	if (!out)
		throw std::runtime_error("failed writing " + path.string());
}

Mesh read_obj(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw std::runtime_error("cannot open " + path.string());
	std::vector<Vec3> verts;
	Mesh mesh;
	std::string line;
	long line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		std::istringstream ls(line);
		std::string tag;
		ls >> tag;
		if (tag == "v") {
			Vec3 v;
			if (!(ls >> v[0] >> v[1] >> v[2]) || !v.allFinite())
				throw ParseError("v", "malformed vertex on line " + std::to_string(line_no));
			verts.push_back(v);
		}
		else if (tag == "f") {
			std::vector<std::uint32_t> idx;
			std::string tok;
			while (ls >> tok) {
				long i = 0;
				try {
					i = std::stol(tok.substr(0, tok.find('/')));
				}
				catch (const std::exception&) {
					throw ParseError("f", "malformed face on line " + std::to_string(line_no));
				}
				if (i < 0)
					i += static_cast<long>(verts.size()) + 1;
				if (i < 1)
					throw ParseError("f", "bad index on line " + std::to_string(line_no));
				idx.push_back(static_cast<std::uint32_t>(i - 1));
			}
			if (idx.size() < 3)
				throw ParseError("f", "face with fewer than 3 vertices on line " + std::to_string(line_no));
			for (std::size_t k = 1; k + 1 < idx.size(); ++k)
				mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
		}
	}
	mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
	for (std::size_t i = 0; i < verts.size(); ++i)
		mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
	for (const Triangle& f : mesh.faces)
		for (std::uint32_t i : f)
			if (i >= verts.size())
				throw ParseError("f", "face index out of range");
	return mesh;
}

} // namespace facecascade
