#include "protshape/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace protshape::io {

namespace {

void write_points_csv(const std::filesystem::path& path,
                      const std::vector<Vec3>& points) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << "index,x,y,z\n";
  f.precision(17);
  for (std::size_t i = 0; i < points.size(); ++i)
    f << i << ',' << points[i].x() << ',' << points[i].y() << ',' << points[i].z()
      << '\n';
  if (!f) throw Error("short write to " + path.string());
}

std::vector<Vec3> read_points_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind("index,", 0) != 0)
    throw BadFormat(path.string() + ": missing index,x,y,z header");
  std::vector<Vec3> points;
  std::size_t line_number = 1;
  while (std::getline(f, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    double values[4];
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(row, field, ','))
        throw BadFormat(path.string() + ": short row at line " +
                        std::to_string(line_number));
      try {
        values[c] = std::stod(field);
      } catch (const std::exception&) {
        throw BadFormat(path.string() + ": bad number at line " +
                        std::to_string(line_number));
      }
    }
    points.emplace_back(values[1], values[2], values[3]);
  }
  return points;
}

}  // namespace

void write_curve_csv(const std::filesystem::path& path, const Curve& curve) {
  write_points_csv(path, curve.points);
}

Curve read_curve_csv(const std::filesystem::path& path) {
  Curve c;
  c.points = read_points_csv(path);
  if (c.size() < 2) throw BadFormat(path.string() + ": curve needs at least 2 points");
  if (!c.finite()) throw BadFormat(path.string() + ": non-finite coordinates");
  return c;
}

void write_srvf_csv(const std::filesystem::path& path, const Srvf& q) {
  write_points_csv(path, q.values);
}

Srvf read_srvf_csv(const std::filesystem::path& path) {
  Srvf q;
  q.values = read_points_csv(path);
  if (q.grid_size() < 1) throw BadFormat(path.string() + ": empty srvf");
  return q;
}

void write_matrix_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& ids,
                      const std::vector<std::vector<double>>& matrix) {
  if (ids.size() != matrix.size()) throw Error("matrix/id size mismatch");
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.precision(17);
  for (const std::string& id : ids) f << ',' << id;
  f << '\n';
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    if (matrix[r].size() != ids.size()) throw Error("ragged matrix row");
    f << ids[r];
    for (double v : matrix[r]) f << ',' << v;
    f << '\n';
  }
}

void write_backbone_pdb(const std::filesystem::path& path, const Curve& curve,
                        char chain) {
  if (curve.size() % 3 != 0)
    throw Error("backbone PDB output needs 3 atoms per residue");
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  static const char* kNames[3] = {"N", "CA", "C"};
  static const char* kElements[3] = {"N", "C", "C"};
  char buf[96];
  for (int i = 0; i < curve.size(); ++i) {
    const int residue = i / 3 + 1;
    const int atom = i % 3;
    std::string name = kNames[atom];
    name = " " + name;
    name.resize(4, ' ');
    const Vec3& p = curve.points[i];
    std::snprintf(buf, sizeof(buf),
                  "ATOM  %5d %s GLY %c%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s",
                  i + 1, name.c_str(), chain, residue, p.x(), p.y(), p.z(),
                  kElements[atom]);
    f << buf << '\n';
  }
  f << "TER\nEND\n";
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for hashing");
  std::uint64_t hash = 1469598103934665603ULL;
  char buf[4096];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ULL;
    }
    if (!f) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016" PRIx64, hash);
  return out;
}

}  // namespace protshape::io
