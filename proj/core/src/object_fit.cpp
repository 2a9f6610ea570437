#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "hotrack/error.hpp"
#include "hotrack/scene_model.hpp"

namespace hotrack {

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
}

double VoxelGrid::occupied_volume() const {
  return static_cast<double>(occupied_count()) * voxel_size * voxel_size * voxel_size;
}

VoxelGrid make_box_grid(const Vec3& size, double voxel_size) {
  if (!(voxel_size > 0.0) || !(size.minCoeff() > 0.0)) throw InvalidInput("make_box_grid: bad size");
  VoxelGrid g;
  g.voxel_size = voxel_size;
  for (int a = 0; a < 3; ++a) g.dims[a] = std::max(1, static_cast<int>(std::lround(size[a] / voxel_size)));
  g.origin = -0.5 * voxel_size * g.dims.cast<double>();
  g.occupied.assign(static_cast<std::size_t>(g.dims.prod()), 1);
  return g;
}

VoxelGrid voxelize(const TriangleMesh& mesh, double voxel_size) {
  if (mesh.vertices.empty() || mesh.faces.empty()) throw InvalidInput("voxelize: empty mesh");
  if (!(voxel_size > 0.0)) throw InvalidInput("voxelize: voxel size must be positive");
  Vec3 lo = mesh.vertices.front(), hi = lo;
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  VoxelGrid g;
  g.voxel_size = voxel_size;
  g.origin = lo;
  for (int a = 0; a < 3; ++a)
    g.dims[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / voxel_size)));
  g.occupied.assign(static_cast<std::size_t>(g.dims.prod()), 0);

  std::vector<double> hits;
  for (int k = 0; k < g.dims.z(); ++k) {
    for (int j = 0; j < g.dims.y(); ++j) {
      // Tiny irrational offsets keep the ray off shared edges.
      const double y = g.origin.y() + voxel_size * (j + 0.5) + 1.1e-7 * voxel_size;
      const double z = g.origin.z() + voxel_size * (k + 0.5) + 1.7e-7 * voxel_size;
      hits.clear();
      for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        // Barycentric test in the yz-plane.
        const double d = (b.y() - a.y()) * (c.z() - a.z()) - (c.y() - a.y()) * (b.z() - a.z());
        if (std::abs(d) < 1e-15) continue;
        const double s = ((y - a.y()) * (c.z() - a.z()) - (c.y() - a.y()) * (z - a.z())) / d;
        const double t = ((b.y() - a.y()) * (z - a.z()) - (y - a.y()) * (b.z() - a.z())) / d;
        if (s < 0.0 || t < 0.0 || s + t > 1.0) continue;
        hits.push_back(a.x() + s * (b.x() - a.x()) + t * (c.x() - a.x()));
      }
      std::sort(hits.begin(), hits.end());
      for (std::size_t h = 0; h + 1 < hits.size(); h += 2) {
        for (int i = 0; i < g.dims.x(); ++i) {
          const double x = g.origin.x() + voxel_size * (i + 0.5);
          if (x >= hits[h] && x <= hits[h + 1]) g.occupied[g.index(i, j, k)] = 1;
        }
      }
    }
  }
  return g;
}

namespace {

TriangleMesh load_off(std::istream& in, int& line_no) {
  TriangleMesh mesh;
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("OFF: missing counts", line_no);
  std::istringstream counts(line);
  long nv = -1, nf = -1;
  if (!(counts >> nv >> nf) || nv < 0 || nf < 0) throw ParseError("OFF: bad counts line", line_no);
  for (long i = 0; i < nv; ++i) {
    if (!next_line()) throw ParseError("OFF: truncated vertex list", line_no);
    std::istringstream ls(line);
    Vec3 v;
    if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError("OFF: bad vertex", line_no);
    mesh.vertices.push_back(v);
  }
  for (long i = 0; i < nf; ++i) {
    if (!next_line()) throw ParseError("OFF: truncated face list", line_no);
    std::istringstream ls(line);
    int n = 0;
    if (!(ls >> n) || n < 3) throw ParseError("OFF: bad face", line_no);
    std::vector<int> idx(n);
    for (int& x : idx)
      if (!(ls >> x) || x < 0 || x >= nv) throw ParseError("OFF: bad face index", line_no);
    for (int t = 1; t + 1 < n; ++t) mesh.faces.push_back({idx[0], idx[t], idx[t + 1]});
  }
  return mesh;
}

TriangleMesh load_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError("OBJ: bad vertex", line_no);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        int i = 0;
        try {
          i = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw ParseError("OBJ: bad face token '" + tok + "'", line_no);
        }
        const int n = static_cast<int>(mesh.vertices.size());
        i = i < 0 ? n + i : i - 1;
        if (i < 0 || i >= n) throw ParseError("OBJ: face index out of range", line_no);
        idx.push_back(i);
      }
      if (idx.size() < 3) throw ParseError("OBJ: face with fewer than 3 vertices", line_no);
      for (std::size_t t = 1; t + 1 < idx.size(); ++t) mesh.faces.push_back({idx[0], idx[t], idx[t + 1]});
    }
  }
  return mesh;
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open mesh file " + path.string());
  if (path.extension() == ".obj") return load_obj(in);
  std::string header;
  int line_no = 1;
  if (!std::getline(in, header) || header.rfind("OFF", 0) != 0)
    throw ParseError("mesh: expected OFF header or .obj extension", 1);
  return load_off(in, line_no);
}

VoxelGrid load_occupancy_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open occupancy grid " + path.string());
  std::string line;
  int line_no = 0;
  auto expect = [&](const std::string& key) -> std::istringstream {
    if (!std::getline(in, line)) throw ParseError("occupancy grid: missing '" + key + "'", line_no + 1);
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != key) throw ParseError("occupancy grid: expected '" + key + "'", line_no);
    return ls;
  };
  {
    auto ls = expect("HOTRACK_OCCUPANCY");
    int version = 0;
    if (!(ls >> version) || version != 1) throw ParseError("occupancy grid: unsupported version", line_no);
  }
  VoxelGrid g;
  {
    auto ls = expect("dims");
    if (!(ls >> g.dims.x() >> g.dims.y() >> g.dims.z()) || g.dims.minCoeff() <= 0)
      throw ParseError("occupancy grid: bad dims", line_no);
  }
  {
    auto ls = expect("voxel_size");
    if (!(ls >> g.voxel_size) || !(g.voxel_size > 0.0)) throw ParseError("occupancy grid: bad voxel_size", line_no);
  }
  {
    auto ls = expect("origin");
    if (!(ls >> g.origin.x() >> g.origin.y() >> g.origin.z())) throw ParseError("occupancy grid: bad origin", line_no);
  }
  g.occupied.assign(static_cast<std::size_t>(g.dims.prod()), 0);
  for (int k = 0; k < g.dims.z(); ++k) {
    for (int j = 0; j < g.dims.y(); ++j) {
      if (!std::getline(in, line)) throw ParseError("occupancy grid: truncated rows", line_no + 1);
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (static_cast<int>(line.size()) != g.dims.x()) throw ParseError("occupancy grid: row length mismatch", line_no);
      for (int i = 0; i < g.dims.x(); ++i) {
        if (line[i] != '0' && line[i] != '1') throw ParseError("occupancy grid: expected 0/1", line_no);
        g.occupied[g.index(i, j, k)] = line[i] == '1';
      }
    }
  }
  return g;
}

void save_occupancy_grid(const VoxelGrid& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write occupancy grid " + path.string());
  out.precision(17);
  out << "HOTRACK_OCCUPANCY 1\n"
      << "dims " << g.dims.x() << ' ' << g.dims.y() << ' ' << g.dims.z() << '\n'
      << "voxel_size " << g.voxel_size << '\n'
      << "origin " << g.origin.x() << ' ' << g.origin.y() << ' ' << g.origin.z() << '\n';
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j) {
      for (int i = 0; i < g.dims.x(); ++i) out << (g.occupied[g.index(i, j, k)] ? '1' : '0');
      out << '\n';
    }
}

namespace {

struct Clustering {
  std::vector<Vec3> centers;
  std::vector<int> assignment;
  double distortion = std::numeric_limits<double>::infinity();
};

Clustering lloyd(const std::vector<Vec3>& pts, int k, int max_iterations, std::mt19937_64& rng) {
  Clustering c;
  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  c.centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(c.centers.size()) < k) {
    double total = 0.0;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      d2[p] = std::min(d2[p], (pts[p] - c.centers.back()).squaredNorm());
      total += d2[p];
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t chosen = pts.size() - 1;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      target -= d2[p];
      if (target <= 0.0) {
        chosen = p;
        break;
      }
    }
    c.centers.push_back(pts[chosen]);
  }

  c.assignment.assign(pts.size(), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      int best = 0;
      double bd = (pts[p] - c.centers[0]).squaredNorm();
      for (int j = 1; j < k; ++j) {
        const double d = (pts[p] - c.centers[j]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      if (c.assignment[p] != best) {
        c.assignment[p] = best;
        changed = true;
      }
    }
    std::vector<Vec3> sum(k, Vec3::Zero());
    std::vector<int> count(k, 0);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      sum[c.assignment[p]] += pts[p];
      ++count[c.assignment[p]];
    }
    for (int j = 0; j < k; ++j) {
      if (count[j] > 0) {
        c.centers[j] = sum[j] / count[j];
      } else {
        // Re-seed an empty cluster at the point farthest from its centre.
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t p = 0; p < pts.size(); ++p) {
          const double d = (pts[p] - c.centers[c.assignment[p]]).squaredNorm();
          if (d > fd) {
            fd = d;
            far = p;
          }
        }
        c.centers[j] = pts[far];
        changed = true;
      }
    }
    if (!changed) break;
  }
  c.distortion = 0.0;
  for (std::size_t p = 0; p < pts.size(); ++p)
    c.distortion += (pts[p] - c.centers[c.assignment[p]]).squaredNorm();
  return c;
}

}  // namespace

GaussianMixture fit_object_gaussians(const VoxelGrid& geometry, int count,
                                     const ObjectFitOptions& options) {
  if (count < 1) throw InvalidInput("fit_object_gaussians: count must be >= 1");
  std::vector<Eigen::Vector3i> cells;
  for (int k = 0; k < geometry.dims.z(); ++k)
    for (int j = 0; j < geometry.dims.y(); ++j)
      for (int i = 0; i < geometry.dims.x(); ++i)
        if (geometry.occupied[geometry.index(i, j, k)]) cells.emplace_back(i, j, k);
  if (cells.empty()) throw InvalidInput("fit_object_gaussians: empty geometry");
  if (static_cast<std::size_t>(count) > cells.size())
    throw InvalidInput("fit_object_gaussians: more Gaussians than occupied voxels");

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick_cell(0, cells.size() - 1);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  const int n = std::max(options.samples, count);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (int s = 0; s < n; ++s) {
    const Eigen::Vector3i& c = cells[pick_cell(rng)];
    pts.push_back(geometry.origin +
                  geometry.voxel_size * Vec3(c.x() + jitter(rng), c.y() + jitter(rng), c.z() + jitter(rng)));
  }

  Clustering best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Clustering c = lloyd(pts, count, options.max_iterations, rng);
    if (c.distortion < best.distortion) best = std::move(c);
  }

  const double volume = geometry.occupied_volume();
  std::vector<double> sq(count, 0.0);
  std::vector<int> members(count, 0);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const int j = best.assignment[p];
    sq[j] += (pts[p] - best.centers[j]).squaredNorm();
    ++members[j];
  }
  GaussianMixture out;
  for (int j = 0; j < count; ++j) {
    Gaussian g;
    g.mean = best.centers[j];
    const double share = static_cast<double>(members[j]) / static_cast<double>(pts.size());
    const double rms = members[j] > 0 ? std::sqrt(sq[j] / members[j]) : 0.0;
    const double equal_volume_radius = std::cbrt(3.0 * volume * share / (4.0 * std::numbers::pi));
    g.sigma = std::max({rms, equal_volume_radius, 1e-6});
    g.label = Label::Object;
    out.push_back(g);
  }
  if (count > 1 && options.min_coverage > 0.0 && sphere_coverage(geometry, out) < options.min_coverage) {
    // Smallest common sigma scale reaching the coverage target.
    auto scaled = [&](double s) {
      GaussianMixture m = out;
      for (Gaussian& g : m) g.sigma *= s;
      return m;
    };
    double lo = 1.0, hi = 2.0;
    while (sphere_coverage(geometry, scaled(hi)) < options.min_coverage) hi *= 2.0;
    for (int it = 0; it < 40 && hi - lo > 1e-4; ++it) {
      const double mid = 0.5 * (lo + hi);
      (sphere_coverage(geometry, scaled(mid)) >= options.min_coverage ? hi : lo) = mid;
    }
    out = scaled(hi);
  }
  return out;
}

double sphere_coverage(const VoxelGrid& geometry, const GaussianMixture& mixture) {
  std::size_t total = 0, covered = 0;
  for (int k = 0; k < geometry.dims.z(); ++k)
    for (int j = 0; j < geometry.dims.y(); ++j)
      for (int i = 0; i < geometry.dims.x(); ++i) {
        if (!geometry.occupied[geometry.index(i, j, k)]) continue;
        ++total;
        const Vec3 c = geometry.center(i, j, k);
        for (const Gaussian& g : mixture)
          if ((c - g.mean).squaredNorm() <= g.sigma * g.sigma) {
            ++covered;
            break;
          }
      }
  return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace hotrack
