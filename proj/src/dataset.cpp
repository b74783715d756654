#include "cif/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace cif {

std::string rng_to_string(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_from_string(const std::string& state) {
  Rng rng;
  std::istringstream in(state);
  in >> rng;
  if (in.fail()) throw DataError("invalid random engine state");
  return rng;
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::BoxSurface: return "box";
    case ShapeKind::PlaneWithNotch: return "notch";
    case ShapeKind::LShape: return "lshape";
    case ShapeKind::TwoCluster: return "two-cluster";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (auto k : {ShapeKind::Sphere, ShapeKind::BoxSurface, ShapeKind::PlaneWithNotch, ShapeKind::LShape,
                 ShapeKind::TwoCluster}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown shape family '" + std::string(name) +
                              "' (expected sphere, box, notch, lshape or two-cluster)");
}

ShapeFamily ShapeFamily::defaults(ShapeKind kind) {
  ShapeFamily f;
  f.kind = kind;
  switch (kind) {
    case ShapeKind::Sphere:
      break;
    case ShapeKind::BoxSurface:
      f.aspect = {0.4, 1.0};
      f.variant = {0.4, 1.0};
      break;
    case ShapeKind::PlaneWithNotch:
      f.aspect = {0.4, 0.8};
      f.variant = {-0.5, 0.5};
      break;
    case ShapeKind::LShape:
      f.aspect = {0.9, 1.1};
      f.variant = {0.4, 0.5};
      break;
    case ShapeKind::TwoCluster:
      f.aspect = {0.5, 0.9};
      break;
  }
  return f;
}

namespace {

void check_range(const Range& r, const char* what) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi)) || r.lo > r.hi) {
    throw std::invalid_argument(std::string("shape family: invalid ") + what + " range");
  }
}

void validate(const ShapeFamily& f) {
  check_range(f.size, "size");
  check_range(f.aspect, "aspect");
  check_range(f.variant, "variant");
  if (f.size.lo <= 0.0) throw std::invalid_argument("shape family: size must be positive");
  switch (f.kind) {
    case ShapeKind::Sphere:
      break;
    case ShapeKind::BoxSurface:
      if (f.aspect.lo <= 0.0 || f.variant.lo <= 0.0) throw std::invalid_argument("box: extents must be positive");
      break;
    case ShapeKind::PlaneWithNotch:
      if (f.aspect.lo <= 0.0) throw std::invalid_argument("notch: width must be positive");
      if (std::max(std::abs(f.variant.lo), std::abs(f.variant.hi)) + f.aspect.hi / 2 >= 1.0) {
        throw std::invalid_argument("notch: notch must lie inside the plane edge");
      }
      break;
    case ShapeKind::LShape:
      if (f.variant.lo <= 0.0) throw std::invalid_argument("lshape: arm width must be positive");
      if (f.aspect.lo <= f.variant.hi) throw std::invalid_argument("lshape: short arm must exceed arm width");
      break;
    case ShapeKind::TwoCluster:
      if (f.aspect.lo <= 0.0) throw std::invalid_argument("two-cluster: separation must be positive");
      break;
  }
}

Point3 sphere_point(Rng& rng, double radius) {
  for (;;) {
    Point3 p{standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (n > 1e-12) return {radius * p[0] / n, radius * p[1] / n, radius * p[2] / n};
  }
}

Point3 box_point(Rng& rng, const Point3& h) {
  // Faces perpendicular to axis k have area 4·h[(k+1)%3]·h[(k+2)%3] each.
  std::array<double, 3> area{h[1] * h[2], h[0] * h[2], h[0] * h[1]};
  double u = uniform(rng, 0.0, area[0] + area[1] + area[2]);
  std::size_t axis = u < area[0] ? 0 : (u < area[0] + area[1] ? 1 : 2);
  Point3 p;
  for (std::size_t k = 0; k < 3; ++k) p[k] = uniform(rng, -h[k], h[k]);
  p[axis] = uniform(rng, 0.0, 1.0) < 0.5 ? -h[axis] : h[axis];
  return p;
}

Point3 notch_point(Rng& rng, double s, double width, double centre) {
  for (;;) {
    double x = uniform(rng, -s, s);
    double y = uniform(rng, -s, s);
    bool in_notch = y > 0.5 * s && std::abs(x - centre) < width / 2;
    if (!in_notch) return {x, y, 0.0};
  }
}

Point3 lshape_point(Rng& rng, double long_arm, double short_arm, double width) {
  const double area_a = long_arm * width;
  const double area_b = width * (short_arm - width);
  if (uniform(rng, 0.0, area_a + area_b) < area_a) {
    return {uniform(rng, 0.0, long_arm), uniform(rng, 0.0, width), 0.0};
  }
  return {uniform(rng, 0.0, width), uniform(rng, width, short_arm), 0.0};
}

}  // namespace

std::vector<PointCloud> synth_dataset(const ShapeFamily& family, std::size_t count, std::size_t points_per_cloud,
                                      double noise, std::uint64_t seed) {
  validate(family);
  if (count == 0) throw std::invalid_argument("synth_dataset: count must be at least 1");
  if (points_per_cloud == 0) throw std::invalid_argument("synth_dataset: points_per_cloud must be at least 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw std::invalid_argument("synth_dataset: noise must be >= 0");

  Rng rng(seed);
  std::vector<PointCloud> out;
  out.reserve(count);
  const std::string name = to_string(family.kind);
  for (std::size_t c = 0; c < count; ++c) {
    const double s = uniform(rng, family.size.lo, family.size.hi);
    const double a = uniform(rng, family.aspect.lo, family.aspect.hi);
    const double v = uniform(rng, family.variant.lo, family.variant.hi);
    PointCloud cloud;
    cloud.family = name;
    cloud.id = name + "_" + std::to_string(c);
    cloud.points.reserve(points_per_cloud);
    for (std::size_t i = 0; i < points_per_cloud; ++i) {
      Point3 p;
      switch (family.kind) {
        case ShapeKind::Sphere: p = sphere_point(rng, s); break;
        case ShapeKind::BoxSurface: p = box_point(rng, {s, s * a, s * v}); break;
        case ShapeKind::PlaneWithNotch: p = notch_point(rng, s, a * s, v * s); break;
        case ShapeKind::LShape: p = lshape_point(rng, 2.0 * s, a * s, v * s); break;
        case ShapeKind::TwoCluster: {
          const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
          const double sd = 0.15 * s;
          p = {sign * a * s + sd * standard_normal(rng), sd * standard_normal(rng), sd * standard_normal(rng)};
          break;
        }
      }
      if (noise > 0.0) {
        for (auto& x : p) x += noise * s * standard_normal(rng);
      }
      cloud.points.push_back(p);
    }
    out.push_back(std::move(cloud));
  }
  return out;
}

PointCloud Normalization::apply(const PointCloud& cloud) const {
  PointCloud out = cloud;
  for (auto& p : out.points)
    for (std::size_t k = 0; k < 3; ++k) p[k] = (p[k] - centroid[k]) * scale;
  return out;
}

PointCloud Normalization::invert(const PointCloud& cloud) const {
  PointCloud out = cloud;
  for (auto& p : out.points)
    for (std::size_t k = 0; k < 3; ++k) p[k] = p[k] / scale + centroid[k];
  return out;
}

NormalizedCloud normalize(const PointCloud& cloud) {
  if (cloud.empty()) throw DataError("normalize: empty cloud");
  Normalization t;
  for (const auto& p : cloud.points)
    for (std::size_t k = 0; k < 3; ++k) t.centroid[k] += p[k];
  for (auto& c : t.centroid) c /= static_cast<double>(cloud.size());
  double max_norm = 0.0;
  for (const auto& p : cloud.points) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) n2 += (p[k] - t.centroid[k]) * (p[k] - t.centroid[k]);
    max_norm = std::max(max_norm, std::sqrt(n2));
  }
  if (!(max_norm > 1e-12)) throw DataError("normalize: degenerate cloud (all points identical)");
  t.scale = 1.0 / max_norm;
  return {t.apply(cloud), t};
}

FHSplit split_fh(const PointCloud& cloud, std::size_t n_f, std::size_t n_h, Rng& rng) {
  const std::size_t n = cloud.size();
  if (n_f == 0 || n_h == 0) throw std::invalid_argument("split_fh: subset sizes must be positive");
  if (n_f + n_h > n) {
    throw DataError("split_fh: cloud '" + cloud.id + "' has " + std::to_string(n) + " points, need " +
                    std::to_string(n_f + n_h) + " (points_f + points_h)");
  }
  // Partial Fisher-Yates: the first n_f + n_h slots are a uniform sample without replacement.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < n_f + n_h; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  FHSplit out;
  out.f_indices.assign(idx.begin(), idx.begin() + n_f);
  out.h_indices.assign(idx.begin() + n_f, idx.begin() + n_f + n_h);
  out.xf.id = out.xh.id = cloud.id;
  out.xf.family = out.xh.family = cloud.family;
  for (auto i : out.f_indices) out.xf.points.push_back(cloud.points[i]);
  for (auto i : out.h_indices) out.xh.points.push_back(cloud.points[i]);
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cloud file " + path.string());
  PointCloud cloud;
  cloud.id = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::istringstream meta(t.substr(1));
      std::string key, value;
      meta >> key >> value;
      if (key == "id" && !value.empty()) cloud.id = value;
      if (key == "family" && !value.empty()) cloud.family = value;
      continue;
    }
    std::istringstream fields(t);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.size() != 3) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 3 coordinates, found " +
                      std::to_string(tokens.size()));
    }
    Point3 p;
    for (std::size_t k = 0; k < 3; ++k) {
      const char* first = tokens[k].data();
      const char* last = first + tokens[k].size();
      auto [ptr, ec] = std::from_chars(first, last, p[k]);
      if (ec != std::errc() || ptr != last || !std::isfinite(p[k])) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid coordinate '" + tokens[k] + "'");
      }
    }
    cloud.points.push_back(p);
  }
  if (cloud.empty()) throw DataError("cloud file " + path.string() + " contains no points");
  return cloud;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  if (cloud.empty()) throw DataError("save_cloud: refusing to write an empty cloud");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cloud file " + path.string());
  if (!cloud.id.empty() && cloud.id.find_first_of(" \t\n") == std::string::npos) out << "# id " << cloud.id << '\n';
  if (!cloud.family.empty() && cloud.family.find_first_of(" \t\n") == std::string::npos) {
    out << "# family " << cloud.family << '\n';
  }
  char buf[96];
  for (const auto& p : cloud.points) {
    int n = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out.write(buf, n);
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  const auto base = path.parent_path();
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream fields(t);
    std::string file, family, extra;
    fields >> file >> family >> extra;
    if (!extra.empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected '<path> <family>'");
    }
    std::filesystem::path p(file);
    if (p.is_relative()) p = base / p;
    entries.push_back({p, family});
  }
  if (entries.empty()) throw DataError("manifest " + path.string() + " lists no clouds");
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    std::filesystem::path p = e.path;
    if (!base.empty() && p.parent_path() == base) p = p.filename();
    out << p.string() << ' ' << (e.family.empty() ? "unknown" : e.family) << '\n';
  }
}

std::vector<PointCloud> load_manifest_clouds(const std::filesystem::path& path) {
  std::vector<PointCloud> clouds;
  for (const auto& e : load_manifest(path)) {
    PointCloud c = load_cloud(e.path);
    if (!e.family.empty()) c.family = e.family;
    clouds.push_back(std::move(c));
  }
  return clouds;
}

std::filesystem::path save_dataset(const std::vector<PointCloud>& clouds, const std::filesystem::path& dir,
                                   const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  char name[64];
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    std::snprintf(name, sizeof name, "%s%04zu.xyz", prefix.c_str(), i);
    auto p = dir / name;
    save_cloud(clouds[i], p);
    entries.push_back({p, clouds[i].family});
  }
  auto manifest = dir / "manifest.txt";
  save_manifest(entries, manifest);
  return manifest;
}

}  // namespace cif
