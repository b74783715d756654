#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cif/random.hpp"

namespace cif {

/// Malformed or insufficient input data (files, clouds, manifests).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Point3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> points;
  std::string id;
  std::string family;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class ShapeKind { Sphere, BoxSurface, PlaneWithNotch, LShape, TwoCluster };

std::string to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view name);

struct Range {
  double lo = 1.0;
  double hi = 1.0;
};

/// A continuous family of shapes in a fixed canonical orientation.
///
/// `size` scales the whole shape. `aspect` and `variant` are kind-specific:
///   - Sphere: radius = size; the other ranges are unused.
///   - BoxSurface: half-extents size·(1, a, v) for a ~ aspect, v ~ variant.
///   - PlaneWithNotch: square [-size, size]² in z = 0 with a notch cut from the
///     +y edge, notch centre x = variant·size, notch width = aspect·size.
///   - LShape: planar L in z = 0; long arm 2·size along +x, short arm
///     aspect·size along +y, arm width variant·size.
///   - TwoCluster: two Gaussian blobs (std 0.15·size) at x = ±aspect·size.
struct ShapeFamily {
  ShapeKind kind = ShapeKind::Sphere;
  Range size{1.0, 1.0};
  Range aspect{1.0, 1.0};
  Range variant{1.0, 1.0};

  static ShapeFamily defaults(ShapeKind kind);
};

/// Draws `count` clouds with independent family parameters. Noise is
/// isotropic Gaussian with standard deviation noise·size.
std::vector<PointCloud> synth_dataset(const ShapeFamily& family, std::size_t count, std::size_t points_per_cloud,
                                      double noise, std::uint64_t seed);

struct Normalization {
  Point3 centroid{0.0, 0.0, 0.0};
  double scale = 1.0;  // multiplier applied after centring

  PointCloud apply(const PointCloud& cloud) const;
  PointCloud invert(const PointCloud& cloud) const;
};

struct NormalizedCloud {
  PointCloud cloud;
  Normalization transform;
};

/// Centre on the centroid and scale so the farthest point has norm 1.
NormalizedCloud normalize(const PointCloud& cloud);

struct FHSplit {
  PointCloud xf;
  PointCloud xh;
  std::vector<std::size_t> f_indices;
  std::vector<std::size_t> h_indices;
};

/// Disjoint uniform subsets (without replacement) for the flow and the encoder.
FHSplit split_fh(const PointCloud& cloud, std::size_t n_f, std::size_t n_h, Rng& rng);

// Plain-text cloud files: one "x y z" per line, '#' comments. The optional
// comments "# id <id>" and "# family <name>" carry metadata.
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path path;
  std::string family;
};

// Manifest: "<cloud path> <family>" per line; relative paths resolve against
// the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::vector<PointCloud> load_manifest_clouds(const std::filesystem::path& path);

/// Writes each cloud as <dir>/<prefix><index>.xyz plus <dir>/manifest.txt.
std::filesystem::path save_dataset(const std::vector<PointCloud>& clouds, const std::filesystem::path& dir,
                                   const std::string& prefix = "cloud_");

}  // namespace cif
