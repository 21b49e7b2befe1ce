#pragma once

// Point-cloud primitives and the frame preprocessing chain:
// voxel downsample -> depth ROI crop -> largest connected component
// -> unit-sphere normalization -> fixed-size resampling.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tara/error.hpp"

namespace tara {

struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend auto operator<=>(const Point&, const Point&) = default;
};

inline double squared_distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

/// Unordered set of 3D points in meters. Point order carries no meaning.
struct PointCloud {
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Lexicographic (x, y, z) order; the canonical form used wherever a
/// deterministic traversal order is needed.
PointCloud sorted(PointCloud cloud);
bool is_sorted(const PointCloud& cloud);

struct PreprocessConfig {
    double voxel_size = 0.005;
    double roi_min = 0.1;
    double roi_max = 0.6;
    double component_radius = 0.02;
    std::size_t target_points = 1500;

    /// Throws InfeasibleConfig naming the first invalid field.
    void validate() const;
};

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

/// Keeps points with roi_min <= z <= roi_max.
PointCloud roi_crop(const PointCloud& cloud, double roi_min, double roi_max);

/// Largest Euclidean-radius connected component. Equal-sized components are
/// broken toward the one holding the lexicographically smallest point.
PointCloud largest_component(const PointCloud& cloud, double radius);

/// Component label per point (labels are dense, 0-based, in order of first
/// appearance). Spatial-hash grid with cell size = radius.
std::vector<std::size_t> connected_components(const PointCloud& cloud, double radius);

PointCloud normalize_unit_sphere(const PointCloud& cloud);

/// Exactly target_points points, sorted lexicographically; deterministic in
/// (point set, seed) regardless of input order.
PointCloud resample_fixed(const PointCloud& cloud, std::size_t target_points, std::uint64_t seed);

enum class PreprocessStage { voxel, roi, component, normalize, resample };

std::string_view to_string(PreprocessStage stage);
/// Throws FormatError for an unknown name.
PreprocessStage preprocess_stage_from_string(std::string_view s);

class FramePreprocessFailed : public Error {
public:
    FramePreprocessFailed(PreprocessStage stage, const std::string& cause);

    PreprocessStage stage() const { return stage_; }
    const std::string& cause() const { return cause_; }

private:
    PreprocessStage stage_;
    std::string cause_;
};

PointCloud preprocess_frame(const PointCloud& cloud, const PreprocessConfig& cfg, std::uint64_t seed);

// ASCII cloud files: one "x y z" per line, '#' comments allowed.
PointCloud parse_cloud(std::istream& in, std::string_view source = "<stream>");
PointCloud read_cloud(const std::filesystem::path& path);
/// fixed_decimals < 0 writes 17 significant digits (exact round trip);
/// otherwise a fixed number of decimals.
void write_cloud(std::ostream& out, const PointCloud& cloud, int fixed_decimals = -1);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, int fixed_decimals = -1);

}  // namespace tara
