#include "tara/pointcloud.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tara/rng.hpp"

namespace tara {

namespace {

struct CellKey {
    std::int64_t i, j, k;
    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& c) const noexcept {
        std::uint64_t h = mix64(static_cast<std::uint64_t>(c.i));
        h = mix64(h ^ static_cast<std::uint64_t>(c.j));
        h = mix64(h ^ static_cast<std::uint64_t>(c.k));
        return static_cast<std::size_t>(h);
    }
};

CellKey cell_of(const Point& p, double size) {
    return {static_cast<std::int64_t>(std::floor(p.x / size)),
            static_cast<std::int64_t>(std::floor(p.y / size)),
            static_cast<std::int64_t>(std::floor(p.z / size))};
}

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<unsigned char> rank_;
};

Point centroid_of_sorted(const std::vector<Point>& pts) {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    for (const auto& p : pts) {
        sx += p.x;
        sy += p.y;
        sz += p.z;
    }
    const double n = static_cast<double>(pts.size());
    return {sx / n, sy / n, sz / n};
}

}  // namespace

PointCloud sorted(PointCloud cloud) {
    std::sort(cloud.points.begin(), cloud.points.end());
    return cloud;
}

bool is_sorted(const PointCloud& cloud) {
    return std::is_sorted(cloud.points.begin(), cloud.points.end());
}

void PreprocessConfig::validate() const {
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size))
        throw InfeasibleConfig("preprocess.voxel_size must be > 0");
    if (!(roi_min >= 0.0)) throw InfeasibleConfig("preprocess.roi_min must be >= 0");
    if (!(roi_min < roi_max)) throw InfeasibleConfig("preprocess.roi_max must exceed preprocess.roi_min");
    if (!(component_radius > 0.0) || !std::isfinite(component_radius))
        throw InfeasibleConfig("preprocess.component_radius must be > 0");
    if (target_points < 1) throw InfeasibleConfig("preprocess.target_points must be >= 1");
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be > 0");
    if (cloud.empty()) return {};

    // Sorting first makes every centroid sum independent of input order.
    const PointCloud canon = sorted(cloud);
    std::vector<std::pair<CellKey, std::size_t>> keyed;
    keyed.reserve(canon.size());
    for (std::size_t i = 0; i < canon.size(); ++i) keyed.emplace_back(cell_of(canon.points[i], voxel_size), i);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        return std::tie(a.first.i, a.first.j, a.first.k) < std::tie(b.first.i, b.first.j, b.first.k);
    });

    PointCloud out;
    std::size_t begin = 0;
    while (begin < keyed.size()) {
        std::size_t end = begin;
        double sx = 0.0, sy = 0.0, sz = 0.0;
        while (end < keyed.size() && keyed[end].first == keyed[begin].first) {
            const Point& p = canon.points[keyed[end].second];
            sx += p.x;
            sy += p.y;
            sz += p.z;
            ++end;
        }
        const double n = static_cast<double>(end - begin);
        out.points.push_back({sx / n, sy / n, sz / n});
        begin = end;
    }
    return out;
}

PointCloud roi_crop(const PointCloud& cloud, double roi_min, double roi_max) {
    if (!(roi_min < roi_max)) throw std::invalid_argument("roi_min must be < roi_max");
    PointCloud out;
    std::copy_if(cloud.points.begin(), cloud.points.end(), std::back_inserter(out.points),
                 [&](const Point& p) { return p.z >= roi_min && p.z <= roi_max; });
    return out;
}

std::vector<std::size_t> connected_components(const PointCloud& cloud, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be > 0");
    const std::size_t n = cloud.size();
    std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
    grid.reserve(n);
    for (std::size_t i = 0; i < n; ++i) grid[cell_of(cloud.points[i], radius)].push_back(i);

    const double r2 = radius * radius;
    DisjointSet sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        const CellKey c = cell_of(cloud.points[i], radius);
        for (std::int64_t di = -1; di <= 1; ++di)
            for (std::int64_t dj = -1; dj <= 1; ++dj)
                for (std::int64_t dk = -1; dk <= 1; ++dk) {
                    auto it = grid.find({c.i + di, c.j + dj, c.k + dk});
                    if (it == grid.end()) continue;
                    for (std::size_t j : it->second) {
                        if (j > i && squared_distance(cloud.points[i], cloud.points[j]) <= r2) sets.unite(i, j);
                    }
                }
    }

    std::vector<std::size_t> labels(n);
    std::unordered_map<std::size_t, std::size_t> dense;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = dense.try_emplace(sets.find(i), dense.size());
        labels[i] = it->second;
    }
    return labels;
}

PointCloud largest_component(const PointCloud& cloud, double radius) {
    if (cloud.empty()) throw EmptyCloud();
    const auto labels = connected_components(cloud, radius);
    const std::size_t count = *std::max_element(labels.begin(), labels.end()) + 1;

    std::vector<std::size_t> sizes(count, 0);
    std::vector<const Point*> smallest(count, nullptr);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::size_t l = labels[i];
        ++sizes[l];
        if (!smallest[l] || cloud.points[i] < *smallest[l]) smallest[l] = &cloud.points[i];
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < count; ++l) {
        if (sizes[l] > sizes[best] || (sizes[l] == sizes[best] && *smallest[l] < *smallest[best])) best = l;
    }

    PointCloud out;
    out.points.reserve(sizes[best]);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == best) out.points.push_back(cloud.points[i]);
    return out;
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
    if (cloud.empty()) throw EmptyCloud();
    PointCloud out = sorted(cloud);
    const Point c = centroid_of_sorted(out.points);
    double max_norm2 = 0.0;
    for (auto& p : out.points) {
        p = {p.x - c.x, p.y - c.y, p.z - c.z};
        max_norm2 = std::max(max_norm2, p.x * p.x + p.y * p.y + p.z * p.z);
    }
    const double scale = std::sqrt(max_norm2);
    if (!(scale > 0.0)) throw DegenerateCloud();
    for (auto& p : out.points) p = {p.x / scale, p.y / scale, p.z / scale};
    return out;
}

PointCloud resample_fixed(const PointCloud& cloud, std::size_t target_points, std::uint64_t seed) {
    if (cloud.empty()) throw EmptyCloud();
    const PointCloud canon = sorted(cloud);
    const std::size_t n = canon.size();
    Rng rng(derive_seed(seed, {n, target_points}));

    PointCloud out;
    out.points.reserve(target_points);
    if (n >= target_points) {
        std::sample(canon.points.begin(), canon.points.end(), std::back_inserter(out.points), target_points, rng);
    } else {
        out.points = canon.points;
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        while (out.size() < target_points) out.points.push_back(canon.points[pick(rng)]);
    }
    std::sort(out.points.begin(), out.points.end());
    return out;
}

std::string_view to_string(PreprocessStage stage) {
    switch (stage) {
        case PreprocessStage::voxel: return "voxel";
        case PreprocessStage::roi: return "roi";
        case PreprocessStage::component: return "component";
        case PreprocessStage::normalize: return "normalize";
        case PreprocessStage::resample: return "resample";
    }
    return "unknown";
}

PreprocessStage preprocess_stage_from_string(std::string_view s) {
    for (auto st : {PreprocessStage::voxel, PreprocessStage::roi, PreprocessStage::component, PreprocessStage::normalize,
                    PreprocessStage::resample})
        if (to_string(st) == s) return st;
    throw FormatError("unknown preprocessing stage '" + std::string(s) + "'");
}

FramePreprocessFailed::FramePreprocessFailed(PreprocessStage stage, const std::string& cause)
    : Error("preprocessing failed at " + std::string(to_string(stage)) + " stage: " + cause),
      stage_(stage),
      cause_(cause) {}

PointCloud preprocess_frame(const PointCloud& cloud, const PreprocessConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    PreprocessStage stage = PreprocessStage::voxel;
    try {
        PointCloud c = voxel_downsample(cloud, cfg.voxel_size);
        if (c.empty()) throw EmptyCloud();

        stage = PreprocessStage::roi;
        c = roi_crop(c, cfg.roi_min, cfg.roi_max);
        if (c.empty()) throw EmptyCloud();

        stage = PreprocessStage::component;
        c = largest_component(c, cfg.component_radius);

        stage = PreprocessStage::normalize;
        c = normalize_unit_sphere(c);

        stage = PreprocessStage::resample;
        return resample_fixed(c, cfg.target_points, seed);
    } catch (const EmptyCloud& e) {
        throw FramePreprocessFailed(stage, e.what());
    } catch (const DegenerateCloud& e) {
        throw FramePreprocessFailed(stage, e.what());
    }
}

PointCloud parse_cloud(std::istream& in, std::string_view source) {
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;

        std::array<double, 3> v{};
        std::size_t fields = 0;
        const char* p = line.data() + first;
        const char* end = line.data() + line.size();
        bool bad = false;
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
            if (p == end) break;
            double value = 0.0;
            auto [next, ec] = std::from_chars(p, end, value);
            if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t' && *next != '\r')) {
                bad = true;
                break;
            }
            if (fields < 3) v[fields] = value;
            ++fields;
            p = next;
        }
        if (bad || fields != 3)
            throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": expected 3 numeric fields");
        if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2]))
            throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": non-finite coordinate");
        cloud.points.push_back({v[0], v[1], v[2]});
    }
    return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open cloud file " + path.string());
    return parse_cloud(in, path.string());
}

void write_cloud(std::ostream& out, const PointCloud& cloud, int fixed_decimals) {
    std::array<char, 64> buf{};
    std::string line;
    for (const auto& p : cloud.points) {
        line.clear();
        for (double v : {p.x, p.y, p.z}) {
            auto res = fixed_decimals < 0
                           ? std::to_chars(buf.data(), buf.data() + buf.size(), v)
                           : std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed,
                                           fixed_decimals);
            if (!line.empty()) line.push_back(' ');
            line.append(buf.data(), res.ptr);
        }
        line.push_back('\n');
        out << line;
    }
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, int fixed_decimals) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write cloud file " + path.string());
    write_cloud(out, cloud, fixed_decimals);
}

}  // namespace tara
