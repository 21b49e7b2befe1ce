#include "tara/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "tara/error.hpp"
#include "tara/io.hpp"
#include "tara/parallel.hpp"
#include "tara/rng.hpp"

namespace tara {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kProfileStream = 0x9f0f11e;
constexpr std::uint64_t kScheduleStream = 0x5c4ed;
constexpr std::uint64_t kVisitStream = 0x7151;

// Footprint fraction of the ellipse seen by the overhead sensor.
constexpr double kFootprint = 0.95;
// Herd-level phase of the bump field; individuals jitter around it.
constexpr double kHerdPhase[3] = {0.3, 1.1, 2.0};

double quantize(double v) { return std::round(v * 1e5) / 1e5; }

double bump_field(const IndividualProfile& p, double u, double v) {
    constexpr double pi = std::numbers::pi;
    return (std::sin(pi * u + p.bump_phase[0]) + std::sin(pi * v + p.bump_phase[1]) +
            std::sin(pi * (u - v) + p.bump_phase[2])) /
           3.0;
}

std::string pad(int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*d", width, value);
    return buf;
}

}  // namespace

void IndividualProfile::validate() const {
    if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw InfeasibleConfig("profile axes must be positive");
    if (!(std::abs(bump_amplitude) < 0.2 * std::min({a, b, c})))
        throw InfeasibleConfig("profile bump amplitude must stay below 0.2 * min axis");
}

void ScenarioConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw InfeasibleConfig(std::string("scenario.") + name + " must be in [0, 1]");
    };
    if (individuals < 2) throw InfeasibleConfig("scenario.individuals must be >= 2");
    if (days < 1) throw InfeasibleConfig("scenario.days must be >= 1");
    if (visits_per_individual_per_day < 1) throw InfeasibleConfig("scenario.visits_per_individual_per_day must be >= 1");
    if (max_frames_per_visit < 1) throw InfeasibleConfig("scenario.max_frames_per_visit must be >= 1");
    if (min_frames_per_visit < 2 || min_frames_per_visit > max_frames_per_visit)
        throw InfeasibleConfig("scenario.min_frames_per_visit must be in [2, max_frames_per_visit]");
    if (stations < 1) throw InfeasibleConfig("scenario.stations must be >= 1");
    if (!(frame_interval > 0.0)) throw InfeasibleConfig("scenario.frame_interval must be > 0");
    if (!(min_visit_gap >= 5.0)) throw InfeasibleConfig("scenario.min_visit_gap must be >= 5 s so visits separate");
    if (!(max_visit_gap >= min_visit_gap)) throw InfeasibleConfig("scenario.max_visit_gap must be >= min_visit_gap");
    if (points_per_frame < 1) throw InfeasibleConfig("scenario.points_per_frame must be >= 1");
    if (!(noise_sigma >= 0.0)) throw InfeasibleConfig("scenario.noise_sigma must be >= 0");
    prob(drop_probability, "drop_probability");
    prob(contamination_probability, "contamination_probability");
    if (!(contamination_min_fraction > 0.0 && contamination_min_fraction <= contamination_max_fraction &&
          contamination_max_fraction < 1.0))
        throw InfeasibleConfig("scenario.contamination fractions must satisfy 0 < min <= max < 1");
    if (!(growth_rate >= 0.0)) throw InfeasibleConfig("scenario.growth_rate must be >= 0");
    if (!(bump_growth >= 0.0)) throw InfeasibleConfig("scenario.bump_growth must be >= 0");
    if (!(phase_jitter >= 0.0)) throw InfeasibleConfig("scenario.phase_jitter must be >= 0");
    if (!(growth_spread >= 0.0 && growth_spread <= 1.0)) throw InfeasibleConfig("scenario.growth_spread must be in [0, 1]");
    if (!(pose_jitter >= 0.0)) throw InfeasibleConfig("scenario.pose_jitter must be >= 0");
    if (!(yaw_jitter >= 0.0)) throw InfeasibleConfig("scenario.yaw_jitter must be >= 0");

    const int per_station = (individuals * visits_per_individual_per_day + stations - 1) / stations;
    const double busy = per_station * (max_frames_per_visit * frame_interval + max_visit_gap);
    if (busy > 17.0 * 3600.0) throw InfeasibleConfig("scenario.visits_per_individual_per_day does not fit in one day");
}

std::vector<IndividualProfile> make_profiles(const ScenarioConfig& cfg) {
    // Individuals sit on a grid: width/length ratio varies with id % 3 and the
    // bump amplitude ladder with id / 3. Drift raises the bump amplitude, so a
    // fast-growing individual moves toward its neighbour on the ladder.
    const int rungs = (cfg.individuals + 2) / 3;
    const double ladder = rungs > 1 ? 0.022 / (rungs - 1) : 0.0;
    std::vector<IndividualProfile> out;
    for (int k = 0; k < cfg.individuals; ++k) {
        Rng rng = make_rng(cfg.seed, {kProfileStream, static_cast<std::uint64_t>(k)});
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_real_distribution<double> spread(1.0 - cfg.growth_spread, 1.0 + cfg.growth_spread);
        std::normal_distribution<double> phase(0.0, cfg.phase_jitter > 0.0 ? cfg.phase_jitter : 1.0);
        IndividualProfile p;
        p.id = k;
        p.a = 0.30 * (1.0 + 0.01 * u(rng));
        p.b = p.a * (0.56 + 0.06 * (k % 3));
        p.c = p.a * 0.45 * (1.0 + 0.01 * u(rng));
        p.bump_amplitude = 0.004 + ladder * (k / 3);
        for (int i = 0; i < 3; ++i) p.bump_phase[i] = kHerdPhase[i] + (cfg.phase_jitter > 0.0 ? phase(rng) : 0.0);
        p.growth_rate = cfg.growth_rate * spread(rng);
        p.bump_growth = cfg.bump_growth * spread(rng);
        p.validate();
        out.push_back(p);
    }
    return out;
}

PointCloud sample_surface(const IndividualProfile& profile, int day, std::size_t n_points, std::uint64_t seed,
                          double noise_sigma) {
    const double scale = 1.0 + profile.growth_rate * day;
    const double a = profile.a * scale, b = profile.b * scale, c = profile.c * scale;
    const double amp = profile.bump_amplitude + profile.bump_growth * day;

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);

    PointCloud cloud;
    cloud.points.reserve(n_points);
    while (cloud.size() < n_points) {
        const double u = unit(rng), v = unit(rng);
        const double r2 = u * u + v * v;
        if (r2 > kFootprint) continue;
        Point p{a * u, b * v, c * std::sqrt(1.0 - r2) + amp * bump_field(profile, u, v)};
        if (noise_sigma > 0.0) {
            p.x += noise(rng);
            p.y += noise(rng);
            p.z += noise(rng);
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

PointCloud render_frame(const Scenario& scenario, const FrameSpec& frame) {
    const ScenarioConfig& cfg = scenario.config;
    const IndividualProfile& prof = scenario.profiles.at(static_cast<std::size_t>(frame.individual));
    Rng rng(frame.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);
    auto jitter = [&] { return cfg.noise_sigma > 0.0 ? noise(rng) : 0.0; };

    const double tx = cfg.pose_jitter * unit(rng);
    const double ty = cfg.pose_jitter * unit(rng);
    const double yaw = cfg.yaw_jitter * unit(rng);
    // A clipped frame has the animal closer than the sensor's minimum range.
    const double rim_depth = frame.clipped ? 0.05 : 0.48 + 0.02 * unit(rng);
    const double cy = std::cos(yaw), sy = std::sin(yaw);

    const PointCloud surface =
        sample_surface(prof, frame.day, static_cast<std::size_t>(cfg.points_per_frame), rng(), cfg.noise_sigma);
    PointCloud out;
    out.points.reserve(surface.size() + 500);
    for (const auto& p : surface.points)
        out.points.push_back({cy * p.x - sy * p.y + tx, sy * p.x + cy * p.y + ty, rim_depth - p.z});

    if (!frame.clipped) {
        // Feeder rail beside the animal.
        const double rail_y = prof.b * (1.0 + prof.growth_rate * frame.day) + 0.08;
        for (int i = 0; i < 150; ++i)
            out.points.push_back({0.4 * unit(rng), rail_y + jitter(), 0.30 + jitter()});
    }
    // Floor returns, beyond the ROI.
    for (int i = 0; i < 300; ++i) out.points.push_back({0.5 * unit(rng), 0.5 * unit(rng), 0.78 + jitter()});

    for (auto& p : out.points) p = {quantize(p.x), quantize(p.y), quantize(p.z)};
    return out;
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    Scenario sc;
    sc.config = cfg;
    sc.profiles = make_profiles(cfg);

    std::vector<FrameSpec> frames;
    for (int d = 0; d < cfg.days; ++d) {
        Rng sched = make_rng(cfg.seed, {kScheduleStream, static_cast<std::uint64_t>(d)});
        std::vector<std::pair<int, int>> slots;  // (individual, visit index)
        for (int k = 0; k < cfg.individuals; ++k)
            for (int j = 0; j < cfg.visits_per_individual_per_day; ++j) slots.emplace_back(k, j);
        std::shuffle(slots.begin(), slots.end(), sched);

        std::uniform_real_distribution<double> start_offset(0.0, 600.0);
        std::vector<double> clock(static_cast<std::size_t>(cfg.stations));
        for (auto& t : clock) t = kScenarioEpoch + d * kSecondsPerDay + 6.0 * 3600.0 + std::round(start_offset(sched));
        std::vector<int> seq(static_cast<std::size_t>(cfg.stations), 0);

        for (std::size_t s = 0; s < slots.size(); ++s) {
            const auto [k, j] = slots[s];
            const int station = static_cast<int>(s % static_cast<std::size_t>(cfg.stations));
            const std::string station_id = "st" + std::to_string(station);
            Rng vr = make_rng(cfg.seed, {kVisitStream, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(d),
                                         static_cast<std::uint64_t>(j)});
            std::uniform_int_distribution<int> length(cfg.min_frames_per_visit, cfg.max_frames_per_visit);
            std::uniform_real_distribution<double> u01(0.0, 1.0);

            VisitTruth vt;
            vt.day = d;
            vt.station_id = station_id;
            vt.true_id = k;
            vt.visit_id = "d" + std::to_string(d + 1) + "-" + station_id + "-v" + pad(seq[station]++, 3);
            const int n = length(vr);
            if (u01(vr) < cfg.contamination_probability) {
                std::uniform_int_distribution<int> pick(0, cfg.individuals - 2);
                int other = pick(vr);
                if (other >= k) ++other;
                const double frac = cfg.contamination_min_fraction +
                                    (cfg.contamination_max_fraction - cfg.contamination_min_fraction) * u01(vr);
                const int tail = std::clamp(static_cast<int>(std::lround(frac * n)), 1, n - 1);
                vt.contaminated = true;
                vt.other_id = other;
                vt.switch_frame = n - tail;
            }

            double& t = clock[static_cast<std::size_t>(station)];
            for (int f = 0; f < n; ++f) {
                FrameSpec fs;
                fs.frame_id = vt.visit_id + "-f" + pad(f, 3);
                fs.station_id = station_id;
                fs.timestamp = t + f * cfg.frame_interval;
                fs.day = d;
                fs.individual = (vt.contaminated && f >= vt.switch_frame) ? vt.other_id : k;
                fs.clipped = u01(vr) < cfg.drop_probability;
                fs.seed = derive_seed(cfg.seed, {kVisitStream, static_cast<std::uint64_t>(k),
                                                 static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(j),
                                                 static_cast<std::uint64_t>(f)});
                vt.frames.push_back(frames.size());
                frames.push_back(std::move(fs));
            }
            sc.rfid.push_back({k, station_id, t, t + (n - 1) * cfg.frame_interval});
            t += (n - 1) * cfg.frame_interval + std::round(cfg.min_visit_gap +
                                                            (cfg.max_visit_gap - cfg.min_visit_gap) * u01(sched));
            sc.truth.push_back(std::move(vt));
        }
    }

    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (frames[a].timestamp != frames[b].timestamp) return frames[a].timestamp < frames[b].timestamp;
        return frames[a].station_id < frames[b].station_id;
    });
    std::vector<std::size_t> where(frames.size());
    sc.frames.reserve(frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        where[order[i]] = i;
        sc.frames.push_back(std::move(frames[order[i]]));
    }
    for (auto& vt : sc.truth)
        for (auto& idx : vt.frames) idx = where[idx];
    std::stable_sort(sc.rfid.begin(), sc.rfid.end(), [](const RfidRecord& a, const RfidRecord& b) {
        return std::tie(a.start_ts, a.station_id) < std::tie(b.start_ts, b.station_id);
    });
    return sc;
}

ScenarioSummary Scenario::summary() const {
    ScenarioSummary s;
    s.frames = frames.size();
    for (const auto& f : frames) s.clipped_frames += f.clipped ? 1 : 0;
    s.visits = truth.size();
    for (const auto& v : truth) s.contaminated_visits += v.contaminated ? 1 : 0;
    return s;
}

void write_scenario(const Scenario& scenario, const fs::path& dir, unsigned threads) {
    fs::create_directories(dir / "clouds");
    std::vector<ManifestEntry> manifest;
    manifest.reserve(scenario.frames.size());
    for (const auto& f : scenario.frames)
        manifest.push_back({f.frame_id, f.station_id, f.timestamp, "clouds/" + f.frame_id + ".xyz"});

    parallel_for(scenario.frames.size(), threads, [&](std::size_t i) {
        write_cloud(dir / manifest[i].cloud_path, render_frame(scenario, scenario.frames[i]), 5);
    });
    write_manifest(dir / "manifest.jsonl", manifest);
    write_rfid_csv(dir / "rfid.csv", scenario.rfid);
    std::vector<GroundTruthRow> rows;
    for (const auto& v : scenario.truth) rows.push_back({v.visit_id, v.true_id, v.contaminated, v.switch_frame});
    write_ground_truth_csv(dir / "ground_truth.csv", rows);
}

int day_of(double timestamp, double origin) {
    return static_cast<int>(std::floor((timestamp - origin) / kSecondsPerDay)) + 1;
}

}  // namespace tara
