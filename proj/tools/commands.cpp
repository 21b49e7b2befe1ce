#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "tara/io.hpp"
#include "tara/parallel.hpp"
#include "tara/recalibration.hpp"
#include "tara/synthdata.hpp"

namespace tara::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kChunk = 256;

void log(const std::string& msg) { std::cerr << "[tara] " << msg << '\n'; }

template <typename Fn>
auto in_stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// Removes everything registered unless commit() was reached, so a failed
// command leaves no partial artifacts behind.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;
    ~Outputs() {
        if (committed_) return;
        for (const auto& p : paths_) {
            std::error_code ec;
            fs::remove_all(p, ec);
        }
    }

    fs::path add(const std::string& rel) {
        paths_.push_back(dir_ / rel);
        return paths_.back();
    }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> paths_;
    bool committed_ = false;
};

const fs::path& require_path(const fs::path& p, const char* key, const char* stage, const char* what) {
    if (p.empty()) throw StageError(stage, std::string(key) + " is not set");
    if (!fs::exists(p)) throw StageError(stage, std::string(what) + " not found: " + p.string());
    return p;
}

std::string pct(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
    return buf;
}

double capture_origin(std::span<const Frame> frames, std::span<const DroppedFrame> dropped) {
    double lo = INFINITY;
    for (const auto& f : frames) lo = std::min(lo, f.timestamp);
    for (const auto& d : dropped) lo = std::min(lo, d.timestamp);
    if (!std::isfinite(lo)) return 0.0;
    return std::floor(lo / kSecondsPerDay) * kSecondsPerDay;
}

int num_classes_from(const RunConfig& cfg, std::span<const RfidRecord> rfid) {
    if (cfg.model.num_classes > 0) return cfg.model.num_classes;
    int hi = -1;
    for (const auto& r : rfid) hi = std::max(hi, r.animal_id);
    if (hi < 1) throw InfeasibleConfig("model.num_classes is 0 and the RFID log names fewer than two animals");
    return hi + 1;
}

std::vector<RfidRecord> load_rfid(const RunConfig& cfg, const char* stage) {
    require_path(cfg.dataset, "paths.dataset", stage, "dataset");
    const fs::path p = cfg.dataset / "rfid.csv";
    if (!fs::exists(p)) throw StageError(stage, "RFID log not found: " + p.string());
    return in_stage(stage, [&] { return read_rfid_csv(p); });
}

// Reads the raw dataset manifest in chunks and preprocesses each chunk.
template <typename OnChunk>
std::size_t preprocess_dataset(const RunConfig& cfg, OnChunk&& on_chunk) {
    const fs::path root = require_path(cfg.dataset, "paths.dataset", "preprocess", "dataset");
    const auto entries = in_stage("preprocess", [&] { return read_manifest(root / "manifest.jsonl"); });
    for (std::size_t start = 0; start < entries.size(); start += kChunk) {
        const std::size_t end = std::min(entries.size(), start + kChunk);
        std::vector<Frame> raw(end - start);
        in_stage("preprocess", [&] {
            parallel_for(raw.size(), cfg.threads, [&](std::size_t i) {
                const auto& e = entries[start + i];
                const fs::path p = fs::path(e.cloud_path).is_absolute() ? fs::path(e.cloud_path) : root / e.cloud_path;
                raw[i] = {e.frame_id, e.timestamp, e.station_id, read_cloud(p)};
            });
            return 0;
        });
        on_chunk(in_stage("preprocess", [&] {
            return preprocess_frames(std::move(raw), cfg.preprocess, cfg.preprocess_seed(), cfg.threads);
        }));
    }
    return entries.size();
}

struct LoadedData {
    FrameSet set;
    std::vector<RfidRecord> rfid;
};

LoadedData load_for_experiment(const RunConfig& cfg) {
    LoadedData d;
    if (!cfg.preprocessed.empty()) {
        log("loading preprocessed frames from " + cfg.preprocessed.string());
        d.set = load_preprocessed(cfg.preprocessed);
        d.rfid = load_rfid(cfg, "experiment");
    } else if (!cfg.dataset.empty()) {
        log("preprocessing " + cfg.dataset.string());
        preprocess_dataset(cfg, [&](PreprocessOutcome&& o) {
            for (auto& f : o.frames) d.set.frames.push_back(std::move(f));
            for (auto& x : o.dropped) d.set.dropped.push_back(std::move(x));
        });
        d.rfid = load_rfid(cfg, "experiment");
    } else {
        log("generating the configured scenario in memory");
        const Scenario scen = in_stage("synth", [&] { return generate_scenario(cfg.resolved_scenario()); });
        auto pre = in_stage("preprocess",
                            [&] { return preprocess_scenario(scen, cfg.preprocess, cfg.preprocess_seed(), cfg.threads); });
        d.set.frames = std::move(pre.frames);
        d.set.dropped = std::move(pre.dropped);
        d.rfid = scen.rfid;
    }
    d.set.origin = capture_origin(d.set.frames, d.set.dropped);
    return d;
}

}  // namespace

RunConfig resolve_config(const GlobalOptions& opts) {
    RunConfig cfg = opts.config.empty() ? RunConfig{} : load_run_config(opts.config);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InfeasibleConfig("--set expects key=value, got '" + kv + "'");
        cfg.set(std::string_view(kv).substr(0, eq), std::string_view(kv).substr(eq + 1));
    }
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.deterministic) cfg.threads = 1;
    cfg.validate();
    return cfg;
}

FrameSet load_preprocessed(const fs::path& dir) {
    const fs::path manifest = dir / "manifest.jsonl";
    if (!fs::exists(manifest)) throw StageError("load", "preprocessed manifest not found: " + manifest.string());
    FrameSet s;
    s.frames = in_stage("load", [&] { return load_frames(manifest); });
    const fs::path drops = dir / "drop_log.csv";
    if (fs::exists(drops)) s.dropped = in_stage("load", [&] { return read_drop_log(drops); });
    s.origin = capture_origin(s.frames, s.dropped);
    return s;
}

void cmd_synth(const RunConfig& cfg, const fs::path& out, std::ostream& summary) {
    const Scenario scen = in_stage("synth", [&] { return generate_scenario(cfg.resolved_scenario()); });
    Outputs o(out);
    for (const char* name : {"clouds", "manifest.jsonl", "rfid.csv", "ground_truth.csv"}) o.add(name);
    log("writing " + std::to_string(scen.frames.size()) + " frames to " + out.string());
    in_stage("write", [&] {
        write_scenario(scen, out, cfg.threads);
        return 0;
    });
    o.commit();

    const auto s = scen.summary();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", s.drop_fraction());
    summary << "frames: " << s.frames << "\nvisits: " << s.visits << "\ncontaminated visits: " << s.contaminated_visits
            << "\nclipped frames: " << s.clipped_frames << "\ndrop rate: " << buf << "\n";
}

void cmd_preprocess(const RunConfig& cfg, const fs::path& out, std::ostream& summary) {
    Outputs o(out);
    const fs::path clouds = o.add("clouds");
    const fs::path manifest_path = o.add("manifest.jsonl");
    const fs::path drop_path = o.add("drop_log.csv");
    fs::create_directories(clouds);

    std::vector<ManifestEntry> manifest;
    std::vector<DroppedFrame> dropped;
    const std::size_t total = preprocess_dataset(cfg, [&](PreprocessOutcome&& chunk) {
        in_stage("write", [&] {
            parallel_for(chunk.frames.size(), cfg.threads, [&](std::size_t i) {
                write_cloud(clouds / (chunk.frames[i].frame_id + ".xyz"), chunk.frames[i].cloud);
            });
            return 0;
        });
        for (const auto& f : chunk.frames)
            manifest.push_back({f.frame_id, f.station_id, f.timestamp, "clouds/" + f.frame_id + ".xyz"});
        for (auto& d : chunk.dropped) dropped.push_back(std::move(d));
    });
    in_stage("write", [&] {
        write_manifest(manifest_path, manifest);
        write_drop_log(drop_path, dropped);
        return 0;
    });
    o.commit();

    std::map<std::string, std::size_t> by_stage;
    for (const auto& d : dropped) ++by_stage[std::string(to_string(d.stage))];
    summary << "frames: " << total << "\nkept: " << manifest.size() << "\ndropped: " << dropped.size() << "\n";
    for (const auto& [stage, n] : by_stage) summary << "  at " << stage << ": " << n << "\n";
}

void cmd_train(const RunConfig& cfg, const fs::path& out, std::ostream& summary) {
    require_path(cfg.preprocessed, "paths.preprocessed", "train", "preprocessed data");
    const FrameSet set = load_preprocessed(cfg.preprocessed);
    const auto rfid = load_rfid(cfg, "train");
    const auto days = in_stage("segment", [&] {
        return assemble_days(set.frames, set.dropped, rfid, cfg.gap_threshold, set.origin);
    });
    if (cfg.train_day > static_cast<int>(days.size()))
        throw StageError("train", "schedule.train_day " + std::to_string(cfg.train_day) + " is beyond the " +
                                      std::to_string(days.size()) + " days in the data");
    const auto examples = examples_from(days[static_cast<std::size_t>(cfg.train_day - 1)].visits);
    const ExperimentConfig ec = in_stage("train", [&] { return cfg.experiment_config(num_classes_from(cfg, rfid)); });
    log("training on " + std::to_string(examples.size()) + " frames of day " + std::to_string(cfg.train_day));
    const TrainResult result = in_stage("train", [&] { return train(examples, ec.model, ec.train); });

    Outputs o(out);
    const fs::path ckpt = o.add("checkpoint.bin");
    const fs::path report = o.add("train_report.json");
    in_stage("write", [&] {
        save_checkpoint(ckpt, result.params);
        std::ofstream(report) << to_json(result.report).dump(2) << '\n';
        return 0;
    });
    o.commit();

    summary << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& e : result.report.epochs) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,%.4f,%.4f\n", e.epoch, e.train_loss, e.train_accuracy, e.val_loss,
                      e.val_accuracy);
        summary << buf;
    }
    summary << "best epoch: " << result.report.best_epoch << " (validation accuracy "
            << pct(result.report.best_val_accuracy) << "%)\n";
}

void cmd_infer(const RunConfig& cfg, const fs::path& out, std::ostream& summary) {
    if (cfg.checkpoint.empty() || !fs::exists(cfg.checkpoint))
        throw StageError("infer", "checkpoint not found: " + cfg.checkpoint.string());
    const ModelParams params = in_stage("infer", [&] { return load_checkpoint(cfg.checkpoint); });
    require_path(cfg.preprocessed, "paths.preprocessed", "infer", "preprocessed data");
    const FrameSet set = load_preprocessed(cfg.preprocessed);

    // No RFID here: inference sees only the camera stream.
    std::vector<Visit> visits;
    for (auto& v : in_stage("segment", [&] { return segment_captures(set.frames, set.dropped, cfg.gap_threshold); }))
        if (cfg.infer_day == 0 || day_of(v.start_ts, set.origin) == cfg.infer_day) visits.push_back(std::move(v));
    log("classifying " + std::to_string(visits.size()) + " visits");
    const auto results = in_stage("infer", [&] { return classify_visits(visits, params, cfg.consensus, cfg.threads); });

    Outputs o(out);
    const fs::path report = o.add("consensus.jsonl");
    in_stage("write", [&] {
        write_consensus_report(report, results);
        return 0;
    });
    o.commit();

    std::size_t assigned = 0;
    for (const auto& r : results) assigned += r.assigned ? 1 : 0;
    summary << "visits: " << results.size() << "\nassigned: " << assigned
            << "\nconversion %: " << pct(conversion_rate(results)) << "\n";
}

void cmd_evaluate(const RunConfig& cfg, const fs::path& out, std::ostream& summary) {
    if (cfg.consensus_report.empty() || !fs::exists(cfg.consensus_report))
        throw StageError("evaluate", "consensus report not found: " + cfg.consensus_report.string());
    const auto results = in_stage("evaluate", [&] { return read_consensus_report(cfg.consensus_report); });
    require_path(cfg.preprocessed, "paths.preprocessed", "evaluate", "preprocessed data");
    const FrameSet set = load_preprocessed(cfg.preprocessed);
    const auto rfid = load_rfid(cfg, "evaluate");
    const auto visits = in_stage("segment", [&] {
        return align_ground_truth(segment_captures(set.frames, set.dropped, cfg.gap_threshold), rfid);
    });

    std::unordered_map<std::string, std::optional<int>> label_of;
    for (const auto& v : visits) label_of.emplace(v.visit_id, v.true_label);
    std::vector<std::optional<int>> truth;
    truth.reserve(results.size());
    for (const auto& r : results) {
        const auto it = label_of.find(r.visit_id);
        if (it == label_of.end())
            throw StageError("evaluate", "visit " + r.visit_id + " of the consensus report is not in the dataset");
        truth.push_back(it->second);
    }
    const MetricsReport m = evaluate_metrics(results, truth);

    Outputs o(out);
    const fs::path path = o.add("metrics.json");
    in_stage("write", [&] {
        std::ofstream(path) << to_json(m).dump(2) << '\n';
        return 0;
    });
    o.commit();

    summary << "Frame %,Visit %,Conv. %\n"
            << pct(m.frame_accuracy) << "," << pct(m.visit_accuracy) << "," << pct(m.conversion) << "\n";
}

void cmd_experiment(const RunConfig& cfg, const fs::path& out, std::ostream& summary) {
    const LoadedData data = load_for_experiment(cfg);
    const auto days = in_stage("segment", [&] {
        return assemble_days(data.set.frames, data.set.dropped, data.rfid, cfg.gap_threshold, data.set.origin);
    });
    log("running the re-calibration protocol over " + std::to_string(days.size()) + " days");
    const ExperimentResult result = in_stage("experiment", [&] {
        return run_experiment(days, cfg.schedule(static_cast<int>(days.size())),
                              cfg.experiment_config(num_classes_from(cfg, data.rfid)));
    });

    const std::string csv = to_csv(result.report);
    Outputs o(out);
    const fs::path csv_path = o.add("experiment.csv");
    const fs::path json_path = o.add("experiment.json");
    in_stage("write", [&] {
        std::ofstream(csv_path) << csv;
        std::ofstream(json_path) << to_json(result.report).dump(2) << '\n';
        return 0;
    });
    o.commit();

    summary << csv;
    for (const auto& r : result.report.rounds)
        summary << "round " << r.round << ": harvested " << r.harvested_visits << " visits from day " << r.source_day
                << ", pool " << r.pool_visits << " visits / " << r.pool_frames << " frames\n";
}

}  // namespace tara::cli
