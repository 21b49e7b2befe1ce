#pragma once

// The `tara` command implementations, callable without the argument parser.
// Each command reads a RunConfig plus its input artifacts and writes only
// into `out`. Human-readable summaries go to `summary`, progress to stderr.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tara/config.hpp"
#include "tara/error.hpp"
#include "tara/pipeline.hpp"

namespace tara::cli {

/// Failure inside one pipeline stage; the CLI prints "error [stage]: ...".
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error(message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct GlobalOptions {
    std::filesystem::path config;  ///< empty = built-in defaults
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "out";
    bool deterministic = false;
    std::vector<std::string> overrides;  ///< "key=value", applied after the file
};

/// File, then --set overrides, then --seed and --deterministic. Validated.
RunConfig resolve_config(const GlobalOptions& opts);

/// Preprocessed frames plus the capture timeline needed for segmentation.
struct FrameSet {
    std::vector<Frame> frames;
    std::vector<DroppedFrame> dropped;
    double origin = 0.0;  ///< midnight before the first capture
};

FrameSet load_preprocessed(const std::filesystem::path& dir);

void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& summary);
void cmd_preprocess(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& summary);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& summary);
void cmd_infer(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& summary);
void cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& summary);
void cmd_experiment(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& summary);

}  // namespace tara::cli
