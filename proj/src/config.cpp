#include "tara/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "tara/error.hpp"
#include "tara/io.hpp"
#include "tara/rng.hpp"

namespace tara {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw InfeasibleConfig(std::string(key) + ": invalid value '" + std::string(value) + "' (expected " +
                           std::string(expected) + ")");
}

template <typename T>
T parse_num(std::string_view key, std::string_view v, std::string_view expected) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, expected);
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "true or false");
}

std::vector<int> parse_int_list(std::string_view key, std::string_view v) {
    std::vector<int> out;
    if (trim(v).empty()) return out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
        out.push_back(parse_num<int>(key, item, "comma-separated integers"));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string list_str(const std::vector<int>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? ", " : "") + std::to_string(w[i]);
    return s;
}

OptimizerKind parse_optimizer(std::string_view key, std::string_view v) {
    if (v == "adam") return OptimizerKind::adam;
    if (v == "sgd") return OptimizerKind::sgd;
    bad_value(key, v, "adam or sgd");
}

std::string_view optimizer_str(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

struct Field {
    std::string key;
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number(std::string key, T RunConfig::*member) {
    return {key, [member](RunConfig& c, std::string_view k, std::string_view v) { c.*member = parse_num<T>(k, v, "a number"); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>)
                    return format_double(c.*member);
                else
                    return std::to_string(c.*member);
            }};
}

// Member-of-member accessor: number("train.epochs", &RunConfig::train, &TrainConfig::epochs).
template <typename S, typename T>
Field number(std::string key, S RunConfig::*outer, T S::*inner) {
    return {key,
            [outer, inner](RunConfig& c, std::string_view k, std::string_view v) {
                (c.*outer).*inner = parse_num<T>(k, v, std::is_floating_point_v<T> ? "a number" : "an integer");
            },
            [outer, inner](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>)
                    return format_double((c.*outer).*inner);
                else
                    return std::to_string((c.*outer).*inner);
            }};
}

template <typename S>
Field int_list(std::string key, S RunConfig::*outer, std::vector<int> S::*inner) {
    return {key, [outer, inner](RunConfig& c, std::string_view k, std::string_view v) { (c.*outer).*inner = parse_int_list(k, v); },
            [outer, inner](const RunConfig& c) { return list_str((c.*outer).*inner); }};
}

Field path_field(std::string key, std::filesystem::path RunConfig::*member) {
    return {key, [member](RunConfig& c, std::string_view, std::string_view v) { c.*member = std::string(v); },
            [member](const RunConfig& c) { return (c.*member).string(); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        using R = RunConfig;
        std::vector<Field> f;
        f.push_back(number("seed", &R::seed));
        f.push_back(number("threads", &R::threads));

        f.push_back(path_field("paths.dataset", &R::dataset));
        f.push_back(path_field("paths.preprocessed", &R::preprocessed));
        f.push_back(path_field("paths.checkpoint", &R::checkpoint));
        f.push_back(path_field("paths.consensus", &R::consensus_report));

        f.push_back(number("preprocess.voxel_size", &R::preprocess, &PreprocessConfig::voxel_size));
        f.push_back(number("preprocess.roi_min", &R::preprocess, &PreprocessConfig::roi_min));
        f.push_back(number("preprocess.roi_max", &R::preprocess, &PreprocessConfig::roi_max));
        f.push_back(number("preprocess.component_radius", &R::preprocess, &PreprocessConfig::component_radius));
        f.push_back(number("preprocess.target_points", &R::preprocess, &PreprocessConfig::target_points));

        using S = ScenarioConfig;
        f.push_back(number("scenario.individuals", &R::scenario, &S::individuals));
        f.push_back(number("scenario.days", &R::scenario, &S::days));
        f.push_back(number("scenario.visits_per_individual_per_day", &R::scenario, &S::visits_per_individual_per_day));
        f.push_back(number("scenario.min_frames_per_visit", &R::scenario, &S::min_frames_per_visit));
        f.push_back(number("scenario.max_frames_per_visit", &R::scenario, &S::max_frames_per_visit));
        f.push_back(number("scenario.stations", &R::scenario, &S::stations));
        f.push_back(number("scenario.frame_interval", &R::scenario, &S::frame_interval));
        f.push_back(number("scenario.min_visit_gap", &R::scenario, &S::min_visit_gap));
        f.push_back(number("scenario.max_visit_gap", &R::scenario, &S::max_visit_gap));
        f.push_back(number("scenario.points_per_frame", &R::scenario, &S::points_per_frame));
        f.push_back(number("scenario.noise_sigma", &R::scenario, &S::noise_sigma));
        f.push_back(number("scenario.drop_probability", &R::scenario, &S::drop_probability));
        f.push_back(number("scenario.contamination_probability", &R::scenario, &S::contamination_probability));
        f.push_back(number("scenario.contamination_min_fraction", &R::scenario, &S::contamination_min_fraction));
        f.push_back(number("scenario.contamination_max_fraction", &R::scenario, &S::contamination_max_fraction));
        f.push_back(number("scenario.growth_rate", &R::scenario, &S::growth_rate));
        f.push_back(number("scenario.bump_growth", &R::scenario, &S::bump_growth));
        f.push_back(number("scenario.growth_spread", &R::scenario, &S::growth_spread));
        f.push_back(number("scenario.phase_jitter", &R::scenario, &S::phase_jitter));
        f.push_back(number("scenario.pose_jitter", &R::scenario, &S::pose_jitter));
        f.push_back(number("scenario.yaw_jitter", &R::scenario, &S::yaw_jitter));

        f.push_back(number("model.num_classes", &R::model, &ModelConfig::num_classes));
        f.push_back(int_list("model.point_widths", &R::model, &ModelConfig::point_widths));
        f.push_back(int_list("model.head_widths", &R::model, &ModelConfig::head_widths));
        f.push_back({"model.input_transform",
                     [](R& c, std::string_view k, std::string_view v) { c.model.input_transform = parse_bool(k, v); },
                     [](const R& c) { return std::string(c.model.input_transform ? "true" : "false"); }});
        f.push_back(int_list("model.transform_point_widths", &R::model, &ModelConfig::transform_point_widths));
        f.push_back(int_list("model.transform_head_widths", &R::model, &ModelConfig::transform_head_widths));

        for (auto [prefix, member] : {std::pair{"train.", &R::train}, std::pair{"fine_tune.", &R::fine_tune}}) {
            const std::string p = prefix;
            f.push_back(number(p + "epochs", member, &TrainConfig::epochs));
            f.push_back(number(p + "batch_size", member, &TrainConfig::batch_size));
            f.push_back(number(p + "learning_rate", member, &TrainConfig::learning_rate));
            f.push_back({p + "optimizer",
                         [member](R& c, std::string_view k, std::string_view v) { (c.*member).optimizer = parse_optimizer(k, v); },
                         [member](const R& c) { return std::string(optimizer_str((c.*member).optimizer)); }});
            f.push_back({p + "cosine_decay",
                         [member](R& c, std::string_view k, std::string_view v) { (c.*member).cosine_decay = parse_bool(k, v); },
                         [member](const R& c) { return std::string((c.*member).cosine_decay ? "true" : "false"); }});
        }
        f.push_back(number("train.reg_weight", &R::train, &TrainConfig::reg_weight));
        f.push_back(number("train.validation_fraction", &R::train, &TrainConfig::validation_fraction));
        f.push_back(number("fine_tune.replay_ratio", &R::fine_tune, &TrainConfig::replay_ratio));

        f.push_back(number("consensus.tau", &R::consensus, &ConsensusConfig::tau));
        f.push_back(number("consensus.min_frames", &R::consensus, &ConsensusConfig::min_frames));
        f.push_back(number("consensus.gamma", &R::consensus, &ConsensusConfig::gamma));
        f.push_back({"consensus.harvest",
                     [](R& c, std::string_view k, std::string_view v) {
                         if (v == "all_frames")
                             c.harvest = HarvestMode::all_frames;
                         else if (v == "confident_frames")
                             c.harvest = HarvestMode::confident_frames;
                         else
                             bad_value(k, v, "all_frames or confident_frames");
                     },
                     [](const R& c) {
                         return std::string(c.harvest == HarvestMode::all_frames ? "all_frames" : "confident_frames");
                     }});

        f.push_back(number("stream.gap_threshold", &R::gap_threshold));

        f.push_back(number("schedule.train_day", &R::train_day));
        f.push_back({"schedule.base_eval_days",
                     [](R& c, std::string_view k, std::string_view v) { c.base_eval_days = parse_int_list(k, v); },
                     [](const R& c) { return list_str(c.base_eval_days); }});
        f.push_back({"schedule.round_source_days",
                     [](R& c, std::string_view k, std::string_view v) { c.round_source_days = parse_int_list(k, v); },
                     [](const R& c) { return list_str(c.round_source_days); }});
        f.push_back(number("schedule.eval_window", &R::eval_window));
        f.push_back(number("infer.day", &R::infer_day));
        return f;
    }();
    return table;
}

}  // namespace

RunConfig::RunConfig() {
    model.num_classes = 0;
    train.epochs = 40;
    train.batch_size = 8;
    fine_tune.batch_size = 8;
    fine_tune.epochs = 10;
    fine_tune.learning_rate = 1e-3;
}

void RunConfig::set(std::string_view key, std::string_view value) {
    key = trim(key);
    value = trim(value);
    for (const auto& f : fields())
        if (f.key == key) {
            f.set(*this, key, value);
            return;
        }
    throw InfeasibleConfig("unknown config key '" + std::string(key) + "'");
}

void RunConfig::validate() const {
    preprocess.validate();
    scenario.validate();
    resolved_model(2).validate();
    if (model.num_classes < 0 || model.num_classes == 1)
        throw InfeasibleConfig("model.num_classes must be 0 (from data) or >= 2");
    train.validate();
    fine_tune.validate();
    consensus.validate();
    if (!(gap_threshold > 0.0)) throw InfeasibleConfig("stream.gap_threshold must be > 0");
    if (train_day < 1) throw InfeasibleConfig("schedule.train_day must be >= 1");
    if (eval_window < 1) throw InfeasibleConfig("schedule.eval_window must be >= 1");
    if (infer_day < 0) throw InfeasibleConfig("infer.day must be >= 0");
}

std::uint64_t RunConfig::preprocess_seed() const { return derive_seed(seed, {1}); }

ScenarioConfig RunConfig::resolved_scenario() const {
    ScenarioConfig s = scenario;
    s.seed = scenario_seed();
    return s;
}

ModelConfig RunConfig::resolved_model(int num_classes_from_data) const {
    ModelConfig m = model;
    if (m.num_classes == 0) m.num_classes = num_classes_from_data;
    m.num_points = preprocess.target_points;
    return m;
}

TrainConfig RunConfig::resolved_train() const {
    TrainConfig t = train;
    t.seed = derive_seed(seed, {2});
    t.threads = threads;
    return t;
}

TrainConfig RunConfig::resolved_fine_tune() const {
    TrainConfig t = fine_tune;
    t.seed = derive_seed(seed, {3});
    t.reg_weight = train.reg_weight;
    t.validation_fraction = train.validation_fraction;
    t.threads = threads;
    return t;
}

ExperimentConfig RunConfig::experiment_config(int num_classes_from_data) const {
    ExperimentConfig e;
    e.model = resolved_model(num_classes_from_data);
    e.train = resolved_train();
    e.fine_tune = resolved_fine_tune();
    e.consensus = consensus;
    e.harvest = harvest;
    e.threads = threads;
    return e;
}

RecalibrationSchedule RunConfig::schedule(int num_days) const {
    RecalibrationSchedule s;
    s.train_day = train_day;
    if (base_eval_days.empty()) {
        for (int d = train_day + 1; d <= std::min(train_day + eval_window, num_days); ++d) s.base_eval_days.push_back(d);
    } else {
        s.base_eval_days = base_eval_days;
    }
    std::vector<int> sources = round_source_days;
    if (sources.empty())
        for (int d = train_day + 1; d < num_days; ++d) sources.push_back(d);
    for (int src : sources) {
        RecalibrationRound r;
        r.source_day = src;
        for (int d = src + 1; d <= std::min(src + eval_window, num_days); ++d) r.eval_days.push_back(d);
        s.rounds.push_back(r);
    }
    return s;
}

std::string RunConfig::dump() const {
    std::string s;
    for (const auto& f : fields()) s += f.key + " = " + f.get(*this) + "\n";
    return s;
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
}

RunConfig parse_run_config(std::string_view text, std::string_view origin) {
    RunConfig cfg;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw InfeasibleConfig(std::string(origin) + ":" + std::to_string(lineno) + ": expected 'key = value'");
        try {
            cfg.set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const InfeasibleConfig& e) {
            throw InfeasibleConfig(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InfeasibleConfig("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

}  // namespace tara
