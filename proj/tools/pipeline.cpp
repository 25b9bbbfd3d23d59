#include "pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "mxg/causal.hpp"
#include "mxg/formation.hpp"
#include "mxg/gbdt.hpp"
#include "mxg/ingest.hpp"
#include "mxg/lstm.hpp"
#include "mxg/metrics.hpp"
#include "mxg/momentum.hpp"
#include "mxg/sequences.hpp"
#include "mxg/synth.hpp"

namespace fs = std::filesystem;

namespace mxg::pipeline {

// ---------------------------------------------------------------- hashing

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) {
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return os.str();
}

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + p.string() + "'");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + p.string() + "'");
    }
    out << text;
}

void write_json(const fs::path& p, const Json& j) { write_file(p, j.dump(2) + "\n"); }

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

// ---------------------------------------------------------------- config

Json default_config() {
    Json c;
    c["seed"] = 7;
    c["threads"] = 1;
    c["output_dir"] = "mxg_out";
    c["input"] = {{"events", ""}, {"format", "csv"}};
    SynthConfig s;
    c["synth"] = {{"seed", nullptr},
                  {"n_games", s.n_games},
                  {"segments_per_game", s.segments_per_game},
                  {"events_per_game", s.events_per_game},
                  {"base_goal_rate", s.base_goal_rate},
                  {"betas", "reference"},
                  {"pattern_rate", s.pattern_rate},
                  {"pattern_odds", s.pattern_odds},
                  {"compact_fraction", s.compact_fraction},
                  {"compact_odds", s.compact_odds},
                  {"planted_ate", s.planted_ate},
                  {"confounding_strength", s.confounding_strength},
                  {"format", "csv"}};
    c["windows"] = {{"window_s", 30.0}, {"stride_s", 10.0}, {"vif_threshold", 5.0}};
    c["momentum"] = {{"l2", 1e-6}, {"max_iterations", 100}};
    GbdtConfig g;
    c["xg"] = {{"seed", nullptr},
               {"max_depth", g.max_depth},
               {"n_rounds", g.n_rounds},
               {"learning_rate", g.learning_rate},
               {"row_subsample", g.row_subsample},
               {"class_weighting", "inverse_frequency"},
               {"early_stop_rounds", g.early_stop_rounds},
               {"min_leaf_weight", g.min_leaf_weight},
               {"l2_leaf", g.l2_leaf},
               {"split", {0.70, 0.15, 0.15}},
               {"sweep", false},
               {"sweep_max_depth", {3, 4, 6}},
               {"sweep_learning_rate", {0.05, 0.1}},
               {"sweep_n_rounds", {100, 200}}};
    LstmConfig l;
    c["lstm"] = {{"seed", nullptr},
                 {"embed_dim", l.embed_dim},
                 {"hidden_units", l.hidden_units},
                 {"dropout", l.dropout},
                 {"max_seq_len", l.max_seq_len},
                 {"batch_size", l.batch_size},
                 {"learning_rate", l.learning_rate},
                 {"early_stop_epochs", l.early_stop_epochs},
                 {"max_epochs", l.max_epochs},
                 {"split", {0.80, 0.20}}};
    c["formation"] = {{"seed", nullptr},
                      {"variance_target", 0.85},
                      {"k", 0},
                      {"k_min", 2},
                      {"k_max", 8},
                      {"silhouette_sample", 2000},
                      {"n_init", 4},
                      {"max_iterations", 300},
                      {"deviation_quantile", 0.25}};
    c["sequences"] = {{"top_n", 10}, {"min_occurrences", 10}};
    c["causal"] = {{"seed", nullptr},
                   {"covariates", "counts"},
                   {"folds", 5},
                   {"n_resamples", 1000},
                   {"level", 0.95},
                   {"max_depth", 3},
                   {"n_rounds", 100},
                   {"learning_rate", 0.1},
                   {"clip_low", 0.01},
                   {"clip_high", 0.99}};
    return c;
}

namespace {

void merge_into(Json& base, const Json& over, const std::string& where) {
    if (!over.is_object()) {
        throw ConfigError("config: expected an object at '" + (where.empty() ? std::string("<root>") : where) + "'");
    }
    for (const auto& [k, v] : over.items()) {
        const std::string path = where.empty() ? k : where + "." + k;
        if (!base.contains(k)) {
            throw ConfigError("config: unknown key '" + path + "'");
        }
        if (base[k].is_object()) {
            merge_into(base[k], v, path);
        } else {
            base[k] = v;
        }
    }
}

}  // namespace

void apply_set(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;
    }
    Json* node = &config;
    std::string path;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        path += (path.empty() ? "" : ".") + part;
        if (!node->is_object() || !node->contains(part)) {
            throw ConfigError("config: unknown key '" + path + "'");
        }
        node = &(*node)[part];
        if (dot == std::string::npos) {
            break;
        }
        pos = dot + 1;
    }
    if (node->is_object()) {
        throw ConfigError("config: '" + key + "' is a section, not a value");
    }
    *node = value;
}

namespace {

template <class T>
T get(const Json& j, const char* section, const char* key) {
    try {
        return j.at(section).at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config: ") + section + "." + key + " has the wrong type");
    }
}

template <class T>
T get_root(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config: ") + key + " has the wrong type");
    }
}

void check_split(const Json& j, const char* section, std::size_t parts) {
    const auto v = get<std::vector<double>>(j, section, "split");
    if (v.size() != parts) {
        throw ConfigError(std::string("config: ") + section + ".split needs " + std::to_string(parts) + " fractions");
    }
    double s = 0.0;
    for (double f : v) {
        if (!(f > 0.0)) {
            throw ConfigError(std::string("config: ") + section + ".split fractions must be > 0");
        }
        s += f;
    }
    if (std::abs(s - 1.0) > 1e-9) {
        throw ConfigError(std::string("config: ") + section + ".split must sum to 1");
    }
}

SynthConfig synth_config(const Json& c) {
    SynthConfig s;
    s.seed = get<std::uint64_t>(c, "synth", "seed");
    s.n_games = get<int>(c, "synth", "n_games");
    s.segments_per_game = get<int>(c, "synth", "segments_per_game");
    s.events_per_game = get<double>(c, "synth", "events_per_game");
    s.base_goal_rate = get<double>(c, "synth", "base_goal_rate");
    const auto betas = get<std::string>(c, "synth", "betas");
    if (betas == "zero") {
        s.planted_betas = SynthConfig::zero_betas();
    } else if (betas != "reference") {
        throw ConfigError("config: synth.betas must be 'reference' or 'zero'");
    }
    s.pattern_rate = get<double>(c, "synth", "pattern_rate");
    s.pattern_odds = get<double>(c, "synth", "pattern_odds");
    s.compact_fraction = get<double>(c, "synth", "compact_fraction");
    s.compact_odds = get<double>(c, "synth", "compact_odds");
    s.planted_ate = get<double>(c, "synth", "planted_ate");
    s.confounding_strength = get<double>(c, "synth", "confounding_strength");
    return s;
}

WindowConfig window_config(const Json& c) {
    WindowConfig w;
    w.window_s = get<double>(c, "windows", "window_s");
    w.stride_s = get<double>(c, "windows", "stride_s");
    return w;
}

GbdtConfig xg_config(const Json& c) {
    GbdtConfig g;
    g.seed = get<std::uint64_t>(c, "xg", "seed");
    g.max_depth = get<int>(c, "xg", "max_depth");
    g.n_rounds = get<int>(c, "xg", "n_rounds");
    g.learning_rate = get<double>(c, "xg", "learning_rate");
    g.row_subsample = get<double>(c, "xg", "row_subsample");
    const auto cw = get<std::string>(c, "xg", "class_weighting");
    if (cw == "none") {
        g.class_weighting = ClassWeighting::none;
    } else if (cw == "inverse_frequency") {
        g.class_weighting = ClassWeighting::inverse_frequency;
    } else {
        throw ConfigError("config: xg.class_weighting must be 'none' or 'inverse_frequency'");
    }
    g.early_stop_rounds = get<int>(c, "xg", "early_stop_rounds");
    g.min_leaf_weight = get<double>(c, "xg", "min_leaf_weight");
    g.l2_leaf = get<double>(c, "xg", "l2_leaf");
    return g;
}

LstmConfig lstm_config(const Json& c) {
    LstmConfig l;
    l.seed = get<std::uint64_t>(c, "lstm", "seed");
    l.embed_dim = get<int>(c, "lstm", "embed_dim");
    l.hidden_units = get<int>(c, "lstm", "hidden_units");
    l.dropout = get<double>(c, "lstm", "dropout");
    l.max_seq_len = get<int>(c, "lstm", "max_seq_len");
    l.batch_size = get<int>(c, "lstm", "batch_size");
    l.learning_rate = get<double>(c, "lstm", "learning_rate");
    l.early_stop_epochs = get<int>(c, "lstm", "early_stop_epochs");
    l.max_epochs = get<int>(c, "lstm", "max_epochs");
    return l;
}

CausalOptions causal_options(const Json& c) {
    CausalOptions o;
    o.xlearner.seed = get<std::uint64_t>(c, "causal", "seed");
    o.xlearner.folds = get<int>(c, "causal", "folds");
    o.xlearner.threads = get_root<unsigned>(c, "threads");
    o.xlearner.base.max_depth = get<int>(c, "causal", "max_depth");
    o.xlearner.base.n_rounds = get<int>(c, "causal", "n_rounds");
    o.xlearner.base.learning_rate = get<double>(c, "causal", "learning_rate");
    o.propensity.clip_low = get<double>(c, "causal", "clip_low");
    o.propensity.clip_high = get<double>(c, "causal", "clip_high");
    o.n_resamples = get<int>(c, "causal", "n_resamples");
    o.level = get<double>(c, "causal", "level");
    return o;
}

}  // namespace

void validate_config(const Json& c) {
    const auto seed = get_root<std::uint64_t>(c, "seed");
    (void)seed;
    if (get_root<int>(c, "threads") < 1) {
        throw ConfigError("config: threads must be >= 1");
    }
    if (get_root<std::string>(c, "output_dir").empty()) {
        throw ConfigError("config: output_dir must not be empty");
    }
    const auto fmt = get<std::string>(c, "input", "format");
    if (fmt != "csv" && fmt != "jsonl") {
        throw ConfigError("config: input.format must be 'csv' or 'jsonl'");
    }
    const auto sfmt = get<std::string>(c, "synth", "format");
    if (sfmt != "csv" && sfmt != "jsonl") {
        throw ConfigError("config: synth.format must be 'csv' or 'jsonl'");
    }
    synth_config(c).validate();
    const auto w = window_config(c);
    if (!(w.window_s > 0.0) || !(w.stride_s > 0.0)) {
        throw ConfigError("config: windows.window_s and windows.stride_s must be > 0");
    }
    if (!(get<double>(c, "windows", "vif_threshold") > 1.0)) {
        throw ConfigError("config: windows.vif_threshold must be > 1");
    }
    if (get<double>(c, "momentum", "l2") < 0.0 || get<int>(c, "momentum", "max_iterations") < 1) {
        throw ConfigError("config: momentum.l2 must be >= 0 and momentum.max_iterations >= 1");
    }
    xg_config(c).validate();
    check_split(c, "xg", 3);
    (void)get<bool>(c, "xg", "sweep");
    for (const char* key : {"sweep_max_depth", "sweep_n_rounds"}) {
        const auto v = get<std::vector<int>>(c, "xg", key);
        if (v.empty() || *std::min_element(v.begin(), v.end()) < 1) {
            throw ConfigError(std::string("config: xg.") + key + " must be a non-empty list of positive integers");
        }
    }
    {
        const auto v = get<std::vector<double>>(c, "xg", "sweep_learning_rate");
        if (v.empty() || std::any_of(v.begin(), v.end(), [](double x) { return !(x > 0.0 && x <= 1.0); })) {
            throw ConfigError("config: xg.sweep_learning_rate must be a non-empty list in (0, 1]");
        }
    }
    lstm_config(c).validate();
    check_split(c, "lstm", 2);
    const double vt = get<double>(c, "formation", "variance_target");
    if (!(vt > 0.0 && vt <= 1.0)) {
        throw ConfigError("config: formation.variance_target must be in (0, 1]");
    }
    const int k = get<int>(c, "formation", "k");
    const int kmin = get<int>(c, "formation", "k_min");
    const int kmax = get<int>(c, "formation", "k_max");
    if (k < 0 || (k == 0 && (kmin < 2 || kmax < kmin))) {
        throw ConfigError("config: formation.k must be >= 1, or 0 with 2 <= k_min <= k_max");
    }
    if (get<int>(c, "formation", "silhouette_sample") < 10 || get<int>(c, "formation", "n_init") < 1 || get<int>(c, "formation", "max_iterations") < 1) {
        throw ConfigError("config: formation.silhouette_sample >= 10, n_init >= 1 and max_iterations >= 1 required");
    }
    const double dq = get<double>(c, "formation", "deviation_quantile");
    if (!(dq > 0.0 && dq <= 1.0)) {
        throw ConfigError("config: formation.deviation_quantile must be in (0, 1]");
    }
    if (get<int>(c, "sequences", "top_n") < 0 || get<int>(c, "sequences", "min_occurrences") < 1) {
        throw ConfigError("config: sequences.top_n >= 0 and sequences.min_occurrences >= 1 required");
    }
    const auto cov = get<std::string>(c, "causal", "covariates");
    if (cov != "counts" && cov != "counts+positions") {
        throw ConfigError("config: causal.covariates must be 'counts' or 'counts+positions'");
    }
    const auto co = causal_options(c);
    if (co.xlearner.folds < 2 || co.n_resamples < 100 || !(co.level > 0.0 && co.level < 1.0)) {
        throw ConfigError("config: causal.folds >= 2, causal.n_resamples >= 100 and causal.level in (0, 1) required");
    }
    if (!(co.propensity.clip_low > 0.0 && co.propensity.clip_low < co.propensity.clip_high && co.propensity.clip_high < 1.0)) {
        throw ConfigError("config: need 0 < causal.clip_low < causal.clip_high < 1");
    }
    GbdtConfig b = co.xlearner.base;
    b.validate();
}

Json resolve_config_json(const Json& user, const std::vector<std::string>& sets) {
    Json c = default_config();
    merge_into(c, user, "");
    for (const auto& s : sets) {
        apply_set(c, s);
    }
    const auto seed = get_root<std::uint64_t>(c, "seed");
    const std::vector<std::pair<const char*, std::uint64_t>> streams = {{"synth", 1}, {"xg", 2}, {"lstm", 3}, {"formation", 4}, {"causal", 5}};
    for (const auto& [section, stream] : streams) {
        if (c[section]["seed"].is_null()) {
            // Kept below 2^53 so the value survives any JSON reader.
            c[section]["seed"] = derive_seed(seed, stream) >> 11;
        }
    }
    validate_config(c);
    return c;
}

Json resolve_config(const std::optional<fs::path>& file, const std::vector<std::string>& sets) {
    Json user = Json::object();
    if (file) {
        const std::string text = [&] {
            try {
                return read_file(*file);
            } catch (const DataError& e) {
                throw ConfigError(e.what());
            }
        }();
        try {
            user = Json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config file '" + file->string() + "' is not valid JSON: " + e.what());
        }
    }
    return resolve_config_json(user, sets);
}

// ---------------------------------------------------------------- artifacts

const std::vector<std::string>& stage_artifacts(const std::string& stage) {
    static const std::map<std::string, std::vector<std::string>> a = {
        {"synth", {"events.csv", "ground_truth.json"}},
        {"ingest", {"windows.jsonl", "vif.json", "ingest_report.json"}},
        {"momentum", {"momentum_model.json", "momentum_scores.csv"}},
        {"xg", {"xg_model.json", "xg_predictions.csv", "xg_report.json"}},
        {"lstm", {"lstm_model.bin", "lstm_model.json", "lstm_history.csv", "lstm_predictions.csv"}},
        {"formation", {"composite_scores.csv", "pca_model.json", "formation_report.json", "formation_assignments.csv", "density_all.csv", "density_optimal.csv"}},
        {"sequences", {"sequences_report.json", "sequences_composite.csv", "sequences_lstm.txt"}},
        {"causal", {"causal_report.json", "propensity_histograms.csv", "ite_histogram.csv"}},
    };
    auto it = a.find(stage);
    if (it == a.end()) {
        throw ConfigError("unknown stage '" + stage + "'");
    }
    return it->second;
}

namespace {

struct Ctx {
    const Json& cfg;
    fs::path out;
    unsigned threads = 1;

    fs::path at(const std::string& name) const { return out / name; }
};

/// Throws DependencyError naming the stage that produces a missing file.
void require(const Ctx& ctx, const std::string& stage, const std::string& file, const std::string& needed_by) {
    if (!fs::exists(ctx.at(file))) {
        throw DependencyError(needed_by + " needs '" + file + "' from the " + stage + " stage; run `mxg " + stage + "` first");
    }
}

std::vector<WindowFeatures> load_windows(const Ctx& ctx, const std::string& who) {
    require(ctx, "ingest", "windows.jsonl", who);
    std::ifstream in(ctx.at("windows.jsonl"));
    std::vector<WindowFeatures> w;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            w.push_back(window_from_json(nlohmann::json::parse(line)));
        }
    }
    return w;
}

/// Reads `column` from a CSV written by this tool, keyed by window_id,
/// in the order of `windows`.
std::vector<double> load_column(const Ctx& ctx, const std::string& stage, const std::string& file, const std::string& column,
                                const std::vector<WindowFeatures>& windows, const std::string& who) {
    require(ctx, stage, file, who);
    std::ifstream in(ctx.at(file));
    std::string line;
    std::getline(in, line);
    const auto header = detail::split_csv_line(line);
    const auto col = static_cast<std::size_t>(std::find(header.begin(), header.end(), column) - header.begin());
    if (col >= header.size() || header.empty() || header[0] != "window_id") {
        throw DataError("'" + file + "' lacks the column '" + column + "'");
    }
    std::unordered_map<std::string, double> by_id;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size()) {
            throw DataError("'" + file + "' has a malformed row");
        }
        by_id[f[0]] = std::stod(f[col]);
    }
    std::vector<double> v;
    v.reserve(windows.size());
    for (const auto& w : windows) {
        auto it = by_id.find(w.window_id);
        if (it == by_id.end()) {
            throw DependencyError("'" + file + "' has no row for window " + w.window_id + "; rerun the " + stage + " stage");
        }
        v.push_back(it->second);
    }
    return v;
}

std::string num(double v) { return format_number(v); }

struct Manifest {
    static void record(const Ctx& ctx, const std::string& stage, double seconds) {
        Json m;
        const auto path = ctx.at("manifest.json");
        if (fs::exists(path)) {
            try {
                m = Json::parse(read_file(path));
            } catch (const nlohmann::json::exception&) {
                m = Json::object();
            }
        }
        Json hashed = ctx.cfg;
        hashed.erase("threads");
        hashed.erase("output_dir");
        m["format"] = "mxg-manifest";
        m["format_version"] = 1;
        m["artifact_schema"] = "artifacts.v1";
        m["config_hash"] = sha256_hex(hashed.dump());
        m["seeds"] = {{"seed", ctx.cfg["seed"]},
                      {"synth", ctx.cfg["synth"]["seed"]},
                      {"xg", ctx.cfg["xg"]["seed"]},
                      {"lstm", ctx.cfg["lstm"]["seed"]},
                      {"formation", ctx.cfg["formation"]["seed"]},
                      {"causal", ctx.cfg["causal"]["seed"]}};
        if (!m.contains("stages")) {
            m["stages"] = Json::object();
        }
        Json arts = Json::object();
        for (const auto& f : stage_artifacts(stage)) {
            if (fs::exists(ctx.at(f))) {
                arts[f] = sha256_file(ctx.at(f));
            }
        }
        m["stages"][stage] = {{"artifacts", arts}};
        // Reorder stages canonically so the file does not depend on run order.
        Json ordered = Json::object();
        for (const auto& s : stage_names()) {
            if (m["stages"].contains(s)) {
                ordered[s] = m["stages"][s];
            }
        }
        m["stages"] = ordered;
        write_json(path, m);

        Json t = Json::object();
        const auto tpath = ctx.at("run_timings.json");
        if (fs::exists(tpath)) {
            try {
                t = Json::parse(read_file(tpath));
            } catch (const nlohmann::json::exception&) {
                t = Json::object();
            }
        }
        t[stage] = {{"seconds", seconds}, {"threads", ctx.threads}};
        write_json(tpath, t);
    }
};

// ---------------------------------------------------------------- stages

void stage_synth(const Ctx& ctx) {
    const auto sc = synth_config(ctx.cfg);
    const auto out = generate(sc);
    std::ostringstream os;
    write_events_csv(os, out.events);
    write_file(ctx.at("events.csv"), os.str());
    write_json(ctx.at("ground_truth.json"), to_json(out.truth));
}

fs::path events_path(const Ctx& ctx) {
    const auto p = get<std::string>(ctx.cfg, "input", "events");
    return p.empty() ? ctx.at("events.csv") : fs::path(p);
}

void stage_ingest(const Ctx& ctx) {
    const auto path = events_path(ctx);
    if (!fs::exists(path)) {
        if (get<std::string>(ctx.cfg, "input", "events").empty()) {
            throw DependencyError("ingest needs events: set input.events or run `mxg synth` first");
        }
        throw DataError("input events file '" + path.string() + "' does not exist");
    }
    const auto fmt = get<std::string>(ctx.cfg, "input", "format") == "jsonl" ? EventFormat::jsonl : EventFormat::csv;
    std::ifstream in(path, std::ios::binary);
    const auto events = parse_events(in, fmt);
    const auto windows = build_windows(events, window_config(ctx.cfg));
    std::string text;
    for (const auto& w : windows) {
        text += to_json(w).dump();
        text += '\n';
    }
    write_file(ctx.at("windows.jsonl"), text);
    const auto vif = vif_diagnostics(windows, get<double>(ctx.cfg, "windows", "vif_threshold"));
    write_json(ctx.at("vif.json"), to_json(vif));
    std::size_t regulation = 0;
    std::size_t goals = 0;
    std::size_t full = 0;
    for (const auto& e : events) {
        regulation += is_regulation(e) ? 1 : 0;
    }
    for (const auto& w : windows) {
        goals += static_cast<std::size_t>(w.goal_label);
        full += w.has_full_positions() ? 1 : 0;
    }
    write_json(ctx.at("ingest_report.json"), Json{{"n_events", events.size()},
                                                  {"n_regulation_events", regulation},
                                                  {"n_windows", windows.size()},
                                                  {"n_positive_windows", goals},
                                                  {"n_full_position_windows", full},
                                                  {"window_s", ctx.cfg["windows"]["window_s"]},
                                                  {"stride_s", ctx.cfg["windows"]["stride_s"]},
                                                  {"vif_any_flagged", vif.any_flagged()},
                                                  {"vif_any_infinite", vif.any_infinite()}});
}

void write_momentum_scores(const Ctx& ctx, const MomentumModel& model, const std::vector<WindowFeatures>& windows) {
    std::string s = "window_id,log_momentum,momentum,goal_prob\n";
    for (const auto& w : windows) {
        s += w.window_id + "," + num(momentum_score(model, w, MomentumScale::log)) + "," + num(momentum_score(model, w)) + "," + num(predict_goal_prob(model, w)) + "\n";
    }
    write_file(ctx.at("momentum_scores.csv"), s);
}

void stage_momentum(const Ctx& ctx, const StageOptions& opt) {
    const auto windows = load_windows(ctx, "momentum");
    MomentumModel model;
    if (opt.score_only) {
        if (!opt.model_path) {
            throw ConfigError("momentum --score-only needs --model <file>");
        }
        model = load_momentum_model(*opt.model_path);
    } else {
        const auto vif = vif_diagnostics(windows);
        if (vif.any_infinite()) {
            throw DataError("momentum: window counts are perfectly collinear (infinite VIF); see vif.json");
        }
        model = fit_logistic(windows, get<double>(ctx.cfg, "momentum", "l2"), get<int>(ctx.cfg, "momentum", "max_iterations"));
    }
    write_json(ctx.at("momentum_model.json"), to_json(model));
    write_momentum_scores(ctx, model, windows);
}

/// Seeded partition of [0, n) into consecutive fractions.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n, const std::vector<double>& fractions, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> parts(fractions.size());
    double cum = 0.0;
    std::size_t lo = 0;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        cum += fractions[k];
        const std::size_t hi = k + 1 == fractions.size() ? n : static_cast<std::size_t>(std::llround(cum * static_cast<double>(n)));
        parts[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(std::max(lo, hi)));
        std::sort(parts[k].begin(), parts[k].end());
        lo = std::max(lo, hi);
    }
    return parts;
}

FeatureMatrix xg_features(const std::vector<WindowFeatures>& windows, const std::vector<double>& momentum) {
    FeatureMatrix f;
    for (EventType e : modeled_events()) {
        f.names.push_back("n_" + std::string(event_name(e)));
    }
    f.names.push_back("momentum");
    for (int r = 0; r < kTrackedRoles; ++r) {
        f.names.push_back("pos_" + std::string(role_name(static_cast<Role>(r))) + "_x");
        f.names.push_back("pos_" + std::string(role_name(static_cast<Role>(r))) + "_y");
    }
    f.data.resize(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(f.names.size()));
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (int j = 0; j < kModeledEventCount; ++j) {
            f.data(r, j) = windows[i].counts[static_cast<std::size_t>(j)];
        }
        f.data(r, kModeledEventCount) = momentum[i];
        for (int k = 0; k < 2 * kTrackedRoles; ++k) {
            const double v = windows[i].positions[static_cast<std::size_t>(k)];
            f.data(r, kModeledEventCount + 1 + k) = std::isfinite(v) ? v : 0.0;
        }
    }
    return f;
}

LabeledMatrix subset(const FeatureMatrix& f, const std::vector<WindowFeatures>& windows, const std::vector<std::size_t>& rows) {
    LabeledMatrix m;
    m.x.names = f.names;
    m.x.data.resize(static_cast<Eigen::Index>(rows.size()), f.cols());
    m.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.x.data.row(static_cast<Eigen::Index>(i)) = f.data.row(static_cast<Eigen::Index>(rows[i]));
        m.y(static_cast<Eigen::Index>(i)) = windows[rows[i]].goal_label;
    }
    return m;
}

Json classifier_json(const GbdtModel& model, const LabeledMatrix& part, const GbdtConfig& cfg, const Eigen::VectorXd& train_y) {
    if (part.x.rows() == 0) {
        return nullptr;
    }
    const auto p = predict_xg(model, part.x);
    std::vector<int> labels(static_cast<std::size_t>(part.y.size()));
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < part.y.size(); ++i) {
        labels[static_cast<std::size_t>(i)] = part.y(i) > 0.5 ? 1 : 0;
        pos += labels[static_cast<std::size_t>(i)];
    }
    if (pos == 0 || pos == labels.size()) {
        return Json{{"n", labels.size()}, {"n_positive", pos}, {"note", "single class; metrics undefined"}};
    }
    // Weighted metrics reuse the training class balance.
    const double wp = detail::class_weight_positive(train_y);
    const double wn = detail::class_weight_negative(train_y);
    std::vector<double> w(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        w[i] = labels[i] ? wp : wn;
    }
    (void)cfg;
    return Json{{"unweighted", to_json(evaluate_classifier(p, labels))}, {"weighted", to_json(evaluate_classifier(p, labels, w))}};
}

void stage_xg(const Ctx& ctx) {
    const auto windows = load_windows(ctx, "xg");
    const auto momentum = load_column(ctx, "momentum", "momentum_scores.csv", "momentum", windows, "xg");
    const auto feats = xg_features(windows, momentum);
    const auto cfg = xg_config(ctx.cfg);
    const auto parts = split_indices(windows.size(), get<std::vector<double>>(ctx.cfg, "xg", "split"), derive_seed(cfg.seed, 0x5917));
    const auto train = subset(feats, windows, parts[0]);
    const auto valid = subset(feats, windows, parts[1]);
    const auto test = subset(feats, windows, parts[2]);
    auto cfg_final = cfg;
    Json sweep = nullptr;
    if (get<bool>(ctx.cfg, "xg", "sweep")) {
        // Grid over depth x learning rate x rounds, scored by best validation log-loss.
        sweep = Json::array();
        double best = std::numeric_limits<double>::infinity();
        for (int d : get<std::vector<int>>(ctx.cfg, "xg", "sweep_max_depth")) {
            for (double lr : get<std::vector<double>>(ctx.cfg, "xg", "sweep_learning_rate")) {
                for (int r : get<std::vector<int>>(ctx.cfg, "xg", "sweep_n_rounds")) {
                    auto trial = cfg;
                    trial.max_depth = d;
                    trial.learning_rate = lr;
                    trial.n_rounds = r;
                    const auto m = fit_gbdt(train, valid, trial);
                    const double vl = m.valid_loss.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                           : m.valid_loss[static_cast<std::size_t>(m.best_round)];
                    sweep.push_back({{"max_depth", d}, {"learning_rate", lr}, {"n_rounds", r}, {"best_round", m.best_round}, {"valid_loss", vl}});
                    if (vl < best) {
                        best = vl;
                        cfg_final = trial;
                    }
                }
            }
        }
    }
    const auto model = fit_gbdt(train, valid, cfg_final);
    write_json(ctx.at("xg_model.json"), to_json(model));
    const auto p = predict_xg(model, feats);
    std::vector<std::string> split_of(windows.size());
    const char* names[] = {"train", "valid", "test"};
    for (int k = 0; k < 3; ++k) {
        for (auto i : parts[static_cast<std::size_t>(k)]) {
            split_of[i] = names[k];
        }
    }
    std::string s = "window_id,xg,split\n";
    for (std::size_t i = 0; i < windows.size(); ++i) {
        s += windows[i].window_id + "," + num(p[i]) + "," + split_of[i] + "\n";
    }
    write_file(ctx.at("xg_predictions.csv"), s);
    write_json(ctx.at("xg_report.json"), Json{{"n_train", parts[0].size()},
                                             {"n_valid", parts[1].size()},
                                             {"n_test", parts[2].size()},
                                             {"best_round", model.best_round},
                                             {"max_depth", cfg_final.max_depth},
                                             {"learning_rate", cfg_final.learning_rate},
                                             {"n_rounds", cfg_final.n_rounds},
                                             {"sweep", sweep},
                                             {"train", classifier_json(model, train, cfg, train.y)},
                                             {"valid", classifier_json(model, valid, cfg, train.y)},
                                             {"test", classifier_json(model, test, cfg, train.y)},
                                             {"reference_auc", 0.85}});
}

SequenceSet sequence_set(const std::vector<WindowFeatures>& windows, const std::vector<std::size_t>& rows, int max_len) {
    SequenceSet s;
    for (auto i : rows) {
        s.sequences.push_back(encode_sequence(model_input_tokens(windows[i].tokens), max_len));
        s.labels.push_back(windows[i].goal_label);
    }
    return s;
}

void stage_lstm(const Ctx& ctx) {
    const auto windows = load_windows(ctx, "lstm");
    const auto cfg = lstm_config(ctx.cfg);
    const auto parts = split_indices(windows.size(), get<std::vector<double>>(ctx.cfg, "lstm", "split"), derive_seed(cfg.seed, 0x5918));
    const auto train = sequence_set(windows, parts[0], cfg.max_seq_len);
    const auto valid = sequence_set(windows, parts[1], cfg.max_seq_len);
    const auto res = train_lstm(train, valid, cfg);
    save_lstm(res.model, ctx.at("lstm_model.bin").string(), ctx.at("lstm_model.json").string());
    std::string h = "epoch,train_loss,valid_loss,train_acc,valid_acc\n";
    for (const auto& e : res.history) {
        h += std::to_string(e.epoch) + "," + num(e.train_loss) + "," + num(e.valid_loss) + "," + num(e.train_acc) + "," + num(e.valid_acc) + "\n";
    }
    write_file(ctx.at("lstm_history.csv"), h);
    std::vector<TokenSequence> all;
    all.reserve(windows.size());
    for (const auto& w : windows) {
        all.push_back(encode_sequence(model_input_tokens(w.tokens), cfg.max_seq_len));
    }
    const auto p = predict_lstm(res.model, all);
    std::string s = "window_id,lstm\n";
    for (std::size_t i = 0; i < windows.size(); ++i) {
        s += windows[i].window_id + "," + num(p[i]) + "\n";
    }
    write_file(ctx.at("lstm_predictions.csv"), s);
}

struct Composite {
    std::vector<double> momentum;
    std::vector<double> xg;
    std::vector<double> lstm;
    std::vector<double> s;
};

Composite load_composite(const Ctx& ctx, const std::vector<WindowFeatures>& windows, const std::string& who) {
    Composite c;
    c.momentum = load_column(ctx, "momentum", "momentum_scores.csv", "momentum", windows, who);
    c.xg = load_column(ctx, "xg", "xg_predictions.csv", "xg", windows, who);
    c.lstm = load_column(ctx, "lstm", "lstm_predictions.csv", "lstm", windows, who);
    c.s.resize(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        c.s[i] = composite_s(c.momentum[i], c.xg[i], c.lstm[i]);
    }
    return c;
}

void stage_formation(const Ctx& ctx) {
    const auto windows = load_windows(ctx, "formation");
    const auto comp = load_composite(ctx, windows, "formation");
    {
        std::string s = "window_id,momentum,xg,lstm,composite_c,composite_s\n";
        for (std::size_t i = 0; i < windows.size(); ++i) {
            s += windows[i].window_id + "," + num(comp.momentum[i]) + "," + num(comp.xg[i]) + "," + num(comp.lstm[i]) + "," +
                 num(composite_c(comp.momentum[i], comp.xg[i])) + "," + num(comp.s[i]) + "\n";
        }
        write_file(ctx.at("composite_scores.csv"), s);
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].has_full_positions()) {
            rows.push_back(i);
        }
    }
    if (rows.size() < 20) {
        throw DataError("formation: only " + std::to_string(rows.size()) + " windows carry all five role positions; need at least 20");
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), kPositionDims);
    std::vector<double> s_rows(rows.size());
    std::vector<double> m_rows(rows.size());
    std::vector<WindowFeatures> analyzed;
    analyzed.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int k = 0; k < kPositionDims; ++k) {
            X(static_cast<Eigen::Index>(r), k) = windows[rows[r]].positions[static_cast<std::size_t>(k)];
        }
        s_rows[r] = comp.s[rows[r]];
        m_rows[r] = comp.momentum[rows[r]];
        analyzed.push_back(windows[rows[r]]);
    }
    const auto seed = get<std::uint64_t>(ctx.cfg, "formation", "seed");
    const auto pca = fit_pca(X, get<double>(ctx.cfg, "formation", "variance_target"));
    write_json(ctx.at("pca_model.json"), to_json(pca));
    const Eigen::MatrixXd E = pca.project_rows(X);
    KMeansOptions ko;
    ko.n_init = get<int>(ctx.cfg, "formation", "n_init");
    ko.max_iterations = get<int>(ctx.cfg, "formation", "max_iterations");
    int k = get<int>(ctx.cfg, "formation", "k");
    Json ksel = nullptr;
    if (k == 0) {
        const auto sel = select_k_by_silhouette(E, get<int>(ctx.cfg, "formation", "k_min"), get<int>(ctx.cfg, "formation", "k_max"), derive_seed(seed, 1),
                                                static_cast<std::size_t>(get<int>(ctx.cfg, "formation", "silhouette_sample")), ko);
        k = sel.k;
        ksel = Json::array();
        for (const auto& [kk, sc] : sel.scores) {
            ksel.push_back({{"k", kk}, {"silhouette", sc}});
        }
    }
    const auto km = kmeans(E, k, derive_seed(seed, 2), ko);
    auto clusters = select_optimal_cluster(make_clusters(pca, km), s_rows);
    const int opt = clusters.optimal_cluster_id;
    std::vector<double> centroid(kPositionDims);
    for (int j = 0; j < kPositionDims; ++j) {
        centroid[static_cast<std::size_t>(j)] = clusters.centroid_positions(opt, j);
    }
    std::vector<double> dev(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        dev[r] = deviation(analyzed[r], centroid);
    }
    const auto low = lowest_percentile_flags(dev, get<double>(ctx.cfg, "formation", "deviation_quantile"));
    std::vector<std::size_t> all_idx(rows.size());
    std::iota(all_idx.begin(), all_idx.end(), 0);
    std::vector<std::size_t> treated_idx;
    std::vector<std::size_t> optimal_idx;
    std::string a = "window_id,cluster,deviation,low_deviation,treated\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const bool in_opt = km.assignments[r] == opt;
        const bool treated = in_opt && low[r];
        if (treated) {
            treated_idx.push_back(r);
        }
        if (in_opt) {
            optimal_idx.push_back(r);
        }
        a += analyzed[r].window_id + "," + std::to_string(km.assignments[r]) + "," + num(dev[r]) + "," + (low[r] ? "1" : "0") + "," + (treated ? "1" : "0") + "\n";
    }
    write_file(ctx.at("formation_assignments.csv"), a);

    const auto all_pts = role_points(analyzed, all_idx);
    const auto opt_pts = role_points(analyzed, treated_idx);
    const double hull_all = convex_hull_area(all_pts);
    const double hull_opt = opt_pts.size() >= 3 ? convex_hull_area(opt_pts) : 0.0;
    std::array<double, kPositionDims> mean_pos{};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int j = 0; j < kPositionDims; ++j) {
            mean_pos[static_cast<std::size_t>(j)] += analyzed[r].positions[static_cast<std::size_t>(j)] / static_cast<double>(rows.size());
        }
    }
    const double poly_opt = convex_hull_area(formation_points(centroid));
    const double poly_mean = convex_hull_area(formation_points(mean_pos));
    const auto defensive = defensive_positions(analyzed, m_rows);

    DensityGrid g_all;
    DensityGrid g_opt;
    for (const auto& p : all_pts) {
        g_all.add(p);
    }
    for (const auto& p : opt_pts) {
        g_opt.add(p);
    }
    write_file(ctx.at("density_all.csv"), g_all.to_csv());
    write_file(ctx.at("density_optimal.csv"), g_opt.to_csv());

    Json defensive_j = Json::object();
    for (int r = 0; r < kTrackedRoles; ++r) {
        defensive_j[std::string(role_name(static_cast<Role>(r)))] = {defensive[static_cast<std::size_t>(2 * r)], defensive[static_cast<std::size_t>(2 * r + 1)]};
    }
    Json rep;
    rep["n_windows"] = windows.size();
    rep["n_analyzed"] = rows.size();
    rep["pca"] = {{"n_components", pca.n_components()}, {"explained_variance_ratio", detail::vec_json(pca.explained_variance_ratio)}};
    rep["k_selection"] = ksel;
    rep["kmeans"] = {{"inertia", km.inertia}, {"iterations", km.iterations}};
    rep["clusters"] = to_json(clusters);
    rep["n_optimal_members"] = optimal_idx.size();
    rep["n_treated"] = treated_idx.size();
    rep["hull"] = {{"all_windows_area", hull_all},
                   {"optimal_flagged_area", hull_opt},
                   {"ratio", hull_all > 0.0 ? Json(hull_opt / hull_all) : Json(nullptr)},
                   {"optimal_centroid_polygon_area", poly_opt},
                   {"mean_formation_polygon_area", poly_mean}};
    rep["defensive_positions"] = defensive_j;
    write_json(ctx.at("formation_report.json"), rep);
}

void stage_sequences(const Ctx& ctx) {
    const auto windows = load_windows(ctx, "sequences");
    const auto comp = load_composite(ctx, windows, "sequences");
    require(ctx, "lstm", "lstm_model.bin", "sequences");
    require(ctx, "lstm", "lstm_model.json", "sequences");
    const auto model = load_lstm(ctx.at("lstm_model.bin").string(), ctx.at("lstm_model.json").string());
    auto chains = extract_chains(windows);
    assign_composite(chains, comp.s);
    const auto top_n = static_cast<std::size_t>(get<int>(ctx.cfg, "sequences", "top_n"));
    const auto min_occ = static_cast<std::size_t>(get<int>(ctx.cfg, "sequences", "min_occurrences"));
    const auto ranked = rank_chains(chains, top_n, min_occ);
    const auto by_lstm = rank_by_lstm(model, chains, top_n, min_occ);
    Json lj = Json::array();
    double mean_l = 0.0;
    for (const auto& c : by_lstm) {
        lj.push_back(to_json(c));
        mean_l += c.lstm_score;
    }
    Json rep;
    rep["n_distinct_patterns"] = chains.size();
    rep["min_occurrences"] = min_occ;
    rep["by_composite"] = to_json(ranked);
    rep["by_lstm"] = lj;
    rep["lstm_top_mean"] = by_lstm.empty() ? Json(nullptr) : Json(mean_l / static_cast<double>(by_lstm.size()));
    write_json(ctx.at("sequences_report.json"), rep);
    write_file(ctx.at("sequences_composite.csv"), chains_csv(ranked.top));
    write_file(ctx.at("sequences_lstm.txt"), format_lstm_report(by_lstm));
}

void stage_causal(const Ctx& ctx) {
    const auto windows = load_windows(ctx, "causal");
    require(ctx, "formation", "formation_assignments.csv", "causal");
    // Treatment exists only for windows analyzed by the formation stage.
    std::ifstream in(ctx.at("formation_assignments.csv"));
    std::string line;
    std::getline(in, line);
    std::unordered_map<std::string, int> t_by_id;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = detail::split_csv_line(line);
        t_by_id[f[0]] = std::stoi(f.back());
    }
    std::vector<WindowFeatures> rows;
    std::vector<int> t;
    for (const auto& w : windows) {
        auto it = t_by_id.find(w.window_id);
        if (it != t_by_id.end()) {
            rows.push_back(w);
            t.push_back(it->second);
        }
    }
    const auto comp = load_composite(ctx, rows, "causal");
    const bool with_pos = get<std::string>(ctx.cfg, "causal", "covariates") == "counts+positions";
    std::vector<std::string> names;
    for (EventType e : modeled_events()) {
        names.push_back("n_" + std::string(event_name(e)));
    }
    if (with_pos) {
        for (int r = 0; r < kTrackedRoles; ++r) {
            names.push_back("pos_" + std::string(role_name(static_cast<Role>(r))) + "_x");
            names.push_back("pos_" + std::string(role_name(static_cast<Role>(r))) + "_y");
        }
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < kModeledEventCount; ++j) {
            X(static_cast<Eigen::Index>(i), j) = rows[i].counts[static_cast<std::size_t>(j)];
        }
        if (with_pos) {
            for (int k = 0; k < kPositionDims; ++k) {
                X(static_cast<Eigen::Index>(i), kModeledEventCount + k) = rows[i].positions[static_cast<std::size_t>(k)];
            }
        }
    }
    auto opt = causal_options(ctx.cfg);
    auto rep = run_causal(X, names, t, comp.s, opt);
    auto j = to_json(rep);
    j["momentum_outcome"] = [&] {
        // Same analysis with M alone as the outcome, reported alongside.
        const auto alt = x_learner_ate(X, t, comp.momentum, estimate_propensity(X, t, opt.propensity).propensity, opt.xlearner);
        return Json{{"ate_cv", alt.ate_cv}, {"ate_full", alt.ate_full}};
    }();
    write_json(ctx.at("causal_report.json"), j);
    write_file(ctx.at("propensity_histograms.csv"), histograms_csv({{"treated", rep.propensity_treated}, {"control", rep.propensity_control}}));
    write_file(ctx.at("ite_histogram.csv"), histograms_csv({{"count", effect_histogram(rep.per_unit_effects)}}));
}

void run_one(const std::string& stage, const Ctx& ctx, const StageOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    if (stage == "synth") {
        stage_synth(ctx);
    } else if (stage == "ingest") {
        stage_ingest(ctx);
    } else if (stage == "momentum") {
        stage_momentum(ctx, opt);
    } else if (stage == "xg") {
        stage_xg(ctx);
    } else if (stage == "lstm") {
        stage_lstm(ctx);
    } else if (stage == "formation") {
        stage_formation(ctx);
    } else if (stage == "sequences") {
        stage_sequences(ctx);
    } else if (stage == "causal") {
        stage_causal(ctx);
    } else {
        throw ConfigError("unknown stage '" + stage + "'");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Manifest::record(ctx, stage, secs);
}

}  // namespace

void run(const std::string& stage, const Json& config, const StageOptions& opt) {
    validate_config(config);
    Ctx ctx{config, fs::path(get_root<std::string>(config, "output_dir")), get_root<unsigned>(config, "threads")};
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) {
        throw DataError("cannot create output directory '" + ctx.out.string() + "': " + ec.message());
    }
    write_json(ctx.at("resolved_config.json"), config);
    if (stage == "pipeline") {
        for (const auto& s : stage_names()) {
            if (s == "synth" && !get<std::string>(config, "input", "events").empty()) {
                continue;  // real input supplied
            }
            run_one(s, ctx, {});
        }
        return;
    }
    run_one(stage, ctx, opt);
}

}  // namespace mxg::pipeline
