#pragma once

// Stage orchestration shared by the `mxg` CLI and the acceptance runner.
// Every stage reads its inputs from, and writes its artifacts into, the
// configured output directory.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mxg::pipeline {

using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> s = {"synth", "ingest", "momentum", "xg", "lstm", "formation", "sequences", "causal"};
    return s;
}

/// Every key with its default value. Stage seeds are null until resolved.
Json default_config();

/// Applies one "section.key=value" override. The value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_set(Json& config, const std::string& assignment);

/// defaults <- file <- overrides, then seeds resolved and everything
/// validated. Throws ConfigError on unknown keys or bad values.
Json resolve_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& sets);

/// Same as resolve_config, starting from an in-memory document.
Json resolve_config_json(const Json& user, const std::vector<std::string>& sets = {});

/// Checks a resolved config; throws ConfigError.
void validate_config(const Json& config);

struct StageOptions {
    bool score_only = false;               ///< momentum: score with a fixed model, no fit
    std::optional<std::string> model_path;  ///< momentum: model file for score_only
};

/// Runs one stage (or "pipeline" for all of them in order).
void run(const std::string& stage, const Json& config, const StageOptions& opt = {});

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Artifact file names written by each stage.
const std::vector<std::string>& stage_artifacts(const std::string& stage);

}  // namespace mxg::pipeline
