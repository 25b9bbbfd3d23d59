#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "mxg/common.hpp"
#include "mxg/momentum.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace mxg;
using pipeline::Json;

namespace {

const fs::path kSource = MXG_SOURCE_DIR;

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("mxg_test_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Json small_config(const fs::path& out, int threads = 1) {
    Json u = {{"output_dir", out.string()},
              {"threads", threads},
              {"synth", {{"n_games", 8}}},
              {"xg", {{"n_rounds", 20}}},
              {"lstm", {{"max_epochs", 2}}},
              {"causal", {{"n_resamples", 100}, {"n_rounds", 20}}}};
    return pipeline::resolve_config_json(u);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MXG_BINARY) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool has_type(const Json& v, const std::string& t) {
    if (t == "null") {
        return v.is_null();
    }
    if (t == "integer") {
        return v.is_number_integer();
    }
    if (t == "number") {
        return v.is_number();
    }
    if (t == "string") {
        return v.is_string();
    }
    if (t == "boolean") {
        return v.is_boolean();
    }
    if (t == "array") {
        return v.is_array();
    }
    return t == "object" && v.is_object();
}

bool matches(const Json& v, const Json& spec) {
    if (spec.is_string()) {
        return has_type(v, spec.get<std::string>());
    }
    for (const auto& t : spec) {
        if (has_type(v, t.get<std::string>())) {
            return true;
        }
    }
    return false;
}

void check_required(const Json& doc, const Json& required, const std::string& where) {
    for (const auto& [key, spec] : required.items()) {
        ASSERT_TRUE(doc.contains(key)) << where << " lacks '" << key << "'";
        EXPECT_TRUE(matches(doc[key], spec)) << where << "." << key << " is " << doc[key].type_name();
    }
}

/// Checks one artifact file against its entry in schema/artifacts.v1.json.
void validate_artifact(const fs::path& file, const Json& entry) {
    const auto kind = entry["kind"].get<std::string>();
    const auto name = file.filename().string();
    ASSERT_TRUE(fs::exists(file)) << name;
    if (kind == "json") {
        const auto doc = Json::parse(slurp(file));
        if (entry.contains("required")) {
            check_required(doc, entry["required"], name);
        }
        if (entry.contains("values")) {
            for (const auto& [k, v] : doc.items()) {
                check_required(v, entry["values"], name + "." + k);
            }
        }
    } else if (kind == "jsonl") {
        std::ifstream in(file);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            check_required(Json::parse(line), entry["required"], name);
            ++n;
        }
        EXPECT_GT(n, 0u) << name;
    } else if (kind == "csv") {
        std::ifstream in(file);
        std::string header;
        std::getline(in, header);
        std::string want;
        for (const auto& c : entry["header"]) {
            want += (want.empty() ? "" : ",") + c.get<std::string>();
        }
        EXPECT_EQ(header, want) << name;
        std::string line;
        const auto cols = static_cast<long>(entry["header"].size());
        while (std::getline(in, line)) {
            // pattern strings never contain commas, so a plain count is enough
            ASSERT_EQ(std::count(line.begin(), line.end(), ',') + 1, cols) << name << ": " << line;
        }
    } else if (kind == "text") {
        const std::regex re(entry["line_pattern"].get<std::string>());
        std::ifstream in(file);
        std::string line;
        while (std::getline(in, line)) {
            EXPECT_TRUE(std::regex_match(line, re)) << name << ": " << line;
        }
    } else {
        EXPECT_GT(fs::file_size(file), 0u) << name;
    }
}

class SmallPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = scratch("run1");
        pipeline::run("pipeline", small_config(dir_));
    }
    static fs::path dir_;
};
fs::path SmallPipeline::dir_;

}  // namespace

TEST(PipelineConfig, UnknownKeysAreRejected) {
    EXPECT_THROW(pipeline::resolve_config_json(Json{{"xg", {{"depth", 3}}}}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config_json(Json{{"nonsense", 1}}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config_json(Json::object(), {"lstm.hidden=3"}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config_json(Json::object(), {"lstm"}), ConfigError);
}

TEST(PipelineConfig, InvalidValuesAreRejected) {
    EXPECT_THROW(pipeline::resolve_config_json(Json::object(), {"xg.split=[0.7,0.2,0.2]"}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config_json(Json::object(), {"lstm.split=[1.0]"}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config_json(Json::object(), {"causal.n_resamples=50"}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config_json(Json::object(), {"xg.max_depth=\"deep\""}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config_json(Json::object(), {"synth.base_goal_rate=0"}), ConfigError);
    EXPECT_THROW(pipeline::resolve_config(kSource / "no_such_config.json", {}), ConfigError);
}

TEST(PipelineConfig, SeedsAreExplicitAndOverridesApplyInOrder) {
    const auto c = pipeline::resolve_config_json(Json{{"xg", {{"max_depth", 4}}}}, {"xg.max_depth=5", "lstm.seed=99"});
    EXPECT_EQ(c["xg"]["max_depth"], 5);
    EXPECT_EQ(c["lstm"]["seed"], 99);
    for (const char* s : {"synth", "xg", "lstm", "formation", "causal"}) {
        EXPECT_TRUE(c[s]["seed"].is_number_unsigned()) << s;
    }
    EXPECT_EQ(pipeline::resolve_config_json(Json::object()), pipeline::resolve_config_json(Json::object()));
    EXPECT_NE(pipeline::resolve_config_json(Json::object())["xg"]["seed"], pipeline::resolve_config_json(Json{{"seed", 8}})["xg"]["seed"]);
}

TEST(PipelineStages, CausalBeforeFormationIsADependencyError) {
    const auto dir = scratch("dep");
    const auto cfg = small_config(dir);
    pipeline::run("synth", cfg);
    pipeline::run("ingest", cfg);
    try {
        pipeline::run("causal", cfg);
        FAIL() << "expected DependencyError";
    } catch (const DependencyError& e) {
        EXPECT_NE(std::string(e.what()).find("formation"), std::string::npos) << e.what();
    }
    const auto empty = scratch("dep_empty");
    try {
        pipeline::run("momentum", small_config(empty));
        FAIL() << "expected DependencyError";
    } catch (const DependencyError& e) {
        EXPECT_NE(std::string(e.what()).find("ingest"), std::string::npos) << e.what();
    }
}

TEST(PipelineStages, ScoreOnlyUsesTheGivenModel) {
    const auto dir = scratch("score");
    const auto cfg = small_config(dir);
    pipeline::run("synth", cfg);
    pipeline::run("ingest", cfg);
    pipeline::StageOptions opt;
    opt.score_only = true;
    EXPECT_THROW(pipeline::run("momentum", cfg, opt), ConfigError);
    opt.model_path = (kSource / "fixtures" / "appendix_a.json").string();
    pipeline::run("momentum", cfg, opt);
    const auto written = load_momentum_model((dir / "momentum_model.json").string());
    const auto fixture = load_momentum_model(*opt.model_path);
    EXPECT_EQ(written.intercept, fixture.intercept);
    EXPECT_EQ(written.coefficients, fixture.coefficients);
}

TEST_F(SmallPipeline, EveryArtifactMatchesTheSchema) {
    const auto schema = Json::parse(slurp(kSource / "schema" / "artifacts.v1.json"));
    ASSERT_EQ(schema["version"], 1);
    for (const auto& stage : pipeline::stage_names()) {
        for (const auto& f : pipeline::stage_artifacts(stage)) {
            ASSERT_TRUE(schema["artifacts"].contains(f)) << f << " is undocumented";
            EXPECT_EQ(schema["artifacts"][f]["stage"], stage) << f;
        }
    }
    for (const auto& [name, entry] : schema["artifacts"].items()) {
        SCOPED_TRACE(name);
        validate_artifact(dir_ / name, entry);
    }
}

TEST_F(SmallPipeline, ManifestHashesMatchFiles) {
    const auto m = Json::parse(slurp(dir_ / "manifest.json"));
    EXPECT_EQ(m["artifact_schema"], "artifacts.v1");
    ASSERT_EQ(m["stages"].size(), pipeline::stage_names().size());
    for (const auto& [stage, s] : m["stages"].items()) {
        for (const auto& [file, hash] : s["artifacts"].items()) {
            EXPECT_EQ(hash, pipeline::sha256_file(dir_ / file)) << file;
        }
    }
    const auto resolved = Json::parse(slurp(dir_ / "resolved_config.json"));
    EXPECT_EQ(m["seeds"]["causal"], resolved["causal"]["seed"]);
    const auto timings = Json::parse(slurp(dir_ / "run_timings.json"));
    EXPECT_EQ(timings.size(), pipeline::stage_names().size());
}

TEST_F(SmallPipeline, RerunOnMoreThreadsIsByteIdentical) {
    const auto other = scratch("run2");
    pipeline::run("pipeline", small_config(other, 3));
    EXPECT_EQ(slurp(dir_ / "manifest.json"), slurp(other / "manifest.json"));
    for (const char* f : {"momentum_model.json", "xg_model.json", "lstm_model.bin", "lstm_model.json", "pca_model.json", "causal_report.json"}) {
        EXPECT_EQ(slurp(dir_ / f), slurp(other / f)) << f;
    }
}

TEST(PipelineCli, ExitCodes) {
    const auto dir = scratch("cli");
    const std::string out = " --out " + dir.string();
    EXPECT_EQ(run_cli("synth" + out + " --set synth.n_games=2"), 0);
    EXPECT_EQ(run_cli("synth" + out + " --set synth.bogus=1"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("ingest" + out + " --input " + (dir / "missing.csv").string()), 3);
    EXPECT_EQ(run_cli("causal" + out), 4);
    EXPECT_EQ(run_cli("ingest" + out), 0);
    EXPECT_EQ(run_cli("momentum --score-only" + out), 2);
    EXPECT_EQ(run_cli("momentum --score-only --model " + (kSource / "fixtures" / "appendix_a.json").string() + out), 0);
}
