#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace skillguard {

// Stage-scoped exit codes.
enum class ExitCode : int {
    ok = 0,
    config = 1,
    ingest = 2,
    analysis = 3,
    scan = 4,  // also the questionnaire/flag step
    context = 5,
    stats = 6,
    hijack = 7,
};

struct StageError : std::runtime_error {
    StageError(ExitCode code, const std::string& msg) : std::runtime_error(msg), code(code) {}
    ExitCode code;
};

struct MalformedInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    std::filesystem::path config_path;  // where the config was loaded from

    std::filesystem::path store_dir;
    std::filesystem::path out_dir;

    // ingest
    std::filesystem::path index_file;
    std::string fetcher = "git";  // "local:DIR" | "git" | "git:BASE_URL"
    int timeout_secs = 120;
    std::uint64_t max_bytes = 200ull * 1024 * 1024;
    int workers = 1;

    // analyze
    std::filesystem::path psl_file;
    std::filesystem::path geo_file;
    std::filesystem::path trackers_file;
    std::filesystem::path detectors_file;
    std::string secrets_mode = "offline";  // offline | validate

    // scan
    std::filesystem::path rules_file;

    // features
    std::string backend = "heuristic";  // heuristic | remote
    std::string endpoint;

    // context
    std::filesystem::path repos_dir;
    std::string context_backend = "heuristic";
    std::string context_endpoint;
    std::int64_t now_timestamp = 0;  // metadata reference time; 0 = wall clock

    // agree
    std::filesystem::path flags_dir;    // extra external FlagSet files, optional
    std::string universe = "common";    // "common" | path to a digest list

    // hijack
    std::filesystem::path hijack_index;  // defaults to index_file
    std::string forge = "";              // "replay:FILE" | "live:BASE_URL"
    std::optional<std::int64_t> retirement_threshold;

    // determinism: pins catalog timestamps when nonzero
    std::int64_t fixed_timestamp = 0;
};

PipelineConfig load_config(const std::filesystem::path& path);  // throws StageError(config)

// Individual stages; each writes its JSONL outputs plus a RunManifest sidecar
// (<output>.manifest.json). Throws StageError.
void stage_ingest(const PipelineConfig& cfg);
void stage_analyze(const PipelineConfig& cfg);
void stage_scan(const PipelineConfig& cfg);
void stage_features(const PipelineConfig& cfg);  // questionnaire + flag rule
void stage_context(const PipelineConfig& cfg);
void stage_agree(const PipelineConfig& cfg);
void stage_hijack(const PipelineConfig& cfg);

struct RenderedReport {
    std::string text;  // human-readable table
    std::string json;  // machine summary
};

// Aggregates the stage outputs under out_dir. Missing optional stage files
// drop their section; digests that appear downstream without a scan record
// raise MalformedInput.
RenderedReport render_report(const std::filesystem::path& out_dir);
void stage_report(const PipelineConfig& cfg);

// Runs every stage in order; returns the exit code of the first failing
// stage, 0 when everything passes.
int run_pipeline(const PipelineConfig& cfg);

}  // namespace skillguard
