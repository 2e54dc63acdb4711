#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "skillguard/pipeline.hpp"
#include "skillguard/version.hpp"

namespace {

using skillguard::PipelineConfig;

// Flags override config-file values: record which flags the user passed and
// apply them after loading the config.
struct CliOverrides {
    std::string config;
    std::string store, out, index, fetcher;
    int timeout_secs = -1;
    long long max_bytes = -1;
    int workers = -1;
    std::string psl, geo, trackers, detectors, secrets_mode;
    std::string rules;
    std::string backend, endpoint;
    std::string repos, context_backend, context_endpoint;
    long long now_timestamp = -1;
    std::string flags_dir, universe;
    std::string hijack_index, forge;
    long long retirement_threshold = -1;
    long long fixed_timestamp = -1;
};

PipelineConfig build_config(const CliOverrides& o) {
    PipelineConfig cfg;
    if (!o.config.empty()) cfg = skillguard::load_config(o.config);
    auto set_path = [](const std::string& v, std::filesystem::path& out) {
        if (!v.empty()) out = v;
    };
    set_path(o.store, cfg.store_dir);
    set_path(o.out, cfg.out_dir);
    set_path(o.index, cfg.index_file);
    if (!o.fetcher.empty()) cfg.fetcher = o.fetcher;
    if (o.timeout_secs >= 0) cfg.timeout_secs = o.timeout_secs;
    if (o.max_bytes >= 0) cfg.max_bytes = static_cast<std::uint64_t>(o.max_bytes);
    if (o.workers >= 0) cfg.workers = o.workers;
    set_path(o.psl, cfg.psl_file);
    set_path(o.geo, cfg.geo_file);
    set_path(o.trackers, cfg.trackers_file);
    set_path(o.detectors, cfg.detectors_file);
    if (!o.secrets_mode.empty()) cfg.secrets_mode = o.secrets_mode;
    set_path(o.rules, cfg.rules_file);
    if (!o.backend.empty()) cfg.backend = o.backend;
    if (!o.endpoint.empty()) cfg.endpoint = o.endpoint;
    set_path(o.repos, cfg.repos_dir);
    if (!o.context_backend.empty()) cfg.context_backend = o.context_backend;
    if (!o.context_endpoint.empty()) cfg.context_endpoint = o.context_endpoint;
    if (o.now_timestamp >= 0) cfg.now_timestamp = o.now_timestamp;
    set_path(o.flags_dir, cfg.flags_dir);
    if (!o.universe.empty()) cfg.universe = o.universe;
    set_path(o.hijack_index, cfg.hijack_index);
    if (!o.forge.empty()) cfg.forge = o.forge;
    if (o.retirement_threshold >= 0) cfg.retirement_threshold = o.retirement_threshold;
    if (o.fixed_timestamp >= 0) cfg.fixed_timestamp = o.fixed_timestamp;
    return cfg;
}

void add_shared(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--config", o.config, "config file (JSON)");
    cmd->add_option("--store", o.store, "content-addressed store directory");
    cmd->add_option("--out", o.out, "output directory for stage files");
}

int run_stage(void (*stage)(const PipelineConfig&), const CliOverrides& o) {
    try {
        PipelineConfig cfg = build_config(o);
        stage(cfg);
        return 0;
    } catch (const skillguard::StageError& e) {
        std::cerr << "skillguard: " << e.what() << "\n";
        return static_cast<int>(e.code);
    } catch (const std::exception& e) {
        std::cerr << "skillguard: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skillguard - repository-aware security scanner for agent skills"};
    app.set_version_flag("--version", std::string(skillguard::kToolVersion));
    app.require_subcommand(1);
    CliOverrides o;

    CLI::App* ingest = app.add_subcommand("ingest", "fetch skills from an index into the store");
    add_shared(ingest, o);
    ingest->add_option("--index", o.index, "index JSONL file");
    ingest->add_option("--fetcher", o.fetcher, "local:DIR | git | git:BASE_URL");
    ingest->add_option("--timeout-secs", o.timeout_secs, "clone timeout (default 120)");
    ingest->add_option("--max-bytes", o.max_bytes, "skill directory byte budget (default 200 MiB)");
    ingest->add_option("--workers", o.workers, "fetch worker count");

    CLI::App* analyze = app.add_subcommand("analyze", "static analysis of stored skills");
    add_shared(analyze, o);
    analyze->add_option("--psl", o.psl, "public suffix snapshot");
    analyze->add_option("--geo", o.geo, "eTLD+1 -> continent table (JSONL)");
    analyze->add_option("--trackers", o.trackers, "tracker eTLD+1 list");
    analyze->add_option("--detectors", o.detectors, "secret detector rules (JSON)");
    analyze->add_option("--secrets-mode", o.secrets_mode, "offline | validate");

    CLI::App* scan = app.add_subcommand("scan", "deterministic rule scanner");
    add_shared(scan, o);
    scan->add_option("--rules", o.rules, "scan rule file (JSON)");

    CLI::App* features = app.add_subcommand("features", "behavioral questionnaire + flag rule");
    add_shared(features, o);
    features->add_option("--backend", o.backend, "heuristic | remote");
    features->add_option("--endpoint", o.endpoint, "remote backend URL");
    features->add_option("--psl", o.psl, "public suffix snapshot for domain counting");

    CLI::App* context = app.add_subcommand("context", "repository-context rescoring of flagged skills");
    add_shared(context, o);
    context->add_option("--repos", o.repos, "repository trees directory");
    context->add_option("--backend", o.context_backend, "heuristic | remote");
    context->add_option("--endpoint", o.context_endpoint, "remote backend URL");
    context->add_option("--now", o.now_timestamp, "metadata reference time (unix seconds)");

    CLI::App* agree = app.add_subcommand("agree", "cross-scanner agreement statistics");
    add_shared(agree, o);
    agree->add_option("--flags", o.flags_dir, "directory of external FlagSet JSONL files");
    agree->add_option("--universe", o.universe, "'common' or a digest list file");

    CLI::App* hijack = app.add_subcommand("hijack", "namespace hijacking audit of index references");
    add_shared(hijack, o);
    hijack->add_option("--index", o.hijack_index, "index JSONL to audit");
    hijack->add_option("--forge", o.forge, "replay:FILE | live[:BASE_URL]");
    hijack->add_option("--retirement-threshold", o.retirement_threshold,
                       "installs at which the forge retires a namespace");

    CLI::App* report = app.add_subcommand("report", "aggregate stage outputs into a summary");
    add_shared(report, o);

    CLI::App* run = app.add_subcommand("run", "run the full pipeline from a config file");
    add_shared(run, o);
    run->add_option("--fetcher", o.fetcher, "local:DIR | git | git:BASE_URL");

    CLI11_PARSE(app, argc, argv);

    if (ingest->parsed()) return run_stage(skillguard::stage_ingest, o);
    if (analyze->parsed()) return run_stage(skillguard::stage_analyze, o);
    if (scan->parsed()) return run_stage(skillguard::stage_scan, o);
    if (features->parsed()) return run_stage(skillguard::stage_features, o);
    if (context->parsed()) return run_stage(skillguard::stage_context, o);
    if (agree->parsed()) return run_stage(skillguard::stage_agree, o);
    if (hijack->parsed()) return run_stage(skillguard::stage_hijack, o);
    if (report->parsed()) return run_stage(skillguard::stage_report, o);
    if (run->parsed()) {
        try {
            return skillguard::run_pipeline(build_config(o));
        } catch (const skillguard::StageError& e) {
            std::cerr << "skillguard: " << e.what() << "\n";
            return static_cast<int>(e.code);
        } catch (const std::exception& e) {
            std::cerr << "skillguard: " << e.what() << "\n";
            return 1;
        }
    }
    return 0;
}
