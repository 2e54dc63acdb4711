#include "skillguard/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "skillguard/context.hpp"
#include "skillguard/features.hpp"
#include "skillguard/hijack.hpp"
#include "skillguard/ingest.hpp"
#include "skillguard/manifest.hpp"
#include "skillguard/rule_scanner.hpp"
#include "skillguard/static_analysis.hpp"
#include "skillguard/stats.hpp"
#include "skillguard/store.hpp"
#include "skillguard/util.hpp"
#include "skillguard/version.hpp"

namespace skillguard {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::int64_t config_now(const PipelineConfig& cfg) {
    return cfg.fixed_timestamp ? cfg.fixed_timestamp : system_clock_now();
}

ClockFn store_clock(const PipelineConfig& cfg) {
    if (cfg.fixed_timestamp) {
        std::int64_t t = cfg.fixed_timestamp;
        return [t] { return t; };
    }
    return system_clock_now;
}

// RunManifest sidecar for a stage output file.
void write_run_manifest(const PipelineConfig& cfg, const std::string& command,
                        const fs::path& output, const std::vector<fs::path>& inputs,
                        std::int64_t started_at, std::int64_t finished_at) {
    json manifest;
    manifest["command"] = command;
    manifest["tool_version"] = kToolVersion;
    manifest["started_at"] = started_at;
    manifest["finished_at"] = finished_at;
    json input_digests = json::object();
    for (const fs::path& p : inputs) {
        if (fs::exists(p) && fs::is_regular_file(p)) {
            input_digests[p.string()] = sha256(read_file(p)).hex();
        }
    }
    manifest["input_digests"] = input_digests;
    json snapshot;
    snapshot["store"] = cfg.store_dir.string();
    snapshot["out"] = cfg.out_dir.string();
    if (!cfg.config_path.empty()) snapshot["config"] = cfg.config_path.string();
    manifest["config_snapshot"] = snapshot;
    write_file(output.string() + ".manifest.json", manifest.dump(2) + "\n");
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> out;
    std::ifstream in(path);
    if (!in) throw MalformedInput("cannot read " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw MalformedInput("bad JSON line in " + path.string());
        out.push_back(std::move(j));
    }
    return out;
}

void write_jsonl(const fs::path& path, const std::vector<json>& records) {
    std::ostringstream ss;
    for (const json& j : records) ss << j.dump() << "\n";
    write_file(path, ss.str());
}

void require_store(const PipelineConfig& cfg, ExitCode stage) {
    if (cfg.store_dir.empty()) throw StageError(stage, "store directory not configured");
}

json endpoint_to_json(const Endpoint& ep) {
    json j{
        {"raw", ep.raw},
        {"kind", std::string(endpoint_kind_name(ep.kind))},
        {"host", ep.host},
        {"continent", std::string(continent_name(ep.continent))},
        {"source_path", ep.source_path},
    };
    if (ep.etld1) j["etld1"] = *ep.etld1;
    else j["etld1"] = nullptr;
    return j;
}

json finding_to_json(const ScanFinding& f) {
    json j{
        {"module", std::string(scan_module_name(f.module))},
        {"rule_id", f.rule_id},
        {"source_path", f.source_path},
        {"severity", std::string(severity_name(f.severity))},
        {"note", f.note},
    };
    if (f.line) j["line"] = *f.line;
    else j["line"] = nullptr;
    return j;
}

}  // namespace

PipelineConfig load_config(const fs::path& path) {
    PipelineConfig cfg;
    cfg.config_path = path;
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw StageError(ExitCode::config, std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw StageError(ExitCode::config, "config: not a JSON object");

    auto get_path = [&](const char* key, fs::path& out) {
        if (j.contains(key) && j[key].is_string()) {
            fs::path p = j[key].get<std::string>();
            // Relative paths resolve against the config file location.
            if (p.is_relative()) p = path.parent_path() / p;
            out = p;
        }
    };
    auto get_string = [&](const char* key, std::string& out) {
        if (j.contains(key) && j[key].is_string()) out = j[key].get<std::string>();
    };
    auto get_int = [&](const char* key, auto& out) {
        if (j.contains(key) && j[key].is_number()) out = j[key].get<std::decay_t<decltype(out)>>();
    };

    get_path("store", cfg.store_dir);
    get_path("out", cfg.out_dir);
    get_path("index", cfg.index_file);
    get_string("fetcher", cfg.fetcher);
    get_int("timeout_secs", cfg.timeout_secs);
    get_int("max_bytes", cfg.max_bytes);
    get_int("workers", cfg.workers);
    get_path("psl", cfg.psl_file);
    get_path("geo", cfg.geo_file);
    get_path("trackers", cfg.trackers_file);
    get_path("detectors", cfg.detectors_file);
    get_string("secrets_mode", cfg.secrets_mode);
    get_path("rules", cfg.rules_file);
    get_string("backend", cfg.backend);
    get_string("endpoint", cfg.endpoint);
    get_path("repos", cfg.repos_dir);
    get_string("context_backend", cfg.context_backend);
    get_string("context_endpoint", cfg.context_endpoint);
    get_int("now_timestamp", cfg.now_timestamp);
    get_path("flags", cfg.flags_dir);
    get_string("universe", cfg.universe);
    get_path("hijack_index", cfg.hijack_index);
    get_string("forge", cfg.forge);
    if (j.contains("retirement_threshold") && j["retirement_threshold"].is_number()) {
        cfg.retirement_threshold = j["retirement_threshold"].get<std::int64_t>();
    }
    get_int("fixed_timestamp", cfg.fixed_timestamp);

    // "fetcher": "local:DIR" with a relative DIR also resolves against the config.
    if (cfg.fetcher.rfind("local:", 0) == 0) {
        fs::path p = cfg.fetcher.substr(6);
        if (p.is_relative()) p = path.parent_path() / p;
        cfg.fetcher = "local:" + p.string();
    }
    if (cfg.forge.rfind("replay:", 0) == 0) {
        fs::path p = cfg.forge.substr(7);
        if (p.is_relative()) p = path.parent_path() / p;
        cfg.forge = "replay:" + p.string();
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// ingest

void stage_ingest(const PipelineConfig& cfg) {
    try {
        if (cfg.index_file.empty()) throw std::runtime_error("ingest: no index file configured");
        std::int64_t started = system_clock_now();
        auto parsed = ingest_index_file(cfg.index_file);

        std::unique_ptr<RepoFetcher> fetcher;
        if (cfg.fetcher.rfind("local:", 0) == 0) {
            fetcher = std::make_unique<LocalFixtureFetcher>(cfg.fetcher.substr(6));
        } else if (cfg.fetcher.rfind("git:", 0) == 0) {
            fetcher = std::make_unique<ShallowGitFetcher>(cfg.fetcher.substr(4));
        } else if (cfg.fetcher == "git") {
            fetcher = std::make_unique<ShallowGitFetcher>();
        } else {
            throw std::runtime_error("ingest: unknown fetcher '" + cfg.fetcher + "'");
        }

        FetchBudget budget;
        budget.clone_timeout = std::chrono::milliseconds(cfg.timeout_secs * 1000LL);
        budget.max_skill_dir_bytes = cfg.max_bytes;

        Store store(cfg.store_dir, store_clock(cfg));
        IngestStats stats = run_ingest(parsed.entries, budget, *fetcher, store, cfg.workers);

        fs::create_directories(cfg.out_dir);
        json summary{
            {"entries", stats.entries},
            {"skipped_index_lines", parsed.skipped},
            {"artifacts_stored", stats.artifacts_stored},
            {"failures", stats.failures},
            {"by_status", stats.by_status},
        };
        fs::path out = cfg.out_dir / "ingest_summary.json";
        write_file(out, summary.dump(2) + "\n");
        write_run_manifest(cfg, "ingest", out, {cfg.index_file}, started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(ExitCode::ingest, e.what());
    }
}

// ---------------------------------------------------------------------------
// analyze

void stage_analyze(const PipelineConfig& cfg) {
    try {
        std::int64_t started = system_clock_now();
        require_store(cfg, ExitCode::analysis);
        Store store(cfg.store_dir, store_clock(cfg));
        if (cfg.psl_file.empty()) throw std::runtime_error("analyze: no public-suffix snapshot configured");
        PublicSuffixList psl = PublicSuffixList::load(cfg.psl_file);
        GeoTable geo;
        if (!cfg.geo_file.empty()) geo = load_geo_table(cfg.geo_file);
        std::set<std::string> trackers;
        if (!cfg.trackers_file.empty()) trackers = load_tracker_list(cfg.trackers_file);
        std::vector<DetectorRule> detectors;
        if (!cfg.detectors_file.empty()) detectors = load_detectors(cfg.detectors_file);
        if (cfg.secrets_mode != "offline") {
            // The validate path needs a caller-supplied validator; the CLI ships
            // none, so it only exposes offline mode.
            throw std::runtime_error("analyze: only offline secrets mode is available from the CLI");
        }

        std::vector<json> records;
        for (const std::string& hex : store.list_digests()) {
            auto artifact = store.get(Digest256::from_hex(hex));
            if (!artifact) continue;
            auto endpoints = extract_endpoints(*artifact);
            annotate_endpoints(endpoints, psl, geo);
            auto tracker_matches = match_trackers(endpoints, trackers);
            auto inventory = script_inventory(*artifact);
            auto secrets = detect_secrets(*artifact, detectors, SecretsMode::offline);

            json j;
            j["digest"] = hex;
            json eps = json::array();
            for (const Endpoint& ep : endpoints) eps.push_back(endpoint_to_json(ep));
            j["endpoints"] = eps;
            json tm = json::array();
            for (const TrackerMatch& m : tracker_matches) {
                tm.push_back(json{{"raw", m.endpoint.raw}, {"tracker", m.tracker_domain}});
            }
            j["tracker_matches"] = tm;
            j["scripts"] = json{
                {"counts_by_suffix", inventory.counts_by_suffix},
                {"has_scripts", inventory.has_scripts},
                {"nonconforming_scripts", inventory.nonconforming_scripts},
            };
            json sf = json::array();
            for (const SecretFinding& s : secrets) {
                sf.push_back(json{{"detector_id", s.detector_id},
                                  {"source_path", s.source_path},
                                  {"line", s.line},
                                  {"redacted_match", s.redacted_match},
                                  {"validation", std::string(secret_validation_name(s.validation))}});
            }
            j["secrets"] = sf;
            records.push_back(std::move(j));
        }
        fs::path out = cfg.out_dir / "analysis.jsonl";
        write_jsonl(out, records);
        write_run_manifest(cfg, "analyze", out,
                           {cfg.psl_file, cfg.geo_file, cfg.trackers_file, cfg.detectors_file},
                           started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(ExitCode::analysis, e.what());
    }
}

// ---------------------------------------------------------------------------
// scan

void stage_scan(const PipelineConfig& cfg) {
    try {
        std::int64_t started = system_clock_now();
        require_store(cfg, ExitCode::scan);
        Store store(cfg.store_dir, store_clock(cfg));
        if (cfg.rules_file.empty()) throw std::runtime_error("scan: no rules file configured");
        auto rules = load_rules(cfg.rules_file);

        std::vector<json> records;
        for (const std::string& hex : store.list_digests()) {
            auto artifact = store.get(Digest256::from_hex(hex));
            if (!artifact) continue;
            ScanReport report = scan(*artifact, rules);
            json j;
            j["digest"] = hex;
            j["overall"] = std::string(overall_name(report.overall));
            json fs_j = json::array();
            for (const ScanFinding& f : report.findings) fs_j.push_back(finding_to_json(f));
            j["findings"] = fs_j;
            records.push_back(std::move(j));
        }
        fs::path out = cfg.out_dir / "scan.jsonl";
        write_jsonl(out, records);
        write_run_manifest(cfg, "scan", out, {cfg.rules_file}, started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(ExitCode::scan, e.what());
    }
}

// ---------------------------------------------------------------------------
// features (+ flag rule + FlagSet outputs)

void stage_features(const PipelineConfig& cfg) {
    try {
        std::int64_t started = system_clock_now();
        require_store(cfg, ExitCode::scan);
        Store store(cfg.store_dir, store_clock(cfg));

        std::optional<PublicSuffixList> psl;
        if (!cfg.psl_file.empty()) psl = PublicSuffixList::load(cfg.psl_file);

        std::unique_ptr<FeatureBackend> backend;
        if (cfg.backend == "heuristic") {
            backend = std::make_unique<HeuristicFeatureBackend>(psl ? &*psl : nullptr);
        } else if (cfg.backend == "remote") {
            if (cfg.endpoint.empty()) throw std::runtime_error("features: remote backend needs an endpoint");
            backend = std::make_unique<RemoteFeatureBackend>(cfg.endpoint);
        } else {
            throw std::runtime_error("features: unknown backend '" + cfg.backend + "'");
        }

        // Scan outcomes drive the combined flag rule.
        std::map<std::string, Overall> scan_overall;
        fs::path scan_path = cfg.out_dir / "scan.jsonl";
        if (fs::exists(scan_path)) {
            for (const json& j : read_jsonl(scan_path)) {
                auto o = overall_from_name(j.value("overall", "NONE"));
                scan_overall[j.value("digest", "")] = o.value_or(Overall::NONE);
            }
        }

        std::vector<json> records;
        std::vector<json> scanner_flags, questionnaire_flags;
        for (const std::string& hex : store.list_digests()) {
            auto artifact = store.get(Digest256::from_hex(hex));
            if (!artifact) continue;
            FeatureVector vector = extract_features(*artifact, *backend);
            RiskAssessment assessment = risk_score(vector);
            assessment.digest = hex;

            bool severity_gate = false;
            auto it = scan_overall.find(hex);
            if (it != scan_overall.end()) {
                severity_gate = it->second == Overall::HIGH || it->second == Overall::CRITICAL;
            }
            bool flagged = severity_gate && assessment.risk > 3;

            json j;
            j["digest"] = hex;
            j["features"] = json::parse(feature_vector_to_json(vector));
            j["risk"] = assessment.risk;
            j["rationale"] = assessment.rationale;
            j["flagged"] = flagged;
            records.push_back(std::move(j));

            scanner_flags.push_back(json{{"scanner_id", "rule-scanner"},
                                         {"digest", hex},
                                         {"flagged", severity_gate}});
            questionnaire_flags.push_back(json{{"scanner_id", "questionnaire"},
                                               {"digest", hex},
                                               {"flagged", assessment.risk > 3}});
        }
        fs::path out = cfg.out_dir / "features.jsonl";
        write_jsonl(out, records);
        write_jsonl(cfg.out_dir / "flags" / "rule-scanner.jsonl", scanner_flags);
        write_jsonl(cfg.out_dir / "flags" / "questionnaire.jsonl", questionnaire_flags);
        write_run_manifest(cfg, "features", out, {scan_path}, started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(ExitCode::scan, e.what());
    }
}

// ---------------------------------------------------------------------------
// context

namespace {

FileTree load_repo_tree(const fs::path& repo_dir) {
    FileTree tree;
    for (const auto& entry : fs::recursive_directory_iterator(repo_dir)) {
        if (!entry.is_regular_file()) continue;
        tree[fs::relative(entry.path(), repo_dir).generic_string()] = read_file(entry.path());
    }
    return tree;
}

RepoMetadata load_repo_metadata(const fs::path& meta_path, const FileTree& tree) {
    RepoMetadata meta;
    std::uint64_t tree_size = 0;
    for (const auto& [_, content] : tree) tree_size += content.size();
    meta.size_bytes = tree_size;
    if (fs::exists(meta_path)) {
        json j = json::parse(read_file(meta_path));
        meta.size_bytes = j.value("size_bytes", tree_size);
        meta.created_at = j.value("created_at", std::int64_t{0});
        meta.last_update = j.value("last_update", std::int64_t{0});
        meta.stars = j.value("stars", 0);
        meta.forks = j.value("forks", 0);
        meta.open_issues = j.value("open_issues", 0);
    }
    return meta;
}

}  // namespace

void stage_context(const PipelineConfig& cfg) {
    try {
        std::int64_t started = system_clock_now();
        require_store(cfg, ExitCode::context);
        Store store(cfg.store_dir, store_clock(cfg));
        if (cfg.repos_dir.empty()) throw std::runtime_error("context: no repos directory configured");
        fs::path features_path = cfg.out_dir / "features.jsonl";
        if (!fs::exists(features_path)) {
            throw std::runtime_error("context: features.jsonl not found; run the features stage first");
        }

        std::unique_ptr<ContextBackend> backend;
        if (cfg.context_backend == "heuristic") {
            backend = std::make_unique<HeuristicContextBackend>();
        } else if (cfg.context_backend == "remote") {
            if (cfg.context_endpoint.empty()) {
                throw std::runtime_error("context: remote backend needs an endpoint");
            }
            backend = std::make_unique<RemoteContextBackend>(cfg.context_endpoint);
        } else {
            throw std::runtime_error("context: unknown backend '" + cfg.context_backend + "'");
        }

        std::set<std::string> flagged;
        for (const json& j : read_jsonl(features_path)) {
            if (j.value("flagged", false)) flagged.insert(j.value("digest", ""));
        }

        // digest -> (repo_id -> subpath) from the ingest catalog.
        std::map<std::string, std::map<std::string, std::string>> repos_of;
        for (const CatalogRecord& rec : store.read_catalog()) {
            if (rec.fetch_status != FetchStatus::ok || rec.digest.empty()) continue;
            repos_of[rec.digest][rec.origin.repo_id()] = rec.origin.subpath;
        }

        std::int64_t now = cfg.now_timestamp ? cfg.now_timestamp : config_now(cfg);
        std::vector<json> repo_records;
        std::vector<json> skill_records;
        for (const std::string& hex : flagged) {
            auto artifact = store.get(Digest256::from_hex(hex));
            if (!artifact) continue;
            auto repo_map = repos_of.find(hex);
            if (repo_map == repos_of.end()) continue;  // no repository context

            std::vector<RepoScore> scores;
            for (const auto& [repo_id, subpath] : repo_map->second) {
                fs::path repo_dir = cfg.repos_dir / repo_id;
                if (!fs::is_directory(repo_dir)) continue;
                FileTree tree = load_repo_tree(repo_dir);
                fs::path meta_path = cfg.repos_dir / (repo_id + ".meta.json");
                RepoMetadata meta = load_repo_metadata(meta_path, tree);

                ContextBundle bundle;
                try {
                    bundle = build_context_bundle(tree, subpath.empty() ? "." : subpath);
                } catch (const MissingSkillFile&) {
                    continue;  // stale reference into this repo
                }
                AlignmentAssessment assessment = backend->assess(*artifact, bundle);
                double cb = codebase_score(assessment);
                double md = metadata_score(meta, now);
                bool suspicious = detect_suspicious(assessment);
                ContextScore score = make_context_score(cb, md, suspicious);
                scores.push_back({repo_id, score});

                json j;
                j["digest"] = hex;
                j["repo"] = repo_id;
                j["codebase"] = score.codebase;
                j["metadata"] = score.metadata;
                j["combined"] = score.combined;
                j["category"] = std::string(category_name(score.category));
                j["suspicious"] = score.suspicious;
                j["assessment"] = json::parse(assessment_to_json(assessment));
                j["bundle"] = json{
                    {"skill_md_lines", bundle.skill_md_lines.size()},
                    {"readme_lines", bundle.readme_lines.size()},
                    {"code_files", bundle.code_files.size()},
                    {"has_readme", bundle.has_readme},
                    {"has_code", bundle.has_code},
                };
                repo_records.push_back(std::move(j));
            }
            if (scores.empty()) continue;
            ContextScore agg = aggregate_cross_repo(scores);
            json j;
            j["digest"] = hex;
            j["codebase"] = agg.codebase;
            j["metadata"] = agg.metadata;
            j["combined"] = agg.combined;
            j["category"] = std::string(category_name(agg.category));
            j["suspicious"] = agg.suspicious;
            j["repos_considered"] = scores.size();
            if (scores.size() >= 2) {
                std::vector<double> cbs;
                for (const RepoScore& rs : scores) cbs.push_back(rs.score.codebase);
                Dispersion d = cross_repo_dispersion(cbs);
                j["dispersion"] =
                    json{{"variance", d.variance}, {"std", d.stddev}, {"range", d.range}};
            }
            skill_records.push_back(std::move(j));
        }
        fs::path out = cfg.out_dir / "context.jsonl";
        write_jsonl(out, repo_records);
        write_jsonl(cfg.out_dir / "context_skills.jsonl", skill_records);
        write_run_manifest(cfg, "context", out, {features_path}, started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(ExitCode::context, e.what());
    }
}

// ---------------------------------------------------------------------------
// agree

void stage_agree(const PipelineConfig& cfg) {
    try {
        std::int64_t started = system_clock_now();
        fs::path internal_flags = cfg.out_dir / "flags";
        std::vector<FlagSet> sets;
        if (fs::is_directory(internal_flags)) {
            for (FlagSet& fs_ : load_flag_sets(internal_flags)) sets.push_back(std::move(fs_));
        }
        if (!cfg.flags_dir.empty() && fs::is_directory(cfg.flags_dir)) {
            for (FlagSet& fs_ : load_flag_sets(cfg.flags_dir)) sets.push_back(std::move(fs_));
        }
        if (sets.empty()) throw std::runtime_error("agree: no flag sets found");

        std::set<std::string> universe;
        if (cfg.universe == "common") {
            universe = common_universe(sets);
        } else {
            for (const std::string& line : split_lines(read_file(cfg.universe))) {
                if (!trim(line).empty()) universe.insert(trim(line));
            }
        }

        OverlapMatrix matrix = conditional_overlap(sets, universe);
        auto histogram = flagged_by_k(sets, universe);

        json scanners = json::array();
        for (const FlagSet& fs_ : sets) scanners.push_back(fs_.scanner_id);
        json m = json::array();
        for (const auto& row : matrix) {
            json r = json::array();
            for (const auto& cell : row) {
                if (cell) r.push_back(*cell);
                else r.push_back(nullptr);
            }
            m.push_back(std::move(r));
        }
        json matrix_out{{"scanners", scanners}, {"matrix", m}, {"universe_size", universe.size()}};
        fs::path out = cfg.out_dir / "agreement_matrix.json";
        write_file(out, matrix_out.dump(2) + "\n");

        json hist = json::object();
        for (const auto& [k, count] : histogram) hist[std::to_string(k)] = count;
        write_file(cfg.out_dir / "flagged_by_k.json", hist.dump(2) + "\n");
        write_run_manifest(cfg, "agree", out, {}, started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(ExitCode::stats, e.what());
    }
}

// ---------------------------------------------------------------------------
// hijack

void stage_hijack(const PipelineConfig& cfg) {
    try {
        std::int64_t started = system_clock_now();
        fs::path index = cfg.hijack_index.empty() ? cfg.index_file : cfg.hijack_index;
        if (index.empty()) throw std::runtime_error("hijack: no index configured");
        auto parsed = ingest_index_file(index);

        std::unique_ptr<ForgeClient> forge;
        if (cfg.forge.rfind("replay:", 0) == 0) {
            forge = std::make_unique<ReplayForgeClient>(ReplayForgeClient::load(cfg.forge.substr(7)));
        } else if (cfg.forge.rfind("live:", 0) == 0) {
            forge = std::make_unique<LiveForgeClient>(cfg.forge.substr(5));
        } else if (cfg.forge == "live") {
            forge = std::make_unique<LiveForgeClient>("https://api.github.com");
        } else {
            throw std::runtime_error("hijack: configure forge as replay:FILE or live[:BASE_URL]");
        }

        AuditReport report = audit_index(parsed.entries, *forge, cfg.retirement_threshold);

        std::vector<json> records;
        for (const AuditEntry& e : report.entries) {
            json j;
            j["owner"] = e.entry.owner;
            j["repository"] = e.entry.repository;
            j["subpath"] = e.entry.subpath;
            if (e.forge_unavailable) {
                j["error"] = "forge_unavailable";
            } else {
                j["state"] = std::string(ref_state_name(e.status->state));
                if (e.status->owner_name_free) j["owner_name_free"] = *e.status->owner_name_free;
                else j["owner_name_free"] = nullptr;
                if (e.status->stars) j["stars"] = *e.status->stars;
                if (e.status->installs) j["installs"] = *e.status->installs;
                j["verdict"] = std::string(verdict_name(e.verdict->verdict));
                j["impact"] = std::string(impact_name(e.verdict->impact));
                j["rationale"] = e.verdict->rationale;
            }
            records.push_back(std::move(j));
        }
        fs::path out = cfg.out_dir / "hijack.jsonl";
        write_jsonl(out, records);

        json summary{
            {"vulnerable_repos", report.summary.vulnerable_repos},
            {"affected_skills", report.summary.affected_skills},
            {"transport_errors", report.summary.transport_errors},
        };
        if (report.summary.installs_median) summary["installs_median"] = *report.summary.installs_median;
        if (report.summary.installs_max) summary["installs_max"] = *report.summary.installs_max;
        write_file(cfg.out_dir / "hijack_summary.json", summary.dump(2) + "\n");
        write_run_manifest(cfg, "hijack", out, {index}, started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(ExitCode::hijack, e.what());
    }
}

// ---------------------------------------------------------------------------
// report

RenderedReport render_report(const fs::path& out_dir) {
    RenderedReport rendered;
    json summary;

    std::set<std::string> scanned_digests;
    fs::path scan_path = out_dir / "scan.jsonl";
    std::size_t scanned = 0, scan_flagged = 0;
    if (fs::exists(scan_path)) {
        for (const json& j : read_jsonl(scan_path)) {
            ++scanned;
            scanned_digests.insert(j.value("digest", ""));
            std::string overall = j.value("overall", "NONE");
            if (overall == "HIGH" || overall == "CRITICAL") ++scan_flagged;
        }
        summary["skills_scanned"] = scanned;
        summary["scanner_high_or_critical"] = scan_flagged;
    }

    std::size_t flagged = 0, features_count = 0;
    fs::path features_path = out_dir / "features.jsonl";
    if (fs::exists(features_path)) {
        for (const json& j : read_jsonl(features_path)) {
            ++features_count;
            std::string digest = j.value("digest", "");
            if (!scanned_digests.empty() && !scanned_digests.count(digest)) {
                throw MalformedInput("features.jsonl digest missing from scan.jsonl: " + digest);
            }
            if (j.value("flagged", false)) ++flagged;
        }
        summary["skills_flagged"] = flagged;
        if (features_count) {
            summary["flag_rate"] = static_cast<double>(flagged) / static_cast<double>(features_count);
        }
    }

    fs::path context_path = out_dir / "context_skills.jsonl";
    if (fs::exists(context_path)) {
        std::size_t rescored = 0, suspicious = 0;
        std::map<std::string, std::size_t> categories;
        for (const json& j : read_jsonl(context_path)) {
            std::string digest = j.value("digest", "");
            if (!scanned_digests.empty() && !scanned_digests.count(digest)) {
                throw MalformedInput("context_skills.jsonl digest missing from scan.jsonl: " + digest);
            }
            ++rescored;
            if (j.value("suspicious", false)) ++suspicious;
            ++categories[j.value("category", "unknown")];
        }
        summary["context_rescored"] = rescored;
        summary["context_suspicious"] = suspicious;
        if (rescored) {
            summary["context_suspicious_rate"] =
                static_cast<double>(suspicious) / static_cast<double>(rescored);
        }
        summary["context_categories"] = categories;
    }

    fs::path agree_path = out_dir / "agreement_matrix.json";
    if (fs::exists(agree_path)) {
        summary["agreement"] = json::parse(read_file(agree_path));
    }
    fs::path hist_path = out_dir / "flagged_by_k.json";
    if (fs::exists(hist_path)) {
        summary["flagged_by_k"] = json::parse(read_file(hist_path));
    }
    fs::path hijack_path = out_dir / "hijack_summary.json";
    if (fs::exists(hijack_path)) {
        summary["hijack"] = json::parse(read_file(hijack_path));
    }
    fs::path stats_path = out_dir / "repo_rates.json";
    if (fs::exists(stats_path)) {
        summary["repo_rates"] = json::parse(read_file(stats_path));
    }

    std::ostringstream text;
    text << "skillguard report\n";
    text << "=================\n";
    if (summary.contains("skills_scanned")) {
        text << "skills scanned:            " << summary["skills_scanned"].get<std::size_t>() << "\n";
        text << "scanner HIGH/CRITICAL:     " << summary["scanner_high_or_critical"].get<std::size_t>()
             << "\n";
    }
    if (summary.contains("skills_flagged")) {
        text << "flagged (scan + risk>3):   " << summary["skills_flagged"].get<std::size_t>() << "\n";
    }
    if (summary.contains("repo_rates")) {
        const json& rr = summary["repo_rates"];
        text << "skill-level flag rate:     " << format_score(rr.value("skill_rate", 0.0) * 100, 2)
             << "%\n";
        text << "repo-level flag rate:      " << format_score(rr.value("repo_rate", 0.0) * 100, 2)
             << "%\n";
    }
    if (summary.contains("context_rescored")) {
        text << "context rescored skills:   " << summary["context_rescored"].get<std::size_t>() << "\n";
        text << "context suspicious:        " << summary["context_suspicious"].get<std::size_t>() << "\n";
        for (const auto& [cat, count] : summary["context_categories"].items()) {
            text << "  category " << cat << ": " << count.get<std::size_t>() << "\n";
        }
    }
    if (summary.contains("agreement")) {
        const json& ag = summary["agreement"];
        text << "agreement universe:        " << ag.value("universe_size", std::size_t{0}) << "\n";
        const json& scanners = ag["scanners"];
        const json& matrix = ag["matrix"];
        text << "conditional overlap P(B|A):\n";
        for (std::size_t a = 0; a < scanners.size(); ++a) {
            text << "  " << scanners[a].get<std::string>() << ":";
            for (std::size_t b = 0; b < scanners.size(); ++b) {
                const json& cell = matrix[a][b];
                text << " " << (cell.is_null() ? "n/a" : format_score(cell.get<double>(), 3));
            }
            text << "\n";
        }
    }
    if (summary.contains("flagged_by_k")) {
        text << "flagged-by-k:";
        for (const auto& [k, count] : summary["flagged_by_k"].items()) {
            text << " k=" << k << ":" << count.get<std::size_t>();
        }
        text << "\n";
    }
    if (summary.contains("hijack")) {
        const json& hj = summary["hijack"];
        text << "hijack vulnerable repos:   " << hj.value("vulnerable_repos", std::size_t{0}) << "\n";
        text << "hijack affected skills:    " << hj.value("affected_skills", std::size_t{0}) << "\n";
        if (hj.contains("installs_median")) {
            text << "hijack installs median:    " << hj["installs_median"].get<std::int64_t>() << "\n";
            text << "hijack installs max:       " << hj["installs_max"].get<std::int64_t>() << "\n";
        }
    }

    rendered.text = text.str();
    rendered.json = summary.dump(2) + "\n";
    return rendered;
}

void stage_report(const PipelineConfig& cfg) {
    try {
        std::int64_t started = system_clock_now();

        // Repo-level aggregation feeds the report when both inputs exist.
        fs::path features_path = cfg.out_dir / "features.jsonl";
        if (fs::exists(features_path) && !cfg.store_dir.empty()) {
            Store store(cfg.store_dir, store_clock(cfg));
            std::map<std::string, bool> skill_flags;
            for (const json& j : read_jsonl(features_path)) {
                skill_flags[j.value("digest", "")] = j.value("flagged", false);
            }
            std::map<std::string, std::set<std::string>> mapping;
            for (const CatalogRecord& rec : store.read_catalog()) {
                if (rec.fetch_status != FetchStatus::ok || rec.digest.empty()) continue;
                mapping[rec.digest].insert(rec.origin.repo_id());
            }
            bool all_mapped = true;
            for (const auto& [digest, flagged] : skill_flags) {
                if (flagged && !mapping.count(digest)) all_mapped = false;
            }
            if (all_mapped) {
                RepoAggregate agg = repo_aggregate(skill_flags, mapping);
                json rr{
                    {"skills_total", agg.skills_total},
                    {"skills_flagged", agg.skills_flagged},
                    {"repos_total", agg.repos_total},
                    {"repos_flagged", agg.repos_flagged},
                    {"skill_rate", agg.skill_rate},
                    {"repo_rate", agg.repo_rate},
                };
                write_file(cfg.out_dir / "repo_rates.json", rr.dump(2) + "\n");
            }
        }

        RenderedReport rendered = render_report(cfg.out_dir);
        fs::path out_json = cfg.out_dir / "report.json";
        write_file(out_json, rendered.json);
        write_file(cfg.out_dir / "report.txt", rendered.text);
        write_run_manifest(cfg, "report", out_json, {}, started, system_clock_now());
    } catch (const StageError&) {
        throw;
    } catch (const MalformedInput& e) {
        throw StageError(ExitCode::config, e.what());
    } catch (const std::exception& e) {
        throw StageError(ExitCode::config, e.what());
    }
}

int run_pipeline(const PipelineConfig& cfg) {
    struct Stage {
        const char* name;
        void (*fn)(const PipelineConfig&);
        bool enabled;
    };
    const Stage stages[] = {
        {"ingest", stage_ingest, !cfg.index_file.empty()},
        {"analyze", stage_analyze, true},
        {"scan", stage_scan, true},
        {"features", stage_features, true},
        {"context", stage_context, !cfg.repos_dir.empty()},
        {"agree", stage_agree, true},
        {"hijack", stage_hijack, !cfg.forge.empty()},
        {"report", stage_report, true},
    };
    for (const Stage& s : stages) {
        if (!s.enabled) continue;
        try {
            s.fn(cfg);
        } catch (const StageError& e) {
            std::cerr << "skillguard: stage " << s.name << " failed: " << e.what() << "\n";
            return static_cast<int>(e.code);
        }
    }
    return 0;
}

}  // namespace skillguard
