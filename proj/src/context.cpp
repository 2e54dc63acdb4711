#include "skillguard/context.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include "skillguard/features.hpp"
#include "skillguard/manifest.hpp"
#include "skillguard/rule_scanner.hpp"
#include "skillguard/static_analysis.hpp"
#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

std::string_view level_name(Level l) {
    switch (l) {
        case Level::low: return "low";
        case Level::medium: return "medium";
        case Level::high: return "high";
    }
    return "unknown";
}

std::optional<Level> level_from_name(std::string_view name) {
    if (name == "low") return Level::low;
    if (name == "medium") return Level::medium;
    if (name == "high") return Level::high;
    return std::nullopt;
}

std::string_view category_name(ScoreCategory c) {
    switch (c) {
        case ScoreCategory::low: return "low";
        case ScoreCategory::intermediate: return "intermediate";
        case ScoreCategory::high: return "high";
    }
    return "unknown";
}

namespace {

std::vector<std::string> head_lines(const std::string& content, std::size_t budget) {
    auto lines = split_lines(content);
    if (lines.size() > budget) lines.resize(budget);
    return lines;
}

bool is_readme_name(const std::string& path) {
    if (path.find('/') != std::string::npos) return false;  // root level only
    std::string lower = to_lower(path);
    return lower == "readme" || lower.rfind("readme.", 0) == 0;
}

const std::set<std::string>& code_suffixes() {
    static const std::set<std::string> s = {
        "py", "sh", "js", "ts", "bash", "zsh", "ps1", "rb", "c",  "cc", "cpp", "h",
        "hpp", "go", "rs", "java", "kt", "swift", "php", "pl", "lua", "r",  "jl", "cs",
    };
    return s;
}

std::vector<std::string> dir_components(const std::string& dir) {
    std::vector<std::string> parts;
    if (dir.empty() || dir == ".") return parts;
    std::size_t pos = 0;
    while (pos <= dir.size()) {
        std::size_t slash = dir.find('/', pos);
        if (slash == std::string::npos) {
            parts.push_back(dir.substr(pos));
            break;
        }
        parts.push_back(dir.substr(pos, slash - pos));
        pos = slash + 1;
    }
    return parts;
}

// Tree distance between directories: non-shared components on both sides.
std::size_t dir_distance(const std::string& a, const std::string& b) {
    auto pa = dir_components(a);
    auto pb = dir_components(b);
    std::size_t common = 0;
    while (common < pa.size() && common < pb.size() && pa[common] == pb[common]) ++common;
    return (pa.size() - common) + (pb.size() - common);
}

std::string parent_dir(const std::string& path) {
    std::size_t slash = path.rfind('/');
    return (slash == std::string::npos) ? "" : path.substr(0, slash);
}

}  // namespace

ContextBundle build_context_bundle(const FileTree& repo, const std::string& skill_dir) {
    std::string dir = (skill_dir == ".") ? "" : skill_dir;
    std::string skill_md_path = dir.empty() ? "SKILL.md" : dir + "/SKILL.md";
    auto skill_it = repo.find(skill_md_path);
    if (skill_it == repo.end()) {
        throw MissingSkillFile("no SKILL.md at " + skill_md_path);
    }

    ContextBundle bundle;
    bundle.skill_md_lines = head_lines(skill_it->second, kManifestReadmeLineBudget);

    std::size_t remaining = kManifestReadmeLineBudget - bundle.skill_md_lines.size();
    for (const auto& [path, content] : repo) {
        if (is_readme_name(path)) {
            bundle.has_readme = true;
            bundle.readme_lines = head_lines(content, remaining);
            break;
        }
    }

    struct Candidate {
        std::size_t distance;
        std::size_t size;
        std::string path;
    };
    std::vector<Candidate> candidates;
    for (const auto& [path, content] : repo) {
        if (path == skill_md_path || is_readme_name(path)) continue;
        if (!code_suffixes().count(path_suffix(path))) continue;
        candidates.push_back({dir_distance(parent_dir(path), dir), content.size(), path});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.size != b.size) return a.size > b.size;  // largest first
        return a.path < b.path;
    });
    for (std::size_t i = 0; i < candidates.size() && i < kMaxCodeFiles; ++i) {
        ContextBundle::CodeFile cf;
        cf.path = candidates[i].path;
        cf.lines = head_lines(repo.at(candidates[i].path), kCodeFileLineBudget);
        bundle.code_files.push_back(std::move(cf));
    }
    bundle.has_code = !bundle.code_files.empty();
    return bundle;
}

namespace {

constexpr std::int64_t kDay = 86'400;
constexpr std::uint64_t kMiB = 1024 * 1024;

double size_bucket(std::uint64_t bytes) {
    if (bytes < 2 * kMiB) return 20;
    if (bytes <= 50 * kMiB) return 60;
    return 100;
}

double age_bucket(std::int64_t age_secs) {
    if (age_secs < 14 * kDay) return 10;
    if (age_secs < 120 * kDay) return 40;
    if (age_secs < 365 * kDay) return 70;
    return 100;
}

double recency_bucket(std::int64_t idle_secs) {
    if (idle_secs < 7 * kDay) return 100;
    if (idle_secs < 30 * kDay) return 70;
    if (idle_secs < 180 * kDay) return 40;
    return 10;
}

double stars_bucket(int stars) {
    if (stars <= 0) return 0;
    if (stars < 100) return 40;
    if (stars < 1000) return 80;
    return 100;
}

double forks_bucket(int forks) {
    if (forks <= 0) return 0;
    if (forks < 100) return 50;
    return 100;
}

double issues_bucket(int issues) {
    if (issues <= 0) return 20;
    if (issues <= 20) return 70;
    return 100;
}

}  // namespace

double metadata_score(const RepoMetadata& meta, std::int64_t now) {
    if (meta.created_at > now) {
        throw ClockSkew("created_at is in the future of now");
    }
    std::int64_t idle = std::max<std::int64_t>(0, now - meta.last_update);
    double sum = size_bucket(meta.size_bytes) + age_bucket(now - meta.created_at) +
                 recency_bucket(idle) + stars_bucket(meta.stars) + forks_bucket(meta.forks) +
                 issues_bucket(meta.open_issues);
    return sum / 6.0;
}

double codebase_score(const AlignmentAssessment& a) {
    double score = 0;
    switch (a.maliciousness) {
        case Level::low: score = 40; break;
        case Level::medium: score = 20; break;
        case Level::high: score = 0; break;
    }
    auto level_points = [](Level l, double med, double high) {
        switch (l) {
            case Level::low: return 0.0;
            case Level::medium: return med;
            case Level::high: return high;
        }
        return 0.0;
    };
    score += level_points(a.domain_match, 10, 20);
    score += level_points(a.code_similarity, 10, 20);
    score += level_points(a.readme_consistency, 5, 10);
    if (a.support_signals) score += 7;
    return score;
}

double combine(double codebase, double metadata) {
    if (codebase < 0 || codebase > 100 || metadata < 0 || metadata > 100) {
        throw OutOfRange("combine: scores must lie in [0, 100]");
    }
    return 0.7 * codebase + 0.3 * metadata;
}

ScoreCategory categorize(double combined) {
    if (combined < 40) return ScoreCategory::low;
    if (combined < 60) return ScoreCategory::intermediate;
    return ScoreCategory::high;
}

bool detect_suspicious(const AlignmentAssessment& a) {
    bool malicious_signal = a.maliciousness == Level::medium || a.maliciousness == Level::high;
    bool aligned = a.domain_match != Level::low || a.code_similarity != Level::low;
    return malicious_signal && !a.is_security_tool && aligned;
}

ContextScore make_context_score(double codebase, double metadata, bool suspicious) {
    ContextScore s;
    s.codebase = codebase;
    s.metadata = metadata;
    s.combined = combine(codebase, metadata);
    s.category = categorize(s.combined);
    s.suspicious = suspicious;
    return s;
}

ContextScore aggregate_cross_repo(const std::vector<RepoScore>& scores) {
    if (scores.empty()) throw EmptyInput("aggregate_cross_repo: no scores");
    std::vector<RepoScore> ranked = scores;
    std::sort(ranked.begin(), ranked.end(), [](const RepoScore& a, const RepoScore& b) {
        if (a.score.metadata != b.score.metadata) return a.score.metadata > b.score.metadata;
        if (a.score.codebase != b.score.codebase) return a.score.codebase > b.score.codebase;
        return a.repo_id < b.repo_id;
    });
    std::size_t take = std::min<std::size_t>(3, ranked.size());
    ContextScore out;
    for (std::size_t i = 0; i < take; ++i) {
        out.codebase += ranked[i].score.codebase;
        out.metadata += ranked[i].score.metadata;
        out.combined += ranked[i].score.combined;
        out.suspicious = out.suspicious || ranked[i].score.suspicious;
    }
    out.codebase /= static_cast<double>(take);
    out.metadata /= static_cast<double>(take);
    out.combined /= static_cast<double>(take);
    out.category = categorize(out.combined);
    return out;
}

Dispersion cross_repo_dispersion(const std::vector<double>& codebase_scores) {
    if (codebase_scores.size() < 2) {
        throw InsufficientRepos("cross_repo_dispersion needs at least two repositories");
    }
    double mean = 0;
    for (double s : codebase_scores) mean += s;
    mean /= static_cast<double>(codebase_scores.size());
    Dispersion d;
    double lo = codebase_scores[0], hi = codebase_scores[0];
    for (double s : codebase_scores) {
        d.variance += (s - mean) * (s - mean);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    d.variance /= static_cast<double>(codebase_scores.size());
    d.stddev = std::sqrt(d.variance);
    d.range = hi - lo;
    return d;
}

// ---------------------------------------------------------------------------
// Heuristic alignment backend

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> s = {
        "the", "and", "for", "with", "this", "that", "are", "was", "were", "from",
        "into", "your", "you", "can", "use", "uses", "using", "used", "will", "has",
        "have", "not", "all", "any", "its", "it's", "when", "then", "than", "them",
    };
    return s;
}

std::set<std::string> token_set(const std::string& text) {
    std::set<std::string> out;
    for (std::string& t : word_tokens(text)) {
        if (!stopwords().count(t)) out.insert(std::move(t));
    }
    return out;
}

// Share of `source` tokens present in `evidence`; 0 for an empty source.
double containment(const std::set<std::string>& source, const std::set<std::string>& evidence) {
    if (source.empty()) return 0;
    std::size_t hits = 0;
    for (const std::string& t : source) {
        if (evidence.count(t)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(source.size());
}

Level level_from_ratio(double ratio, double medium_at, double high_at) {
    if (ratio >= high_at) return Level::high;
    if (ratio >= medium_at) return Level::medium;
    return Level::low;
}

const std::set<std::string>& security_tool_words() {
    static const std::set<std::string> s = {
        "security", "scanner", "vulnerability", "vulnerabilities", "pentest", "pentesting",
        "malware",  "antivirus", "forensics",   "yara",            "exploit", "cve",
    };
    return s;
}

}  // namespace

AlignmentAssessment HeuristicContextBackend::assess(const SkillArtifact& skill,
                                                    const ContextBundle& bundle) {
    AlignmentAssessment a;

    std::string manifest_text = skill.manifest_file().content;
    std::string skill_name, skill_description;
    if (auto parsed = parse_manifest(manifest_text); parsed.ok()) {
        skill_name = parsed.manifest->name;
        skill_description = parsed.manifest->description;
    }

    std::set<std::string> manifest_tokens = token_set(skill_name + " " + skill_description);
    if (manifest_tokens.empty()) manifest_tokens = token_set(manifest_text);

    std::string readme_text = join(bundle.readme_lines, "\n");
    std::string code_text;
    std::string path_text;
    for (const auto& cf : bundle.code_files) {
        code_text += join(cf.lines, "\n");
        code_text += "\n";
        path_text += cf.path + " ";
    }
    std::set<std::string> readme_tokens = token_set(readme_text);
    std::set<std::string> repo_evidence = token_set(readme_text + " " + path_text + " " + code_text);

    a.domain_match = level_from_ratio(containment(manifest_tokens, repo_evidence), 0.15, 0.45);

    std::string skill_code_text;
    for (const SkillFile& f : skill.files) {
        if (default_script_suffixes().count(f.suffix)) {
            skill_code_text += f.content;
            skill_code_text += "\n";
        }
    }
    std::set<std::string> skill_code_tokens =
        skill_code_text.empty() ? manifest_tokens : token_set(skill_code_text);
    std::set<std::string> repo_code_tokens = token_set(code_text);
    a.code_similarity = bundle.has_code
                            ? level_from_ratio(containment(skill_code_tokens, repo_code_tokens), 0.15, 0.45)
                            : Level::low;

    a.readme_consistency = bundle.has_readme
                               ? level_from_ratio(containment(manifest_tokens, readme_tokens), 0.15, 0.45)
                               : Level::low;

    a.support_signals = bundle.has_readme && bundle.has_code;

    // Repository maliciousness: run the deterministic scanner modules over the
    // bundled repo evidence (readme + code files).
    std::vector<SkillFile> evidence_files;
    if (bundle.has_readme) evidence_files.push_back(make_skill_file("README.md", readme_text));
    for (const auto& cf : bundle.code_files) {
        evidence_files.push_back(make_skill_file(cf.path, join(cf.lines, "\n")));
    }
    std::sort(evidence_files.begin(), evidence_files.end(),
              [](const SkillFile& x, const SkillFile& y) { return x.path < y.path; });
    SkillArtifact evidence;
    evidence.files = std::move(evidence_files);
    Severity worst = Severity::LOW;
    bool any_finding = false;
    for (auto findings : {scan_pipelines(evidence), scan_behavior(evidence)}) {
        for (const ScanFinding& f : findings) {
            any_finding = true;
            worst = std::max(worst, f.severity);
        }
    }
    if (!any_finding) {
        a.maliciousness = Level::low;
    } else if (worst == Severity::CRITICAL) {
        a.maliciousness = Level::high;
    } else {
        a.maliciousness = Level::medium;
    }

    std::set<std::string> security_evidence = token_set(readme_text + " " + skill_description);
    a.is_security_tool = std::any_of(security_tool_words().begin(), security_tool_words().end(),
                                     [&](const std::string& w) { return security_evidence.count(w) > 0; });
    return a;
}

// ---------------------------------------------------------------------------
// Remote alignment backend

std::string assessment_to_json(const AlignmentAssessment& a) {
    json j{
        {"domain_match", std::string(level_name(a.domain_match))},
        {"code_similarity", std::string(level_name(a.code_similarity))},
        {"readme_consistency", std::string(level_name(a.readme_consistency))},
        {"support_signals", a.support_signals},
        {"maliciousness", std::string(level_name(a.maliciousness))},
        {"is_security_tool", a.is_security_tool},
    };
    return j.dump();
}

std::optional<AlignmentAssessment> assessment_from_json(const std::string& json_text,
                                                        std::string* error) {
    auto fail = [&](const std::string& msg) -> std::optional<AlignmentAssessment> {
        if (error) *error = msg;
        return std::nullopt;
    };
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return fail("not a JSON object");
    AlignmentAssessment a;
    auto get_level = [&](const char* key, Level& out) -> bool {
        if (!j.contains(key) || !j[key].is_string()) return false;
        auto l = level_from_name(j[key].get<std::string>());
        if (!l) return false;
        out = *l;
        return true;
    };
    if (!get_level("domain_match", a.domain_match)) return fail("bad domain_match");
    if (!get_level("code_similarity", a.code_similarity)) return fail("bad code_similarity");
    if (!get_level("readme_consistency", a.readme_consistency)) return fail("bad readme_consistency");
    if (!get_level("maliciousness", a.maliciousness)) return fail("bad maliciousness");
    if (!j.contains("support_signals") || !j["support_signals"].is_boolean()) {
        return fail("bad support_signals");
    }
    a.support_signals = j["support_signals"].get<bool>();
    if (!j.contains("is_security_tool") || !j["is_security_tool"].is_boolean()) {
        return fail("bad is_security_tool");
    }
    a.is_security_tool = j["is_security_tool"].get<bool>();
    return a;
}

std::string RemoteContextBackend::build_request(const SkillArtifact& skill,
                                                const ContextBundle& bundle) {
    json req;
    req["skill_manifest_excerpt"] = join(bundle.skill_md_lines, "\n");
    req["readme_excerpt"] = join(bundle.readme_lines, "\n");
    json files = json::array();
    for (const auto& cf : bundle.code_files) {
        files.push_back(json{{"path", cf.path}, {"content", join(cf.lines, "\n")}});
    }
    req["code_files"] = files;
    req["has_readme"] = bundle.has_readme;
    req["has_code"] = bundle.has_code;
    req["skill_digest"] = skill.digest.hex();
    return req.dump();
}

RemoteContextBackend::RemoteContextBackend(std::string endpoint_url, Transport transport)
    : endpoint_(std::move(endpoint_url)), transport_(std::move(transport)) {
    if (!transport_) {
        transport_ = [](const std::string& url, const std::string& body,
                        const std::string& session_id) -> HttpResponse {
            std::size_t scheme = url.find("://");
            std::size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
            std::string base = (path_start == std::string::npos) ? url : url.substr(0, path_start);
            std::string path = (path_start == std::string::npos) ? "/" : url.substr(path_start);
            httplib::Client client(base);
            client.set_connection_timeout(10);
            client.set_read_timeout(60);
            httplib::Headers headers = {{"X-Session-Id", session_id}};
            auto res = client.Post(path, headers, body, "application/json");
            if (!res) return {0, ""};
            return {res->status, res->body};
        };
    }
}

AlignmentAssessment RemoteContextBackend::assess(const SkillArtifact& skill,
                                                 const ContextBundle& bundle) {
    std::string request = build_request(skill, bundle);
    std::string session_id = skill.digest.hex() + "-ctx-" + std::to_string(++session_counter_);
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        HttpResponse res = transport_(endpoint_, request, session_id + "-" + std::to_string(attempt));
        if (res.status == 0) throw BackendUnavailable("no response from " + endpoint_);
        if (res.status != 200) {
            last_error = "status " + std::to_string(res.status);
            continue;
        }
        json j = json::parse(res.body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("assessment")) {
            last_error = "response missing assessment object";
            continue;
        }
        std::string schema_error;
        auto a = assessment_from_json(j["assessment"].dump(), &schema_error);
        if (a) return *a;
        last_error = schema_error;
    }
    throw MalformedBackendAnswer("context backend answer failed schema validation: " + last_error);
}

}  // namespace skillguard
