#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillguard/artifact.hpp"
#include "skillguard/ingest.hpp"

namespace skillguard {

struct ClockSkew : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientRepos : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingSkillFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RepoMetadata {
    std::uint64_t size_bytes = 0;
    std::int64_t created_at = 0;
    std::int64_t last_update = 0;
    int stars = 0;
    int forks = 0;
    int open_issues = 0;
};

// Truncated evidence bundle handed to the alignment backend. SKILL.md and the
// repository README share a 200-line budget (SKILL.md first); up to three
// code files at up to 100 lines each.
struct ContextBundle {
    std::vector<std::string> skill_md_lines;
    std::vector<std::string> readme_lines;
    struct CodeFile {
        std::string path;
        std::vector<std::string> lines;
    };
    std::vector<CodeFile> code_files;
    bool has_readme = false;
    bool has_code = false;
};

inline constexpr std::size_t kManifestReadmeLineBudget = 200;
inline constexpr std::size_t kMaxCodeFiles = 3;
inline constexpr std::size_t kCodeFileLineBudget = 100;

// skill_dir is the directory containing SKILL.md, "." or "" for the root.
ContextBundle build_context_bundle(const FileTree& repo, const std::string& skill_dir);

enum class Level { low, medium, high };
std::string_view level_name(Level l);
std::optional<Level> level_from_name(std::string_view name);

struct AlignmentAssessment {
    Level domain_match = Level::low;
    Level code_similarity = Level::low;
    Level readme_consistency = Level::low;
    bool support_signals = false;
    Level maliciousness = Level::low;
    bool is_security_tool = false;
};

// Bucketed maturity signals, mean of six per-signal scores. Buckets and point
// values are tabulated in docs/formats.md.
double metadata_score(const RepoMetadata& meta, std::int64_t now);

// Baseline 40 for a non-malicious repository, reduced for maliciousness,
// plus alignment add-ons; maximum 97.
double codebase_score(const AlignmentAssessment& assessment);

// Exact 0.7/0.3 weighted sum.
double combine(double codebase, double metadata);

enum class ScoreCategory { low, intermediate, high };
std::string_view category_name(ScoreCategory c);
ScoreCategory categorize(double combined);

// Codebase-aligned but suspicious repository that is not a security tool.
bool detect_suspicious(const AlignmentAssessment& assessment);

struct ContextScore {
    double codebase = 0;
    double metadata = 0;
    double combined = 0;
    ScoreCategory category = ScoreCategory::low;
    bool suspicious = false;
};

ContextScore make_context_score(double codebase, double metadata, bool suspicious);

struct RepoScore {
    std::string repo_id;
    ContextScore score;
};

// Average over the <=3 most relevant repositories (highest metadata score,
// ties by codebase then repo id); suspicious if any retained repo is.
ContextScore aggregate_cross_repo(const std::vector<RepoScore>& scores);

struct Dispersion {
    double variance = 0;  // population variance
    double stddev = 0;
    double range = 0;
};

Dispersion cross_repo_dispersion(const std::vector<double>& codebase_scores);

class ContextBackend {
public:
    virtual ~ContextBackend() = default;
    virtual AlignmentAssessment assess(const SkillArtifact& skill, const ContextBundle& bundle) = 0;
};

// Deterministic token-overlap alignment: no model, no network. Thresholds
// documented in docs/formats.md.
class HeuristicContextBackend : public ContextBackend {
public:
    AlignmentAssessment assess(const SkillArtifact& skill, const ContextBundle& bundle) override;
};

// Wire contract mirrors the feature backend: POST {bundle...} ->
// {assessment: {...}}; schema-invalid answers retried once.
class RemoteContextBackend : public ContextBackend {
public:
    struct HttpResponse {
        int status = 0;
        std::string body;
    };
    using Transport = std::function<HttpResponse(const std::string& url, const std::string& body,
                                                 const std::string& session_id)>;

    explicit RemoteContextBackend(std::string endpoint_url, Transport transport = {});
    AlignmentAssessment assess(const SkillArtifact& skill, const ContextBundle& bundle) override;

    static std::string build_request(const SkillArtifact& skill, const ContextBundle& bundle);

private:
    std::string endpoint_;
    Transport transport_;
    std::uint64_t session_counter_ = 0;
};

std::string assessment_to_json(const AlignmentAssessment& a);
std::optional<AlignmentAssessment> assessment_from_json(const std::string& json_text,
                                                        std::string* error = nullptr);

}  // namespace skillguard
