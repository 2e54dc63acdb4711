#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "skillguard/artifact.hpp"
#include "skillguard/store.hpp"

namespace skillguard {

// In-memory repository tree: relative path -> content. std::map keeps paths
// in bytewise order, which discover_skills relies on.
using FileTree = std::map<std::string, std::string>;

enum class Platform { hosted, git_folder, git_root };

std::string_view platform_name(Platform p);
std::optional<Platform> platform_from_name(std::string_view name);

struct IndexEntry {
    Platform platform = Platform::hosted;
    std::string owner;
    std::string repository;
    std::string subpath;  // empty for git_root; required for git_folder
    std::map<std::string, std::string> listing_metadata;
};

struct IndexParseResult {
    std::vector<IndexEntry> entries;
    std::size_t skipped = 0;  // malformed lines
};

// One JSON object per line; malformed lines are counted and skipped.
IndexParseResult ingest_index(std::istream& source);
IndexParseResult ingest_index_file(const std::filesystem::path& path);  // throws UnreadableSource

struct UnreadableSource : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FetchBudget {
    std::chrono::milliseconds clone_timeout{120'000};
    std::uint64_t max_skill_dir_bytes = 200ull * 1024 * 1024;
};

// Repository-level fetch result. Failures never carry a tree.
struct RepoFetchResult {
    FetchStatus status = FetchStatus::ok;  // ok | missing_repo | auth_required
    FileTree tree;
};

class RepoFetcher {
public:
    virtual ~RepoFetcher() = default;
    virtual RepoFetchResult fetch(const std::string& owner, const std::string& repository,
                                  const FetchBudget& budget) = 0;
};

// Reads trees from <root>/<owner>/<repository>/ on disk. A marker file named
// ".auth_required" in the repository directory simulates a private
// repository. Used by all tests.
class LocalFixtureFetcher : public RepoFetcher {
public:
    explicit LocalFixtureFetcher(std::filesystem::path root);
    RepoFetchResult fetch(const std::string& owner, const std::string& repository,
                          const FetchBudget& budget) override;

private:
    std::filesystem::path root_;
};

// Depth-1 clone of <base_url>/<owner>/<repository>.git into a temp dir.
class ShallowGitFetcher : public RepoFetcher {
public:
    explicit ShallowGitFetcher(std::string base_url = "https://github.com");
    RepoFetchResult fetch(const std::string& owner, const std::string& repository,
                          const FetchBudget& budget) override;

private:
    std::string base_url_;
};

// Every directory containing a file named exactly "SKILL.md", sorted by
// path; "." for a root-level skill.
std::vector<std::string> discover_skills(const FileTree& tree);

// One outcome per skill root resolved from the entry. git_root entries
// expand to one root per discovered skill directory.
struct SkillRootOutcome {
    std::string subpath;
    FetchStatus status = FetchStatus::ok;
    std::optional<SkillArtifact> artifact;
};

struct SkillFetch {
    FetchStatus repo_status = FetchStatus::ok;  // repo-level failure when != ok
    std::vector<SkillRootOutcome> roots;        // empty on repo-level failure
};

// Enforces clone_timeout around the fetcher call and max_skill_dir_bytes per
// skill directory. Budget violations never yield partial artifacts.
SkillFetch fetch_skill(const IndexEntry& entry, const FetchBudget& budget, RepoFetcher& fetcher,
                       std::int64_t retrieved_at);

struct RepoEvent {
    std::string repo_id;
    std::string title;
    std::map<std::string, std::string> activity;
};

// Keyword prefilter over repository events: retains repo ids whose lowercase
// title or activity metadata contains any keyword; order-preserving, dedup'd.
std::vector<std::string> filter_candidates(const std::vector<RepoEvent>& events,
                                           const std::vector<std::string>& keywords);

struct IngestStats {
    std::size_t entries = 0;
    std::size_t skipped_lines = 0;
    std::size_t artifacts_stored = 0;
    std::size_t failures = 0;
    std::map<std::string, std::size_t> by_status;
};

// Fetches every entry (bounded worker count), writing one CatalogRecord per
// resolved skill root (or per entry on repo-level failure).
IngestStats run_ingest(const std::vector<IndexEntry>& entries, const FetchBudget& budget,
                       RepoFetcher& fetcher, Store& store, int workers = 1);

}  // namespace skillguard
