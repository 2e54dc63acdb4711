#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillguard/ingest.hpp"

namespace skillguard {

struct ForgeUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RepoLookupResult {
    enum class Kind { ok, redirect, not_found } kind = Kind::ok;
    std::string new_owner;  // redirect target
    std::string new_repo;
};

enum class AccountLookup { exists, not_found };

class ForgeClient {
public:
    virtual ~ForgeClient() = default;
    // Both throw ForgeUnavailable on transport failure, distinct from not_found.
    virtual RepoLookupResult repo_lookup(const std::string& owner, const std::string& repo) = 0;
    virtual AccountLookup account_lookup(const std::string& owner) = 0;
};

// Scenario-replay client; JSONL lines:
//   {owner, repo, repo_lookup: "ok"|"not_found"|"unavailable"|
//    {"redirect": {"owner":..., "repo":...}}, account_lookup: "exists"|
//    "not_found"|"unavailable"}
// Tests run exclusively against replay files; no forge is ever contacted.
class ReplayForgeClient : public ForgeClient {
public:
    static ReplayForgeClient load(const std::filesystem::path& path);
    RepoLookupResult repo_lookup(const std::string& owner, const std::string& repo) override;
    AccountLookup account_lookup(const std::string& owner) override;

private:
    struct Scenario {
        enum class RepoAnswer { ok, redirect, not_found, unavailable } repo_answer;
        std::string redirect_owner, redirect_repo;
        enum class AccountAnswer { exists, not_found, unavailable } account_answer;
    };
    std::map<std::string, Scenario> by_repo_;     // "owner/repo"
    std::map<std::string, Scenario> by_account_;  // owner
};

// REST client: GET <base>/repos/{owner}/{repo} -> 200 | redirect | 404,
// GET <base>/users/{owner} -> 200 | 404.
class LiveForgeClient : public ForgeClient {
public:
    explicit LiveForgeClient(std::string base_url);
    RepoLookupResult repo_lookup(const std::string& owner, const std::string& repo) override;
    AccountLookup account_lookup(const std::string& owner) override;

private:
    std::string base_url_;
};

enum class RefState { ok, redirected, missing_repo_owner_exists, missing_owner };
std::string_view ref_state_name(RefState s);

struct ReferenceStatus {
    RefState state = RefState::ok;
    std::string new_owner;  // redirected only
    std::string new_repo;
    std::optional<bool> owner_name_free;  // meaningful for redirected/missing states
    std::optional<std::int64_t> stars;
    std::optional<std::int64_t> installs;
};

// Resolves the entry against the forge; for redirected or missing-owner
// states also checks whether the original owner name is registrable.
ReferenceStatus probe_reference(const IndexEntry& entry, ForgeClient& forge);

enum class HijackVerdictKind { safe, possibly_protected, vulnerable };
enum class Impact { low, elevated };
std::string_view verdict_name(HijackVerdictKind v);
std::string_view impact_name(Impact i);

struct HijackVerdict {
    HijackVerdictKind verdict = HijackVerdictKind::safe;
    Impact impact = Impact::low;
    std::string rationale;
};

// retirement_threshold: installs at which the forge retires a namespace;
// unknown means vulnerable references are never downgraded.
HijackVerdict classify_hijackability(const ReferenceStatus& status,
                                     std::optional<std::int64_t> retirement_threshold);

struct AuditEntry {
    IndexEntry entry;
    std::optional<ReferenceStatus> status;  // empty on transport failure
    std::optional<HijackVerdict> verdict;
    bool forge_unavailable = false;
};

struct AuditSummary {
    std::size_t vulnerable_repos = 0;
    std::size_t affected_skills = 0;  // entries referencing vulnerable repos
    std::optional<std::int64_t> installs_median;  // lower median over affected skills
    std::optional<std::int64_t> installs_max;
    std::size_t transport_errors = 0;
};

struct AuditReport {
    std::vector<AuditEntry> entries;
    AuditSummary summary;
};

AuditReport audit_index(const std::vector<IndexEntry>& entries, ForgeClient& forge,
                        std::optional<std::int64_t> retirement_threshold);

}  // namespace skillguard
