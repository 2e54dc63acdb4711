#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace skillguard {

struct UniverseNotCovered : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnmappedDigest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One scanner's verdicts over the skills it scanned; flagged is a subset of
// scanned.
struct FlagSet {
    std::string scanner_id;
    std::set<std::string> flagged;
    std::set<std::string> scanned;
};

// JSONL {scanner_id, digest, flagged}; one FlagSet per scanner_id seen.
std::vector<FlagSet> load_flag_sets(const std::filesystem::path& dir_or_file);

// Intersection of all scanned sets ("common skills").
std::set<std::string> common_universe(const std::vector<FlagSet>& sets);

// Entry (A,B) = P(B flags | A flags) over the universe; nullopt when A
// flagged nothing in the universe. Diagonal is 1 where defined.
using OverlapMatrix = std::vector<std::vector<std::optional<double>>>;
OverlapMatrix conditional_overlap(const std::vector<FlagSet>& sets,
                                  const std::set<std::string>& universe);

// Histogram k -> number of skills flagged by exactly k scanners (k in 1..n).
std::map<int, std::size_t> flagged_by_k(const std::vector<FlagSet>& sets,
                                        const std::set<std::string>& universe);

struct RepoAggregate {
    std::map<std::string, bool> repo_flagged;
    std::size_t skills_total = 0;
    std::size_t skills_flagged = 0;
    std::size_t repos_total = 0;
    std::size_t repos_flagged = 0;
    double skill_rate = 0;
    double repo_rate = 0;
};

// Repo flagged iff any contained skill is flagged. Every flagged digest must
// appear in the mapping.
RepoAggregate repo_aggregate(const std::map<std::string, bool>& skill_flags,
                             const std::map<std::string, std::set<std::string>>& digest_to_repos);

}  // namespace skillguard
