#include "skillguard/stats.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

std::vector<FlagSet> load_flag_sets(const std::filesystem::path& dir_or_file) {
    std::map<std::string, FlagSet> by_scanner;
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(dir_or_file)) {
        for (const auto& e : std::filesystem::directory_iterator(dir_or_file)) {
            if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(dir_or_file);
    }
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read flag set: " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) continue;
            std::string scanner = j.value("scanner_id", "");
            std::string digest = j.value("digest", "");
            if (scanner.empty() || digest.empty()) continue;
            FlagSet& fs = by_scanner[scanner];
            fs.scanner_id = scanner;
            fs.scanned.insert(digest);
            if (j.value("flagged", false)) fs.flagged.insert(digest);
        }
    }
    std::vector<FlagSet> out;
    out.reserve(by_scanner.size());
    for (auto& [_, fs] : by_scanner) out.push_back(std::move(fs));
    return out;
}

std::set<std::string> common_universe(const std::vector<FlagSet>& sets) {
    std::set<std::string> universe;
    if (sets.empty()) return universe;
    universe = sets[0].scanned;
    for (std::size_t i = 1; i < sets.size(); ++i) {
        std::set<std::string> next;
        std::set_intersection(universe.begin(), universe.end(), sets[i].scanned.begin(),
                              sets[i].scanned.end(), std::inserter(next, next.begin()));
        universe = std::move(next);
    }
    return universe;
}

namespace {

void check_universe(const std::vector<FlagSet>& sets, const std::set<std::string>& universe) {
    for (const FlagSet& fs : sets) {
        for (const std::string& d : universe) {
            if (!fs.scanned.count(d)) {
                throw UniverseNotCovered("scanner " + fs.scanner_id + " did not scan " + d);
            }
        }
    }
}

std::set<std::string> flags_in_universe(const FlagSet& fs, const std::set<std::string>& universe) {
    std::set<std::string> out;
    std::set_intersection(fs.flagged.begin(), fs.flagged.end(), universe.begin(), universe.end(),
                          std::inserter(out, out.begin()));
    return out;
}

}  // namespace

OverlapMatrix conditional_overlap(const std::vector<FlagSet>& sets,
                                  const std::set<std::string>& universe) {
    check_universe(sets, universe);
    std::vector<std::set<std::string>> flags;
    flags.reserve(sets.size());
    for (const FlagSet& fs : sets) flags.push_back(flags_in_universe(fs, universe));

    OverlapMatrix matrix(sets.size(), std::vector<std::optional<double>>(sets.size()));
    for (std::size_t a = 0; a < sets.size(); ++a) {
        if (flags[a].empty()) continue;  // whole row undefined
        for (std::size_t b = 0; b < sets.size(); ++b) {
            std::size_t both = 0;
            for (const std::string& d : flags[a]) {
                if (flags[b].count(d)) ++both;
            }
            matrix[a][b] = static_cast<double>(both) / static_cast<double>(flags[a].size());
        }
    }
    return matrix;
}

std::map<int, std::size_t> flagged_by_k(const std::vector<FlagSet>& sets,
                                        const std::set<std::string>& universe) {
    check_universe(sets, universe);
    std::map<std::string, int> counts;
    for (const FlagSet& fs : sets) {
        for (const std::string& d : flags_in_universe(fs, universe)) ++counts[d];
    }
    std::map<int, std::size_t> histogram;
    for (int k = 1; k <= static_cast<int>(sets.size()); ++k) histogram[k] = 0;
    for (const auto& [_, k] : counts) ++histogram[k];
    return histogram;
}

RepoAggregate repo_aggregate(const std::map<std::string, bool>& skill_flags,
                             const std::map<std::string, std::set<std::string>>& digest_to_repos) {
    RepoAggregate agg;
    agg.skills_total = skill_flags.size();
    std::map<std::string, bool> repo_flagged;
    for (const auto& [digest, flagged] : skill_flags) {
        auto it = digest_to_repos.find(digest);
        if (it == digest_to_repos.end() || it->second.empty()) {
            if (flagged) throw UnmappedDigest("flagged digest not in mapping: " + digest);
            continue;
        }
        if (flagged) ++agg.skills_flagged;
        for (const std::string& repo : it->second) {
            auto [rit, _] = repo_flagged.try_emplace(repo, false);
            rit->second = rit->second || flagged;
        }
    }
    agg.repo_flagged = std::move(repo_flagged);
    agg.repos_total = agg.repo_flagged.size();
    for (const auto& [_, f] : agg.repo_flagged) {
        if (f) ++agg.repos_flagged;
    }
    agg.skill_rate = agg.skills_total ? static_cast<double>(agg.skills_flagged) /
                                            static_cast<double>(agg.skills_total)
                                      : 0;
    agg.repo_rate = agg.repos_total ? static_cast<double>(agg.repos_flagged) /
                                          static_cast<double>(agg.repos_total)
                                    : 0;
    return agg;
}

}  // namespace skillguard
