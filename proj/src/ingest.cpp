#include "skillguard/ingest.hpp"

#include <atomic>
#include <random>
#include <cstdlib>
#include <fstream>
#include <future>
#include <thread>

#include <nlohmann/json.hpp>

#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

std::string_view platform_name(Platform p) {
    switch (p) {
        case Platform::hosted: return "hosted";
        case Platform::git_folder: return "git-folder";
        case Platform::git_root: return "git-root";
    }
    return "unknown";
}

std::optional<Platform> platform_from_name(std::string_view name) {
    if (name == "hosted") return Platform::hosted;
    if (name == "git-folder") return Platform::git_folder;
    if (name == "git-root") return Platform::git_root;
    return std::nullopt;
}

IndexParseResult ingest_index(std::istream& source) {
    IndexParseResult result;
    std::string line;
    while (std::getline(source, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++result.skipped;
            continue;
        }
        auto platform = platform_from_name(j.value("platform", ""));
        std::string owner = j.value("owner", "");
        std::string repository = j.value("repository", "");
        std::string subpath = j.value("subpath", "");
        if (!platform || owner.empty() || repository.empty()) {
            ++result.skipped;
            continue;
        }
        if (*platform == Platform::git_folder && subpath.empty()) {
            ++result.skipped;
            continue;
        }
        if (*platform == Platform::git_root && !subpath.empty()) {
            ++result.skipped;
            continue;
        }
        IndexEntry entry;
        entry.platform = *platform;
        entry.owner = std::move(owner);
        entry.repository = std::move(repository);
        entry.subpath = std::move(subpath);
        if (j.contains("listing_metadata") && j["listing_metadata"].is_object()) {
            for (auto& [k, v] : j["listing_metadata"].items()) {
                entry.listing_metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        result.entries.push_back(std::move(entry));
    }
    return result;
}

IndexParseResult ingest_index_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UnreadableSource("cannot read index: " + path.string());
    return ingest_index(in);
}

LocalFixtureFetcher::LocalFixtureFetcher(std::filesystem::path root) : root_(std::move(root)) {}

RepoFetchResult LocalFixtureFetcher::fetch(const std::string& owner, const std::string& repository,
                                           const FetchBudget&) {
    RepoFetchResult result;
    auto dir = root_ / owner / repository;
    if (!std::filesystem::is_directory(dir)) {
        result.status = FetchStatus::missing_repo;
        return result;
    }
    if (std::filesystem::exists(dir / ".auth_required")) {
        result.status = FetchStatus::auth_required;
        return result;
    }
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string rel = std::filesystem::relative(entry.path(), dir).generic_string();
        result.tree[rel] = read_file(entry.path());
    }
    return result;
}

ShallowGitFetcher::ShallowGitFetcher(std::string base_url) : base_url_(std::move(base_url)) {}

RepoFetchResult ShallowGitFetcher::fetch(const std::string& owner, const std::string& repository,
                                         const FetchBudget&) {
    RepoFetchResult result;
    auto tmp = std::filesystem::temp_directory_path() /
               ("skillguard-clone-" + std::to_string(std::random_device{}()));
    std::string url = base_url_ + "/" + owner + "/" + repository + ".git";
    std::string cmd = "git clone --quiet --depth 1 '" + url + "' '" + tmp.string() + "' 2>/dev/null";
    int rc = std::system(cmd.c_str());
    if (rc != 0) {
        std::filesystem::remove_all(tmp);
        result.status = FetchStatus::missing_repo;
        return result;
    }
    for (const auto& entry : std::filesystem::recursive_directory_iterator(tmp)) {
        if (!entry.is_regular_file()) continue;
        std::string rel = std::filesystem::relative(entry.path(), tmp).generic_string();
        if (rel.rfind(".git/", 0) == 0) continue;
        result.tree[rel] = read_file(entry.path());
    }
    std::filesystem::remove_all(tmp);
    return result;
}

std::vector<std::string> discover_skills(const FileTree& tree) {
    std::vector<std::string> dirs;
    for (const auto& [path, _] : tree) {
        std::size_t slash = path.rfind('/');
        std::string_view base = (slash == std::string::npos)
                                    ? std::string_view(path)
                                    : std::string_view(path).substr(slash + 1);
        if (base != "SKILL.md") continue;
        dirs.push_back(slash == std::string::npos ? "." : path.substr(0, slash));
    }
    // Map iteration is already path-ordered, but "." sorts differently from
    // nested paths, so sort explicitly.
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

namespace {

// Subtree of `tree` under `dir`, rebased to relative paths. dir == "." keeps
// the whole tree.
FileTree subtree(const FileTree& tree, const std::string& dir) {
    if (dir == "." || dir.empty()) return tree;
    FileTree out;
    std::string prefix = dir + "/";
    for (const auto& [path, content] : tree) {
        if (path.rfind(prefix, 0) == 0) out[path.substr(prefix.size())] = content;
    }
    return out;
}

std::uint64_t tree_bytes(const FileTree& tree) {
    std::uint64_t total = 0;
    for (const auto& [_, content] : tree) total += content.size();
    return total;
}

SkillRootOutcome build_root(const FileTree& tree, const std::string& dir, const IndexEntry& entry,
                            const FetchBudget& budget, std::int64_t retrieved_at) {
    SkillRootOutcome out;
    out.subpath = (dir == ".") ? "" : dir;
    FileTree files = subtree(tree, dir);
    if (files.find("SKILL.md") == files.end()) {
        out.status = FetchStatus::missing_path;
        return out;
    }
    if (tree_bytes(files) > budget.max_skill_dir_bytes) {
        out.status = FetchStatus::size_exceeded;
        return out;
    }
    Origin origin;
    origin.platform = std::string(platform_name(entry.platform));
    origin.owner = entry.owner;
    origin.repository = entry.repository;
    origin.subpath = out.subpath;
    origin.retrieved_at = retrieved_at;
    std::vector<SkillFile> skill_files;
    skill_files.reserve(files.size());
    for (auto& [path, content] : files) {
        skill_files.push_back(make_skill_file(path, std::move(content)));
    }
    out.artifact = make_artifact(std::move(skill_files), std::move(origin));
    return out;
}

}  // namespace

SkillFetch fetch_skill(const IndexEntry& entry, const FetchBudget& budget, RepoFetcher& fetcher,
                       std::int64_t retrieved_at) {
    SkillFetch result;

    // The fetcher call runs on its own thread so the clone timeout holds even
    // for fetchers that block. On timeout the worker thread is detached; it
    // cannot touch the store, so no partial state is published.
    auto task = std::packaged_task<RepoFetchResult()>(
        [&fetcher, &entry, &budget] { return fetcher.fetch(entry.owner, entry.repository, budget); });
    auto future = task.get_future();
    std::thread worker(std::move(task));
    if (future.wait_for(budget.clone_timeout) == std::future_status::timeout) {
        worker.detach();
        result.repo_status = FetchStatus::timeout;
        return result;
    }
    worker.join();
    RepoFetchResult fetched = future.get();
    if (fetched.status != FetchStatus::ok) {
        result.repo_status = fetched.status;
        return result;
    }

    std::vector<std::string> roots;
    if (entry.platform == Platform::git_root) {
        roots = discover_skills(fetched.tree);
        if (roots.empty()) {
            SkillRootOutcome out;
            out.status = FetchStatus::missing_path;
            result.roots.push_back(std::move(out));
            return result;
        }
    } else {
        roots.push_back(entry.subpath.empty() ? "." : entry.subpath);
    }

    for (const std::string& dir : roots) {
        result.roots.push_back(build_root(fetched.tree, dir, entry, budget, retrieved_at));
    }
    return result;
}

std::vector<std::string> filter_candidates(const std::vector<RepoEvent>& events,
                                           const std::vector<std::string>& keywords) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const RepoEvent& ev : events) {
        bool matched = false;
        std::string title = to_lower(ev.title);
        for (const std::string& kw : keywords) {
            if (kw.empty()) continue;
            if (title.find(kw) != std::string::npos) {
                matched = true;
                break;
            }
            for (const auto& [k, v] : ev.activity) {
                if (to_lower(v).find(kw) != std::string::npos) {
                    matched = true;
                    break;
                }
            }
            if (matched) break;
        }
        if (matched && seen.insert(ev.repo_id).second) out.push_back(ev.repo_id);
    }
    return out;
}

IngestStats run_ingest(const std::vector<IndexEntry>& entries, const FetchBudget& budget,
                       RepoFetcher& fetcher, Store& store, int workers) {
    IngestStats stats;
    stats.entries = entries.size();
    std::atomic<std::size_t> next{0};
    std::mutex stats_mutex;

    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= entries.size()) break;
            const IndexEntry& entry = entries[i];
            SkillFetch fetched = fetch_skill(entry, budget, fetcher, store.now());
            std::lock_guard<std::mutex> lock(stats_mutex);
            if (fetched.repo_status != FetchStatus::ok) {
                Origin origin;
                origin.platform = std::string(platform_name(entry.platform));
                origin.owner = entry.owner;
                origin.repository = entry.repository;
                origin.subpath = entry.subpath;
                store.record_failure(origin, fetched.repo_status);
                ++stats.failures;
                ++stats.by_status[std::string(fetch_status_name(fetched.repo_status))];
                continue;
            }
            for (const SkillRootOutcome& root : fetched.roots) {
                if (root.status == FetchStatus::ok && root.artifact) {
                    store.put(*root.artifact);
                    ++stats.artifacts_stored;
                    ++stats.by_status["ok"];
                } else {
                    Origin origin;
                    origin.platform = std::string(platform_name(entry.platform));
                    origin.owner = entry.owner;
                    origin.repository = entry.repository;
                    origin.subpath = root.subpath.empty() ? entry.subpath : root.subpath;
                    store.record_failure(origin, root.status);
                    ++stats.failures;
                    ++stats.by_status[std::string(fetch_status_name(root.status))];
                }
            }
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return stats;
}

}  // namespace skillguard
