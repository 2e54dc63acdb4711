#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "skillguard/ingest.hpp"
#include "skillguard/util.hpp"

using namespace skillguard;
namespace fs = std::filesystem;

namespace {

struct TempTree {
    fs::path root;
    TempTree() {
        root = fs::temp_directory_path() / ("sg-ingest-" + std::to_string(::getpid()) + "-" +
                                            std::to_string(counter()++));
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    void add(const std::string& rel, const std::string& content) {
        write_file(root / rel, content);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

constexpr const char* kManifest = "---\nname: s\ndescription: d\n---\nbody\n";

}  // namespace

TEST_CASE("ingest_index parses well-formed lines and skips malformed ones") {
    std::istringstream ok(
        R"({"platform": "git-folder", "owner": "a", "repository": "r", "subpath": "skills/x"}
{"platform": "git-root", "owner": "b", "repository": "r2", "subpath": ""}
{"platform": "hosted", "owner": "c", "repository": "r3", "subpath": "", "listing_metadata": {"stars": "7"}}
)");
    auto r = ingest_index(ok);
    CHECK(r.entries.size() == 3);
    CHECK(r.skipped == 0);
    CHECK(r.entries[0].platform == Platform::git_folder);
    CHECK(r.entries[2].listing_metadata.at("stars") == "7");

    std::istringstream mixed(
        R"({"platform": "git-folder", "owner": "a", "repository": "r", "subpath": "s"}
this is not json
{"platform": "git-folder", "owner": "b", "repository": "r2", "subpath": "s2"}
)");
    r = ingest_index(mixed);
    CHECK(r.entries.size() == 2);
    CHECK(r.skipped == 1);
}

TEST_CASE("ingest_index enforces platform/subpath invariants") {
    std::istringstream bad(
        R"({"platform": "git-folder", "owner": "a", "repository": "r", "subpath": ""}
{"platform": "git-root", "owner": "b", "repository": "r", "subpath": "oops"}
{"platform": "teleport", "owner": "c", "repository": "r"}
{"platform": "hosted", "repository": "r"}
)");
    auto r = ingest_index(bad);
    CHECK(r.entries.empty());
    CHECK(r.skipped == 4);
}

TEST_CASE("ingest_index of empty document") {
    std::istringstream empty("");
    auto r = ingest_index(empty);
    CHECK(r.entries.empty());
    CHECK(r.skipped == 0);
}

TEST_CASE("discover_skills finds every SKILL.md directory sorted") {
    FileTree tree{
        {"a/SKILL.md", "m"}, {"a/scripts/x.sh", "s"}, {"b/readme.md", "r"},
    };
    CHECK(discover_skills(tree) == std::vector<std::string>{"a"});

    FileTree root_skill{{"SKILL.md", "m"}};
    CHECK(discover_skills(root_skill) == std::vector<std::string>{"."});

    FileTree nested{{"x/SKILL.md", "m"}, {"x/y/SKILL.md", "m"}};
    CHECK(discover_skills(nested) == std::vector<std::string>{"x", "x/y"});

    // Only files named exactly SKILL.md count.
    FileTree near_miss{{"a/skill.md", "m"}, {"b/SKILL.md.bak", "m"}};
    CHECK(discover_skills(near_miss).empty());
}

TEST_CASE("fetch_skill resolves a git-folder entry") {
    TempTree fixture;
    fixture.add("alice/tool/skills/pdf/SKILL.md", kManifest);
    fixture.add("alice/tool/skills/pdf/scripts/run.py", "print(1)\n");
    fixture.add("alice/tool/README.md", "readme\n");
    LocalFixtureFetcher fetcher(fixture.root);

    IndexEntry entry{Platform::git_folder, "alice", "tool", "skills/pdf", {}};
    auto result = fetch_skill(entry, FetchBudget{}, fetcher, 1700000000);
    CHECK(result.repo_status == FetchStatus::ok);
    REQUIRE(result.roots.size() == 1);
    CHECK(result.roots[0].status == FetchStatus::ok);
    REQUIRE(result.roots[0].artifact.has_value());
    const SkillArtifact& a = *result.roots[0].artifact;
    CHECK(a.files.size() == 2);
    CHECK(a.find("SKILL.md") != nullptr);
    CHECK(a.origin.owner == "alice");
    CHECK(a.origin.subpath == "skills/pdf");
    CHECK(a.origin.retrieved_at == 1700000000);
}

TEST_CASE("fetch_skill reports missing-repo and missing-path") {
    TempTree fixture;
    fixture.add("alice/tool/other/README.md", "no skill here\n");
    LocalFixtureFetcher fetcher(fixture.root);

    IndexEntry gone{Platform::git_folder, "nobody", "nothing", "s", {}};
    CHECK(fetch_skill(gone, FetchBudget{}, fetcher, 0).repo_status == FetchStatus::missing_repo);

    IndexEntry stale{Platform::git_folder, "alice", "tool", "skills/removed", {}};
    auto r = fetch_skill(stale, FetchBudget{}, fetcher, 0);
    CHECK(r.repo_status == FetchStatus::ok);
    REQUIRE(r.roots.size() == 1);
    CHECK(r.roots[0].status == FetchStatus::missing_path);
    CHECK_FALSE(r.roots[0].artifact.has_value());
}

TEST_CASE("fetch_skill reports auth-required from the fixture marker") {
    TempTree fixture;
    fixture.add("corp/private/.auth_required", "");
    fixture.add("corp/private/SKILL.md", kManifest);
    LocalFixtureFetcher fetcher(fixture.root);
    IndexEntry entry{Platform::git_root, "corp", "private", "", {}};
    CHECK(fetch_skill(entry, FetchBudget{}, fetcher, 0).repo_status == FetchStatus::auth_required);
}

TEST_CASE("git-root entries expand to every discovered skill") {
    TempTree fixture;
    fixture.add("bob/pack/SKILL.md", kManifest);
    fixture.add("bob/pack/extra/SKILL.md", kManifest);
    fixture.add("bob/pack/extra/scripts/a.sh", "echo hi\n");
    LocalFixtureFetcher fetcher(fixture.root);

    IndexEntry entry{Platform::git_root, "bob", "pack", "", {}};
    auto r = fetch_skill(entry, FetchBudget{}, fetcher, 0);
    CHECK(r.repo_status == FetchStatus::ok);
    REQUIRE(r.roots.size() == 2);
    CHECK(r.roots[0].subpath == "");
    CHECK(r.roots[1].subpath == "extra");
    // The root-level artifact contains the whole tree; the nested one is rebased.
    CHECK(r.roots[1].artifact->find("scripts/a.sh") != nullptr);
}

TEST_CASE("size budget rejects oversized skill directories, never partial artifacts") {
    TempTree fixture;
    fixture.add("alice/fat/skill/SKILL.md", kManifest);
    fixture.add("alice/fat/skill/big.bin", std::string(4096, 'x'));
    LocalFixtureFetcher fetcher(fixture.root);

    FetchBudget small;
    small.max_skill_dir_bytes = 1024;
    IndexEntry entry{Platform::git_folder, "alice", "fat", "skill", {}};
    auto r = fetch_skill(entry, small, fetcher, 0);
    REQUIRE(r.roots.size() == 1);
    CHECK(r.roots[0].status == FetchStatus::size_exceeded);
    CHECK_FALSE(r.roots[0].artifact.has_value());

    FetchBudget enough;
    enough.max_skill_dir_bytes = 1 << 20;
    r = fetch_skill(entry, enough, fetcher, 0);
    CHECK(r.roots[0].status == FetchStatus::ok);
}

namespace {

// Fetcher that blocks long enough to trip a small timeout budget.
class SlowFetcher : public RepoFetcher {
public:
    RepoFetchResult fetch(const std::string&, const std::string&, const FetchBudget&) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        return {FetchStatus::ok, FileTree{{"SKILL.md", kManifest}}};
    }
};

}  // namespace

TEST_CASE("clone timeout is enforced around the fetcher call") {
    SlowFetcher slow;
    FetchBudget budget;
    budget.clone_timeout = std::chrono::milliseconds(30);
    IndexEntry entry{Platform::git_root, "x", "y", "", {}};
    auto r = fetch_skill(entry, budget, slow, 0);
    CHECK(r.repo_status == FetchStatus::timeout);
    CHECK(r.roots.empty());
    // Allow the detached worker to finish before tearing down.
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
}

TEST_CASE("filter_candidates matches lowercase keywords, order-preserving, dedup") {
    std::vector<RepoEvent> events = {
        {"r1", "agent-skills-pack", {}},
        {"r2", "weather-app", {}},
        {"r1", "agent-skills-pack", {}},  // duplicate event
        {"r3", "misc", {{"topic", "Claude SKILL collection"}}},
    };
    auto hits = filter_candidates(events, {"skill"});
    CHECK(hits == std::vector<std::string>{"r1", "r3"});

    CHECK(filter_candidates(events, {}).empty());
}

TEST_CASE("filter_candidates finds exactly the planted matches") {
    std::vector<RepoEvent> events;
    std::vector<std::string> planted;
    for (int i = 0; i < 10000; ++i) {
        std::string id = "repo-" + std::to_string(i);
        if (i % 271 == 0) {  // 37 planted matches in 10,000
            events.push_back({id, "awesome skill set " + std::to_string(i), {}});
            planted.push_back(id);
        } else {
            events.push_back({id, "unrelated project " + std::to_string(i), {}});
        }
    }
    auto hits = filter_candidates(events, {"skill"});
    CHECK(hits == planted);
    CHECK(hits.size() == 37);
}

TEST_CASE("run_ingest writes one catalog record per resolved skill root") {
    TempTree fixture;
    fixture.add("a/r1/SKILL.md", kManifest);
    fixture.add("b/r2/s/SKILL.md", std::string(kManifest) + "different\n");
    fixture.add("b/r2/s/extra.txt", "x");
    LocalFixtureFetcher fetcher(fixture.root);

    TempTree store_dir;
    Store store(store_dir.root, [] { return std::int64_t{1}; });

    std::vector<IndexEntry> entries = {
        {Platform::git_root, "a", "r1", "", {}},
        {Platform::git_folder, "b", "r2", "s", {}},
        {Platform::git_folder, "missing", "repo", "s", {}},
    };
    auto stats = run_ingest(entries, FetchBudget{}, fetcher, store, 2);
    CHECK(stats.entries == 3);
    CHECK(stats.artifacts_stored == 2);
    CHECK(stats.failures == 1);
    CHECK(store.read_catalog().size() == 3);
    CHECK(store.list_digests().size() == 2);
}
