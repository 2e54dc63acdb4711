#include <doctest.h>

#include <filesystem>
#include <unistd.h>

#include "skillguard/hijack.hpp"
#include "skillguard/util.hpp"

using namespace skillguard;
namespace fs = std::filesystem;

namespace {

struct ScenarioFile {
    fs::path path;
    explicit ScenarioFile(const std::string& content) {
        path = fs::temp_directory_path() /
               ("sg-hijack-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++) + ".jsonl");
        write_file(path, content);
    }
    ~ScenarioFile() { fs::remove(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

IndexEntry entry(const std::string& owner, const std::string& repo,
                 std::map<std::string, std::string> meta = {}) {
    IndexEntry e;
    e.platform = Platform::git_folder;
    e.owner = owner;
    e.repository = repo;
    e.subpath = "skills/x";
    e.listing_metadata = std::move(meta);
    return e;
}

constexpr const char* kScenarios = R"({"owner": "alive", "repo": "tool", "repo_lookup": "ok", "account_lookup": "exists"}
{"owner": "old", "repo": "app", "repo_lookup": {"redirect": {"owner": "neo", "repo": "app"}}, "account_lookup": "not_found"}
{"owner": "renamed", "repo": "kit", "repo_lookup": {"redirect": {"owner": "renamed2", "repo": "kit"}}, "account_lookup": "exists"}
{"owner": "half", "repo": "gone", "repo_lookup": "not_found", "account_lookup": "exists"}
{"owner": "vanished", "repo": "ware", "repo_lookup": "not_found", "account_lookup": "not_found"}
{"owner": "popular", "repo": "lib", "repo_lookup": {"redirect": {"owner": "new", "repo": "lib"}}, "account_lookup": "not_found"}
{"owner": "starred", "repo": "repo", "repo_lookup": {"redirect": {"owner": "s2", "repo": "repo"}}, "account_lookup": "not_found"}
{"owner": "flaky", "repo": "net", "repo_lookup": "unavailable", "account_lookup": "exists"}
)";

}  // namespace

TEST_CASE("probe maps forge answers to reference states") {
    ScenarioFile f(kScenarios);
    auto forge = ReplayForgeClient::load(f.path);

    auto ok = probe_reference(entry("alive", "tool"), forge);
    CHECK(ok.state == RefState::ok);
    CHECK_FALSE(ok.owner_name_free.has_value());

    auto redirected = probe_reference(entry("old", "app"), forge);
    CHECK(redirected.state == RefState::redirected);
    CHECK(redirected.new_owner == "neo");
    CHECK(redirected.owner_name_free == true);

    auto taken = probe_reference(entry("renamed", "kit"), forge);
    CHECK(taken.state == RefState::redirected);
    CHECK(taken.owner_name_free == false);

    auto half = probe_reference(entry("half", "gone"), forge);
    CHECK(half.state == RefState::missing_repo_owner_exists);
    CHECK(half.owner_name_free == false);

    auto vanished = probe_reference(entry("vanished", "ware"), forge);
    CHECK(vanished.state == RefState::missing_owner);
    CHECK(vanished.owner_name_free == true);

    CHECK_THROWS_AS(probe_reference(entry("flaky", "net"), forge), ForgeUnavailable);
}

TEST_CASE("classification table") {
    ReferenceStatus ok;
    ok.state = RefState::ok;
    CHECK(classify_hijackability(ok, std::nullopt).verdict == HijackVerdictKind::safe);

    ReferenceStatus owner_taken;
    owner_taken.state = RefState::redirected;
    owner_taken.owner_name_free = false;
    CHECK(classify_hijackability(owner_taken, std::nullopt).verdict == HijackVerdictKind::safe);

    // vulnerable with elevated impact at 159 stars
    ReferenceStatus starred;
    starred.state = RefState::redirected;
    starred.owner_name_free = true;
    starred.stars = 159;
    auto verdict = classify_hijackability(starred, std::nullopt);
    CHECK(verdict.verdict == HijackVerdictKind::vulnerable);
    CHECK(verdict.impact == Impact::elevated);

    // below the five-star bar: low impact
    ReferenceStatus small;
    small.state = RefState::missing_owner;
    small.owner_name_free = true;
    small.stars = 2;
    verdict = classify_hijackability(small, std::nullopt);
    CHECK(verdict.verdict == HijackVerdictKind::vulnerable);
    CHECK(verdict.impact == Impact::low);

    // retirement protection when installs meet the threshold
    ReferenceStatus popular;
    popular.state = RefState::redirected;
    popular.owner_name_free = true;
    popular.installs = 50'000;
    verdict = classify_hijackability(popular, 10'000);
    CHECK(verdict.verdict == HijackVerdictKind::possibly_protected);

    // unknown threshold never downgrades
    verdict = classify_hijackability(popular, std::nullopt);
    CHECK(verdict.verdict == HijackVerdictKind::vulnerable);

    // threshold known but installs unknown: stays vulnerable
    ReferenceStatus unknown_installs;
    unknown_installs.state = RefState::missing_owner;
    unknown_installs.owner_name_free = true;
    verdict = classify_hijackability(unknown_installs, 10'000);
    CHECK(verdict.verdict == HijackVerdictKind::vulnerable);
}

TEST_CASE("classification never returns vulnerable for resolvable references") {
    for (auto stars : {std::optional<std::int64_t>{}, std::optional<std::int64_t>{500}}) {
        ReferenceStatus ok;
        ok.state = RefState::ok;
        ok.stars = stars;
        CHECK(classify_hijackability(ok, std::nullopt).verdict != HijackVerdictKind::vulnerable);
    }
}

TEST_CASE("classification is deterministic") {
    ReferenceStatus s;
    s.state = RefState::missing_owner;
    s.owner_name_free = true;
    s.stars = 7;
    auto v1 = classify_hijackability(s, 1000);
    auto v2 = classify_hijackability(s, 1000);
    CHECK(v1.verdict == v2.verdict);
    CHECK(v1.impact == v2.impact);
    CHECK(v1.rationale == v2.rationale);
}

TEST_CASE("audit groups by repository and summarizes installs") {
    ScenarioFile f(kScenarios);
    auto forge = ReplayForgeClient::load(f.path);

    // 10 entries: 7 reference the two vulnerable repos (old/app, vanished/ware)
    std::vector<IndexEntry> entries = {
        entry("old", "app", {{"installs", "25"}, {"stars", "3"}}),
        entry("old", "app", {{"installs", "2032"}, {"stars", "3"}}),
        entry("old", "app"),
        entry("old", "app"),
        entry("vanished", "ware", {{"installs", "7"}}),
        entry("vanished", "ware"),
        entry("vanished", "ware"),
        entry("alive", "tool", {{"installs", "99999"}}),
        entry("renamed", "kit"),
        entry("half", "gone"),
    };
    auto report = audit_index(entries, forge, std::nullopt);
    REQUIRE(report.entries.size() == 10);
    CHECK(report.summary.vulnerable_repos == 2);
    CHECK(report.summary.affected_skills == 7);
    // installs over vulnerable entries: {7, 25, 2032} -> lower median 25, max 2032
    CHECK(report.summary.installs_median == 25);
    CHECK(report.summary.installs_max == 2032);
    CHECK(report.summary.transport_errors == 0);
}

TEST_CASE("audit with all-ok index reports zero vulnerable") {
    ScenarioFile f(R"({"owner": "a", "repo": "r", "repo_lookup": "ok", "account_lookup": "exists"}
)");
    auto forge = ReplayForgeClient::load(f.path);
    std::vector<IndexEntry> entries = {entry("a", "r"), entry("a", "r")};
    auto report = audit_index(entries, forge, std::nullopt);
    CHECK(report.summary.vulnerable_repos == 0);
    CHECK(report.summary.affected_skills == 0);
    CHECK_FALSE(report.summary.installs_median.has_value());
}

TEST_CASE("audit fixture with installs 25 and 2032 lands median 25 max 2032") {
    ScenarioFile f(R"({"owner": "gone", "repo": "x", "repo_lookup": "not_found", "account_lookup": "not_found"}
)");
    auto forge = ReplayForgeClient::load(f.path);
    std::vector<IndexEntry> entries = {
        entry("gone", "x", {{"installs", "25"}}),
        entry("gone", "x", {{"installs", "2032"}}),
    };
    auto report = audit_index(entries, forge, std::nullopt);
    CHECK(report.summary.installs_median == 25);
    CHECK(report.summary.installs_max == 2032);
    CHECK(report.summary.affected_skills == 2);

    // exhaustive recount of affected skills over vulnerable repos
    std::size_t recount = 0;
    for (const auto& e : report.entries) {
        if (e.verdict && e.verdict->verdict == HijackVerdictKind::vulnerable) ++recount;
    }
    CHECK(recount == report.summary.affected_skills);
}

TEST_CASE("transport errors are isolated per repository, not fatal") {
    ScenarioFile f(kScenarios);
    auto forge = ReplayForgeClient::load(f.path);
    std::vector<IndexEntry> entries = {entry("flaky", "net"), entry("alive", "tool")};
    auto report = audit_index(entries, forge, std::nullopt);
    REQUIRE(report.entries.size() == 2);
    CHECK(report.entries[0].forge_unavailable);
    CHECK_FALSE(report.entries[0].verdict.has_value());
    CHECK(report.entries[1].verdict.has_value());
    CHECK(report.summary.transport_errors == 1);
}
