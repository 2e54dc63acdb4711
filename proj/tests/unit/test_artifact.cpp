#include <doctest.h>

#include <algorithm>
#include <random>

#include "skillguard/artifact.hpp"

using namespace skillguard;

namespace {

// Frozen expected digests, computed with an independent SHA-256
// implementation (python hashlib) over the documented canonical encoding.
constexpr const char* kEmptyDigest =
    "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
constexpr const char* kAx = "0d3a1d9fd45c3d9477b3f26a15e77e83a92df635e421f4bf3ba407b3b6e9ce58";
constexpr const char* kA2x = "3861cb20ffb5fc01c1f6578f0f592b2615dca21de68a27e70cd992fd8ba8356f";
constexpr const char* kAB = "eac519f4e17fee83ccc154a11902b85d6661e7691d998a4ed4a18ed8c1ea2535";

std::vector<SkillFile> files_of(std::initializer_list<std::pair<const char*, const char*>> kv) {
    std::vector<SkillFile> out;
    for (const auto& [path, content] : kv) out.push_back(make_skill_file(path, content));
    return out;
}

}  // namespace

TEST_CASE("digest of the empty file set") {
    CHECK(artifact_digest({}).hex() == kEmptyDigest);
}

TEST_CASE("digest frozen values") {
    CHECK(artifact_digest(files_of({{"a.txt", "x"}})).hex() == kAx);
    CHECK(artifact_digest(files_of({{"a2.txt", "x"}})).hex() == kA2x);
    CHECK(artifact_digest(files_of({{"a.txt", "x"}, {"b.txt", "y"}})).hex() == kAB);
}

TEST_CASE("digest is independent of input iteration order") {
    auto d1 = artifact_digest(files_of({{"a.txt", "x"}, {"b.txt", "y"}}));
    auto d2 = artifact_digest(files_of({{"b.txt", "y"}, {"a.txt", "x"}}));
    CHECK(d1 == d2);
}

TEST_CASE("path changes change the digest") {
    CHECK(artifact_digest(files_of({{"a.txt", "x"}})) !=
          artifact_digest(files_of({{"a2.txt", "x"}})));
}

TEST_CASE("duplicate paths are rejected") {
    CHECK_THROWS_AS(artifact_digest(files_of({{"a.txt", "x"}, {"a.txt", "y"}})), DuplicatePath);
}

TEST_CASE("path validation") {
    CHECK_THROWS_AS(make_skill_file("/abs/path", ""), InvalidPath);
    CHECK_THROWS_AS(make_skill_file("a/../b", ""), InvalidPath);
    CHECK_THROWS_AS(make_skill_file("..", ""), InvalidPath);
    CHECK_THROWS_AS(make_skill_file("", ""), InvalidPath);
    CHECK(make_skill_file("a\\b\\c.txt", "").path == "a/b/c.txt");
    CHECK(make_skill_file("./x.md", "").path == "x.md");
}

TEST_CASE("suffix rules") {
    CHECK(make_skill_file("SKILL.md", "").suffix == "md");
    CHECK(make_skill_file("scripts/run.PY", "").suffix == "py");
    CHECK(make_skill_file("archive.tar.gz", "").suffix == "gz");
    CHECK(make_skill_file("Makefile", "").suffix == "");
    CHECK(make_skill_file("dir.d/noext", "").suffix == "");
    CHECK(make_skill_file("trailingdot.", "").suffix == "");
}

TEST_CASE("canonical encode/decode round-trip") {
    std::vector<SkillFile> files;
    files.push_back(make_skill_file("SKILL.md", "---\nname: a\ndescription: b\n---\n"));
    files.push_back(make_skill_file("scripts/run.py", "print('hi')\n"));
    files.push_back(make_skill_file("data/blob.bin", std::string("\x00\x01\xff", 3)));
    auto decoded = canonical_decode(canonical_encode(files));
    REQUIRE(decoded.size() == files.size());
    std::sort(files.begin(), files.end(),
              [](const SkillFile& a, const SkillFile& b) { return a.path < b.path; });
    for (std::size_t i = 0; i < files.size(); ++i) {
        CHECK(decoded[i].path == files[i].path);
        CHECK(decoded[i].content == files[i].content);
    }
}

TEST_CASE("make_artifact requires SKILL.md") {
    CHECK_THROWS_AS(make_artifact(files_of({{"a.txt", "x"}}), {}), MissingSkillManifest);
    auto a = make_artifact(files_of({{"SKILL.md", "m"}, {"a.txt", "x"}}), {});
    CHECK(a.manifest_file().content == "m");
    CHECK(a.digest == artifact_digest(a.files));
}

TEST_CASE("dedup keeps first occurrence and maps all origins") {
    Origin o1{"hosted", "alice", "r1", "", 1};
    Origin o2{"git-folder", "bob", "r2", "s", 2};
    Origin o3{"git-root", "carol", "r3", "", 3};
    auto a = make_artifact(files_of({{"SKILL.md", "same"}}), o1);
    auto a_dup = make_artifact(files_of({{"SKILL.md", "same"}}), o2);
    auto b = make_artifact(files_of({{"SKILL.md", "different"}}), o3);

    auto r = dedup({a, a_dup, b});
    REQUIRE(r.unique.size() == 2);
    CHECK(r.unique[0].origin == o1);
    CHECK(r.unique[1].origin == o3);
    REQUIRE(r.duplicate_map.at(a.digest.hex()).size() == 2);
    CHECK(r.duplicate_map.at(a.digest.hex())[0] == o1);
    CHECK(r.duplicate_map.at(a.digest.hex())[1] == o2);
    CHECK(r.duplicate_map.at(b.digest.hex()).size() == 1);
}

TEST_CASE("dedup of empty input") {
    auto r = dedup({});
    CHECK(r.unique.empty());
    CHECK(r.duplicate_map.empty());
}

TEST_CASE("property: permutation invariance, byte sensitivity, dedup idempotence") {
    std::mt19937 rng(1234);
    std::uniform_int_distribution<int> file_count(1, 6);
    std::uniform_int_distribution<int> content_len(0, 64);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> name_len(1, 10);

    for (int iter = 0; iter < 300; ++iter) {
        std::vector<SkillFile> files;
        files.push_back(make_skill_file("SKILL.md", "x"));
        int n = file_count(rng);
        for (int i = 0; i < n; ++i) {
            std::string name = "f" + std::to_string(i) + "_";
            for (int k = 0, len = name_len(rng); k < len; ++k) {
                name += static_cast<char>('a' + byte(rng) % 26);
            }
            std::string content;
            for (int k = 0, len = content_len(rng); k < len; ++k) {
                content += static_cast<char>(byte(rng));
            }
            files.push_back(make_skill_file(name, content));
        }

        Digest256 original = artifact_digest(files);
        std::shuffle(files.begin(), files.end(), rng);
        CHECK(artifact_digest(files) == original);

        // single-byte mutation
        std::uniform_int_distribution<std::size_t> pick_file(0, files.size() - 1);
        std::size_t fi = pick_file(rng);
        if (!files[fi].content.empty()) {
            std::uniform_int_distribution<std::size_t> pick_byte(0, files[fi].content.size() - 1);
            std::size_t bi = pick_byte(rng);
            files[fi].content[bi] = static_cast<char>(files[fi].content[bi] ^ 0x5A);
            CHECK(artifact_digest(files) != original);
            files[fi].content[bi] = static_cast<char>(files[fi].content[bi] ^ 0x5A);
        }

        // path mutation
        std::string saved = files[fi].path;
        std::string saved_content = files[fi].content;
        files[fi] = make_skill_file(saved + "x", saved_content);
        CHECK(artifact_digest(files) != original);
        files[fi] = make_skill_file(saved, saved_content);
        CHECK(artifact_digest(files) == original);
    }

    // dedup idempotence over randomized duplicated artifacts
    std::vector<SkillArtifact> artifacts;
    for (int i = 0; i < 50; ++i) {
        std::string content = "content" + std::to_string(i);
        auto files = files_of({{"SKILL.md", content.c_str()}});
        artifacts.push_back(make_artifact(files, Origin{"hosted", "o", "r", "", i}));
        artifacts.push_back(make_artifact(std::move(files), Origin{"hosted", "o2", "r2", "", i}));
    }
    std::shuffle(artifacts.begin(), artifacts.end(), rng);
    auto once = dedup(artifacts);
    CHECK(once.unique.size() == 50);
    auto twice = dedup(once.unique);
    REQUIRE(twice.unique.size() == once.unique.size());
    for (std::size_t i = 0; i < once.unique.size(); ++i) {
        CHECK(twice.unique[i].digest == once.unique[i].digest);
    }
}
