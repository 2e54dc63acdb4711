#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "skillguard/sha256.hpp"

namespace skillguard {

struct InvalidPath : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DuplicatePath : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingSkillManifest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One file inside a skill artifact. Paths are forward-slash separated
// relative paths with no leading slash and no ".." segments; suffix is the
// lowercase extension after the final '.' of the final segment, or empty.
struct SkillFile {
    std::string path;
    std::string content;
    std::string suffix;
};

// Normalizes backslashes to '/', strips a leading "./", validates, and
// computes the suffix. Throws InvalidPath.
SkillFile make_skill_file(std::string_view path, std::string content);

std::string path_suffix(std::string_view path);

struct Origin {
    std::string platform;
    std::string owner;
    std::string repository;
    std::string subpath;
    std::int64_t retrieved_at = 0;

    // "owner/repository" grouping key used for repo-level aggregation.
    std::string repo_id() const { return owner + "/" + repository; }

    bool operator==(const Origin&) const = default;
};

struct SkillArtifact {
    std::vector<SkillFile> files;  // sorted by path, unique
    Digest256 digest;
    Origin origin;

    const SkillFile* find(std::string_view path) const;
    const SkillFile& manifest_file() const;  // the SKILL.md entry
};

// Canonical encoding: files sorted by path (bytewise); per file the path
// bytes, one 0x00 byte, the 8-byte big-endian content length, then the
// content bytes. The artifact digest is SHA-256 over this encoding.
std::string canonical_encode(std::vector<SkillFile> files);
std::vector<SkillFile> canonical_decode(std::string_view bytes);

// Throws DuplicatePath.
Digest256 artifact_digest(const std::vector<SkillFile>& files);

// Sorts files, verifies path uniqueness and the SKILL.md entry, computes the
// digest. Throws DuplicatePath / MissingSkillManifest.
SkillArtifact make_artifact(std::vector<SkillFile> files, Origin origin);

struct DedupResult {
    std::vector<SkillArtifact> unique;  // first occurrence per digest, input order
    std::map<std::string, std::vector<Origin>> duplicate_map;  // digest hex -> all origins
};

DedupResult dedup(const std::vector<SkillArtifact>& artifacts);

}  // namespace skillguard
