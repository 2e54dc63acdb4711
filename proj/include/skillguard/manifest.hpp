#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace skillguard {

// Parsed SKILL.md: frontmatter between a leading "---" line and the next
// "---" line, flat "key: value" pairs, markdown body after the closing
// delimiter. name/description are lifted out; other keys keep source order.
struct SkillManifest {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, std::string>> extra_metadata;
    std::string body;
};

enum class ManifestError {
    none,
    no_frontmatter,
    unterminated_frontmatter,
    missing_name,
    missing_description,
    duplicate_key,
};

std::string_view manifest_error_name(ManifestError e);

struct ManifestParseResult {
    std::optional<SkillManifest> manifest;
    ManifestError error = ManifestError::none;
    std::string detail;  // offending key for duplicate_key

    bool ok() const { return manifest.has_value(); }
};

ManifestParseResult parse_manifest(std::string_view text);

// Emits a SKILL.md that parse_manifest round-trips. Multi-line metadata
// values are not representable and are rejected.
std::string render_manifest(const SkillManifest& m);

}  // namespace skillguard
