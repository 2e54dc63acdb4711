#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillguard/artifact.hpp"

namespace skillguard {

enum class Severity { LOW, MEDIUM, HIGH, CRITICAL };
// Report-level outcome; NONE when no findings.
enum class Overall { NONE, LOW, MEDIUM, HIGH, CRITICAL };

std::string_view severity_name(Severity s);
std::optional<Severity> severity_from_name(std::string_view name);
std::string_view overall_name(Overall o);
std::optional<Overall> overall_from_name(std::string_view name);
Overall overall_of(Severity s);

enum class ScanModule { static_rules, bytecode_integrity, pipeline, behavioral };
std::string_view scan_module_name(ScanModule m);

struct ScanFinding {
    ScanModule module = ScanModule::static_rules;
    std::string rule_id;
    std::string source_path;
    std::optional<int> line;  // 1-based
    Severity severity = Severity::LOW;
    std::string note;
};

struct ScanReport {
    std::string digest;  // hex
    std::vector<ScanFinding> findings;
    Overall overall = Overall::NONE;
};

struct MalformedRule : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RulePattern {
    enum class Kind { literal, regex } kind = Kind::literal;
    std::string pattern;
    std::regex compiled;  // regex kind only
};

struct StaticRule {
    std::string id;
    Severity severity = Severity::LOW;
    bool match_all = false;  // all-combinator; false = any
    std::vector<RulePattern> patterns;
    std::optional<std::string> file_glob;
};

std::vector<StaticRule> parse_rules(std::string_view json_text);   // throws MalformedRule
std::vector<StaticRule> load_rules(const std::filesystem::path& path);

// One finding per (rule, file) at the first matching location.
std::vector<ScanFinding> scan_static_rules(const SkillArtifact& artifact,
                                           const std::vector<StaticRule>& rules);

// Orphan or mislabeled compiled python artifacts (.pyc).
std::vector<ScanFinding> scan_bytecode_integrity(const SkillArtifact& artifact);

// Dangerous shell pipelines in shell files and markdown fenced code blocks.
std::vector<ScanFinding> scan_pipelines(const SkillArtifact& artifact);

// Lexical dataflow over script files: sensitive reads vs outbound network.
std::vector<ScanFinding> scan_behavior(const SkillArtifact& artifact);

ScanReport scan(const SkillArtifact& artifact, const std::vector<StaticRule>& rules);

// Token tables shared with the heuristic questionnaire backend.
const std::vector<std::string>& sensitive_path_tokens();
const std::vector<std::string>& outbound_network_tokens();

}  // namespace skillguard
