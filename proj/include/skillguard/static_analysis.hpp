#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillguard/artifact.hpp"
#include "skillguard/public_suffix.hpp"

namespace skillguard {

enum class EndpointKind { url, ipv4, ipv6 };
enum class Continent { NA, EU, AS, SA, AF, OC, AN, unknown };

std::string_view endpoint_kind_name(EndpointKind k);
std::string_view continent_name(Continent c);
std::optional<Continent> continent_from_name(std::string_view name);

struct Endpoint {
    std::string raw;
    EndpointKind kind = EndpointKind::url;
    std::string host;
    std::optional<std::string> etld1;  // nullopt = unresolved
    Continent continent = Continent::unknown;
    std::string source_path;
};

// Scans every file (binary content included) for http(s) URLs, bare IPv4
// dotted quads with in-range octets, and bracketed or bare colon-form IPv6.
// Duplicates per (raw, source_path) are removed; order is (path, offset).
// etld1/continent are left unresolved; see annotate_endpoints.
std::vector<Endpoint> extract_endpoints(const SkillArtifact& artifact);

std::optional<std::string> resolve_etld1(std::string_view host, const PublicSuffixList& psl);

using GeoTable = std::map<std::string, Continent>;
GeoTable load_geo_table(const std::filesystem::path& path);  // JSONL {etld1, continent}
Continent geolocate(const std::string& etld1, const GeoTable& table);

// Fills etld1 and continent in place.
void annotate_endpoints(std::vector<Endpoint>& endpoints, const PublicSuffixList& psl,
                        const GeoTable& geo);

std::set<std::string> load_tracker_list(const std::filesystem::path& path);  // newline eTLD+1

struct TrackerMatch {
    Endpoint endpoint;
    std::string tracker_domain;
};
std::vector<TrackerMatch> match_trackers(const std::vector<Endpoint>& endpoints,
                                         const std::set<std::string>& tracker_domains);

const std::set<std::string>& default_script_suffixes();  // py sh js ts bash zsh ps1 rb

struct ScriptInventory {
    std::map<std::string, int> counts_by_suffix;
    bool has_scripts = false;
    std::vector<std::string> nonconforming_scripts;  // script files outside scripts/
};

ScriptInventory script_inventory(const SkillArtifact& artifact,
                                 const std::set<std::string>& script_suffixes = default_script_suffixes());

// --- secrets ---

enum class SecretValidation { not_attempted, valid, invalid, indeterminate };
std::string_view secret_validation_name(SecretValidation v);

struct ValidationDescriptor {
    std::string method;
    std::string url_template;
};

struct DetectorRule {
    std::string detector_id;
    std::string pattern;  // ECMAScript regex
    std::optional<ValidationDescriptor> validation;
};

struct MalformedDetector : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<DetectorRule> load_detectors(const std::filesystem::path& path);
std::vector<DetectorRule> parse_detectors(std::string_view json_text);

struct SecretFinding {
    std::string detector_id;
    std::string source_path;
    int line = 0;  // 1-based
    std::string redacted_match;
    SecretValidation validation = SecretValidation::not_attempted;
};

// Verdict source for validate mode. Implementations own all network use; the
// scanner itself never talks to the net.
class SecretValidator {
public:
    virtual ~SecretValidator() = default;
    virtual SecretValidation validate(const DetectorRule& rule, const std::string& token) = 0;
};

enum class SecretsMode { offline, validate };

// Offline mode performs zero validation calls and marks findings
// not-attempted. Matches are stored with masked middles only.
std::vector<SecretFinding> detect_secrets(const SkillArtifact& artifact,
                                          const std::vector<DetectorRule>& detectors,
                                          SecretsMode mode, SecretValidator* validator = nullptr);

std::string redact_secret(std::string_view token);

}  // namespace skillguard
