#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillguard/artifact.hpp"
#include "skillguard/public_suffix.hpp"
#include "skillguard/rule_scanner.hpp"

namespace skillguard {

inline constexpr const char* kQuestionnaireVersion = "1";

// The 25-feature behavioral questionnaire, grouped as: system interaction,
// network, credentials, persistence, evasion, financial/abuse, meta.
struct FeatureVector {
    // system interaction
    bool exec_shell = false;
    bool writes_outside_skill_dir = false;
    bool reads_sensitive_paths = false;
    bool modifies_agent_config = false;
    bool spawns_background_process = false;
    // network
    bool makes_network_calls = false;
    int contacted_domain_count = 0;
    int unique_ip_count = 0;
    bool uses_raw_ip_endpoints = false;
    bool downloads_executable_content = false;
    // credentials
    bool requests_user_secrets = false;
    bool embeds_credentials = false;
    bool transmits_credentials = false;
    // persistence
    bool installs_scheduled_task = false;
    bool adds_startup_hook = false;
    bool writes_agent_memory = false;
    // evasion
    bool obfuscated_payloads = false;
    bool disables_logging = false;
    bool conditional_time_or_env_triggers = false;
    bool instructs_agent_to_hide_actions = false;
    // financial/abuse
    bool references_crypto_wallets = false;
    bool redirects_payments = false;
    bool promotes_external_paid_service = false;
    // meta
    bool prompt_injection_in_manifest = false;
    bool claims_capability_mismatch = false;

    bool operator==(const FeatureVector&) const = default;
};

// Canonical feature names in declaration order; exactly 25.
const std::vector<std::string>& feature_names();

std::string feature_vector_to_json(const FeatureVector& v);
// Strict: all 25 keys present with correct types, counts >= 0, no extras.
std::optional<FeatureVector> feature_vector_from_json(const std::string& json_text,
                                                      std::string* error = nullptr);

struct RiskAssessment {
    std::string digest;  // hex; ties the assessment to a scan report
    FeatureVector vector;
    int risk = 1;  // 1..5
    std::vector<std::string> rationale;
};

struct BackendUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedBackendAnswer : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DigestMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class FeatureBackend {
public:
    virtual ~FeatureBackend() = default;
    virtual FeatureVector extract(const SkillArtifact& artifact) = 0;
};

// Deterministic backend answering the questionnaire from static-analysis and
// rule-scanner signals. Pure; parallel-safe.
class HeuristicFeatureBackend : public FeatureBackend {
public:
    explicit HeuristicFeatureBackend(const PublicSuffixList* psl = nullptr);
    FeatureVector extract(const SkillArtifact& artifact) override;

private:
    const PublicSuffixList* psl_;
};

// Wire contract (HTTP POST, JSON):
//   request  {questionnaire_version, skill_manifest_excerpt, file_listing,
//             script_excerpts}
//   response {features: {<25 names>: value}}
// Each artifact gets a fresh session (connection + session id); a response
// failing schema validation is retried once, then MalformedBackendAnswer.
class RemoteFeatureBackend : public FeatureBackend {
public:
    struct HttpResponse {
        int status = 0;
        std::string body;
    };
    using Transport = std::function<HttpResponse(const std::string& url, const std::string& body,
                                                 const std::string& session_id)>;

    explicit RemoteFeatureBackend(std::string endpoint_url, Transport transport = {});
    FeatureVector extract(const SkillArtifact& artifact) override;

    static std::string build_request(const SkillArtifact& artifact);

private:
    std::string endpoint_;
    Transport transport_;
    std::uint64_t session_counter_ = 0;
};

FeatureVector extract_features(const SkillArtifact& artifact, FeatureBackend& backend);

// Deterministic mapping to the 1..5 risk scale: one point per triggered
// feature group, double weight for evasion and for credential transmission,
// risk = 1 + min(4, weighted count). See docs/formats.md for the table.
RiskAssessment risk_score(const FeatureVector& vector);

// HIGH/CRITICAL scan outcome AND risk strictly above three.
bool is_flagged(const ScanReport& report, const RiskAssessment& assessment);

}  // namespace skillguard
