#include "skillguard/features.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include "skillguard/manifest.hpp"
#include "skillguard/static_analysis.hpp"
#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

namespace {

struct FeatureField {
    const char* name;
    bool FeatureVector::* flag;      // null for counts
    int FeatureVector::* count;      // null for flags
};

const std::vector<FeatureField>& feature_fields() {
    static const std::vector<FeatureField> fields = {
        {"exec_shell", &FeatureVector::exec_shell, nullptr},
        {"writes_outside_skill_dir", &FeatureVector::writes_outside_skill_dir, nullptr},
        {"reads_sensitive_paths", &FeatureVector::reads_sensitive_paths, nullptr},
        {"modifies_agent_config", &FeatureVector::modifies_agent_config, nullptr},
        {"spawns_background_process", &FeatureVector::spawns_background_process, nullptr},
        {"makes_network_calls", &FeatureVector::makes_network_calls, nullptr},
        {"contacted_domain_count", nullptr, &FeatureVector::contacted_domain_count},
        {"unique_ip_count", nullptr, &FeatureVector::unique_ip_count},
        {"uses_raw_ip_endpoints", &FeatureVector::uses_raw_ip_endpoints, nullptr},
        {"downloads_executable_content", &FeatureVector::downloads_executable_content, nullptr},
        {"requests_user_secrets", &FeatureVector::requests_user_secrets, nullptr},
        {"embeds_credentials", &FeatureVector::embeds_credentials, nullptr},
        {"transmits_credentials", &FeatureVector::transmits_credentials, nullptr},
        {"installs_scheduled_task", &FeatureVector::installs_scheduled_task, nullptr},
        {"adds_startup_hook", &FeatureVector::adds_startup_hook, nullptr},
        {"writes_agent_memory", &FeatureVector::writes_agent_memory, nullptr},
        {"obfuscated_payloads", &FeatureVector::obfuscated_payloads, nullptr},
        {"disables_logging", &FeatureVector::disables_logging, nullptr},
        {"conditional_time_or_env_triggers", &FeatureVector::conditional_time_or_env_triggers, nullptr},
        {"instructs_agent_to_hide_actions", &FeatureVector::instructs_agent_to_hide_actions, nullptr},
        {"references_crypto_wallets", &FeatureVector::references_crypto_wallets, nullptr},
        {"redirects_payments", &FeatureVector::redirects_payments, nullptr},
        {"promotes_external_paid_service", &FeatureVector::promotes_external_paid_service, nullptr},
        {"prompt_injection_in_manifest", &FeatureVector::prompt_injection_in_manifest, nullptr},
        {"claims_capability_mismatch", &FeatureVector::claims_capability_mismatch, nullptr},
    };
    return fields;
}

}  // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const FeatureField& f : feature_fields()) v.emplace_back(f.name);
        return v;
    }();
    return names;
}

std::string feature_vector_to_json(const FeatureVector& v) {
    json j = json::object();
    for (const FeatureField& f : feature_fields()) {
        if (f.flag) {
            j[f.name] = v.*(f.flag);
        } else {
            j[f.name] = v.*(f.count);
        }
    }
    return j.dump();
}

std::optional<FeatureVector> feature_vector_from_json(const std::string& json_text,
                                                      std::string* error) {
    auto fail = [&](const std::string& msg) -> std::optional<FeatureVector> {
        if (error) *error = msg;
        return std::nullopt;
    };
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return fail("not a JSON object");
    if (j.size() != feature_fields().size()) {
        return fail("expected exactly " + std::to_string(feature_fields().size()) + " features, got " +
                    std::to_string(j.size()));
    }
    FeatureVector v;
    for (const FeatureField& f : feature_fields()) {
        if (!j.contains(f.name)) return fail(std::string("missing feature: ") + f.name);
        const json& val = j[f.name];
        if (f.flag) {
            if (!val.is_boolean()) return fail(std::string(f.name) + " must be boolean");
            v.*(f.flag) = val.get<bool>();
        } else {
            if (!val.is_number_integer()) return fail(std::string(f.name) + " must be an integer");
            int n = val.get<int>();
            if (n < 0) return fail(std::string(f.name) + " must be >= 0");
            v.*(f.count) = n;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Heuristic backend

namespace {

bool any_file_contains(const SkillArtifact& a, const std::vector<std::string>& tokens,
                       const std::set<std::string>* suffixes = nullptr) {
    for (const SkillFile& f : a.files) {
        if (suffixes && !suffixes->count(f.suffix)) continue;
        for (const std::string& t : tokens) {
            if (f.content.find(t) != std::string::npos) return true;
        }
    }
    return false;
}

bool text_contains_any(const std::string& text, const std::vector<std::string>& tokens) {
    for (const std::string& t : tokens) {
        if (text.find(t) != std::string::npos) return true;
    }
    return false;
}

const std::vector<std::string>& exec_shell_tokens() {
    static const std::vector<std::string> t = {
        "os.system",    "subprocess.",   "child_process", "exec(",  "execSync",
        "popen(",       "system(",       "spawn(",        "sh -c",  "bash -c",
    };
    return t;
}

const std::vector<std::string>& outside_write_tokens() {
    static const std::vector<std::string> t = {
        "> /",  ">> /",  "> ~/",  ">> ~/",  "open('/", "open(\"/", "open('~/", "open(\"~/",
        "shutil.copy('/", "cp / ", "mv / ", "os.remove('/", "rm -rf /",
    };
    return t;
}

const std::vector<std::string>& agent_config_tokens() {
    static const std::vector<std::string> t = {
        ".claude/", "~/.claude", "CLAUDE.md", "AGENTS.md", "~/.codex", "~/.openclaw",
        "openclaw.json", "settings.json",
    };
    return t;
}

const std::vector<std::string>& background_process_tokens() {
    static const std::vector<std::string> t = {
        "nohup ", "setsid ", "disown", "daemon=True", "start_new_session", "& #bg",
    };
    return t;
}

const std::vector<std::string>& user_secret_prompt_tokens() {
    static const std::vector<std::string> t = {
        "enter your api key", "paste your token",     "enter your password",
        "provide your api",    "getpass(",            "read -s",
        "enter your secret",   "paste your api key",
    };
    return t;
}

const std::vector<std::string>& scheduled_task_tokens() {
    static const std::vector<std::string> t = {
        "crontab", "/etc/cron", "schtasks", "launchctl load", "systemd.timer", "OnCalendar",
    };
    return t;
}

const std::vector<std::string>& startup_hook_tokens() {
    static const std::vector<std::string> t = {
        ">> ~/.bashrc", ">> ~/.zshrc",  ">> ~/.profile", "/etc/rc.local",
        "systemctl enable", "Run\\\\",  "LaunchAgents",
    };
    return t;
}

const std::vector<std::string>& agent_memory_tokens() {
    static const std::vector<std::string> t = {
        "MEMORY.md", ".claude/memory", "memory.jsonl", "agent_memory",
    };
    return t;
}

const std::vector<std::string>& obfuscation_tokens() {
    static const std::vector<std::string> t = {
        "base64 -d",    "base64 --decode", "eval(base64", "exec(base64",
        "atob(",        "String.fromCharCode", "exec(compile(", "bytes.fromhex",
        "xxd -r",       "openssl enc -d",
    };
    return t;
}

const std::vector<std::string>& time_env_trigger_tokens() {
    static const std::vector<std::string> t = {
        "if datetime.", "if time.time()", "$(date +", "os.environ.get(\"CI\")",
        "os.environ.get('CI')", "GITHUB_ACTIONS", "time.sleep(3600",
    };
    return t;
}

const std::vector<std::string>& hide_action_phrases() {
    static const std::vector<std::string> t = {
        "do not tell the user", "don't tell the user", "do not mention", "don't mention",
        "do not reveal",        "hide this from",      "without informing", "keep this secret",
    };
    return t;
}

const std::vector<std::string>& crypto_wallet_tokens() {
    static const std::vector<std::string> t = {
        "wallet address", "metamask", "seed phrase", "bitcoin address", "eth address",
        "private key of your wallet",
    };
    return t;
}

const std::vector<std::string>& payment_redirect_tokens() {
    static const std::vector<std::string> t = {
        "send payment to", "redirect payment", "replace the wallet", "payment address to",
        "payout address",
    };
    return t;
}

const std::vector<std::string>& paid_service_tokens() {
    static const std::vector<std::string> t = {
        "upgrade to pro", "purchase a license", "buy credits", "paid plan", "subscription required",
    };
    return t;
}

const std::vector<std::string>& prompt_injection_phrases() {
    static const std::vector<std::string> t = {
        "ignore previous instructions", "ignore all previous instructions",
        "disregard all prior",          "override safety",
        "you must obey",                "system prompt:",
    };
    return t;
}

const std::vector<std::string>& network_claim_words() {
    static const std::vector<std::string> t = {
        "api", "http", "network", "download", "fetch", "remote", "url", "server",
        "sync", "cloud", "request", "endpoint", "webhook", "online",
    };
    return t;
}

bool has_eth_address(const SkillArtifact& a) {
    for (const SkillFile& f : a.files) {
        const std::string& s = f.content;
        for (std::size_t i = 0; i + 42 <= s.size(); ++i) {
            if (s[i] != '0' || s[i + 1] != 'x') continue;
            bool ok = true;
            for (std::size_t k = 2; k < 42; ++k) {
                if (!std::isxdigit(static_cast<unsigned char>(s[i + k]))) {
                    ok = false;
                    break;
                }
            }
            if (ok && (i + 42 == s.size() ||
                       !std::isalnum(static_cast<unsigned char>(s[i + 42])))) {
                return true;
            }
        }
    }
    return false;
}

}  // namespace

HeuristicFeatureBackend::HeuristicFeatureBackend(const PublicSuffixList* psl) : psl_(psl) {}

FeatureVector HeuristicFeatureBackend::extract(const SkillArtifact& artifact) {
    FeatureVector v;
    const auto& script_suffixes = default_script_suffixes();

    auto endpoints = extract_endpoints(artifact);
    std::set<std::string> domains;
    std::set<std::string> ips;
    bool url_with_ip_host = false;
    for (const Endpoint& ep : endpoints) {
        if (ep.kind == EndpointKind::url) {
            if (is_valid_ipv4(ep.host) || is_valid_ipv6(ep.host)) {
                ips.insert(ep.host);
                url_with_ip_host = true;
            } else if (psl_) {
                if (auto d = psl_->etld1(ep.host)) domains.insert(*d);
            } else {
                domains.insert(ep.host);
            }
        } else {
            ips.insert(ep.host);
        }
    }
    v.makes_network_calls =
        !endpoints.empty() || any_file_contains(artifact, outbound_network_tokens(), &script_suffixes);
    v.contacted_domain_count = static_cast<int>(domains.size());
    v.unique_ip_count = static_cast<int>(ips.size());
    v.uses_raw_ip_endpoints = !ips.empty() || url_with_ip_host;

    auto pipeline_findings = scan_pipelines(artifact);
    bool download_to_interpreter = std::any_of(
        pipeline_findings.begin(), pipeline_findings.end(),
        [](const ScanFinding& f) { return f.rule_id == "download-to-interpreter"; });
    bool executable_url = false;
    static const std::vector<std::string> executable_suffixes = {".sh", ".exe", ".bin", ".dll",
                                                                 ".apk", ".deb", ".rpm", ".pyc"};
    for (const Endpoint& ep : endpoints) {
        if (ep.kind != EndpointKind::url) continue;
        for (const std::string& suf : executable_suffixes) {
            if (ep.raw.size() >= suf.size() &&
                ep.raw.compare(ep.raw.size() - suf.size(), suf.size(), suf) == 0) {
                executable_url = true;
            }
        }
    }
    v.downloads_executable_content = download_to_interpreter || executable_url;

    v.exec_shell = any_file_contains(artifact, exec_shell_tokens(), &script_suffixes) ||
                   script_inventory(artifact).counts_by_suffix.count("sh") > 0;
    v.writes_outside_skill_dir = any_file_contains(artifact, outside_write_tokens());
    v.reads_sensitive_paths = any_file_contains(artifact, sensitive_path_tokens());
    v.modifies_agent_config = any_file_contains(artifact, agent_config_tokens(), &script_suffixes);
    v.spawns_background_process = any_file_contains(artifact, background_process_tokens());

    v.requests_user_secrets = [&] {
        for (const SkillFile& f : artifact.files) {
            if (text_contains_any(to_lower(f.content), user_secret_prompt_tokens())) return true;
        }
        return false;
    }();
    // Credential embedding reuses the bundled default detectors only when the
    // pipeline wires them in; the backend itself keys on obvious assignments.
    static const std::vector<std::string> credential_assignment_tokens = {
        "API_KEY=",  "api_key =", "SECRET=",  "secret =", "token =", "TOKEN=",
        "password =", "PASSWORD=", "AKIA",    "ghp_",     "xoxb-",
    };
    v.embeds_credentials = any_file_contains(artifact, credential_assignment_tokens);
    auto behavior = scan_behavior(artifact);
    bool exfil = std::any_of(behavior.begin(), behavior.end(), [](const ScanFinding& f) {
        return f.rule_id == "possible-exfiltration";
    });
    v.transmits_credentials = exfil || (v.embeds_credentials && v.makes_network_calls);

    v.installs_scheduled_task = any_file_contains(artifact, scheduled_task_tokens());
    v.adds_startup_hook = any_file_contains(artifact, startup_hook_tokens());
    v.writes_agent_memory = any_file_contains(artifact, agent_memory_tokens(), &script_suffixes);

    v.obfuscated_payloads = any_file_contains(artifact, obfuscation_tokens());
    v.disables_logging = any_file_contains(artifact, {"unset HISTFILE", "HISTFILE=/dev/null",
                                                      "set +o history", "history -c", "HISTSIZE=0"});
    v.conditional_time_or_env_triggers = any_file_contains(artifact, time_env_trigger_tokens());

    std::string manifest_text = to_lower(artifact.manifest_file().content);
    v.instructs_agent_to_hide_actions = text_contains_any(manifest_text, hide_action_phrases());
    v.prompt_injection_in_manifest = text_contains_any(manifest_text, prompt_injection_phrases());

    v.references_crypto_wallets = [&] {
        for (const SkillFile& f : artifact.files) {
            if (text_contains_any(to_lower(f.content), crypto_wallet_tokens())) return true;
        }
        return has_eth_address(artifact);
    }();
    v.redirects_payments = [&] {
        for (const SkillFile& f : artifact.files) {
            if (text_contains_any(to_lower(f.content), payment_redirect_tokens())) return true;
        }
        return false;
    }();
    v.promotes_external_paid_service = [&] {
        for (const SkillFile& f : artifact.files) {
            if (text_contains_any(to_lower(f.content), paid_service_tokens())) return true;
        }
        return false;
    }();

    // Capability mismatch: the manifest never hints at network use, yet the
    // skill talks to the network.
    auto parsed = parse_manifest(artifact.manifest_file().content);
    if (parsed.ok()) {
        std::string described = to_lower(parsed.manifest->name + " " + parsed.manifest->description);
        bool claims_network = text_contains_any(described, network_claim_words());
        v.claims_capability_mismatch = v.makes_network_calls && !claims_network;
    } else {
        v.claims_capability_mismatch = false;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Remote backend

std::string RemoteFeatureBackend::build_request(const SkillArtifact& artifact) {
    json req;
    req["questionnaire_version"] = kQuestionnaireVersion;
    auto manifest_lines = split_lines(artifact.manifest_file().content);
    if (manifest_lines.size() > 200) manifest_lines.resize(200);
    req["skill_manifest_excerpt"] = join(manifest_lines, "\n");
    json listing = json::array();
    for (const SkillFile& f : artifact.files) listing.push_back(f.path);
    req["file_listing"] = listing;
    json excerpts = json::object();
    for (const SkillFile& f : artifact.files) {
        if (!default_script_suffixes().count(f.suffix)) continue;
        auto lines = split_lines(f.content);
        if (lines.size() > 100) lines.resize(100);
        excerpts[f.path] = join(lines, "\n");
    }
    req["script_excerpts"] = excerpts;
    return req.dump();
}

RemoteFeatureBackend::RemoteFeatureBackend(std::string endpoint_url, Transport transport)
    : endpoint_(std::move(endpoint_url)), transport_(std::move(transport)) {
    if (!transport_) {
        transport_ = [](const std::string& url, const std::string& body,
                        const std::string& session_id) -> HttpResponse {
            // Fresh client per call: one isolated session per artifact.
            std::size_t scheme = url.find("://");
            std::size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
            std::string base = (path_start == std::string::npos) ? url : url.substr(0, path_start);
            std::string path = (path_start == std::string::npos) ? "/" : url.substr(path_start);
            httplib::Client client(base);
            client.set_connection_timeout(10);
            client.set_read_timeout(60);
            httplib::Headers headers = {{"X-Session-Id", session_id}};
            auto res = client.Post(path, headers, body, "application/json");
            if (!res) return {0, ""};
            return {res->status, res->body};
        };
    }
}

FeatureVector RemoteFeatureBackend::extract(const SkillArtifact& artifact) {
    std::string request = build_request(artifact);
    std::string session_id = artifact.digest.hex() + "-" + std::to_string(++session_counter_);
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        HttpResponse res = transport_(endpoint_, request, session_id + "-" + std::to_string(attempt));
        if (res.status == 0) throw BackendUnavailable("no response from " + endpoint_);
        if (res.status != 200) {
            last_error = "status " + std::to_string(res.status);
            continue;
        }
        json j = json::parse(res.body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("features")) {
            last_error = "response missing features object";
            continue;
        }
        std::string schema_error;
        auto v = feature_vector_from_json(j["features"].dump(), &schema_error);
        if (v) return *v;
        last_error = schema_error;
    }
    throw MalformedBackendAnswer("backend answer failed schema validation: " + last_error);
}

FeatureVector extract_features(const SkillArtifact& artifact, FeatureBackend& backend) {
    return backend.extract(artifact);
}

// ---------------------------------------------------------------------------
// Risk mapping

namespace {

struct GroupTrigger {
    const char* name;
    bool triggered;
    int weight;
    std::string detail;
};

}  // namespace

RiskAssessment risk_score(const FeatureVector& v) {
    auto describe = [](std::initializer_list<std::pair<const char*, bool>> items) {
        std::vector<std::string> hits;
        for (const auto& [name, on] : items) {
            if (on) hits.emplace_back(name);
        }
        return join(hits, ", ");
    };

    bool system_triggered = v.exec_shell || v.writes_outside_skill_dir || v.reads_sensitive_paths ||
                            v.modifies_agent_config || v.spawns_background_process;
    bool network_triggered = v.makes_network_calls || v.contacted_domain_count > 0 ||
                             v.unique_ip_count > 0 || v.uses_raw_ip_endpoints ||
                             v.downloads_executable_content;
    bool credentials_triggered =
        v.requests_user_secrets || v.embeds_credentials || v.transmits_credentials;
    bool persistence_triggered =
        v.installs_scheduled_task || v.adds_startup_hook || v.writes_agent_memory;
    bool evasion_triggered = v.obfuscated_payloads || v.disables_logging ||
                             v.conditional_time_or_env_triggers || v.instructs_agent_to_hide_actions;
    bool financial_triggered =
        v.references_crypto_wallets || v.redirects_payments || v.promotes_external_paid_service;
    bool meta_triggered = v.prompt_injection_in_manifest || v.claims_capability_mismatch;

    std::vector<GroupTrigger> groups = {
        {"system", system_triggered, 1,
         describe({{"exec_shell", v.exec_shell},
                   {"writes_outside_skill_dir", v.writes_outside_skill_dir},
                   {"reads_sensitive_paths", v.reads_sensitive_paths},
                   {"modifies_agent_config", v.modifies_agent_config},
                   {"spawns_background_process", v.spawns_background_process}})},
        {"network", network_triggered, 1,
         describe({{"makes_network_calls", v.makes_network_calls},
                   {"contacted_domain_count", v.contacted_domain_count > 0},
                   {"unique_ip_count", v.unique_ip_count > 0},
                   {"uses_raw_ip_endpoints", v.uses_raw_ip_endpoints},
                   {"downloads_executable_content", v.downloads_executable_content}})},
        // Credential transmission is the strong signal; mere presence of a
        // credential weighs like any other group.
        {"credentials", credentials_triggered, v.transmits_credentials ? 2 : 1,
         describe({{"requests_user_secrets", v.requests_user_secrets},
                   {"embeds_credentials", v.embeds_credentials},
                   {"transmits_credentials", v.transmits_credentials}})},
        {"persistence", persistence_triggered, 1,
         describe({{"installs_scheduled_task", v.installs_scheduled_task},
                   {"adds_startup_hook", v.adds_startup_hook},
                   {"writes_agent_memory", v.writes_agent_memory}})},
        {"evasion", evasion_triggered, 2,
         describe({{"obfuscated_payloads", v.obfuscated_payloads},
                   {"disables_logging", v.disables_logging},
                   {"conditional_time_or_env_triggers", v.conditional_time_or_env_triggers},
                   {"instructs_agent_to_hide_actions", v.instructs_agent_to_hide_actions}})},
        {"financial", financial_triggered, 1,
         describe({{"references_crypto_wallets", v.references_crypto_wallets},
                   {"redirects_payments", v.redirects_payments},
                   {"promotes_external_paid_service", v.promotes_external_paid_service}})},
        {"meta", meta_triggered, 1,
         describe({{"prompt_injection_in_manifest", v.prompt_injection_in_manifest},
                   {"claims_capability_mismatch", v.claims_capability_mismatch}})},
    };

    int weighted = 0;
    RiskAssessment assessment;
    assessment.vector = v;
    for (const GroupTrigger& g : groups) {
        if (!g.triggered) continue;
        weighted += g.weight;
        assessment.rationale.push_back(std::string(g.name) + ": " + g.detail);
    }
    assessment.risk = 1 + std::min(4, weighted);
    return assessment;
}

bool is_flagged(const ScanReport& report, const RiskAssessment& assessment) {
    if (report.digest != assessment.digest) {
        throw DigestMismatch("scan report digest " + report.digest +
                             " != assessment digest " + assessment.digest);
    }
    bool severity_gate = report.overall == Overall::HIGH || report.overall == Overall::CRITICAL;
    return severity_gate && assessment.risk > 3;
}

}  // namespace skillguard
