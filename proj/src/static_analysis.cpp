#include "skillguard/static_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include <nlohmann/json.hpp>

#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

std::string_view endpoint_kind_name(EndpointKind k) {
    switch (k) {
        case EndpointKind::url: return "url";
        case EndpointKind::ipv4: return "ipv4";
        case EndpointKind::ipv6: return "ipv6";
    }
    return "unknown";
}

std::string_view continent_name(Continent c) {
    switch (c) {
        case Continent::NA: return "NA";
        case Continent::EU: return "EU";
        case Continent::AS: return "AS";
        case Continent::SA: return "SA";
        case Continent::AF: return "AF";
        case Continent::OC: return "OC";
        case Continent::AN: return "AN";
        case Continent::unknown: return "unknown";
    }
    return "unknown";
}

std::optional<Continent> continent_from_name(std::string_view name) {
    for (Continent c : {Continent::NA, Continent::EU, Continent::AS, Continent::SA, Continent::AF,
                        Continent::OC, Continent::AN, Continent::unknown}) {
        if (continent_name(c) == name) return c;
    }
    return std::nullopt;
}

namespace {

bool is_url_char(char ch) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) return true;
    static const std::string extra = "-._~:/?#[]@!$&'()*+,;=%";
    return extra.find(ch) != std::string::npos;
}

bool is_hexish(char ch) {
    return std::isxdigit(static_cast<unsigned char>(ch));
}

struct Span {
    std::size_t begin, end;
};

bool inside(const std::vector<Span>& spans, std::size_t pos) {
    for (const Span& s : spans) {
        if (pos >= s.begin && pos < s.end) return true;
    }
    return false;
}

// Host of an http(s) URL: authority minus userinfo and port. Bracketed IPv6
// hosts are returned without brackets.
std::string url_host(std::string_view url) {
    std::size_t scheme = url.find("://");
    if (scheme == std::string_view::npos) return "";
    std::string_view rest = url.substr(scheme + 3);
    std::size_t end = rest.find_first_of("/?#");
    std::string_view authority = rest.substr(0, end);
    std::size_t at = authority.rfind('@');
    if (at != std::string_view::npos) authority = authority.substr(at + 1);
    if (!authority.empty() && authority.front() == '[') {
        std::size_t close = authority.find(']');
        if (close == std::string_view::npos) return "";
        return to_lower(authority.substr(1, close - 1));
    }
    std::size_t colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
        std::string_view port = authority.substr(colon + 1);
        bool numeric = !port.empty();
        for (char c : port) {
            if (!std::isdigit(static_cast<unsigned char>(c))) numeric = false;
        }
        if (numeric) authority = authority.substr(0, colon);
    }
    return to_lower(authority);
}

void scan_urls(const std::string& text, const std::string& path, std::vector<Endpoint>& out,
               std::vector<Span>& spans) {
    std::size_t pos = 0;
    while ((pos = text.find("http", pos)) != std::string::npos) {
        std::size_t scheme_end;
        if (text.compare(pos, 8, "https://") == 0) {
            scheme_end = pos + 8;
        } else if (text.compare(pos, 7, "http://") == 0) {
            scheme_end = pos + 7;
        } else {
            ++pos;
            continue;
        }
        // Skip matches embedded in a larger word ("xhttp://...").
        if (pos > 0 && std::isalnum(static_cast<unsigned char>(text[pos - 1]))) {
            pos = scheme_end;
            continue;
        }
        std::size_t end = scheme_end;
        while (end < text.size() && is_url_char(text[end])) ++end;
        // Trailing punctuation belongs to the prose, not the URL.
        static const std::string trailing = ".,;:!?'\")]>";
        while (end > scheme_end && trailing.find(text[end - 1]) != std::string::npos) --end;
        if (end == scheme_end) {
            pos = scheme_end;
            continue;
        }
        std::string raw = text.substr(pos, end - pos);
        std::string host = url_host(raw);
        if (!host.empty()) {
            Endpoint ep;
            ep.raw = raw;
            ep.kind = EndpointKind::url;
            ep.host = host;
            ep.source_path = path;
            out.push_back(std::move(ep));
            spans.push_back({pos, end});
        }
        pos = end;
    }
}

void scan_ipv4(const std::string& text, const std::string& path, std::vector<Endpoint>& out,
               const std::vector<Span>& url_spans) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
        if (i > 0) {
            // '-' and '_' adjacency marks version-like strings (pkg-1.2.3.4).
            char prev = text[i - 1];
            if (std::isalnum(static_cast<unsigned char>(prev)) || prev == '.' || prev == '-' ||
                prev == '_') {
                continue;
            }
        }
        if (inside(url_spans, i)) continue;
        // Greedy parse of d{1,3}(.d{1,3}){3}.
        std::size_t p = i;
        int dots = 0;
        while (p < text.size()) {
            if (std::isdigit(static_cast<unsigned char>(text[p]))) {
                ++p;
            } else if (text[p] == '.' && dots < 3 && p + 1 < text.size() &&
                       std::isdigit(static_cast<unsigned char>(text[p + 1]))) {
                ++dots;
                ++p;
            } else {
                break;
            }
        }
        if (dots != 3) {
            i = p;
            continue;
        }
        std::string candidate = text.substr(i, p - i);
        bool boundary_ok = true;
        if (p < text.size()) {
            char next = text[p];
            if (std::isalnum(static_cast<unsigned char>(next)) || next == '-' || next == '_') {
                boundary_ok = false;
            }
            // A further dotted number means this is a longer version-like string.
            if (next == '.' && p + 1 < text.size() &&
                std::isdigit(static_cast<unsigned char>(text[p + 1]))) {
                boundary_ok = false;
            }
        }
        if (boundary_ok && is_valid_ipv4(candidate)) {
            Endpoint ep;
            ep.raw = candidate;
            ep.kind = EndpointKind::ipv4;
            ep.host = candidate;
            ep.source_path = path;
            out.push_back(std::move(ep));
        }
        i = p;
    }
}

void scan_ipv6(const std::string& text, const std::string& path, std::vector<Endpoint>& out,
               const std::vector<Span>& url_spans) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (inside(url_spans, i)) continue;
        if (text[i] == '[') {
            std::size_t close = text.find(']', i);
            if (close != std::string::npos && close > i + 2) {
                std::string inner = text.substr(i + 1, close - i - 1);
                if (inner.find(':') != std::string::npos && is_valid_ipv6(inner)) {
                    Endpoint ep;
                    ep.raw = text.substr(i, close - i + 1);
                    ep.kind = EndpointKind::ipv6;
                    ep.host = to_lower(inner);
                    ep.source_path = path;
                    out.push_back(std::move(ep));
                    i = close;
                    continue;
                }
            }
        }
        if (!is_hexish(text[i]) && text[i] != ':') continue;
        if (i > 0) {
            char prev = text[i - 1];
            if (std::isalnum(static_cast<unsigned char>(prev)) || prev == ':' || prev == '.') continue;
        }
        std::size_t p = i;
        while (p < text.size() && (is_hexish(text[p]) || text[p] == ':' || text[p] == '.')) ++p;
        std::string candidate = text.substr(i, p - i);
        // Trim trailing separators that belong to prose.
        while (!candidate.empty() && (candidate.back() == '.' || candidate.back() == ':')) {
            // "::" may legitimately end an address; keep a trailing "::" pair.
            if (candidate.size() >= 2 && candidate.compare(candidate.size() - 2, 2, "::") == 0 &&
                candidate.back() == ':') {
                break;
            }
            candidate.pop_back();
        }
        bool boundary_ok = p >= text.size() || (!std::isalnum(static_cast<unsigned char>(text[p])));
        std::size_t colons = static_cast<std::size_t>(std::count(candidate.begin(), candidate.end(), ':'));
        bool has_hex = std::any_of(candidate.begin(), candidate.end(), [](char c) { return is_hexish(c); });
        if (boundary_ok && colons >= 2 && has_hex && is_valid_ipv6(candidate)) {
            Endpoint ep;
            ep.raw = candidate;
            ep.kind = EndpointKind::ipv6;
            ep.host = to_lower(candidate);
            ep.source_path = path;
            out.push_back(std::move(ep));
        }
        i = p;
    }
}

}  // namespace

std::vector<Endpoint> extract_endpoints(const SkillArtifact& artifact) {
    std::vector<Endpoint> out;
    for (const SkillFile& file : artifact.files) {
        std::vector<Endpoint> file_endpoints;
        std::vector<Span> url_spans;
        scan_urls(file.content, file.path, file_endpoints, url_spans);
        std::vector<Endpoint> ip4, ip6;
        scan_ipv4(file.content, file.path, ip4, url_spans);
        scan_ipv6(file.content, file.path, ip6, url_spans);
        // Recover offsets for a stable (path, offset) order: endpoints were
        // collected per scanner in offset order; merge by first occurrence.
        std::vector<std::pair<std::size_t, Endpoint*>> keyed;
        auto key_all = [&](std::vector<Endpoint>& v) {
            std::size_t search_from = 0;
            for (Endpoint& ep : v) {
                std::size_t at = file.content.find(ep.raw, search_from);
                if (at == std::string::npos) at = file.content.find(ep.raw);
                keyed.emplace_back(at, &ep);
                search_from = at + 1;
            }
        };
        key_all(file_endpoints);
        key_all(ip4);
        key_all(ip6);
        std::stable_sort(keyed.begin(), keyed.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::set<std::string> seen;  // raw dedup within this file
        for (auto& [offset, ep] : keyed) {
            if (seen.insert(ep->raw).second) out.push_back(std::move(*ep));
        }
    }
    return out;
}

std::optional<std::string> resolve_etld1(std::string_view host, const PublicSuffixList& psl) {
    return psl.etld1(host);
}

GeoTable load_geo_table(const std::filesystem::path& path) {
    GeoTable table;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read geo table: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        auto c = continent_from_name(j.value("continent", "unknown"));
        table[to_lower(j.value("etld1", ""))] = c.value_or(Continent::unknown);
    }
    return table;
}

Continent geolocate(const std::string& etld1, const GeoTable& table) {
    auto it = table.find(to_lower(etld1));
    return it == table.end() ? Continent::unknown : it->second;
}

void annotate_endpoints(std::vector<Endpoint>& endpoints, const PublicSuffixList& psl,
                        const GeoTable& geo) {
    for (Endpoint& ep : endpoints) {
        ep.etld1 = resolve_etld1(ep.host, psl);
        ep.continent = ep.etld1 ? geolocate(*ep.etld1, geo) : Continent::unknown;
    }
}

std::set<std::string> load_tracker_list(const std::filesystem::path& path) {
    std::set<std::string> out;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read tracker list: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        std::string t = to_lower(trim(line));
        if (t.empty() || t[0] == '#') continue;
        out.insert(t);
    }
    return out;
}

std::vector<TrackerMatch> match_trackers(const std::vector<Endpoint>& endpoints,
                                         const std::set<std::string>& tracker_domains) {
    std::vector<TrackerMatch> out;
    for (const Endpoint& ep : endpoints) {
        if (!ep.etld1) continue;
        if (tracker_domains.count(*ep.etld1)) {
            out.push_back({ep, *ep.etld1});
        }
    }
    return out;
}

const std::set<std::string>& default_script_suffixes() {
    static const std::set<std::string> suffixes = {"py", "sh", "js", "ts", "bash", "zsh", "ps1", "rb"};
    return suffixes;
}

ScriptInventory script_inventory(const SkillArtifact& artifact,
                                 const std::set<std::string>& script_suffixes) {
    ScriptInventory inv;
    int total = 0;
    for (const SkillFile& f : artifact.files) {
        if (!script_suffixes.count(f.suffix)) continue;
        ++inv.counts_by_suffix[f.suffix];
        ++total;
        if (f.path.rfind("scripts/", 0) != 0) inv.nonconforming_scripts.push_back(f.path);
    }
    inv.has_scripts = total > 0;
    return inv;
}

std::string_view secret_validation_name(SecretValidation v) {
    switch (v) {
        case SecretValidation::not_attempted: return "not-attempted";
        case SecretValidation::valid: return "valid";
        case SecretValidation::invalid: return "invalid";
        case SecretValidation::indeterminate: return "indeterminate";
    }
    return "unknown";
}

std::vector<DetectorRule> parse_detectors(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw MalformedDetector("detector file must be a JSON array");
    std::vector<DetectorRule> rules;
    for (const json& item : j) {
        if (!item.is_object() || !item.contains("detector_id") || !item.contains("pattern")) {
            throw MalformedDetector("detector entry needs detector_id and pattern");
        }
        DetectorRule rule;
        rule.detector_id = item["detector_id"].get<std::string>();
        rule.pattern = item["pattern"].get<std::string>();
        try {
            std::regex probe(rule.pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw MalformedDetector("bad pattern in " + rule.detector_id + ": " + e.what());
        }
        if (item.contains("validation") && item["validation"].is_object()) {
            ValidationDescriptor vd;
            vd.method = item["validation"].value("method", "GET");
            vd.url_template = item["validation"].value("url_template", "");
            rule.validation = std::move(vd);
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<DetectorRule> load_detectors(const std::filesystem::path& path) {
    return parse_detectors(read_file(path));
}

std::string redact_secret(std::string_view token) {
    if (token.size() <= 8) return std::string(token.size(), '*');
    return std::string(token.substr(0, 4)) + "****" + std::string(token.substr(token.size() - 4));
}

std::vector<SecretFinding> detect_secrets(const SkillArtifact& artifact,
                                          const std::vector<DetectorRule>& detectors,
                                          SecretsMode mode, SecretValidator* validator) {
    if (mode == SecretsMode::validate && validator == nullptr) {
        throw ValidationUnavailable("validate mode requires a validator interface");
    }
    std::vector<std::pair<const DetectorRule*, std::regex>> compiled;
    compiled.reserve(detectors.size());
    for (const DetectorRule& d : detectors) {
        compiled.emplace_back(&d, std::regex(d.pattern, std::regex::ECMAScript));
    }
    std::vector<SecretFinding> findings;
    for (const SkillFile& file : artifact.files) {
        auto lines = split_lines(file.content);
        for (std::size_t li = 0; li < lines.size(); ++li) {
            for (auto& [rule, re] : compiled) {
                std::smatch m;
                if (!std::regex_search(lines[li], m, re)) continue;
                SecretFinding f;
                f.detector_id = rule->detector_id;
                f.source_path = file.path;
                f.line = static_cast<int>(li + 1);
                std::string token = m.str(0);
                f.redacted_match = redact_secret(token);
                if (mode == SecretsMode::offline) {
                    f.validation = SecretValidation::not_attempted;
                } else {
                    f.validation = validator->validate(*rule, token);
                }
                findings.push_back(std::move(f));
            }
        }
    }
    return findings;
}

}  // namespace skillguard
