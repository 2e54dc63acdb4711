#include "skillguard/rule_scanner.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "skillguard/static_analysis.hpp"
#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

std::string_view severity_name(Severity s) {
    switch (s) {
        case Severity::LOW: return "LOW";
        case Severity::MEDIUM: return "MEDIUM";
        case Severity::HIGH: return "HIGH";
        case Severity::CRITICAL: return "CRITICAL";
    }
    return "unknown";
}

std::optional<Severity> severity_from_name(std::string_view name) {
    for (Severity s : {Severity::LOW, Severity::MEDIUM, Severity::HIGH, Severity::CRITICAL}) {
        if (severity_name(s) == name) return s;
    }
    return std::nullopt;
}

std::string_view overall_name(Overall o) {
    switch (o) {
        case Overall::NONE: return "NONE";
        case Overall::LOW: return "LOW";
        case Overall::MEDIUM: return "MEDIUM";
        case Overall::HIGH: return "HIGH";
        case Overall::CRITICAL: return "CRITICAL";
    }
    return "unknown";
}

std::optional<Overall> overall_from_name(std::string_view name) {
    for (Overall o : {Overall::NONE, Overall::LOW, Overall::MEDIUM, Overall::HIGH, Overall::CRITICAL}) {
        if (overall_name(o) == name) return o;
    }
    return std::nullopt;
}

Overall overall_of(Severity s) {
    switch (s) {
        case Severity::LOW: return Overall::LOW;
        case Severity::MEDIUM: return Overall::MEDIUM;
        case Severity::HIGH: return Overall::HIGH;
        case Severity::CRITICAL: return Overall::CRITICAL;
    }
    return Overall::NONE;
}

std::string_view scan_module_name(ScanModule m) {
    switch (m) {
        case ScanModule::static_rules: return "static";
        case ScanModule::bytecode_integrity: return "bytecode-integrity";
        case ScanModule::pipeline: return "pipeline";
        case ScanModule::behavioral: return "behavioral";
    }
    return "unknown";
}

std::vector<StaticRule> parse_rules(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw MalformedRule("rule file must be a JSON array");
    std::vector<StaticRule> rules;
    for (const json& item : j) {
        if (!item.is_object()) throw MalformedRule("rule entry must be an object");
        StaticRule rule;
        if (!item.contains("id") || !item["id"].is_string()) throw MalformedRule("rule needs an id");
        rule.id = item["id"].get<std::string>();
        auto sev = severity_from_name(item.value("severity", ""));
        if (!sev) throw MalformedRule("bad severity in rule " + rule.id);
        rule.severity = *sev;
        if (!item.contains("match") || !item["match"].is_object()) {
            throw MalformedRule("rule " + rule.id + " needs a match block");
        }
        const json& match = item["match"];
        const bool has_any = match.contains("any");
        const bool has_all = match.contains("all");
        if (has_any == has_all) {
            throw MalformedRule("rule " + rule.id + " needs exactly one of any/all");
        }
        rule.match_all = has_all;
        const json& list = has_all ? match["all"] : match["any"];
        if (!list.is_array() || list.empty()) {
            throw MalformedRule("rule " + rule.id + " pattern list must be non-empty");
        }
        for (const json& p : list) {
            if (!p.is_object() || !p.contains("kind") || !p.contains("pattern")) {
                throw MalformedRule("rule " + rule.id + " pattern needs kind and pattern");
            }
            RulePattern pat;
            std::string kind = p["kind"].get<std::string>();
            pat.pattern = p["pattern"].get<std::string>();
            if (kind == "literal") {
                pat.kind = RulePattern::Kind::literal;
            } else if (kind == "regex") {
                pat.kind = RulePattern::Kind::regex;
                try {
                    pat.compiled = std::regex(pat.pattern, std::regex::ECMAScript);
                } catch (const std::regex_error& e) {
                    throw MalformedRule("rule " + rule.id + " bad regex: " + e.what());
                }
            } else {
                throw MalformedRule("rule " + rule.id + " unknown pattern kind: " + kind);
            }
            rule.patterns.push_back(std::move(pat));
        }
        if (item.contains("file_glob") && item["file_glob"].is_string()) {
            rule.file_glob = item["file_glob"].get<std::string>();
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<StaticRule> load_rules(const std::filesystem::path& path) {
    return parse_rules(read_file(path));
}

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
    int line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

// First match offset of a pattern in text, npos if absent.
std::size_t first_match(const RulePattern& pat, const std::string& text) {
    if (pat.kind == RulePattern::Kind::literal) {
        return text.find(pat.pattern);
    }
    std::smatch m;
    if (std::regex_search(text, m, pat.compiled)) {
        return static_cast<std::size_t>(m.position(0));
    }
    return std::string::npos;
}

}  // namespace

std::vector<ScanFinding> scan_static_rules(const SkillArtifact& artifact,
                                           const std::vector<StaticRule>& rules) {
    std::vector<ScanFinding> findings;
    for (const SkillFile& file : artifact.files) {
        for (const StaticRule& rule : rules) {
            if (rule.file_glob && !glob_match(*rule.file_glob, file.path)) continue;
            std::size_t location = std::string::npos;
            bool matched;
            if (rule.match_all) {
                matched = true;
                for (const RulePattern& pat : rule.patterns) {
                    std::size_t at = first_match(pat, file.content);
                    if (at == std::string::npos) {
                        matched = false;
                        break;
                    }
                    location = std::min(location, at);
                }
            } else {
                matched = false;
                for (const RulePattern& pat : rule.patterns) {
                    std::size_t at = first_match(pat, file.content);
                    if (at != std::string::npos) {
                        location = std::min(location, at);
                        matched = true;
                    }
                }
            }
            if (!matched) continue;
            ScanFinding f;
            f.module = ScanModule::static_rules;
            f.rule_id = rule.id;
            f.source_path = file.path;
            f.line = line_of_offset(file.content, location);
            f.severity = rule.severity;
            f.note = "rule pattern matched";
            findings.push_back(std::move(f));
        }
    }
    return findings;
}

namespace {

// Plausible source filename embedded in compiled python bytes: a printable
// run ending in ".py". Returns the basename stem, or nullopt when nothing
// parseable is found.
std::optional<std::string> embedded_source_stem(const std::string& bytes) {
    std::size_t pos = 0;
    while ((pos = bytes.find(".py", pos)) != std::string::npos) {
        std::size_t end = pos + 3;
        // Must terminate the name: next byte not alnum (marshal strings are
        // length-prefixed, so arbitrary bytes follow).
        if (end < bytes.size() && std::isalnum(static_cast<unsigned char>(bytes[end]))) {
            pos = end;
            continue;
        }
        std::size_t begin = pos;
        while (begin > 0) {
            unsigned char c = static_cast<unsigned char>(bytes[begin - 1]);
            if (std::isalnum(c) || c == '_' || c == '-' || c == '.' || c == '/') {
                --begin;
            } else {
                break;
            }
        }
        std::string name = bytes.substr(begin, pos - begin);
        if (!name.empty()) {
            std::size_t slash = name.rfind('/');
            if (slash != std::string::npos) name = name.substr(slash + 1);
            if (!name.empty()) return name;
        }
        pos = end;
    }
    return std::nullopt;
}

std::string stem_of(const std::string& path) {
    std::size_t slash = path.rfind('/');
    std::string base = (slash == std::string::npos) ? path : path.substr(slash + 1);
    std::size_t dot = base.rfind('.');
    return (dot == std::string::npos) ? base : base.substr(0, dot);
}

std::string dir_of(const std::string& path) {
    std::size_t slash = path.rfind('/');
    return (slash == std::string::npos) ? "" : path.substr(0, slash);
}

}  // namespace

std::vector<ScanFinding> scan_bytecode_integrity(const SkillArtifact& artifact) {
    std::vector<ScanFinding> findings;
    for (const SkillFile& file : artifact.files) {
        if (file.suffix != "pyc") continue;

        std::string dir = dir_of(file.path);
        std::string stem = stem_of(file.path);
        std::string source_dir = dir;
        // __pycache__/mod.cpython-311.pyc maps to ../mod.py
        std::size_t slash = dir.rfind('/');
        std::string dir_base = (slash == std::string::npos) ? dir : dir.substr(slash + 1);
        if (dir_base == "__pycache__") {
            source_dir = (slash == std::string::npos) ? "" : dir.substr(0, slash);
            std::size_t dot = stem.find('.');
            if (dot != std::string::npos) stem = stem.substr(0, dot);
        }
        std::string source_path = source_dir.empty() ? stem + ".py" : source_dir + "/" + stem + ".py";

        if (artifact.find(source_path) == nullptr) {
            ScanFinding f;
            f.module = ScanModule::bytecode_integrity;
            f.rule_id = "orphan-compiled-artifact";
            f.source_path = file.path;
            f.severity = Severity::HIGH;
            f.note = "compiled artifact has no sibling source " + source_path;
            findings.push_back(std::move(f));
        }

        auto embedded = embedded_source_stem(file.content);
        if (embedded) {
            std::string embedded_stem = stem_of(*embedded);
            if (embedded_stem != stem) {
                ScanFinding f;
                f.module = ScanModule::bytecode_integrity;
                f.rule_id = "source-name-mismatch";
                f.source_path = file.path;
                f.severity = Severity::HIGH;
                f.note = "compiled header names " + *embedded + ", path stem is " + stem;
                findings.push_back(std::move(f));
            }
        } else {
            ScanFinding f;
            f.module = ScanModule::bytecode_integrity;
            f.rule_id = "opaque-compiled-artifact";
            f.source_path = file.path;
            f.severity = Severity::MEDIUM;
            f.note = "opaque compiled artifact";
            findings.push_back(std::move(f));
        }
    }
    return findings;
}

namespace {

const std::vector<std::string>& download_commands() {
    static const std::vector<std::string> cmds = {"curl", "wget", "fetch"};
    return cmds;
}

const std::vector<std::string>& interpreter_commands() {
    static const std::vector<std::string> cmds = {"sh",     "bash", "zsh",  "dash", "ksh",
                                                  "python", "python3", "perl", "ruby", "node", "php"};
    return cmds;
}

const std::vector<std::string>& privilege_commands() {
    static const std::vector<std::string> cmds = {"sudo", "su", "doas"};
    return cmds;
}

const std::vector<std::string>& history_disable_tokens() {
    static const std::vector<std::string> tokens = {
        "unset HISTFILE", "HISTFILE=/dev/null", "set +o history", "history -c", "HISTSIZE=0",
    };
    return tokens;
}

const std::vector<std::string>& network_command_tokens() {
    static const std::vector<std::string> tokens = {"curl", "wget", "nc ", "ncat", "ssh ", "scp "};
    return tokens;
}

// First command word of a pipe stage, skipping env assignments.
std::string stage_command(std::string_view stage) {
    std::size_t pos = 0;
    for (;;) {
        while (pos < stage.size() && std::isspace(static_cast<unsigned char>(stage[pos]))) ++pos;
        std::size_t end = pos;
        while (end < stage.size() && !std::isspace(static_cast<unsigned char>(stage[end]))) ++end;
        std::string_view word = stage.substr(pos, end - pos);
        if (word.empty()) return "";
        if (word.find('=') != std::string_view::npos &&
            word.find('=') > 0) {  // FOO=bar prefix
            pos = end;
            continue;
        }
        std::string cmd(word);
        std::size_t slash = cmd.rfind('/');
        if (slash != std::string::npos) cmd = cmd.substr(slash + 1);
        return cmd;
    }
}

// Splits a shell line on single '|' (not "||").
std::vector<std::string> pipe_stages(const std::string& line) {
    std::vector<std::string> stages;
    std::string cur;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '|') {
            if (i + 1 < line.size() && line[i + 1] == '|') {
                cur += "||";
                ++i;
                continue;
            }
            stages.push_back(cur);
            cur.clear();
        } else {
            cur += line[i];
        }
    }
    stages.push_back(cur);
    return stages;
}

bool contains_any(const std::string& haystack, const std::vector<std::string>& needles) {
    for (const std::string& n : needles) {
        if (haystack.find(n) != std::string::npos) return true;
    }
    return false;
}

struct LineRange {
    int first_line;                  // 1-based line number of lines[0]
    std::vector<std::string> lines;
};

// Shell-visible content of a file: whole file for shell suffixes, fenced code
// blocks for markdown.
std::vector<LineRange> shell_content(const SkillFile& file) {
    static const std::set<std::string> shell_suffixes = {"sh", "bash", "zsh"};
    std::vector<LineRange> out;
    auto lines = split_lines(file.content);
    if (shell_suffixes.count(file.suffix)) {
        out.push_back({1, lines});
        return out;
    }
    if (file.suffix == "md" || file.suffix == "markdown") {
        bool in_fence = false;
        LineRange cur{0, {}};
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (lines[i].rfind("```", 0) == 0) {
                if (in_fence) {
                    out.push_back(cur);
                    cur = {0, {}};
                }
                in_fence = !in_fence;
                if (in_fence) cur.first_line = static_cast<int>(i + 2);
                continue;
            }
            if (in_fence) cur.lines.push_back(lines[i]);
        }
    }
    return out;
}

}  // namespace

std::vector<ScanFinding> scan_pipelines(const SkillArtifact& artifact) {
    std::vector<ScanFinding> findings;
    for (const SkillFile& file : artifact.files) {
        auto ranges = shell_content(file);
        if (ranges.empty()) continue;

        std::optional<int> history_disable_line;
        std::optional<int> network_after_disable_line;

        for (const LineRange& range : ranges) {
            for (std::size_t i = 0; i < range.lines.size(); ++i) {
                const std::string& line = range.lines[i];
                int line_no = range.first_line + static_cast<int>(i);
                auto stages = pipe_stages(line);
                if (stages.size() >= 2) {
                    for (std::size_t s = 0; s + 1 < stages.size(); ++s) {
                        std::string cmd = stage_command(stages[s]);
                        std::string next_cmd = stage_command(stages[s + 1]);
                        bool from_download =
                            std::find(download_commands().begin(), download_commands().end(), cmd) !=
                            download_commands().end();
                        bool to_interpreter = std::find(interpreter_commands().begin(),
                                                        interpreter_commands().end(),
                                                        next_cmd) != interpreter_commands().end();
                        bool to_privilege =
                            std::find(privilege_commands().begin(), privilege_commands().end(),
                                      next_cmd) != privilege_commands().end();
                        if (from_download && to_interpreter) {
                            ScanFinding f;
                            f.module = ScanModule::pipeline;
                            f.rule_id = "download-to-interpreter";
                            f.source_path = file.path;
                            f.line = line_no;
                            f.severity = Severity::CRITICAL;
                            f.note = cmd + " piped into " + next_cmd;
                            findings.push_back(std::move(f));
                        } else if (to_privilege) {
                            ScanFinding f;
                            f.module = ScanModule::pipeline;
                            f.rule_id = "pipe-to-privilege";
                            f.source_path = file.path;
                            f.line = line_no;
                            f.severity = Severity::HIGH;
                            f.note = "pipe into privilege elevation: " + next_cmd;
                            findings.push_back(std::move(f));
                        }
                    }
                }
                if (!history_disable_line && contains_any(line, history_disable_tokens())) {
                    history_disable_line = line_no;
                }
                if (history_disable_line && !network_after_disable_line &&
                    contains_any(line, network_command_tokens())) {
                    network_after_disable_line = line_no;
                }
            }
        }
        if (history_disable_line && network_after_disable_line) {
            ScanFinding f;
            f.module = ScanModule::pipeline;
            f.rule_id = "history-disable-then-network";
            f.source_path = file.path;
            f.line = *history_disable_line;
            f.severity = Severity::MEDIUM;
            f.note = "history/trace disabled before network use";
            findings.push_back(std::move(f));
        }
    }
    return findings;
}

const std::vector<std::string>& sensitive_path_tokens() {
    static const std::vector<std::string> tokens = {
        "~/.ssh",          ".ssh/id_rsa",     "id_rsa",          "id_ed25519",
        "~/.aws",          ".aws/credentials", "~/.netrc",       ".netrc",
        ".bash_history",   ".zsh_history",    "~/.gnupg",        "/etc/passwd",
        "/etc/shadow",     "~/.config/gcloud", ".kube/config",   "keychain",
        "~/.npmrc",        ".git-credentials",
    };
    return tokens;
}

const std::vector<std::string>& outbound_network_tokens() {
    static const std::vector<std::string> tokens = {
        "requests.get",   "requests.post",  "urllib.request", "http.client",  "httpx.",
        "aiohttp",        "socket.connect", "socket.create_connection",       "fetch(",
        "axios.",         "XMLHttpRequest", "net.Socket",     "curl ",        "wget ",
        "nc -",           "urlopen(",       "http.get",       "https.get",
    };
    return tokens;
}

namespace {

bool contains_ipv4_literal(const std::string& line) {
    for (std::size_t p = 0; p < line.size(); ++p) {
        if (!std::isdigit(static_cast<unsigned char>(line[p]))) continue;
        if (p > 0) {
            char prev = line[p - 1];
            if (std::isalnum(static_cast<unsigned char>(prev)) || prev == '.') continue;
        }
        std::size_t q = p;
        int dots = 0;
        while (q < line.size()) {
            if (std::isdigit(static_cast<unsigned char>(line[q]))) {
                ++q;
            } else if (line[q] == '.' && dots < 3 && q + 1 < line.size() &&
                       std::isdigit(static_cast<unsigned char>(line[q + 1]))) {
                ++dots;
                ++q;
            } else {
                break;
            }
        }
        if (dots == 3 && is_valid_ipv4(line.substr(p, q - p))) return true;
        p = q;
    }
    return false;
}

}  // namespace

std::vector<ScanFinding> scan_behavior(const SkillArtifact& artifact) {
    std::vector<ScanFinding> findings;
    for (const SkillFile& file : artifact.files) {
        if (!default_script_suffixes().count(file.suffix)) continue;
        auto lines = split_lines(file.content);
        std::optional<int> sensitive_line, outbound_line, raw_ip_line;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string& line = lines[i];
            if (!sensitive_line && contains_any(line, sensitive_path_tokens())) {
                sensitive_line = static_cast<int>(i + 1);
            }
            if (contains_any(line, outbound_network_tokens())) {
                if (!outbound_line) outbound_line = static_cast<int>(i + 1);
                if (!raw_ip_line && contains_ipv4_literal(line)) {
                    raw_ip_line = static_cast<int>(i + 1);
                }
            }
        }
        if (sensitive_line && outbound_line) {
            ScanFinding f;
            f.module = ScanModule::behavioral;
            f.rule_id = "possible-exfiltration";
            f.source_path = file.path;
            f.line = sensitive_line;
            f.severity = Severity::HIGH;
            f.note = "sensitive path read and outbound network in the same file";
            findings.push_back(std::move(f));
        } else if (outbound_line && raw_ip_line) {
            ScanFinding f;
            f.module = ScanModule::behavioral;
            f.rule_id = "raw-ip-endpoint";
            f.source_path = file.path;
            f.line = raw_ip_line;
            f.severity = Severity::MEDIUM;
            f.note = "outbound network call to a raw IP literal";
            findings.push_back(std::move(f));
        } else if (sensitive_line) {
            ScanFinding f;
            f.module = ScanModule::behavioral;
            f.rule_id = "sensitive-path-read";
            f.source_path = file.path;
            f.line = sensitive_line;
            f.severity = Severity::LOW;
            f.note = "reads a sensitive path";
            findings.push_back(std::move(f));
        }
    }
    return findings;
}

ScanReport scan(const SkillArtifact& artifact, const std::vector<StaticRule>& rules) {
    ScanReport report;
    report.digest = artifact.digest.hex();
    auto append = [&report](std::vector<ScanFinding> v) {
        for (auto& f : v) report.findings.push_back(std::move(f));
    };
    append(scan_static_rules(artifact, rules));
    append(scan_bytecode_integrity(artifact));
    append(scan_pipelines(artifact));
    append(scan_behavior(artifact));
    report.overall = Overall::NONE;
    for (const ScanFinding& f : report.findings) {
        report.overall = std::max(report.overall, overall_of(f.severity));
    }
    return report;
}

}  // namespace skillguard
