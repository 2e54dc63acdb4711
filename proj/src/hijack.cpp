#include "skillguard/hijack.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

ReplayForgeClient ReplayForgeClient::load(const std::filesystem::path& path) {
    ReplayForgeClient client;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read scenario file: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        Scenario sc;
        const json& repo_lookup = j.at("repo_lookup");
        if (repo_lookup.is_string()) {
            std::string v = repo_lookup.get<std::string>();
            if (v == "ok") sc.repo_answer = Scenario::RepoAnswer::ok;
            else if (v == "not_found") sc.repo_answer = Scenario::RepoAnswer::not_found;
            else if (v == "unavailable") sc.repo_answer = Scenario::RepoAnswer::unavailable;
            else throw std::runtime_error("bad repo_lookup value: " + v);
        } else if (repo_lookup.is_object() && repo_lookup.contains("redirect")) {
            sc.repo_answer = Scenario::RepoAnswer::redirect;
            sc.redirect_owner = repo_lookup["redirect"].value("owner", "");
            sc.redirect_repo = repo_lookup["redirect"].value("repo", "");
        } else {
            throw std::runtime_error("bad repo_lookup entry");
        }
        std::string account = j.value("account_lookup", "exists");
        if (account == "exists") sc.account_answer = Scenario::AccountAnswer::exists;
        else if (account == "not_found") sc.account_answer = Scenario::AccountAnswer::not_found;
        else if (account == "unavailable") sc.account_answer = Scenario::AccountAnswer::unavailable;
        else throw std::runtime_error("bad account_lookup value: " + account);

        std::string owner = j.at("owner").get<std::string>();
        std::string repo = j.at("repo").get<std::string>();
        client.by_repo_[owner + "/" + repo] = sc;
        client.by_account_[owner] = sc;
    }
    return client;
}

RepoLookupResult ReplayForgeClient::repo_lookup(const std::string& owner, const std::string& repo) {
    auto it = by_repo_.find(owner + "/" + repo);
    if (it == by_repo_.end()) return {RepoLookupResult::Kind::not_found, "", ""};
    switch (it->second.repo_answer) {
        case Scenario::RepoAnswer::ok:
            return {RepoLookupResult::Kind::ok, "", ""};
        case Scenario::RepoAnswer::redirect:
            return {RepoLookupResult::Kind::redirect, it->second.redirect_owner,
                    it->second.redirect_repo};
        case Scenario::RepoAnswer::not_found:
            return {RepoLookupResult::Kind::not_found, "", ""};
        case Scenario::RepoAnswer::unavailable:
            throw ForgeUnavailable("replay: transport error for " + owner + "/" + repo);
    }
    return {RepoLookupResult::Kind::not_found, "", ""};
}

AccountLookup ReplayForgeClient::account_lookup(const std::string& owner) {
    auto it = by_account_.find(owner);
    if (it == by_account_.end()) return AccountLookup::not_found;
    switch (it->second.account_answer) {
        case Scenario::AccountAnswer::exists: return AccountLookup::exists;
        case Scenario::AccountAnswer::not_found: return AccountLookup::not_found;
        case Scenario::AccountAnswer::unavailable:
            throw ForgeUnavailable("replay: transport error for account " + owner);
    }
    return AccountLookup::not_found;
}

LiveForgeClient::LiveForgeClient(std::string base_url) : base_url_(std::move(base_url)) {}

RepoLookupResult LiveForgeClient::repo_lookup(const std::string& owner, const std::string& repo) {
    httplib::Client client(base_url_);
    client.set_follow_location(false);
    client.set_connection_timeout(10);
    auto res = client.Get("/repos/" + owner + "/" + repo);
    if (!res) throw ForgeUnavailable("forge unreachable: " + base_url_);
    if (res->status == 200) return {RepoLookupResult::Kind::ok, "", ""};
    if (res->status == 301 || res->status == 302 || res->status == 307 || res->status == 308) {
        // Location: <base>/repos/<new_owner>/<new_repo>
        std::string loc = res->get_header_value("Location");
        std::string marker = "/repos/";
        std::size_t at = loc.find(marker);
        RepoLookupResult out{RepoLookupResult::Kind::redirect, "", ""};
        if (at != std::string::npos) {
            std::string rest = loc.substr(at + marker.size());
            std::size_t slash = rest.find('/');
            if (slash != std::string::npos) {
                out.new_owner = rest.substr(0, slash);
                out.new_repo = rest.substr(slash + 1);
            }
        }
        return out;
    }
    if (res->status == 404) return {RepoLookupResult::Kind::not_found, "", ""};
    throw ForgeUnavailable("unexpected forge status " + std::to_string(res->status));
}

AccountLookup LiveForgeClient::account_lookup(const std::string& owner) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    auto res = client.Get("/users/" + owner);
    if (!res) throw ForgeUnavailable("forge unreachable: " + base_url_);
    if (res->status == 200) return AccountLookup::exists;
    if (res->status == 404) return AccountLookup::not_found;
    throw ForgeUnavailable("unexpected forge status " + std::to_string(res->status));
}

std::string_view ref_state_name(RefState s) {
    switch (s) {
        case RefState::ok: return "ok";
        case RefState::redirected: return "redirected";
        case RefState::missing_repo_owner_exists: return "missing_repo_owner_exists";
        case RefState::missing_owner: return "missing_owner";
    }
    return "unknown";
}

namespace {

std::optional<std::int64_t> metadata_int(const IndexEntry& entry, const std::string& key) {
    auto it = entry.listing_metadata.find(key);
    if (it == entry.listing_metadata.end()) return std::nullopt;
    try {
        return std::stoll(it->second);
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace

ReferenceStatus probe_reference(const IndexEntry& entry, ForgeClient& forge) {
    ReferenceStatus status;
    status.stars = metadata_int(entry, "stars");
    status.installs = metadata_int(entry, "installs");

    RepoLookupResult repo = forge.repo_lookup(entry.owner, entry.repository);
    switch (repo.kind) {
        case RepoLookupResult::Kind::ok:
            status.state = RefState::ok;
            return status;
        case RepoLookupResult::Kind::redirect: {
            status.state = RefState::redirected;
            status.new_owner = repo.new_owner;
            status.new_repo = repo.new_repo;
            status.owner_name_free = forge.account_lookup(entry.owner) == AccountLookup::not_found;
            return status;
        }
        case RepoLookupResult::Kind::not_found: {
            AccountLookup account = forge.account_lookup(entry.owner);
            if (account == AccountLookup::exists) {
                status.state = RefState::missing_repo_owner_exists;
                status.owner_name_free = false;
            } else {
                status.state = RefState::missing_owner;
                status.owner_name_free = true;
            }
            return status;
        }
    }
    return status;
}

HijackVerdict classify_hijackability(const ReferenceStatus& status,
                                     std::optional<std::int64_t> retirement_threshold) {
    HijackVerdict verdict;
    if (status.state == RefState::ok) {
        verdict.verdict = HijackVerdictKind::safe;
        verdict.rationale = "reference resolves";
        return verdict;
    }
    if (!status.owner_name_free.has_value() || !*status.owner_name_free) {
        verdict.verdict = HijackVerdictKind::safe;
        verdict.rationale = "original owner name is taken";
        return verdict;
    }
    if (retirement_threshold && status.installs && *status.installs >= *retirement_threshold) {
        verdict.verdict = HijackVerdictKind::possibly_protected;
        verdict.rationale = "namespace retirement may block recreation (installs " +
                            std::to_string(*status.installs) + " >= threshold " +
                            std::to_string(*retirement_threshold) + ")";
        return verdict;
    }
    verdict.verdict = HijackVerdictKind::vulnerable;
    if (status.stars && *status.stars >= 5) {
        verdict.impact = Impact::elevated;
        verdict.rationale = "owner name registrable; referenced repository has " +
                            std::to_string(*status.stars) + " stars";
    } else {
        verdict.impact = Impact::low;
        verdict.rationale = "owner name registrable";
    }
    return verdict;
}

std::string_view verdict_name(HijackVerdictKind v) {
    switch (v) {
        case HijackVerdictKind::safe: return "safe";
        case HijackVerdictKind::possibly_protected: return "possibly_protected";
        case HijackVerdictKind::vulnerable: return "vulnerable";
    }
    return "unknown";
}

std::string_view impact_name(Impact i) {
    switch (i) {
        case Impact::low: return "low";
        case Impact::elevated: return "elevated";
    }
    return "unknown";
}

AuditReport audit_index(const std::vector<IndexEntry>& entries, ForgeClient& forge,
                        std::optional<std::int64_t> retirement_threshold) {
    AuditReport report;
    // One probe per unique (owner, repository); entries share the verdict.
    std::map<std::string, std::pair<std::optional<ReferenceStatus>, bool>> probed;
    for (const IndexEntry& entry : entries) {
        std::string repo_key = entry.owner + "/" + entry.repository;
        auto it = probed.find(repo_key);
        if (it == probed.end()) {
            std::pair<std::optional<ReferenceStatus>, bool> outcome{std::nullopt, false};
            try {
                outcome.first = probe_reference(entry, forge);
            } catch (const ForgeUnavailable&) {
                outcome.second = true;
            }
            it = probed.emplace(repo_key, std::move(outcome)).first;
        }
        AuditEntry audit;
        audit.entry = entry;
        if (it->second.second) {
            audit.forge_unavailable = true;
            ++report.summary.transport_errors;
        } else {
            // Popularity metadata is per entry even when the probe is shared.
            ReferenceStatus status = *it->second.first;
            status.stars = metadata_int(entry, "stars").has_value() ? metadata_int(entry, "stars")
                                                                    : status.stars;
            status.installs = metadata_int(entry, "installs").has_value()
                                  ? metadata_int(entry, "installs")
                                  : status.installs;
            audit.status = status;
            audit.verdict = classify_hijackability(status, retirement_threshold);
        }
        report.entries.push_back(std::move(audit));
    }

    std::set<std::string> vulnerable_repos;
    std::vector<std::int64_t> installs;
    for (const AuditEntry& e : report.entries) {
        if (e.verdict && e.verdict->verdict == HijackVerdictKind::vulnerable) {
            vulnerable_repos.insert(e.entry.owner + "/" + e.entry.repository);
            ++report.summary.affected_skills;
            if (e.status && e.status->installs) installs.push_back(*e.status->installs);
        }
    }
    report.summary.vulnerable_repos = vulnerable_repos.size();
    if (!installs.empty()) {
        std::sort(installs.begin(), installs.end());
        report.summary.installs_median = installs[(installs.size() - 1) / 2];  // lower median
        report.summary.installs_max = installs.back();
    }
    return report;
}

}  // namespace skillguard
