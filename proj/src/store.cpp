#include "skillguard/store.hpp"

#include <chrono>
#include <fstream>

#include <nlohmann/json.hpp>

#include "skillguard/util.hpp"

namespace skillguard {

using nlohmann::json;

std::string_view fetch_status_name(FetchStatus s) {
    switch (s) {
        case FetchStatus::ok: return "ok";
        case FetchStatus::missing_path: return "missing-path";
        case FetchStatus::missing_repo: return "missing-repo";
        case FetchStatus::auth_required: return "auth-required";
        case FetchStatus::timeout: return "timeout";
        case FetchStatus::size_exceeded: return "size-exceeded";
    }
    return "unknown";
}

std::optional<FetchStatus> fetch_status_from_name(std::string_view name) {
    for (FetchStatus s : {FetchStatus::ok, FetchStatus::missing_path, FetchStatus::missing_repo,
                          FetchStatus::auth_required, FetchStatus::timeout, FetchStatus::size_exceeded}) {
        if (fetch_status_name(s) == name) return s;
    }
    return std::nullopt;
}

std::int64_t system_clock_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

namespace {

json record_to_json(const CatalogRecord& rec) {
    return json{
        {"digest", rec.digest},
        {"platform", rec.origin.platform},
        {"owner", rec.origin.owner},
        {"repository", rec.origin.repository},
        {"subpath", rec.origin.subpath},
        {"retrieved_at", rec.origin.retrieved_at},
        {"fetch_status", std::string(fetch_status_name(rec.fetch_status))},
        {"stored_at", rec.stored_at},
    };
}

CatalogRecord record_from_json(const json& j) {
    CatalogRecord rec;
    rec.digest = j.value("digest", "");
    rec.origin.platform = j.value("platform", "");
    rec.origin.owner = j.value("owner", "");
    rec.origin.repository = j.value("repository", "");
    rec.origin.subpath = j.value("subpath", "");
    rec.origin.retrieved_at = j.value("retrieved_at", std::int64_t{0});
    auto status = fetch_status_from_name(j.value("fetch_status", "ok"));
    rec.fetch_status = status.value_or(FetchStatus::ok);
    rec.stored_at = j.value("stored_at", std::int64_t{0});
    return rec;
}

}  // namespace

Store::Store(std::filesystem::path root, ClockFn now) : root_(std::move(root)), now_(std::move(now)) {
    std::filesystem::create_directories(root_ / "objects");
}

std::filesystem::path Store::object_path(const std::string& hex) const {
    return root_ / "objects" / hex.substr(0, 2) / hex;
}

void Store::append_catalog(const CatalogRecord& rec) {
    std::lock_guard<std::mutex> lock(catalog_mutex_);
    std::ofstream out(root_ / "catalog.jsonl", std::ios::app);
    if (!out) throw std::runtime_error("store: cannot append to catalog");
    out << record_to_json(rec).dump() << "\n";
}

CatalogRecord Store::put(const SkillArtifact& artifact) {
    std::string hex = artifact.digest.hex();
    auto obj = object_path(hex);
    if (!std::filesystem::exists(obj)) {
        write_file_atomic(obj, canonical_encode(artifact.files));
    }
    CatalogRecord rec;
    rec.digest = hex;
    rec.origin = artifact.origin;
    rec.fetch_status = FetchStatus::ok;
    rec.stored_at = now_();
    append_catalog(rec);
    return rec;
}

CatalogRecord Store::record_failure(const Origin& origin, FetchStatus status) {
    CatalogRecord rec;
    rec.origin = origin;
    rec.fetch_status = status;
    rec.stored_at = now_();
    append_catalog(rec);
    return rec;
}

std::optional<SkillArtifact> Store::get(const Digest256& digest) const {
    std::string hex = digest.hex();
    auto obj = object_path(hex);
    if (!std::filesystem::exists(obj)) return std::nullopt;
    std::string bytes = read_file(obj);
    if (sha256(bytes) != digest) {
        throw CorruptEntry("stored bytes fail digest re-verification: " + hex);
    }
    SkillArtifact a;
    a.files = canonical_decode(bytes);
    a.digest = digest;
    // Restore the retained (first ok) origin for this digest, if recorded.
    for (const CatalogRecord& rec : read_catalog()) {
        if (rec.digest == hex && rec.fetch_status == FetchStatus::ok) {
            a.origin = rec.origin;
            break;
        }
    }
    return a;
}

std::vector<std::string> Store::list_digests() const {
    std::vector<std::string> out;
    auto objects = root_ / "objects";
    if (!std::filesystem::exists(objects)) return out;
    for (const auto& shard : std::filesystem::directory_iterator(objects)) {
        if (!shard.is_directory()) continue;
        for (const auto& entry : std::filesystem::directory_iterator(shard.path())) {
            if (entry.is_regular_file()) out.push_back(entry.path().filename().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CatalogRecord> Store::read_catalog() const {
    std::vector<CatalogRecord> out;
    auto path = root_ / "catalog.jsonl";
    if (!std::filesystem::exists(path)) return out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(record_from_json(json::parse(line)));
    }
    return out;
}

}  // namespace skillguard
