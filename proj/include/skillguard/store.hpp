#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillguard/artifact.hpp"

namespace skillguard {

struct CorruptEntry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FetchStatus {
    ok,
    missing_path,
    missing_repo,
    auth_required,
    timeout,
    size_exceeded,
};

std::string_view fetch_status_name(FetchStatus s);
std::optional<FetchStatus> fetch_status_from_name(std::string_view name);

struct CatalogRecord {
    std::string digest;  // hex; empty unless fetch_status == ok
    Origin origin;
    FetchStatus fetch_status = FetchStatus::ok;
    std::int64_t stored_at = 0;
};

using ClockFn = std::function<std::int64_t()>;
std::int64_t system_clock_now();

// Content-addressed artifact store: objects/<first2hex>/<fullhex> holds the
// canonical encoding, catalog.jsonl accumulates one CatalogRecord per ingest
// outcome. Object writes publish atomically (temp file + rename), so readers
// never observe partial artifacts and concurrent writers of the same digest
// are idempotent.
class Store {
public:
    explicit Store(std::filesystem::path root, ClockFn now = system_clock_now);

    CatalogRecord put(const SkillArtifact& artifact);
    CatalogRecord record_failure(const Origin& origin, FetchStatus status);

    // nullopt when the digest is unknown; CorruptEntry when the stored bytes
    // fail re-verification against the requested digest.
    std::optional<SkillArtifact> get(const Digest256& digest) const;

    std::vector<std::string> list_digests() const;  // sorted hex
    std::vector<CatalogRecord> read_catalog() const;

    const std::filesystem::path& root() const { return root_; }
    std::int64_t now() const { return now_(); }

private:
    std::filesystem::path object_path(const std::string& hex) const;
    void append_catalog(const CatalogRecord& rec);

    std::filesystem::path root_;
    ClockFn now_;
    mutable std::mutex catalog_mutex_;
};

}  // namespace skillguard
