#include "skillguard/artifact.hpp"

#include <algorithm>

#include "skillguard/util.hpp"

namespace skillguard {

namespace {

void append_be64(std::string& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out += static_cast<char>((v >> shift) & 0xFF);
    }
}

std::uint64_t read_be64(std::string_view bytes, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v = (v << 8) | static_cast<std::uint8_t>(bytes[pos + i]);
    }
    return v;
}

void validate_path(const std::string& path) {
    if (path.empty()) throw InvalidPath("empty path");
    if (path.front() == '/') throw InvalidPath("leading slash: " + path);
    if (path.find('\0') != std::string::npos) throw InvalidPath("NUL in path");
    std::size_t pos = 0;
    while (pos <= path.size()) {
        std::size_t slash = path.find('/', pos);
        std::string_view seg(path.data() + pos,
                             (slash == std::string::npos ? path.size() : slash) - pos);
        if (seg == "..") throw InvalidPath("'..' segment: " + path);
        if (seg.empty() && slash != std::string::npos) throw InvalidPath("empty segment: " + path);
        if (slash == std::string::npos) break;
        pos = slash + 1;
    }
}

void sort_and_check_unique(std::vector<SkillFile>& files) {
    std::sort(files.begin(), files.end(),
              [](const SkillFile& a, const SkillFile& b) { return a.path < b.path; });
    for (std::size_t i = 1; i < files.size(); ++i) {
        if (files[i].path == files[i - 1].path) {
            throw DuplicatePath("duplicate path: " + files[i].path);
        }
    }
}

}  // namespace

std::string path_suffix(std::string_view path) {
    std::size_t slash = path.rfind('/');
    std::string_view base = (slash == std::string_view::npos) ? path : path.substr(slash + 1);
    std::size_t dot = base.rfind('.');
    if (dot == std::string_view::npos || dot + 1 == base.size()) return "";
    return to_lower(base.substr(dot + 1));
}

SkillFile make_skill_file(std::string_view path, std::string content) {
    std::string p(path);
    std::replace(p.begin(), p.end(), '\\', '/');
    if (p.rfind("./", 0) == 0) p.erase(0, 2);
    validate_path(p);
    SkillFile f;
    f.suffix = path_suffix(p);
    f.path = std::move(p);
    f.content = std::move(content);
    return f;
}

const SkillFile* SkillArtifact::find(std::string_view path) const {
    auto it = std::lower_bound(files.begin(), files.end(), path,
                               [](const SkillFile& f, std::string_view p) { return f.path < p; });
    if (it != files.end() && it->path == path) return &*it;
    return nullptr;
}

const SkillFile& SkillArtifact::manifest_file() const {
    const SkillFile* f = find("SKILL.md");
    if (!f) throw MissingSkillManifest("artifact has no SKILL.md");
    return *f;
}

std::string canonical_encode(std::vector<SkillFile> files) {
    sort_and_check_unique(files);
    std::string out;
    for (const SkillFile& f : files) {
        out += f.path;
        out += '\0';
        append_be64(out, f.content.size());
        out += f.content;
    }
    return out;
}

std::vector<SkillFile> canonical_decode(std::string_view bytes) {
    std::vector<SkillFile> files;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t nul = bytes.find('\0', pos);
        if (nul == std::string_view::npos || nul + 8 > bytes.size()) {
            throw std::runtime_error("canonical_decode: truncated entry");
        }
        std::string path(bytes.substr(pos, nul - pos));
        std::uint64_t len = read_be64(bytes, nul + 1);
        std::size_t content_start = nul + 9;
        if (content_start + len > bytes.size()) {
            throw std::runtime_error("canonical_decode: truncated content");
        }
        files.push_back(make_skill_file(path, std::string(bytes.substr(content_start, len))));
        pos = content_start + len;
    }
    return files;
}

Digest256 artifact_digest(const std::vector<SkillFile>& files) {
    return sha256(canonical_encode(files));
}

SkillArtifact make_artifact(std::vector<SkillFile> files, Origin origin) {
    sort_and_check_unique(files);
    SkillArtifact a;
    a.files = std::move(files);
    a.origin = std::move(origin);
    a.digest = artifact_digest(a.files);
    a.manifest_file();  // enforce the SKILL.md invariant
    return a;
}

DedupResult dedup(const std::vector<SkillArtifact>& artifacts) {
    DedupResult r;
    for (const SkillArtifact& a : artifacts) {
        std::string hex = a.digest.hex();
        auto [it, inserted] = r.duplicate_map.try_emplace(hex);
        if (inserted) r.unique.push_back(a);
        it->second.push_back(a.origin);
    }
    return r;
}

}  // namespace skillguard
