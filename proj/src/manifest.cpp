#include "skillguard/manifest.hpp"

#include <cctype>
#include <stdexcept>

#include "skillguard/util.hpp"

namespace skillguard {

namespace {

struct LineRef {
    std::string_view text;   // without the newline, trailing '\r' stripped
    std::size_t next_offset; // offset just past this line's newline
};

std::vector<LineRef> scan_lines(std::string_view text) {
    std::vector<LineRef> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t end = (nl == std::string_view::npos) ? text.size() : nl;
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        std::size_t next = (nl == std::string_view::npos) ? text.size() : nl + 1;
        lines.push_back({line, next});
        pos = next;
    }
    return lines;
}

// "key: value" with key restricted to [A-Za-z0-9_-]+. Returns false when the
// line does not start a new pair.
bool parse_pair(std::string_view line, std::string& key, std::string& value) {
    std::size_t i = 0;
    while (i < line.size() &&
           (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_' || line[i] == '-')) {
        ++i;
    }
    if (i == 0 || i >= line.size() || line[i] != ':') return false;
    key = std::string(line.substr(0, i));
    value = trim(line.substr(i + 1));
    return true;
}

}  // namespace

std::string_view manifest_error_name(ManifestError e) {
    switch (e) {
        case ManifestError::none: return "none";
        case ManifestError::no_frontmatter: return "NoFrontmatter";
        case ManifestError::unterminated_frontmatter: return "UnterminatedFrontmatter";
        case ManifestError::missing_name: return "MissingRequiredField(name)";
        case ManifestError::missing_description: return "MissingRequiredField(description)";
        case ManifestError::duplicate_key: return "DuplicateKey";
    }
    return "unknown";
}

ManifestParseResult parse_manifest(std::string_view text) {
    auto fail = [](ManifestError e, std::string detail = {}) {
        ManifestParseResult r;
        r.error = e;
        r.detail = std::move(detail);
        return r;
    };

    auto lines = scan_lines(text);
    if (lines.empty() || lines[0].text != "---") {
        return fail(ManifestError::no_frontmatter);
    }

    std::size_t close = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].text == "---") {
            close = i;
            break;
        }
    }
    if (close == 0) return fail(ManifestError::unterminated_frontmatter);

    SkillManifest m;
    std::vector<std::string> seen;
    // Value currently accepting indented continuation lines (extra keys only).
    std::string* current_value = nullptr;

    for (std::size_t i = 1; i < close; ++i) {
        std::string_view line = lines[i].text;
        if (trim(line).empty()) {
            current_value = nullptr;
            continue;
        }
        std::string key, value;
        if (parse_pair(line, key, value)) {
            for (const auto& s : seen) {
                if (s == key) return fail(ManifestError::duplicate_key, key);
            }
            seen.push_back(key);
            if (key == "name") {
                m.name = value;
                current_value = nullptr;
            } else if (key == "description") {
                m.description = value;
                current_value = nullptr;
            } else {
                m.extra_metadata.emplace_back(key, value);
                current_value = &m.extra_metadata.back().second;
            }
        } else if (std::isspace(static_cast<unsigned char>(line[0])) && current_value) {
            // Indented continuation: nested structures surface verbatim as
            // part of the preceding key's string value.
            if (!current_value->empty()) *current_value += '\n';
            *current_value += rtrim(line);
        }
        // Anything else (stray text without a current key) is ignored.
    }

    if (m.name.empty()) return fail(ManifestError::missing_name);
    if (m.description.empty()) return fail(ManifestError::missing_description);

    // Body is the verbatim text after the closing delimiter line.
    m.body = std::string(text.substr(lines[close].next_offset));

    ManifestParseResult r;
    r.manifest = std::move(m);
    return r;
}

std::string render_manifest(const SkillManifest& m) {
    auto check_value = [](const std::string& v, const char* what) {
        if (v.find('\n') != std::string::npos) {
            throw std::invalid_argument(std::string("render_manifest: multi-line ") + what);
        }
    };
    check_value(m.name, "name");
    check_value(m.description, "description");
    std::string out = "---\n";
    out += "name: " + m.name + "\n";
    out += "description: " + m.description + "\n";
    for (const auto& [k, v] : m.extra_metadata) {
        check_value(v, "metadata value");
        out += k + ": " + v + "\n";
    }
    out += "---\n";
    out += m.body;
    return out;
}

}  // namespace skillguard
