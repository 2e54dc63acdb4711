#include "skillguard/public_suffix.hpp"

#include <vector>

#include "skillguard/util.hpp"

namespace skillguard {

namespace {

std::vector<std::string> split_labels(std::string_view host) {
    std::vector<std::string> labels;
    std::size_t pos = 0;
    while (pos <= host.size()) {
        std::size_t dot = host.find('.', pos);
        if (dot == std::string_view::npos) {
            labels.emplace_back(host.substr(pos));
            break;
        }
        labels.emplace_back(host.substr(pos, dot - pos));
        pos = dot + 1;
    }
    return labels;
}

std::string tail(const std::vector<std::string>& labels, std::size_t n) {
    std::vector<std::string> part(labels.end() - static_cast<std::ptrdiff_t>(n), labels.end());
    return join(part, ".");
}

}  // namespace

PublicSuffixList PublicSuffixList::parse(std::string_view text) {
    PublicSuffixList psl;
    for (const std::string& raw : split_lines(text)) {
        std::string line = trim(raw);
        if (line.empty() || line.rfind("//", 0) == 0) continue;
        // Rules end at the first whitespace per the list format.
        std::size_t ws = line.find_first_of(" \t");
        if (ws != std::string::npos) line = line.substr(0, ws);
        line = to_lower(line);
        if (line[0] == '!') {
            psl.exceptions_.insert(line.substr(1));
        } else {
            psl.rules_.insert(line);
        }
    }
    return psl;
}

PublicSuffixList PublicSuffixList::load(const std::filesystem::path& path) {
    return parse(read_file(path));
}

std::optional<std::string> PublicSuffixList::etld1(std::string_view host_in) const {
    std::string host = to_lower(trim(host_in));
    if (!host.empty() && host.back() == '.') host.pop_back();
    if (host.empty()) return std::nullopt;
    if (is_valid_ipv4(host) || is_valid_ipv6(host)) return std::nullopt;
    if (host.find(':') != std::string::npos) return std::nullopt;  // bracketless IPv6 remnant

    auto labels = split_labels(host);
    for (const std::string& l : labels) {
        if (l.empty()) return std::nullopt;
    }

    // Exception rules win outright; the suffix is the rule minus its first label.
    for (std::size_t n = labels.size(); n >= 1; --n) {
        if (exceptions_.count(tail(labels, n))) {
            std::size_t suffix_len = n - 1;
            if (labels.size() < suffix_len + 1) return std::nullopt;
            return tail(labels, suffix_len + 1);
        }
    }

    // Longest matching normal/wildcard rule, defaulting to "*" (the bare TLD).
    std::size_t best = 1;
    for (std::size_t n = labels.size(); n >= 1; --n) {
        std::string candidate = tail(labels, n);
        bool matched = rules_.count(candidate) > 0;
        if (!matched && n >= 2) {
            std::string wildcard = "*." + tail(labels, n - 1);
            matched = rules_.count(wildcard) > 0;
        }
        if (matched) {
            best = n;
            break;
        }
    }
    if (labels.size() <= best) return std::nullopt;  // host is itself a suffix
    return tail(labels, best + 1);
}

}  // namespace skillguard
