#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace skillguard {

// Public-suffix table in the standard list format: one rule per line,
// "// ..." comments, "*." wildcard rules, "!" exception rules. Lookup follows
// the canonical algorithm with the implicit "*" default rule.
class PublicSuffixList {
public:
    static PublicSuffixList parse(std::string_view text);
    static PublicSuffixList load(const std::filesystem::path& path);

    // eTLD+1 of a host, or nullopt when unresolvable (IP literal, the host is
    // itself a public suffix, single label without a registrable part).
    std::optional<std::string> etld1(std::string_view host) const;

    std::size_t rule_count() const { return rules_.size() + exceptions_.size(); }

private:
    std::set<std::string> rules_;       // includes wildcard rules verbatim ("*.ck")
    std::set<std::string> exceptions_;  // without the leading '!'
};

}  // namespace skillguard
