#include "skillguard/util.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace skillguard {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string rtrim(std::string_view s) {
    std::size_t e = s.size();
    while (e > 0 && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(0, e));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            if (pos < text.size()) {
                std::string_view last = text.substr(pos);
                if (!last.empty() && last.back() == '\r') last.remove_suffix(1);
                lines.emplace_back(last);
            }
            break;
        }
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        pos = nl + 1;
    }
    return lines;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string hex_encode(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xF];
    }
    return out;
}

std::vector<std::uint8_t> hex_decode(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw std::invalid_argument("hex_decode: odd length");
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("hex_decode: bad digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

bool glob_match(std::string_view pattern, std::string_view text) {
    // Iterative wildcard match with backtracking on the last '*'.
    std::size_t p = 0, t = 0;
    std::size_t star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + p.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

void write_file_atomic(const std::filesystem::path& p, std::string_view content) {
    std::filesystem::create_directories(p.parent_path());
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    write_file(tmp, content);
    std::filesystem::rename(tmp, p);
}

std::vector<std::string> word_tokens(std::string_view text, std::size_t min_len) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= min_len) tokens.push_back(cur);
        cur.clear();
    };
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

bool is_valid_ipv4(std::string_view s) {
    int octets = 0;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t dot = s.find('.', pos);
        std::string_view part = s.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
        if (part.empty() || part.size() > 3) return false;
        int value = 0;
        for (char c : part) {
            if (c < '0' || c > '9') return false;
            value = value * 10 + (c - '0');
        }
        if (part.size() > 1 && part[0] == '0') return false;  // no leading zeros
        if (value > 255) return false;
        ++octets;
        if (dot == std::string_view::npos) break;
        pos = dot + 1;
        if (pos > s.size()) return false;
    }
    return octets == 4;
}

bool is_valid_ipv6(std::string_view s) {
    if (s.size() < 2) return false;
    // Optional trailing IPv4 tail (e.g. ::ffff:1.2.3.4).
    std::size_t last_colon = s.rfind(':');
    if (last_colon == std::string_view::npos) return false;
    int tail_groups = 0;
    std::string_view head = s;
    std::string_view tail = s.substr(last_colon + 1);
    if (tail.find('.') != std::string_view::npos) {
        if (!is_valid_ipv4(tail)) return false;
        head = s.substr(0, last_colon + 1);
        tail_groups = 2;
    }
    int groups = 0;
    bool compressed = false;
    std::size_t i = 0;
    if (head.substr(0, 2) == "::") {
        compressed = true;
        i = 2;
        if (i == head.size()) return tail_groups == 0;  // "::"
    } else if (head[0] == ':') {
        return false;
    }
    int digits = 0;
    for (; i < head.size(); ++i) {
        char c = head[i];
        if (c == ':') {
            if (digits == 0) {
                // "::" inside
                if (compressed) return false;
                compressed = true;
            } else {
                ++groups;
                digits = 0;
            }
            // ':' may not terminate unless part of "::" handled above or IPv4 tail follows
            if (i + 1 == head.size() && tail_groups == 0 && digits == 0 && !compressed) return false;
        } else if (std::isxdigit(static_cast<unsigned char>(c))) {
            if (++digits > 4) return false;
        } else {
            return false;
        }
    }
    if (digits > 0) ++groups;
    else if (!compressed && tail_groups == 0) return false;  // trailing ':'
    int total = groups + tail_groups;
    if (compressed) return total < 8 && total >= 1;
    return total == 8;
}

std::string format_score(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

}  // namespace skillguard
