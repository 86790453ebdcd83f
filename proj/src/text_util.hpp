#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace onboard::detail {

// Shortest representation that parses back to the identical value.
template <typename F>
void append_number(std::string& out, F v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

template <typename F>
std::string number_text(F v) {
    std::string s;
    append_number(s, v);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace onboard::detail
