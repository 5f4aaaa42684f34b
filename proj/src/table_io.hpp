#pragma once

// Internal helpers for line-oriented table files.

#include "fgc/types.hpp"

#include <charconv>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fgc::detail {

inline std::string slurp(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return slurp(in);
}

/// Iterates over lines of a buffer, stripping a trailing '\r'.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {
        if (text_.starts_with("\xEF\xBB\xBF")) text_.remove_prefix(3);
    }

    bool next(std::string_view& line) {
        if (pos_ >= text_.size()) return false;
        auto end = text_.find('\n', pos_);
        if (end == std::string_view::npos) end = text_.size();
        line = text_.substr(pos_, end - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = end + 1;
        ++line_number_;
        return true;
    }

    std::size_t line_number() const { return line_number_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_number_ = 0;
};

/// Splits one CSV record. Quoted fields may contain commas and doubled quotes;
/// their unescaped text lives in `storage`, which keeps element addresses stable.
inline bool split_csv(std::string_view line, std::vector<std::string_view>& fields, std::deque<std::string>& storage) {
    fields.clear();
    storage.clear();
    std::size_t pos = 0;
    while (true) {
        if (pos < line.size() && line[pos] == '"') {
            std::string& value = storage.emplace_back();
            ++pos;
            while (true) {
                if (pos >= line.size()) return false;
                if (line[pos] == '"') {
                    if (pos + 1 < line.size() && line[pos + 1] == '"') {
                        value += '"';
                        pos += 2;
                        continue;
                    }
                    ++pos;
                    break;
                }
                value += line[pos++];
            }
            fields.push_back(value);
            if (pos < line.size() && line[pos] != ',') return false;
        } else {
            auto end = line.find(',', pos);
            if (end == std::string_view::npos) end = line.size();
            fields.push_back(line.substr(pos, end - pos));
            pos = end;
        }
        if (pos >= line.size()) return true;
        ++pos;  // comma
        if (pos == line.size()) {
            fields.emplace_back();
            return true;
        }
    }
}

inline bool needs_quoting(std::string_view s) {
    return s.find_first_of(",\"\n\r") != std::string_view::npos;
}

inline void write_csv_field(std::string& out, std::string_view s) {
    if (!needs_quoting(s)) {
        out += s;
        return;
    }
    out += '"';
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

template <class T>
bool parse_number(std::string_view s, T& value) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace fgc::detail
