#include "fgc/types.hpp"

#include <charconv>
#include <cstdio>

namespace fgc {

namespace {

constexpr std::array<std::array<std::string_view, kLabelsPerAttribute>, kNumAttributes> kLabelNames{{
    {"elephant", "fur", "unknown"},
    {"male", "female", "unknown"},
    {"adult", "pup", "unknown"},
}};

int parse_digits(std::string_view text, std::size_t pos, std::size_t count) {
    if (pos + count > text.size()) {
        throw InputError("truncated timestamp '" + std::string(text) + "'");
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + count, value);
    if (ec != std::errc{} || ptr != text.data() + pos + count) {
        throw InputError("invalid timestamp '" + std::string(text) + "'");
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) {
        throw InputError("invalid timestamp '" + std::string(text) + "'");
    }
}

}  // namespace

std::string_view attribute_name(Attribute a) {
    switch (a) {
        case Attribute::species: return "species";
        case Attribute::sex: return "sex";
        case Attribute::age: return "age";
    }
    return "?";
}

std::string_view label_name(Attribute a, Label l) { return kLabelNames[index(a)][index(l)]; }

Label parse_label(Attribute a, std::string_view text) {
    if (text.empty()) return Label::unknown;
    const auto& names = kLabelNames[index(a)];
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == text) return static_cast<Label>(i);
    }
    throw InputError("invalid " + std::string(attribute_name(a)) + " value '" + std::string(text) + "'");
}

Attribute parse_attribute(std::string_view text) {
    for (Attribute a : kAttributes) {
        if (attribute_name(a) == text) return a;
    }
    throw InputError("unknown attribute '" + std::string(text) + "'");
}

Timestamp parse_rfc3339(std::string_view text) {
    using namespace std::chrono;
    const int year = parse_digits(text, 0, 4);
    expect_char(text, 4, '-');
    const int month = parse_digits(text, 5, 2);
    expect_char(text, 7, '-');
    const int day = parse_digits(text, 8, 2);
    if (text.size() <= 10 || (text[10] != 'T' && text[10] != 't' && text[10] != ' ')) {
        throw InputError("invalid timestamp '" + std::string(text) + "'");
    }
    const int hour = parse_digits(text, 11, 2);
    expect_char(text, 13, ':');
    const int minute = parse_digits(text, 14, 2);
    expect_char(text, 16, ':');
    const int second = parse_digits(text, 17, 2);

    std::size_t pos = 19;
    std::int64_t micros = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        std::int64_t scale = 100000;
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            micros += (text[pos] - '0') * scale;
            scale /= 10;
            ++pos;
        }
        if (pos == start) throw InputError("invalid timestamp '" + std::string(text) + "'");
    }

    int offset_minutes = 0;
    if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
        ++pos;
    } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        const int sign = text[pos] == '-' ? -1 : 1;
        const int oh = parse_digits(text, pos + 1, 2);
        expect_char(text, pos + 3, ':');
        const int om = parse_digits(text, pos + 4, 2);
        offset_minutes = sign * (oh * 60 + om);
        pos += 6;
    } else {
        throw InputError("timestamp '" + std::string(text) + "' lacks a UTC offset");
    }
    if (pos != text.size()) throw InputError("invalid timestamp '" + std::string(text) + "'");

    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                             std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
        throw InputError("timestamp out of range '" + std::string(text) + "'");
    }
    const auto t = sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second} - minutes{offset_minutes};
    return time_point_cast<microseconds>(t) + microseconds{micros};
}

std::string format_rfc3339(Timestamp t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    auto rem = t - day;
    const auto h = duration_cast<hours>(rem);
    rem -= h;
    const auto m = duration_cast<minutes>(rem);
    rem -= m;
    const auto s = duration_cast<seconds>(rem);
    rem -= s;
    char buf[64];
    int n = std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                          static_cast<int>(h.count()), static_cast<int>(m.count()), static_cast<int>(s.count()));
    std::string out(buf, static_cast<std::size_t>(n));
    if (rem.count() != 0) {
        std::snprintf(buf, sizeof(buf), ".%06lld", static_cast<long long>(rem.count()));
        std::string frac(buf);
        while (frac.back() == '0') frac.pop_back();
        out += frac;
    }
    out += 'Z';
    return out;
}

}  // namespace fgc
