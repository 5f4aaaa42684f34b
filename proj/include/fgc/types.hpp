#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fgc {

/// Raised for malformed or inconsistent user input (bad files, bad flags).
/// The CLI maps it to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Attribute : std::uint8_t { species = 0, sex = 1, age = 2 };
enum class Label : std::uint8_t { class0 = 0, class1 = 1, unknown = 2 };

inline constexpr std::size_t kNumAttributes = 3;
inline constexpr std::size_t kClassesPerAttribute = 2;
inline constexpr std::size_t kLabelsPerAttribute = 3;  // two classes + unknown

inline constexpr std::array<Attribute, kNumAttributes> kAttributes{
    Attribute::species, Attribute::sex, Attribute::age};
inline constexpr std::array<Label, kClassesPerAttribute> kClasses{Label::class0, Label::class1};

constexpr std::size_t index(Attribute a) { return static_cast<std::size_t>(a); }
constexpr std::size_t index(Label l) { return static_cast<std::size_t>(l); }

std::string_view attribute_name(Attribute a);

/// Literal class name used in files: elephant/fur, male/female, adult/pup, unknown.
std::string_view label_name(Attribute a, Label l);

/// Inverse of label_name. Empty text maps to unknown. Throws InputError on
/// anything else.
Label parse_label(Attribute a, std::string_view text);

Attribute parse_attribute(std::string_view text);

/// One response per attribute; missing responses are stored as unknown.
using Responses = std::array<Label, kNumAttributes>;

inline constexpr Responses kAllUnknown{Label::unknown, Label::unknown, Label::unknown};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

struct DotAnnotation {
    std::string image_id;
    std::string user_id;
    double x = 0.0;
    double y = 0.0;
    Responses responses = kAllUnknown;

    Point point() const { return {x, y}; }
    Label response(Attribute a) const { return responses[index(a)]; }

    friend bool operator==(const DotAnnotation&, const DotAnnotation&) = default;
};

struct ImageRecord {
    std::string image_id;
    int width = 0;
    int height = 0;
    Timestamp timestamp{};

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// RFC 3339 date-time, e.g. 2014-11-03T10:00:00Z or 2014-11-03T10:00:00.25+02:00.
Timestamp parse_rfc3339(std::string_view text);

/// UTC rendering with a `Z` suffix; fractional seconds only when nonzero.
std::string format_rfc3339(Timestamp t);

}  // namespace fgc
