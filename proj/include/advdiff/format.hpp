// Locale-independent number formatting for CSV output.
#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace advdiff {

/// Exactly 17 significant digits; round-trips every finite double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace advdiff
