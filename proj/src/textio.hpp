#pragma once

// Internal deterministic number formatting for CSV and config output.

#include <cstdio>
#include <string>

namespace probembed::textio {

// Fixed 6 decimal places; the format used by every CSV export.
inline std::string fmt_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Compact general formatting for config echoes and manifests.
inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace probembed::textio
