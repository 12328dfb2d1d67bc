#pragma once

namespace qfund {

inline constexpr const char* tool_name = "qfund";
inline constexpr const char* tool_version = "0.1.0";
inline constexpr int report_version = 1;

}  // namespace qfund
