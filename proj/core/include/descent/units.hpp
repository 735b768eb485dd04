#pragma once

namespace descent {

/// One flight level expressed in metres (100 ft).
inline constexpr double kMetresPerFl = 30.48;

/// Grid floor used throughout: FL150.
inline constexpr double kFl150Metres = 150.0 * kMetresPerFl;  // 4572 m

/// ft/min -> m/s
inline constexpr double kFtPerMinToMps = 0.3048 / 60.0;

inline constexpr double fl_to_metres(double fl) { return fl * kMetresPerFl; }
inline constexpr double metres_to_fl(double h) { return h / kMetresPerFl; }

}  // namespace descent
