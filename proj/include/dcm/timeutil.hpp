#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dcm {

/// Seconds since 1970-01-01T00:00:00Z.
using EpochSeconds = std::int64_t;

/// Mean Gregorian month (365.2425 days / 12), used to express time differences in months.
inline constexpr double kSecondsPerMonth = 2629746.0;

/// Parses "YYYY-MM-DDTHH:MM:SS" followed by "Z" or "+00:00" (a bare date is also accepted).
/// Throws DataError on anything else.
EpochSeconds parse_iso8601(std::string_view text);
/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(EpochSeconds ts);

/// Months since 1970-01 (January 1970 is 0).
std::int64_t month_index(EpochSeconds ts);
EpochSeconds month_start(std::int64_t month_idx);
/// "YYYY-MM" label for a month index.
std::string month_label(std::int64_t month_idx);

struct Timespan {
    EpochSeconds start = 0;
    EpochSeconds end = 0;

    bool contains(EpochSeconds ts) const { return ts >= start && ts <= end; }
    double months() const { return static_cast<double>(end - start) / kSecondsPerMonth; }
    friend bool operator==(const Timespan&, const Timespan&) = default;
};

/// Maps ts onto [0, 1] relative to span. Throws OutOfSpanError for ts outside the span
/// unless `clamp` is set, in which case the result is clamped to [0, 1].
double normalize_ts(EpochSeconds ts, const Timespan& span, bool clamp = false);

/// Inverse of normalize_ts (rounded to whole seconds).
EpochSeconds denormalize_ts(double u, const Timespan& span);

} // namespace dcm
