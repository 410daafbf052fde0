#include "dcm/timeutil.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "dcm/error.hpp"

namespace dcm {
namespace {

using namespace std::chrono;

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) throw DataError("truncated timestamp '" + std::string(text) + "'");
    int value = 0;
    const char* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc() || ptr != first + len) {
        throw DataError("malformed timestamp '" + std::string(text) + "'");
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) {
        throw DataError("malformed timestamp '" + std::string(text) + "'");
    }
}

} // namespace

EpochSeconds parse_iso8601(std::string_view text) {
    const int y = parse_field(text, 0, 4);
    expect_char(text, 4, '-');
    const int mo = parse_field(text, 5, 2);
    expect_char(text, 7, '-');
    const int d = parse_field(text, 8, 2);
    int hh = 0, mm = 0, ss = 0;
    std::size_t pos = 10;
    if (text.size() > 10) {
        if (text[10] != 'T' && text[10] != ' ') throw DataError("malformed timestamp '" + std::string(text) + "'");
        hh = parse_field(text, 11, 2);
        expect_char(text, 13, ':');
        mm = parse_field(text, 14, 2);
        expect_char(text, 16, ':');
        ss = parse_field(text, 17, 2);
        pos = 19;
        std::string_view zone = text.substr(pos);
        if (zone != "Z" && zone != "+00:00" && !zone.empty()) {
            throw DataError("timestamp must be UTC ('Z' or '+00:00'): '" + std::string(text) + "'");
        }
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
        throw DataError("invalid calendar timestamp '" + std::string(text) + "'");
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<EpochSeconds>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(EpochSeconds ts) {
    const sys_seconds tp{seconds{ts}};
    const auto dp = floor<days>(tp);
    const year_month_day ymd{dp};
    const hh_mm_ss hms{tp - dp};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::int64_t month_index(EpochSeconds ts) {
    const year_month_day ymd{floor<days>(sys_seconds{seconds{ts}})};
    return (static_cast<std::int64_t>(static_cast<int>(ymd.year())) - 1970) * 12 +
           (static_cast<unsigned>(ymd.month()) - 1);
}

EpochSeconds month_start(std::int64_t month_idx) {
    const std::int64_t y = 1970 + (month_idx >= 0 ? month_idx / 12 : -((-month_idx + 11) / 12));
    const std::int64_t m = month_idx - (y - 1970) * 12;
    const year_month_day ymd{year{static_cast<int>(y)}, month{static_cast<unsigned>(m + 1)}, day{1}};
    return static_cast<EpochSeconds>(sys_days{ymd}.time_since_epoch().count()) * 86400;
}

std::string month_label(std::int64_t month_idx) { return format_iso8601(month_start(month_idx)).substr(0, 7); }

double normalize_ts(EpochSeconds ts, const Timespan& span, bool clamp) {
    if (span.end <= span.start) throw DataError("degenerate timespan");
    if (!span.contains(ts)) {
        if (!clamp) {
            throw OutOfSpanError("timestamp " + format_iso8601(ts) + " outside timespan [" +
                                 format_iso8601(span.start) + ", " + format_iso8601(span.end) + "]");
        }
        ts = std::clamp(ts, span.start, span.end);
    }
    return static_cast<double>(ts - span.start) / static_cast<double>(span.end - span.start);
}

EpochSeconds denormalize_ts(double u, const Timespan& span) {
    return span.start + static_cast<EpochSeconds>(std::llround(u * static_cast<double>(span.end - span.start)));
}

} // namespace dcm
