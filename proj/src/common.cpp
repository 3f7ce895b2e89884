#include "crosscast/common.hpp"

#include <chrono>
#include <cstdio>

namespace crosscast {

namespace {
namespace chr = std::chrono;
}

DayNumber parse_iso_date(const std::string& text) {
    int y = 0, m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%d-%d-%d%c", &y, &m, &d, &tail) != 3)
        throw SchemaError("malformed date '" + text + "' (expected YYYY-MM-DD)");
    chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                            chr::day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        throw SchemaError("invalid calendar date '" + text + "'");
    return chr::sys_days{ymd}.time_since_epoch().count();
}

std::string format_iso_date(DayNumber day) {
    chr::year_month_day ymd{chr::sys_days{chr::days{day}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

int year_of_day(DayNumber day) {
    chr::year_month_day ymd{chr::sys_days{chr::days{day}}};
    return static_cast<int>(ymd.year());
}

DayNumber first_day_of_year(int year) {
    chr::year_month_day ymd{chr::year{year}, chr::January, chr::day{1}};
    return chr::sys_days{ymd}.time_since_epoch().count();
}

std::uint64_t hash_string(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace crosscast
