#ifndef MESHLINK_FORMAT_HPP
#define MESHLINK_FORMAT_HPP

#include <cstdio>
#include <string>

namespace meshlink {

/// Fixed-point rendering with '.' as decimal separator regardless of locale.
inline std::string format_fixed(double value, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    std::string s(buf);
    for (auto& c : s)
    {
        if (c == ',')
        {
            c = '.';
        }
    }
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos)
    {
        s.erase(0, 1); // "-0.00" -> "0.00"
    }
    return s;
}

} // namespace meshlink

#endif // MESHLINK_FORMAT_HPP
