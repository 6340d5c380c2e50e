#ifndef MESHLINK_PRESETS_HPP
#define MESHLINK_PRESETS_HPP

#include "meshlink/error.hpp"
#include "meshlink/json_support.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace meshlink {

enum class PresetId : std::uint8_t
{
    ShortTurbo,
    ShortFast,
    ShortSlow,
    MediumFast,
    MediumSlow,
    LongFast,
    LongModerate,
    LongSlow,
};

inline constexpr std::size_t kPresetCount = 8;

/// A named Meshtastic (SF, BW, CR) combination.
struct ModemPreset
{
    PresetId id;
    std::string_view name;
    int sf;
    std::uint32_t bw_hz;
    int cr_denominator; ///< coding rate 4/cr_denominator
    std::string_view target;
    bool is_default;

    constexpr bool operator==(const ModemPreset&) const = default;
};

namespace detail {

inline constexpr std::array<ModemPreset, kPresetCount> kCatalog{{
    {PresetId::ShortTurbo, "ShortTurbo", 7, 500000, 5, "High Speed", false},
    {PresetId::ShortFast, "ShortFast", 7, 250000, 5, "Balanced Local", false},
    {PresetId::ShortSlow, "ShortSlow", 8, 250000, 5, "Balanced Fast", false},
    {PresetId::MediumFast, "MediumFast", 9, 250000, 5, "Balanced Mesh", false},
    {PresetId::MediumSlow, "MediumSlow", 10, 250000, 5, "Robust Mesh", false},
    {PresetId::LongFast, "LongFast", 11, 250000, 5, "Default Range", true},
    {PresetId::LongModerate, "LongModerate", 11, 125000, 8, "High Range", false},
    {PresetId::LongSlow, "LongSlow", 12, 125000, 8, "Maximum Range", false},
}};

/// Lower-cases and drops spaces, '_' and '-' so "Long Slow", "long_slow" and "LongSlow" compare equal.
inline std::string fold_name(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char c : s)
    {
        if (c == ' ' || c == '_' || c == '-')
        {
            continue;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

} // namespace detail

/// The eight presets in catalog order (ShortTurbo first, LongSlow last).
constexpr std::span<const ModemPreset, kPresetCount> preset_catalog() noexcept
{
    return detail::kCatalog;
}

constexpr const ModemPreset& preset(PresetId id) noexcept
{
    return detail::kCatalog[static_cast<std::size_t>(id)];
}

constexpr std::size_t preset_index(PresetId id) noexcept
{
    return static_cast<std::size_t>(id);
}

inline std::string valid_preset_names()
{
    std::string names;
    for (const auto& p : preset_catalog())
    {
        if (!names.empty())
        {
            names += ", ";
        }
        names += p.name;
    }
    return names;
}

/// Case-insensitive lookup accepting spaced, snake and kebab spellings.
inline const ModemPreset& preset_by_name(std::string_view name)
{
    const auto key = detail::fold_name(name);
    for (const auto& p : preset_catalog())
    {
        if (detail::fold_name(p.name) == key)
        {
            return p;
        }
    }
    throw ValidationError("unknown preset '" + std::string(name) + "' (valid: " + valid_preset_names() + ")",
                          "preset");
}

inline const ModemPreset& default_preset() noexcept
{
    return preset(PresetId::LongFast);
}

enum class PowerLabel : std::uint8_t
{
    Low,
    Medium,
    Max,
};

inline constexpr std::array<PowerLabel, 3> kPowerLabels{PowerLabel::Low, PowerLabel::Medium, PowerLabel::Max};

constexpr std::string_view to_string(PowerLabel label) noexcept
{
    switch (label)
    {
    case PowerLabel::Low:
        return "Low";
    case PowerLabel::Medium:
        return "Medium";
    case PowerLabel::Max:
        return "Max";
    }
    return "?";
}

inline PowerLabel power_label_by_name(std::string_view name)
{
    const auto key = detail::fold_name(name);
    if (key == "low")
    {
        return PowerLabel::Low;
    }
    if (key == "medium" || key == "med")
    {
        return PowerLabel::Medium;
    }
    if (key == "max" || key == "maximum")
    {
        return PowerLabel::Max;
    }
    throw ValidationError("unknown power level '" + std::string(name) + "' (valid: Low, Medium, Max)", "power");
}

struct TxPowerLevel
{
    PowerLabel label;
    double dbm;

    bool operator==(const TxPowerLevel&) const = default;
};

/// dBm value behind each qualitative power label. Max is the SX1262's effective
/// saturation point; Low and Medium are configurable assumptions.
struct PowerTable
{
    double low_dbm = 10.0;
    double medium_dbm = 17.0;
    double max_dbm = 21.0;

    static constexpr double kHardwareLimitDbm = 22.0;

    TxPowerLevel level(PowerLabel label) const noexcept
    {
        switch (label)
        {
        case PowerLabel::Low:
            return {label, low_dbm};
        case PowerLabel::Medium:
            return {label, medium_dbm};
        case PowerLabel::Max:
            break;
        }
        return {PowerLabel::Max, max_dbm};
    }

    void validate() const
    {
        if (!(low_dbm < medium_dbm && medium_dbm < max_dbm))
        {
            throw ValidationError("power levels must satisfy Low < Medium < Max", "power_table");
        }
        if (max_dbm > kHardwareLimitDbm)
        {
            throw ValidationError("Max power exceeds the 22 dBm transceiver limit", "power_table.max_dbm");
        }
    }
};

inline Json to_json(const ModemPreset& p)
{
    return Json{{"name", p.name},
                {"sf", p.sf},
                {"bw_hz", p.bw_hz},
                {"cr_denominator", p.cr_denominator},
                {"target", p.target},
                {"is_default", p.is_default}};
}

inline Json catalog_json()
{
    Json arr = Json::array();
    for (const auto& p : preset_catalog())
    {
        arr.push_back(to_json(p));
    }
    return arr;
}

} // namespace meshlink

#endif // MESHLINK_PRESETS_HPP
