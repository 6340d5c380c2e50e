#ifndef MESHLINK_PROPAGATION_HPP
#define MESHLINK_PROPAGATION_HPP

#include "meshlink/error.hpp"
#include "meshlink/json_support.hpp"
#include "meshlink/presets.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

namespace meshlink {

enum class PathLossKind : std::uint8_t
{
    FreeSpace,
    LogDistance,
};

constexpr std::string_view to_string(PathLossKind k) noexcept
{
    return k == PathLossKind::FreeSpace ? "free_space" : "log_distance";
}

inline PathLossKind path_loss_kind_by_name(std::string_view name)
{
    const auto key = detail::fold_name(name);
    if (key == "freespace")
    {
        return PathLossKind::FreeSpace;
    }
    if (key == "logdistance")
    {
        return PathLossKind::LogDistance;
    }
    throw ValidationError("unknown path-loss kind '" + std::string(name) + "' (valid: free_space, log_distance)",
                          "kind");
}

/// Free-space path loss: 32.45 + 20 log10(f/MHz) + 20 log10(d/km).
inline double fspl_db(double frequency_hz, double distance_m) noexcept
{
    return 32.45 + 20.0 * std::log10(frequency_hz / 1e6) + 20.0 * std::log10(distance_m / 1000.0);
}

/// Log-distance model PL(d) = PL(d0) + 10 n log10(d/d0) + excess. FreeSpace pins n = 2,
/// excess = 0 and PL(d0) = FSPL(d0).
struct PathLossModel
{
    std::string name = "dense-urban";
    PathLossKind kind = PathLossKind::LogDistance;
    double frequency_hz = 915e6;
    double exponent = 3.5;
    double reference_distance_m = 1.0;
    /// Unset means FSPL at the reference distance.
    std::optional<double> reference_loss_db;
    double excess_loss_db = 0.0;

    bool operator==(const PathLossModel&) const = default;

    double effective_exponent() const noexcept { return kind == PathLossKind::FreeSpace ? 2.0 : exponent; }

    double effective_excess_db() const noexcept { return kind == PathLossKind::FreeSpace ? 0.0 : excess_loss_db; }

    double reference_loss() const noexcept
    {
        if (kind == PathLossKind::FreeSpace || !reference_loss_db)
        {
            return fspl_db(frequency_hz, reference_distance_m);
        }
        return *reference_loss_db;
    }

    void validate() const
    {
        if (!(frequency_hz > 0.0))
        {
            throw ValidationError("must be > 0", "frequency_hz");
        }
        if (!(reference_distance_m > 0.0))
        {
            throw ValidationError("must be > 0", "reference_distance_m");
        }
        if (kind == PathLossKind::LogDistance && !(exponent >= 1.6 && exponent <= 6.5))
        {
            throw ValidationError("must lie in [1.6, 6.5]", "exponent");
        }
    }
};

inline double path_loss_db(const PathLossModel& model, double distance_m)
{
    if (distance_m < model.reference_distance_m)
    {
        throw ValidationError("distance " + std::to_string(distance_m) + " m is below the reference distance",
                              "distance_m");
    }
    return model.reference_loss() +
           10.0 * model.effective_exponent() * std::log10(distance_m / model.reference_distance_m) +
           model.effective_excess_db();
}

/// Distance at which the path loss uses up the budget minus the fade margin.
inline double max_range_m(const PathLossModel& model, double link_budget_db, double fade_margin_db)
{
    const double allowed = link_budget_db - fade_margin_db;
    const double floor_db = model.reference_loss() + model.effective_excess_db();
    if (allowed < floor_db)
    {
        throw ValidationError("budget " + std::to_string(allowed) + " dB does not cover the " +
                                  std::to_string(floor_db) + " dB loss at the reference distance",
                              "link_budget_db");
    }
    return model.reference_distance_m * std::pow(10.0, (allowed - floor_db) / (10.0 * model.effective_exponent()));
}

inline constexpr double kDefaultOverlapFactor = 3.0;

/// Nodes per km^2 so that every point lies within `range_m` of a node, times the overlap slack.
inline int density_per_km2(double range_m, double overlap_factor = kDefaultOverlapFactor)
{
    if (!(range_m > 0.0))
    {
        throw ValidationError("must be > 0", "range_m");
    }
    if (!(overlap_factor >= 1.0))
    {
        throw ValidationError("must be >= 1", "overlap_factor");
    }
    const double range_km = range_m / 1000.0;
    return static_cast<int>(std::ceil(overlap_factor / (std::numbers::pi * range_km * range_km)));
}

enum class Regime : std::uint8_t
{
    HighDensity,
    BalancedUrban,
    MaximumRange,
};

constexpr std::string_view to_string(Regime r) noexcept
{
    switch (r)
    {
    case Regime::HighDensity:
        return "HighDensity";
    case Regime::BalancedUrban:
        return "BalancedUrban";
    case Regime::MaximumRange:
        return "MaximumRange";
    }
    return "?";
}

constexpr Regime regime_for(const ModemPreset& p) noexcept
{
    switch (p.id)
    {
    case PresetId::ShortTurbo:
    case PresetId::ShortFast:
    case PresetId::ShortSlow:
        return Regime::HighDensity;
    case PresetId::MediumFast:
    case PresetId::MediumSlow:
    case PresetId::LongFast:
        return Regime::BalancedUrban;
    case PresetId::LongModerate:
    case PresetId::LongSlow:
        break;
    }
    return Regime::MaximumRange;
}

// --- named models ----------------------------------------------------------------------

inline constexpr std::string_view kPathLossPresetsDocument = R"({
  "dense-urban": {"kind": "log_distance", "frequency_hz": 915000000.0, "exponent": 3.5, "reference_distance_m": 1.0, "excess_loss_db": 0.0},
  "urban":       {"kind": "log_distance", "frequency_hz": 915000000.0, "exponent": 4.0, "reference_distance_m": 1.0, "excess_loss_db": 0.0},
  "suburban":    {"kind": "log_distance", "frequency_hz": 915000000.0, "exponent": 2.8, "reference_distance_m": 1.0, "excess_loss_db": 0.0},
  "free-space":  {"kind": "free_space",   "frequency_hz": 915000000.0, "reference_distance_m": 1.0}
})";

inline Json to_json(const PathLossModel& m)
{
    Json j{{"name", m.name},
           {"kind", to_string(m.kind)},
           {"frequency_hz", m.frequency_hz},
           {"exponent", m.effective_exponent()},
           {"reference_distance_m", m.reference_distance_m},
           {"reference_loss_db", m.reference_loss()},
           {"excess_loss_db", m.effective_excess_db()}};
    return j;
}

inline PathLossModel path_loss_model_from_json(const Json& doc, std::string name, std::string_view path)
{
    if (!doc.is_object())
    {
        throw ValidationError("expected an object", std::string(path));
    }
    PathLossModel m;
    m.name = get_field_or<std::string>(doc, "name", std::move(name), path);
    if (doc.contains("kind"))
    {
        try
        {
            m.kind = path_loss_kind_by_name(get_field<std::string>(doc, "kind", path));
        }
        catch (const ValidationError& e)
        {
            throw ValidationError(e.message(), json_detail::join_path(path, "kind"));
        }
    }
    m.frequency_hz = get_field_or(doc, "frequency_hz", m.frequency_hz, path);
    m.exponent = get_field_or(doc, "exponent", m.exponent, path);
    m.reference_distance_m = get_field_or(doc, "reference_distance_m", m.reference_distance_m, path);
    if (doc.contains("reference_loss_db") && !doc.at("reference_loss_db").is_null())
    {
        m.reference_loss_db = get_field<double>(doc, "reference_loss_db", path);
    }
    m.excess_loss_db = get_field_or(doc, "excess_loss_db", m.excess_loss_db, path);
    try
    {
        m.validate();
    }
    catch (const ValidationError& e)
    {
        throw ValidationError(e.message(), json_detail::join_path(path, e.field()));
    }
    return m;
}

/// Parses a document of models keyed by name.
inline std::map<std::string, PathLossModel> path_loss_models_from_json(const Json& doc)
{
    if (!doc.is_object())
    {
        throw ValidationError("expected an object keyed by model name", "path_loss_models");
    }
    std::map<std::string, PathLossModel> out;
    for (const auto& [key, value] : doc.items())
    {
        out.emplace(key, path_loss_model_from_json(value, key, key));
    }
    return out;
}

inline const std::map<std::string, PathLossModel>& builtin_path_loss_models()
{
    static const auto models =
        path_loss_models_from_json(parse_json_text(kPathLossPresetsDocument, "built-in path-loss models"));
    return models;
}

inline PathLossModel path_loss_model_by_name(std::string_view name)
{
    const auto& models = builtin_path_loss_models();
    if (auto it = models.find(std::string(name)); it != models.end())
    {
        return it->second;
    }
    std::string valid;
    for (const auto& [key, _] : models)
    {
        valid += (valid.empty() ? "" : ", ") + key;
    }
    throw ValidationError("unknown path-loss model '" + std::string(name) + "' (valid: " + valid + ")",
                          "path_loss_model");
}

} // namespace meshlink

#endif // MESHLINK_PROPAGATION_HPP
