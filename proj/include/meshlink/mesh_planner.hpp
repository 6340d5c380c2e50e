#ifndef MESHLINK_MESH_PLANNER_HPP
#define MESHLINK_MESH_PLANNER_HPP

#include "meshlink/error.hpp"
#include "meshlink/format.hpp"
#include "meshlink/json_support.hpp"
#include "meshlink/phy_model.hpp"
#include "meshlink/presets.hpp"
#include "meshlink/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace meshlink {

struct Node
{
    std::string id;
    double x_m = 0.0;
    double y_m = 0.0;
    double antenna_gain_db = 0.0;

    bool operator==(const Node&) const = default;
};

/// A planning snapshot: where the nodes are and how they talk.
struct Scenario
{
    std::string name;
    std::vector<Node> nodes;
    PresetId preset = PresetId::LongFast;
    TxPowerLevel power{PowerLabel::Max, 21.0};
    PathLossModel path_loss;
    RadioModel radio;
    double fade_margin_db = 5.0;
    int hop_limit = 3;
    /// Reported ranges are capped here and flagged terrain-limited.
    double range_ceiling_m = 5000.0;
    double overlap_factor = kDefaultOverlapFactor;
    double forwarding_delay_s = 0.5;
    int payload_bytes = kDefaultPayloadBytes;

    bool operator==(const Scenario&) const = default;

    const ModemPreset& modem() const noexcept { return meshlink::preset(preset); }

    std::size_t index_of(std::string_view id) const
    {
        for (std::size_t i = 0; i < nodes.size(); ++i)
        {
            if (nodes[i].id == id)
            {
                return i;
            }
        }
        throw ValidationError("unknown node id '" + std::string(id) + "'", "node");
    }

    void validate() const
    {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < nodes.size(); ++i)
        {
            const auto field = "nodes[" + std::to_string(i) + "]";
            const auto& n = nodes[i];
            if (n.id.empty())
            {
                throw ValidationError("node id must not be empty", field + ".id");
            }
            if (!seen.insert(n.id).second)
            {
                throw ValidationError("duplicate node id '" + n.id + "'", field + ".id");
            }
            if (!std::isfinite(n.x_m) || !std::isfinite(n.y_m))
            {
                throw ValidationError("coordinates must be finite", field);
            }
            if (!std::isfinite(n.antenna_gain_db))
            {
                throw ValidationError("must be finite", field + ".antenna_gain_db");
            }
        }
        if (hop_limit < 1)
        {
            throw ValidationError("must be >= 1", "hop_limit");
        }
        if (!(fade_margin_db >= 0.0))
        {
            throw ValidationError("must be >= 0", "fade_margin_db");
        }
        if (!(range_ceiling_m > 0.0))
        {
            throw ValidationError("must be > 0", "range_ceiling_m");
        }
        if (!(overlap_factor >= 1.0))
        {
            throw ValidationError("must be >= 1", "overlap_factor");
        }
        if (!(forwarding_delay_s >= 0.0))
        {
            throw ValidationError("must be >= 0", "forwarding_delay_s");
        }
        check_payload(payload_bytes);
        path_loss.validate();
        radio.validate();
    }
};

inline double distance_m(const Node& a, const Node& b) noexcept
{
    return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

/// Loss the link can absorb before the receiver drops below sensitivity.
inline double link_budget_db(const Scenario& s, const ModemPreset& p, double gain_a_db = 0.0, double gain_b_db = 0.0)
{
    return s.power.dbm + gain_a_db + gain_b_db - sensitivity_dbm(p, s.radio);
}

struct LinkAssessment
{
    std::string a;
    std::string b;
    double distance_m;
    double path_loss_db;
    double budget_db;
    double margin_db; ///< budget - path loss - fade margin
    bool closed;

    bool operator==(const LinkAssessment&) const = default;
};

namespace detail {

inline LinkAssessment assess_pair(const Scenario& s, const Node& a, const Node& b)
{
    LinkAssessment l;
    l.a = a.id;
    l.b = b.id;
    l.distance_m = distance_m(a, b);
    // co-located nodes see the reference-distance loss
    l.path_loss_db = path_loss_db(s.path_loss, std::max(l.distance_m, s.path_loss.reference_distance_m));
    l.budget_db = link_budget_db(s, s.modem(), a.antenna_gain_db, b.antenna_gain_db);
    l.margin_db = l.budget_db - l.path_loss_db - s.fade_margin_db;
    l.closed = l.margin_db >= 0.0;
    return l;
}

/// closed[i][j] for every ordered pair.
inline std::vector<std::vector<bool>> closed_matrix(const Scenario& s)
{
    const auto n = s.nodes.size();
    std::vector<std::vector<bool>> closed(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
    {
        for (std::size_t j = i + 1; j < n; ++j)
        {
            const bool c = assess_pair(s, s.nodes[i], s.nodes[j]).closed;
            closed[i][j] = c;
            closed[j][i] = c;
        }
    }
    return closed;
}

} // namespace detail

/// Every unordered pair, in node order (i < j).
inline std::vector<LinkAssessment> assess_links(const Scenario& s)
{
    if (s.nodes.size() < 2)
    {
        throw ValidationError("at least two nodes are needed to assess links", "nodes");
    }
    s.validate();
    std::vector<LinkAssessment> links;
    links.reserve(s.nodes.size() * (s.nodes.size() - 1) / 2);
    for (std::size_t i = 0; i < s.nodes.size(); ++i)
    {
        for (std::size_t j = i + 1; j < s.nodes.size(); ++j)
        {
            links.push_back(detail::assess_pair(s, s.nodes[i], s.nodes[j]));
        }
    }
    return links;
}

struct Connectivity
{
    /// Node ids per connected component, ordered by first member's position in the scenario.
    std::vector<std::vector<std::string>> components;
    /// Minimum hop count between node i and node j, or -1 when beyond the hop limit.
    std::vector<std::vector<int>> hops;

    bool reachable(std::size_t i, std::size_t j) const { return hops.at(i).at(j) >= 0; }
};

/// Components over closed links, and bounded-hop reachability by breadth-first search.
inline Connectivity connectivity(const Scenario& s)
{
    if (s.nodes.empty())
    {
        throw ValidationError("at least one node is needed", "nodes");
    }
    s.validate();
    const auto n = s.nodes.size();
    const auto closed = detail::closed_matrix(s);

    Connectivity out;
    out.hops.assign(n, std::vector<int>(n, -1));
    std::vector<int> component_of(n, -1);
    for (std::size_t src = 0; src < n; ++src)
    {
        std::vector<int> depth(n, -1);
        std::deque<std::size_t> queue{src};
        depth[src] = 0;
        while (!queue.empty())
        {
            const auto u = queue.front();
            queue.pop_front();
            for (std::size_t v = 0; v < n; ++v)
            {
                if (closed[u][v] && depth[v] < 0)
                {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (std::size_t dst = 0; dst < n; ++dst)
        {
            if (depth[dst] >= 0 && depth[dst] <= s.hop_limit)
            {
                out.hops[src][dst] = depth[dst];
            }
        }
        if (component_of[src] < 0)
        {
            const auto c = static_cast<int>(out.components.size());
            out.components.emplace_back();
            for (std::size_t v = 0; v < n; ++v)
            {
                if (depth[v] >= 0)
                {
                    component_of[v] = c;
                    out.components.back().push_back(s.nodes[v].id);
                }
            }
        }
    }
    return out;
}

/// Hop count times (airtime + forwarding delay); nullopt when the pair is out of reach.
inline std::optional<double> latency_estimate_s(const Scenario& s, std::string_view a, std::string_view b,
                                                std::optional<int> payload_bytes = std::nullopt)
{
    const auto ia = s.index_of(a);
    const auto ib = s.index_of(b);
    if (ia == ib)
    {
        throw ValidationError("latency endpoints must differ", "node");
    }
    const int payload = payload_bytes.value_or(s.payload_bytes);
    check_payload(payload);
    const auto conn = connectivity(s);
    const int hops = conn.hops[ia][ib];
    if (hops < 0)
    {
        return std::nullopt;
    }
    return hops * (time_on_air_s(s.modem(), payload) + s.forwarding_delay_s);
}

struct PresetRange
{
    const ModemPreset* preset;
    Regime regime;
    double sensitivity_dbm;
    double budget_db;
    std::optional<double> range_m; ///< nullopt when the budget cannot cover the reference loss
    bool terrain_limited;
    std::optional<int> density_per_km2;
    double airtime_s;
};

struct PlanSummary
{
    const ModemPreset* preset;
    Regime regime;
    PresetRange selected;
    std::vector<PresetRange> preset_ranges; ///< catalog order
    std::size_t node_count;
    std::size_t link_count;
    std::size_t closed_link_count;
    std::size_t component_count;
    std::vector<std::string> isolated_nodes;
};

/// Range, density and airtime for one preset under the scenario's model and margin, 0 dBi antennas.
inline PresetRange preset_range(const Scenario& s, const ModemPreset& p)
{
    PresetRange r{&p, regime_for(p), sensitivity_dbm(p, s.radio), 0.0, std::nullopt, false, std::nullopt,
                  time_on_air_s(p, s.payload_bytes)};
    r.budget_db = link_budget_db(s, p);
    const double floor_db = s.path_loss.reference_loss() + s.path_loss.effective_excess_db();
    if (r.budget_db - s.fade_margin_db >= floor_db)
    {
        double range = max_range_m(s.path_loss, r.budget_db, s.fade_margin_db);
        if (range > s.range_ceiling_m)
        {
            range = s.range_ceiling_m;
            r.terrain_limited = true;
        }
        r.range_m = range;
        r.density_per_km2 = density_per_km2(range, s.overlap_factor);
    }
    return r;
}

inline PlanSummary plan_summary(const Scenario& s)
{
    const auto conn = connectivity(s);
    PlanSummary sum{&s.modem(), regime_for(s.modem()), preset_range(s, s.modem()), {}, s.nodes.size(), 0, 0,
                    conn.components.size(), {}};
    for (const auto& p : preset_catalog())
    {
        sum.preset_ranges.push_back(preset_range(s, p));
    }
    if (s.nodes.size() >= 2)
    {
        const auto links = assess_links(s);
        sum.link_count = links.size();
        sum.closed_link_count =
            static_cast<std::size_t>(std::count_if(links.begin(), links.end(), [](const auto& l) { return l.closed; }));
    }
    for (const auto& component : conn.components)
    {
        if (component.size() == 1)
        {
            sum.isolated_nodes.push_back(component.front());
        }
    }
    return sum;
}

// --- scenario documents ----------------------------------------------------------------

inline Scenario scenario_from_json(const Json& doc)
{
    if (!doc.is_object())
    {
        throw ValidationError("scenario must be a JSON object");
    }
    Scenario s;
    s.name = get_field_or<std::string>(doc, "name", "");
    if (!doc.contains("nodes") || !doc.at("nodes").is_array())
    {
        throw ValidationError("expected an array of nodes", "nodes");
    }
    const auto& nodes = doc.at("nodes");
    if (nodes.empty())
    {
        throw ValidationError("must contain at least one node", "nodes");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i)
    {
        const auto path = "nodes[" + std::to_string(i) + "]";
        const auto& nj = nodes[i];
        if (!nj.is_object())
        {
            throw ValidationError("expected an object", path);
        }
        Node n;
        n.id = get_field<std::string>(nj, "id", path);
        n.x_m = get_field<double>(nj, "x_m", path);
        n.y_m = get_field<double>(nj, "y_m", path);
        n.antenna_gain_db = get_field_or(nj, "antenna_gain_db", 0.0, path);
        s.nodes.push_back(std::move(n));
    }
    if (doc.contains("preset"))
    {
        s.preset = preset_by_name(get_field<std::string>(doc, "preset")).id;
    }
    PowerTable table;
    auto label = PowerLabel::Max;
    if (doc.contains("power"))
    {
        label = power_label_by_name(get_field<std::string>(doc, "power"));
    }
    s.power = table.level(label);
    s.power.dbm = get_field_or(doc, "power_dbm", s.power.dbm);

    if (doc.contains("path_loss_model"))
    {
        const auto& m = doc.at("path_loss_model");
        s.path_loss = m.is_string() ? path_loss_model_by_name(m.get<std::string>())
                                    : path_loss_model_from_json(m, "custom", "path_loss_model");
    }
    else
    {
        s.path_loss = path_loss_model_by_name("dense-urban");
    }
    if (doc.contains("radio_model"))
    {
        const auto& m = doc.at("radio_model");
        s.radio = m.is_string() ? radio_model_by_name(m.get<std::string>()) : radio_model_from_json(m);
    }
    if (doc.contains("sensitivity_source"))
    {
        try
        {
            s.radio.sensitivity_source = sensitivity_source_by_name(get_field<std::string>(doc, "sensitivity_source"));
        }
        catch (const ValidationError& e)
        {
            throw ValidationError(e.message(), "sensitivity_source");
        }
    }
    s.fade_margin_db = get_field_or(doc, "fade_margin_db", s.fade_margin_db);
    s.hop_limit = get_field_or(doc, "hop_limit", s.hop_limit);
    s.range_ceiling_m = get_field_or(doc, "range_ceiling_m", s.range_ceiling_m);
    s.overlap_factor = get_field_or(doc, "overlap_factor", s.overlap_factor);
    s.forwarding_delay_s = get_field_or(doc, "forwarding_delay_s", s.forwarding_delay_s);
    s.payload_bytes = get_field_or(doc, "payload_bytes", s.payload_bytes);
    s.validate();
    return s;
}

inline Json to_json(const Scenario& s)
{
    Json nodes = Json::array();
    for (const auto& n : s.nodes)
    {
        nodes.push_back(Json{{"id", n.id}, {"x_m", n.x_m}, {"y_m", n.y_m}, {"antenna_gain_db", n.antenna_gain_db}});
    }
    auto path_loss = to_json(s.path_loss);
    return Json{{"name", s.name},
                {"nodes", nodes},
                {"preset", s.modem().name},
                {"power", to_string(s.power.label)},
                {"power_dbm", s.power.dbm},
                {"path_loss_model", path_loss},
                {"radio_model", to_json(s.radio)},
                {"fade_margin_db", s.fade_margin_db},
                {"hop_limit", s.hop_limit},
                {"range_ceiling_m", s.range_ceiling_m},
                {"overlap_factor", s.overlap_factor},
                {"forwarding_delay_s", s.forwarding_delay_s},
                {"payload_bytes", s.payload_bytes}};
}

inline Json to_json(const LinkAssessment& l)
{
    return Json{{"a", l.a},
                {"b", l.b},
                {"distance_m", l.distance_m},
                {"path_loss_db", l.path_loss_db},
                {"budget_db", l.budget_db},
                {"margin_db", l.margin_db},
                {"closed", l.closed}};
}

inline Json to_json(const Connectivity& c)
{
    Json hops = Json::array();
    for (const auto& row : c.hops)
    {
        Json r = Json::array();
        for (int h : row)
        {
            r.push_back(h >= 0 ? Json(h) : Json(nullptr));
        }
        hops.push_back(r);
    }
    return Json{{"component_count", c.components.size()}, {"components", c.components}, {"hops", hops}};
}

inline Json to_json(const PresetRange& r)
{
    return Json{{"preset", r.preset->name},
                {"regime", to_string(r.regime)},
                {"sensitivity_dbm", r.sensitivity_dbm},
                {"budget_db", r.budget_db},
                {"range_m", r.range_m ? Json(*r.range_m) : Json(nullptr)},
                {"terrain_limited", r.terrain_limited},
                {"density_per_km2", r.density_per_km2 ? Json(*r.density_per_km2) : Json(nullptr)},
                {"airtime_s", r.airtime_s}};
}

inline Json to_json(const PlanSummary& p)
{
    Json ranges = Json::array();
    for (const auto& r : p.preset_ranges)
    {
        ranges.push_back(to_json(r));
    }
    return Json{{"preset", p.preset->name},
                {"regime", to_string(p.regime)},
                {"sensitivity_dbm", p.selected.sensitivity_dbm},
                {"link_budget_db", p.selected.budget_db},
                {"max_range_m", p.selected.range_m ? Json(*p.selected.range_m) : Json(nullptr)},
                {"terrain_limited", p.selected.terrain_limited},
                {"density_per_km2",
                 p.selected.density_per_km2 ? Json(*p.selected.density_per_km2) : Json(nullptr)},
                {"node_count", p.node_count},
                {"link_count", p.link_count},
                {"closed_link_count", p.closed_link_count},
                {"component_count", p.component_count},
                {"isolated_nodes", p.isolated_nodes},
                {"preset_ranges", ranges}};
}

/// Links, connectivity and summary in one document; shared by the CLI and the HTTP service.
inline Json assessment_json(const Scenario& s)
{
    s.validate();
    Json links = Json::array();
    if (s.nodes.size() >= 2)
    {
        for (const auto& l : assess_links(s))
        {
            links.push_back(to_json(l));
        }
    }
    return Json{{"schema_version", kSchemaVersion},
                {"scenario", s.name},
                {"links", links},
                {"connectivity", to_json(connectivity(s))},
                {"summary", to_json(plan_summary(s))}};
}

namespace detail {

/// Left-aligned first column, right-aligned numbers.
inline std::string render_rows(const std::vector<std::vector<std::string>>& rows)
{
    std::vector<std::size_t> width;
    for (const auto& row : rows)
    {
        width.resize(std::max(width.size(), row.size()), 0);
        for (std::size_t c = 0; c < row.size(); ++c)
        {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    std::string out;
    for (const auto& row : rows)
    {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c)
        {
            const auto pad = std::string(width[c] - row[c].size(), ' ');
            if (c > 0)
            {
                line += "  ";
            }
            line += c == 0 ? row[c] + pad : pad + row[c];
        }
        while (!line.empty() && line.back() == ' ')
        {
            line.pop_back();
        }
        out += line + "\n";
    }
    return out;
}

inline std::string opt_fixed(const std::optional<double>& v, int decimals)
{
    return v ? format_fixed(*v, decimals) : std::string("-");
}

} // namespace detail

/// Aligned-column rendering of assessment_json's numbers.
inline std::string render_plan_table(const Scenario& s)
{
    const auto sum = plan_summary(s);
    std::ostringstream out;
    out << "scenario   " << (s.name.empty() ? "-" : s.name) << "\n";
    out << "preset     " << sum.preset->name << " (" << to_string(sum.regime) << ")\n";
    out << "power      " << format_fixed(s.power.dbm, 1) << " dBm\n";
    out << "model      " << s.path_loss.name << " n=" << format_fixed(s.path_loss.effective_exponent(), 2)
        << ", sensitivity " << to_string(s.radio.sensitivity_source) << ", fade margin "
        << format_fixed(s.fade_margin_db, 1) << " dB\n";
    out << "budget     " << format_fixed(sum.selected.budget_db, 2) << " dB, range "
        << detail::opt_fixed(sum.selected.range_m, 1) << " m" << (sum.selected.terrain_limited ? " (terrain-limited)" : "")
        << ", density "
        << (sum.selected.density_per_km2 ? std::to_string(*sum.selected.density_per_km2) : std::string("-"))
        << " nodes/km2\n";
    out << "nodes      " << sum.node_count << ", links " << sum.closed_link_count << "/" << sum.link_count
        << " closed, components " << sum.component_count << ", isolated "
        << (sum.isolated_nodes.empty() ? std::string("none") : [&] {
               std::string ids;
               for (const auto& id : sum.isolated_nodes)
               {
                   ids += (ids.empty() ? "" : " ") + id;
               }
               return ids;
           }())
        << "\n\n";

    if (s.nodes.size() >= 2)
    {
        std::vector<std::vector<std::string>> rows{
            {"link", "distance_m", "path_loss_db", "budget_db", "margin_db", "closed"}};
        for (const auto& l : assess_links(s))
        {
            rows.push_back({l.a + "-" + l.b, format_fixed(l.distance_m, 1), format_fixed(l.path_loss_db, 2),
                            format_fixed(l.budget_db, 2), format_fixed(l.margin_db, 2), l.closed ? "yes" : "no"});
        }
        out << detail::render_rows(rows) << "\n";
    }

    std::vector<std::vector<std::string>> rows{
        {"preset", "regime", "sensitivity_dbm", "budget_db", "range_m", "nodes_per_km2", "airtime_s"}};
    for (const auto& r : sum.preset_ranges)
    {
        rows.push_back({std::string(r.preset->name), std::string(to_string(r.regime)),
                        format_fixed(r.sensitivity_dbm, 2), format_fixed(r.budget_db, 2),
                        detail::opt_fixed(r.range_m, 1) + (r.terrain_limited ? "*" : ""),
                        r.density_per_km2 ? std::to_string(*r.density_per_km2) : std::string("-"),
                        format_fixed(r.airtime_s, 4)});
    }
    out << detail::render_rows(rows);
    out << "(* terrain-limited: capped at " << format_fixed(s.range_ceiling_m, 0) << " m)\n";
    return out.str();
}

} // namespace meshlink

#endif // MESHLINK_MESH_PLANNER_HPP
