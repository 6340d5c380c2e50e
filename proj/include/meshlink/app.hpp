#ifndef MESHLINK_APP_HPP
#define MESHLINK_APP_HPP

#include "meshlink/error.hpp"
#include "meshlink/format.hpp"
#include "meshlink/guided_link.hpp"
#include "meshlink/json_support.hpp"
#include "meshlink/mesh_planner.hpp"
#include "meshlink/phy_model.hpp"
#include "meshlink/presets.hpp"
#include "meshlink/propagation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace meshlink::app {

// --- run configuration -----------------------------------------------------------------

struct OptionSpec
{
    std::string key; ///< snake_case; the flag is the kebab-case spelling
    Json default_value;
    std::string help;
};

inline std::string flag_name(std::string_view key)
{
    std::string f(key);
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

inline std::string env_name(std::string_view key)
{
    std::string e = "MESHLINK_";
    for (char c : key)
    {
        e.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return e;
}

inline std::string normalise_key(std::string_view key)
{
    std::string k(key);
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

using RawLayer = std::map<std::string, std::string>;
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

namespace detail {

inline Json coerce_text(const OptionSpec& spec, const std::string& text, std::string_view source)
{
    const auto fail = [&](std::string_view expected) {
        return ValidationError("expected " + std::string(expected) + " from " + std::string(source) + ", got '" +
                                   text + "'",
                               spec.key);
    };
    const auto& d = spec.default_value;
    if (d.is_boolean())
    {
        std::string t;
        for (char c : text)
        {
            t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        if (t == "true" || t == "1" || t == "yes" || t == "on")
        {
            return true;
        }
        if (t == "false" || t == "0" || t == "no" || t == "off")
        {
            return false;
        }
        throw fail("a boolean");
    }
    if (d.is_number_unsigned() || d.is_number_integer())
    {
        std::int64_t v = 0;
        const auto* end = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(text.data(), end, v);
        if (ec != std::errc{} || ptr != end)
        {
            throw fail("an integer");
        }
        if (d.is_number_unsigned())
        {
            if (v < 0)
            {
                throw fail("a non-negative integer");
            }
            return static_cast<std::uint64_t>(v);
        }
        return v;
    }
    if (d.is_number_float())
    {
        std::istringstream in(text);
        in.imbue(std::locale::classic());
        double v = 0.0;
        in >> v;
        if (in.fail() || !in.eof())
        {
            throw fail("a number");
        }
        return v;
    }
    return text;
}

inline Json coerce_json(const OptionSpec& spec, const Json& value)
{
    const auto& d = spec.default_value;
    if (value.is_string() && !d.is_string())
    {
        return coerce_text(spec, value.get<std::string>(), "config file");
    }
    if (d.is_string() && value.is_number())
    {
        return value.dump();
    }
    const bool ok = (d.is_boolean() && value.is_boolean()) ||
                    ((d.is_number_integer() || d.is_number_unsigned()) && value.is_number_integer()) ||
                    (d.is_number_float() && value.is_number()) || (d.is_string() && value.is_string());
    if (!ok)
    {
        throw ValidationError("wrong type in config file (got " + std::string(value.type_name()) + ")", spec.key);
    }
    if (d.is_number_unsigned())
    {
        if (value.get<std::int64_t>() < 0)
        {
            throw ValidationError("must be non-negative", spec.key);
        }
        return value.get<std::uint64_t>();
    }
    if (d.is_number_float())
    {
        return value.get<double>();
    }
    return value;
}

} // namespace detail

/// Layers settings with precedence flags > environment > config file > defaults. The
/// result has one entry per spec, in spec order. A config file may be a flat object or an
/// artifact carrying its resolved settings under "config".
inline Json resolve_config(const std::vector<OptionSpec>& specs, const RawLayer& flags, const EnvLookup& env,
                           const Json& file)
{
    Json file_layer = Json::object();
    if (!file.is_null())
    {
        if (!file.is_object())
        {
            throw ValidationError("config file must hold a JSON object", "config");
        }
        const auto& src = file.contains("config") && file.at("config").is_object() ? file.at("config") : file;
        for (const auto& [k, v] : src.items())
        {
            file_layer[normalise_key(k)] = v;
        }
    }
    Json resolved = Json::object();
    for (const auto& spec : specs)
    {
        if (auto it = flags.find(spec.key); it != flags.end())
        {
            resolved[spec.key] = detail::coerce_text(spec, it->second, "--" + flag_name(spec.key));
        }
        else if (auto e = env ? env(env_name(spec.key)) : std::nullopt)
        {
            resolved[spec.key] = detail::coerce_text(spec, *e, env_name(spec.key));
        }
        else if (file_layer.contains(spec.key))
        {
            resolved[spec.key] = detail::coerce_json(spec, file_layer.at(spec.key));
        }
        else
        {
            resolved[spec.key] = spec.default_value;
        }
    }
    return resolved;
}

inline std::vector<OptionSpec> link_options()
{
    return {
        {"model", "empirical", "sensitivity source: datasheet | empirical"},
        {"radio_model", std::string(kDefaultRadioModelName), "named radio model"},
        {"seed", std::uint64_t{1}, "root random seed"},
        {"fixed_attenuation_db", "auto", "fixed cascade in dB, or 'auto' to pick 30 dB stages per preset"},
        {"insertion_loss_db", 2.0, "aggregate jumper/connector loss"},
        {"uncertainty_db", 0.0, "per-step calibration error half-width"},
        {"variable_max_db", 110.0, "top of the rotary attenuator range"},
        {"packets", std::int64_t{50}, "packets per burst"},
        {"payload", std::int64_t{kDefaultPayloadBytes}, "payload bytes"},
        {"low_dbm", 10.0, "TX power behind the Low label"},
        {"medium_dbm", 17.0, "TX power behind the Medium label"},
        {"max_dbm", 21.0, "TX power behind the Max label"},
    };
}

inline std::vector<OptionSpec> sweep_options()
{
    std::vector<OptionSpec> specs{
        {"preset", std::string(default_preset().name), "modem preset"},
        {"power", "max", "power level: low | medium | max"},
    };
    for (auto& s : link_options())
    {
        specs.push_back(std::move(s));
    }
    return specs;
}

inline std::vector<OptionSpec> matrix_options()
{
    std::vector<OptionSpec> specs{
        {"presets", "all", "comma-separated presets, or 'all'"},
        {"powers", "low,medium,max", "comma-separated power levels"},
        {"runs", "standard", "runs per cell, or 'standard' for 2 (1 for LongModerate/LongSlow)"},
    };
    for (auto& s : link_options())
    {
        specs.push_back(std::move(s));
    }
    return specs;
}

inline std::vector<OptionSpec> plan_options()
{
    return {
        {"scenario", "", "scenario JSON file"},
        {"format", "table", "table | json"},
    };
}

inline std::vector<OptionSpec> toa_options()
{
    return {
        {"payload", std::int64_t{kDefaultPayloadBytes}, "payload bytes (1..255)"},
        {"format", "table", "table | json | csv"},
    };
}

inline std::vector<OptionSpec> serve_options()
{
    return {
        {"host", "127.0.0.1", "listen address"},
        {"port", std::int64_t{8080}, "listen port"},
    };
}

// --- typed views of a resolved config --------------------------------------------------

namespace detail {

inline std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ','))
    {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        if (b != std::string::npos)
        {
            items.push_back(item.substr(b, e - b + 1));
        }
    }
    return items;
}

inline std::optional<double> parse_fixed_attenuation(const Json& config)
{
    const auto text = config.at("fixed_attenuation_db").get<std::string>();
    if (detail::split_list(text) == std::vector<std::string>{"auto"} || text.empty())
    {
        return std::nullopt;
    }
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    double v = 0.0;
    in >> v;
    if (in.fail() || !in.eof() || v < 0.0)
    {
        throw ValidationError("expected 'auto' or a non-negative number, got '" + text + "'",
                              "fixed_attenuation_db");
    }
    return v;
}

template <typename T>
T positive_int(const Json& config, const char* key)
{
    const auto v = config.at(key).get<std::int64_t>();
    if (v < 1)
    {
        throw ValidationError("must be >= 1", key);
    }
    return static_cast<T>(v);
}

} // namespace detail

struct LinkSetup
{
    RadioModel model;
    PowerTable power_table;
    std::optional<double> fixed_attenuation_db;
    double insertion_loss_db;
    double uncertainty_db;
    double variable_max_db;
    SweepOptions options;
    std::uint64_t seed;
};

inline LinkSetup link_setup(const Json& config)
{
    LinkSetup s{};
    s.model = radio_model_by_name(config.at("radio_model").get<std::string>());
    s.model.sensitivity_source = sensitivity_source_by_name(config.at("model").get<std::string>());
    s.power_table = PowerTable{config.at("low_dbm").get<double>(), config.at("medium_dbm").get<double>(),
                               config.at("max_dbm").get<double>()};
    s.power_table.validate();
    s.fixed_attenuation_db = detail::parse_fixed_attenuation(config);
    s.insertion_loss_db = config.at("insertion_loss_db").get<double>();
    s.uncertainty_db = config.at("uncertainty_db").get<double>();
    s.variable_max_db = config.at("variable_max_db").get<double>();
    s.options.packets = detail::positive_int<int>(config, "packets");
    s.options.payload_bytes = static_cast<int>(config.at("payload").get<std::int64_t>());
    s.options.validate();
    s.seed = config.at("seed").get<std::uint64_t>();
    return s;
}

inline AttenuatorChain chain_for(const LinkSetup& setup, const ModemPreset& p, double tx_dbm)
{
    auto chain = setup.fixed_attenuation_db
                     ? make_chain_fixed(*setup.fixed_attenuation_db, setup.insertion_loss_db, setup.uncertainty_db)
                     : auto_chain(p, tx_dbm, setup.model, setup.insertion_loss_db, setup.uncertainty_db);
    chain.variable_max_db = setup.variable_max_db;
    chain.validate();
    return chain;
}

inline MatrixConfig matrix_config(const Json& config, const LinkSetup& setup)
{
    MatrixConfig mc;
    mc.power_table = setup.power_table;
    mc.fixed_attenuation_db = setup.fixed_attenuation_db;
    mc.insertion_loss_db = setup.insertion_loss_db;
    mc.uncertainty_db = setup.uncertainty_db;
    mc.variable_max_db = setup.variable_max_db;
    mc.options = setup.options;

    const auto preset_text = config.at("presets").get<std::string>();
    std::vector<PresetId> ids;
    if (meshlink::detail::fold_name(preset_text) == "all")
    {
        for (const auto& p : preset_catalog())
        {
            ids.push_back(p.id);
        }
    }
    else
    {
        for (const auto& name : detail::split_list(preset_text))
        {
            ids.push_back(preset_by_name(name).id);
        }
    }

    mc.powers.clear();
    for (const auto& name : detail::split_list(config.at("powers").get<std::string>()))
    {
        mc.powers.push_back(power_label_by_name(name));
    }

    const auto runs_text = config.at("runs").get<std::string>();
    const auto standard_plan = MatrixConfig::standard();
    for (const auto id : ids)
    {
        int runs = 0;
        if (meshlink::detail::fold_name(runs_text) == "standard")
        {
            runs = standard_plan.entries[preset_index(id)].runs;
        }
        else
        {
            const auto* end = runs_text.data() + runs_text.size();
            const auto [ptr, ec] = std::from_chars(runs_text.data(), end, runs);
            if (ec != std::errc{} || ptr != end || runs < 1)
            {
                throw ValidationError("expected 'standard' or a positive integer, got '" + runs_text + "'", "runs");
            }
        }
        mc.entries.push_back({id, runs});
    }
    return mc;
}

// --- commands --------------------------------------------------------------------------

/// A file a command produces, relative to the output directory.
struct Artifact
{
    std::string name;
    std::string content;
};

inline Json with_config(Json doc, const Json& config)
{
    Json out = Json::object();
    out["schema_version"] = kSchemaVersion;
    out["config"] = config;
    for (auto& [k, v] : doc.items())
    {
        if (k != "schema_version")
        {
            out[k] = v;
        }
    }
    return out;
}

inline std::string dump(const Json& j)
{
    return j.dump(2) + "\n";
}

inline SweepResult sweep_from_config(const Json& config)
{
    const auto setup = link_setup(config);
    const auto& p = preset_by_name(config.at("preset").get<std::string>());
    const auto power = setup.power_table.level(power_label_by_name(config.at("power").get<std::string>()));
    return run_sweep(p, power, chain_for(setup, p, power.dbm), setup.model, setup.seed, setup.options);
}

inline Json sweep_document(const Json& config)
{
    return with_config(to_json(sweep_from_config(config)), config);
}

/// sweep.json (result + config) and packets.csv.
inline std::vector<Artifact> cmd_sweep(const Json& config)
{
    const auto result = sweep_from_config(config);
    return {{"sweep.json", dump(with_config(to_json(result), config))},
            {"packets.csv", packet_log_csv(std::span<const SweepResult>(&result, 1))}};
}

inline std::string cell_file_name(std::size_t index, const SweepResult& r)
{
    auto n = std::to_string(index + 1);
    if (n.size() < 2)
    {
        n.insert(0, 2 - n.size(), '0');
    }
    return n + "_" + r.run_id + ".json";
}

/// One result file per cell, the combined packet log and index.json.
inline std::vector<Artifact> cmd_matrix(const Json& config)
{
    const auto setup = link_setup(config);
    const auto mc = matrix_config(config, setup);
    const auto results = run_matrix(mc, setup.model, setup.seed);

    std::vector<Artifact> out;
    Json cells = Json::array();
    std::map<std::pair<std::string, std::string>, std::vector<double>> by_cell;
    std::vector<std::pair<std::string, std::string>> order;
    for (std::size_t i = 0; i < results.size(); ++i)
    {
        const auto& r = results[i];
        const auto file = cell_file_name(i, r);
        out.push_back({file, dump(with_config(to_json(r), config))});
        cells.push_back(Json{{"file", file},
                             {"run_id", r.run_id},
                             {"preset", r.preset->name},
                             {"power", to_string(r.power.label)},
                             {"power_dbm", r.power.dbm},
                             {"seed", r.seed},
                             {"threshold", to_json(r.threshold, r.threshold_prx_dbm)}});
        const auto key = std::pair{std::string(r.preset->name), std::string(to_string(r.power.label))};
        if (!by_cell.contains(key))
        {
            order.push_back(key);
        }
        auto& list = by_cell[key];
        if (r.threshold.reached())
        {
            list.push_back(r.threshold.attenuation_db);
        }
    }
    Json summary = Json::array();
    for (const auto& key : order)
    {
        const auto& list = by_cell.at(key);
        Json row{{"preset", key.first}, {"power", key.second}, {"reached_runs", list.size()}};
        if (list.empty())
        {
            row["mean_threshold_db"] = nullptr;
            row["min_threshold_db"] = nullptr;
            row["max_threshold_db"] = nullptr;
        }
        else
        {
            row["mean_threshold_db"] = std::accumulate(list.begin(), list.end(), 0.0) / static_cast<double>(list.size());
            row["min_threshold_db"] = *std::min_element(list.begin(), list.end());
            row["max_threshold_db"] = *std::max_element(list.begin(), list.end());
        }
        summary.push_back(row);
    }
    out.push_back({"packets.csv", packet_log_csv(results)});
    out.push_back({"index.json", dump(Json{{"schema_version", kSchemaVersion},
                                           {"config", config},
                                           {"dataset_count", results.size()},
                                           {"cells", cells},
                                           {"thresholds", summary}})});
    return out;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void check_format(const Json& config, std::initializer_list<std::string_view> valid)
{
    const auto f = config.at("format").get<std::string>();
    if (std::find(valid.begin(), valid.end(), f) == valid.end())
    {
        std::string names;
        for (auto v : valid)
        {
            names += (names.empty() ? "" : ", ") + std::string(v);
        }
        throw ValidationError("unknown format '" + f + "' (valid: " + names + ")", "format");
    }
}

/// Plan report for the scenario file named in the config.
inline std::string cmd_plan(const Json& config)
{
    check_format(config, {"table", "json"});
    const auto path = config.at("scenario").get<std::string>();
    if (path.empty())
    {
        throw ValidationError("a scenario file is required", "scenario");
    }
    const auto scenario = scenario_from_json(parse_json_text(read_text_file(path), path));
    if (config.at("format") == "json")
    {
        return dump(with_config(assessment_json(scenario), config));
    }
    return render_plan_table(scenario);
}

struct AirtimeRow
{
    const ModemPreset* preset;
    double symbol_time_s;
    int payload_symbols;
    bool low_data_rate;
    double toa_s;
};

inline std::vector<AirtimeRow> airtime_table(int payload_bytes)
{
    check_payload(payload_bytes);
    std::vector<AirtimeRow> rows;
    for (const auto& p : preset_catalog())
    {
        rows.push_back({&p, symbol_time_s(p), payload_symbols(p, payload_bytes), low_data_rate_optimise(p),
                        time_on_air_s(p, payload_bytes)});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.toa_s < b.toa_s; });
    return rows;
}

inline std::string cmd_toa(const Json& config)
{
    check_format(config, {"table", "json", "csv"});
    const auto payload = config.at("payload").get<std::int64_t>();
    if (payload < 1 || payload > 255)
    {
        throw ValidationError("payload must be 1..255 bytes, got " + std::to_string(payload), "payload");
    }
    const auto rows = airtime_table(static_cast<int>(payload));
    const auto format = config.at("format").get<std::string>();
    if (format == "json")
    {
        Json arr = Json::array();
        for (const auto& r : rows)
        {
            arr.push_back(Json{{"preset", r.preset->name},
                               {"sf", r.preset->sf},
                               {"bw_hz", r.preset->bw_hz},
                               {"cr_denominator", r.preset->cr_denominator},
                               {"symbol_time_ms", r.symbol_time_s * 1e3},
                               {"payload_symbols", r.payload_symbols},
                               {"low_data_rate_optimise", r.low_data_rate},
                               {"toa_ms", r.toa_s * 1e3}});
        }
        return dump(Json{{"schema_version", kSchemaVersion}, {"config", config}, {"airtime", arr}});
    }
    std::vector<std::vector<std::string>> table{
        {"preset", "sf", "bw_khz", "cr", "symbol_ms", "payload_symbols", "ldro", "toa_ms"}};
    for (const auto& r : rows)
    {
        table.push_back({std::string(r.preset->name), std::to_string(r.preset->sf),
                         std::to_string(r.preset->bw_hz / 1000), "4/" + std::to_string(r.preset->cr_denominator),
                         format_fixed(r.symbol_time_s * 1e3, 3), std::to_string(r.payload_symbols),
                         r.low_data_rate ? "on" : "off", format_fixed(r.toa_s * 1e3, 3)});
    }
    if (format == "csv")
    {
        std::string out;
        for (const auto& row : table)
        {
            for (std::size_t c = 0; c < row.size(); ++c)
            {
                out += (c ? "," : "") + row[c];
            }
            out += "\n";
        }
        return out;
    }
    return meshlink::detail::render_rows(table);
}

// --- HTTP routing (transport-independent) ----------------------------------------------

struct Response
{
    int status = 200;
    std::string body;
};

inline Response error_response(int status, const std::string& message, const std::string& field = {})
{
    Json j{{"schema_version", kSchemaVersion}, {"error", message}};
    if (!field.empty())
    {
        j["field"] = field;
    }
    return {status, j.dump()};
}

inline Json models_document()
{
    Json path_loss = Json::object();
    for (const auto& [name, m] : builtin_path_loss_models())
    {
        path_loss[name] = to_json(m);
    }
    Json radios = Json::object();
    const auto documents = radio_model_documents();
    for (const auto& [name, doc] : documents.items())
    {
        radios[name] = to_json(radio_model_by_name(name));
    }
    return Json{{"schema_version", kSchemaVersion}, {"path_loss_models", path_loss}, {"radio_models", radios}};
}

/// Stateless request handler behind the service.
inline Response handle_request(std::string_view method, std::string_view path, std::string_view body)
{
    try
    {
        if (path == "/presets" || path == "/models")
        {
            if (method != "GET")
            {
                return error_response(405, "method not allowed");
            }
            if (path == "/presets")
            {
                return {200, Json{{"schema_version", kSchemaVersion}, {"presets", catalog_json()}}.dump()};
            }
            return {200, models_document().dump()};
        }
        if (path == "/assess" || path == "/sweep")
        {
            if (method != "POST")
            {
                return error_response(405, "method not allowed");
            }
            const auto doc = parse_json_text(body, "request body");
            if (path == "/assess")
            {
                return {200, assessment_json(scenario_from_json(doc)).dump()};
            }
            const auto config = resolve_config(sweep_options(), {}, {}, doc);
            return {200, sweep_document(config).dump()};
        }
        return error_response(404, "no route for " + std::string(path));
    }
    catch (const ValidationError& e)
    {
        return error_response(400, e.what(), e.field());
    }
    catch (const Error& e)
    {
        return error_response(500, e.what());
    }
}

} // namespace meshlink::app

#endif // MESHLINK_APP_HPP
