// meshlink command-line front end: sweep, matrix, plan, toa, serve.

#include "meshlink/app.hpp"
#include "meshlink/http_service.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace meshlink;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Command
{
    Command(CLI::App* s, std::vector<app::OptionSpec> sp) : sub(s), specs(std::move(sp)) {}

    CLI::App* sub;
    std::vector<app::OptionSpec> specs;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;
    std::string output;
};

void add_options(Command& cmd, bool with_output, const std::string& output_help)
{
    for (const auto& spec : cmd.specs)
    {
        const auto shown = spec.default_value.is_string() ? spec.default_value.get<std::string>()
                                                          : spec.default_value.dump();
        cmd.options[spec.key] = cmd.sub->add_option("--" + app::flag_name(spec.key), cmd.values[spec.key],
                                                    spec.help + " [default: " + shown + "]");
    }
    cmd.sub->add_option("--config", cmd.config_path, "JSON config file (same keys as the flags)");
    if (with_output)
    {
        cmd.sub->add_option("--output", cmd.output, output_help);
    }
}

Json resolve(const Command& cmd)
{
    app::RawLayer flags;
    for (const auto& [key, opt] : cmd.options)
    {
        if (opt->count() > 0)
        {
            flags[key] = cmd.values.at(key);
        }
    }
    Json file;
    if (!cmd.config_path.empty())
    {
        file = parse_json_text(app::read_text_file(cmd.config_path), cmd.config_path);
    }
    const app::EnvLookup env = [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str()))
        {
            return std::string(v);
        }
        return std::nullopt;
    };
    return app::resolve_config(cmd.specs, flags, env, file);
}

void write_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path())
    {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec)
        {
            throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out)
    {
        throw IoError("cannot write " + path.string());
    }
}

void write_artifacts(const std::string& dir, const std::vector<app::Artifact>& artifacts)
{
    for (const auto& a : artifacts)
    {
        write_file(fs::path(dir) / a.name, a.content);
    }
}

void emit(const std::string& output, const std::string& text)
{
    if (output.empty())
    {
        std::cout << text;
    }
    else
    {
        write_file(output, text);
    }
}

int serve(const Json& config)
{
    httplib::Server server;
    app::mount_routes(server);
    const auto host = config.at("host").get<std::string>();
    const auto port = config.at("port").get<std::int64_t>();
    if (port < 1 || port > 65535)
    {
        throw ValidationError("must be 1..65535", "port");
    }
    std::cerr << "meshlink: serving on http://" << host << ":" << port << "\n";
    if (!server.listen(host, static_cast<int>(port)))
    {
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App cli{"meshlink: guided-link LoRa sweep simulator and mesh coverage planner"};
    cli.require_subcommand(1);

    Command sweep{cli.add_subcommand("sweep", "attenuation sweep for one preset and power level"), app::sweep_options()};
    add_options(sweep, true, "output directory for sweep.json and packets.csv [default: meshlink-out]");
    Command matrix{cli.add_subcommand("matrix", "preset x power x run measurement matrix"), app::matrix_options()};
    add_options(matrix, true, "output directory [default: meshlink-out]");
    Command plan{cli.add_subcommand("plan", "assess a mesh scenario"), app::plan_options()};
    add_options(plan, true, "report file [default: stdout]");
    Command toa{cli.add_subcommand("toa", "time-on-air for every preset"), app::toa_options()};
    add_options(toa, true, "table file [default: stdout]");
    Command srv{cli.add_subcommand("serve", "HTTP service for the planner UI"), app::serve_options()};
    add_options(srv, false, {});
    cli.add_subcommand("presets", "print the preset catalog as JSON");

    try
    {
        cli.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return cli.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return cli.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        cli.exit(e);
        return kExitUsage;
    }

    Command* active = nullptr;
    for (auto* cmd : {&sweep, &matrix, &plan, &toa, &srv})
    {
        if (cmd->sub->parsed())
        {
            active = cmd;
        }
    }

    try
    {
        if (active == nullptr)
        {
            std::cout << app::dump(Json{{"schema_version", kSchemaVersion}, {"presets", catalog_json()}});
            return kExitOk;
        }
        const auto config = resolve(*active);
        if (active == &sweep || active == &matrix)
        {
            const auto dir = active->output.empty() ? std::string("meshlink-out") : active->output;
            const auto artifacts = active == &sweep ? app::cmd_sweep(config) : app::cmd_matrix(config);
            write_artifacts(dir, artifacts);
            std::cout << "wrote " << artifacts.size() << " files to " << dir << "\n";
            if (active == &sweep)
            {
                const auto doc = Json::parse(artifacts.front().content);
                const auto& t = doc.at("threshold");
                std::cout << doc.at("run_id").get<std::string>() << ": threshold " << t.at("status").get<std::string>();
                if (t.at("attenuation_db").is_number())
                {
                    std::cout << " at " << format_fixed(t.at("attenuation_db").get<double>(), 1) << " dB ("
                              << format_fixed(t.at("prx_dbm").get<double>(), 1) << " dBm)";
                }
                std::cout << "\n";
            }
            return kExitOk;
        }
        if (active == &plan)
        {
            emit(active->output, app::cmd_plan(config));
            return kExitOk;
        }
        if (active == &toa)
        {
            emit(active->output, app::cmd_toa(config));
            return kExitOk;
        }
        return serve(config);
    }
    catch (const ValidationError& e)
    {
        std::cerr << "error: " << e.what() << "\n\n" << active->sub->help();
        return kExitUsage;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
