// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include "meshlink/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace meshlink;

namespace {

struct Outcome
{
    bool pass;
    std::string detail;
};

int g_failures = 0;

void report(const std::string& name, const Outcome& o)
{
    std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass)
    {
        ++g_failures;
    }
}

void check(const std::string& name, const std::function<Outcome()>& body)
{
    try
    {
        report(name, body());
    }
    catch (const std::exception& e)
    {
        report(name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fx(double v, int d = 2)
{
    return format_fixed(v, d);
}

const app::EnvLookup kNoEnv = [](const std::string&) { return std::optional<std::string>{}; };

double threshold_at(const std::vector<SweepResult>& results, PresetId id, std::optional<int> run = std::nullopt)
{
    double sum = 0.0;
    int n = 0;
    for (const auto& r : results)
    {
        if (r.preset->id != id || r.power.label != PowerLabel::Max || !r.threshold.reached())
        {
            continue;
        }
        if (run && r.run_id.substr(r.run_id.size() - 1) != std::to_string(*run))
        {
            continue;
        }
        sum += r.threshold.attenuation_db;
        ++n;
    }
    return n ? sum / n : std::nan("");
}

const BurstRecord* last_passing(const SweepResult& r)
{
    for (auto it = r.records.rbegin(); it != r.records.rend(); ++it)
    {
        if (r.threshold.reached() && it->attenuation_db == r.threshold.attenuation_db)
        {
            return &*it;
        }
    }
    return nullptr;
}

Scenario random_scenario(Rng& rng)
{
    Scenario s;
    s.preset = preset_catalog()[static_cast<std::size_t>(rng.uniform01() * 8)].id;
    s.hop_limit = 1 + static_cast<int>(rng.uniform01() * 4);
    s.fade_margin_db = rng.uniform(0.0, 10.0);
    const int n = 1 + static_cast<int>(rng.uniform01() * 10);
    const double extent = rng.uniform(100.0, 25000.0);
    for (int i = 0; i < n; ++i)
    {
        s.nodes.push_back({"n" + std::to_string(i), rng.uniform(0.0, extent), rng.uniform(0.0, extent),
                           rng.uniform01() < 0.25 ? 2.0 : 0.0});
    }
    return s;
}

/// Closure from the link-budget definition, min hops by enumerating every simple path up to
/// the hop limit, components by Warshall transitive closure.
bool connectivity_matches_oracle(const Scenario& s)
{
    const auto n = s.nodes.size();
    const double sens = sensitivity_dbm(s.modem(), s.radio);
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
    {
        for (std::size_t j = 0; j < n; ++j)
        {
            if (i == j)
            {
                continue;
            }
            const double d = std::max(1.0, std::hypot(s.nodes[i].x_m - s.nodes[j].x_m, s.nodes[i].y_m - s.nodes[j].y_m));
            const double pl = fspl_db(915e6, 1.0) + 35.0 * std::log10(d);
            adj[i][j] = s.power.dbm + s.nodes[i].antenna_gain_db + s.nodes[j].antenna_gain_db - pl - s.fade_margin_db >=
                        sens;
        }
    }
    const auto conn = connectivity(s);
    for (std::size_t src = 0; src < n; ++src)
    {
        std::vector<int> best(n, -1);
        std::vector<bool> on(n, false);
        std::function<void(std::size_t, int)> walk = [&](std::size_t u, int depth) {
            if (best[u] < 0 || depth < best[u])
            {
                best[u] = depth;
            }
            if (depth == s.hop_limit)
            {
                return;
            }
            on[u] = true;
            for (std::size_t v = 0; v < n; ++v)
            {
                if (adj[u][v] && !on[v])
                {
                    walk(v, depth + 1);
                }
            }
            on[u] = false;
        };
        walk(src, 0);
        for (std::size_t dst = 0; dst < n; ++dst)
        {
            if (conn.hops[src][dst] != best[dst])
            {
                return false;
            }
        }
    }
    auto reach = adj;
    for (std::size_t i = 0; i < n; ++i)
    {
        reach[i][i] = true;
    }
    for (std::size_t k = 0; k < n; ++k)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            for (std::size_t j = 0; j < n; ++j)
            {
                reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
            }
        }
    }
    std::set<std::set<std::string>> expected;
    for (std::size_t i = 0; i < n; ++i)
    {
        std::set<std::string> c;
        for (std::size_t j = 0; j < n; ++j)
        {
            if (reach[i][j])
            {
                c.insert(s.nodes[j].id);
            }
        }
        expected.insert(c);
    }
    std::set<std::set<std::string>> got;
    for (const auto& c : conn.components)
    {
        got.insert(std::set<std::string>(c.begin(), c.end()));
    }
    return got == expected && got.size() == conn.components.size();
}

bool same_artifacts(const std::vector<app::Artifact>& a, const std::vector<app::Artifact>& b)
{
    if (a.size() != b.size())
    {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        if (a[i].name != b[i].name || a[i].content != b[i].content)
        {
            return false;
        }
    }
    return true;
}

} // namespace

int main()
{
    const RadioModel empirical;
    const auto t0 = std::chrono::steady_clock::now();
    const auto matrix = run_matrix(MatrixConfig::standard(), empirical, 1);
    const double elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    check("threshold-reproduction", [&] {
        bool ok = matrix.size() == 42 && elapsed_s < 10.0;
        std::ostringstream d;
        const auto within = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
        for (const auto& r : matrix)
        {
            if (r.power.label != PowerLabel::Max)
            {
                continue;
            }
            const double t = r.threshold.reached() ? r.threshold.attenuation_db : std::nan("");
            bool cell_ok = true;
            switch (regime_for(*r.preset))
            {
            case Regime::HighDensity:
                cell_ok = within(t, 110, 120);
                break;
            case Regime::BalancedUrban:
                cell_ok = r.preset->id == PresetId::LongFast ? std::abs(t - 155) <= 2 : within(t, 135, 150);
                break;
            case Regime::MaximumRange:
                cell_ok = r.preset->id != PresetId::LongSlow || std::abs(t - 180) <= 2;
                break;
            }
            ok = ok && cell_ok;
            d << r.preset->name << "=" << fx(t, 0) << (cell_ok ? " " : "! ");
        }
        d << "| 42 cells in " << fx(elapsed_s, 2) << " s";
        return Outcome{ok, d.str()};
    });

    check("family-gap", [&] {
        const double gap = threshold_at(matrix, PresetId::LongSlow) - threshold_at(matrix, PresetId::ShortTurbo);
        return Outcome{gap >= 60 && gap <= 70, "LongSlow - ShortTurbo = " + fx(gap, 1) + " dB"};
    });

    check("sensitivity-anchor", [] {
        RadioModel m;
        m.sensitivity_source = SensitivitySource::Datasheet;
        const double s = sensitivity_dbm(preset(PresetId::LongSlow), m);
        return Outcome{std::abs(s + 137.0) <= 0.1, "SF12/125 kHz = " + fx(s, 3) + " dBm"};
    });

    check("sub-noise-floor-failure", [] {
        RadioModel m;
        m.sensitivity_source = SensitivitySource::Datasheet;
        const auto& p = preset(PresetId::LongSlow);
        const auto r = run_sweep(p, {PowerLabel::Max, 21.0}, auto_chain(p, 21.0, m), m, 1);
        const auto* step = last_passing(r);
        if (step == nullptr || !step->mean_snr_db)
        {
            return Outcome{false, "no passing step"};
        }
        const double snr = *step->mean_snr_db;
        return Outcome{snr >= -20 && snr <= -16,
                       "mean SNR at " + fx(step->attenuation_db, 0) + " dB = " + fx(snr, 2) + " dB"};
    });

    check("corrected-prx-grid", [] {
        int points = 0;
        for (int ri = 0; ri <= 280; ++ri)
        {
            for (int si = 0; si <= 80; ++si)
            {
                const double rssi = -140.0 + 0.5 * ri;
                const double snr = -25.0 + 0.5 * si;
                const double expected = snr < 0 ? rssi + snr : rssi;
                if (corrected_prx_dbm(rssi, snr) != expected)
                {
                    return Outcome{false, "mismatch at rssi " + fx(rssi, 1) + " snr " + fx(snr, 1)};
                }
                ++points;
            }
        }
        return Outcome{true, std::to_string(points) + " grid points"};
    });

    check("per-recount", [] {
        const auto config = app::resolve_config(app::matrix_options(), {{"seed", "5"}}, kNoEnv, nullptr);
        const auto files = app::cmd_matrix(config);
        std::map<std::pair<std::string, std::string>, std::pair<int, int>> counts;
        std::istringstream log(files.at(files.size() - 2).content);
        std::string line;
        std::getline(log, line);
        while (std::getline(log, line))
        {
            std::vector<std::string> cols;
            std::istringstream row(line);
            std::string col;
            while (std::getline(row, col, ','))
            {
                cols.push_back(col);
            }
            if (line.back() == ',')
            {
                cols.emplace_back();
            }
            auto& c = counts[{cols.at(1), cols.at(4)}];
            ++c.first;
            c.second += cols.at(8) == "0" ? 1 : 0;
        }
        std::size_t bursts = 0;
        for (std::size_t i = 0; i + 2 < files.size(); ++i)
        {
            const auto doc = Json::parse(files[i].content);
            for (const auto& rec : doc.at("records"))
            {
                const auto key = std::pair{doc.at("run_id").get<std::string>(),
                                           format_fixed(rec.at("attenuation_db").get<double>(), 1)};
                const auto it = counts.find(key);
                if (it == counts.end())
                {
                    return Outcome{false, "burst missing from log: " + key.first + " @ " + key.second};
                }
                const double recount = 100.0 * it->second.second / it->second.first;
                if (recount != rec.at("per_percent").get<double>() || it->second.first != rec.at("sent").get<int>() ||
                    it->second.second != rec.at("lost").get<int>())
                {
                    return Outcome{false, "PER mismatch: " + key.first + " @ " + key.second};
                }
                ++bursts;
            }
        }
        return Outcome{bursts == counts.size(), std::to_string(bursts) + " bursts recounted from the packet log"};
    });

    check("rssi-artefacts", [] {
        RadioModel m;
        m.rssi_saturation_dbm = 0.0;
        m.rssi_register_floor_dbm = -100.0;
        const double hot = reported_rssi_dbm(10.0, m);
        const double cold = reported_rssi_dbm(-160.0, m);
        return Outcome{hot == 0.0 && std::abs(cold + 100.0) <= 0.1,
                       "+10 dBm -> " + fx(hot, 2) + " dBm, -160 dBm -> " + fx(cold, 4) + " dBm"};
    });

    check("long-moderate-anomaly", [] {
        const auto& lm = preset(PresetId::LongModerate);
        const TxPowerLevel max{PowerLabel::Max, 21.0};
        RadioModel on;
        const auto faulty = run_sweep(lm, max, auto_chain(lm, 21.0, on), on, 1);
        const auto* step = last_passing(faulty);
        const bool on_ok = faulty.threshold.reached() && std::abs(faulty.threshold.attenuation_db - on.fault_cutoff_db) <= 1 &&
                           step && step->mean_snr_db && *step->mean_snr_db > 8.0;
        RadioModel off;
        off.long_moderate_fault = false;
        const auto clean = run_sweep(lm, max, auto_chain(lm, 21.0, off), off, 1);
        const auto& ms = preset(PresetId::MediumSlow);
        const auto& ls = preset(PresetId::LongSlow);
        const double t_ms = run_sweep(ms, max, auto_chain(ms, 21.0, off), off, 1).threshold.attenuation_db;
        const double t_ls = run_sweep(ls, max, auto_chain(ls, 21.0, off), off, 1).threshold.attenuation_db;
        const bool off_ok =
            clean.threshold.reached() && clean.threshold.attenuation_db > t_ms && clean.threshold.attenuation_db < t_ls;
        return Outcome{on_ok && off_ok, "fault on: " + fx(faulty.threshold.attenuation_db, 0) + " dB at SNR " +
                                            (step && step->mean_snr_db ? fx(*step->mean_snr_db, 1) : "-") +
                                            " dB; fault off: " + fx(t_ms, 0) + " < " +
                                            fx(clean.threshold.attenuation_db, 0) + " < " + fx(t_ls, 0)};
    });

    check("path-loss-inversion", [] {
        Rng rng(2024);
        double worst = 0.0;
        int cases = 0;
        while (cases < 1000)
        {
            PathLossModel m;
            m.kind = rng.uniform01() < 0.2 ? PathLossKind::FreeSpace : PathLossKind::LogDistance;
            m.exponent = rng.uniform(1.6, 6.5);
            m.frequency_hz = rng.uniform(433e6, 2.4e9);
            m.reference_distance_m = rng.uniform(0.1, 100.0);
            m.excess_loss_db = rng.uniform(0.0, 30.0);
            if (rng.uniform01() < 0.5)
            {
                m.reference_loss_db = rng.uniform(20.0, 60.0);
            }
            const double budget = rng.uniform(60.0, 200.0);
            const double margin = rng.uniform(0.0, 20.0);
            if (budget - margin < m.reference_loss() + m.effective_excess_db())
            {
                continue;
            }
            worst = std::max(worst, std::abs(path_loss_db(m, max_range_m(m, budget, margin)) - (budget - margin)));
            ++cases;
        }
        std::ostringstream d;
        d << cases << " cases, worst error " << std::scientific << worst << " dB";
        return Outcome{worst < 1e-6, d.str()};
    });

    check("short-band-density", [] {
        Scenario s;
        s.nodes = {{"probe", 0, 0, 0}};
        bool ok = true;
        std::ostringstream d;
        for (auto id : {PresetId::ShortTurbo, PresetId::ShortFast, PresetId::ShortSlow})
        {
            const auto r = preset_range(s, preset(id));
            const bool range_ok = r.range_m && *r.range_m >= 100.0 && *r.range_m <= 800.0;
            const bool density_ok = r.density_per_km2 && *r.density_per_km2 >= 12.5 && *r.density_per_km2 <= 160.0;
            ok = ok && range_ok && density_ok;
            d << preset(id).name << " " << (r.range_m ? fx(*r.range_m, 0) : "-") << " m/"
              << (r.density_per_km2 ? std::to_string(*r.density_per_km2) : "-") << " per km2  ";
        }
        d << "(band 200-400 m, 25-80 per km2, x2)";
        return Outcome{ok, d.str()};
    });

    check("connectivity-oracle", [] {
        Rng rng(77);
        for (int i = 0; i < 200; ++i)
        {
            if (!connectivity_matches_oracle(random_scenario(rng)))
            {
                return Outcome{false, "scenario " + std::to_string(i) + " disagrees"};
            }
        }
        return Outcome{true, "200 random scenarios, up to 10 nodes"};
    });

    check("determinism", [] {
        const auto rerun = [](const std::vector<app::OptionSpec>& specs, const app::RawLayer& flags,
                              const std::function<std::vector<app::Artifact>(const Json&)>& cmd, bool config_last) {
            const auto first = cmd(app::resolve_config(specs, flags, kNoEnv, nullptr));
            const auto embedded = Json::parse((config_last ? first.back() : first.front()).content);
            return same_artifacts(first, cmd(app::resolve_config(specs, {}, kNoEnv, embedded)));
        };
        const bool sweep = rerun(app::sweep_options(), {{"preset", "LongSlow"}, {"seed", "31"}, {"uncertainty_db", "0.5"}},
                                 app::cmd_sweep, false);
        // index.json, the last artifact, carries the config
        const bool matrix = rerun(app::matrix_options(), {{"seed", "8"}, {"runs", "1"}}, app::cmd_matrix, true);
        const auto plan_cmd = [](const Json& c) { return std::vector<app::Artifact>{{"plan.json", app::cmd_plan(c)}}; };
        const bool plan = rerun(app::plan_options(),
                                {{"scenario", std::string(MESHLINK_SOURCE_DIR) + "/scenarios/dense-urban-demo.json"},
                                 {"format", "json"}},
                                plan_cmd, false);
        const auto toa_cmd = [](const Json& c) { return std::vector<app::Artifact>{{"toa.json", app::cmd_toa(c)}}; };
        const bool toa = rerun(app::toa_options(), {{"payload", "64"}, {"format", "json"}}, toa_cmd, false);
        return Outcome{sweep && matrix && plan && toa, std::string("sweep ") + (sweep ? "ok" : "differs") +
                                                          ", matrix " + (matrix ? "ok" : "differs") + ", plan " +
                                                          (plan ? "ok" : "differs") + ", toa " + (toa ? "ok" : "differs")};
    });

    std::printf("%d failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
