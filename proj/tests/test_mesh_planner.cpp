#include "meshlink/mesh_planner.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

using namespace meshlink;

namespace {

Scenario two_nodes(PresetId p, double distance)
{
    Scenario s;
    s.preset = p;
    s.nodes = {{"a", 0.0, 0.0, 0.0}, {"b", distance, 0.0, 0.0}};
    return s;
}

Scenario line_of(int n, double spacing, int hop_limit)
{
    Scenario s;
    s.preset = PresetId::ShortTurbo;
    s.hop_limit = hop_limit;
    for (int i = 0; i < n; ++i)
    {
        s.nodes.push_back({"n" + std::to_string(i), i * spacing, 0.0, 0.0});
    }
    return s;
}

/// Minimum hops by enumerating every simple path from `src`.
std::vector<int> min_hops_oracle(const std::vector<std::vector<bool>>& closed, std::size_t src)
{
    const auto n = closed.size();
    std::vector<int> best(n, -1);
    std::vector<bool> on_path(n, false);
    std::function<void(std::size_t, int)> walk = [&](std::size_t u, int depth) {
        if (best[u] < 0 || depth < best[u])
        {
            best[u] = depth;
        }
        on_path[u] = true;
        for (std::size_t v = 0; v < n; ++v)
        {
            if (closed[u][v] && !on_path[v])
            {
                walk(v, depth + 1);
            }
        }
        on_path[u] = false;
    };
    walk(src, 0);
    return best;
}

/// Closure decided from first principles, without the library's pair assessment.
std::vector<std::vector<bool>> closed_oracle(const Scenario& s)
{
    const auto n = s.nodes.size();
    std::vector<std::vector<bool>> closed(n, std::vector<bool>(n, false));
    const double sens = sensitivity_dbm(s.modem(), s.radio);
    const double pl0 = fspl_db(s.path_loss.frequency_hz, s.path_loss.reference_distance_m);
    for (std::size_t i = 0; i < n; ++i)
    {
        for (std::size_t j = 0; j < n; ++j)
        {
            if (i == j)
            {
                continue;
            }
            const double d = std::max(s.path_loss.reference_distance_m,
                                      std::hypot(s.nodes[i].x_m - s.nodes[j].x_m, s.nodes[i].y_m - s.nodes[j].y_m));
            const double pl = pl0 + 10.0 * s.path_loss.exponent * std::log10(d / s.path_loss.reference_distance_m);
            const double prx = s.power.dbm + s.nodes[i].antenna_gain_db + s.nodes[j].antenna_gain_db - pl;
            closed[i][j] = prx - s.fade_margin_db >= sens;
        }
    }
    return closed;
}

Scenario random_scenario(Rng& rng, int max_nodes)
{
    Scenario s;
    s.preset = preset_catalog()[static_cast<std::size_t>(rng.uniform01() * 8)].id;
    s.hop_limit = 1 + static_cast<int>(rng.uniform01() * 4);
    const int n = 1 + static_cast<int>(rng.uniform01() * max_nodes);
    const double extent = rng.uniform(200.0, 20000.0);
    for (int i = 0; i < n; ++i)
    {
        s.nodes.push_back({"n" + std::to_string(i), rng.uniform(0.0, extent), rng.uniform(0.0, extent),
                           rng.uniform01() < 0.3 ? 3.0 : 0.0});
    }
    return s;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Links, ClosesExactlyAtZeroMargin)
{
    Scenario s = two_nodes(PresetId::ShortTurbo, 10.0);
    s.path_loss.reference_loss_db = 40.0;
    s.path_loss.exponent = 2.0;
    s.fade_margin_db = 50.0;
    const auto links = assess_links(s);
    ASSERT_EQ(links.size(), 1u);
    EXPECT_DOUBLE_EQ(links[0].path_loss_db, 60.0);
    EXPECT_DOUBLE_EQ(links[0].budget_db, 110.0);
    EXPECT_DOUBLE_EQ(links[0].margin_db, 0.0);
    EXPECT_TRUE(links[0].closed);
    s.fade_margin_db = 50.001;
    EXPECT_FALSE(assess_links(s)[0].closed);
}

TEST(Links, CoLocatedNodesUseReferenceLoss)
{
    const auto links = assess_links(two_nodes(PresetId::ShortTurbo, 0.0));
    EXPECT_DOUBLE_EQ(links[0].path_loss_db, PathLossModel{}.reference_loss());
    EXPECT_TRUE(links[0].closed);
}

TEST(Links, SlowPresetClosesWhereFastOneDoesNot)
{
    const auto slow = assess_links(two_nodes(PresetId::LongSlow, 2000.0))[0];
    const auto fast = assess_links(two_nodes(PresetId::ShortTurbo, 2000.0))[0];
    EXPECT_NEAR(slow.path_loss_db, 147.2, 0.05);
    EXPECT_TRUE(slow.closed);
    EXPECT_FALSE(fast.closed);
    EXPECT_DOUBLE_EQ(slow.path_loss_db, fast.path_loss_db);
}

TEST(Links, AntennaGainAddsToBudget)
{
    auto s = two_nodes(PresetId::LongFast, 500.0);
    const double base = assess_links(s)[0].budget_db;
    s.nodes[0].antenna_gain_db = 2.0;
    s.nodes[1].antenna_gain_db = 3.0;
    EXPECT_DOUBLE_EQ(assess_links(s)[0].budget_db, base + 5.0);
}

TEST(Links, SymmetricAndMonotone)
{
    Rng rng(31);
    for (int i = 0; i < 200; ++i)
    {
        auto s = random_scenario(rng, 2);
        if (s.nodes.size() < 2)
        {
            continue;
        }
        const auto ab = detail::assess_pair(s, s.nodes[0], s.nodes[1]);
        const auto ba = detail::assess_pair(s, s.nodes[1], s.nodes[0]);
        EXPECT_DOUBLE_EQ(ab.margin_db, ba.margin_db);
        EXPECT_EQ(ab.closed, ba.closed);
        auto farther = s;
        farther.nodes[1].x_m = 2.0 * s.nodes[1].x_m - s.nodes[0].x_m;
        farther.nodes[1].y_m = 2.0 * s.nodes[1].y_m - s.nodes[0].y_m;
        EXPECT_LE(detail::assess_pair(farther, farther.nodes[0], farther.nodes[1]).margin_db, ab.margin_db);
    }
}

TEST(Links, NeedTwoNodes)
{
    Scenario s;
    s.nodes = {{"solo", 0, 0, 0}};
    EXPECT_THROW(assess_links(s), ValidationError);
}

TEST(Connectivity, ChainRespectsHopLimit)
{
    // ShortTurbo reaches about 124 m in dense urban at 5 dB margin
    const auto three = connectivity(line_of(5, 100.0, 3));
    EXPECT_EQ(three.components.size(), 1u);
    EXPECT_EQ(three.hops[0][1], 1);
    EXPECT_EQ(three.hops[0][3], 3);
    EXPECT_EQ(three.hops[0][4], -1);
    EXPECT_TRUE(three.reachable(4, 1));
    const auto one = connectivity(line_of(5, 100.0, 1));
    EXPECT_EQ(one.hops[0][1], 1);
    EXPECT_EQ(one.hops[0][2], -1);
    EXPECT_EQ(one.components.size(), 1u);
}

TEST(Connectivity, MatchesPathEnumerationOracle)
{
    Rng rng(37);
    for (int trial = 0; trial < 300; ++trial)
    {
        const auto s = random_scenario(rng, 8);
        const auto closed = closed_oracle(s);
        EXPECT_EQ(detail::closed_matrix(s), closed);
        const auto conn = connectivity(s);
        std::set<std::set<std::string>> expected_components;
        for (std::size_t i = 0; i < s.nodes.size(); ++i)
        {
            const auto best = min_hops_oracle(closed, i);
            std::set<std::string> members;
            for (std::size_t j = 0; j < s.nodes.size(); ++j)
            {
                const int expected = best[j] >= 0 && best[j] <= s.hop_limit ? best[j] : -1;
                EXPECT_EQ(conn.hops[i][j], expected) << "trial " << trial;
                if (best[j] >= 0)
                {
                    members.insert(s.nodes[j].id);
                }
            }
            expected_components.insert(members);
        }
        std::set<std::set<std::string>> got;
        for (const auto& c : conn.components)
        {
            got.insert(std::set<std::string>(c.begin(), c.end()));
        }
        EXPECT_EQ(got, expected_components) << "trial " << trial;
        EXPECT_EQ(got.size(), conn.components.size());
    }
}

TEST(Connectivity, SlowerPresetNeverLosesLinks)
{
    Rng rng(41);
    for (int trial = 0; trial < 200; ++trial)
    {
        auto fast = random_scenario(rng, 8);
        fast.preset = PresetId::ShortTurbo;
        auto slow = fast;
        slow.preset = PresetId::LongSlow;
        const auto cf = detail::closed_matrix(fast);
        const auto cs = detail::closed_matrix(slow);
        for (std::size_t i = 0; i < cf.size(); ++i)
        {
            for (std::size_t j = 0; j < cf.size(); ++j)
            {
                EXPECT_TRUE(!cf[i][j] || cs[i][j]);
            }
        }
        EXPECT_LE(connectivity(slow).components.size(), connectivity(fast).components.size());
    }
}

TEST(Latency, HopsTimesAirtimePlusDelay)
{
    const auto s = line_of(5, 100.0, 3);
    const double per_hop = time_on_air_s(preset(PresetId::ShortTurbo), 32) + 0.5;
    EXPECT_NEAR(*latency_estimate_s(s, "n0", "n2"), 2.0 * per_hop, 1e-12);
    EXPECT_NEAR(*latency_estimate_s(s, "n0", "n1", 200), time_on_air_s(preset(PresetId::ShortTurbo), 200) + 0.5,
                1e-12);
    EXPECT_FALSE(latency_estimate_s(s, "n0", "n4").has_value());
    EXPECT_THROW(latency_estimate_s(s, "n0", "n0"), ValidationError);
    EXPECT_THROW(latency_estimate_s(s, "n0", "zz"), ValidationError);
}

TEST(Summary, SingleNode)
{
    Scenario s;
    s.nodes = {{"solo", 0, 0, 0}};
    const auto sum = plan_summary(s);
    EXPECT_EQ(sum.node_count, 1u);
    EXPECT_EQ(sum.link_count, 0u);
    EXPECT_EQ(sum.component_count, 1u);
    EXPECT_EQ(sum.isolated_nodes, std::vector<std::string>{"solo"});
    EXPECT_TRUE(assessment_json(s).at("links").empty());
}

TEST(Summary, RangesByFamily)
{
    Scenario s;
    s.nodes = {{"solo", 0, 0, 0}};
    const auto sum = plan_summary(s);
    ASSERT_EQ(sum.preset_ranges.size(), 8u);
    double short_max = 0.0;
    for (const auto& r : sum.preset_ranges)
    {
        ASSERT_TRUE(r.range_m.has_value());
        if (r.regime == Regime::HighDensity)
        {
            short_max = std::max(short_max, *r.range_m);
        }
    }
    EXPECT_GE(short_max, 200.0);
    EXPECT_LE(short_max, 400.0);
    // medium band 500-1500 m, within a factor of 2
    for (auto id : {PresetId::MediumFast, PresetId::MediumSlow})
    {
        const double r = *sum.preset_ranges[preset_index(id)].range_m;
        EXPECT_GE(r, 250.0);
        EXPECT_LE(r, 3000.0);
    }
    const auto& ls = sum.preset_ranges[preset_index(PresetId::LongSlow)];
    EXPECT_TRUE(ls.terrain_limited);
    EXPECT_EQ(*ls.range_m, 5000.0);
    EXPECT_FALSE(sum.preset_ranges[preset_index(PresetId::ShortTurbo)].terrain_limited);
    EXPECT_LT(*sum.preset_ranges[preset_index(PresetId::ShortTurbo)].range_m,
              *sum.preset_ranges[preset_index(PresetId::MediumFast)].range_m);
}

TEST(Summary, BudgetBelowReferenceLossHasNoRange)
{
    Scenario s;
    s.nodes = {{"solo", 0, 0, 0}};
    s.fade_margin_db = 150.0;
    const auto r = preset_range(s, preset(PresetId::ShortTurbo));
    EXPECT_FALSE(r.range_m.has_value());
    EXPECT_FALSE(r.density_per_km2.has_value());
}

TEST(ScenarioJson, Parses)
{
    const auto s = scenario_from_json(parse_json_text(R"({
        "name": "t", "preset": "short_fast", "power": "medium",
        "path_loss_model": "suburban", "sensitivity_source": "datasheet",
        "nodes": [{"id": "a", "x_m": 0, "y_m": 0}, {"id": "b", "x_m": 10, "y_m": 5, "antenna_gain_db": 3}]
    })", "t"));
    EXPECT_EQ(s.preset, PresetId::ShortFast);
    EXPECT_EQ(s.power.dbm, 17.0);
    EXPECT_EQ(s.path_loss.exponent, 2.8);
    EXPECT_EQ(s.radio.sensitivity_source, SensitivitySource::Datasheet);
    EXPECT_EQ(s.nodes[1].antenna_gain_db, 3.0);
    EXPECT_EQ(scenario_from_json(to_json(s)).nodes, s.nodes);
}

TEST(ScenarioJson, Rejects)
{
    const auto field_of = [](const char* text) {
        try
        {
            scenario_from_json(parse_json_text(text, "t"));
        }
        catch (const ValidationError& e)
        {
            return e.field() + " | " + e.what();
        }
        return std::string("accepted");
    };
    const auto dup = field_of(R"({"nodes": [{"id": "a", "x_m": 0, "y_m": 0}, {"id": "a", "x_m": 1, "y_m": 0}]})");
    EXPECT_NE(dup.find("nodes[1].id"), std::string::npos);
    EXPECT_NE(dup.find("'a'"), std::string::npos);
    EXPECT_EQ(field_of(R"({"nodes": []})").rfind("nodes |", 0), 0u);
    EXPECT_EQ(field_of(R"({"name": "x"})").rfind("nodes |", 0), 0u);
    EXPECT_EQ(field_of(R"({"nodes": [{"id": "a", "x_m": "far", "y_m": 0}]})").rfind("nodes[0].x_m |", 0), 0u);
    EXPECT_EQ(field_of(R"({"nodes": [{"id": "a", "x_m": 0, "y_m": 0}], "preset": "Fastest"})").rfind("preset |", 0),
              0u);
    EXPECT_EQ(field_of(R"({"nodes": [{"id": "a", "x_m": 0, "y_m": 0}], "hop_limit": 0})").rfind("hop_limit |", 0),
              0u);
    EXPECT_NE(field_of(R"({"nodes": [{"id": "a", "x_m": 0, "y_m": 0}], "radio_model": {"failure_width_db": 9}})")
                  .find("radio_model.failure_width_db"),
              std::string::npos);
}

TEST(Golden, DemoScenarioAssessment)
{
    const std::string root = MESHLINK_SOURCE_DIR;
    const auto s = scenario_from_json(parse_json_text(read_file(root + "/scenarios/dense-urban-demo.json"), "demo"));
    const auto actual = assessment_json(s).dump(2) + "\n";
    const auto golden_path = root + "/tests/golden/dense-urban-demo.assessment.json";
    if (std::getenv("MESHLINK_UPDATE_GOLDEN"))
    {
        std::ofstream(golden_path, std::ios::binary) << actual;
    }
    EXPECT_EQ(actual, read_file(golden_path));
}

TEST(Golden, DemoScenarioTable)
{
    const std::string root = MESHLINK_SOURCE_DIR;
    const auto s = scenario_from_json(parse_json_text(read_file(root + "/scenarios/dense-urban-demo.json"), "demo"));
    const auto actual = render_plan_table(s);
    const auto golden_path = root + "/tests/golden/dense-urban-demo.table.txt";
    if (std::getenv("MESHLINK_UPDATE_GOLDEN"))
    {
        std::ofstream(golden_path, std::ios::binary) << actual;
    }
    EXPECT_EQ(actual, read_file(golden_path));
}
