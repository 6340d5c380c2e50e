#ifndef MESHLINK_GUIDED_LINK_HPP
#define MESHLINK_GUIDED_LINK_HPP

#include "meshlink/error.hpp"
#include "meshlink/format.hpp"
#include "meshlink/json_support.hpp"
#include "meshlink/phy_model.hpp"
#include "meshlink/presets.hpp"
#include "meshlink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace meshlink {

/// Wired channel: transmitter, fixed attenuator stages, jumpers, rotary step attenuator, receiver.
struct AttenuatorChain
{
    static constexpr double kStepDb = 1.0;
    static constexpr double kStageDb = 30.0;
    static constexpr int kMaxStages = 4;

    std::vector<double> fixed_stages_db{kStageDb, kStageDb, kStageDb, kStageDb};
    double insertion_loss_db = 2.0;
    double variable_db = 0.0;
    double variable_min_db = 0.0;
    double variable_max_db = 110.0;
    /// Half-width of the per-step calibration error; 0 disables it.
    double uncertainty_db = 0.0;

    bool operator==(const AttenuatorChain&) const = default;

    double fixed_total_db() const noexcept
    {
        return std::accumulate(fixed_stages_db.begin(), fixed_stages_db.end(), 0.0) + insertion_loss_db;
    }

    double total_attenuation_db() const noexcept { return fixed_total_db() + variable_db; }

    AttenuatorChain with_variable(double db) const
    {
        AttenuatorChain c = *this;
        c.variable_db = db;
        return c;
    }

    void validate() const
    {
        for (std::size_t i = 0; i < fixed_stages_db.size(); ++i)
        {
            if (fixed_stages_db[i] < 0.0)
            {
                throw ValidationError("must be >= 0", "fixed_stages_db[" + std::to_string(i) + "]");
            }
        }
        if (insertion_loss_db < 0.0)
        {
            throw ValidationError("must be >= 0", "insertion_loss_db");
        }
        if (uncertainty_db < 0.0)
        {
            throw ValidationError("must be >= 0", "uncertainty_db");
        }
        if (variable_min_db < 0.0 || variable_max_db < variable_min_db)
        {
            throw ValidationError("variable range must satisfy 0 <= min <= max", "variable_range_db");
        }
        if (variable_db < variable_min_db || variable_db > variable_max_db ||
            std::fmod(variable_db, kStepDb) != 0.0)
        {
            throw ValidationError("setting must be a whole step inside the range", "variable_db");
        }
    }
};

/// Chain whose fixed part is `stages` VAT-30 blocks.
inline AttenuatorChain make_chain(int stages, double insertion_loss_db = 2.0, double uncertainty_db = 0.0)
{
    AttenuatorChain c;
    c.fixed_stages_db.assign(static_cast<std::size_t>(std::clamp(stages, 0, AttenuatorChain::kMaxStages)),
                             AttenuatorChain::kStageDb);
    c.insertion_loss_db = insertion_loss_db;
    c.uncertainty_db = uncertainty_db;
    return c;
}

/// Chain whose fixed part is one block of `fixed_db`.
inline AttenuatorChain make_chain_fixed(double fixed_db, double insertion_loss_db = 2.0, double uncertainty_db = 0.0)
{
    AttenuatorChain c;
    c.fixed_stages_db = {fixed_db};
    c.insertion_loss_db = insertion_loss_db;
    c.uncertainty_db = uncertainty_db;
    return c;
}

/// Attenuation at which the model expects the link to fail at `tx_dbm`.
inline double predicted_threshold_db(const ModemPreset& preset, double tx_dbm, const RadioModel& model)
{
    double predicted = tx_dbm - sensitivity_dbm(preset, model);
    if (model.long_moderate_fault && preset.id == PresetId::LongModerate)
    {
        predicted = std::min(predicted, model.fault_cutoff_db);
    }
    return predicted;
}

/// Picks how many 30 dB stages to insert so the sweep window opens at least `guard_db`
/// before the expected failure point.
inline AttenuatorChain auto_chain(const ModemPreset& preset, double tx_dbm, const RadioModel& model,
                                  double insertion_loss_db = 2.0, double uncertainty_db = 0.0,
                                  double guard_db = 20.0)
{
    const double room = predicted_threshold_db(preset, tx_dbm, model) - insertion_loss_db - guard_db;
    const int stages = static_cast<int>(std::floor(room / AttenuatorChain::kStageDb));
    return make_chain(stages, insertion_loss_db, uncertainty_db);
}

inline double received_power_dbm(double tx_dbm, const AttenuatorChain& chain) noexcept
{
    return tx_dbm - chain.total_attenuation_db();
}

/// Same, with the calibration error drawn uniformly in +-uncertainty_db.
inline double received_power_dbm(double tx_dbm, const AttenuatorChain& chain, Rng& rng)
{
    double prx = received_power_dbm(tx_dbm, chain);
    if (chain.uncertainty_db > 0.0)
    {
        prx += rng.uniform(-chain.uncertainty_db, chain.uncertainty_db);
    }
    return prx;
}

struct PacketRecord
{
    double timestamp_s;
    bool received;
    /// Present only for received packets.
    std::optional<double> rssi_dbm;
    std::optional<double> snr_db;
};

struct BurstRecord
{
    double attenuation_db = 0.0; ///< total path attenuation, fixed cascade and insertion loss included
    int sent = 0;
    int lost = 0;
    double per_percent = 0.0;
    std::optional<double> mean_rssi_dbm;
    std::optional<double> mean_snr_db;
    double start_time_s = 0.0;
    std::string payload_tag;
    std::vector<PacketRecord> packets;
};

/// Packet error rate in percent.
constexpr double per_percent(int lost, int sent) noexcept
{
    return 100.0 * static_cast<double>(lost) / static_cast<double>(sent);
}

struct SweepOptions
{
    int packets = 50;
    int payload_bytes = kDefaultPayloadBytes;
    FrameParams frame;
    double stabilisation_s = 5.0;

    void validate() const
    {
        if (packets < 1)
        {
            throw ValidationError("must be >= 1", "packets");
        }
        check_payload(payload_bytes);
    }
};

inline std::string payload_tag_for(double attenuation_db)
{
    return "ATT" + format_fixed(attenuation_db, 0);
}

/// Transmits `packets` packets through the chain at its current setting.
inline BurstRecord run_burst(const ModemPreset& preset, const TxPowerLevel& power, const AttenuatorChain& chain,
                             const RadioModel& model, int packets, Rng& rng, double start_time_s = 0.0,
                             const SweepOptions& options = {})
{
    if (packets < 1)
    {
        throw ValidationError("must be >= 1", "packets");
    }
    BurstRecord rec;
    rec.attenuation_db = chain.total_attenuation_db();
    rec.sent = packets;
    rec.start_time_s = start_time_s;
    rec.payload_tag = payload_tag_for(rec.attenuation_db);
    rec.packets.reserve(static_cast<std::size_t>(packets));

    const double prx = received_power_dbm(power.dbm, chain, rng);
    const double toa = time_on_air_s(preset, options.payload_bytes, options.frame);
    double rssi_sum = 0.0;
    double snr_sum = 0.0;
    int received = 0;
    for (int i = 0; i < packets; ++i)
    {
        const auto obs = observe(preset, prx, model, rng, rec.attenuation_db);
        PacketRecord pkt{start_time_s + i * toa, obs.demodulated, std::nullopt, std::nullopt};
        if (obs.demodulated)
        {
            pkt.rssi_dbm = obs.reported_rssi_dbm;
            pkt.snr_db = obs.snr_db;
            rssi_sum += obs.reported_rssi_dbm;
            snr_sum += obs.snr_db;
            ++received;
        }
        rec.packets.push_back(pkt);
    }
    rec.lost = packets - received;
    rec.per_percent = per_percent(rec.lost, rec.sent);
    if (received > 0)
    {
        rec.mean_rssi_dbm = rssi_sum / received;
        rec.mean_snr_db = snr_sum / received;
    }
    return rec;
}

inline BurstRecord run_burst(const ModemPreset& preset, const TxPowerLevel& power, const AttenuatorChain& chain,
                             const RadioModel& model, int packets, std::uint64_t seed)
{
    Rng rng(seed);
    return run_burst(preset, power, chain, model, packets, rng);
}

inline constexpr double kPerThresholdPercent = 10.0;

enum class ThresholdStatus : std::uint8_t
{
    Reached,     ///< the link failed inside the window
    NotReached,  ///< the link still holds at the last step
    BelowWindow, ///< no step passed at all
};

constexpr std::string_view to_string(ThresholdStatus s) noexcept
{
    switch (s)
    {
    case ThresholdStatus::Reached:
        return "reached";
    case ThresholdStatus::NotReached:
        return "not_reached";
    case ThresholdStatus::BelowWindow:
        return "below_window";
    }
    return "?";
}

struct ThresholdResult
{
    ThresholdStatus status = ThresholdStatus::NotReached;
    double attenuation_db = 0.0; ///< meaningful only when Reached

    bool reached() const noexcept { return status == ThresholdStatus::Reached; }
    bool operator==(const ThresholdResult&) const = default;
};

/// Sensitivity threshold on the attenuation axis: the last step with PER <= 10% after which
/// every step fails. Isolated failing steps before it are ignored.
inline ThresholdResult extract_threshold(std::span<const BurstRecord> records)
{
    if (records.empty())
    {
        throw ValidationError("cannot extract a threshold from an empty sweep", "records");
    }
    const auto passes = [](const BurstRecord& r) { return r.per_percent <= kPerThresholdPercent; };
    if (passes(records.back()))
    {
        return {ThresholdStatus::NotReached, 0.0};
    }
    for (auto it = records.rbegin(); it != records.rend(); ++it)
    {
        if (passes(*it))
        {
            return {ThresholdStatus::Reached, it->attenuation_db};
        }
    }
    return {ThresholdStatus::BelowWindow, 0.0};
}

struct SweepResult
{
    const ModemPreset* preset = nullptr;
    TxPowerLevel power{PowerLabel::Max, 21.0};
    AttenuatorChain chain;
    std::string run_id;
    std::uint64_t seed = 0;
    std::vector<BurstRecord> records;
    ThresholdResult threshold;
    std::optional<double> threshold_prx_dbm;
    double duration_s = 0.0;
};

/// One full attenuation sweep: a burst per 1 dB step of the rotary attenuator.
inline SweepResult run_sweep(const ModemPreset& preset, const TxPowerLevel& power, const AttenuatorChain& chain,
                             const RadioModel& model, std::uint64_t seed, const SweepOptions& options = {},
                             std::string run_id = {})
{
    chain.with_variable(chain.variable_min_db).validate();
    options.validate();

    SweepResult result;
    result.preset = &preset;
    result.power = power;
    result.chain = chain.with_variable(chain.variable_min_db);
    result.seed = seed;
    result.run_id = run_id.empty() ? std::string(preset.name) + "-" + std::string(to_string(power.label)) : run_id;

    Rng rng(seed);
    const double burst_s = options.packets * time_on_air_s(preset, options.payload_bytes, options.frame);
    const auto steps = static_cast<int>(std::floor((chain.variable_max_db - chain.variable_min_db) /
                                                   AttenuatorChain::kStepDb)) +
                       1;
    result.records.reserve(static_cast<std::size_t>(steps));
    double clock = 0.0;
    for (int step = 0; step < steps; ++step)
    {
        const auto setting = chain.with_variable(chain.variable_min_db + step * AttenuatorChain::kStepDb);
        result.records.push_back(run_burst(preset, power, setting, model, options.packets, rng, clock, options));
        clock += burst_s + options.stabilisation_s;
    }
    result.duration_s = clock;
    result.threshold = extract_threshold(result.records);
    if (result.threshold.reached())
    {
        result.threshold_prx_dbm = power.dbm - result.threshold.attenuation_db;
    }
    return result;
}

// --- measurement matrix ----------------------------------------------------------------

struct MatrixEntry
{
    PresetId preset;
    int runs;
};

struct MatrixConfig
{
    std::vector<MatrixEntry> entries;
    std::vector<PowerLabel> powers{kPowerLabels.begin(), kPowerLabels.end()};
    PowerTable power_table;
    /// Overrides the automatic choice of fixed stages with a single block of this size.
    std::optional<double> fixed_attenuation_db;
    double insertion_loss_db = 2.0;
    double uncertainty_db = 0.0;
    double variable_max_db = 110.0;
    SweepOptions options;

    /// The 42-dataset plan: duplicate runs for ShortTurbo..LongFast, single runs for the two slowest presets.
    static MatrixConfig standard()
    {
        MatrixConfig c;
        for (const auto& p : preset_catalog())
        {
            const bool slow = p.id == PresetId::LongModerate || p.id == PresetId::LongSlow;
            c.entries.push_back({p.id, slow ? 1 : 2});
        }
        return c;
    }
};

struct MatrixCell
{
    PresetId preset;
    PowerLabel power;
    int run; ///< 1-based
    std::uint64_t seed;
    std::string run_id;
};

/// Cells in config order: preset, then power, then run.
inline std::vector<MatrixCell> matrix_cells(const MatrixConfig& config, std::uint64_t seed)
{
    std::vector<MatrixCell> cells;
    for (const auto& entry : config.entries)
    {
        for (const auto power : config.powers)
        {
            for (int run = 1; run <= entry.runs; ++run)
            {
                const auto& p = preset(entry.preset);
                cells.push_back({entry.preset, power, run,
                                 derive_seed(seed, {preset_index(entry.preset), static_cast<std::uint64_t>(power),
                                                    static_cast<std::uint64_t>(run)}),
                                 std::string(p.name) + "-" + std::string(to_string(power)) + "-r" +
                                     std::to_string(run)});
            }
        }
    }
    return cells;
}

inline AttenuatorChain chain_for_cell(const MatrixConfig& config, const ModemPreset& p, double tx_dbm,
                                      const RadioModel& model)
{
    auto chain = config.fixed_attenuation_db
                     ? make_chain_fixed(*config.fixed_attenuation_db, config.insertion_loss_db, config.uncertainty_db)
                     : auto_chain(p, tx_dbm, model, config.insertion_loss_db, config.uncertainty_db);
    chain.variable_max_db = config.variable_max_db;
    return chain;
}

/// Runs every cell. Cells are independent and run concurrently; results come back in cell order.
inline std::vector<SweepResult> run_matrix(const MatrixConfig& config, const RadioModel& model, std::uint64_t seed)
{
    config.power_table.validate();
    for (const auto& e : config.entries)
    {
        if (e.runs < 0)
        {
            throw ValidationError("must be >= 0", "runs");
        }
    }
    const auto cells = matrix_cells(config, seed);
    std::vector<std::future<SweepResult>> pending;
    pending.reserve(cells.size());
    for (const auto& cell : cells)
    {
        pending.push_back(std::async(std::launch::async, [&config, &model, cell] {
            const auto& p = preset(cell.preset);
            const auto power = config.power_table.level(cell.power);
            return run_sweep(p, power, chain_for_cell(config, p, power.dbm, model), model, cell.seed,
                             config.options, cell.run_id);
        }));
    }
    std::vector<SweepResult> results;
    results.reserve(cells.size());
    for (auto& f : pending)
    {
        results.push_back(f.get());
    }
    return results;
}

// --- exports ---------------------------------------------------------------------------

inline Json to_json(const AttenuatorChain& c)
{
    return Json{{"fixed_stages_db", c.fixed_stages_db},
                {"insertion_loss_db", c.insertion_loss_db},
                {"variable_min_db", c.variable_min_db},
                {"variable_max_db", c.variable_max_db},
                {"step_db", AttenuatorChain::kStepDb},
                {"uncertainty_db", c.uncertainty_db}};
}

inline Json optional_json(const std::optional<double>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

inline Json to_json(const ThresholdResult& t, const std::optional<double>& prx)
{
    return Json{{"status", to_string(t.status)},
                {"attenuation_db", t.reached() ? Json(t.attenuation_db) : Json(nullptr)},
                {"prx_dbm", optional_json(prx)}};
}

inline Json to_json(const SweepResult& r)
{
    Json records = Json::array();
    for (const auto& b : r.records)
    {
        records.push_back(Json{{"attenuation_db", b.attenuation_db},
                               {"sent", b.sent},
                               {"lost", b.lost},
                               {"per_percent", b.per_percent},
                               {"mean_rssi_dbm", optional_json(b.mean_rssi_dbm)},
                               {"mean_snr_db", optional_json(b.mean_snr_db)},
                               {"start_time_s", b.start_time_s},
                               {"payload_tag", b.payload_tag}});
    }
    return Json{{"schema_version", kSchemaVersion},
                {"run_id", r.run_id},
                {"preset", to_json(*r.preset)},
                {"power", Json{{"label", to_string(r.power.label)}, {"dbm", r.power.dbm}}},
                {"seed", r.seed},
                {"attenuation_axis", "total_path_attenuation_db"},
                {"chain", to_json(r.chain)},
                {"threshold", to_json(r.threshold, r.threshold_prx_dbm)},
                {"duration_s", r.duration_s},
                {"records", records}};
}

inline constexpr std::string_view kPacketLogHeader =
    "timestamp_s,run_id,preset,power_dbm,attenuation_db,rssi_dbm,snr_db,payload_tag,received\n";

/// Appends one CSV row per packet. Lost packets leave the RSSI and SNR columns empty.
inline void append_packet_log(std::string& out, const SweepResult& r)
{
    for (const auto& b : r.records)
    {
        for (const auto& pkt : b.packets)
        {
            out += format_fixed(pkt.timestamp_s, 6);
            out += ',';
            out += r.run_id;
            out += ',';
            out += r.preset->name;
            out += ',';
            out += format_fixed(r.power.dbm, 1);
            out += ',';
            out += format_fixed(b.attenuation_db, 1);
            out += ',';
            out += pkt.rssi_dbm ? format_fixed(*pkt.rssi_dbm, 2) : std::string();
            out += ',';
            out += pkt.snr_db ? format_fixed(*pkt.snr_db, 2) : std::string();
            out += ',';
            out += b.payload_tag;
            out += ',';
            out += pkt.received ? '1' : '0';
            out += '\n';
        }
    }
}

inline std::string packet_log_csv(std::span<const SweepResult> results)
{
    std::string out(kPacketLogHeader);
    for (const auto& r : results)
    {
        append_packet_log(out, r);
    }
    return out;
}

} // namespace meshlink

#endif // MESHLINK_GUIDED_LINK_HPP
