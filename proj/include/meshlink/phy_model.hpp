#ifndef MESHLINK_PHY_MODEL_HPP
#define MESHLINK_PHY_MODEL_HPP

#include "meshlink/error.hpp"
#include "meshlink/json_support.hpp"
#include "meshlink/presets.hpp"
#include "meshlink/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace meshlink {

enum class SensitivitySource : std::uint8_t
{
    Datasheet, ///< thermal noise + noise figure + per-SF demodulation SNR limit
    Empirical, ///< per-preset maximum attenuation measured at the reference TX power
};

constexpr std::string_view to_string(SensitivitySource s) noexcept
{
    return s == SensitivitySource::Datasheet ? "datasheet" : "empirical";
}

inline SensitivitySource sensitivity_source_by_name(std::string_view name)
{
    const auto key = detail::fold_name(name);
    if (key == "datasheet")
    {
        return SensitivitySource::Datasheet;
    }
    if (key == "empirical")
    {
        return SensitivitySource::Empirical;
    }
    throw ValidationError("unknown sensitivity source '" + std::string(name) + "' (valid: datasheet, empirical)",
                          "model");
}

inline constexpr int kMinSf = 7;
inline constexpr int kMaxSf = 12;

/// Behavioural parameters of the SX1262 receiver.
struct RadioModel
{
    double noise_figure_db = 6.0;
    /// Demodulation SNR limit for SF7..SF12.
    std::array<double, 6> snr_limit_db{-7.5, -10.0, -12.5, -15.0, -17.5, -20.0};
    SensitivitySource sensitivity_source = SensitivitySource::Empirical;
    /// TX power the empirical thresholds were measured at.
    double empirical_reference_tx_dbm = 21.0;
    /// Maximum attenuation with PER <= 10% at the reference power.
    std::map<PresetId, double> empirical_threshold_db{
        {PresetId::ShortTurbo, 110.0},
        {PresetId::ShortFast, 115.0},
        {PresetId::ShortSlow, 120.0},
        {PresetId::MediumFast, 135.0},
        {PresetId::MediumSlow, 150.0},
        {PresetId::LongFast, 155.0},
        {PresetId::LongModerate, 158.0},
        {PresetId::LongSlow, 180.0},
    };
    double rssi_saturation_dbm = 0.0;
    double rssi_register_floor_dbm = -100.0;
    /// Half-width of the PER transition: success is >= 99% at +width and <= 1% at -width.
    double failure_width_db = 2.0;
    /// Injects the LongModerate firmware-level failure: no packet survives past fault_cutoff_db.
    bool long_moderate_fault = true;
    double fault_cutoff_db = 80.0;

    bool operator==(const RadioModel&) const = default;

    double snr_limit(int sf) const
    {
        if (sf < kMinSf || sf > kMaxSf)
        {
            throw ValidationError("spreading factor " + std::to_string(sf) + " outside 7..12", "sf");
        }
        return snr_limit_db[static_cast<std::size_t>(sf - kMinSf)];
    }

    void validate() const
    {
        for (std::size_t i = 1; i < snr_limit_db.size(); ++i)
        {
            if (!(snr_limit_db[i] < snr_limit_db[i - 1]))
            {
                throw ValidationError("must be strictly decreasing in SF", "snr_limit_db");
            }
        }
        if (snr_limit_db.back() != -20.0)
        {
            throw ValidationError("SF12 limit is anchored at -20 dB", "snr_limit_db.12");
        }
        if (failure_width_db < 0.0 || failure_width_db > 4.0)
        {
            throw ValidationError("must lie in [0, 4] dB", "failure_width_db");
        }
        if (rssi_register_floor_dbm >= rssi_saturation_dbm)
        {
            throw ValidationError("register floor must lie below saturation", "rssi_register_floor_dbm");
        }
        if (fault_cutoff_db < 0.0)
        {
            throw ValidationError("must be >= 0", "fault_cutoff_db");
        }
    }
};

/// Thermal noise power in the channel: -174 dBm/Hz + 10 log10(BW) + NF.
inline double noise_floor_dbm(const ModemPreset& preset, const RadioModel& model) noexcept
{
    return -174.0 + 10.0 * std::log10(static_cast<double>(preset.bw_hz)) + model.noise_figure_db;
}

inline double empirical_threshold(const ModemPreset& preset, const RadioModel& model)
{
    const auto it = model.empirical_threshold_db.find(preset.id);
    if (it == model.empirical_threshold_db.end())
    {
        throw ValidationError("no empirical threshold for preset " + std::string(preset.name),
                              "empirical_threshold_db." + std::string(preset.name));
    }
    return it->second;
}

/// Receiver sensitivity. In datasheet mode this is the 50% demodulation point; in
/// empirical mode it is the received power at the measured PER <= 10% threshold.
inline double sensitivity_dbm(const ModemPreset& preset, const RadioModel& model)
{
    if (model.sensitivity_source == SensitivitySource::Datasheet)
    {
        return noise_floor_dbm(preset, model) + model.snr_limit(preset.sf);
    }
    return model.empirical_reference_tx_dbm - empirical_threshold(preset, model);
}

namespace detail {

/// Logistic slope giving p(+w) = 0.99 and p(-w) = 0.01.
inline double logistic_slope(double width_db) noexcept
{
    return std::log(99.0) / width_db;
}

} // namespace detail

/// SNR at which packet success is 50%.
///
/// Datasheet mode uses the SF table directly. Empirical mode places the curve so that the
/// expected PER crosses 10% half a 1 dB step beyond the tabulated threshold: the last
/// passing step of a sweep then lands on the table value instead of a step short of it.
inline double demod_snr_limit_db(const ModemPreset& preset, const RadioModel& model)
{
    if (model.sensitivity_source == SensitivitySource::Datasheet)
    {
        return model.snr_limit(preset.sf);
    }
    double offset = 0.5;
    if (model.failure_width_db > 0.0)
    {
        offset += std::log(9.0) / detail::logistic_slope(model.failure_width_db);
    }
    return sensitivity_dbm(preset, model) - offset - noise_floor_dbm(preset, model);
}

inline bool fault_applies(const ModemPreset& preset, const RadioModel& model,
                          std::optional<double> attenuation_db) noexcept
{
    return model.long_moderate_fault && preset.id == PresetId::LongModerate && attenuation_db &&
           *attenuation_db > model.fault_cutoff_db;
}

/// Probability that one packet at `snr_db` demodulates. Monotone logistic in the margin
/// over the demodulation limit. The optional path attenuation only matters for the
/// injected LongModerate fault.
inline double packet_success_prob(const ModemPreset& preset, double snr_db, const RadioModel& model,
                                  std::optional<double> attenuation_db = std::nullopt)
{
    if (fault_applies(preset, model, attenuation_db))
    {
        return 0.0;
    }
    const double margin = snr_db - demod_snr_limit_db(preset, model);
    if (model.failure_width_db == 0.0)
    {
        return margin > 0.0 ? 1.0 : (margin < 0.0 ? 0.0 : 0.5);
    }
    return 1.0 / (1.0 + std::exp(-detail::logistic_slope(model.failure_width_db) * margin));
}

/// Register value for a given true power: log-sum with the noise plateau, clipped at ADC saturation.
inline double reported_rssi_dbm(double true_prx_dbm, const RadioModel& model) noexcept
{
    const double summed = 10.0 * std::log10(std::pow(10.0, true_prx_dbm / 10.0) +
                                            std::pow(10.0, model.rssi_register_floor_dbm / 10.0));
    return std::min(model.rssi_saturation_dbm, summed);
}

struct RxObservation
{
    double true_prx_dbm;
    double reported_rssi_dbm;
    double snr_db;
    bool demodulated;
};

/// One packet reception. Consumes exactly one draw from `rng`.
inline RxObservation observe(const ModemPreset& preset, double true_prx_dbm, const RadioModel& model, Rng& rng,
                             std::optional<double> attenuation_db = std::nullopt)
{
    RxObservation obs{};
    obs.true_prx_dbm = true_prx_dbm;
    obs.snr_db = true_prx_dbm - noise_floor_dbm(preset, model);
    obs.reported_rssi_dbm = reported_rssi_dbm(true_prx_dbm, model);
    const double p = packet_success_prob(preset, obs.snr_db, model, attenuation_db);
    obs.demodulated = rng.uniform01() < p;
    return obs;
}

/// Received power estimate from packet metadata: below the noise floor the RSSI register
/// reads noise, so the (negative) SNR is added back.
constexpr double corrected_prx_dbm(double rssi_dbm, double snr_db) noexcept
{
    return snr_db < 0.0 ? rssi_dbm + snr_db : rssi_dbm;
}

struct FrameParams
{
    int preamble_symbols = 16;
    bool explicit_header = true;
    bool crc_on = true;

    bool operator==(const FrameParams&) const = default;
};

inline constexpr int kDefaultPayloadBytes = 32;

inline double symbol_time_s(const ModemPreset& preset) noexcept
{
    return std::ldexp(1.0, preset.sf) / static_cast<double>(preset.bw_hz);
}

inline bool low_data_rate_optimise(const ModemPreset& preset) noexcept
{
    return symbol_time_s(preset) > 0.016;
}

inline void check_payload(int payload_bytes)
{
    if (payload_bytes < 1 || payload_bytes > 255)
    {
        throw ValidationError("payload must be 1..255 bytes, got " + std::to_string(payload_bytes), "payload");
    }
}

/// Payload symbol count (including the fixed 8 header symbols).
inline int payload_symbols(const ModemPreset& preset, int payload_bytes, const FrameParams& frame = {})
{
    check_payload(payload_bytes);
    const int de = low_data_rate_optimise(preset) ? 1 : 0;
    const int ih = frame.explicit_header ? 0 : 1;
    const int crc = frame.crc_on ? 1 : 0;
    const int numerator = 8 * payload_bytes - 4 * preset.sf + 28 + 16 * crc - 20 * ih;
    const int denominator = 4 * (preset.sf - 2 * de);
    const int blocks = numerator > 0 ? (numerator + denominator - 1) / denominator : 0;
    return 8 + blocks * preset.cr_denominator;
}

inline double time_on_air_s(const ModemPreset& preset, int payload_bytes, const FrameParams& frame = {})
{
    const int n_payload = payload_symbols(preset, payload_bytes, frame);
    return (frame.preamble_symbols + 4.25 + n_payload) * symbol_time_s(preset);
}

// --- serialisation -------------------------------------------------------------------

inline Json to_json(const RadioModel& m)
{
    Json limits = Json::object();
    for (int sf = kMinSf; sf <= kMaxSf; ++sf)
    {
        limits[std::to_string(sf)] = m.snr_limit(sf);
    }
    Json thresholds = Json::object();
    for (const auto& p : preset_catalog())
    {
        if (auto it = m.empirical_threshold_db.find(p.id); it != m.empirical_threshold_db.end())
        {
            thresholds[std::string(p.name)] = it->second;
        }
    }
    return Json{{"noise_figure_db", m.noise_figure_db},
                {"snr_limit_db", limits},
                {"sensitivity_source", to_string(m.sensitivity_source)},
                {"empirical_reference_tx_dbm", m.empirical_reference_tx_dbm},
                {"empirical_threshold_db", thresholds},
                {"rssi_saturation_dbm", m.rssi_saturation_dbm},
                {"rssi_register_floor_dbm", m.rssi_register_floor_dbm},
                {"failure_width_db", m.failure_width_db},
                {"long_moderate_fault", m.long_moderate_fault},
                {"fault_cutoff_db", m.fault_cutoff_db}};
}

/// Fields absent from `doc` keep the values of `base`.
inline RadioModel radio_model_from_json(const Json& doc, RadioModel base = {}, std::string_view path = "radio_model")
{
    if (!doc.is_object())
    {
        throw ValidationError("expected an object", std::string(path));
    }
    RadioModel m = std::move(base);
    m.noise_figure_db = get_field_or(doc, "noise_figure_db", m.noise_figure_db, path);
    if (doc.contains("snr_limit_db"))
    {
        const auto sub = json_detail::join_path(path, "snr_limit_db");
        const auto& limits = doc.at("snr_limit_db");
        if (!limits.is_object())
        {
            throw ValidationError("expected an object keyed by SF", sub);
        }
        for (const auto& [key, value] : limits.items())
        {
            int sf = 0;
            try
            {
                sf = std::stoi(key);
            }
            catch (const std::exception&)
            {
                throw ValidationError("key is not a spreading factor", json_detail::join_path(sub, key));
            }
            if (sf < kMinSf || sf > kMaxSf || !value.is_number())
            {
                throw ValidationError("expected a number for SF 7..12", json_detail::join_path(sub, key));
            }
            m.snr_limit_db[static_cast<std::size_t>(sf - kMinSf)] = value.get<double>();
        }
    }
    if (doc.contains("sensitivity_source"))
    {
        try
        {
            m.sensitivity_source = sensitivity_source_by_name(get_field<std::string>(doc, "sensitivity_source", path));
        }
        catch (const ValidationError& e)
        {
            throw ValidationError(e.message(), json_detail::join_path(path, "sensitivity_source"));
        }
    }
    m.empirical_reference_tx_dbm = get_field_or(doc, "empirical_reference_tx_dbm", m.empirical_reference_tx_dbm, path);
    if (doc.contains("empirical_threshold_db"))
    {
        const auto sub = json_detail::join_path(path, "empirical_threshold_db");
        const auto& table = doc.at("empirical_threshold_db");
        if (!table.is_object())
        {
            throw ValidationError("expected an object keyed by preset name", sub);
        }
        for (const auto& [key, value] : table.items())
        {
            const auto field = json_detail::join_path(sub, key);
            PresetId id{};
            try
            {
                id = preset_by_name(key).id;
            }
            catch (const ValidationError& e)
            {
                throw ValidationError(e.message(), field);
            }
            if (!value.is_number())
            {
                throw ValidationError("expected a number", field);
            }
            m.empirical_threshold_db[id] = value.get<double>();
        }
    }
    m.rssi_saturation_dbm = get_field_or(doc, "rssi_saturation_dbm", m.rssi_saturation_dbm, path);
    m.rssi_register_floor_dbm = get_field_or(doc, "rssi_register_floor_dbm", m.rssi_register_floor_dbm, path);
    m.failure_width_db = get_field_or(doc, "failure_width_db", m.failure_width_db, path);
    m.long_moderate_fault = get_field_or(doc, "long_moderate_fault", m.long_moderate_fault, path);
    m.fault_cutoff_db = get_field_or(doc, "fault_cutoff_db", m.fault_cutoff_db, path);
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

inline constexpr std::string_view kDefaultRadioModelName = "sx1262-default";

inline constexpr std::string_view kSx1262DefaultDocument = R"({
  "noise_figure_db": 6.0,
  "snr_limit_db": {"7": -7.5, "8": -10.0, "9": -12.5, "10": -15.0, "11": -17.5, "12": -20.0},
  "sensitivity_source": "empirical",
  "empirical_reference_tx_dbm": 21.0,
  "empirical_threshold_db": {
    "ShortTurbo": 110.0, "ShortFast": 115.0, "ShortSlow": 120.0,
    "MediumFast": 135.0, "MediumSlow": 150.0,
    "LongFast": 155.0, "LongModerate": 158.0, "LongSlow": 180.0
  },
  "rssi_saturation_dbm": 0.0,
  "rssi_register_floor_dbm": -100.0,
  "failure_width_db": 2.0,
  "long_moderate_fault": true,
  "fault_cutoff_db": 80.0
})";

/// Named radio models shipped with the library.
inline Json radio_model_documents()
{
    Json docs = Json::object();
    docs[std::string(kDefaultRadioModelName)] = parse_json_text(kSx1262DefaultDocument, kDefaultRadioModelName);
    return docs;
}

inline RadioModel radio_model_by_name(std::string_view name)
{
    const auto docs = radio_model_documents();
    const auto key = std::string(name);
    if (!docs.contains(key))
    {
        throw ValidationError("unknown radio model '" + key + "' (valid: " + std::string(kDefaultRadioModelName) + ")",
                              "radio_model");
    }
    return radio_model_from_json(docs.at(key), RadioModel{}, key);
}

} // namespace meshlink

#endif // MESHLINK_PHY_MODEL_HPP
