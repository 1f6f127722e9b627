#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "data.hpp"
#include "eval.hpp"

namespace icurisk {

// ---------------------------------------------------------------------------
// Synthetic multi-domain cohort generator. Channels are AR(1) paths around a
// physiological setpoint; non-survivors additionally drift on a subset of
// channels, so the true per-hour risk separates the outcomes more strongly as
// the stay progresses. Domains share temporal dynamics but weight channels
// differently, which is what makes cross-domain transfer interesting.
// ---------------------------------------------------------------------------

struct SynthChannel {
    std::string name;       // must be a dictionary parameter
    double mean = 0.0;
    double q1 = 0.0, q3 = 0.0;  // interquartile range sets the noise scale
    double missingness = 0.0;   // probability an hourly cell goes unobserved
    double weight = 0.0;        // shared contribution to the true risk score
    bool drift = false;         // non-survivors drift on this channel

    double sigma() const { return (q3 - q1) / 1.349; }
};

struct SynthDomain {
    std::string name;  // one of the four ICU domains
    std::size_t n_patients = 0;
    double mortality = 0.0;
    // Channel -> additive domain-specific weight; the effective risk weight of
    // a channel is shared weight + specific weight. Channels not listed get 0.
    std::map<std::string, double> specific_weights;
};

struct SynthSpec {
    std::vector<SynthChannel> channels;
    std::vector<SynthDomain> domains;
    double phi = 0.8;         // AR(1) persistence
    double drift_rate = 1.2;  // drift magnitude in stationary standard deviations at hour 48
    double risk_bias = -2.0;

    void validate() const {
        if (channels.empty()) throw config_error("synth: no channels");
        if (domains.empty()) throw config_error("synth: no domains");
        if (!(phi > -1.0 && phi < 1.0)) throw config_error("synth: phi must be in (-1,1)");
        std::map<std::string, int> seen;
        for (const auto& c : channels) {
            if (parameter_index(c.name) < 0)
                throw config_error("synth: unknown channel name " + c.name);
            if (seen[c.name]++) throw config_error("synth: duplicate channel " + c.name);
            if (!(c.q3 > c.q1)) throw config_error("synth: channel " + c.name + " needs q3 > q1");
            if (c.missingness < 0.0 || c.missingness > 1.0)
                throw config_error("synth: channel " + c.name + " missingness must be in [0,1]");
        }
        for (const auto& d : domains) {
            domain_to_icutype(d.name);  // throws on unknown names
            if (d.n_patients == 0) throw config_error("synth: domain " + d.name + " is empty");
            if (!(d.mortality >= 0.0 && d.mortality < 1.0))
                throw config_error("synth: domain " + d.name + " mortality must be in [0,1)");
            for (const auto& [ch, _] : d.specific_weights)
                if (!seen.count(ch))
                    throw config_error("synth: specific weight for unknown channel " + ch);
        }
    }

    std::vector<std::string> channel_names() const {
        std::vector<std::string> out;
        for (const auto& c : channels) out.push_back(c.name);
        return out;
    }
};

inline void to_json(nlohmann::json& j, const SynthChannel& c) {
    j = nlohmann::json{{"name", c.name},       {"mean", c.mean},
                       {"q1", c.q1},           {"q3", c.q3},
                       {"missingness", c.missingness}, {"weight", c.weight},
                       {"drift", c.drift}};
}

inline void from_json(const nlohmann::json& j, SynthChannel& c) {
    j.at("name").get_to(c.name);
    j.at("mean").get_to(c.mean);
    j.at("q1").get_to(c.q1);
    j.at("q3").get_to(c.q3);
    j.at("missingness").get_to(c.missingness);
    j.at("weight").get_to(c.weight);
    j.at("drift").get_to(c.drift);
}

inline void to_json(nlohmann::json& j, const SynthDomain& d) {
    j = nlohmann::json{{"name", d.name},
                       {"n_patients", d.n_patients},
                       {"mortality", d.mortality},
                       {"specific_weights", d.specific_weights}};
}

inline void from_json(const nlohmann::json& j, SynthDomain& d) {
    j.at("name").get_to(d.name);
    j.at("n_patients").get_to(d.n_patients);
    j.at("mortality").get_to(d.mortality);
    if (j.contains("specific_weights"))
        j.at("specific_weights").get_to(d.specific_weights);
}

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
    j = nlohmann::json{{"channels", s.channels},
                       {"domains", s.domains},
                       {"phi", s.phi},
                       {"drift_rate", s.drift_rate},
                       {"risk_bias", s.risk_bias}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
    j.at("channels").get_to(s.channels);
    j.at("domains").get_to(s.domains);
    if (j.contains("phi")) j.at("phi").get_to(s.phi);
    if (j.contains("drift_rate")) j.at("drift_rate").get_to(s.drift_rate);
    if (j.contains("risk_bias")) j.at("risk_bias").get_to(s.risk_bias);
}

inline SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open generator spec: " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        SynthSpec s = j.get<SynthSpec>();
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path.string() + ": bad generator spec: " + std::string(e.what()));
    }
}

inline void save_synth_spec(const SynthSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write generator spec: " + path.string());
    out << nlohmann::json(spec).dump(2) << "\n";
}

// Ten channels with plausible setpoints; five carry the non-survivor drift.
inline std::vector<SynthChannel> default_channels() {
    return {
        {"HR", 86.0, 73.0, 99.0, 0.25, 0.30, true},
        {"SysABP", 118.0, 100.0, 135.0, 0.30, -0.25, false},
        {"Temp", 37.0, 36.4, 37.6, 0.40, 0.10, false},
        {"RespRate", 19.0, 14.0, 23.0, 0.50, 0.20, false},
        {"GCS", 11.0, 8.0, 14.0, 0.45, -0.45, false},
        {"Lactate", 2.2, 1.1, 2.9, 0.75, 0.50, true},
        {"Creatinine", 1.4, 0.8, 1.7, 0.70, 0.35, true},
        {"HCO3", 23.0, 20.0, 26.0, 0.70, -0.30, true},
        {"Urine", 120.0, 60.0, 180.0, 0.35, -0.40, true},
        {"Glucose", 140.0, 105.0, 170.0, 0.70, 0.05, false},
    };
}

// Default cohort mirroring the reference population: per-domain sizes and
// in-hospital mortality rates, with additive domain-specific channel weights
// on top of the shared ones.
inline SynthSpec default_synth_spec() {
    SynthSpec spec;
    spec.channels = default_channels();
    spec.domains = {
        {"Coronary", 874, 0.049, {{"HR", 0.20}, {"SysABP", -0.20}}},
        {"Cardiac", 577, 0.140, {{"Urine", -0.20}, {"Lactate", 0.15}}},
        {"Medical", 1481, 0.186, {{"Lactate", 0.20}, {"GCS", -0.15}}},
        {"Surgical", 1067, 0.145, {{"Creatinine", 0.20}, {"RespRate", 0.15}}},
    };
    return spec;
}

// Desk-scale adaptation cohort: three source domains with enough patients to
// pretrain on, one small target domain (n=80) whose specific weights stay
// close to the shared structure, and mortality high enough for stable AUC on
// small test splits.
inline SynthSpec adaptation_synth_spec() {
    SynthSpec spec;
    spec.channels = default_channels();
    spec.drift_rate = 1.5;
    spec.domains = {
        {"Coronary", 220, 0.30, {{"HR", 0.20}, {"SysABP", -0.20}}},
        {"Medical", 220, 0.30, {{"Lactate", 0.20}, {"GCS", -0.15}}},
        {"Surgical", 220, 0.30, {{"Creatinine", 0.20}, {"RespRate", 0.15}}},
        {"Cardiac", 80, 0.30, {{"Lactate", 0.10}, {"Urine", -0.10}}},
    };
    return spec;
}

struct GeneratedCohort {
    std::vector<PatientRecord> records;
    std::map<std::string, std::vector<double>> true_risk;  // id -> 48 per-hour risks
    std::vector<std::string> channel_names;
};

inline GeneratedCohort generate_cohort(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    GeneratedCohort gen;
    gen.channel_names = spec.channel_names();
    const std::size_t n_ch = spec.channels.size();

    // First channel that can actually be observed anchors every record with at
    // least one measurement.
    std::size_t forced_channel = n_ch;
    for (std::size_t f = 0; f < n_ch; ++f)
        if (spec.channels[f].missingness < 1.0) {
            forced_channel = f;
            break;
        }

    Rng root(seed);
    std::size_t patient_counter = 0;
    for (std::size_t d = 0; d < spec.domains.size(); ++d) {
        const auto& dom = spec.domains[d];
        std::vector<double> weights(n_ch);
        for (std::size_t f = 0; f < n_ch; ++f) {
            auto it = dom.specific_weights.find(spec.channels[f].name);
            weights[f] = spec.channels[f].weight +
                         (it == dom.specific_weights.end() ? 0.0 : it->second);
        }

        // Exact death count so realized mortality matches the target rate.
        const std::size_t n_dead = static_cast<std::size_t>(
            std::llround(dom.mortality * static_cast<double>(dom.n_patients)));
        std::vector<int> outcomes(dom.n_patients, 0);
        for (std::size_t i = 0; i < n_dead; ++i) outcomes[i] = 1;
        Rng domain_rng = root.child(10 + d);
        domain_rng.shuffle(outcomes);

        for (std::size_t p = 0; p < dom.n_patients; ++p, ++patient_counter) {
            Rng rng = root.child(1000 + patient_counter);
            PatientRecord rec;
            rec.id = std::to_string(900000 + patient_counter);
            rec.icu_domain = dom.name;
            rec.outcome = outcomes[p];
            rec.age = std::round(clamp(65.0 + 13.0 * rng.normal(), 18.0, 100.0));
            rec.gender = rng.bernoulli(0.56) ? 1 : 0;
            rec.height = std::round(10.0 * (170.0 + 10.0 * rng.normal())) / 10.0;
            rec.weight = std::round(10.0 * std::max(35.0, 80.0 + 15.0 * rng.normal())) / 10.0;

            std::vector<double> risk(kHours, 0.0);
            std::vector<double> score(kHours, spec.risk_bias);
            for (std::size_t f = 0; f < n_ch; ++f) {
                const auto& ch = spec.channels[f];
                const double sigma = ch.sigma();
                const double sigma_inno = sigma * std::sqrt(1.0 - spec.phi * spec.phi);
                const double direction = weights[f] >= 0.0 ? 1.0 : -1.0;
                double z = sigma * rng.normal();
                for (std::size_t t = 0; t < kHours; ++t) {
                    if (t > 0) z = spec.phi * z + sigma_inno * rng.normal();
                    double x = ch.mean + z;
                    if (rec.outcome == 1 && ch.drift)
                        x += spec.drift_rate * sigma * direction *
                             (static_cast<double>(t) + 1.0) / static_cast<double>(kHours);
                    x = std::max(x, 0.0);  // negative values read as missing downstream
                    score[t] += weights[f] * (x - ch.mean) / sigma;
                    const bool forced = t == 0 && f == forced_channel;
                    const bool observed = rng.uniform() >= ch.missingness;
                    const int minutes = static_cast<int>(t) * 60 +
                                        static_cast<int>(rng.below(60));
                    if (forced || observed)
                        rec.measurements.push_back(
                            {forced ? 0 : minutes, parameter_index(ch.name), x});
                }
            }
            for (std::size_t t = 0; t < kHours; ++t) risk[t] = sigmoid(score[t]);
            gen.true_risk.emplace(rec.id, std::move(risk));
            gen.records.push_back(std::move(rec));
        }
    }
    return gen;
}

// Discrimination of the generator's own risk at a horizon; the reference any
// trained model is chasing.
inline double oracle_auc(const GeneratedCohort& gen, std::size_t hours) {
    if (hours < 1 || hours > kHours) throw usage_error("oracle_auc: horizon out of range");
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& rec : gen.records) {
        scores.push_back(gen.true_risk.at(rec.id)[hours - 1]);
        labels.push_back(rec.outcome);
    }
    return auc(scores, labels);
}

inline void write_true_risk_csv(const GeneratedCohort& gen, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write true risk file: " + path.string());
    out << "id,hour,risk\n";
    for (const auto& rec : gen.records) {
        const auto& risk = gen.true_risk.at(rec.id);
        for (std::size_t t = 0; t < risk.size(); ++t)
            out << rec.id << "," << (t + 1) << "," << format_double(risk[t]) << "\n";
    }
}

}  // namespace icurisk
