#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace icurisk {

inline constexpr std::size_t kHours = 48;

// ---------------------------------------------------------------------------
// Parameter dictionary: the 37 time-stamped physiological parameters of the
// PhysioNet 2012 record format, plus the four admission descriptors that are
// broadcast as constant channels.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& physionet_parameters() {
    static const std::vector<std::string> names{
        "Albumin", "ALP",       "ALT",    "AST",      "Bilirubin", "BUN",      "Cholesterol",
        "Creatinine", "DiasABP", "FiO2",  "GCS",      "Glucose",   "HCO3",     "HCT",
        "HR",      "K",         "Lactate", "Mg",      "MAP",       "MechVent", "Na",
        "NIDiasABP", "NIMAP",   "NISysABP", "PaCO2",  "PaO2",      "pH",       "Platelets",
        "RespRate", "SaO2",     "SysABP", "Temp",     "TroponinI", "TroponinT", "Urine",
        "WBC",     "Weight"};
    return names;
}

inline const std::vector<std::string>& static_channel_names() {
    static const std::vector<std::string> names{"Age", "Gender", "Height", "AdmWeight"};
    return names;
}

inline int parameter_index(const std::string& name) {
    const auto& dict = physionet_parameters();
    for (std::size_t i = 0; i < dict.size(); ++i)
        if (dict[i] == name) return static_cast<int>(i);
    return -1;
}

inline const std::vector<std::string>& icu_domains() {
    static const std::vector<std::string> names{"Cardiac", "Coronary", "Medical", "Surgical"};
    return names;
}

inline std::string icutype_to_domain(int icutype) {
    switch (icutype) {
        case 1: return "Coronary";
        case 2: return "Cardiac";
        case 3: return "Medical";
        case 4: return "Surgical";
    }
    throw data_error("unknown ICUType value: " + std::to_string(icutype));
}

inline int domain_to_icutype(const std::string& domain) {
    if (domain == "Coronary") return 1;
    if (domain == "Cardiac") return 2;
    if (domain == "Medical") return 3;
    if (domain == "Surgical") return 4;
    throw data_error("unknown ICU domain: " + domain);
}

// ---------------------------------------------------------------------------
// PatientRecord: one patient's irregular raw measurements plus static
// descriptors and the outcome label. Missing statics are encoded as -1.
// ---------------------------------------------------------------------------

struct PatientRecord {
    struct Measurement {
        int minutes = 0;   // since admission
        int parameter = 0; // index into physionet_parameters()
        double value = 0.0;
    };

    std::string id;
    std::string icu_domain;
    double age = -1.0;
    int gender = -1;
    double height = -1.0;
    double weight = -1.0;  // admission weight descriptor
    std::vector<Measurement> measurements;
    int outcome = -1;
};

// ---------------------------------------------------------------------------
// Episodes: the 48 x F hourly grid. RawEpisode is resampled but unscaled;
// EpisodeTensor is filled, imputed, scaled into [0,1].
// ---------------------------------------------------------------------------

struct RawEpisode {
    std::string id;
    std::string domain;
    int outcome = -1;
    Tensor values;              // (48, F), zeros where unobserved
    std::vector<std::uint8_t> mask;  // 48*F observed flags
};

struct EpisodeTensor {
    std::string id;
    std::string domain;
    int outcome = -1;
    Tensor values;              // (48, F) in [0,1]
    std::vector<std::uint8_t> mask;
};

struct Cohort {
    std::vector<std::string> features;  // channel names, statics last
    std::vector<RawEpisode> episodes;

    std::size_t n_features() const { return features.size(); }
};

// ---------------------------------------------------------------------------
// PhysioNet set-a parsing. Per-record text files with a "Time,Parameter,Value"
// header; a separate outcomes CSV keyed by record id.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_value(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw data_error(where + ": malformed numeric value '" + s + "'");
    }
}

inline int parse_minutes(const std::string& s, const std::string& where) {
    const auto parts = split(s, ':');
    if (parts.size() != 2 || parts[0].empty() || parts[1].size() != 2)
        throw data_error(where + ": malformed time '" + s + "'");
    for (const auto& p : parts)
        for (char c : p)
            if (!std::isdigit(static_cast<unsigned char>(c)))
                throw data_error(where + ": malformed time '" + s + "'");
    return std::stoi(parts[0]) * 60 + std::stoi(parts[1]);
}

}  // namespace detail

inline PatientRecord parse_physionet_record(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw data_error("cannot open record file: " + file.string());
    PatientRecord rec;
    rec.id = file.stem().string();
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw data_error(file.string() + ": empty record file");
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = file.string() + ":" + std::to_string(line_no);
        const auto fields = detail::split(line, ',');
        if (fields.size() != 3) throw data_error(where + ": expected 'HH:MM,PARAM,VALUE'");
        const int minutes = detail::parse_minutes(fields[0], where);
        const std::string& param = fields[1];
        const double value = detail::parse_value(fields[2], where);

        if (param == "RecordID") {
            continue;  // filename is authoritative
        } else if (param == "ICUType") {
            rec.icu_domain = icutype_to_domain(static_cast<int>(value));
            continue;
        } else if (param == "Age") {
            if (value >= 0) rec.age = value;
            continue;
        } else if (param == "Gender") {
            if (value >= 0) rec.gender = static_cast<int>(value);
            continue;
        } else if (param == "Height") {
            if (value >= 0) rec.height = value;
            continue;
        } else if (param == "Weight" && minutes == 0) {
            // Admission weight doubles as a descriptor; later Weight lines
            // feed the dynamic channel.
            if (value >= 0) rec.weight = value;
            continue;
        }

        const int idx = parameter_index(param);
        if (idx < 0) throw data_error(where + ": unknown parameter '" + param + "'");
        if (value < 0) continue;           // -1 sentinel and impossible negatives
        if (minutes > 48 * 60) continue;   // beyond the 48h observation window
        rec.measurements.push_back({minutes, idx, value});
    }
    if (rec.icu_domain.empty())
        throw data_error(file.string() + ": record has no ICUType descriptor");
    return rec;
}

inline std::map<std::string, int> parse_outcomes_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw data_error("cannot open outcomes file: " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error(file.string() + ": empty outcomes file");
    const auto header = detail::split(detail::trim(line), ',');
    int id_col = -1, death_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "RecordID") id_col = static_cast<int>(i);
        if (header[i] == "In-hospital_death") death_col = static_cast<int>(i);
    }
    if (id_col < 0 || death_col < 0)
        throw data_error(file.string() + ": header must contain RecordID and In-hospital_death");
    std::map<std::string, int> outcomes;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto fields = detail::split(line, ',');
        if (fields.size() <= static_cast<std::size_t>(std::max(id_col, death_col)))
            throw data_error(file.string() + ":" + std::to_string(line_no) + ": short row");
        const std::string where = file.string() + ":" + std::to_string(line_no);
        const int death = static_cast<int>(detail::parse_value(fields[death_col], where));
        outcomes[fields[id_col]] = death != 0 ? 1 : 0;
    }
    return outcomes;
}

// Parses a directory in the PhysioNet set-a layout: per-record .txt files plus
// an Outcomes*.txt CSV. Records are returned sorted by id.
inline std::vector<PatientRecord> parse_physionet(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw data_error("not a directory: " + dir.string());
    std::vector<std::filesystem::path> record_files;
    std::vector<std::filesystem::path> outcome_files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (entry.path().extension() != ".txt") continue;
        if (name.rfind("Outcomes", 0) == 0)
            outcome_files.push_back(entry.path());
        else
            record_files.push_back(entry.path());
    }
    if (record_files.empty()) throw data_error("no record files found in " + dir.string());
    if (outcome_files.empty()) throw data_error("no Outcomes*.txt found in " + dir.string());
    std::sort(record_files.begin(), record_files.end());
    std::sort(outcome_files.begin(), outcome_files.end());

    std::map<std::string, int> outcomes;
    for (const auto& f : outcome_files) {
        auto part = parse_outcomes_csv(f);
        outcomes.insert(part.begin(), part.end());
    }

    std::vector<PatientRecord> records;
    records.reserve(record_files.size());
    for (const auto& f : record_files) {
        PatientRecord rec = parse_physionet_record(f);
        auto it = outcomes.find(rec.id);
        if (it == outcomes.end())
            throw data_error(f.string() + ": no outcome row for record " + rec.id);
        rec.outcome = it->second;
        records.push_back(std::move(rec));
    }
    return records;
}

// Serializes records back to the per-record text format; used by the synthetic
// generator so its output round-trips through the same ingestion path.
inline void write_physionet_dir(const std::vector<PatientRecord>& records,
                                const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& dict = physionet_parameters();
    auto fmt_time = [](int minutes) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%02d:%02d", minutes / 60, minutes % 60);
        return std::string(buf);
    };
    auto fmt_value = [](double v) { return nlohmann::json(v).dump(); };

    std::ofstream outcomes(dir / "Outcomes.txt");
    outcomes << "RecordID,SAPS-I,SOFA,Length_of_stay,Survival,In-hospital_death\n";
    for (const auto& rec : records) {
        std::ofstream f(dir / (rec.id + ".txt"));
        f << "Time,Parameter,Value\n";
        f << "00:00,RecordID," << rec.id << "\n";
        if (rec.age >= 0) f << "00:00,Age," << fmt_value(rec.age) << "\n";
        if (rec.gender >= 0) f << "00:00,Gender," << rec.gender << "\n";
        if (rec.height >= 0) f << "00:00,Height," << fmt_value(rec.height) << "\n";
        f << "00:00,ICUType," << domain_to_icutype(rec.icu_domain) << "\n";
        if (rec.weight >= 0) f << "00:00,Weight," << fmt_value(rec.weight) << "\n";
        auto sorted = rec.measurements;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const auto& a, const auto& b) { return a.minutes < b.minutes; });
        for (const auto& m : sorted)
            f << fmt_time(m.minutes) << "," << dict[m.parameter] << "," << fmt_value(m.value)
              << "\n";
        outcomes << rec.id << ",-1,-1,-1,-1," << rec.outcome << "\n";
    }
}

// ---------------------------------------------------------------------------
// Hourly resampling. Cell (h,f) keeps the last measurement of f within hour h
// (tie: latest timestamp, then last listed). Statics become hour-0
// pseudo-measurements on their dedicated channels so forward fill broadcasts
// them across the stay.
// ---------------------------------------------------------------------------

inline RawEpisode resample_hourly(const PatientRecord& rec,
                                  const std::vector<std::string>& features) {
    const std::size_t F = features.size();
    std::vector<int> channel_of(physionet_parameters().size(), -1);
    std::map<std::string, int> channel_by_name;
    for (std::size_t c = 0; c < F; ++c) channel_by_name[features[c]] = static_cast<int>(c);
    for (std::size_t p = 0; p < physionet_parameters().size(); ++p) {
        auto it = channel_by_name.find(physionet_parameters()[p]);
        if (it != channel_by_name.end()) channel_of[p] = it->second;
    }

    RawEpisode ep;
    ep.id = rec.id;
    ep.domain = rec.icu_domain;
    ep.outcome = rec.outcome;
    ep.values = Tensor({kHours, F});
    ep.mask.assign(kHours * F, 0);

    auto sorted = rec.measurements;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.minutes < b.minutes; });
    for (const auto& m : sorted) {
        const int ch = channel_of[m.parameter];
        if (ch < 0)
            throw data_error("measurement parameter '" +
                             physionet_parameters()[m.parameter] +
                             "' is not a channel of this cohort");
        std::size_t h = static_cast<std::size_t>(m.minutes) / 60;
        if (h >= kHours) h = kHours - 1;  // measurements at exactly 48:00
        ep.values(h, ch) = m.value;
        ep.mask[h * F + ch] = 1;
    }

    auto put_static = [&](const std::string& name, double value) {
        auto it = channel_by_name.find(name);
        if (it == channel_by_name.end()) return;
        if (value < 0) return;
        ep.values(0, it->second) = value;
        ep.mask[0 * F + it->second] = 1;
    };
    put_static("Age", rec.age);
    put_static("Gender", rec.gender);
    put_static("Height", rec.height);
    put_static("AdmWeight", rec.weight);
    return ep;
}

// Feature list for a record set: every dictionary parameter measured at least
// once (dictionary order), followed by the four static channels.
inline std::vector<std::string> detect_features(const std::vector<PatientRecord>& records) {
    std::vector<bool> seen(physionet_parameters().size(), false);
    for (const auto& rec : records)
        for (const auto& m : rec.measurements) seen[m.parameter] = true;
    std::vector<std::string> features;
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i]) features.push_back(physionet_parameters()[i]);
    for (const auto& s : static_channel_names()) features.push_back(s);
    return features;
}

inline Cohort to_cohort(const std::vector<PatientRecord>& records,
                        std::vector<std::string> features = {}) {
    Cohort cohort;
    cohort.features = features.empty() ? detect_features(records) : std::move(features);
    cohort.episodes.reserve(records.size());
    for (const auto& rec : records) cohort.episodes.push_back(resample_hourly(rec, cohort.features));
    return cohort;
}

// ---------------------------------------------------------------------------
// Scaling statistics: per-feature min/max over the observed cells of the
// training-fold patients only.
// ---------------------------------------------------------------------------

struct ScalingStats {
    std::vector<double> fmin, fmax;
    std::vector<std::uint8_t> seen;

    static ScalingStats compute(const std::vector<const RawEpisode*>& train) {
        if (train.empty()) throw usage_error("ScalingStats: empty training set");
        const std::size_t F = train.front()->values.dim(1);
        ScalingStats s;
        s.fmin.assign(F, 0.0);
        s.fmax.assign(F, 0.0);
        s.seen.assign(F, 0);
        for (const auto* ep : train) {
            for (std::size_t h = 0; h < kHours; ++h) {
                for (std::size_t f = 0; f < F; ++f) {
                    if (!ep->mask[h * F + f]) continue;
                    const double v = ep->values(h, f);
                    if (!s.seen[f]) {
                        s.fmin[f] = s.fmax[f] = v;
                        s.seen[f] = 1;
                    } else {
                        s.fmin[f] = std::min(s.fmin[f], v);
                        s.fmax[f] = std::max(s.fmax[f], v);
                    }
                }
            }
        }
        return s;
    }

    double scale(std::size_t f, double v) const {
        if (!seen[f] || fmax[f] - fmin[f] <= 0.0) return 0.5;  // degenerate feature
        return clamp((v - fmin[f]) / (fmax[f] - fmin[f]), 0.0, 1.0);
    }
};

// ---------------------------------------------------------------------------
// Fill and impute: forward fill, backward fill of leading gaps, half-period
// duplication, min-max scaling into [0,1], and zero imputation for channels
// never measured for the patient.
// ---------------------------------------------------------------------------

inline EpisodeTensor fill_and_impute(const RawEpisode& raw, const ScalingStats& stats) {
    const std::size_t F = raw.values.dim(1);
    if (stats.fmin.size() != F) throw usage_error("fill_and_impute: stats/feature mismatch");
    EpisodeTensor ep;
    ep.id = raw.id;
    ep.domain = raw.domain;
    ep.outcome = raw.outcome;
    ep.mask = raw.mask;
    ep.values = Tensor({kHours, F});

    for (std::size_t f = 0; f < F; ++f) {
        bool first_half = false, second_half = false;
        for (std::size_t h = 0; h < kHours; ++h) {
            if (!raw.mask[h * F + f]) continue;
            (h < kHours / 2 ? first_half : second_half) = true;
        }
        if (!first_half && !second_half) {
            // Never measured: zero after normalization.
            for (std::size_t h = 0; h < kHours; ++h) ep.values(h, f) = 0.0;
            continue;
        }
        std::array<double, kHours> col{};
        // Forward fill, then backward fill the leading gap.
        bool have = false;
        double last = 0.0;
        for (std::size_t h = 0; h < kHours; ++h) {
            if (raw.mask[h * F + f]) {
                last = raw.values(h, f);
                have = true;
            }
            col[h] = have ? last : 0.0;
        }
        std::size_t first_obs = 0;
        while (!raw.mask[first_obs * F + f]) ++first_obs;
        for (std::size_t h = 0; h < first_obs; ++h) col[h] = raw.values(first_obs, f);
        // Half-period duplication under stationarity when one half is empty.
        if (first_half && !second_half)
            for (std::size_t h = 0; h < kHours / 2; ++h) col[kHours / 2 + h] = col[h];
        if (!first_half && second_half)
            for (std::size_t h = 0; h < kHours / 2; ++h) col[h] = col[kHours / 2 + h];
        for (std::size_t h = 0; h < kHours; ++h) ep.values(h, f) = stats.scale(f, col[h]);
    }
    return ep;
}

inline ScalingStats identity_stats(std::size_t F) {
    ScalingStats s;
    s.fmin.assign(F, 0.0);
    s.fmax.assign(F, 1.0);
    s.seen.assign(F, 1);
    return s;
}

// ---------------------------------------------------------------------------
// Cross-validation folds: patient-level 5-fold test partition, 64/16 train/val
// within each fold, stratified by (domain, outcome).
// ---------------------------------------------------------------------------

struct FoldSpec {
    int fold_id = 0;
    std::vector<std::string> train_ids, val_ids, test_ids;
};

struct FoldResult {
    std::vector<FoldSpec> folds;
    std::vector<std::string> warnings;
};

inline void assert_no_leakage(const FoldSpec& fold) {
    std::set<std::string> seen;
    auto check = [&](const std::vector<std::string>& ids, const char* which) {
        for (const auto& id : ids)
            if (!seen.insert(id).second)
                throw leakage_error("patient " + id + " appears in multiple splits (" + which +
                                    ") of fold " + std::to_string(fold.fold_id));
    };
    check(fold.train_ids, "train");
    check(fold.val_ids, "val");
    check(fold.test_ids, "test");
}

inline FoldResult make_folds(const std::vector<RawEpisode>& cohort, std::uint64_t seed,
                             int n_folds = 5) {
    if (cohort.empty()) throw usage_error("make_folds: empty cohort");
    if (n_folds < 2) throw config_error("make_folds: need at least 2 folds");

    FoldResult result;
    // Strata keyed by (domain, outcome); domains with under 5 deaths fall back
    // to a single unstratified domain stratum.
    std::map<std::string, std::vector<std::string>> by_domain_outcome;
    std::map<std::string, int> domain_deaths;
    std::map<std::string, std::vector<std::string>> domain_members;
    for (const auto& ep : cohort) {
        by_domain_outcome[ep.domain + "|" + std::to_string(ep.outcome)].push_back(ep.id);
        domain_members[ep.domain].push_back(ep.id);
        if (ep.outcome == 1) ++domain_deaths[ep.domain];
    }
    std::vector<std::vector<std::string>> strata;
    for (const auto& [domain, members] : domain_members) {
        if (domain_deaths[domain] < 5) {
            result.warnings.push_back("domain " + domain + " has fewer than 5 deaths; "
                                      "proceeding unstratified for this stratum");
            strata.push_back(members);
        } else {
            strata.push_back(by_domain_outcome[domain + "|0"]);
            strata.push_back(by_domain_outcome[domain + "|1"]);
        }
    }

    Rng rng(seed);
    std::vector<std::vector<std::string>> test_buckets(n_folds);
    std::size_t cursor = 0;  // continues across strata to balance bucket sizes
    for (auto& stratum : strata) {
        std::sort(stratum.begin(), stratum.end());
        rng.shuffle(stratum);
        for (const auto& id : stratum) {
            test_buckets[cursor % n_folds].push_back(id);
            ++cursor;
        }
    }

    for (int f = 0; f < n_folds; ++f) {
        FoldSpec spec;
        spec.fold_id = f + 1;
        spec.test_ids = test_buckets[f];
        std::set<std::string> in_test(spec.test_ids.begin(), spec.test_ids.end());
        Rng fold_rng = rng.child(1000 + static_cast<std::uint64_t>(f));
        std::size_t stratum_idx = 0;
        for (const auto& stratum : strata) {
            std::vector<std::string> rest;
            for (const auto& id : stratum)
                if (!in_test.count(id)) rest.push_back(id);
            std::sort(rest.begin(), rest.end());
            Rng split_rng = fold_rng.child(stratum_idx++);
            split_rng.shuffle(rest);
            const std::size_t n_train =
                static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(rest.size())));
            for (std::size_t i = 0; i < rest.size(); ++i)
                (i < n_train ? spec.train_ids : spec.val_ids).push_back(rest[i]);
        }
        std::sort(spec.train_ids.begin(), spec.train_ids.end());
        std::sort(spec.val_ids.begin(), spec.val_ids.end());
        std::sort(spec.test_ids.begin(), spec.test_ids.end());
        assert_no_leakage(spec);
        result.folds.push_back(std::move(spec));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Canonical cohort file: JSON lines. The first line is a header object with
// the format tag and feature names; each following line is one episode.
// ---------------------------------------------------------------------------

inline void write_cohort(const Cohort& cohort, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write cohort file: " + path.string());
    nlohmann::json header;
    header["format"] = "icurisk-cohort";
    header["version"] = 1;
    header["features"] = cohort.features;
    out << header.dump() << "\n";
    const std::size_t F = cohort.n_features();
    for (const auto& ep : cohort.episodes) {
        nlohmann::json row;
        row["id"] = ep.id;
        row["domain"] = ep.domain;
        row["outcome"] = ep.outcome;
        auto values = nlohmann::json::array();
        auto mask = nlohmann::json::array();
        for (std::size_t h = 0; h < kHours; ++h) {
            auto vrow = nlohmann::json::array();
            std::string mrow(F, '0');
            for (std::size_t f = 0; f < F; ++f) {
                vrow.push_back(ep.values(h, f));
                if (ep.mask[h * F + f]) mrow[f] = '1';
            }
            values.push_back(std::move(vrow));
            mask.push_back(std::move(mrow));
        }
        row["values"] = std::move(values);
        row["mask"] = std::move(mask);
        out << row.dump() << "\n";
    }
}

inline Cohort read_cohort(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open cohort file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error(path.string() + ": empty cohort file");
    Cohort cohort;
    try {
        const auto header = nlohmann::json::parse(line);
        if (header.at("format") != "icurisk-cohort")
            throw data_error(path.string() + ": not a cohort file");
        cohort.features = header.at("features").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path.string() + ":1: bad header: " + e.what());
    }
    const std::size_t F = cohort.n_features();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        try {
            const auto row = nlohmann::json::parse(line);
            RawEpisode ep;
            ep.id = row.at("id").get<std::string>();
            ep.domain = row.at("domain").get<std::string>();
            ep.outcome = row.at("outcome").get<int>();
            ep.values = Tensor({kHours, F});
            ep.mask.assign(kHours * F, 0);
            const auto& values = row.at("values");
            const auto& mask = row.at("mask");
            if (values.size() != kHours || mask.size() != kHours)
                throw data_error("episode must have 48 rows");
            for (std::size_t h = 0; h < kHours; ++h) {
                const auto& vrow = values[h];
                const std::string mrow = mask[h].get<std::string>();
                if (vrow.size() != F || mrow.size() != F)
                    throw data_error("episode row width mismatch");
                for (std::size_t f = 0; f < F; ++f) {
                    ep.values(h, f) = vrow[f].get<double>();
                    ep.mask[h * F + f] = mrow[f] == '1' ? 1 : 0;
                }
            }
            cohort.episodes.push_back(std::move(ep));
        } catch (const nlohmann::json::exception& e) {
            throw data_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cohort;
}

// Per-domain patient counts and mortality rates, in dictionary order of names.
inline std::vector<std::tuple<std::string, std::size_t, double>> domain_summary(
    const std::vector<RawEpisode>& episodes) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> acc;  // domain -> (n, deaths)
    for (const auto& ep : episodes) {
        auto& [n, deaths] = acc[ep.domain];
        ++n;
        if (ep.outcome == 1) ++deaths;
    }
    std::vector<std::tuple<std::string, std::size_t, double>> out;
    for (const auto& [domain, nd] : acc)
        out.emplace_back(domain, nd.first,
                         nd.first ? static_cast<double>(nd.second) / nd.first : 0.0);
    return out;
}

}  // namespace icurisk
