#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "model.hpp"
#include "tsne.hpp"

namespace icurisk {

// ---------------------------------------------------------------------------
// Risk-space projection: every patient-hour becomes one point whose features
// are the recurrent hidden state at that hour, projected to 2-D. Consecutive
// hours of one patient form a trajectory through that plane.
// ---------------------------------------------------------------------------

struct RowMeta {
    std::string patient_id;
    std::size_t hour = 0;  // 1-based
    std::string domain;
    int outcome = -1;
    double risk = 0.0;
};

struct RepresentationSet {
    Tensor rows;                 // (N*48, width)
    std::vector<RowMeta> meta;   // one entry per row, patient-major, hour-ascending
};

// A freshly initialized network has exactly-zero biases; representations from
// it would be meaningless, so collecting them is treated as a usage mistake.
inline bool looks_untrained(const ParamStore& params) {
    for (const auto& [name, t] : params.entries()) {
        if (name.find("bias") == std::string::npos) continue;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t[i] != 0.0) return false;
    }
    return true;
}

inline RepresentationSet collect_representations(const ModelConfig& cfg, const ParamStore& params,
                                                 const std::vector<EpisodeTensor>& episodes) {
    if (episodes.empty()) throw usage_error("collect_representations: no episodes");
    if (looks_untrained(params))
        throw usage_error("collect_representations: model parameters look untrained "
                          "(all biases are zero)");
    const std::size_t T = episodes.front().values.dim(0);
    const std::size_t H = cfg.lstm_hidden;
    RepresentationSet set;
    set.rows = Tensor({episodes.size() * T, H});
    set.meta.resize(episodes.size() * T);
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& ep = episodes[i];
        DynamicPrediction pred = model_forward(cfg, params, ep.values);
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t r = i * T + t;
            for (std::size_t h = 0; h < H; ++h) set.rows(r, h) = pred.representations(t, h);
            set.meta[r] = {ep.id, t + 1, ep.domain, ep.outcome, pred.risks(t)};
        }
    }
    return set;
}

// Raw-input variant for the "before learning" contrast: the row features are
// the preprocessed observations themselves. Risk is not defined here and is
// recorded as 0.
inline RepresentationSet collect_raw_rows(const std::vector<EpisodeTensor>& episodes) {
    if (episodes.empty()) throw usage_error("collect_raw_rows: no episodes");
    const std::size_t T = episodes.front().values.dim(0);
    const std::size_t F = episodes.front().values.dim(1);
    RepresentationSet set;
    set.rows = Tensor({episodes.size() * T, F});
    set.meta.resize(episodes.size() * T);
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& ep = episodes[i];
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t r = i * T + t;
            for (std::size_t f = 0; f < F; ++f) set.rows(r, f) = ep.values(t, f);
            set.meta[r] = {ep.id, t + 1, ep.domain, ep.outcome, 0.0};
        }
    }
    return set;
}

struct ProjectedSpace {
    Tensor embedding;             // (N_kept*48, 2)
    std::vector<RowMeta> meta;    // matching rows
    std::vector<double> kl_trace;
    std::vector<std::string> kept_patients;
};

// Projects patient-hour rows to 2-D. Subsampling happens at the patient level
// so every kept patient contributes a complete, gap-free trajectory.
inline ProjectedSpace project_risk_space(const std::vector<EpisodeTensor>& episodes,
                                         const ModelConfig& cfg, const ParamStore& params,
                                         TsneConfig tsne_cfg, bool raw_inputs = false) {
    if (episodes.empty()) throw usage_error("project_risk_space: no episodes");
    const std::size_t T = episodes.front().values.dim(0);
    const std::size_t max_patients = std::max<std::size_t>(1, tsne_cfg.max_points / T);
    std::vector<std::size_t> keep(episodes.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    if (episodes.size() > max_patients) {
        Rng rng(tsne_cfg.seed);
        rng.shuffle(keep);
        keep.resize(max_patients);
        std::sort(keep.begin(), keep.end());
    }
    std::vector<EpisodeTensor> subset;
    subset.reserve(keep.size());
    for (std::size_t idx : keep) subset.push_back(episodes[idx]);

    RepresentationSet set =
        raw_inputs ? collect_raw_rows(subset) : collect_representations(cfg, params, subset);
    tsne_cfg.max_points = set.rows.dim(0);  // patient-level subsampling already applied
    TsneResult tsne_out = tsne(set.rows, tsne_cfg);

    ProjectedSpace out;
    out.embedding = std::move(tsne_out.embedding);
    out.meta = std::move(set.meta);
    out.kl_trace = std::move(tsne_out.kl_trace);
    for (const auto& ep : subset) out.kept_patients.push_back(ep.id);
    return out;
}

inline void write_trajectories_csv(const ProjectedSpace& space,
                                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write trajectories file: " + path.string());
    out << "patient_id,hour,x,y,risk,outcome,domain\n";
    for (std::size_t r = 0; r < space.meta.size(); ++r) {
        const auto& m = space.meta[r];
        out << m.patient_id << "," << m.hour << "," << format_double(space.embedding(r, 0))
            << "," << format_double(space.embedding(r, 1)) << "," << format_double(m.risk) << ","
            << m.outcome << "," << m.domain << "\n";
    }
}

// ---------------------------------------------------------------------------
// Trajectory dynamics relative to the death centroid: the mean final-hour
// position of patients who died. Distances and speeds are averaged per hour
// within the died / survived groups.
// ---------------------------------------------------------------------------

struct GroupDynamics {
    std::vector<double> mean_distance;  // per hour 1..T
    std::vector<double> mean_speed;     // per hour 2..T
    std::size_t n_patients = 0;
};

struct SpaceDynamics {
    double centroid_x = 0.0, centroid_y = 0.0;
    GroupDynamics died, survived;
};

inline SpaceDynamics risk_space_dynamics(const ProjectedSpace& space) {
    if (space.meta.empty()) throw usage_error("risk_space_dynamics: empty projection");
    std::size_t T = 0;
    for (const auto& m : space.meta) T = std::max(T, m.hour);

    // Rows arrive patient-major with ascending hours; group them by patient.
    struct Traj {
        int outcome = -1;
        std::vector<std::size_t> row_of_hour;
    };
    std::vector<Traj> trajs;
    std::map<std::string, std::size_t> index_of;
    for (std::size_t r = 0; r < space.meta.size(); ++r) {
        const auto& m = space.meta[r];
        auto [it, fresh] = index_of.try_emplace(m.patient_id, trajs.size());
        if (fresh) {
            trajs.push_back({m.outcome, std::vector<std::size_t>(T, 0)});
            trajs.back().row_of_hour.assign(T, static_cast<std::size_t>(-1));
        }
        trajs[it->second].row_of_hour[m.hour - 1] = r;
    }
    for (const auto& t : trajs)
        for (std::size_t h = 0; h < T; ++h)
            if (t.row_of_hour[h] == static_cast<std::size_t>(-1))
                throw usage_error("risk_space_dynamics: trajectories must cover every hour");

    double cx = 0.0, cy = 0.0;
    std::size_t n_died = 0;
    for (const auto& t : trajs) {
        if (t.outcome != 1) continue;
        cx += space.embedding(t.row_of_hour[T - 1], 0);
        cy += space.embedding(t.row_of_hour[T - 1], 1);
        ++n_died;
    }
    if (n_died == 0)
        throw usage_error("risk_space_dynamics: no deaths in the projected cohort");
    cx /= static_cast<double>(n_died);
    cy /= static_cast<double>(n_died);

    SpaceDynamics dyn;
    dyn.centroid_x = cx;
    dyn.centroid_y = cy;
    for (GroupDynamics* g : {&dyn.died, &dyn.survived}) {
        g->mean_distance.assign(T, 0.0);
        g->mean_speed.assign(T - 1, 0.0);
    }
    for (const auto& t : trajs) {
        GroupDynamics& g = t.outcome == 1 ? dyn.died : dyn.survived;
        ++g.n_patients;
        for (std::size_t h = 0; h < T; ++h) {
            const double x = space.embedding(t.row_of_hour[h], 0);
            const double y = space.embedding(t.row_of_hour[h], 1);
            g.mean_distance[h] += std::hypot(x - cx, y - cy);
            if (h > 0) {
                const double px = space.embedding(t.row_of_hour[h - 1], 0);
                const double py = space.embedding(t.row_of_hour[h - 1], 1);
                g.mean_speed[h - 1] += std::hypot(x - px, y - py);
            }
        }
    }
    for (GroupDynamics* g : {&dyn.died, &dyn.survived}) {
        if (g->n_patients == 0) continue;
        for (double& v : g->mean_distance) v /= static_cast<double>(g->n_patients);
        for (double& v : g->mean_speed) v /= static_cast<double>(g->n_patients);
    }
    return dyn;
}

inline void write_dynamics_csv(const SpaceDynamics& dyn, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write dynamics file: " + path.string());
    out << "hour,group,mean_distance,mean_speed\n";
    const std::size_t T = dyn.died.mean_distance.size();
    auto write_group = [&](const char* name, const GroupDynamics& g) {
        for (std::size_t h = 0; h < T; ++h) {
            out << (h + 1) << "," << name << "," << format_double(g.mean_distance[h]) << ",";
            if (h > 0) out << format_double(g.mean_speed[h - 1]);
            out << "\n";
        }
    };
    write_group("died", dyn.died);
    write_group("survived", dyn.survived);
}

}  // namespace icurisk
