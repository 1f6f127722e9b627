#pragma once

#include <map>
#include <string>
#include <vector>

#include "core.hpp"

namespace icurisk {

// Parameter groups mirror the freezing units of the transfer strategies.
enum class ParamGroup { conv = 0, lstm = 1, dense = 2 };

inline const char* to_string(ParamGroup g) {
    switch (g) {
        case ParamGroup::conv: return "conv";
        case ParamGroup::lstm: return "lstm";
        case ParamGroup::dense: return "dense";
    }
    return "?";
}

inline ParamGroup parse_group(const std::string& name) {
    if (name == "conv") return ParamGroup::conv;
    if (name == "lstm") return ParamGroup::lstm;
    if (name == "dense") return ParamGroup::dense;
    throw config_error("unknown parameter group: " + name);
}

inline const std::vector<ParamGroup>& all_groups() {
    static const std::vector<ParamGroup> groups{ParamGroup::conv, ParamGroup::lstm,
                                                ParamGroup::dense};
    return groups;
}

// Gradients travel as name -> tensor, mirroring ParamStore entry shapes.
using GradMap = std::map<std::string, Tensor>;

// Flat registry of named, shaped parameter arrays with per-group frozen flags.
// Ordered map keys give deterministic iteration everywhere (updates, serialization).
class ParamStore {
public:
    void add(const std::string& name, ParamGroup group, Tensor value) {
        if (entries_.count(name)) throw config_error("duplicate parameter: " + name);
        entries_.emplace(name, std::move(value));
        group_of_.emplace(name, group);
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw usage_error("unknown parameter: " + name);
        return it->second;
    }

    const Tensor& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw usage_error("unknown parameter: " + name);
        return it->second;
    }

    ParamGroup group(const std::string& name) const {
        auto it = group_of_.find(name);
        if (it == group_of_.end()) throw usage_error("unknown parameter: " + name);
        return it->second;
    }

    bool frozen(ParamGroup g) const { return frozen_[static_cast<int>(g)]; }
    void set_frozen(ParamGroup g, bool value) { frozen_[static_cast<int>(g)] = value; }
    void clear_frozen() { frozen_ = {false, false, false}; }

    std::uint64_t rng_seed() const { return rng_seed_; }
    void set_rng_seed(std::uint64_t s) { rng_seed_ = s; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [name, _] : entries_) out.push_back(name);
        return out;
    }

    std::vector<std::string> names_in_group(ParamGroup g) const {
        std::vector<std::string> out;
        for (const auto& [name, grp] : group_of_)
            if (grp == g) out.push_back(name);
        return out;
    }

    std::size_t total_parameters() const {
        std::size_t n = 0;
        for (const auto& [_, t] : entries_) n += t.size();
        return n;
    }

    const std::map<std::string, Tensor>& entries() const { return entries_; }
    std::map<std::string, Tensor>& entries() { return entries_; }

    // Zero-filled gradient map with shapes mirroring the entries.
    GradMap zero_grads() const {
        GradMap g;
        for (const auto& [name, t] : entries_) g.emplace(name, Tensor(t.shape()));
        return g;
    }

    bool group_equal(const ParamStore& other, ParamGroup g) const {
        for (const auto& name : names_in_group(g)) {
            if (!other.has(name)) return false;
            if (!(at(name) == other.at(name))) return false;
        }
        return true;
    }

private:
    std::map<std::string, Tensor> entries_;
    std::map<std::string, ParamGroup> group_of_;
    std::array<bool, 3> frozen_{false, false, false};
    std::uint64_t rng_seed_ = 0;
};

// Seeded weight init: zero biases elsewhere; weights N(0, 1/fan_in).
inline Tensor normal_init(const std::vector<std::size_t>& shape, std::size_t fan_in, Rng& rng) {
    Tensor t(shape);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.normal();
    return t;
}

inline void accumulate(GradMap& into, const GradMap& delta) {
    for (const auto& [name, g] : delta) {
        auto it = into.find(name);
        if (it == into.end()) throw usage_error("gradient for unknown parameter: " + name);
        if (!it->second.same_shape(g))
            throw usage_error("gradient shape mismatch for " + name);
        for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
}

inline void scale(GradMap& grads, double factor) {
    for (auto& [_, g] : grads)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= factor;
}

}  // namespace icurisk
