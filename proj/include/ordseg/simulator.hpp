// Synthetic three-segment series on [0, 5] with ground-truth labels.
#ifndef ORDSEG_SIMULATOR_HPP
#define ORDSEG_SIMULATOR_HPP

#include "ordseg/rng.hpp"
#include "ordseg/series.hpp"

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ordseg {

/// Mean of one segment: intercept + slope * t.
struct SegmentMean {
    double intercept = 0.0;
    double slope = 0.0;
    friend bool operator==(const SegmentMean&, const SegmentMean&) = default;
};

struct SimulationSpec {
    /// 1: piecewise constant means, 2: piecewise affine means.
    int situation = 1;
    std::size_t n = 300;
    std::vector<double> change_times{1.0, 3.0};
    std::vector<double> sigmas{1.0, 1.5, 2.0};
    std::vector<SegmentMean> means{{0.0, 0.0}, {4.0, 0.0}, {-2.0, 0.0}};
    std::uint64_t seed = 0;
    double t_min = 0.0;
    double t_max = 5.0;

    /// Defaults for a situation: means (0, 4, -2) for situation 1, affine pieces
    /// (0 + t, 10 - 2t, -2 + t) for situation 2.
    static SimulationSpec preset(int situation, std::size_t n, std::uint64_t seed) {
        SimulationSpec spec;
        spec.situation = situation;
        spec.n = n;
        spec.seed = seed;
        if (situation == 2) spec.means = {{0.0, 1.0}, {10.0, -2.0}, {-2.0, 1.0}};
        return spec;
    }

    int num_segments() const noexcept { return static_cast<int>(change_times.size()) + 1; }

    /// Lists every offending field; empty when the spec is valid.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (situation != 1 && situation != 2) out.push_back("situation must be 1 or 2");
        if (n < 3) out.push_back("n must be >= 3");
        if (!(t_max > t_min)) out.push_back("t_max must exceed t_min");
        for (std::size_t c = 0; c < change_times.size(); ++c) {
            if (!(change_times[c] > t_min && change_times[c] < t_max)) {
                out.push_back("change_times must lie inside (t_min, t_max)");
                break;
            }
            if (c > 0 && !(change_times[c] > change_times[c - 1])) {
                out.push_back("change_times must be strictly increasing");
                break;
            }
        }
        const auto segments = change_times.size() + 1;
        if (sigmas.size() != segments) out.push_back("sigmas must hold one entry per segment");
        for (double s : sigmas)
            if (!(s >= 0.0)) {
                out.push_back("sigmas must be non-negative");
                break;
            }
        if (means.size() != segments) out.push_back("means must hold one entry per segment");
        if (situation == 1) {
            for (const auto& m : means)
                if (m.slope != 0.0) {
                    out.push_back("situation 1 means must have zero slope");
                    break;
                }
        }
        return out;
    }

    void validate() const {
        const auto p = problems();
        if (p.empty()) return;
        std::string msg = "invalid simulation spec:";
        for (const auto& s : p) msg += " " + s + ";";
        throw std::invalid_argument(msg);
    }
};

struct LabeledSeries {
    TimeSeries series;
    OrderedPartition true_labels;
    SimulationSpec spec;
};

/// Sampling instants t_i = t_min + (t_max - t_min) (i-1)/(n-1); the class of t_i
/// is 1 + #{c : t_i > c}; y_i = mean(t_i) + sigma_k eps_i with eps_i normal
/// number i of CounterRng(seed).
inline LabeledSeries simulate(const SimulationSpec& spec) {
    spec.validate();
    const CounterRng rng(spec.seed);
    std::vector<double> t(spec.n), y(spec.n);
    std::vector<int> labels(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        t[i] = spec.t_min + (spec.t_max - spec.t_min) * static_cast<double>(i) / static_cast<double>(spec.n - 1);
        int k = 0;
        for (double c : spec.change_times) k += t[i] > c ? 1 : 0;
        labels[i] = k;
        const auto& m = spec.means[static_cast<std::size_t>(k)];
        y[i] = m.intercept + m.slope * t[i] + spec.sigmas[static_cast<std::size_t>(k)] * rng.normal_at(i);
    }
    t.back() = spec.t_max;
    OrderedPartition truth = OrderedPartition::from_labels(labels, spec.num_segments());
    return {TimeSeries(std::move(t), std::move(y)), std::move(truth), spec};
}

}  // namespace ordseg

#endif  // ORDSEG_SIMULATOR_HPP
