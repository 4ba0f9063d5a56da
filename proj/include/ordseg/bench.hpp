// Segmentation error metric and the error/runtime benchmark harness.
#ifndef ORDSEG_BENCH_HPP
#define ORDSEG_BENCH_HPP

#include "ordseg/cem.hpp"
#include "ordseg/em.hpp"
#include "ordseg/fisher.hpp"
#include "ordseg/io.hpp"
#include "ordseg/rng.hpp"
#include "ordseg/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace ordseg {

/// Percentage of points whose labels differ. Both partitions are ordered, so
/// class indices align without permutation matching.
inline double segmentation_error(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || truth.empty()) {
        throw std::invalid_argument("segmentation_error: partitions cover different numbers of points");
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i] ? 1 : 0;
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(truth.size());
}

inline double segmentation_error(const OrderedPartition& predicted, const OrderedPartition& truth) {
    return segmentation_error(predicted.labels(), truth.labels());
}

enum class Algorithm { Fisher, Em, Cem };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Fisher: return "fisher";
        case Algorithm::Em: return "em";
        case Algorithm::Cem: return "cem";
    }
    return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "fisher") return Algorithm::Fisher;
    if (s == "em") return Algorithm::Em;
    if (s == "cem") return Algorithm::Cem;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

struct BenchmarkPlan {
    std::vector<std::size_t> n_list{100, 300, 500, 700, 1000, 1500, 2000, 3000};
    std::vector<int> situations{1, 2};
    int repeats = 20;
    std::vector<Algorithm> algorithms{Algorithm::Fisher, Algorithm::Em, Algorithm::Cem};
    int num_classes = 3;
    EmConfig em{};
    CemConfig cem{};
    std::uint64_t base_seed = 0;
    /// Worker threads for error-only runs; timing runs are always sequential.
    int jobs = 1;
    bool timing = true;

    /// Polynomial degree per situation (0 for piecewise constant, 1 for affine).
    static int degree_for(int situation) { return situation == 2 ? 1 : 0; }

    void validate() const {
        if (repeats < 1) throw std::invalid_argument("plan: repeats must be >= 1");
        if (n_list.empty()) throw std::invalid_argument("plan: n_list is empty");
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            if (n_list[i] < 3) throw std::invalid_argument("plan: every n must be >= 3");
            if (i > 0 && n_list[i] <= n_list[i - 1]) throw std::invalid_argument("plan: n_list must be strictly increasing");
        }
        if (situations.empty()) throw std::invalid_argument("plan: no situations");
        for (int s : situations)
            if (s != 1 && s != 2) throw std::invalid_argument("plan: situations must be 1 or 2");
        if (algorithms.empty()) throw std::invalid_argument("plan: no algorithms");
        if (num_classes < 1 || static_cast<std::size_t>(num_classes) > n_list.front()) {
            throw std::invalid_argument("plan: K must satisfy 1 <= K <= min(n)");
        }
        if (jobs < 1) throw std::invalid_argument("plan: jobs must be >= 1");
        em.validate();
        cem.validate();
    }
};

inline std::uint64_t trial_seed(std::uint64_t base_seed, int situation, std::size_t n, int trial) {
    const std::uint64_t h =
        hash_combine(hash_combine(hash_combine(0x6f72647365673031ULL, static_cast<std::uint64_t>(situation)), n),
                     static_cast<std::uint64_t>(trial));
    return base_seed ^ h;
}

struct TrialRecord {
    int situation = 0;
    std::size_t n = 0;
    int trial = 0;
    Algorithm algorithm = Algorithm::Fisher;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string message;
    double seconds = 0.0;
    double error_pct = 0.0;
    /// EM only: error of the per-point argmax posterior labeling.
    double posterior_error_pct = 0.0;
    int iterations = 0;
};

struct CellSummary {
    int situation = 0;
    std::size_t n = 0;
    Algorithm algorithm = Algorithm::Fisher;
    int trials = 0;
    int failures = 0;
    double mean_seconds = 0.0;
    double mean_error_pct = 0.0;
    double std_error_pct = 0.0;
    double mean_posterior_error_pct = 0.0;
    double mean_iterations = 0.0;
};

struct BenchmarkResult {
    BenchmarkPlan plan;
    std::vector<TrialRecord> trials;
    std::vector<CellSummary> cells;
};

/// Aggregates per (situation, n, algorithm), in that order. Failed trials
/// are counted and excluded from the means.
inline std::vector<CellSummary> summarize(const std::vector<TrialRecord>& trials) {
    std::map<std::tuple<int, std::size_t, int>, std::vector<const TrialRecord*>> groups;
    for (const auto& r : trials) groups[{r.situation, r.n, static_cast<int>(r.algorithm)}].push_back(&r);
    std::vector<CellSummary> out;
    for (const auto& [key, records] : groups) {
        CellSummary c;
        c.situation = std::get<0>(key);
        c.n = std::get<1>(key);
        c.algorithm = static_cast<Algorithm>(std::get<2>(key));
        c.trials = static_cast<int>(records.size());
        double sec = 0.0, err = 0.0, perr = 0.0, iters = 0.0;
        int ok = 0;
        for (const auto* r : records) {
            if (r->failed) {
                ++c.failures;
                continue;
            }
            ++ok;
            sec += r->seconds;
            err += r->error_pct;
            perr += r->posterior_error_pct;
            iters += r->iterations;
        }
        if (ok > 0) {
            c.mean_seconds = sec / ok;
            c.mean_error_pct = err / ok;
            c.mean_posterior_error_pct = perr / ok;
            c.mean_iterations = iters / ok;
            double ss = 0.0;
            for (const auto* r : records)
                if (!r->failed) ss += (r->error_pct - c.mean_error_pct) * (r->error_pct - c.mean_error_pct);
            c.std_error_pct = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
        } else {
            c.mean_seconds = c.mean_error_pct = c.std_error_pct = std::nan("");
        }
        out.push_back(c);
    }
    return out;
}

/// Runs one algorithm on one dataset, timing the fit call only.
inline TrialRecord run_trial(const LabeledSeries& data, Algorithm algorithm, const BenchmarkPlan& plan, int trial) {
    TrialRecord r;
    r.situation = data.spec.situation;
    r.n = data.spec.n;
    r.trial = trial;
    r.algorithm = algorithm;
    r.seed = data.spec.seed;
    const int degree = BenchmarkPlan::degree_for(r.situation);
    const PolynomialBasis basis(degree);
    try {
        const auto start = std::chrono::steady_clock::now();
        OrderedPartition predicted;
        std::vector<int> posterior;
        switch (algorithm) {
            case Algorithm::Fisher: {
                const auto kind = degree == 0 ? DiameterKind::constant_mean() : DiameterKind::polynomial(degree);
                predicted = fisher_segment(data.series, plan.num_classes, kind).partition;
                break;
            }
            case Algorithm::Em: {
                EmConfig cfg = plan.em;
                cfg.seed = r.seed;
                auto fit = em_fit(data.series, plan.num_classes, basis, cfg);
                predicted = std::move(fit.partition);
                posterior = std::move(fit.posterior_labels);
                r.iterations = fit.n_iterations;
                break;
            }
            case Algorithm::Cem: {
                CemConfig cfg = plan.cem;
                cfg.seed = r.seed;
                auto fit = cem_fit(data.series, plan.num_classes, basis, cfg);
                predicted = std::move(fit.partition);
                r.iterations = fit.n_iterations;
                break;
            }
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        r.error_pct = segmentation_error(predicted, data.true_labels);
        r.posterior_error_pct = posterior.empty() ? r.error_pct : segmentation_error(posterior, data.true_labels.labels());
    } catch (const std::exception& e) {
        r.failed = true;
        r.message = e.what();
    }
    return r;
}

/// Every algorithm of a trial consumes the same simulated dataset.
inline BenchmarkResult run_benchmark(const BenchmarkPlan& plan) {
    plan.validate();
    struct Task {
        int situation;
        std::size_t n;
        int trial;
    };
    std::vector<Task> tasks;
    for (int s : plan.situations)
        for (std::size_t n : plan.n_list)
            for (int trial = 0; trial < plan.repeats; ++trial) tasks.push_back({s, n, trial});

    std::vector<std::vector<TrialRecord>> per_task(tasks.size());
    auto execute = [&](std::size_t idx) {
        const Task& task = tasks[idx];
        const auto data = simulate(SimulationSpec::preset(task.situation, task.n,
                                                          trial_seed(plan.base_seed, task.situation, task.n, task.trial)));
        for (Algorithm a : plan.algorithms) per_task[idx].push_back(run_trial(data, a, plan, task.trial));
    };

    const int workers = plan.timing ? 1 : plan.jobs;
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) execute(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) execute(i);
            });
        }
    }

    BenchmarkResult result;
    result.plan = plan;
    for (auto& records : per_task)
        for (auto& r : records) result.trials.push_back(std::move(r));
    result.cells = summarize(result.trials);
    return result;
}

/// Least-squares slope of log(y) against log(x).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("log_log_slope: need >= 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct ScalingSummary {
    struct Slope {
        int situation;
        Algorithm algorithm;
        double slope;
    };
    struct Ratio {
        int situation;
        std::size_t n;
        Algorithm versus;  // fisher time / this algorithm's time
        double ratio;
    };
    std::vector<Slope> slopes;
    std::vector<Ratio> ratios;
    /// Per (situation, versus): each successive ratio is at least
    /// (1 - tolerance) times the previous one.
    std::map<std::pair<int, int>, bool> ratio_monotone;

    double slope(int situation, Algorithm a) const {
        for (const auto& s : slopes)
            if (s.situation == situation && s.algorithm == a) return s.slope;
        throw std::out_of_range("no slope for that situation/algorithm");
    }
    double ratio(int situation, std::size_t n, Algorithm versus) const {
        for (const auto& r : ratios)
            if (r.situation == situation && r.n == n && r.versus == versus) return r.ratio;
        throw std::out_of_range("no ratio for that cell");
    }
    bool monotone(int situation, Algorithm versus) const { return ratio_monotone.at({situation, static_cast<int>(versus)}); }
};

inline ScalingSummary scaling_summary(const std::vector<CellSummary>& cells, double tolerance = 0.2) {
    ScalingSummary out;
    std::map<std::pair<int, int>, std::vector<const CellSummary*>> series;
    for (const auto& c : cells)
        if (c.trials > c.failures) series[{c.situation, static_cast<int>(c.algorithm)}].push_back(&c);
    for (auto& [key, list] : series) {
        std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->n < b->n; });
        if (list.size() < 3) throw std::invalid_argument("scaling_summary: need at least 3 values of n");
        std::vector<double> x, y;
        for (const auto* c : list) {
            x.push_back(static_cast<double>(c->n));
            y.push_back(c->mean_seconds);
        }
        out.slopes.push_back({key.first, static_cast<Algorithm>(key.second), log_log_slope(x, y)});
    }
    for (auto& [key, list] : series) {
        const auto algo = static_cast<Algorithm>(key.second);
        if (algo == Algorithm::Fisher) continue;
        const auto fisher_it = series.find({key.first, static_cast<int>(Algorithm::Fisher)});
        if (fisher_it == series.end()) continue;
        bool monotone = true;
        double previous = 0.0;
        bool first = true;
        for (const auto* c : list) {
            const auto f = std::find_if(fisher_it->second.begin(), fisher_it->second.end(),
                                        [&](auto* fc) { return fc->n == c->n; });
            if (f == fisher_it->second.end()) continue;
            const double r = (*f)->mean_seconds / c->mean_seconds;
            out.ratios.push_back({key.first, c->n, algo, r});
            if (!first && r < (1.0 - tolerance) * previous) monotone = false;
            previous = r;
            first = false;
        }
        out.ratio_monotone[{key.first, key.second}] = monotone;
    }
    return out;
}

inline ScalingSummary scaling_summary(const BenchmarkResult& result, double tolerance = 0.2) {
    return scaling_summary(result.cells, tolerance);
}

inline void write_errors_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
    out << "situation,n,algorithm,mean_error_pct,std,failures,posterior_mean_error_pct\n";
    for (const auto& c : cells) {
        out << c.situation << ',' << c.n << ',' << to_string(c.algorithm) << ',' << detail::format_double(c.mean_error_pct)
            << ',' << detail::format_double(c.std_error_pct) << ',' << c.failures << ','
            << detail::format_double(c.mean_posterior_error_pct) << '\n';
    }
}

/// The slope column repeats the per-(situation, algorithm) log-log slope; the
/// ratio column is fisher time over this row's time.
inline void write_timings_csv(std::ostream& out, const std::vector<CellSummary>& cells,
                              const ScalingSummary* summary = nullptr) {
    out << "situation,n,algorithm,mean_seconds,mean_iterations,loglog_slope,fisher_time_ratio\n";
    for (const auto& c : cells) {
        std::string slope = "", ratio = "";
        if (summary) {
            for (const auto& s : summary->slopes)
                if (s.situation == c.situation && s.algorithm == c.algorithm) slope = detail::format_double(s.slope);
            for (const auto& r : summary->ratios)
                if (r.situation == c.situation && r.n == c.n && r.versus == c.algorithm) ratio = detail::format_double(r.ratio);
        }
        out << c.situation << ',' << c.n << ',' << to_string(c.algorithm) << ',' << detail::format_double(c.mean_seconds)
            << ',' << detail::format_double(c.mean_iterations) << ',' << slope << ',' << ratio << '\n';
    }
}

inline nlohmann::json em_config_json(const EmConfig& c) {
    return {{"max_iterations", c.max_iterations}, {"rel_tol", c.rel_tol}, {"n_restarts", c.n_restarts},
            {"irls", {{"max_iterations", c.irls.max_iterations}, {"objective_tol", c.irls.objective_tol},
                      {"gradient_tol", c.irls.gradient_tol}, {"max_halvings", c.irls.max_halvings},
                      {"coefficient_limit", c.irls.coefficient_limit}}}};
}

inline nlohmann::json benchmark_metadata(const BenchmarkResult& result) {
    const auto& plan = result.plan;
    nlohmann::json algorithms = nlohmann::json::array();
    for (auto a : plan.algorithms) algorithms.push_back(to_string(a));
    nlohmann::json generators = nlohmann::json::object();
    for (int s : plan.situations) generators[std::to_string(s)] = to_json(SimulationSpec::preset(s, plan.n_list.front(), 0));
    nlohmann::json cem = em_config_json(plan.cem);
    cem["empty_class_policy"] =
        plan.cem.empty_class_policy == EmptyClassPolicy::AbortRestart ? "abort_restart" : "reseed_smallest";
    cem["c_step_rule"] = plan.cem.c_step_rule == CStepRule::Posterior ? "posterior" : "logistic";
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& r : result.trials)
        if (r.algorithm == plan.algorithms.front())
            seeds.push_back({{"situation", r.situation}, {"n", r.n}, {"trial", r.trial}, {"seed", r.seed}});
    std::size_t failures = 0;
    nlohmann::json failure_list = nlohmann::json::array();
    for (const auto& r : result.trials) {
        if (!r.failed) continue;
        ++failures;
        failure_list.push_back({{"situation", r.situation}, {"n", r.n}, {"trial", r.trial},
                                {"algorithm", to_string(r.algorithm)}, {"message", r.message}});
    }
    return {{"n_list", plan.n_list},
            {"situations", plan.situations},
            {"repeats", plan.repeats},
            {"algorithms", algorithms},
            {"num_classes", plan.num_classes},
            {"degrees", {{"1", BenchmarkPlan::degree_for(1)}, {"2", BenchmarkPlan::degree_for(2)}}},
            {"base_seed", plan.base_seed},
            {"timing_mode", plan.timing},
            {"jobs", plan.timing ? 1 : plan.jobs},
            {"em", em_config_json(plan.em)},
            {"cem", cem},
            {"generators", generators},
            {"trial_seeds", seeds},
            {"failures", failures},
            {"failed_trials", failure_list}};
}

}  // namespace ordseg

#endif  // ORDSEG_BENCH_HPP
