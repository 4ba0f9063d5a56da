// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include "ordseg/ordseg.hpp"

#include "oracles.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ordseg;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s | %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void guard(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

// 1 ---------------------------------------------------------------------------

void exact_dp_oracle() {
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<std::size_t> size(1, 12);
    std::uniform_real_distribution<double> gap(0.05, 1.0);
    std::normal_distribution<double> z(0.0, 2.0);
    double worst = 0.0;
    int checked = 0;
    for (int instance = 0; instance < 200; ++instance) {
        const std::size_t n = size(gen);
        std::vector<double> t(n), y(n);
        double now = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            now += gap(gen);
            t[i] = now;
            y[i] = z(gen) + (i > n / 2 ? 3.0 : 0.0);
        }
        const TimeSeries s(t, y);
        const std::vector<std::pair<DiameterKind, int>> kinds{
            {DiameterKind::constant_mean(), 0}, {DiameterKind::polynomial(0), 0}, {DiameterKind::polynomial(1), 1}};
        for (const auto& [kind, p] : kinds) {
            for (int k = 1; k <= 3 && static_cast<std::size_t>(k) <= n; ++k) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& b : oracle::all_partitions(n, k)) {
                    double c = 0.0;
                    for (int j = 0; j < k; ++j) c += oracle::segment_sse(t, y, b[static_cast<std::size_t>(j)], b[static_cast<std::size_t>(j) + 1], p);
                    best = std::min(best, c);
                }
                const double got = fisher_segment(s, k, kind).total_cost;
                const double rel = std::abs(got - best) / std::max(std::abs(best), 1e-300);
                worst = std::max(worst, best == 0.0 ? std::abs(got) : rel);
                ++checked;
            }
        }
    }
    report(1, worst <= 1e-9, std::to_string(checked) + " (instance, diameter, K) cases; worst relative gap " + fmt("%.3g", worst));
}

// 2, 3 ------------------------------------------------------------------------

std::vector<LabeledSeries> ascent_datasets() {
    std::vector<LabeledSeries> out;
    for (int i = 0; i < 50; ++i) {
        const int situation = 1 + i % 2;
        out.push_back(simulate(SimulationSpec::preset(situation, 300, 5000 + static_cast<std::uint64_t>(i))));
    }
    return out;
}

double worst_drop(const std::vector<double>& trace) {
    double worst = 0.0;
    for (std::size_t q = 1; q < trace.size(); ++q) worst = std::max(worst, trace[q - 1] - trace[q]);
    return worst;
}

void em_ascent(const std::vector<LabeledSeries>& data) {
    double worst = 0.0;
    int runs = 0, iterations = 0;
    for (std::size_t d = 0; d < data.size(); ++d) {
        const PolynomialBasis basis(BenchmarkPlan::degree_for(data[d].spec.situation));
        EmConfig cfg;
        cfg.seed = d;
        // Every restart, not only the selected one.
        for (int r = 0; r < cfg.n_restarts; ++r) {
            try {
                const auto run = detail::em_run(data[d].series, basis, initialize(data[d].series, 3, basis, cfg.seed, r), cfg);
                worst = std::max(worst, worst_drop(run.trace));
                iterations += run.iterations;
                ++runs;
            } catch (const EmptyClassError&) {
            }
        }
        worst = std::max(worst, worst_drop(em_fit(data[d].series, 3, basis, cfg).loglik_trace));
    }
    report(2, worst <= 1e-10,
           std::to_string(runs) + " EM runs, " + std::to_string(iterations) + " iterations; largest decrease " + fmt("%.3g", worst));
}

void cem_ascent(const std::vector<LabeledSeries>& data) {
    double worst = 0.0;
    int runs = 0, not_fixpoint = 0, max_iters = 0;
    for (std::size_t d = 0; d < data.size(); ++d) {
        const PolynomialBasis basis(BenchmarkPlan::degree_for(data[d].spec.situation));
        CemConfig cfg;
        cfg.seed = d;
        for (int r = 0; r < cfg.n_restarts; ++r) {
            try {
                OrderedPartition z;
                const auto run =
                    detail::cem_run(data[d].series, basis, initialize(data[d].series, 3, basis, cfg.seed, r), cfg, z);
                worst = std::max(worst, worst_drop(run.trace));
                max_iters = std::max(max_iters, run.iterations);
                // Fixpoint: the C-step at the final parameters returns the final labeling.
                const auto again = OrderedPartition::from_labels(
                    ordered_labeling(log_joint_matrix(data[d].series, run.params)), 3);
                if (!(again == z) || run.iterations >= cfg.max_iterations) ++not_fixpoint;
                ++runs;
            } catch (const EmptyClassError&) {
            }
        }
    }
    report(3, worst <= 1e-10 && not_fixpoint == 0 && runs > 0,
           std::to_string(runs) + " CEM runs; largest decrease " + fmt("%.3g", worst) + "; runs without a labeling fixpoint " +
               std::to_string(not_fixpoint) + "; max iterations " + std::to_string(max_iters));
}

// 4 ---------------------------------------------------------------------------

void irls_correctness() {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> ut(0.0, 5.0), draw(-5.0, 5.0);
    double worst_grad = 0.0;
    int beaten = 0;
    for (int problem = 0; problem < 20; ++problem) {
        std::vector<double> t(50);
        for (double& v : t) v = ut(gen);
        std::sort(t.begin(), t.end());
        const Eigen::MatrixXd w = oracle::random_weights(50, 3, gen);
        const auto fit = irls_fit(t, w, LogisticParams(3));
        auto q1 = [&](const Eigen::VectorXd& v) {
            const auto p = LogisticParams::from_free_vector(v, 3);
            double total = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const auto pi = oracle::softmax({p.intercept(0), p.intercept(1), 0.0}, {p.slope(0), p.slope(1), 0.0}, t[i]);
                for (int c = 0; c < 3; ++c) total += w(static_cast<Eigen::Index>(i), c) * std::log(pi[static_cast<std::size_t>(c)]);
            }
            return total;
        };
        const Eigen::VectorXd v = fit.params.free_vector();
        worst_grad = std::max(worst_grad, oracle::fd_gradient(q1, v, 1e-5).lpNorm<Eigen::Infinity>());
        const double best = q1(v);
        for (int d = 0; d < 1000; ++d) {
            Eigen::VectorXd x(4);
            for (int j = 0; j < 4; ++j) x(j) = draw(gen);
            if (q1(x) > best) ++beaten;
        }
    }
    report(4, worst_grad < 1e-5 && beaten == 0,
           "max finite-difference gradient norm " + fmt("%.3g", worst_grad) + "; random draws beating the fit " +
               std::to_string(beaten) + " of 20000");
}

// 5, 6 ------------------------------------------------------------------------

void table1(const BenchmarkResult& r) {
    auto mean = [&](int s, Algorithm a) {
        for (const auto& c : r.cells)
            if (c.situation == s && c.algorithm == a) return c.mean_error_pct;
        return std::nan("");
    };
    auto fails = [&](int s) {
        int f = 0;
        for (const auto& c : r.cells)
            if (c.situation == s) f += c.failures;
        return f;
    };
    const double f1 = mean(1, Algorithm::Fisher), e1 = mean(1, Algorithm::Em), c1 = mean(1, Algorithm::Cem);
    report(5, f1 <= 1.0 && e1 <= 1.0 && c1 <= 1.0 && fails(1) == 0,
           "situation 1, n=500, 20 seeds: mean error % fisher " + fmt("%.3f", f1) + ", em " + fmt("%.3f", e1) + ", cem " +
               fmt("%.3f", c1) + "; failed trials " + std::to_string(fails(1)));
    const double f2 = mean(2, Algorithm::Fisher), e2 = mean(2, Algorithm::Em), c2 = mean(2, Algorithm::Cem);
    report(6, std::abs(e2 - f2) <= 1.5 && std::abs(c2 - f2) <= 1.5 && fails(2) == 0,
           "situation 2, n=500, 20 seeds: mean error % fisher " + fmt("%.3f", f2) + ", em " + fmt("%.3f", e2) + ", cem " +
               fmt("%.3f", c2) + "; |em-fisher| " + fmt("%.3f", std::abs(e2 - f2)) + ", |cem-fisher| " +
               fmt("%.3f", std::abs(c2 - f2)));
}

// 7 ---------------------------------------------------------------------------

void scaling(const BenchmarkResult& r) {
    const auto s = scaling_summary(r, 0.2);
    bool slope_ok = true, monotone_ok = true, above5 = true, cem_faster = true;
    std::ostringstream detail;
    for (int situation : {1, 2}) {
        const double slope = s.slope(situation, Algorithm::Fisher);
        slope_ok = slope_ok && slope >= 1.7 && slope <= 2.3;
        detail << "s" << situation << ": fisher slope " << fmt("%.2f", slope);
        for (Algorithm a : {Algorithm::Em, Algorithm::Cem}) {
            const bool mono = s.monotone(situation, a);
            const double r2000 = s.ratio(situation, 2000, a);
            monotone_ok = monotone_ok && mono;
            above5 = above5 && r2000 > 5.0;
            detail << ", fisher/" << to_string(a) << " ratios";
            for (std::size_t n : r.plan.n_list) detail << ' ' << fmt("%.3g", s.ratio(situation, n, a));
            detail << (mono ? " (monotone)" : " (not monotone)");
        }
        for (std::size_t n : r.plan.n_list) {
            double em = 0, cem = 0;
            for (const auto& c : r.cells) {
                if (c.situation != situation || c.n != n) continue;
                if (c.algorithm == Algorithm::Em) em = c.mean_seconds;
                if (c.algorithm == Algorithm::Cem) cem = c.mean_seconds;
            }
            cem_faster = cem_faster && cem <= em;
        }
        detail << "; ";
    }
    detail << "(a) " << (slope_ok ? "ok" : "fails") << ", (b) monotone " << (monotone_ok ? "ok" : "fails") << ", ratio > 5 at n=2000 "
           << (above5 ? "ok" : "fails") << ", (c) cem <= em time " << (cem_faster ? "ok" : "fails");
    report(7, slope_ok && monotone_ok && above5 && cem_faster, detail.str());
}

// 8 ---------------------------------------------------------------------------

void logistic_properties() {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> z(0.0, 3.0);
    std::uniform_int_distribution<int> classes(2, 6);
    std::vector<double> t(400);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = -2.0 + 9.0 * static_cast<double>(i) / 399.0;
    double worst_sum = 0.0;
    int non_convex = 0, unordered_after_relabel = 0, raw_index_order = 0;
    for (int d = 0; d < 1000; ++d) {
        const int k = classes(gen);
        Eigen::MatrixXd coef(k, 2);
        for (int c = 0; c < k; ++c) coef.row(c) << z(gen), z(gen);
        const auto params = LogisticParams::from_coefficients(coef);
        const Eigen::MatrixXd pi = logistic_probabilities(t, params);
        for (Eigen::Index i = 0; i < pi.rows(); ++i) worst_sum = std::max(worst_sum, std::abs(pi.row(i).sum() - 1.0));

        std::vector<int> labels(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) pi.row(static_cast<Eigen::Index>(i)).maxCoeff(&labels[i]);
        raw_index_order += std::is_sorted(labels.begin(), labels.end()) ? 1 : 0;
        // Each class must win on a single run of consecutive instants.
        std::vector<int> runs(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (i == 0 || labels[i] != labels[i - 1]) ++runs[static_cast<std::size_t>(labels[i])];
        bool convex = true;
        for (int r : runs) convex = convex && r <= 1;
        non_convex += convex ? 0 : 1;
        // Numbering classes by first win gives a non-decreasing labeling.
        std::vector<int> rank(static_cast<std::size_t>(k), -1);
        int next = 0;
        for (int& l : labels) {
            if (rank[static_cast<std::size_t>(l)] < 0) rank[static_cast<std::size_t>(l)] = next++;
            l = rank[static_cast<std::size_t>(l)];
        }
        unordered_after_relabel += std::is_sorted(labels.begin(), labels.end()) ? 0 : 1;
    }
    report(8, worst_sum <= 1e-12 && non_convex == 0 && unordered_after_relabel == 0,
           "1000 draws: max |row sum - 1| " + fmt("%.3g", worst_sum) + "; draws where a class wins on more than one interval " +
               std::to_string(non_convex) + "; labelings not non-decreasing after numbering classes by first win " +
               std::to_string(unordered_after_relabel) + " (non-decreasing in raw class index: " +
               std::to_string(raw_index_order) + " of 1000)");
}

// 9 ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(const std::string& cmd) { return std::system((cmd + " 2>/dev/null").c_str()); }

void determinism(const std::string& cli) {
    const auto dir = std::filesystem::temp_directory_path() / ("ordseg_accept_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const std::string d = dir.string();
    bool ok = true;
    std::ostringstream detail;
    for (int situation : {1, 2}) {
        const std::string base = "simulate --situation " + std::to_string(situation) + " --n 300 --seed 7 --out ";
        const std::string a = d + "/a" + std::to_string(situation) + ".csv", b = d + "/b" + std::to_string(situation) + ".csv";
        ok = ok && run(cli + " " + base + a) == 0 && run(cli + " " + base + b) == 0;
        const bool same = slurp(a) == slurp(b) && slurp(a + ".meta.json") == slurp(b + ".meta.json") && !slurp(a).empty();
        detail << "simulate s" << situation << (same ? " identical" : " DIFFERENT") << "; ";
        ok = ok && same;
        for (const std::string algo : {"fisher", "em", "cem"}) {
            const std::string seg = " segment --algo " + algo + " --k 3 --degree " + std::to_string(situation - 1) +
                                    " --input " + a + " --seed 3 --out ";
            const std::string ja = d + "/" + algo + "a.json", jb = d + "/" + algo + "b.json";
            ok = ok && run(cli + seg + ja) == 0 && run(cli + seg + jb) == 0;
            auto x = nlohmann::json::parse(slurp(ja)), y = nlohmann::json::parse(slurp(jb));
            x.erase("wall_seconds");
            y.erase("wall_seconds");
            const bool same_json = x == y;
            ok = ok && same_json;
            if (!same_json) detail << algo << " s" << situation << " JSON differs; ";
        }
    }
    detail << "segment JSON (fisher, em, cem) identical apart from wall_seconds: " << (ok ? "yes" : "no");
    std::filesystem::remove_all(dir);
    report(9, ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: ordseg_acceptance PATH_TO_ORDSEG_CLI\n";
        return 2;
    }
    const std::string cli = argv[1];
    const auto started = std::chrono::steady_clock::now();

    guard(1, exact_dp_oracle);
    const auto data = ascent_datasets();
    guard(2, [&] { em_ascent(data); });
    guard(3, [&] { cem_ascent(data); });
    guard(4, irls_correctness);

    BenchmarkResult table;
    guard(5, [&] {
        BenchmarkPlan plan;
        plan.n_list = {500};
        plan.repeats = 20;
        table = run_benchmark(plan);
    });
    if (!table.cells.empty()) {
        guard(5, [&] { table1(table); });
    }

    guard(7, [] {
        BenchmarkPlan plan;
        plan.n_list = {100, 300, 500, 1000, 2000};
        plan.repeats = 10;
        plan.base_seed = 7;
        scaling(run_benchmark(plan));
    });
    guard(8, logistic_properties);
    guard(9, [&] { determinism(cli); });

    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() / 60.0;
    std::printf("acceptance: %d criterion failure(s), %.1f min\n", failures, minutes);
    return failures == 0 ? 0 : 1;
}
