#include "ordseg/bench.hpp"
#include "ordseg/io.hpp"
#include "ordseg/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace ordseg;

TEST(Simulator, ShapeAndLabels) {
    const auto data = simulate(SimulationSpec::preset(1, 300, 7));
    EXPECT_EQ(data.series.size(), 300u);
    EXPECT_DOUBLE_EQ(data.series.t().front(), 0.0);
    EXPECT_DOUBLE_EQ(data.series.t().back(), 5.0);
    for (std::size_t i = 0; i < 300; ++i) {
        const double t = data.series.t()[i];
        EXPECT_EQ(data.true_labels.label(i), (t > 1.0 ? 1 : 0) + (t > 3.0 ? 1 : 0));
    }
}

TEST(Simulator, NoiselessLimit) {
    for (int s : {1, 2}) {
        auto spec = SimulationSpec::preset(s, 101, 3);
        spec.sigmas = {0.0, 0.0, 0.0};
        const auto data = simulate(spec);
        for (std::size_t i = 0; i < 101; ++i) {
            const double t = data.series.t()[i];
            const auto& m = spec.means[static_cast<std::size_t>(data.true_labels.label(i))];
            EXPECT_EQ(data.series.y()[i], m.intercept + m.slope * t);
        }
        // Grid step 0.05: t = 1 and t = 3 stay in the earlier segment.
        EXPECT_EQ(data.true_labels.boundaries(), (std::vector<std::size_t>{0, 21, 61, 101}));
    }
}

TEST(Simulator, Deterministic) {
    std::ostringstream a, b;
    const auto x = simulate(SimulationSpec::preset(2, 300, 11));
    const auto y = simulate(SimulationSpec::preset(2, 300, 11));
    write_series_csv(a, x.series, &x.true_labels);
    write_series_csv(b, y.series, &y.true_labels);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(simulate(SimulationSpec::preset(2, 300, 12)).series.y(), x.series.y());
}

TEST(Simulator, LargeSampleStandardDeviations) {
    const auto data = simulate(SimulationSpec::preset(1, 100000, 5));
    const std::vector<double> expected{1.0, 1.5, 2.0};
    for (int k = 0; k < 3; ++k) {
        double sum = 0, sum2 = 0;
        const auto b = data.true_labels.segment_begin(k), e = data.true_labels.segment_end(k);
        for (std::size_t i = b; i < e; ++i) {
            sum += data.series.y()[i];
            sum2 += data.series.y()[i] * data.series.y()[i];
        }
        const double m = static_cast<double>(e - b);
        const double sd = std::sqrt((sum2 - sum * sum / m) / (m - 1));
        EXPECT_NEAR(sd, expected[static_cast<std::size_t>(k)], 0.02 * expected[static_cast<std::size_t>(k)]);
    }
}

TEST(Simulator, ValidationListsEveryProblem) {
    SimulationSpec spec = SimulationSpec::preset(1, 2, 0);
    spec.sigmas = {1.0, -1.0};
    spec.change_times = {3.0, 1.0};
    const auto problems = spec.problems();
    EXPECT_GE(problems.size(), 4u);
    EXPECT_THROW(simulate(spec), std::invalid_argument);
    EXPECT_TRUE(SimulationSpec::preset(2, 50, 0).problems().empty());
}

TEST(Csv, RoundTrip) {
    const auto data = simulate(SimulationSpec::preset(2, 50, 4));
    std::stringstream io;
    write_series_csv(io, data.series, &data.true_labels);
    const auto back = read_series_csv(io);
    EXPECT_EQ(back.series.t(), data.series.t());
    EXPECT_EQ(back.series.y(), data.series.y());
    ASSERT_TRUE(back.labels.has_value());
    EXPECT_EQ(*back.labels, data.true_labels.labels());

    std::istringstream plain("t,y\n0,1\n1,2\r\n\n2,3\n");
    const auto p = read_series_csv(plain);
    EXPECT_EQ(p.series.size(), 3u);
    EXPECT_FALSE(p.labels.has_value());
}

TEST(Csv, ErrorsNameTheLine) {
    auto line_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            read_series_csv(in);
        } catch (const CsvError& e) {
            return e.line();
        }
        return std::size_t{0};
    };
    EXPECT_EQ(line_of(""), 1u);
    EXPECT_EQ(line_of("time,value\n0,1\n"), 1u);
    EXPECT_EQ(line_of("t,y\n0,1\n1,abc\n"), 3u);
    EXPECT_EQ(line_of("t,y\n0,1\n1,2\n1,3\n"), 4u);
    EXPECT_EQ(line_of("t,y\n0,1,2\n"), 2u);
    EXPECT_EQ(line_of("t,y,true_label\n0,1,0\n"), 2u);
    EXPECT_EQ(line_of("t,y\n"), 1u);
    EXPECT_EQ(line_of("t,y\n0,nan\n"), 2u);
}

TEST(Json, SimulationSpecRoundTrip) {
    auto spec = SimulationSpec::preset(2, 77, 99);
    spec.sigmas = {0.5, 0.25, 2.0};
    const auto back = simulation_spec_from_json(to_json(spec));
    EXPECT_EQ(back.situation, 2);
    EXPECT_EQ(back.n, 77u);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.sigmas, spec.sigmas);
    EXPECT_EQ(back.means, spec.means);
    EXPECT_EQ(back.change_times, spec.change_times);
}

TEST(Json, LogisticParamsBothForms) {
    const auto a = logistic_from_json(nlohmann::json::parse(R"({"lambda": [-5], "gamma": [-2]})"), 2);
    EXPECT_DOUBLE_EQ(a.intercept(0), 10.0);
    EXPECT_DOUBLE_EQ(a.slope(0), -5.0);
    const auto b = logistic_from_json(nlohmann::json::parse(R"({"coefficients": [[10, -5]]})"), 2);
    EXPECT_EQ(a.coefficients(), b.coefficients());
    const auto c = logistic_from_json(logistic_json(a), 2);
    EXPECT_EQ(c.coefficients(), a.coefficients());
    EXPECT_THROW(logistic_from_json(nlohmann::json::parse(R"({"coefficients": [[1, 2, 3]]})"), 2), std::invalid_argument);
    EXPECT_THROW(logistic_from_json(nlohmann::json::parse("[1]"), 2), std::invalid_argument);
    EXPECT_THROW(logistic_from_json(nlohmann::json::parse("{}"), 2), std::invalid_argument);
}

TEST(Json, ComparisonRoundTrip) {
    const EmCemComparison c{12, 3, 0.5, 0.125, -1234.5678901234567, -1300.25, {0, 10, 20, 30}, {0, 11, 20, 30}};
    EXPECT_EQ(em_cem_comparison_from_json(nlohmann::json::parse(to_json(c).dump())), c);
}

TEST(Json, SegmentsUseMidpointChangeTimes) {
    const TimeSeries s({0, 1, 2, 3}, {0, 0, 5, 5});
    const auto j = segments_json(OrderedPartition({0, 2, 4}), s);
    EXPECT_EQ(j["segments"], nlohmann::json::parse("[[0,2],[2,4]]"));
    EXPECT_DOUBLE_EQ(j["change_times"][0].get<double>(), 1.5);
}

TEST(SegmentationError, Counting) {
    const OrderedPartition truth({0, 100, 300, 500});
    EXPECT_EQ(segmentation_error(truth, truth), 0.0);
    std::vector<int> labels = truth.labels();
    for (int i = 0; i < 5; ++i) labels[static_cast<std::size_t>(i)] = 2;
    EXPECT_DOUBLE_EQ(segmentation_error(labels, truth.labels()), 1.0);
    // Shifts of +3 and -4 samples misclassify 7 points.
    EXPECT_DOUBLE_EQ(segmentation_error(OrderedPartition({0, 103, 296, 500}), truth), 100.0 * 7 / 500);
    EXPECT_THROW(segmentation_error(std::vector<int>{0}, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(Bench, TrialSeedsDistinct) {
    std::set<std::uint64_t> seen;
    for (int s : {1, 2})
        for (std::size_t n : {100u, 300u})
            for (int t = 0; t < 50; ++t) seen.insert(trial_seed(0, s, n, t));
    EXPECT_EQ(seen.size(), 200u);
    EXPECT_NE(trial_seed(1, 1, 100, 0), trial_seed(0, 1, 100, 0));
}

TEST(Bench, LogLogSlopeAndRatios) {
    EXPECT_NEAR(log_log_slope({10, 20, 40, 80}, {100, 400, 1600, 6400}), 2.0, 1e-12);
    EXPECT_NEAR(log_log_slope({10, 20, 40, 80}, {1, 2, 4, 8}), 1.0, 1e-12);

    std::vector<CellSummary> cells;
    for (std::size_t n : {100u, 200u, 400u}) {
        const double x = static_cast<double>(n);
        cells.push_back({1, n, Algorithm::Fisher, 1, 0, 1e-6 * x * x, 0, 0, 0, 0});
        cells.push_back({1, n, Algorithm::Em, 1, 0, 1e-4 * x, 0, 0, 0, 0});
    }
    const auto s = scaling_summary(cells);
    EXPECT_NEAR(s.slope(1, Algorithm::Fisher), 2.0, 1e-12);
    EXPECT_NEAR(s.slope(1, Algorithm::Em), 1.0, 1e-12);
    EXPECT_NEAR(s.ratio(1, 400, Algorithm::Em) / s.ratio(1, 100, Algorithm::Em), 4.0, 1e-12);
    EXPECT_TRUE(s.monotone(1, Algorithm::Em));
}

TEST(Bench, KnownTimingRatios) {
    // Reference timings at n = 100 and n = 3000 with a geometric midpoint.
    const std::vector<CellSummary> cells{
        {1, 100, Algorithm::Fisher, 1, 0, 0.1894, 0, 0, 0, 0},   {1, 100, Algorithm::Em, 1, 0, 0.0800, 0, 0, 0, 0},
        {1, 1000, Algorithm::Fisher, 1, 0, 20.0, 0, 0, 0, 0},    {1, 1000, Algorithm::Em, 1, 0, 0.30, 0, 0, 0, 0},
        {1, 3000, Algorithm::Fisher, 1, 0, 310.4002, 0, 0, 0, 0}, {1, 3000, Algorithm::Em, 1, 0, 0.8600, 0, 0, 0, 0}};
    const auto s = scaling_summary(cells);
    EXPECT_NEAR(s.ratio(1, 100, Algorithm::Em), 2.3675, 1e-4);
    EXPECT_NEAR(s.ratio(1, 3000, Algorithm::Em), 360.93, 1e-2);
    EXPECT_TRUE(s.monotone(1, Algorithm::Em));
}

TEST(Bench, NonMonotoneRatioDetected) {
    std::vector<CellSummary> cells;
    const double em[] = {1.0, 1.0, 3.0};
    int j = 0;
    for (std::size_t n : {100u, 200u, 400u}) {
        cells.push_back({1, n, Algorithm::Fisher, 1, 0, 2.0, 0, 0, 0, 0});
        cells.push_back({1, n, Algorithm::Cem, 1, 0, em[j++], 0, 0, 0, 0});
    }
    EXPECT_FALSE(scaling_summary(cells).monotone(1, Algorithm::Cem));
    cells.resize(4);
    EXPECT_THROW(scaling_summary(cells), std::invalid_argument);
}

TEST(Bench, SmokePlanAndFiles) {
    BenchmarkPlan plan;
    plan.n_list = {100};
    plan.situations = {1};
    plan.repeats = 1;
    plan.algorithms = {Algorithm::Fisher};
    const auto result = run_benchmark(plan);
    ASSERT_EQ(result.cells.size(), 1u);
    EXPECT_TRUE(std::isfinite(result.cells[0].mean_error_pct));
    EXPECT_GT(result.cells[0].mean_seconds, 0.0);
    std::ostringstream errors, timings;
    write_errors_csv(errors, result.cells);
    write_timings_csv(timings, result.cells);
    const std::string e = errors.str(), tm = timings.str();
    EXPECT_EQ(std::count(e.begin(), e.end(), '\n'), 2);
    EXPECT_EQ(std::count(tm.begin(), tm.end(), '\n'), 2);
    const auto meta = benchmark_metadata(result);
    EXPECT_EQ(meta["failures"], 0);
    EXPECT_EQ(meta["trial_seeds"].size(), 1u);

    plan.n_list = {0};
    EXPECT_THROW(run_benchmark(plan), std::invalid_argument);
}

TEST(Bench, ParallelMatchesSequentialErrors) {
    BenchmarkPlan plan;
    plan.n_list = {60, 90};
    plan.situations = {1, 2};
    plan.repeats = 2;
    plan.em.n_restarts = 2;
    plan.cem.n_restarts = 2;
    const auto seq = run_benchmark(plan);
    plan.timing = false;
    plan.jobs = 3;
    const auto par = run_benchmark(plan);
    ASSERT_EQ(seq.cells.size(), par.cells.size());
    for (std::size_t i = 0; i < seq.cells.size(); ++i) {
        EXPECT_EQ(seq.cells[i].mean_error_pct, par.cells[i].mean_error_pct);
        EXPECT_EQ(seq.cells[i].mean_iterations, par.cells[i].mean_iterations);
    }
}
