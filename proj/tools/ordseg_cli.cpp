// ordseg command line: simulate, segment, benchmark, curves.
#include "ordseg/ordseg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

/// Exit code 2: anything that failed while reading or writing files.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t fresh_seed() {
    std::random_device rd;
    const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << seed << '\n';
    return seed;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    auto out = open_out(path);
    out << text;
    finish(out, path);
}

std::vector<std::string> config_tokens(const json& value) {
    std::vector<std::string> out;
    auto one = [](const json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ValidationError("config values must be scalars or arrays of scalars");
    };
    if (value.is_array()) {
        for (const auto& v : value) out.push_back(one(v));
    } else {
        out.push_back(one(value));
    }
    return out;
}

/// Fills options that were not given on the command line from the JSON object
/// in --config, so precedence is defaults < config file < flags.
void apply_config(CLI::App& sub, const std::string& path) {
    if (path.empty()) return;
    json cfg;
    try {
        cfg = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw CLI::ValidationError("--config", std::string("invalid JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw CLI::ValidationError("--config", "expected a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        std::string name = key;
        for (char& c : name)
            if (c == '_') c = '-';
        CLI::Option* opt = sub.get_option_no_throw("--" + name);
        if (opt == nullptr || name == "config") throw CLI::ValidationError("--config", "unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        for (const auto& token : config_tokens(value)) opt->add_result(token);
        opt->run_callback();
    }
}

// simulate -------------------------------------------------------------------

struct SimulateArgs {
    int situation = 1;
    std::size_t n = 300;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string config;
};

int run_simulate(const SimulateArgs& a) {
    const auto spec = ordseg::SimulationSpec::preset(a.situation, a.n, a.seed ? *a.seed : fresh_seed());
    const auto data = ordseg::simulate(spec);
    auto out = open_out(a.out);
    ordseg::write_series_csv(out, data.series, &data.true_labels);
    finish(out, a.out);
    const std::string meta_path = a.out + ".meta.json";
    auto meta = open_out(meta_path);
    meta << ordseg::to_json(spec).dump(2) << '\n';
    finish(meta, meta_path);
    return 0;
}

// segment --------------------------------------------------------------------

struct SegmentArgs {
    std::string algo;
    int k = 0;
    int degree = 0;
    std::string input;
    std::optional<std::uint64_t> seed;
    int restarts = ordseg::EmConfig{}.n_restarts;
    double tol = ordseg::EmConfig{}.rel_tol;
    int max_iter = ordseg::EmConfig{}.max_iterations;
    std::string c_step_rule = "posterior";
    std::string out;
    std::string config;
};

ordseg::CsvSeries load_series(const std::string& path) {
    std::istringstream in(read_file(path));
    return ordseg::read_series_csv(in);
}

int run_segment(const SegmentArgs& a) {
    const auto csv = load_series(a.input);
    const auto& series = csv.series;
    if (a.k < 1 || static_cast<std::size_t>(a.k) > series.size()) {
        throw std::invalid_argument("--k must satisfy 1 <= K <= n (n = " + std::to_string(series.size()) + ")");
    }
    if (a.degree < 0 || a.degree > 7) throw std::invalid_argument("--degree must lie in [0, 7]");

    json config = {{"k", a.k}, {"degree", a.degree}, {"input", a.input}};
    json result;
    if (a.algo == "fisher") {
        const auto kind = ordseg::DiameterKind::polynomial(a.degree);
        const auto started = std::chrono::steady_clock::now();
        const auto fit = ordseg::fisher_segment(series, a.k, kind);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result = ordseg::to_json(fit, series);
        result["iterations"] = 0;
        result["wall_seconds"] = seconds;
    } else {
        ordseg::CemConfig cfg;
        cfg.seed = a.seed ? *a.seed : fresh_seed();
        cfg.n_restarts = a.restarts;
        cfg.rel_tol = a.tol;
        cfg.max_iterations = a.max_iter;
        cfg.c_step_rule = a.c_step_rule == "logistic" ? ordseg::CStepRule::Logistic : ordseg::CStepRule::Posterior;
        config["seed"] = cfg.seed;
        config["restarts"] = cfg.n_restarts;
        config["tol"] = cfg.rel_tol;
        config["max_iter"] = cfg.max_iterations;
        const ordseg::PolynomialBasis basis(a.degree);
        if (a.algo == "em") {
            const auto fit = ordseg::em_fit(series, a.k, basis, static_cast<const ordseg::EmConfig&>(cfg));
            result = ordseg::to_json(fit, series);
            result["log_likelihood"] = fit.final_objective();
        } else {
            config["c_step_rule"] = a.c_step_rule;
            const auto fit = ordseg::cem_fit(series, a.k, basis, cfg);
            result = ordseg::to_json(fit, series);
            result["complete_log_likelihood"] = fit.final_objective();
            result["log_likelihood"] = ordseg::mixture_log_likelihood(series, fit.params);
        }
    }
    result["algorithm"] = a.algo;
    result["config"] = config;
    result["n"] = series.size();
    emit(result.dump(2) + "\n", a.out);
    return 0;
}

// benchmark ------------------------------------------------------------------

struct BenchmarkArgs {
    bool quick = false;
    std::vector<std::size_t> n_list;
    std::vector<int> situations;
    std::optional<int> repeats;
    std::vector<std::string> algorithms;
    int k = 3;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool no_timing = false;
    int restarts = ordseg::EmConfig{}.n_restarts;
    double tol = ordseg::EmConfig{}.rel_tol;
    int max_iter = ordseg::EmConfig{}.max_iterations;
    std::string out_dir = ".";
    std::string config;
};

int run_benchmark(const BenchmarkArgs& a) {
    ordseg::BenchmarkPlan plan;
    if (a.quick) {
        plan.n_list = {100, 300, 500};
        plan.repeats = 5;
    }
    if (!a.n_list.empty()) plan.n_list = a.n_list;
    if (!a.situations.empty()) plan.situations = a.situations;
    if (a.repeats) plan.repeats = *a.repeats;
    if (!a.algorithms.empty()) {
        plan.algorithms.clear();
        for (const auto& s : a.algorithms) plan.algorithms.push_back(ordseg::algorithm_from_string(s));
    }
    plan.num_classes = a.k;
    plan.base_seed = a.seed;
    plan.jobs = a.jobs;
    plan.timing = !a.no_timing;
    for (ordseg::EmConfig* c : {static_cast<ordseg::EmConfig*>(&plan.em), static_cast<ordseg::EmConfig*>(&plan.cem)}) {
        c->n_restarts = a.restarts;
        c->rel_tol = a.tol;
        c->max_iterations = a.max_iter;
    }
    plan.validate();

    const auto result = ordseg::run_benchmark(plan);
    std::optional<ordseg::ScalingSummary> scaling;
    if (plan.n_list.size() >= 3) scaling = ordseg::scaling_summary(result);

    const std::filesystem::path dir(a.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + a.out_dir + "': " + ec.message());
    const auto errors_path = (dir / "errors.csv").string();
    auto errors = open_out(errors_path);
    ordseg::write_errors_csv(errors, result.cells);
    finish(errors, errors_path);
    const auto timings_path = (dir / "timings.csv").string();
    auto timings = open_out(timings_path);
    ordseg::write_timings_csv(timings, result.cells, scaling ? &*scaling : nullptr);
    finish(timings, timings_path);
    const auto meta_path = (dir / "metadata.json").string();
    auto meta = open_out(meta_path);
    meta << ordseg::benchmark_metadata(result).dump(2) << '\n';
    finish(meta, meta_path);
    return 0;
}

// curves ---------------------------------------------------------------------

struct CurvesArgs {
    int k = 2;
    std::string params;
    double t_min = 0.0;
    double t_max = 5.0;
    int steps = 500;
    std::string out;
    std::string config;
};

int run_curves(const CurvesArgs& a) {
    if (a.k < 1) throw std::invalid_argument("--k must be >= 1");
    const bool inline_json = a.params.find_first_of("{[") != std::string::npos;
    json j;
    try {
        j = json::parse(inline_json ? a.params : read_file(a.params));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("--params: invalid JSON: ") + e.what());
    }
    ordseg::LogisticParams params(a.k);
    try {
        params = ordseg::logistic_from_json(j, a.k);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("--params: ") + e.what());
    }
    std::ostringstream out;
    ordseg::write_curves_csv(out, params, a.t_min, a.t_max, a.steps);
    emit(out.str(), a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ordered time-series segmentation: Fisher DP, EM and CEM on a logistic-process regression mixture"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ordseg 1.0.0");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate a three-segment series to CSV");
    simulate->add_option("--situation", sim.situation, "1: piecewise constant, 2: piecewise affine")
        ->required()
        ->check(CLI::IsMember({1, 2}));
    simulate->add_option("--n", sim.n, "Number of points")->required();
    simulate->add_option("--seed", sim.seed, "RNG seed (generated and printed when absent)");
    simulate->add_option("--out", sim.out, "Output CSV path")->required();
    simulate->add_option("--config", sim.config, "JSON file of defaults for these flags");

    SegmentArgs seg;
    auto* segment = app.add_subcommand("segment", "Segment a CSV series");
    segment->add_option("--algo", seg.algo, "fisher | em | cem")->required()->check(CLI::IsMember({"fisher", "em", "cem"}));
    segment->add_option("--k", seg.k, "Number of segments")->required();
    segment->add_option("--degree", seg.degree, "Polynomial degree p")->required();
    segment->add_option("--input", seg.input, "CSV with header t,y[,true_label]")->required();
    segment->add_option("--seed", seg.seed, "RNG seed for restarts (generated and printed when absent)");
    segment->add_option("--restarts", seg.restarts, "EM/CEM initializations")->check(CLI::PositiveNumber);
    segment->add_option("--tol", seg.tol, "Relative log-likelihood tolerance")->check(CLI::PositiveNumber);
    segment->add_option("--max-iter", seg.max_iter, "EM/CEM iteration cap")->check(CLI::PositiveNumber);
    segment->add_option("--c-step-rule", seg.c_step_rule, "CEM labeling: posterior | logistic")
        ->check(CLI::IsMember({"posterior", "logistic"}));
    segment->add_option("--out", seg.out, "Output JSON path (stdout when absent)");
    segment->add_option("--config", seg.config, "JSON file of defaults for these flags");

    BenchmarkArgs bench;
    auto* benchmark = app.add_subcommand("benchmark", "Error and timing tables over simulated data");
    benchmark->add_flag("--quick", bench.quick, "n in {100, 300, 500}, 5 repeats");
    benchmark->add_option("--n-list", bench.n_list, "Series lengths")->delimiter(',');
    benchmark->add_option("--situations", bench.situations, "Situations to run")->delimiter(',');
    benchmark->add_option("--repeats", bench.repeats, "Datasets per (situation, n)");
    benchmark->add_option("--algorithms", bench.algorithms, "Subset of fisher,em,cem")->delimiter(',');
    benchmark->add_option("--k", bench.k, "Number of segments");
    benchmark->add_option("--seed", bench.seed, "Base seed for trial seeds");
    benchmark->add_option("--jobs", bench.jobs, "Worker threads when timing is off");
    benchmark->add_flag("--no-timing", bench.no_timing, "Allow parallel trials (timings become unreliable)");
    benchmark->add_option("--restarts", bench.restarts, "EM/CEM initializations");
    benchmark->add_option("--tol", bench.tol, "Relative log-likelihood tolerance");
    benchmark->add_option("--max-iter", bench.max_iter, "EM/CEM iteration cap");
    benchmark->add_option("--out-dir", bench.out_dir, "Directory for errors.csv, timings.csv, metadata.json");
    benchmark->add_option("--config", bench.config, "JSON file of defaults for these flags");

    CurvesArgs curv;
    auto* curves = app.add_subcommand("curves", "Logistic proportions pi_k(t) on a grid");
    curves->add_option("--k", curv.k, "Number of classes")->required();
    curves->add_option("--params", curv.params, "Logistic parameters: JSON text or a JSON file")->required();
    curves->add_option("--t-min", curv.t_min, "Grid start");
    curves->add_option("--t-max", curv.t_max, "Grid end");
    curves->add_option("--steps", curv.steps, "Grid intervals (steps+1 rows)");
    curves->add_option("--out", curv.out, "Output CSV path (stdout when absent)");
    curves->add_option("--config", curv.config, "JSON file of defaults for these flags");

    for (auto* sub : {simulate, segment, benchmark, curves}) {
        for (auto* opt : sub->get_options()) {
            if (opt->get_type_size() == 1 && opt->get_expected_max() == 1) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        }
    }

    try {
        // Required options may come from the config file, so they are checked
        // after it is merged.
        std::vector<std::pair<CLI::App*, CLI::Option*>> required;
        for (auto* sub : {simulate, segment, benchmark, curves})
            for (auto* opt : sub->get_options())
                if (opt->get_required()) {
                    required.emplace_back(sub, opt);
                    opt->required(false);
                }
        app.parse(argc, argv);
        CLI::App* sub = app.get_subcommands().front();
        const std::string& config_path = sub == simulate ? sim.config
                                         : sub == segment ? seg.config
                                         : sub == benchmark ? bench.config
                                                            : curv.config;
        apply_config(*sub, config_path);
        for (auto [owner, opt] : required)
            if (owner == sub && opt->count() == 0) throw CLI::RequiredError(opt->get_name());

        if (sub == simulate) return run_simulate(sim);
        if (sub == segment) return run_segment(seg);
        if (sub == benchmark) return run_benchmark(bench);
        return run_curves(curv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
