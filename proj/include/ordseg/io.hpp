// CSV and JSON interchange.
#ifndef ORDSEG_IO_HPP
#define ORDSEG_IO_HPP

#include "ordseg/cem.hpp"
#include "ordseg/em.hpp"
#include "ordseg/fisher.hpp"
#include "ordseg/simulator.hpp"

#include <json.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordseg {

/// Malformed input; `line` is 1-based (the header is line 1).
class CsvError : public std::runtime_error {
public:
    CsvError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct CsvSeries {
    TimeSeries series;
    /// 0-based labels when a true_label column is present.
    std::optional<std::vector<int>> labels;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_double(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Reads `t,y[,true_label]` with a mandatory header. t must be strictly
/// increasing. true_label is 1-based in the file.
inline CsvSeries read_series_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw CsvError(1, "missing header");
    std::vector<std::string> header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);
    if (header.size() < 2 || header[0] != "t" || header[1] != "y" ||
        (header.size() == 3 && header[2] != "true_label") || header.size() > 3) {
        throw CsvError(1, "expected header 't,y' or 't,y,true_label'");
    }
    const bool with_labels = header.size() == 3;
    std::vector<double> t, y;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) throw CsvError(line_no, "expected " + std::to_string(header.size()) + " fields");
        const auto tv = detail::parse_double(fields[0]);
        const auto yv = detail::parse_double(fields[1]);
        if (!tv || !yv) throw CsvError(line_no, "non-numeric value");
        if (!t.empty() && !(*tv > t.back())) throw CsvError(line_no, "t is not strictly increasing");
        t.push_back(*tv);
        y.push_back(*yv);
        if (with_labels) {
            const auto lv = detail::parse_double(fields[2]);
            if (!lv || *lv < 1 || *lv != static_cast<double>(static_cast<int>(*lv))) {
                throw CsvError(line_no, "true_label must be a positive integer");
            }
            labels.push_back(static_cast<int>(*lv) - 1);
        }
    }
    if (t.empty()) throw CsvError(line_no, "no data rows");
    CsvSeries out{TimeSeries(std::move(t), std::move(y)), std::nullopt};
    if (with_labels) out.labels = std::move(labels);
    return out;
}

/// Writes `t,y[,true_label]` (labels 1-based), %.17g, LF line endings.
inline void write_series_csv(std::ostream& out, const TimeSeries& series, const OrderedPartition* labels = nullptr) {
    out << (labels ? "t,y,true_label\n" : "t,y\n");
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << detail::format_double(series.t()[i]) << ',' << detail::format_double(series.y()[i]);
        if (labels) out << ',' << (labels->label(i) + 1);
        out << '\n';
    }
}

// JSON ---------------------------------------------------------------------

inline nlohmann::json to_json(const SimulationSpec& spec) {
    nlohmann::json means = nlohmann::json::array();
    for (const auto& m : spec.means) means.push_back({{"intercept", m.intercept}, {"slope", m.slope}});
    return {{"situation", spec.situation}, {"n", spec.n},       {"change_times", spec.change_times},
            {"sigmas", spec.sigmas},       {"means", means},    {"seed", spec.seed},
            {"t_min", spec.t_min},         {"t_max", spec.t_max}, {"generator", "splitmix64-counter/box-muller"}};
}

inline SimulationSpec simulation_spec_from_json(const nlohmann::json& j) {
    SimulationSpec spec = SimulationSpec::preset(j.value("situation", 1), j.value("n", std::size_t{300}),
                                                 j.value("seed", std::uint64_t{0}));
    if (j.contains("change_times")) spec.change_times = j.at("change_times").get<std::vector<double>>();
    if (j.contains("sigmas")) spec.sigmas = j.at("sigmas").get<std::vector<double>>();
    if (j.contains("means")) {
        spec.means.clear();
        for (const auto& m : j.at("means")) spec.means.push_back({m.at("intercept").get<double>(), m.at("slope").get<double>()});
    }
    spec.t_min = j.value("t_min", spec.t_min);
    spec.t_max = j.value("t_max", spec.t_max);
    return spec;
}

inline nlohmann::json segments_json(const OrderedPartition& partition, const TimeSeries& series) {
    nlohmann::json segments = nlohmann::json::array();
    nlohmann::json change_times = nlohmann::json::array();
    for (int k = 0; k < partition.num_classes(); ++k) {
        segments.push_back({partition.segment_begin(k), partition.segment_end(k)});
        if (k > 0) {
            const std::size_t b = partition.segment_begin(k);
            if (b > 0 && b < series.size()) {
                change_times.push_back(0.5 * (series.t()[b - 1] + series.t()[b]));
            } else {
                change_times.push_back(nullptr);
            }
        }
    }
    return {{"segments", segments}, {"change_times", change_times}};
}

inline nlohmann::json classes_json(const std::vector<ClassRegression>& classes) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : classes) {
        out.push_back({{"beta", std::vector<double>(c.beta.data(), c.beta.data() + c.beta.size())}, {"sigma2", c.sigma2}});
    }
    return out;
}

inline nlohmann::json logistic_json(const LogisticParams& params) {
    nlohmann::json coef = nlohmann::json::array();
    nlohmann::json lambda = nlohmann::json::array();
    nlohmann::json gamma = nlohmann::json::array();
    for (int k = 0; k < params.num_classes(); ++k) {
        coef.push_back({params.intercept(k), params.slope(k)});
        lambda.push_back(params.lambda(k));
        if (const auto g = params.gamma(k)) {
            gamma.push_back(*g);
        } else {
            gamma.push_back(nullptr);
        }
    }
    return {{"coefficients", coef}, {"lambda", lambda}, {"gamma", gamma}};
}

/// Accepts {"coefficients": [[w0, w1], ...]} (K or K-1 rows) or
/// {"lambda": [...], "gamma": [...]} (K or K-1 entries).
inline LogisticParams logistic_from_json(const nlohmann::json& j, int num_classes) {
    if (!j.is_object()) throw std::invalid_argument("logistic params: expected a JSON object");
    if (j.contains("coefficients")) {
        const auto rows = j.at("coefficients").get<std::vector<std::vector<double>>>();
        const auto k_count = static_cast<std::size_t>(num_classes);
        if (rows.size() != k_count && rows.size() + 1 != k_count) {
            throw std::invalid_argument("logistic params: coefficients must hold K or K-1 rows");
        }
        Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(num_classes, 2);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].size() != 2) throw std::invalid_argument("logistic params: each row needs [intercept, slope]");
            coef(static_cast<Eigen::Index>(k), 0) = rows[k][0];
            coef(static_cast<Eigen::Index>(k), 1) = rows[k][1];
        }
        return LogisticParams::from_coefficients(coef);
    }
    if (j.contains("lambda") && j.contains("gamma")) {
        const auto lambda = j.at("lambda").get<std::vector<double>>();
        const auto gamma = j.at("gamma").get<std::vector<double>>();
        return LogisticParams::from_lambda_gamma(lambda, gamma, num_classes);
    }
    throw std::invalid_argument("logistic params: need 'coefficients' or 'lambda' and 'gamma'");
}

inline nlohmann::json to_json(const FitReport& report, const TimeSeries& series) {
    nlohmann::json j = segments_json(report.partition, series);
    j["classes"] = classes_json(report.params.classes);
    j["logistic"] = logistic_json(report.params.logistic);
    j["loglik_trace"] = report.loglik_trace;
    j["final_objective"] = report.final_objective();
    j["iterations"] = report.n_iterations;
    j["irls_iterations"] = report.irls_iteration_counts;
    j["converged"] = report.converged;
    j["has_empty_classes"] = report.has_empty_classes;
    j["restart_selected"] = report.restart_index_selected;
    j["restart_objectives"] = report.restart_final_objectives;
    j["abandoned_restarts"] = report.abandoned_restarts;
    j["warnings"] = report.warnings;
    j["wall_seconds"] = report.wall_clock_seconds;
    return j;
}

inline nlohmann::json to_json(const SegmentationResult& result, const TimeSeries& series) {
    nlohmann::json j = segments_json(result.partition, series);
    j["classes"] = classes_json(result.per_segment_fits);
    j["total_cost"] = result.total_cost;
    return j;
}

inline nlohmann::json to_json(const EmCemComparison& c) {
    return {{"em_iterations", c.em_iterations},   {"cem_iterations", c.cem_iterations},
            {"em_seconds", c.em_seconds},         {"cem_seconds", c.cem_seconds},
            {"em_loglik", c.em_loglik},           {"cem_complete_loglik", c.cem_complete_loglik},
            {"em_boundaries", c.em_boundaries},   {"cem_boundaries", c.cem_boundaries}};
}

inline EmCemComparison em_cem_comparison_from_json(const nlohmann::json& j) {
    EmCemComparison c;
    c.em_iterations = j.at("em_iterations").get<int>();
    c.cem_iterations = j.at("cem_iterations").get<int>();
    c.em_seconds = j.at("em_seconds").get<double>();
    c.cem_seconds = j.at("cem_seconds").get<double>();
    c.em_loglik = j.at("em_loglik").get<double>();
    c.cem_complete_loglik = j.at("cem_complete_loglik").get<double>();
    c.em_boundaries = j.at("em_boundaries").get<std::vector<std::size_t>>();
    c.cem_boundaries = j.at("cem_boundaries").get<std::vector<std::size_t>>();
    return c;
}

}  // namespace ordseg

#endif  // ORDSEG_IO_HPP
