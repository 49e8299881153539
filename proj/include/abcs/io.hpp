#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "abcs/errors.hpp"
#include "abcs/model.hpp"
#include "abcs/oracle.hpp"
#include "abcs/sim.hpp"

namespace abcs {

using Json = nlohmann::json;

namespace detail {

inline Matrix matrix_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a non-empty matrix");
    std::vector<std::vector<double>> rows;
    for (const auto& r : j) {
        if (!r.is_array()) throw ConfigError(std::string(what) + " rows must be arrays");
        rows.push_back(r.get<std::vector<double>>());
    }
    for (const auto& r : rows)
        if (r.size() != rows[0].size()) throw ConfigError(std::string(what) + " rows differ in length");
    return Matrix::from_rows(rows);
}

inline Json matrix_to_json(const Matrix& m) {
    Json out = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        out.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return out;
}

}  // namespace detail

/// Instance document:
///   {"K": 2, "J": 3, "family": "bernoulli" | {"gaussian": {"sigma2": s}},
///    "means": [[...], ...], "alpha": [...], "beta": [...]}
/// s is a scalar or a (K+1) x J matrix; beta defaults to alpha.
inline Instance instance_from_json(const Json& j) {
    try {
        Instance x;
        x.means = detail::matrix_from_json(j.at("means"), "means");
        x.K = j.contains("K") ? j.at("K").get<std::size_t>() : x.means.rows() - 1;
        x.J = j.contains("J") ? j.at("J").get<std::size_t>() : x.means.cols();
        if (x.means.rows() != x.K + 1 || x.means.cols() != x.J) throw ConfigError("means must be (K+1) x J");
        const Json fam = j.value("family", Json("bernoulli"));
        if (fam.is_string() && fam.get<std::string>() == "bernoulli") {
            x.family = Family::bernoulli();
        } else if (fam.is_object() && fam.contains("gaussian")) {
            const Json g = fam.at("gaussian");
            const Json s = g.is_object() ? g.value("sigma2", Json(1.0)) : Json(1.0);
            x.family = s.is_number() ? Family::gaussian(s.get<double>()) : Family::gaussian(detail::matrix_from_json(s, "sigma2"));
        } else if (fam.is_string() && fam.get<std::string>() == "gaussian") {
            x.family = Family::gaussian();
        } else {
            throw ConfigError("unknown family");
        }
        x.alpha = j.contains("alpha") ? j.at("alpha").get<std::vector<double>>() : std::vector<double>(x.J, 1.0 / static_cast<double>(x.J));
        x.beta = j.contains("beta") ? j.at("beta").get<std::vector<double>>() : x.alpha;
        return x;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("instance: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("instance: ") + e.what());
    }
}

inline Json instance_to_json(const Instance& x) {
    Json j;
    j["K"] = x.K;
    j["J"] = x.J;
    if (x.family.is_bernoulli()) {
        j["family"] = "bernoulli";
    } else if (x.family.sigma2_matrix().empty()) {
        j["family"] = {{"gaussian", {{"sigma2", x.family.sigma2(0, 0)}}}};
    } else {
        j["family"] = {{"gaussian", {{"sigma2", detail::matrix_to_json(x.family.sigma2_matrix())}}}};
    }
    j["means"] = detail::matrix_to_json(x.means);
    j["alpha"] = x.alpha;
    j["beta"] = x.beta;
    return j;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline Instance load_instance(const std::string& path) { return instance_from_json(read_json_file(path)); }

/// {mode, tstar, wstar, gap, iterations}; an infinite T* is written as null.
inline Json oracle_to_json(const OracleResult& r) {
    Json j;
    j["mode"] = std::string(to_string(r.mode));
    j["tstar"] = std::isfinite(r.tstar) ? Json(r.tstar) : Json(nullptr);
    j["wstar"] = r.wstar.empty() ? Json::array() : detail::matrix_to_json(r.wstar);
    const double gap = r.relative_gap();
    j["gap"] = std::isfinite(gap) ? Json(gap) : Json(nullptr);
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    return j;
}

inline Json bounds_to_json(const std::vector<ModeBound>& bounds, double delta) {
    Json out = Json::array();
    for (const auto& b : bounds)
        out.push_back({{"mode", std::string(to_string(b.mode))}, {"delta", delta}, {"tstar", b.tstar},
                       {"lower_bound", b.lower}, {"practical_bound", b.practical}});
    return out;
}

inline std::string join_arms(const ArmSet& s) {
    std::string out;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k) out += ';';
        out += std::to_string(s[k]);
    }
    return out;
}

inline std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline constexpr const char* kRunsHeader = "policy,mode,instance_id,seed,stop_time,censored,correct,delta_final";
inline constexpr const char* kCalibrationHeader = "instance_id,delta_level,t_cross,correct";
inline constexpr const char* kTraceHeader = "t,Lambda,delta_hat,recommended_set,phase,A_t,I_t";

/// stop_time is left empty for censored runs.
inline void write_runs_csv(std::ostream& os, const std::vector<RunRow>& rows) {
    os << kRunsHeader << '\n';
    for (const auto& row : rows) {
        const auto& r = row.record;
        os << to_string(r.policy.kind) << ',' << to_string(r.policy.mode) << ',' << row.instance_id << ',' << r.seed << ',';
        if (r.stop_time) os << *r.stop_time;
        os << ',' << (r.censored ? 1 : 0) << ',' << (r.correct ? 1 : 0) << ',' << format_real(r.delta_final) << '\n';
    }
}

/// One row per crossed level; t_cross is the first round with delta_hat at
/// or below the level.
inline void write_calibration_csv(std::ostream& os, const std::vector<CalibrationRow>& rows) {
    os << kCalibrationHeader << '\n';
    for (const auto& r : rows)
        if (r.crossed)
            os << r.instance_id << ',' << format_real(r.delta_level) << ',' << r.t_cross << ',' << (r.correct ? 1 : 0) << '\n';
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
    os << kTraceHeader << '\n';
    for (const auto& r : rows)
        os << r.t << ',' << format_real(r.lambda) << ',' << format_real(r.delta_hat) << ',' << join_arms(r.recommended_set)
           << ',' << to_string(r.phase) << ',' << r.arm << ',' << r.sub << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace detail

struct EventLogOptions {
    FamilyKind family = FamilyKind::Bernoulli;
    /// Known shape; 0 means infer from the largest ids seen.
    std::size_t K = 0, J = 0;
    std::vector<double> beta;  // defaults to the empirical frequencies
};

/// Parses `subpopulation,arm,outcome` rows into replay pools.
inline ReplayEnvironment read_event_log(std::istream& in, const EventLogOptions& opt = {}) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError("empty event log", 1);
    const auto header = detail::split_csv_line(line);
    if (header.size() != 3 || detail::trim(header[0]) != "subpopulation" || detail::trim(header[1]) != "arm" ||
        detail::trim(header[2]) != "outcome")
        throw ParseError("expected header subpopulation,arm,outcome", 1);
    struct Event {
        std::size_t sub, arm;
        double x;
    };
    std::vector<Event> events;
    std::size_t max_sub = 0, max_arm = 0;
    auto parse_index = [&](const std::string& s, const char* what) {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &pos);
        } catch (const std::exception&) {
            throw ParseError(std::string("bad ") + what + " '" + s + "'", lineno);
        }
        if (pos != s.size() || v < 0) throw ParseError(std::string("bad ") + what + " '" + s + "'", lineno);
        return static_cast<std::size_t>(v);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 3) throw ParseError("expected 3 fields", lineno);
        Event e;
        e.sub = parse_index(detail::trim(f[0]), "subpopulation");
        e.arm = parse_index(detail::trim(f[1]), "arm");
        const std::string xs = detail::trim(f[2]);
        std::size_t pos = 0;
        try {
            e.x = std::stod(xs, &pos);
        } catch (const std::exception&) {
            throw ParseError("non-numeric outcome '" + xs + "'", lineno);
        }
        if (pos != xs.size() || !std::isfinite(e.x)) throw ParseError("non-numeric outcome '" + xs + "'", lineno);
        if (opt.family == FamilyKind::Bernoulli && e.x != 0.0 && e.x != 1.0)
            throw ParseError("bernoulli outcome must be 0 or 1", lineno);
        if (opt.J && e.sub >= opt.J) throw ParseError("unknown subpopulation " + std::to_string(e.sub), lineno);
        if (opt.K && e.arm > opt.K) throw ParseError("unknown arm " + std::to_string(e.arm), lineno);
        max_sub = std::max(max_sub, e.sub);
        max_arm = std::max(max_arm, e.arm);
        events.push_back(e);
    }
    const std::size_t J = opt.J ? opt.J : max_sub + 1;
    const std::size_t K = opt.K ? opt.K : max_arm;
    std::vector<std::vector<double>> pools((K + 1) * J);
    for (const auto& e : events) pools[e.arm * J + e.sub].push_back(e.x);
    const Family fam = opt.family == FamilyKind::Bernoulli ? Family::bernoulli() : Family::gaussian();
    if (!opt.beta.empty() && opt.beta.size() != J) throw ConfigError("beta must have J entries");
    return ReplayEnvironment(K, J, fam, std::move(pools), opt.beta);
}

inline ReplayEnvironment load_event_log(const std::string& path, const EventLogOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return read_event_log(in, opt);
}

/// Writes `n` synthetic events drawn from an instance: subpopulations from
/// alpha, arms uniformly.
template <class R>
void write_synthetic_log(std::ostream& os, const Instance& x, std::uint64_t n, R& rng) {
    std::discrete_distribution<std::size_t> sub(x.alpha.begin(), x.alpha.end());
    std::uniform_int_distribution<std::size_t> arm(0, x.K);
    os << "subpopulation,arm,outcome\n";
    for (std::uint64_t k = 0; k < n; ++k) {
        const std::size_t i = sub(rng), a = arm(rng);
        os << i << ',' << a << ',' << sample(x.law(a, i), x.means(a, i), rng) << '\n';
    }
}

}  // namespace abcs
