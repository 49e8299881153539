#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abcs/errors.hpp"
#include "abcs/expfam.hpp"
#include "abcs/matrix.hpp"

namespace abcs {

/// Who picks and who sees the subpopulation each round.
enum class Mode { Active, Proportional, Agnostic, Oblivious };

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Active: return "active";
        case Mode::Proportional: return "proportional";
        case Mode::Agnostic: return "agnostic";
        case Mode::Oblivious: return "oblivious";
    }
    return "?";
}

inline Mode parse_mode(std::string_view s) {
    if (s == "active") return Mode::Active;
    if (s == "proportional") return Mode::Proportional;
    if (s == "agnostic") return Mode::Agnostic;
    if (s == "oblivious") return Mode::Oblivious;
    throw ConfigError("unknown mode '" + std::string(s) + "'");
}

using ArmSet = std::vector<std::size_t>;

/// Sampling proportions over (arm, subpopulation) cells.
using WeightMatrix = Matrix;

inline constexpr double kTieTolerance = 1e-12;
inline constexpr double kTieWarning = 1e-9;

/// Everything the learner knows in advance: shape, family, alpha and beta.
struct InstanceMeta {
    std::size_t K = 0;  // arms besides the control
    std::size_t J = 1;  // subpopulations
    Family family = Family::bernoulli();
    std::vector<double> alpha{1.0};
    std::vector<double> beta{1.0};

    std::size_t arms() const noexcept { return K + 1; }
    CellLaw law(std::size_t arm, std::size_t sub) const { return family.cell(arm, sub); }
};

/// A bandit instance: the known structure plus the (K+1) x J means; row 0
/// is the control.
struct Instance : InstanceMeta {
    Matrix means;

    const InstanceMeta& meta() const noexcept { return *this; }
};

inline double weighted_mean(std::span<const double> row, std::span<const double> beta) {
    double s = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) s += beta[i] * row[i];
    return s;
}

inline double weighted_mean(const Instance& x, std::size_t arm) {
    return weighted_mean(x.means.row(arm), x.beta);
}

/// Arms whose beta-weighted mean exceeds the control's, from a means matrix.
inline ArmSet answer_set(const Matrix& means, std::span<const double> beta) {
    ArmSet out;
    const double control = weighted_mean(means.row(0), beta);
    for (std::size_t a = 1; a < means.rows(); ++a)
        if (weighted_mean(means.row(a), beta) > control) out.push_back(a);
    return out;
}

inline ArmSet answer_set(const Instance& x) { return answer_set(x.means, x.beta); }

/// Delta_a = mu_0 - mu_a for a = 1..K.
inline std::vector<double> gaps(const Instance& x) {
    std::vector<double> out(x.K);
    const double control = weighted_mean(x, 0);
    for (std::size_t a = 1; a <= x.K; ++a) out[a - 1] = control - weighted_mean(x, a);
    return out;
}

/// Reflects every arm above the control through it, turning the instance
/// into one where the control is the unique best arm. Gaussian, J = 1,
/// common variance only.
inline Instance abc_to_bai(const Instance& x) {
    if (!x.family.is_gaussian() || x.J != 1 || !x.family.homoscedastic())
        throw UnsupportedError("abc_to_bai requires a single-population gaussian instance with common variance");
    Instance out = x;
    const double mu0 = x.means(0, 0);
    for (std::size_t a = 1; a <= x.K; ++a)
        if (x.means(a, 0) > mu0) out.means(a, 0) = 2.0 * mu0 - x.means(a, 0);
    return out;
}

/// Collapses subpopulations into one: each arm becomes the alpha-mixture of
/// its cells. For Bernoulli this is again Bernoulli.
inline Instance collapse_mixture(const Instance& x) {
    Instance out;
    out.K = x.K;
    out.J = 1;
    out.family = x.family.is_bernoulli() ? Family::bernoulli() : Family::gaussian();
    out.alpha = {1.0};
    out.beta = {1.0};
    out.means = Matrix(x.arms(), 1);
    for (std::size_t a = 0; a < x.arms(); ++a) out.means(a, 0) = weighted_mean(x.means.row(a), x.alpha);
    return out;
}

struct Diagnostic {
    enum class Severity { Warning, Error };
    Severity severity;
    std::string message;
};

struct Diagnostics {
    std::vector<Diagnostic> items;

    bool has_errors() const {
        return std::any_of(items.begin(), items.end(),
                           [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
    }
    bool has_warnings() const {
        return std::any_of(items.begin(), items.end(),
                           [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Warning; });
    }
    bool empty() const { return items.empty(); }
    void error(std::string m) { items.push_back({Diagnostic::Severity::Error, std::move(m)}); }
    void warning(std::string m) { items.push_back({Diagnostic::Severity::Warning, std::move(m)}); }
    std::string summary() const {
        std::string s;
        for (const auto& d : items) {
            if (!s.empty()) s += "; ";
            s += (d.severity == Diagnostic::Severity::Error ? "error: " : "warning: ") + d.message;
        }
        return s;
    }
};

/// Structural and identifiability checks. Never throws.
inline Diagnostics validate(const Instance& x) {
    Diagnostics diag;
    if (x.J == 0) diag.error("J must be at least 1");
    if (x.means.rows() != x.arms() || x.means.cols() != x.J) {
        diag.error("means must be (K+1) x J");
        return diag;
    }
    if (x.alpha.size() != x.J) {
        diag.error("alpha must have J entries");
    } else {
        double s = 0.0;
        bool negative = false;
        for (double a : x.alpha) {
            negative |= !(a >= 0.0);
            s += a;
        }
        if (negative || std::abs(s - 1.0) > 1e-12) diag.error("alpha not on simplex");
    }
    if (x.beta.size() != x.J) {
        diag.error("beta must have J entries");
    } else {
        if (std::all_of(x.beta.begin(), x.beta.end(), [](double b) { return b == 0.0; }))
            diag.error("beta must have a nonzero entry");
        if (x.alpha.size() == x.J)
            for (std::size_t i = 0; i < x.J; ++i)
                if (x.alpha[i] == 0.0 && x.beta[i] != 0.0)
                    diag.error("subpopulation " + std::to_string(i) + " has zero frequency but nonzero importance");
    }
    if (x.family.is_gaussian() && !x.family.sigma2_matrix().empty()) {
        const auto& s = x.family.sigma2_matrix();
        if (s.rows() != x.arms() || s.cols() != x.J) diag.error("sigma2 must be (K+1) x J");
    }
    for (std::size_t a = 0; a < x.arms(); ++a)
        for (std::size_t i = 0; i < x.J; ++i) {
            const double m = x.means(a, i);
            if (!in_closed_domain(x.family.is_bernoulli() ? CellLaw::bernoulli() : CellLaw::gaussian(), m))
                diag.error("mean (" + std::to_string(a) + "," + std::to_string(i) + ") outside family domain");
            else if (x.family.is_bernoulli() && (m == 0.0 || m == 1.0))
                diag.warning("mean (" + std::to_string(a) + "," + std::to_string(i) + ") on bernoulli boundary");
        }
    if (diag.has_errors()) return diag;
    const double control = weighted_mean(x, 0);
    for (std::size_t a = 1; a <= x.K; ++a) {
        const double gap = std::abs(weighted_mean(x, a) - control);
        if (gap <= kTieTolerance)
            diag.warning("arm " + std::to_string(a) + " ties the control (instance not identifiable)");
        else if (gap < kTieWarning)
            diag.warning("arm " + std::to_string(a) + " nearly ties the control");
    }
    return diag;
}

/// Mode-specific preconditions on top of validate().
inline Diagnostics validate(const Instance& x, Mode mode) {
    Diagnostics diag = validate(x);
    if (mode == Mode::Oblivious && x.alpha.size() == x.J && x.beta.size() == x.J) {
        for (std::size_t i = 0; i < x.J; ++i)
            if (std::abs(x.alpha[i] - x.beta[i]) > 1e-12) {
                diag.error("oblivious mode requires alpha == beta");
                break;
            }
    }
    return diag;
}

/// Membership of w in the constraint set of a mode (oblivious uses the
/// agnostic product form).
inline bool is_feasible(const WeightMatrix& w, Mode mode, std::span<const double> alpha, double tol = 1e-9) {
    for (double v : w.flat())
        if (!(v >= -tol)) return false;
    if (std::abs(w.sum() - 1.0) > tol) return false;
    switch (mode) {
        case Mode::Active: return true;
        case Mode::Proportional:
            for (std::size_t i = 0; i < w.cols(); ++i)
                if (std::abs(w.col_sum(i) - alpha[i]) > tol) return false;
            return true;
        case Mode::Agnostic:
        case Mode::Oblivious:
            for (std::size_t a = 0; a < w.rows(); ++a) {
                const double u = w.row_sum(a);
                for (std::size_t i = 0; i < w.cols(); ++i)
                    if (std::abs(w(a, i) - u * alpha[i]) > tol) return false;
            }
            return true;
    }
    return false;
}

/// Arm marginals sum_i w(a, i).
inline std::vector<double> arm_marginals(const WeightMatrix& w) {
    std::vector<double> out(w.rows());
    for (std::size_t a = 0; a < w.rows(); ++a) out[a] = w.row_sum(a);
    return out;
}

}  // namespace abcs
