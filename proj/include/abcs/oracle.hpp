#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "abcs/adahedge.hpp"
#include "abcs/errors.hpp"
#include "abcs/glr.hpp"
#include "abcs/matrix.hpp"
#include "abcs/model.hpp"

namespace abcs {

/// Characteristic times above this are reported as practically infinite.
inline constexpr double kTstarCap = 1e12;

struct OracleResult {
    Mode mode = Mode::Active;
    double tstar = 0.0;  // 1 / lower_value
    WeightMatrix wstar;
    double lower_value = 0.0;
    double upper_value = 0.0;
    int iterations = 0;
    bool converged = false;

    double relative_gap() const {
        if (!(lower_value > 0.0)) return std::numeric_limits<double>::infinity();
        return (upper_value - lower_value) / lower_value;
    }
    bool practically_infinite() const { return !(tstar <= kTstarCap); }
};

struct OracleOptions {
    double tol = 1e-4;
    int max_iters = 50000;
    /// AdaHedge rounds before switching to the barrier refinement; 0 disables the switch.
    int warmup_iters = 2000;
    /// Feeds one random loss vector before the first round, to start the
    /// learners from a different point.
    std::optional<std::uint64_t> perturb_seed;
};

inline OracleResult finish_oracle(OracleResult r) {
    r.tstar = r.lower_value > 0.0 ? 1.0 / r.lower_value : std::numeric_limits<double>::infinity();
    if (r.tstar > kTstarCap) r.tstar = std::numeric_limits<double>::infinity();
    return r;
}

/// max over the constraint set of <w, g>, which is linear so attained at a vertex.
inline double max_linear(const Matrix& g, Mode mode, std::span<const double> alpha) {
    double best = -std::numeric_limits<double>::infinity();
    switch (mode) {
        case Mode::Active:
            for (double v : g.flat()) best = std::max(best, v);
            return best;
        case Mode::Proportional: {
            double s = 0.0;
            for (std::size_t i = 0; i < g.cols(); ++i) {
                double m = -std::numeric_limits<double>::infinity();
                for (std::size_t a = 0; a < g.rows(); ++a) m = std::max(m, g(a, i));
                s += alpha[i] * m;
            }
            return s;
        }
        case Mode::Agnostic:
        case Mode::Oblivious:
            for (std::size_t a = 0; a < g.rows(); ++a) {
                double s = 0.0;
                for (std::size_t i = 0; i < g.cols(); ++i) s += alpha[i] * g(a, i);
                best = std::max(best, s);
            }
            return best;
    }
    return best;
}

/// Learners for one constraint set, mapping their proposals to a feasible
/// weight matrix and the GLR supergradient back to per-learner losses.
class ModeLearner {
public:
    ModeLearner(std::size_t arms, std::size_t subpops, Mode mode, std::vector<double> alpha)
        : arms_(arms), subpops_(subpops), mode_(mode), alpha_(std::move(alpha)) {
        switch (mode_) {
            case Mode::Active: learners_.emplace_back(arms_ * subpops_); break;
            case Mode::Proportional:
                for (std::size_t j = 0; j < subpops_; ++j) learners_.emplace_back(arms_);
                break;
            case Mode::Agnostic:
            case Mode::Oblivious: learners_.emplace_back(arms_); break;
        }
        loss_.resize(arms_ * subpops_);
    }

    Mode mode() const noexcept { return mode_; }

    WeightMatrix propose() const {
        WeightMatrix w(arms_, subpops_);
        switch (mode_) {
            case Mode::Active: {
                auto p = learners_[0].propose();
                std::copy(p.begin(), p.end(), w.flat().begin());
                break;
            }
            case Mode::Proportional:
                for (std::size_t j = 0; j < subpops_; ++j) {
                    auto p = learners_[j].propose();
                    for (std::size_t a = 0; a < arms_; ++a) w(a, j) = alpha_[j] * p[a];
                }
                break;
            case Mode::Agnostic:
            case Mode::Oblivious: {
                auto p = learners_[0].propose();
                for (std::size_t a = 0; a < arms_; ++a)
                    for (std::size_t j = 0; j < subpops_; ++j) w(a, j) = p[a] * alpha_[j];
                break;
            }
        }
        return w;
    }

    /// Conditional arm distribution of learner j (proportional mode) or the
    /// single learner's proposal.
    std::span<const double> learner_weights(std::size_t j = 0) const { return learners_.at(j).propose(); }

    /// Sends the loss -gradient (chain rule applied per mode).
    void update(const Matrix& gradient) {
        switch (mode_) {
            case Mode::Active:
                for (std::size_t k = 0; k < gradient.size(); ++k) loss_[k] = -gradient.flat()[k];
                learners_[0].update(std::span<const double>(loss_.data(), gradient.size()));
                break;
            case Mode::Proportional:
                for (std::size_t j = 0; j < subpops_; ++j) {
                    for (std::size_t a = 0; a < arms_; ++a) loss_[a] = -alpha_[j] * gradient(a, j);
                    learners_[j].update(std::span<const double>(loss_.data(), arms_));
                }
                break;
            case Mode::Agnostic:
            case Mode::Oblivious:
                for (std::size_t a = 0; a < arms_; ++a) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < subpops_; ++j) s += alpha_[j] * gradient(a, j);
                    loss_[a] = -s;
                }
                learners_[0].update(std::span<const double>(loss_.data(), arms_));
                break;
        }
    }

private:
    std::size_t arms_, subpops_;
    Mode mode_;
    std::vector<double> alpha_;
    std::vector<AdaHedge> learners_;
    std::vector<double> loss_;
};

namespace detail {

/// Free variables of a constraint set, the linear map to weights and the
/// equality rows A v = c. Active: every cell, summing to 1. Proportional:
/// cells of subpopulations with alpha_i > 0, columns summing to alpha_i.
/// Agnostic: arm marginals u, with w(a, i) = u_a alpha_i.
class WeightSpace {
public:
    WeightSpace(std::size_t arms, std::size_t J, Mode mode, std::span<const double> alpha)
        : arms_(arms), J_(J), mode_(mode), alpha_(alpha.begin(), alpha.end()), index_(arms * J, -1) {
        if (mode_ == Mode::Agnostic) {
            n_ = arms_;
        } else {
            for (std::size_t a = 0; a < arms_; ++a)
                for (std::size_t i = 0; i < J_; ++i)
                    if (mode_ == Mode::Active || alpha_[i] > 0.0) index_[a * J_ + i] = static_cast<long>(n_++);
        }
        if (mode_ != Mode::Proportional) {
            A_ = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(n_));
            c_ = Eigen::VectorXd::Ones(1);
            return;
        }
        std::vector<std::size_t> cols;
        for (std::size_t i = 0; i < J_; ++i)
            if (alpha_[i] > 0.0) cols.push_back(i);
        A_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(n_));
        c_ = Eigen::VectorXd(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t r = 0; r < cols.size(); ++r) {
            c_(r) = alpha_[cols[r]];
            for (std::size_t a = 0; a < arms_; ++a) A_(r, index_[a * J_ + cols[r]]) = 1.0;
        }
    }

    std::size_t size() const { return n_; }
    const Eigen::MatrixXd& equalities() const { return A_; }

    /// Calls f(k, coefficient) for each variable feeding cell (a, i).
    template <class F>
    void for_cell(std::size_t a, std::size_t i, F&& f) const {
        if (mode_ == Mode::Agnostic) {
            if (alpha_[i] != 0.0) f(a, alpha_[i]);
        } else if (index_[a * J_ + i] >= 0) {
            f(static_cast<std::size_t>(index_[a * J_ + i]), 1.0);
        }
    }

    WeightMatrix weights(const Eigen::VectorXd& v) const {
        WeightMatrix w(arms_, J_);
        for (std::size_t a = 0; a < arms_; ++a)
            for (std::size_t i = 0; i < J_; ++i) for_cell(a, i, [&](std::size_t k, double c) { w(a, i) += c * v(k); });
        return w;
    }

    Eigen::VectorXd variables(const WeightMatrix& w) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        for (std::size_t a = 0; a < arms_; ++a)
            for (std::size_t i = 0; i < J_; ++i) {
                if (mode_ == Mode::Agnostic)
                    v(a) += w(a, i);
                else if (index_[a * J_ + i] >= 0)
                    v(index_[a * J_ + i]) = w(a, i);
            }
        return v;
    }

    /// The point spreading weight evenly over the arms.
    Eigen::VectorXd center() const {
        WeightMatrix w(arms_, J_);
        for (std::size_t a = 0; a < arms_; ++a)
            for (std::size_t i = 0; i < J_; ++i) w(a, i) = mode_ == Mode::Active ? 1.0 / (arms_ * J_) : alpha_[i] / arms_;
        return variables(w);
    }

    /// Gradient in v of a function with gradient g in w.
    Eigen::VectorXd pull(const Matrix& g) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        for (std::size_t a = 0; a < arms_; ++a)
            for (std::size_t i = 0; i < J_; ++i) for_cell(a, i, [&](std::size_t k, double c) { out(k) += c * g(a, i); });
        return out;
    }

    /// Adds P^T H P for a pair Hessian H on the cells of arms 0 and b.
    void add_pair_hessian(Eigen::MatrixXd& out, const Matrix& H, std::size_t b, double scale) const {
        const std::size_t m = 2 * J_;
        for (std::size_t c = 0; c < m; ++c)
            for (std::size_t e = 0; e < m; ++e) {
                const double h = H(c, e) * scale;
                if (h == 0.0) continue;
                for_cell(c < J_ ? 0 : b, c % J_, [&](std::size_t k, double ck) {
                    for_cell(e < J_ ? 0 : b, e % J_, [&](std::size_t l, double cl) { out(k, l) += ck * cl * h; });
                });
            }
    }

private:
    std::size_t arms_, J_;
    Mode mode_;
    std::vector<double> alpha_;
    std::vector<long> index_;
    std::size_t n_ = 0;
    Eigen::MatrixXd A_;
    Eigen::VectorXd c_;
};

struct SaddleState {
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    WeightMatrix wbest;
    int iterations = 0;
};

/// Log-barrier path following on max t s.t. t <= F_b(v) for every pair b,
/// v in C, with Newton steps on the exact pair Hessians. Each centred point
/// gives the lower bound min_b F_b, and its pair multipliers
/// q_b = mu / (F_b - t) give the upper bound max_C <sum_b q_b g_b, w>, which
/// holds for any q because every pair value lies below its supergradient.
/// Returns true once the relative gap is within tol.
inline bool barrier_refine(const Instance& x, Mode mode, SaddleState& st, const OracleOptions& opt) {
    const WeightSpace space(x.arms(), x.J, mode, x.alpha);
    const std::size_t n = space.size(), K = x.K;
    const auto N = static_cast<Eigen::Index>(n + 1);
    const Eigen::MatrixXd& A = space.equalities();
    const Eigen::Index m = A.rows();
    const double scale = st.lower;

    Eigen::VectorXd v = 0.99 * space.variables(st.wbest) + 0.01 * space.center();
    std::vector<PairTransport> pts;
    std::vector<double> F(K);
    auto evaluate = [&](const Eigen::VectorXd& y) {
        pts = pair_transports(space.weights(y), x.means, x);
        for (std::size_t b = 0; b < K; ++b) F[b] = pts[b].value / scale;
    };
    auto barrier = [&](const Eigen::VectorXd& y, double t, double mu) {
        double f = -t;
        for (std::size_t b = 0; b < K; ++b) {
            if (!(F[b] > t)) return std::numeric_limits<double>::infinity();
            f -= mu * std::log(F[b] - t);
        }
        for (Eigen::Index k = 0; k < y.size(); ++k) f -= mu * std::log(y(k));
        return f;
    };

    evaluate(v);
    double t = 0.95 * *std::min_element(F.begin(), F.end());
    double mu = 1e-2;
    for (int outer = 0; outer < 30; ++outer) {
        for (int inner = 0; inner < 100; ++inner) {
            if (st.iterations >= opt.max_iters) return false;
            ++st.iterations;
            const WeightMatrix w = space.weights(v);
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(N);
            Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(N, N);
            Eigen::MatrixXd hv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t b = 0; b < K; ++b) {
                const double sl = F[b] - t;
                const Eigen::VectorXd g = space.pull(pair_supergradient(x.means, x, b + 1, pts[b])) / scale;
                hv.setZero();
                space.add_pair_hessian(hv, pair_hessian(w, x.means, x, b + 1, pts[b]), b + 1, 1.0 / scale);
                grad.head(n) -= mu / sl * g;
                grad(n) += mu / sl;
                hess.topLeftCorner(n, n) += mu / (sl * sl) * g * g.transpose() - mu / sl * hv;
                hess.col(n).head(n) -= mu / (sl * sl) * g;
                hess.row(n).head(n) -= mu / (sl * sl) * g.transpose();
                hess(n, n) += mu / (sl * sl);
            }
            grad(n) -= 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                grad(k) -= mu / v(k);
                hess(k, k) += mu / (v(k) * v(k));
            }
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(N + m, N + m);
            kkt.topLeftCorner(N, N) = hess;
            kkt.block(N, 0, m, n) = A;
            kkt.block(0, N, n, m) = A.transpose();
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + m);
            rhs.head(N) = -grad;
            const Eigen::VectorXd dz = kkt.partialPivLu().solve(rhs).head(N);
            const double slope = grad.dot(dz);
            if (!std::isfinite(slope) || -slope < 1e-12) break;

            const double f0 = barrier(v, t, mu);
            double step = 1.0;
            bool moved = false;
            for (; step > 1e-12; step *= 0.5) {
                const Eigen::VectorXd vn = v + step * dz.head(n);
                if ((vn.array() <= 0.0).any()) continue;
                evaluate(vn);
                const double tn = t + step * dz(n);
                if (barrier(vn, tn, mu) <= f0 + 0.25 * step * slope) {
                    v = vn;
                    t = tn;
                    moved = true;
                    break;
                }
            }
            if (!moved) {
                evaluate(v);
                break;
            }
        }

        Matrix combo(x.arms(), x.J);
        double qsum = 0.0, value = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < K; ++b) {
            const double q = mu / (F[b] - t);
            combo += pair_supergradient(x.means, x, b + 1, pts[b]) * q;
            qsum += q;
            value = std::min(value, pts[b].value);
        }
        if (qsum > 0.0) st.upper = std::min(st.upper, max_linear(combo * (1.0 / qsum), mode, x.alpha));
        if (value > st.lower) {
            st.lower = value;
            st.wbest = space.weights(v);
        }
        if ((st.upper - st.lower) / st.lower <= opt.tol) return true;
        mu *= 0.1;
    }
    return false;
}

}  // namespace detail

/// AdaHedge-versus-best-response saddle point iteration for
/// T*(mu)^{-1} = max_{w in C} Lambda(w, mu).
inline OracleResult solve_saddle(const Instance& x, Mode mode, const OracleOptions& opt = {}) {
    if (mode == Mode::Oblivious) throw UnsupportedError("solve_saddle: use oblivious_oracle for oblivious mode");
    const std::size_t arms = x.arms(), J = x.J;
    OracleResult res;
    res.mode = mode;
    if (x.K == 0) {
        res.wstar = Matrix(arms, J);
        for (std::size_t i = 0; i < J; ++i) res.wstar(0, i) = x.alpha[i];
        res.lower_value = res.upper_value = std::numeric_limits<double>::infinity();
        res.converged = true;
        res.tstar = 0.0;
        return res;
    }
    ModeLearner learner(arms, J, mode, x.alpha);
    if (opt.perturb_seed) {
        std::mt19937_64 rng(*opt.perturb_seed);
        // scale the kick to the loss magnitudes seen at the uniform start
        const auto probe = glr_value(learner.propose(), x);
        double scale = 0.0;
        for (double v : probe.subgradient.flat()) scale = std::max(scale, v);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Matrix kick(arms, J);
        for (double& v : kick.flat()) v = scale * u(rng);
        learner.update(kick);
    }

    Matrix wsum(arms, J), gsum(arms, J);
    double best_single = std::numeric_limits<double>::infinity();
    double lower = 0.0, upper = std::numeric_limits<double>::infinity();
    WeightMatrix wbest;
    const int hedge_rounds = opt.warmup_iters > 0 ? std::min(opt.warmup_iters, opt.max_iters) : opt.max_iters;
    int n = 0;
    for (n = 1; n <= hedge_rounds; ++n) {
        const WeightMatrix w = learner.propose();
        const auto br = glr_value(w, x);
        learner.update(br.subgradient);
        wsum += w;
        gsum += br.subgradient;
        best_single = std::min(best_single, max_linear(br.subgradient, mode, x.alpha));

        if (n % 10 == 0 || n == hedge_rounds) {
            WeightMatrix wbar = wsum * (1.0 / n);
            const double v = glr_value(wbar, x).value;
            if (v > lower) {
                lower = v;
                wbest = std::move(wbar);
            }
            upper = std::min({upper, best_single, max_linear(gsum * (1.0 / n), mode, x.alpha)});
            if (lower > 0.0 && (upper - lower) / lower <= opt.tol) {
                res.converged = true;
                break;
            }
        }
    }
    res.iterations = std::min(n, hedge_rounds);

    // Barrier refinement from the averaged learner iterate.
    if (!res.converged && lower > 0.0) {
        detail::SaddleState st{lower, upper, std::move(wbest), res.iterations};
        res.converged = detail::barrier_refine(x, mode, st, opt);
        lower = st.lower;
        upper = st.upper;
        wbest = std::move(st.wbest);
        res.iterations = st.iterations;
    }
    res.lower_value = lower;
    res.upper_value = upper;
    res.wstar = std::move(wbest);
    return finish_oracle(std::move(res));
}

/// Closed-form characteristic time for K = 1 with gaussian cells of any
/// per-cell variance.
inline OracleResult tstar_ab_gaussian(const Instance& x, Mode mode) {
    if (!x.family.is_gaussian()) throw UnsupportedError("tstar_ab_gaussian requires the gaussian family");
    if (x.K != 1) throw UnsupportedError("tstar_ab_gaussian requires K = 1");
    const std::size_t J = x.J;
    const double gap = weighted_mean(x, 0) - weighted_mean(x, 1);
    const double g2 = gap * gap;
    OracleResult res;
    res.mode = mode;
    res.wstar = Matrix(2, J);
    double tstar = 0.0;
    auto sd = [&](std::size_t a, std::size_t i) { return std::sqrt(x.family.sigma2(a, i)); };
    switch (mode) {
        case Mode::Agnostic:
        case Mode::Oblivious: {
            double s[2] = {0.0, 0.0};
            for (std::size_t a = 0; a < 2; ++a) {
                for (std::size_t i = 0; i < J; ++i)
                    if (x.beta[i] != 0.0) s[a] += x.beta[i] * x.beta[i] * x.family.sigma2(a, i) / x.alpha[i];
                s[a] = std::sqrt(s[a]);
            }
            tstar = 2.0 * (s[0] + s[1]) * (s[0] + s[1]) / g2;
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t i = 0; i < J; ++i) res.wstar(a, i) = x.alpha[i] * s[a] / (s[0] + s[1]);
            break;
        }
        case Mode::Proportional: {
            double s = 0.0;
            for (std::size_t i = 0; i < J; ++i) {
                const double p = sd(0, i) + sd(1, i);
                if (x.beta[i] != 0.0) s += x.beta[i] * x.beta[i] / x.alpha[i] * p * p;
                for (std::size_t a = 0; a < 2; ++a) res.wstar(a, i) = x.alpha[i] * sd(a, i) / p;
            }
            tstar = 2.0 * s / g2;
            break;
        }
        case Mode::Active: {
            double s = 0.0;
            for (std::size_t i = 0; i < J; ++i) s += std::abs(x.beta[i]) * (sd(0, i) + sd(1, i));
            tstar = 2.0 * s * s / g2;
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t i = 0; i < J; ++i) res.wstar(a, i) = std::abs(x.beta[i]) * sd(a, i) / s;
            break;
        }
    }
    res.lower_value = res.upper_value = g2 > 0.0 ? 1.0 / tstar : 0.0;
    res.converged = true;
    return finish_oracle(std::move(res));
}

/// Solves u* = argmax_{u in simplex} min_b gap_b^2 / (1/u_0 + 1/u_b) by
/// equalizing the pairwise terms: with x_b = u_b / u_0, every term equals
/// y u_0 when x_b = y / (gap_b^2 - y), and optimality requires
/// sum_b x_b^2 = 1 (the control plays the role of the best arm).
inline std::vector<double> equalized_weights(std::span<const double> gap_squares, double tol = 1e-12) {
    const std::size_t K = gap_squares.size();
    std::vector<double> u(K + 1, 0.0);
    double gmin = std::numeric_limits<double>::infinity();
    for (double g : gap_squares) gmin = std::min(gmin, g);
    auto ratios = [&](double y, std::vector<double>& xs) {
        double s = 0.0;
        for (std::size_t b = 0; b < K; ++b) {
            xs[b] = y / (gap_squares[b] - y);
            s += xs[b] * xs[b];
        }
        return s;
    };
    std::vector<double> xs(K);
    double lo = 0.0, hi = gmin;
    for (int it = 0; it < 400 && (hi - lo) > tol * gmin; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ratios(mid, xs) < 1.0)
            lo = mid;
        else
            hi = mid;
    }
    ratios(0.5 * (lo + hi), xs);
    double total = 1.0;
    for (double v : xs) total += v;
    u[0] = 1.0 / total;
    for (std::size_t b = 0; b < K; ++b) u[b + 1] = xs[b] / total;
    return u;
}

/// Oracle for gaussian instances with one common variance: arm weights
/// from the equalization above, spread over subpopulations as |beta_i|.
/// Agnostic and proportional modes additionally need alpha == beta.
inline OracleResult homoscedastic_oracle(const Instance& x, Mode mode) {
    if (!x.family.is_gaussian() || !x.family.homoscedastic())
        throw UnsupportedError("homoscedastic_oracle requires gaussian cells with a common variance");
    if (mode == Mode::Oblivious) throw UnsupportedError("homoscedastic_oracle: oblivious mode not covered");
    if (mode != Mode::Active)
        for (std::size_t i = 0; i < x.J; ++i)
            if (std::abs(x.alpha[i] - x.beta[i]) > 1e-12)
                throw UnsupportedError("homoscedastic_oracle: passive modes need alpha == beta");
    OracleResult res;
    res.mode = mode;
    const auto g = gaps(x);
    std::vector<double> g2(g.size());
    for (std::size_t b = 0; b < g.size(); ++b) g2[b] = g[b] * g[b];
    const auto u = x.K == 0 ? std::vector<double>{1.0} : equalized_weights(g2);
    double babs = 0.0;
    for (double b : x.beta) babs += std::abs(b);
    res.wstar = Matrix(x.arms(), x.J);
    for (std::size_t a = 0; a < x.arms(); ++a)
        for (std::size_t i = 0; i < x.J; ++i) res.wstar(a, i) = u[a] * std::abs(x.beta[i]) / babs;
    const double value = x.K == 0 ? std::numeric_limits<double>::infinity() : glr_value(res.wstar, x).value;
    res.lower_value = res.upper_value = value;
    res.converged = true;
    return finish_oracle(std::move(res));
}

/// Oblivious-mode oracle for Bernoulli with alpha == beta: the arms become
/// alpha-mixtures, which are Bernoulli, and the single-population problem is
/// solved. Weights are reported in product form w(a, i) = u_a alpha_i.
inline OracleResult oblivious_oracle(const Instance& x, const OracleOptions& opt = {}) {
    if (!x.family.is_bernoulli()) throw UnsupportedError("oblivious_oracle supports the bernoulli family only");
    for (std::size_t i = 0; i < x.J; ++i)
        if (std::abs(x.alpha[i] - x.beta[i]) > 1e-12) throw ConfigError("oblivious mode requires alpha == beta");
    const Instance collapsed = collapse_mixture(x);
    OracleResult r = solve_saddle(collapsed, Mode::Agnostic, opt);
    OracleResult out = r;
    out.mode = Mode::Oblivious;
    out.wstar = Matrix(x.arms(), x.J);
    for (std::size_t a = 0; a < x.arms(); ++a)
        for (std::size_t i = 0; i < x.J; ++i)
            out.wstar(a, i) = (r.wstar.empty() ? 0.0 : r.wstar(a, 0)) * x.alpha[i];
    return out;
}

/// Dispatches to the iterative solver or the oblivious reduction.
inline OracleResult solve_oracle(const Instance& x, Mode mode, const OracleOptions& opt = {}) {
    if (mode == Mode::Oblivious) return oblivious_oracle(x, opt);
    return solve_saddle(x, mode, opt);
}

}  // namespace abcs
