#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "abcs/expfam.hpp"
#include "abcs/matrix.hpp"
#include "abcs/model.hpp"

namespace abcs {

/// Minimum of sum_{a in {0,b}} sum_i w_{a,i} d(mu_{a,i}, lambda_{a,i}) subject
/// to the beta-weighted means of the two rows agreeing, with its minimizer.
struct PairTransport {
    double value = 0.0;
    std::vector<double> lambda0;
    std::vector<double> lambdab;
};

/// GLR value Lambda(w, mu) with the closest alternative and a supergradient.
struct TransportResult {
    double value = 0.0;
    std::size_t pair_arm = 0;  // b*; 0 only when K = 0
    Matrix lambda;             // 2 x J: row 0 control, row 1 arm b*
    Matrix subgradient;        // (K+1) x J
};

/// Solver controls for the scalar multiplier search.
struct TransportOptions {
    double residual_rtol = 1e-10;
    int max_iterations = 200;
    bool force_generic = false;  // skip the gaussian closed form
};

namespace detail {

/// The cell mean lambda solving w (lambda - mu) / V(lambda) = c.
inline double cell_response(const CellLaw& law, double mu, double w, double c) {
    const double s = c / w;
    if (law.kind == FamilyKind::Gaussian) return mu + s * law.sigma2;
    // s lambda^2 + (1 - s) lambda - mu = 0, root in [0, 1]
    const double b = 1.0 - s;
    const double disc = std::sqrt(std::max(0.0, b * b + 4.0 * s * mu));
    double lam;
    if (!std::isfinite(s))
        lam = s > 0.0 ? 1.0 : 0.0;
    else if (b >= 0.0)
        lam = b + disc > 0.0 ? 2.0 * mu / (b + disc) : 0.0;
    else
        lam = (disc - b) / (2.0 * s);
    return clamp_interior(law, lam);
}

/// d lambda / d c at the response above.
inline double cell_response_slope(const CellLaw& law, double mu, double w, double lam) {
    if (law.kind == FamilyKind::Gaussian) return law.sigma2 / w;
    if (lam <= kInteriorEps || lam >= 1.0 - kInteriorEps) return 0.0;  // pinned at the boundary
    const double v = lam * (1.0 - lam);
    const double curv = (lam - mu) * (lam - mu) + mu - mu * mu;  // V^2 d''(mu, lam)
    if (curv <= 0.0) return 0.0;
    return v * v / (w * curv);
}

inline double safe_kl(const CellLaw& law, double mu, double lam) {
    if (lam == mu) return 0.0;
    return kl(law, mu, lam);
}

}  // namespace detail

/// Two-point transport cost d_mid: the cheapest common location of two
/// weighted means is their weighted average.
struct MidTransport {
    double value = 0.0;
    double vstar = 0.0;
};

inline MidTransport dmid(double w0, double mu0, double wb, double mub, const CellLaw& law0, const CellLaw& lawb) {
    const double total = w0 + wb;
    if (!(total > 0.0)) return {0.0, mu0};
    const double v = (w0 * mu0 + wb * mub) / total;
    if (w0 == 0.0 || wb == 0.0) return {0.0, v};
    const double vc = clamp_interior(law0, v);
    return {w0 * detail::safe_kl(law0, mu0, vc) + wb * detail::safe_kl(lawb, mub, vc), v};
}

inline MidTransport dmid(double w0, double mu0, double wb, double mub, const CellLaw& law) {
    return dmid(w0, mu0, wb, mub, law, law);
}

/// Exact pair transport between the control (row 0) and arm `arm_b`.
/// Cells with zero weight and nonzero importance absorb the constraint at
/// zero cost, making the pair value 0.
inline PairTransport pair_transport(std::span<const double> w0, std::span<const double> mu0,
                                    std::span<const double> wb, std::span<const double> mub,
                                    std::span<const double> beta, const Family& family, std::size_t arm_b,
                                    const TransportOptions& opt = {}) {
    const std::size_t J = beta.size();
    PairTransport out;
    out.lambda0.assign(mu0.begin(), mu0.end());
    out.lambdab.assign(mub.begin(), mub.end());

    double gap = 0.0;
    std::size_t relevant = 0, last_relevant = 0;
    std::ptrdiff_t absorbing = -1;
    bool absorbing_on_control = true;
    for (std::size_t i = 0; i < J; ++i) {
        gap += beta[i] * (mu0[i] - mub[i]);
        if (beta[i] == 0.0) continue;
        ++relevant;
        last_relevant = i;
        if (absorbing < 0 && (w0[i] <= 0.0 || wb[i] <= 0.0)) {
            absorbing = static_cast<std::ptrdiff_t>(i);
            absorbing_on_control = w0[i] <= 0.0;
        }
    }
    if (gap == 0.0 || relevant == 0) return out;
    if (absorbing >= 0) {
        const auto i = static_cast<std::size_t>(absorbing);
        if (absorbing_on_control)
            out.lambda0[i] = clamp_interior(family.cell(0, i), mu0[i] - gap / beta[i]);
        else
            out.lambdab[i] = clamp_interior(family.cell(arm_b, i), mub[i] + gap / beta[i]);
        return out;
    }

    if (relevant == 1) {
        const std::size_t i = last_relevant;
        const auto m = dmid(w0[i], mu0[i], wb[i], mub[i], family.cell(0, i), family.cell(arm_b, i));
        out.lambda0[i] = out.lambdab[i] = clamp_interior(family.cell(0, i), m.vstar);
        out.value = m.value;
        return out;
    }

    if (family.is_gaussian() && !opt.force_generic) {
        double spread = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            if (beta[i] == 0.0) continue;
            spread += beta[i] * beta[i] * (family.sigma2(0, i) / w0[i] + family.sigma2(arm_b, i) / wb[i]);
        }
        const double q = gap / spread;
        for (std::size_t i = 0; i < J; ++i) {
            if (beta[i] == 0.0) continue;
            out.lambda0[i] = mu0[i] - q * beta[i] * family.sigma2(0, i) / w0[i];
            out.lambdab[i] = mub[i] + q * beta[i] * family.sigma2(arm_b, i) / wb[i];
        }
        out.value = gap * gap / (2.0 * spread);
        return out;
    }

    // Lagrangian stationarity: each lambda is an explicit function of the
    // multiplier q and the residual r(q) is strictly decreasing.
    auto fill = [&](double q) {
        double r = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            if (beta[i] == 0.0) continue;
            out.lambda0[i] = detail::cell_response(family.cell(0, i), mu0[i], w0[i], -q * beta[i]);
            out.lambdab[i] = detail::cell_response(family.cell(arm_b, i), mub[i], wb[i], q * beta[i]);
            r += beta[i] * (out.lambda0[i] - out.lambdab[i]);
        }
        return r;
    };
    auto slope = [&]() {
        double d = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            if (beta[i] == 0.0) continue;
            d -= beta[i] * beta[i] *
                 (detail::cell_response_slope(family.cell(0, i), mu0[i], w0[i], out.lambda0[i]) +
                  detail::cell_response_slope(family.cell(arm_b, i), mub[i], wb[i], out.lambdab[i]));
        }
        return d;
    };

    const double sign = gap > 0.0 ? 1.0 : -1.0;
    const double target = opt.residual_rtol * std::abs(gap);
    // start from the gaussian approximation with variances frozen at mu
    double spread = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
        if (beta[i] == 0.0) continue;
        const auto c0 = family.cell(0, i), cb = family.cell(arm_b, i);
        spread += beta[i] * beta[i] *
                  (std::max(variance(c0, clamp_interior(c0, mu0[i])), 1e-12) / w0[i] +
                   std::max(variance(cb, clamp_interior(cb, mub[i])), 1e-12) / wb[i]);
    }
    double guess = gap / spread;
    if (!std::isfinite(guess) || guess == 0.0) guess = sign * 1e-8;
    // bracket [lo, hi] in the direction of the root, r(lo) has the sign of gap
    double lo = 0.0, hi = guess;
    double rhi = fill(hi);
    int it = 0;
    while (rhi * sign > 0.0 && it < opt.max_iterations) {
        lo = hi;
        hi *= 2.0;
        rhi = fill(hi);
        ++it;
    }
    double q = hi;
    double r = rhi;
    bool bisect = false;
    while (std::abs(r) > target && it < opt.max_iterations) {
        const double d = slope();
        double next = (!bisect && d != 0.0) ? q - r / d : 0.5 * (lo + hi);
        const double a = std::min(lo, hi), b = std::max(lo, hi);
        if (!(next > a && next < b)) next = 0.5 * (lo + hi);
        q = next;
        const double previous = std::abs(r);
        r = fill(q);
        // fall back to bisection for a step when Newton stalls
        bisect = !bisect && std::abs(r) > 0.5 * previous;
        if (r * sign > 0.0)
            lo = q;
        else
            hi = q;
        if (std::abs(hi - lo) <= 1e-15 * std::abs(q)) break;
        ++it;
    }
    if (std::abs(r) > target) r = fill(q);

    double value = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
        if (beta[i] == 0.0) continue;
        value += w0[i] * detail::safe_kl(family.cell(0, i), mu0[i], out.lambda0[i]);
        value += wb[i] * detail::safe_kl(family.cell(arm_b, i), mub[i], out.lambdab[i]);
    }
    out.value = value;
    return out;
}

/// Cross-check solver: equality-constrained Newton with backtracking on the
/// full 2J-dimensional problem. Requires positive weights on relevant cells
/// and means strictly inside the domain.
inline PairTransport pair_transport_newton(std::span<const double> w0, std::span<const double> mu0,
                                           std::span<const double> wb, std::span<const double> mub,
                                           std::span<const double> beta, const Family& family, std::size_t arm_b,
                                           int max_iterations = 100) {
    const std::size_t J = beta.size();
    PairTransport out;
    out.lambda0.assign(mu0.begin(), mu0.end());
    out.lambdab.assign(mub.begin(), mub.end());
    // feasible start: both rows at their per-cell weighted average
    for (std::size_t i = 0; i < J; ++i) {
        if (beta[i] == 0.0) continue;
        double m = (w0[i] * mu0[i] + wb[i] * mub[i]) / (w0[i] + wb[i]);
        if (family.is_bernoulli()) m = std::clamp(m, 1e-9, 1.0 - 1e-9);
        out.lambda0[i] = out.lambdab[i] = m;
    }
    auto objective = [&](const std::vector<double>& l0, const std::vector<double>& lb) {
        double f = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            if (beta[i] == 0.0) continue;
            const auto c0 = family.cell(0, i), cb = family.cell(arm_b, i);
            if (!in_open_domain(c0, l0[i]) || !in_open_domain(cb, lb[i]))
                return std::numeric_limits<double>::infinity();
            f += w0[i] * detail::safe_kl(c0, mu0[i], l0[i]) + wb[i] * detail::safe_kl(cb, mub[i], lb[i]);
        }
        return f;
    };
    auto curvature = [](const CellLaw& c, double mu, double lam) {
        if (c.kind == FamilyKind::Gaussian) return 1.0 / c.sigma2;
        const double v = lam * (1.0 - lam);
        return ((lam - mu) * (lam - mu) + mu - mu * mu) / (v * v);
    };
    std::vector<double> g(2 * J), hinv(2 * J), step(2 * J), l0(J), lb(J);
    double f = objective(out.lambda0, out.lambdab);
    for (int it = 0; it < max_iterations; ++it) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            if (beta[i] == 0.0) continue;
            const auto c0 = family.cell(0, i), cb = family.cell(arm_b, i);
            g[i] = w0[i] * kl_deriv2(c0, mu0[i], out.lambda0[i]);
            g[J + i] = wb[i] * kl_deriv2(cb, mub[i], out.lambdab[i]);
            hinv[i] = 1.0 / std::max(w0[i] * curvature(c0, mu0[i], out.lambda0[i]), 1e-300);
            hinv[J + i] = 1.0 / std::max(wb[i] * curvature(cb, mub[i], out.lambdab[i]), 1e-300);
            // constraint row a = (beta, -beta)
            num += beta[i] * hinv[i] * g[i] - beta[i] * hinv[J + i] * g[J + i];
            den += beta[i] * beta[i] * (hinv[i] + hinv[J + i]);
        }
        const double nu = num / den;
        double decrement = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            if (beta[i] == 0.0) {
                step[i] = step[J + i] = 0.0;
                continue;
            }
            step[i] = -hinv[i] * (g[i] - nu * beta[i]);
            step[J + i] = -hinv[J + i] * (g[J + i] + nu * beta[i]);
            decrement += step[i] * step[i] / hinv[i] + step[J + i] * step[J + i] / hinv[J + i];
        }
        if (decrement < 1e-24) break;
        double t = 1.0;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            for (std::size_t i = 0; i < J; ++i) {
                l0[i] = out.lambda0[i] + t * step[i];
                lb[i] = out.lambdab[i] + t * step[J + i];
            }
            const double fn = objective(l0, lb);
            if (fn <= f - 0.25 * t * decrement) {
                out.lambda0 = l0;
                out.lambdab = lb;
                f = fn;
                break;
            }
        }
    }
    out.value = f;
    return out;
}

/// Lambda(w, mu) = min over arms b of the pair transport to the control.
/// Ties go to the smallest arm index. `w` may be normalized weights or raw counts.
inline TransportResult glr_value(const Matrix& w, const Matrix& means, const InstanceMeta& meta,
                                 const TransportOptions& opt = {}) {
    const std::size_t J = meta.J;
    TransportResult res;
    res.subgradient = Matrix(meta.arms(), J);
    res.lambda = Matrix(2, J);
    if (meta.K == 0) {
        res.value = std::numeric_limits<double>::infinity();
        return res;
    }
    res.value = std::numeric_limits<double>::infinity();
    PairTransport best;
    for (std::size_t b = 1; b <= meta.K; ++b) {
        auto pt = pair_transport(w.row(0), means.row(0), w.row(b), means.row(b), meta.beta, meta.family, b, opt);
        if (pt.value < res.value) {
            res.value = pt.value;
            res.pair_arm = b;
            best = std::move(pt);
        }
    }
    const std::size_t b = res.pair_arm;
    for (std::size_t i = 0; i < J; ++i) {
        res.lambda(0, i) = best.lambda0[i];
        res.lambda(1, i) = best.lambdab[i];
        const auto c0 = meta.law(0, i), cb = meta.law(b, i);
        res.subgradient(0, i) = detail::safe_kl(c0, means(0, i), clamp_interior(c0, best.lambda0[i]));
        res.subgradient(b, i) = detail::safe_kl(cb, means(b, i), clamp_interior(cb, best.lambdab[i]));
    }
    return res;
}

inline TransportResult glr_value(const Matrix& w, const Instance& x, const TransportOptions& opt = {}) {
    return glr_value(w, x.means, x, opt);
}

/// Pair transports to the control for every arm b = 1..K (index b-1).
inline std::vector<PairTransport> pair_transports(const Matrix& w, const Matrix& means, const InstanceMeta& meta,
                                                  const TransportOptions& opt = {}) {
    std::vector<PairTransport> out;
    out.reserve(meta.K);
    for (std::size_t b = 1; b <= meta.K; ++b)
        out.push_back(pair_transport(w.row(0), means.row(0), w.row(b), means.row(b), meta.beta, meta.family, b, opt));
    return out;
}

/// Cellwise divergences to the pair minimizer: a supergradient of the pair
/// value in w, and a linear upper bound on it everywhere.
inline Matrix pair_supergradient(const Matrix& means, const InstanceMeta& meta, std::size_t b, const PairTransport& pt) {
    Matrix g(meta.arms(), meta.J);
    for (std::size_t i = 0; i < meta.J; ++i) {
        const auto c0 = meta.law(0, i), cb = meta.law(b, i);
        g(0, i) = detail::safe_kl(c0, means(0, i), clamp_interior(c0, pt.lambda0[i]));
        g(b, i) = detail::safe_kl(cb, means(b, i), clamp_interior(cb, pt.lambdab[i]));
    }
    return g;
}

/// Hessian in w of the pair value, on the 2J cells (control row, then arm b)
/// with index row * J + i. Differentiating the stationarity conditions
/// w_c h_c = q s_c beta_c and the constraint gives
/// H = r r^T / D - diag(h_c^2 a_c), a_c = 1 / (w_c h'_c), r_c = s_c beta_c h_c a_c,
/// D = sum beta_c^2 a_c. Needs positive weight on every relevant cell.
inline Matrix pair_hessian(const Matrix& w, const Matrix& means, const InstanceMeta& meta, std::size_t b,
                           const PairTransport& pt) {
    const std::size_t J = meta.J;
    Matrix H(2 * J, 2 * J);
    std::vector<double> r(2 * J, 0.0), diag(2 * J, 0.0);
    double D = 0.0;
    for (std::size_t row = 0; row < 2; ++row) {
        const std::size_t arm = row == 0 ? 0 : b;
        const double s = row == 0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < J; ++i) {
            const double beta = meta.beta[i];
            if (beta == 0.0) continue;
            if (!(w(arm, i) > 0.0)) throw DomainError("pair_hessian: zero weight on a relevant cell");
            const auto law = meta.law(arm, i);
            const double lam = clamp_interior(law, row == 0 ? pt.lambda0[i] : pt.lambdab[i]);
            const double mu = means(arm, i);
            const double V = variance(law, lam);
            const double dV = law.kind == FamilyKind::Bernoulli ? 1.0 - 2.0 * lam : 0.0;
            const double h = (lam - mu) / V;
            const double h1 = 1.0 / V - (lam - mu) * dV / (V * V);
            const double a = 1.0 / (w(arm, i) * h1);
            const std::size_t c = row * J + i;
            r[c] = s * beta * h * a;
            diag[c] = h * h * a;
            D += beta * beta * a;
        }
    }
    if (!(D > 0.0)) return H;
    for (std::size_t c = 0; c < 2 * J; ++c) {
        for (std::size_t e = 0; e < 2 * J; ++e) H(c, e) = r[c] * r[e] / D;
        H(c, c) -= diag[c];
    }
    return H;
}

struct GlrStatistic {
    double lambda = 0.0;
    std::size_t pair_arm = 0;
};

/// Count-weighted GLR statistic Lambda(t). Cells with zero count contribute
/// nothing and their empirical mean is ignored.
inline GlrStatistic glr_statistic(const Matrix& counts, const Matrix& empirical_means, const InstanceMeta& meta) {
    const auto r = glr_value(counts, empirical_means, meta);
    return {r.value, r.pair_arm};
}

}  // namespace abcs
