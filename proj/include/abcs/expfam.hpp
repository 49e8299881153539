#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>

#include "abcs/errors.hpp"
#include "abcs/matrix.hpp"

namespace abcs {

enum class FamilyKind { Bernoulli, Gaussian };

/// Interior clamp applied to Bernoulli means produced by solvers.
inline constexpr double kInteriorEps = 1e-12;

/// Law of a single (arm, subpopulation) cell: the family plus, for the
/// Gaussian, its known variance.
struct CellLaw {
    FamilyKind kind = FamilyKind::Bernoulli;
    double sigma2 = 1.0;

    static CellLaw bernoulli() { return {FamilyKind::Bernoulli, 1.0}; }
    static CellLaw gaussian(double sigma2 = 1.0) {
        if (!(sigma2 > 0.0)) throw DomainError("gaussian variance must be positive");
        return {FamilyKind::Gaussian, sigma2};
    }
};

/// Family shared by every cell of an instance. Gaussian variances are per
/// cell; an empty variance matrix means unit variance everywhere.
class Family {
public:
    Family() = default;

    static Family bernoulli() { return Family(FamilyKind::Bernoulli, {}); }
    static Family gaussian(double sigma2 = 1.0) {
        if (!(sigma2 > 0.0)) throw DomainError("gaussian variance must be positive");
        Family f(FamilyKind::Gaussian, {});
        f.common_sigma2_ = sigma2;
        return f;
    }
    static Family gaussian(Matrix sigma2) {
        for (double s : sigma2.flat())
            if (!(s > 0.0)) throw DomainError("gaussian variance must be positive");
        return Family(FamilyKind::Gaussian, std::move(sigma2));
    }

    FamilyKind kind() const noexcept { return kind_; }
    bool is_gaussian() const noexcept { return kind_ == FamilyKind::Gaussian; }
    bool is_bernoulli() const noexcept { return kind_ == FamilyKind::Bernoulli; }

    /// True when every cell shares one variance (always true for Bernoulli
    /// in the sense that there is no free variance parameter).
    bool homoscedastic() const {
        if (sigma2_.empty()) return true;
        for (double s : sigma2_.flat())
            if (s != sigma2_.flat()[0]) return false;
        return true;
    }

    double sigma2(std::size_t arm, std::size_t sub) const {
        if (sigma2_.empty()) return common_sigma2_;
        return sigma2_(arm, sub);
    }
    const Matrix& sigma2_matrix() const noexcept { return sigma2_; }

    CellLaw cell(std::size_t arm, std::size_t sub) const {
        if (kind_ == FamilyKind::Bernoulli) return CellLaw::bernoulli();
        return {FamilyKind::Gaussian, sigma2(arm, sub)};
    }

    std::string name() const { return kind_ == FamilyKind::Bernoulli ? "bernoulli" : "gaussian"; }

private:
    Family(FamilyKind k, Matrix s) : kind_(k), sigma2_(std::move(s)) {}

    FamilyKind kind_ = FamilyKind::Bernoulli;
    Matrix sigma2_;
    double common_sigma2_ = 1.0;
};

inline bool in_open_domain(const CellLaw& law, double x) {
    if (law.kind == FamilyKind::Bernoulli) return x > 0.0 && x < 1.0;
    return std::isfinite(x);
}

inline bool in_closed_domain(const CellLaw& law, double x) {
    if (law.kind == FamilyKind::Bernoulli) return x >= 0.0 && x <= 1.0;
    return std::isfinite(x);
}

/// Projects a solver-produced mean into [eps, 1-eps] for Bernoulli.
inline double clamp_interior(const CellLaw& law, double x) {
    if (law.kind == FamilyKind::Bernoulli) return std::clamp(x, kInteriorEps, 1.0 - kInteriorEps);
    return x;
}

/// Variance function V(mean).
inline double variance(const CellLaw& law, double mean) {
    if (law.kind == FamilyKind::Bernoulli) return mean * (1.0 - mean);
    return law.sigma2;
}

/// d(mu, lambda): KL divergence between the members with means mu and lambda.
/// mu may sit on the closed Bernoulli boundary; lambda must be interior.
inline double kl(const CellLaw& law, double mu, double lambda) {
    if (!in_open_domain(law, lambda)) throw DomainError("kl: lambda outside open mean domain");
    if (law.kind == FamilyKind::Gaussian) {
        const double d = mu - lambda;
        return d * d / (2.0 * law.sigma2);
    }
    if (!in_closed_domain(law, mu)) throw DomainError("kl: mu outside mean domain");
    double out = 0.0;
    if (mu > 0.0) out += mu * std::log(mu / lambda);
    if (mu < 1.0) out += (1.0 - mu) * std::log((1.0 - mu) / (1.0 - lambda));
    return std::max(out, 0.0);
}

/// Derivative of d(mu, lambda) in its second argument: (lambda - mu) / V(lambda).
inline double kl_deriv2(const CellLaw& law, double mu, double lambda) {
    if (!in_open_domain(law, lambda)) throw DomainError("kl_deriv2: lambda outside open mean domain");
    return (lambda - mu) / variance(law, lambda);
}

/// Bernoulli kl(p, q) on probabilities, used for the kl(delta, 1-delta) bound.
inline double kl_bernoulli(double p, double q) { return kl(CellLaw::bernoulli(), p, q); }

/// One observation with mean `mu` from the cell law.
template <class Rng>
double sample(const CellLaw& law, double mu, Rng& rng) {
    if (law.kind == FamilyKind::Bernoulli) {
        if (!in_closed_domain(law, mu)) throw DomainError("sample: bernoulli mean outside [0,1]");
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return u(rng) < mu ? 1.0 : 0.0;
    }
    std::normal_distribution<double> n(mu, std::sqrt(law.sigma2));
    return n(rng);
}

}  // namespace abcs
