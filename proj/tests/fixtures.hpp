#pragma once

#include <random>
#include <vector>

#include "abcs/model.hpp"

namespace fixtures {

/// Click-through rates of a three-option, four-season A/B/n test, with
/// season frequencies used as both alpha and beta.
inline abcs::Instance booking_instance() {
    abcs::Instance x;
    x.K = 2;
    x.J = 4;
    x.family = abcs::Family::bernoulli();
    x.means = abcs::Matrix::from_rows({{0.0296, 0.0372, 0.0588, 0.0620},
                                       {0.0300, 0.0373, 0.0596, 0.0626},
                                       {0.0295, 0.0373, 0.0591, 0.0630}});
    x.alpha = {0.1958, 0.2950, 0.2813, 0.2279};
    x.beta = x.alpha;
    return x;
}

/// Three arms, three subpopulations, uniform importance.
inline abcs::Instance boxplot_instance() {
    abcs::Instance x;
    x.K = 2;
    x.J = 3;
    x.family = abcs::Family::bernoulli();
    x.means = abcs::Matrix::from_rows({{0.1, 0.4, 0.3}, {0.2, 0.5, 0.2}, {0.5, 0.1, 0.1}});
    x.alpha = {0.4, 0.5, 0.1};
    x.beta = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    return x;
}

inline std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng, double floor = 0.05) {
    std::uniform_real_distribution<double> u(floor, 1.0);
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) s += (x = u(rng));
    for (double& x : v) x /= s;
    return v;
}

inline abcs::Instance random_bernoulli(std::size_t K, std::size_t J, std::mt19937_64& rng, double lo = 0.05,
                                       double hi = 0.95) {
    abcs::Instance x;
    x.K = K;
    x.J = J;
    x.family = abcs::Family::bernoulli();
    std::uniform_real_distribution<double> u(lo, hi);
    do {
        x.means = abcs::Matrix(K + 1, J);
        for (double& m : x.means.flat()) m = u(rng);
        x.alpha = random_simplex(J, rng);
        x.beta = x.alpha;
        bool near_tie = false;
        for (double g : abcs::gaps(x)) near_tie |= std::abs(g) < 0.02;
        if (!near_tie) break;
    } while (true);
    return x;
}

}  // namespace fixtures
