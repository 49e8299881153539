#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace abcs {

/// AdaHedge (de Rooij, van Erven, Grunwald, Koolen 2014): exponential
/// weights whose learning rate ln(d)/Delta is driven by the cumulative
/// mixability gap Delta. No horizon, range or rate parameters.
class AdaHedge {
public:
    explicit AdaHedge(std::size_t dimension)
        : cumulative_loss_(dimension, 0.0), weights_(dimension, 1.0 / static_cast<double>(dimension)) {
        if (dimension == 0) throw std::invalid_argument("AdaHedge needs at least one expert");
    }

    std::size_t dimension() const noexcept { return cumulative_loss_.size(); }
    double mixability_gap() const noexcept { return gap_; }
    std::span<const double> cumulative_loss() const noexcept { return cumulative_loss_; }

    /// Current learning rate; +inf before any mixability gap accrued.
    double learning_rate() const {
        if (gap_ <= 0.0) return std::numeric_limits<double>::infinity();
        return std::log(static_cast<double>(dimension())) / gap_;
    }

    /// Weights for the next round.
    std::span<const double> propose() const noexcept { return weights_; }

    void update(std::span<const double> loss) {
        if (loss.size() != dimension()) throw std::invalid_argument("loss dimension mismatch");
        for (double l : loss)
            if (!std::isfinite(l)) throw std::invalid_argument("non-finite loss");

        const double eta = learning_rate();
        double expected = 0.0;
        for (std::size_t k = 0; k < loss.size(); ++k) expected += weights_[k] * loss[k];

        double mix;
        if (std::isinf(eta)) {
            mix = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < loss.size(); ++k)
                if (weights_[k] > 0.0) mix = std::min(mix, loss[k]);
        } else {
            double lmin = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < loss.size(); ++k)
                if (weights_[k] > 0.0) lmin = std::min(lmin, loss[k]);
            double z = 0.0;
            for (std::size_t k = 0; k < loss.size(); ++k)
                if (weights_[k] > 0.0) z += weights_[k] * std::exp(-eta * (loss[k] - lmin));
            mix = lmin - std::log(z) / eta;
        }
        gap_ += std::max(0.0, expected - mix);
        for (std::size_t k = 0; k < loss.size(); ++k) cumulative_loss_[k] += loss[k];
        refresh();
    }

private:
    void refresh() {
        const double eta = learning_rate();
        const double lmin = *std::min_element(cumulative_loss_.begin(), cumulative_loss_.end());
        if (std::isinf(eta)) {
            // limit of exponential weights: uniform over the leaders
            std::size_t leaders = 0;
            for (double l : cumulative_loss_) leaders += (l == lmin);
            for (std::size_t k = 0; k < weights_.size(); ++k)
                weights_[k] = cumulative_loss_[k] == lmin ? 1.0 / static_cast<double>(leaders) : 0.0;
            return;
        }
        double z = 0.0;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            weights_[k] = std::exp(-eta * (cumulative_loss_[k] - lmin));
            z += weights_[k];
        }
        for (double& w : weights_) w /= z;
    }

    std::vector<double> cumulative_loss_;
    std::vector<double> weights_;
    double gap_ = 0.0;
};

}  // namespace abcs
