#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abcs/errors.hpp"
#include "abcs/glr.hpp"
#include "abcs/matrix.hpp"
#include "abcs/model.hpp"
#include "abcs/oracle.hpp"

namespace abcs {

enum class PolicyKind { TrackAndStop, BestChallenger, Uniform };
enum class Phase { ForcedExploration, Tracking };
enum class Threshold { Stylized, Theory };
enum class Tracking { Direct, Cumulative };

inline std::string_view to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::TrackAndStop: return "tas";
        case PolicyKind::BestChallenger: return "bc";
        case PolicyKind::Uniform: return "uniform";
    }
    return "?";
}

inline std::string_view to_string(Phase p) { return p == Phase::ForcedExploration ? "forced" : "tracking"; }

inline PolicyKind parse_policy(std::string_view s) {
    if (s == "tas") return PolicyKind::TrackAndStop;
    if (s == "bc") return PolicyKind::BestChallenger;
    if (s == "uniform") return PolicyKind::Uniform;
    throw ConfigError("unknown policy '" + std::string(s) + "'");
}

inline Threshold parse_threshold(std::string_view s) {
    if (s == "stylized") return Threshold::Stylized;
    if (s == "theory") return Threshold::Theory;
    throw ConfigError("unknown threshold '" + std::string(s) + "'");
}

inline Tracking parse_tracking(std::string_view s) {
    if (s == "d") return Tracking::Direct;
    if (s == "c") return Tracking::Cumulative;
    throw ConfigError("unknown tracking '" + std::string(s) + "'");
}

struct PolicyConfig {
    PolicyKind kind = PolicyKind::TrackAndStop;
    Mode mode = Mode::Active;
    Threshold threshold = Threshold::Stylized;
    Tracking tracking = Tracking::Direct;
};

/// Throws ConfigError when the policy cannot run in the mode.
inline void check_compatible(const PolicyConfig& cfg, const InstanceMeta& meta) {
    if (cfg.kind == PolicyKind::BestChallenger && cfg.mode != Mode::Agnostic)
        throw ConfigError("bc runs in agnostic mode only");
    if (cfg.mode == Mode::Oblivious) {
        if (!meta.family.is_bernoulli()) throw ConfigError("oblivious mode needs a bernoulli family");
        for (std::size_t i = 0; i < meta.J; ++i)
            if (std::abs(meta.alpha[i] - meta.beta[i]) > 1e-12)
                throw ConfigError("oblivious mode requires alpha == beta");
    }
}

struct Decision {
    std::size_t arm = 0;
    std::optional<std::size_t> requested_subpopulation;  // active mode only
    Phase phase = Phase::ForcedExploration;
};

struct RiskReport {
    ArmSet recommended_set;
    double delta_hat = 1.0;
    double lambda = 0.0;
    std::uint64_t t = 0;
};

/// Smallest delta whose threshold Lambda exceeds at round t.
/// Stylized: ln((1 + ln t)/delta); theory: ln(t^2/delta) + 2.
inline double delta_hat(double lambda, std::uint64_t t, Threshold th) {
    if (!(lambda > 0.0)) return 1.0;
    const double lt = std::log(static_cast<double>(std::max<std::uint64_t>(t, 1)));
    const double log_d = th == Threshold::Stylized ? std::log1p(lt) - lambda : 2.0 * lt + 2.0 - lambda;
    if (log_d >= 0.0) return 1.0;
    return std::max(std::exp(log_d), std::numeric_limits<double>::min());
}

/// First round of the trace whose risk is at most delta.
inline std::optional<std::uint64_t> stopping_time(std::span<const RiskReport> trace, double delta) {
    for (const auto& r : trace)
        if (r.delta_hat <= delta) return r.t;
    return std::nullopt;
}

/// Sampling state of one episode. In oblivious mode the subpopulation is
/// never seen, so the state holds the single-population mixture view.
class PolicyState {
public:
    PolicyState(const InstanceMeta& meta, PolicyConfig cfg)
        : cfg_(cfg), meta_(cfg.mode == Mode::Oblivious ? mixture_meta(meta) : meta),
          learner_(meta_.arms(), meta_.J, learner_mode(cfg.mode), meta_.alpha) {
        check_compatible(cfg, meta);
        counts_ = Matrix(meta_.arms(), meta_.J);
        sums_ = Matrix(meta_.arms(), meta_.J);
        cumulative_ = Matrix(meta_.arms(), meta_.J);
        arm_totals_.assign(meta_.arms(), 0);
        sub_totals_.assign(meta_.J, 0);
    }

    const PolicyConfig& config() const noexcept { return cfg_; }
    /// Structure the policy reasons about (the mixture view in oblivious mode).
    const InstanceMeta& meta() const noexcept { return meta_; }
    std::uint64_t t() const noexcept { return t_; }
    const Matrix& counts() const noexcept { return counts_; }
    const Matrix& sums() const noexcept { return sums_; }
    std::span<const std::uint64_t> arm_totals() const noexcept { return arm_totals_; }
    std::span<const std::uint64_t> sub_totals() const noexcept { return sub_totals_; }
    const ModeLearner& learner() const noexcept { return learner_; }
    const RiskReport& last_report() const noexcept { return report_; }
    std::size_t last_pair_arm() const noexcept { return pair_arm_; }

    /// Empirical means; zero-count cells hold the domain midpoint.
    Matrix empirical_means() const {
        Matrix m(meta_.arms(), meta_.J);
        const double mid = meta_.family.is_bernoulli() ? 0.5 : 0.0;
        for (std::size_t k = 0; k < m.size(); ++k)
            m.flat()[k] = counts_.flat()[k] > 0.0 ? sums_.flat()[k] / counts_.flat()[k] : mid;
        return m;
    }

    /// Records outcome x of arm in subpopulation sub (ignored when
    /// oblivious), sends the pending learner loss and refreshes the report.
    void observe(std::size_t arm, std::optional<std::size_t> sub, double x) {
        const std::size_t i = cfg_.mode == Mode::Oblivious ? 0 : sub.value();
        ++t_;
        counts_(arm, i) += 1.0;
        sums_(arm, i) += x;
        ++arm_totals_[arm];
        ++sub_totals_[i];
        const Matrix means = empirical_means();
        if (pending_) {
            learner_.update(glr_value(*pending_, means, meta_).subgradient);
            pending_.reset();
        }
        refresh_report(means);
    }

    // Step helpers shared by the policies.
    WeightMatrix take_learner_weights() {
        WeightMatrix w = learner_.propose();
        pending_ = w;
        return w;
    }
    Matrix& cumulative() noexcept { return cumulative_; }

private:
    static InstanceMeta mixture_meta(const InstanceMeta& meta) {
        InstanceMeta m;
        m.K = meta.K;
        m.J = 1;
        m.family = Family::bernoulli();
        return m;
    }
    static Mode learner_mode(Mode m) { return m == Mode::Oblivious ? Mode::Agnostic : m; }

    void refresh_report(const Matrix& means) {
        report_.t = t_;
        report_.recommended_set = answer_set(means, meta_.beta);
        bool covered = true;
        for (std::size_t a = 0; a < meta_.arms(); ++a)
            for (std::size_t i = 0; i < meta_.J; ++i)
                if (meta_.beta[i] != 0.0 && counts_(a, i) == 0.0) covered = false;
        if (!covered) {
            report_.lambda = 0.0;
            report_.delta_hat = 1.0;
            pair_arm_ = meta_.K > 0 ? 1 : 0;
            return;
        }
        const auto s = glr_statistic(counts_, means, meta_);
        report_.lambda = s.lambda;
        report_.delta_hat = delta_hat(s.lambda, t_, cfg_.threshold);
        pair_arm_ = s.pair_arm;
    }

    PolicyConfig cfg_;
    InstanceMeta meta_;
    ModeLearner learner_;
    Matrix counts_, sums_, cumulative_;
    std::vector<std::uint64_t> arm_totals_, sub_totals_;
    std::uint64_t t_ = 0;
    std::optional<WeightMatrix> pending_;
    RiskReport report_;
    std::size_t pair_arm_ = 0;
};

namespace detail {

inline std::size_t argmin_index(std::span<const double> v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

/// Least-sampled arm among those with total at most the forcing level, if any.
inline std::optional<std::size_t> forced_arm(std::span<const std::uint64_t> totals, double level) {
    std::optional<std::size_t> best;
    for (std::size_t a = 0; a < totals.size(); ++a)
        if (static_cast<double>(totals[a]) <= level && (!best || totals[a] < totals[*best])) best = a;
    return best;
}

}  // namespace detail

/// Active mode: the learner picks the cell.
inline Decision tas_step_active(PolicyState& s) {
    const auto& meta = s.meta();
    const double t = static_cast<double>(s.t() + 1);
    const double level = std::sqrt(t);
    const auto flat = s.counts().flat();
    std::optional<std::size_t> forced;
    for (std::size_t k = 0; k < flat.size(); ++k)
        if (flat[k] <= level && (!forced || flat[k] < flat[*forced])) forced = k;
    if (forced) return {*forced / meta.J, *forced % meta.J, Phase::ForcedExploration};

    const WeightMatrix w = s.take_learner_weights();
    std::vector<double> deficit(flat.size());
    if (s.config().tracking == Tracking::Cumulative) {
        s.cumulative() += w;
        for (std::size_t k = 0; k < flat.size(); ++k) deficit[k] = flat[k] - s.cumulative().flat()[k];
    } else {
        for (std::size_t k = 0; k < flat.size(); ++k) deficit[k] = flat[k] - t * w.flat()[k];
    }
    const std::size_t k = detail::argmin_index(deficit);
    return {k / meta.J, k % meta.J, Phase::Tracking};
}

/// Proportional mode: the subpopulation j is revealed first; track the
/// learner's conditional arm distribution for j.
inline Decision tas_step_proportional(PolicyState& s, std::size_t j) {
    const auto& meta = s.meta();
    std::vector<std::uint64_t> col(meta.arms());
    for (std::size_t a = 0; a < meta.arms(); ++a) col[a] = static_cast<std::uint64_t>(s.counts()(a, j));
    const double visits = static_cast<double>(s.sub_totals()[j]);
    if (auto a = detail::forced_arm(col, std::sqrt(visits))) return {*a, std::nullopt, Phase::ForcedExploration};

    s.take_learner_weights();
    const auto cond = s.learner().learner_weights(j);
    std::vector<double> deficit(meta.arms());
    if (s.config().tracking == Tracking::Cumulative) {
        for (std::size_t a = 0; a < meta.arms(); ++a) {
            s.cumulative()(a, j) += cond[a];
            deficit[a] = s.counts()(a, j) - s.cumulative()(a, j);
        }
    } else {
        for (std::size_t a = 0; a < meta.arms(); ++a) deficit[a] = s.counts()(a, j) - (visits + 1.0) * cond[a];
    }
    return {detail::argmin_index(deficit), std::nullopt, Phase::Tracking};
}

/// Agnostic mode (and oblivious through the mixture view): track arm
/// marginals; the subpopulation is revealed only after the choice.
inline Decision tas_step_agnostic(PolicyState& s) {
    const auto& meta = s.meta();
    const double t = static_cast<double>(s.t() + 1);
    if (meta.K == 0) return {0, std::nullopt, Phase::Tracking};
    if (auto a = detail::forced_arm(s.arm_totals(), std::sqrt(t))) return {*a, std::nullopt, Phase::ForcedExploration};

    s.take_learner_weights();
    const auto u = s.learner().learner_weights(0);
    std::vector<double> deficit(meta.arms());
    for (std::size_t a = 0; a < meta.arms(); ++a) {
        const double n = static_cast<double>(s.arm_totals()[a]);
        if (s.config().tracking == Tracking::Cumulative) {
            s.cumulative()(a, 0) += u[a];
            deficit[a] = n - s.cumulative()(a, 0);
        } else {
            deficit[a] = n - t * u[a];
        }
    }
    return {detail::argmin_index(deficit), std::nullopt, Phase::Tracking};
}

/// Best challenger: after the forcing sweep, sample the control or the arm
/// closest to flipping, whichever has fewer samples.
inline Decision bc_abc_step(PolicyState& s) {
    const auto& meta = s.meta();
    const double t = static_cast<double>(s.t() + 1);
    if (meta.K == 0) return {0, std::nullopt, Phase::Tracking};
    if (auto a = detail::forced_arm(s.arm_totals(), std::sqrt(t))) return {*a, std::nullopt, Phase::ForcedExploration};
    const std::size_t b = s.last_pair_arm();
    const auto totals = s.arm_totals();
    return {totals[0] < totals[b] ? std::size_t{0} : b, std::nullopt, Phase::Tracking};
}

/// Round robin over arms, or over all cells in active mode.
inline Decision uniform_step(const PolicyState& s) {
    const auto& meta = s.meta();
    if (s.config().mode == Mode::Active) {
        const std::size_t k = static_cast<std::size_t>(s.t() % (meta.arms() * meta.J));
        return {k / meta.J, k % meta.J, Phase::Tracking};
    }
    return {static_cast<std::size_t>(s.t() % meta.arms()), std::nullopt, Phase::Tracking};
}

/// Next decision of the configured policy. `revealed` must hold the
/// subpopulation in proportional mode and be empty otherwise.
inline Decision decide(PolicyState& s, std::optional<std::size_t> revealed = std::nullopt) {
    const Mode mode = s.config().mode;
    if ((mode == Mode::Proportional) != revealed.has_value())
        throw ConfigError("subpopulation must be revealed before the decision exactly in proportional mode");
    switch (s.config().kind) {
        case PolicyKind::Uniform: return uniform_step(s);
        case PolicyKind::BestChallenger: return bc_abc_step(s);
        case PolicyKind::TrackAndStop: break;
    }
    switch (mode) {
        case Mode::Active: return tas_step_active(s);
        case Mode::Proportional: return tas_step_proportional(s, *revealed);
        case Mode::Agnostic:
        case Mode::Oblivious: return tas_step_agnostic(s);
    }
    return {};
}

inline const RiskReport& risk_report(const PolicyState& s) { return s.last_report(); }

}  // namespace abcs
