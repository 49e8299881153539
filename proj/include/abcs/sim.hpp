#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "abcs/errors.hpp"
#include "abcs/expfam.hpp"
#include "abcs/model.hpp"
#include "abcs/oracle.hpp"
#include "abcs/policy.hpp"

namespace abcs {

inline constexpr std::uint64_t kDefaultHorizon = 10'000'000;

/// splitmix64 finalizer; derives independent stream seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

/// Draws from the true instance. Subpopulations are i.i.d. from alpha.
class SyntheticEnvironment {
public:
    explicit SyntheticEnvironment(Instance x, std::uint64_t seed = 0)
        : x_(std::move(x)), sub_(x_.alpha.begin(), x_.alpha.end()), rng_(seed) {}

    void reset(std::uint64_t seed) { rng_.seed(seed); }
    const Instance& instance() const noexcept { return x_; }
    InstanceMeta meta() const { return x_.meta(); }
    ArmSet truth() const { return answer_set(x_); }

    std::size_t draw_subpopulation() { return sub_(rng_); }
    std::optional<double> pull(std::size_t arm, std::size_t sub) {
        return sample(x_.law(arm, sub), x_.means(arm, sub), rng_);
    }

private:
    Instance x_;
    std::discrete_distribution<std::size_t> sub_;
    Rng rng_;
};

/// Logged outcomes per (arm, subpopulation), consumed without replacement
/// after a per-pool shuffle. Subpopulations are drawn from the empirical
/// frequencies; an empty pool ends the episode.
class ReplayEnvironment {
public:
    ReplayEnvironment(std::size_t K, std::size_t J, Family family, std::vector<std::vector<double>> pools,
                      std::vector<double> beta = {})
        : K_(K), J_(J), family_(std::move(family)), source_(std::move(pools)), beta_(std::move(beta)) {
        if (source_.size() != (K + 1) * J) throw ConfigError("replay pools must cover (K+1) x J cells");
        std::vector<double> rows(J, 0.0);
        for (std::size_t a = 0; a <= K; ++a)
            for (std::size_t i = 0; i < J; ++i) rows[i] += static_cast<double>(source_[a * J + i].size());
        double total = 0.0;
        for (double r : rows) total += r;
        alpha_.assign(J, total > 0.0 ? 0.0 : 1.0 / static_cast<double>(J));
        if (total > 0.0)
            for (std::size_t i = 0; i < J; ++i) alpha_[i] = rows[i] / total;
        if (beta_.empty()) beta_ = alpha_;
        capacity_ = static_cast<std::uint64_t>(total);
        reset(0);
    }

    void set_bootstrap(bool on) { bootstrap_ = on; }

    void reset(std::uint64_t seed) {
        rng_.seed(seed);
        pools_ = source_;
        for (auto& p : pools_) std::shuffle(p.begin(), p.end(), rng_);
        next_.assign(pools_.size(), 0);
        sub_ = std::discrete_distribution<std::size_t>(alpha_.begin(), alpha_.end());
        exhausted_ = false;
    }

    std::size_t K() const noexcept { return K_; }
    std::size_t J() const noexcept { return J_; }
    std::uint64_t capacity() const noexcept { return capacity_; }
    std::span<const double> empirical_alpha() const noexcept { return alpha_; }
    std::size_t pool_size(std::size_t arm, std::size_t sub) const { return source_.at(arm * J_ + sub).size(); }
    bool exhausted() const noexcept { return exhausted_; }
    /// Outcomes handed out so far from a cell.
    std::size_t consumed(std::size_t arm, std::size_t sub) const { return next_.at(arm * J_ + sub); }

    InstanceMeta meta() const {
        InstanceMeta m;
        m.K = K_;
        m.J = J_;
        m.family = family_;
        m.alpha = alpha_;
        m.beta = beta_;
        return m;
    }

    /// Per-cell dataset means (zero-count cells get the domain midpoint).
    Instance empirical_instance() const {
        Instance x;
        static_cast<InstanceMeta&>(x) = meta();
        x.means = Matrix(K_ + 1, J_);
        for (std::size_t a = 0; a <= K_; ++a)
            for (std::size_t i = 0; i < J_; ++i) {
                const auto& p = source_[a * J_ + i];
                double s = 0.0;
                for (double v : p) s += v;
                x.means(a, i) = p.empty() ? (family_.is_bernoulli() ? 0.5 : 0.0) : s / static_cast<double>(p.size());
            }
        return x;
    }
    ArmSet truth() const { return answer_set(empirical_instance()); }

    std::size_t draw_subpopulation() { return sub_(rng_); }

    std::optional<double> pull(std::size_t arm, std::size_t sub) {
        const std::size_t c = arm * J_ + sub;
        auto& p = pools_[c];
        if (p.empty()) {
            exhausted_ = true;
            return std::nullopt;
        }
        if (bootstrap_) return p[std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng_)];
        if (next_[c] == p.size()) {
            exhausted_ = true;
            return std::nullopt;
        }
        return p[next_[c]++];
    }

private:
    std::size_t K_, J_;
    Family family_;
    std::vector<std::vector<double>> source_, pools_;
    std::vector<std::size_t> next_;
    std::vector<double> alpha_, beta_;
    std::discrete_distribution<std::size_t> sub_;
    std::uint64_t capacity_ = 0;
    bool bootstrap_ = false;
    bool exhausted_ = false;
    Rng rng_;
};

struct TraceRow {
    std::uint64_t t = 0;
    double lambda = 0.0;
    double delta_hat = 1.0;
    ArmSet recommended_set;
    Phase phase = Phase::ForcedExploration;
    std::size_t arm = 0;
    std::size_t sub = 0;
};

struct RunRecord {
    PolicyConfig policy;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> stop_time;
    std::uint64_t rounds = 0;
    bool censored = false;
    bool exhausted = false;
    ArmSet recommendation;
    bool correct = false;
    double delta_final = 1.0;
};

struct EpisodeHooks {
    std::vector<TraceRow>* trace = nullptr;
    /// Called after every round; returning false ends the episode early.
    std::function<bool(const RiskReport&)> on_report;
};

/// One episode in the interaction order of the mode. Stops at the first
/// round with delta_hat <= delta, at the horizon, or when a replay runs dry.
template <class Env>
RunRecord run_episode(Env& env, const PolicyConfig& cfg, double delta, std::uint64_t horizon, std::uint64_t seed,
                      const EpisodeHooks& hooks = {}) {
    env.reset(seed);
    const InstanceMeta meta = env.meta();
    PolicyState state(meta, cfg);
    const ArmSet truth = env.truth();
    RunRecord rec;
    rec.policy = cfg;
    rec.seed = seed;
    bool stopped_by_hook = false;
    while (state.t() < horizon) {
        Decision d;
        std::size_t sub = 0;
        switch (cfg.mode) {
            case Mode::Active:
                d = decide(state);
                sub = d.requested_subpopulation.value_or(0);
                break;
            case Mode::Proportional:
                sub = env.draw_subpopulation();
                d = decide(state, sub);
                break;
            case Mode::Agnostic:
            case Mode::Oblivious:
                d = decide(state);
                sub = env.draw_subpopulation();
                break;
        }
        const auto x = env.pull(d.arm, sub);
        if (!x) {
            rec.exhausted = true;
            break;
        }
        state.observe(d.arm, cfg.mode == Mode::Oblivious ? std::nullopt : std::optional<std::size_t>(sub), *x);
        const RiskReport& r = state.last_report();
        if (hooks.trace)
            hooks.trace->push_back({r.t, r.lambda, r.delta_hat, r.recommended_set, d.phase, d.arm, sub});
        if (hooks.on_report && !hooks.on_report(r)) {
            stopped_by_hook = true;
            break;
        }
        if (r.delta_hat <= delta) {
            rec.stop_time = r.t;
            break;
        }
    }
    const RiskReport& r = state.last_report();
    rec.rounds = state.t();
    rec.censored = !rec.stop_time && !stopped_by_hook;
    rec.recommendation = r.recommended_set;
    rec.correct = r.recommended_set == truth;
    rec.delta_final = r.delta_hat;
    return rec;
}

/// Bernoulli instance with i.i.d. Uniform(0,1) cell means and uniform
/// alpha = beta; redrawn (up to 100 times) while an arm ties the control
/// within 1e-9.
template <class R>
Instance gen_instance_uniform(std::size_t K, std::size_t J, R& rng) {
    Instance x;
    x.K = K;
    x.J = J;
    x.family = Family::bernoulli();
    x.alpha.assign(J, 1.0 / static_cast<double>(J));
    x.beta = x.alpha;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
        x.means = Matrix(K + 1, J);
        for (double& m : x.means.flat()) m = u(rng);
        bool tie = false;
        for (double g : gaps(x)) tie |= std::abs(g) < kTieWarning;
        if (!tie) break;
    }
    return x;
}

/// Symmetric Dirichlet draw on the J-simplex.
template <class R>
std::vector<double> gen_alpha_dirichlet(std::size_t J, double concentration, R& rng) {
    if (!(concentration > 0.0)) throw DomainError("dirichlet concentration must be positive");
    std::gamma_distribution<double> g(concentration, 1.0);
    std::vector<double> out(J);
    double s = 0.0;
    for (double& v : out) s += (v = g(rng));
    for (double& v : out) v /= s;
    return out;
}

/// Runs fn(i) for i in [0, n) over `workers` threads; fn writes its own slot.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
}

struct RunRow {
    std::size_t instance_id = 0;
    RunRecord record;
};

struct CalibrationRow {
    std::size_t instance_id = 0;
    double delta_level = 1.0;
    bool crossed = false;
    std::uint64_t t_cross = 0;
    bool correct = false;
};

struct CalibrationOptions {
    std::size_t instances = 1000;
    std::size_t arms = 2;  // K
    std::vector<double> delta_grid{0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
    std::uint64_t seed = 0;
    std::uint64_t horizon = kDefaultHorizon;
    Threshold threshold = Threshold::Stylized;
    unsigned workers = 1;
};

/// Single-population Bernoulli instances; T-a-S agnostic runs until the
/// smallest grid level is crossed, recording the first crossing of every
/// level and whether the recommendation at that round was right.
inline std::vector<CalibrationRow> experiment_calibrate(const CalibrationOptions& opt) {
    std::vector<std::vector<CalibrationRow>> per(opt.instances);
    const double smallest = *std::min_element(opt.delta_grid.begin(), opt.delta_grid.end());
    parallel_for(opt.instances, opt.workers, [&](std::size_t id) {
        Rng gen(derive_seed(derive_seed(opt.seed, id), 0));
        SyntheticEnvironment env(gen_instance_uniform(opt.arms, 1, gen));
        const ArmSet truth = env.truth();
        auto& rows = per[id];
        for (double d : opt.delta_grid) rows.push_back({id, d, false, 0, false});
        EpisodeHooks hooks;
        hooks.on_report = [&](const RiskReport& r) {
            for (auto& row : rows)
                if (!row.crossed && r.delta_hat <= row.delta_level) {
                    row.crossed = true;
                    row.t_cross = r.t;
                    row.correct = r.recommended_set == truth;
                }
            return true;
        };
        PolicyConfig cfg{PolicyKind::TrackAndStop, Mode::Agnostic, opt.threshold, Tracking::Direct};
        run_episode(env, cfg, smallest, opt.horizon, derive_seed(derive_seed(opt.seed, id), 1), hooks);
    });
    std::vector<CalibrationRow> out;
    for (auto& rows : per) out.insert(out.end(), rows.begin(), rows.end());
    return out;
}

/// The five policies compared on random multi-population instances.
inline std::vector<PolicyConfig> sweep_policies(Threshold th = Threshold::Stylized) {
    return {{PolicyKind::TrackAndStop, Mode::Active, th, Tracking::Direct},
            {PolicyKind::TrackAndStop, Mode::Proportional, th, Tracking::Direct},
            {PolicyKind::TrackAndStop, Mode::Agnostic, th, Tracking::Direct},
            {PolicyKind::BestChallenger, Mode::Agnostic, th, Tracking::Direct},
            {PolicyKind::Uniform, Mode::Agnostic, th, Tracking::Direct}};
}

struct SweepOptions {
    std::size_t instances = 3000;
    std::size_t arms = 2;
    std::size_t min_subpops = 2, max_subpops = 10;
    double dirichlet = 10.0;
    double delta = 0.1;
    std::uint64_t seed = 0;
    std::uint64_t horizon = kDefaultHorizon;
    Threshold threshold = Threshold::Stylized;
    unsigned workers = 1;
};

/// Random instance of the sweep: uniform means, J uniform on the range,
/// alpha from a symmetric Dirichlet and beta = alpha.
template <class R>
Instance gen_sweep_instance(const SweepOptions& opt, R& rng) {
    const std::size_t J = std::uniform_int_distribution<std::size_t>(opt.min_subpops, opt.max_subpops)(rng);
    Instance x = gen_instance_uniform(opt.arms, J, rng);
    x.alpha = gen_alpha_dirichlet(J, opt.dirichlet, rng);
    x.beta = x.alpha;
    for (int attempt = 0; attempt < 100; ++attempt) {
        bool tie = false;
        for (double g : gaps(x)) tie |= std::abs(g) < kTieWarning;
        if (!tie) break;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& m : x.means.flat()) m = u(rng);
    }
    return x;
}

/// Runs every sweep policy once per random instance. Rows are ordered by
/// (instance, policy) whatever the worker count.
inline std::vector<RunRow> experiment_sweep(const SweepOptions& opt) {
    const auto policies = sweep_policies(opt.threshold);
    std::vector<RunRow> rows(opt.instances * policies.size());
    parallel_for(opt.instances, opt.workers, [&](std::size_t id) {
        Rng gen(derive_seed(derive_seed(opt.seed, id), 0));
        SyntheticEnvironment env(gen_sweep_instance(opt, gen));
        const std::uint64_t seed = derive_seed(derive_seed(opt.seed, id), 1);
        for (std::size_t p = 0; p < policies.size(); ++p)
            rows[id * policies.size() + p] = {id, run_episode(env, policies[p], opt.delta, opt.horizon, seed)};
    });
    return rows;
}

struct PolicySummary {
    PolicyConfig policy;
    std::size_t runs = 0;
    std::size_t censored = 0;
    std::size_t correct = 0;
    double mean_stop = 0.0;  // over all runs, censored ones counted at their last round
};

inline bool same_policy(const PolicyConfig& a, const PolicyConfig& b) {
    return a.kind == b.kind && a.mode == b.mode && a.threshold == b.threshold && a.tracking == b.tracking;
}

/// Per-policy aggregates in first-appearance order.
inline std::vector<PolicySummary> summarize(const std::vector<RunRow>& rows) {
    std::vector<PolicySummary> out;
    for (const auto& row : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const PolicySummary& s) { return same_policy(s.policy, row.record.policy); });
        if (it == out.end()) {
            out.push_back({row.record.policy});
            it = out.end() - 1;
        }
        ++it->runs;
        it->censored += row.record.censored;
        it->correct += row.record.correct;
        it->mean_stop += static_cast<double>(row.record.stop_time.value_or(row.record.rounds));
    }
    for (auto& s : out) s.mean_stop /= static_cast<double>(std::max<std::size_t>(s.runs, 1));
    return out;
}

/// Fixed point of t = T* ln((1 + ln t)/delta), iterated from T* ln(1/delta).
inline double practical_bound(double tstar, double delta, double tol = 1.0, int max_iter = 100) {
    double t = tstar * std::log(1.0 / delta);
    for (int k = 0; k < max_iter; ++k) {
        const double next = tstar * std::log((1.0 + std::log(std::max(t, 1.0))) / delta);
        const bool done = std::abs(next - t) <= tol;
        t = next;
        if (done) break;
    }
    return t;
}

/// kl(delta, 1 - delta) T*, the information lower bound on E[tau].
inline double lower_bound(double tstar, double delta) { return kl_bernoulli(delta, 1.0 - delta) * tstar; }

struct ModeBound {
    Mode mode = Mode::Active;
    double tstar = 0.0;
    double lower = 0.0;
    double practical = 0.0;
};

struct FixedInstanceResult {
    std::vector<RunRow> runs;
    std::vector<ModeBound> bounds;
};

/// Every policy `reps` times on one instance, with the lower and practical
/// bounds of each mode the policies run in.
inline FixedInstanceResult experiment_fixed_instance(const Instance& x, const std::vector<PolicyConfig>& policies,
                                                     double delta, std::size_t reps, std::uint64_t seed,
                                                     std::uint64_t horizon = kDefaultHorizon, unsigned workers = 1,
                                                     const OracleOptions& oracle = {}) {
    FixedInstanceResult res;
    for (const auto& p : policies) {
        if (std::any_of(res.bounds.begin(), res.bounds.end(), [&](const ModeBound& b) { return b.mode == p.mode; }))
            continue;
        const auto o = solve_oracle(x, p.mode, oracle);
        res.bounds.push_back({p.mode, o.tstar, lower_bound(o.tstar, delta), practical_bound(o.tstar, delta)});
    }
    res.runs.resize(policies.size() * reps);
    parallel_for(policies.size() * reps, workers, [&](std::size_t k) {
        SyntheticEnvironment env(x);
        const std::size_t rep = k % reps;
        res.runs[k] = {0, run_episode(env, policies[k / reps], delta, horizon, derive_seed(seed, rep))};
    });
    return res;
}

}  // namespace abcs
