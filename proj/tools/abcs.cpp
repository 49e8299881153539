// abcs: characteristic times, simulations and experiment drivers.
//
//   abcs oracle    --instance x.json --mode agnostic
//   abcs simulate  --instance x.json --policy tas --mode active --delta 0.1 --reps 100
//   abcs calibrate --instances 1000 --arms 2
//   abcs sweep     --instances 3000
//   abcs replay    --data log.csv --delta 0.1
//
// Exit codes: 0 success, 2 configuration or input error, 3 non-convergence.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "abcs/io.hpp"
#include "abcs/oracle.hpp"
#include "abcs/policy.hpp"
#include "abcs/sim.hpp"

namespace fs = std::filesystem;
using abcs::Json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;

std::string sha256_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
    return os.str();
}

/// Output directory with config echo and a manifest of artifact hashes.
class OutputDir {
public:
    OutputDir(std::string path, Json config) : root_(std::move(path)), config_(std::move(config)) {
        if (root_.empty()) return;
        fs::create_directories(root_);
        write_text("config.json", config_.dump(2) + "\n");
    }
    bool enabled() const { return !root_.empty(); }

    void write_text(const std::string& name, const std::string& body) {
        if (!enabled()) return;
        const fs::path p = root_ / name;
        fs::create_directories(p.parent_path());
        std::ofstream(p, std::ios::binary) << body;
        files_.push_back(name);
    }

    void finish(const std::string& command) {
        if (!enabled()) return;
        Json m;
        m["command"] = command;
        m["config"] = config_;
        Json hashes = Json::object();
        for (const auto& f : files_) hashes[f] = sha256_file(root_ / f);
        m["artifacts"] = hashes;
        std::ofstream(root_ / "manifest.json") << m.dump(2) << "\n";
    }

private:
    fs::path root_;
    Json config_;
    std::vector<std::string> files_;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("ABCS_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw abcs::ConfigError("ABCS_SEED is not an unsigned integer");
        }
    }
    return 0;
}

abcs::Instance checked_instance(const std::string& path, std::optional<abcs::Mode> mode = std::nullopt) {
    abcs::Instance x = abcs::load_instance(path);
    const auto diag = mode ? abcs::validate(x, *mode) : abcs::validate(x);
    if (diag.has_errors()) throw abcs::ConfigError(path + ": " + diag.summary());
    if (diag.has_warnings()) std::cerr << "warning: " << diag.summary() << "\n";
    return x;
}

template <class T>
std::string csv_of(const T& rows, void (*writer)(std::ostream&, const T&)) {
    std::ostringstream os;
    writer(os, rows);
    return os.str();
}

std::string summary_csv(const std::vector<abcs::PolicySummary>& summary) {
    std::ostringstream os;
    os << "policy,mode,runs,censored,correct,mean_stop\n";
    for (const auto& s : summary)
        os << abcs::to_string(s.policy.kind) << ',' << abcs::to_string(s.policy.mode) << ',' << s.runs << ','
           << s.censored << ',' << s.correct << ',' << abcs::format_real(s.mean_stop) << '\n';
    return os.str();
}

void print_summary(const std::vector<abcs::PolicySummary>& summary) {
    for (const auto& s : summary)
        std::cout << std::left << std::setw(8) << abcs::to_string(s.policy.kind) << std::setw(14)
                  << abcs::to_string(s.policy.mode) << " runs=" << s.runs << " mean_stop=" << std::setprecision(6)
                  << s.mean_stop << " censored=" << s.censored << " correct=" << s.correct << "\n";
}

// ---- oracle ----------------------------------------------------------------

struct OracleArgs {
    std::string instance, mode = "active", out;
    bool all_modes = false, closed_form = false;
    double tol = 1e-4;
    int max_iters = 50000;
};

abcs::OracleResult closed_form_oracle(const abcs::Instance& x, abcs::Mode mode) {
    if (x.family.is_gaussian() && x.K == 1) return abcs::tstar_ab_gaussian(x, mode);
    if (x.family.is_gaussian() && x.family.homoscedastic()) return abcs::homoscedastic_oracle(x, mode);
    throw abcs::ConfigError("no closed form for this instance (needs gaussian with K = 1 or a common variance)");
}

int cmd_oracle(const OracleArgs& a) {
    std::vector<abcs::Mode> modes;
    abcs::Instance x = checked_instance(a.instance);
    if (a.all_modes) {
        modes = {abcs::Mode::Active, abcs::Mode::Proportional, abcs::Mode::Agnostic};
        if (x.family.is_bernoulli() && !abcs::validate(x, abcs::Mode::Oblivious).has_errors())
            modes.push_back(abcs::Mode::Oblivious);
    } else {
        modes = {abcs::parse_mode(a.mode)};
        x = checked_instance(a.instance, modes[0]);
    }
    abcs::OracleOptions opt;
    opt.tol = a.tol;
    opt.max_iters = a.max_iters;

    Json config = {{"command", "oracle"}, {"instance", abcs::instance_to_json(x)}, {"closed_form", a.closed_form},
                   {"tol", a.tol}, {"max_iters", a.max_iters}};
    OutputDir out(a.out, config);
    Json results = Json::array();
    std::vector<double> tstars;
    bool converged = true;
    for (auto m : modes) {
        const auto r = a.closed_form ? closed_form_oracle(x, m) : abcs::solve_oracle(x, m, opt);
        converged &= r.converged;
        tstars.push_back(r.tstar);
        results.push_back(abcs::oracle_to_json(r));
    }
    Json doc;
    if (a.all_modes) {
        bool ordered = true;
        for (std::size_t k = 1; k < tstars.size(); ++k) ordered &= tstars[k - 1] <= tstars[k] * (1.0 + a.tol);
        doc = {{"results", results}, {"ordering_holds", ordered}};
    } else {
        doc = results[0];
    }
    std::cout << doc.dump(2) << "\n";
    out.write_text("oracle.json", doc.dump(2) + "\n");
    out.finish("oracle");
    if (!converged) {
        std::cerr << "solver did not reach the requested gap\n";
        return kExitNonConvergence;
    }
    return 0;
}

// ---- simulate --------------------------------------------------------------

struct SimArgs {
    std::string instance, out;
    std::vector<std::string> policies{"tas"}, modes{"active"};
    double delta = 0.1;
    std::size_t reps = 1;
    std::optional<std::uint64_t> seed;
    std::uint64_t horizon = abcs::kDefaultHorizon;
    std::string threshold = "stylized", tracking = "d";
    bool trace = false;
    unsigned workers = 1;
};

int cmd_simulate(const SimArgs& a) {
    const std::uint64_t seed = resolve_seed(a.seed);
    std::vector<abcs::PolicyConfig> cfgs;
    for (const auto& p : a.policies)
        for (const auto& m : a.modes)
            cfgs.push_back({abcs::parse_policy(p), abcs::parse_mode(m), abcs::parse_threshold(a.threshold),
                            abcs::parse_tracking(a.tracking)});
    abcs::Instance x = checked_instance(a.instance);
    for (const auto& c : cfgs) {
        const auto diag = abcs::validate(x, c.mode);
        if (diag.has_errors()) throw abcs::ConfigError(diag.summary());
        abcs::check_compatible(c, x);
    }
    if (!(a.delta > 0.0 && a.delta <= 1.0)) throw abcs::ConfigError("delta must lie in (0, 1]");

    Json config = {{"command", "simulate"}, {"instance", abcs::instance_to_json(x)}, {"policies", a.policies},
                   {"modes", a.modes}, {"delta", a.delta}, {"reps", a.reps}, {"seed", seed}, {"horizon", a.horizon},
                   {"threshold", a.threshold}, {"tracking", a.tracking}};
    OutputDir out(a.out, config);

    std::vector<abcs::ModeBound> bounds;
    bool bounds_ok = true;
    for (const auto& c : cfgs) {
        if (std::any_of(bounds.begin(), bounds.end(), [&](const abcs::ModeBound& b) { return b.mode == c.mode; })) continue;
        const auto o = abcs::solve_oracle(x, c.mode);
        bounds_ok &= o.converged;
        bounds.push_back({c.mode, o.tstar, abcs::lower_bound(o.tstar, a.delta), abcs::practical_bound(o.tstar, a.delta)});
    }

    std::vector<abcs::RunRow> rows(cfgs.size() * a.reps);
    std::vector<std::vector<abcs::TraceRow>> traces(a.trace ? rows.size() : 0);
    abcs::parallel_for(rows.size(), a.workers, [&](std::size_t k) {
        abcs::SyntheticEnvironment env(x);
        abcs::EpisodeHooks hooks;
        if (a.trace) hooks.trace = &traces[k];
        rows[k] = {0, abcs::run_episode(env, cfgs[k / a.reps], a.delta, a.horizon, abcs::derive_seed(seed, k % a.reps), hooks)};
    });

    out.write_text("runs.csv", csv_of(rows, &abcs::write_runs_csv));
    out.write_text("bounds.json", abcs::bounds_to_json(bounds, a.delta).dump(2) + "\n");
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const auto& c = rows[k].record.policy;
        std::ostringstream name;
        name << "trace/" << abcs::to_string(c.kind) << "_" << abcs::to_string(c.mode) << "_" << (k % a.reps) << ".csv";
        out.write_text(name.str(), csv_of(traces[k], &abcs::write_trace_csv));
    }
    out.finish("simulate");
    if (!out.enabled()) std::cout << csv_of(rows, &abcs::write_runs_csv);
    print_summary(abcs::summarize(rows));
    for (const auto& b : bounds)
        std::cout << "bounds " << abcs::to_string(b.mode) << ": tstar=" << b.tstar << " lower=" << b.lower
                  << " practical=" << b.practical << "\n";
    return bounds_ok ? 0 : kExitNonConvergence;
}

// ---- calibrate -------------------------------------------------------------

struct CalibrateArgs {
    std::size_t instances = 1000, arms = 2;
    std::vector<double> grid{0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
    std::optional<std::uint64_t> seed;
    std::uint64_t horizon = abcs::kDefaultHorizon;
    std::string threshold = "stylized", out;
    unsigned workers = 1;
};

int cmd_calibrate(const CalibrateArgs& a) {
    abcs::CalibrationOptions opt;
    opt.instances = a.instances;
    opt.arms = a.arms;
    opt.delta_grid = a.grid;
    for (double d : a.grid)
        if (!(d > 0.0 && d <= 1.0)) throw abcs::ConfigError("delta levels must lie in (0, 1]");
    if (a.grid.empty()) throw abcs::ConfigError("empty delta grid");
    opt.seed = resolve_seed(a.seed);
    opt.horizon = a.horizon;
    opt.threshold = abcs::parse_threshold(a.threshold);
    opt.workers = a.workers;
    Json config = {{"command", "calibrate"}, {"instances", a.instances}, {"arms", a.arms}, {"delta_grid", a.grid},
                   {"seed", opt.seed}, {"horizon", a.horizon}, {"threshold", a.threshold}};
    OutputDir out(a.out, config);
    const auto rows = abcs::experiment_calibrate(opt);
    const std::string csv = csv_of(rows, &abcs::write_calibration_csv);
    out.write_text("calibration.csv", csv);
    out.finish("calibrate");
    if (!out.enabled()) std::cout << csv;
    for (double d : a.grid) {
        std::size_t crossed = 0, wrong = 0;
        for (const auto& r : rows)
            if (r.delta_level == d && r.crossed) {
                ++crossed;
                wrong += !r.correct;
            }
        std::cerr << "delta=" << d << " crossed=" << crossed << " errors=" << wrong << "\n";
    }
    return 0;
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
    std::size_t instances = 3000;
    double delta = 0.1;
    std::optional<std::uint64_t> seed;
    std::uint64_t horizon = abcs::kDefaultHorizon;
    std::string threshold = "stylized", out;
    unsigned workers = 1;
};

int cmd_sweep(const SweepArgs& a) {
    abcs::SweepOptions opt;
    opt.instances = a.instances;
    opt.delta = a.delta;
    opt.seed = resolve_seed(a.seed);
    opt.horizon = a.horizon;
    opt.threshold = abcs::parse_threshold(a.threshold);
    opt.workers = a.workers;
    if (!(a.delta > 0.0 && a.delta <= 1.0)) throw abcs::ConfigError("delta must lie in (0, 1]");
    Json config = {{"command", "sweep"}, {"instances", a.instances}, {"delta", a.delta}, {"seed", opt.seed},
                   {"horizon", a.horizon}, {"threshold", a.threshold}};
    OutputDir out(a.out, config);
    const auto rows = abcs::experiment_sweep(opt);
    const auto summary = abcs::summarize(rows);
    out.write_text("runs.csv", csv_of(rows, &abcs::write_runs_csv));
    out.write_text("summary.csv", summary_csv(summary));
    out.finish("sweep");
    std::cout << summary_csv(summary);
    return 0;
}

// ---- replay ----------------------------------------------------------------

struct ReplayArgs {
    std::string data, family = "bernoulli", out;
    std::vector<double> beta;
    double delta = 0.1;
    std::optional<std::uint64_t> seed;
    std::string threshold = "stylized";
    bool trace = false, bootstrap = false;
    std::uint64_t horizon = 0;
};

int cmd_replay(const ReplayArgs& a) {
    abcs::EventLogOptions lo;
    if (a.family == "bernoulli")
        lo.family = abcs::FamilyKind::Bernoulli;
    else if (a.family == "gaussian")
        lo.family = abcs::FamilyKind::Gaussian;
    else
        throw abcs::ConfigError("unknown family '" + a.family + "'");
    lo.beta = a.beta;
    abcs::ReplayEnvironment env = abcs::load_event_log(a.data, lo);
    env.set_bootstrap(a.bootstrap);
    const std::uint64_t seed = resolve_seed(a.seed);
    const auto th = abcs::parse_threshold(a.threshold);
    std::vector<abcs::PolicyConfig> cfgs = abcs::sweep_policies(th);
    const auto alpha = env.empirical_alpha();
    const auto meta = env.meta();
    bool oblivious_ok = true;
    for (std::size_t i = 0; i < meta.J; ++i) oblivious_ok &= std::abs(alpha[i] - meta.beta[i]) <= 1e-12;
    if (oblivious_ok && meta.family.is_bernoulli())
        cfgs.insert(cfgs.begin() + 3, {abcs::PolicyKind::TrackAndStop, abcs::Mode::Oblivious, th, abcs::Tracking::Direct});
    const std::uint64_t horizon = a.horizon ? a.horizon : env.capacity();

    Json config = {{"command", "replay"}, {"data", a.data}, {"family", a.family}, {"beta", meta.beta},
                   {"delta", a.delta}, {"seed", seed}, {"threshold", a.threshold}, {"bootstrap", a.bootstrap},
                   {"horizon", horizon}, {"capacity", env.capacity()}};
    OutputDir out(a.out, config);
    std::vector<abcs::RunRow> rows;
    for (const auto& c : cfgs) {
        std::vector<abcs::TraceRow> trace;
        abcs::EpisodeHooks hooks;
        if (a.trace) hooks.trace = &trace;
        rows.push_back({0, abcs::run_episode(env, c, a.delta, horizon, seed, hooks)});
        const auto& r = rows.back().record;
        std::cout << std::left << std::setw(8) << abcs::to_string(c.kind) << std::setw(14) << abcs::to_string(c.mode)
                  << " stop=" << (r.stop_time ? std::to_string(*r.stop_time) : std::string("none"))
                  << " rounds=" << r.rounds << " exhausted=" << r.exhausted << " delta_final=" << r.delta_final
                  << " correct=" << r.correct << "\n";
        if (a.trace)
            out.write_text(std::string("trace/") + std::string(abcs::to_string(c.kind)) + "_" +
                               std::string(abcs::to_string(c.mode)) + ".csv",
                           csv_of(trace, &abcs::write_trace_csv));
    }
    out.write_text("runs.csv", csv_of(rows, &abcs::write_runs_csv));
    out.finish("replay");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ABC-S pure exploration: oracles, policies and experiments"};
    app.require_subcommand(1);

    OracleArgs oa;
    auto* oracle = app.add_subcommand("oracle", "characteristic time and oracle weights");
    oracle->add_option("--instance", oa.instance, "instance JSON")->required();
    oracle->add_option("--mode", oa.mode, "active|proportional|agnostic|oblivious");
    oracle->add_flag("--all-modes", oa.all_modes, "solve every mode and check their ordering");
    oracle->add_flag("--closed-form", oa.closed_form, "use the gaussian closed forms");
    oracle->add_option("--tol", oa.tol, "relative duality gap");
    oracle->add_option("--max-iters", oa.max_iters);
    oracle->add_option("--out", oa.out, "output directory");

    SimArgs sa;
    auto* sim = app.add_subcommand("simulate", "run policies on an instance");
    sim->add_option("--instance", sa.instance, "instance JSON")->required();
    sim->add_option("--policy", sa.policies, "tas|bc|uniform (repeatable)");
    sim->add_option("--mode", sa.modes, "interaction mode (repeatable)");
    sim->add_option("--delta", sa.delta);
    sim->add_option("--reps", sa.reps);
    sim->add_option("--seed", sa.seed, "master seed (default: $ABCS_SEED, else 0)");
    sim->add_option("--horizon", sa.horizon);
    sim->add_option("--threshold", sa.threshold, "stylized|theory");
    sim->add_option("--tracking", sa.tracking, "d|c");
    sim->add_flag("--trace", sa.trace, "write per-round traces");
    sim->add_option("--workers", sa.workers);
    sim->add_option("--out", sa.out, "output directory");

    CalibrateArgs ca;
    auto* cal = app.add_subcommand("calibrate", "risk calibration on random single-population instances");
    cal->add_option("--instances", ca.instances);
    cal->add_option("--arms", ca.arms, "number of arms besides the control");
    cal->add_option("--delta-grid", ca.grid)->delimiter(',');
    cal->add_option("--seed", ca.seed);
    cal->add_option("--horizon", ca.horizon);
    cal->add_option("--threshold", ca.threshold);
    cal->add_option("--workers", ca.workers);
    cal->add_option("--out", ca.out);

    SweepArgs wa;
    auto* sweep = app.add_subcommand("sweep", "average stopping times on random instances");
    sweep->add_option("--instances", wa.instances);
    sweep->add_option("--delta", wa.delta);
    sweep->add_option("--seed", wa.seed);
    sweep->add_option("--horizon", wa.horizon);
    sweep->add_option("--threshold", wa.threshold);
    sweep->add_option("--workers", wa.workers);
    sweep->add_option("--out", wa.out);

    ReplayArgs ra;
    auto* replay = app.add_subcommand("replay", "run policies on a logged dataset");
    replay->add_option("--data", ra.data, "CSV with header subpopulation,arm,outcome")->required();
    replay->add_option("--family", ra.family, "bernoulli|gaussian");
    replay->add_option("--beta", ra.beta, "importance weights (default: empirical frequencies)")->delimiter(',');
    replay->add_option("--delta", ra.delta);
    replay->add_option("--seed", ra.seed);
    replay->add_option("--threshold", ra.threshold);
    replay->add_option("--horizon", ra.horizon, "default: dataset size");
    replay->add_flag("--bootstrap", ra.bootstrap, "sample pools with replacement");
    replay->add_flag("--trace", ra.trace);
    replay->add_option("--out", ra.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*oracle) return cmd_oracle(oa);
        if (*sim) return cmd_simulate(sa);
        if (*cal) return cmd_calibrate(ca);
        if (*sweep) return cmd_sweep(wa);
        if (*replay) return cmd_replay(ra);
    } catch (const abcs::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const abcs::UnsupportedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const abcs::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
