#include "sparsist/cli.hpp"

#include "sparsist/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace sparsist::cli {

namespace {

using io::Json;

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed_override;
    unsigned jobs = 1;
    bool resume = false;
    std::optional<Index> max_trials;
};

struct FitArgs {
    std::string instance;
    std::optional<double> tau;
    std::string policy = "fixed";
    std::optional<double> C;
    double alpha = 1.0;
    std::optional<Index> max_iters;
    std::optional<double> kkt_tol;
};

struct CheckArgs {
    std::string instance;
    double tau = 0;
    double kappa = 1.0;
    std::optional<Index> verify_budget;
    std::optional<std::uint64_t> seed;
};

struct VerifyArgs {
    std::string instance;
    double kappa = 1.0;
    Index budget = 0;
    std::uint64_t seed = 0;
    std::optional<double> probe_radius;
};

/// Thrown for flag combinations the parser cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string require_path(const std::string& value, const char* flag)
{
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
    return value;
}

std::string instance_path(const std::string& instance, const Globals& g)
{
    if (!instance.empty()) return instance;
    if (!g.config.empty()) return g.config;
    throw UsageError("--instance is required");
}

double max_diag_of_inverse(const VectorXd& theta_vec, Index d)
{
    return unvec(theta_vec, d).ldlt().solve(MatrixXd::Identity(d, d)).diagonal().maxCoeff();
}

int cmd_gen(const Globals& g, std::ostream& out)
{
    InstanceConfig cfg = io::instance_config_from_json(io::read_json(require_path(g.config, "--config")));
    const std::string path = require_path(g.out, "--out");
    if (g.seed_override) cfg.seed = *g.seed_override;
    const Instance inst = make_instance(cfg);
    io::save_instance(path, inst);
    out << "wrote " << model_name(inst.kind()) << " instance (n=" << inst.n << ", p=" << inst.truth.dim()
        << ", s=" << inst.truth.s << ") to " << path << "\n";
    return kOk;
}

int cmd_fit(const Globals& g, const FitArgs& a, std::ostream& out, std::ostream& err)
{
    const Instance inst = io::load_instance(instance_path(a.instance, g));
    const std::string path = require_path(g.out, "--out");
    const Oracle f = inst.oracle();

    SolverOptions opts;
    if (a.max_iters) opts.max_iters = *a.max_iters;
    if (a.kkt_tol) opts.kkt_tol = *a.kkt_tol;

    Json extra;
    double tau = 0;
    if (a.policy == "fixed") {
        if (!a.tau) throw UsageError("--tau is required with --policy fixed");
        tau = *a.tau;
    } else if (a.policy == "recommended") {
        const bool graph = inst.kind() == ModelKind::GraphSelect;
        const Index p = graph ? std::get<GraphModel>(inst.model).d : inst.truth.dim();
        GraphTailParams gp;
        if (graph) gp.kappa_sigma = max_diag_of_inverse(inst.truth.beta, p);
        const auto rec = recommend_tau(inst.model, inst.n, p, a.alpha, a.C.value_or(default_tau_constant(a.alpha)), gp);
        tau = rec.tau;
        extra = io::tau_to_json(rec);
    } else if (a.policy == "oracle_theorem") {
        const MatrixXd H = f.hessian(inst.truth.beta);
        const double lambda = restricted_hessian_lambda_min(H, inst.truth.S);
        const auto alpha = lambda > 0 ? irrepresentability_alpha(H, inst.truth.S) : std::nullopt;
        if (!alpha) throw DomainViolation("oracle_theorem tau needs lambda_min > 0 and alpha > 0 at beta*");
        const auto cert = analytic_certificate(f, inst.truth.beta, inst.truth.S);
        tau = theorem_tau(*alpha, lambda, inst.truth, cert.K, cert.neighborhood, 0.5);
    } else {
        throw UsageError("--policy must be fixed, recommended or oracle_theorem");
    }

    const Estimate est = fit_l1(f, tau, opts);
    Json j = io::estimate_to_json(est, tau);
    j["policy"] = a.policy;
    if (!extra.is_null()) j["recommendation"] = extra;
    io::write_json(path, j);
    if (!est.converged) {
        err << "fit: no convergence after " << est.iterations << " iterations (KKT residual " << est.kkt_residual
            << "); best iterate written to " << path << "\n";
        return kNotConverged;
    }
    out << "fit converged in " << est.iterations << " iterations; wrote " << path << "\n";
    return kOk;
}

int cmd_check(const Globals& g, const CheckArgs& a, std::ostream& out, std::ostream& err)
{
    const Instance inst = io::load_instance(instance_path(a.instance, g));
    const std::string path = require_path(g.out, "--out");
    const Oracle f = inst.oracle();
    const auto cert = analytic_certificate(f, inst.truth.beta, inst.truth.S, a.kappa);

    std::optional<VerificationReport> ver;
    if (a.verify_budget) {
        if (!a.seed) throw UsageError("--seed is required with --verify");
        ver = verify_lssc(f, inst.truth.beta, inst.truth.S, cert, *a.verify_budget, *a.verify_budget, *a.seed);
    }
    const auto rep = check_theorem(f, inst.truth, a.tau, cert, ver ? &*ver : nullptr);
    Json j;
    j["schema"] = io::kSchemaVersion;
    j["report"] = io::condition_report_to_json(rep);
    j["certificate"] = io::certificate_to_json(cert);
    if (ver) j["verification"] = io::verification_to_json(*ver);
    io::write_json(path, j);
    if (!rep.overall) {
        err << "check: at least one condition fails; report written to " << path << "\n";
        return kCheckFailed;
    }
    out << "all seven conditions hold; wrote " << path << "\n";
    return kOk;
}

int cmd_verify(const Globals& g, const VerifyArgs& a, std::ostream& out, std::ostream& err)
{
    const Instance inst = io::load_instance(instance_path(a.instance, g));
    const std::string path = require_path(g.out, "--out");
    const Oracle f = inst.oracle();
    const auto cert = analytic_certificate(f, inst.truth.beta, inst.truth.S, a.kappa);
    VerifyOverrides ov;
    ov.probe_radius = a.probe_radius;
    const auto rep = verify_lssc(f, inst.truth.beta, inst.truth.S, cert, a.budget, a.budget, a.seed, ov);
    Json j = io::verification_to_json(rep);
    j["certificate"] = io::certificate_to_json(cert);
    io::write_json(path, j);
    if (!rep.pass) {
        err << "verify-lssc: empirical ratio " << rep.empirical_max_ratio << " exceeds K = " << rep.K << "\n";
        return kCheckFailed;
    }
    out << "certificate K = " << rep.K << " verified (max ratio " << rep.empirical_max_ratio << "); wrote " << path
        << "\n";
    return kOk;
}

int cmd_sweep(const Globals& g, std::ostream& out, std::ostream& err)
{
    if (g.seed_override) throw UsageError("--seed-override is not accepted by sweep; edit the config seed instead");
    const SweepConfig cfg = sweep_config_from_json(io::read_json(require_path(g.config, "--config")));
    const std::string dir = require_path(g.out, "--out");
    SweepOptions opts;
    opts.jobs = g.jobs;
    opts.resume = g.resume;
    opts.max_trials = g.max_trials;
    const auto r = sweep_to_dir(cfg, dir, opts);
    if (!r.complete) {
        err << "sweep: stopped after " << r.executed << " new trials; rerun with --resume to continue\n";
        return kOk;
    }
    out << "sweep complete: " << r.executed << " trials run, " << r.reused << " reused; wrote " << dir
        << "/results.csv\n";
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Sparse M-estimation: instance generation, fitting, condition checks and sweeps", "sparsist"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Config file (instance config for gen, sweep config for sweep)");
    app.add_option("--out", g.out, "Output file, or output directory for sweep");
    app.add_option("--seed-override", g.seed_override, "Replace the config seed (not for sweep)");
    app.add_option("--jobs", g.jobs, "Worker threads for sweep")->check(CLI::PositiveNumber);
    app.add_flag("--resume", g.resume, "Continue a sweep from its progress log");
    app.add_option("--max-trials", g.max_trials, "Stop a sweep after this many new trials")->group("");

    auto* gen = app.add_subcommand("gen", "Generate an instance file");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit the l1-regularized estimator");
    fit->add_option("--instance", fa.instance, "Instance file");
    fit->add_option("--tau", fa.tau, "Regularization level")->check(CLI::NonNegativeNumber);
    fit->add_option("--policy", fa.policy, "fixed, recommended or oracle_theorem")
        ->check(CLI::IsMember({"fixed", "recommended", "oracle_theorem"}));
    fit->add_option("--C", fa.C, "Constant of the recommended tau")->check(CLI::PositiveNumber);
    fit->add_option("--alpha", fa.alpha, "Assumed irrepresentability slack")->check(CLI::PositiveNumber);
    fit->add_option("--max-iters", fa.max_iters, "Iteration cap")->check(CLI::PositiveNumber);
    fit->add_option("--kkt-tol", fa.kkt_tol, "KKT tolerance")->check(CLI::PositiveNumber);

    CheckArgs ca;
    auto* check = app.add_subcommand("check", "Evaluate the seven sufficient conditions");
    check->add_option("--instance", ca.instance, "Instance file");
    check->add_option("--tau", ca.tau, "Regularization level")->required()->check(CLI::PositiveNumber);
    check->add_option("--kappa", ca.kappa, "LSSC slack")->check(CLI::PositiveNumber);
    check->add_option("--verify", ca.verify_budget, "Verify the certificate with this many samples per level")
        ->check(CLI::PositiveNumber);
    check->add_option("--seed", ca.seed, "Seed for --verify");

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify-lssc", "Verify the analytic LSSC certificate by sampling");
    verify->add_option("--instance", va.instance, "Instance file");
    verify->add_option("--kappa", va.kappa, "LSSC slack")->check(CLI::PositiveNumber);
    verify->add_option("--budget", va.budget, "Perturbations and directions each")->required()->check(CLI::PositiveNumber);
    verify->add_option("--seed", va.seed, "Sampling seed")->required();
    verify->add_option("--probe-radius", va.probe_radius, "Radius probed for unbounded neighborhoods")
        ->check(CLI::PositiveNumber);

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a Monte Carlo sweep");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        if (gen->parsed()) return cmd_gen(g, out);
        if (fit->parsed()) return cmd_fit(g, fa, out, err);
        if (check->parsed()) return cmd_check(g, ca, out, err);
        if (verify->parsed()) return cmd_verify(g, va, out, err);
        if (sweep_cmd->parsed()) return cmd_sweep(g, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const io::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kGenerationError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace sparsist::cli
