#include "sparsist/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef SPARSIST_VERSION
#define SPARSIST_VERSION "0.1.0"
#endif

namespace sparsist {

using io::Json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void SweepConfig::validate() const
{
    sparsist::validate(model);
    if (grid.empty()) throw InvalidArgument("sweep grid is empty");
    if (trials < 1) throw InvalidArgument("trials must be >= 1");
    solver.validate();
    if (!(alpha_assumed > 0)) throw InvalidArgument("alpha_assumed must be positive");
    if (!(kappa > 0)) throw InvalidArgument("kappa must be positive");
    if (auto* r = std::get_if<TauRecommended>(&tau_policy); r && r->C && !(*r->C > 0))
        throw InvalidArgument("recommended tau constant must be positive");
    if (auto* f = std::get_if<TauFixed>(&tau_policy); f && !(f->tau >= 0))
        throw InvalidArgument("fixed tau must be non-negative");
    for (const Cell& c : grid) {
        InstanceConfig ic;
        ic.model = model;
        ic.family = family;
        ic.n = c.n;
        ic.p = c.p;
        ic.s = c.s;
        ic.beta_min = beta_min;
        ic.beta_max = beta_max;
        ic.rho = rho;
        ic.validate();
    }
}

SweepConfig sweep_config_from_json(const Json& j)
{
    io::Fields f(j, "sweep config");
    io::check_schema(f);
    SweepConfig c;
    c.model = io::model_from_json(f.require("model"));
    {
        const std::string name = f.string_or("design", "gaussian_iid");
        try {
            c.family = parse_design_family(name);
        } catch (const InvalidArgument&) {
            f.fail("unknown design family '" + name + "'");
        }
    }

    const Json& grid = f.require("grid");
    if (!grid.is_array() || grid.empty()) f.fail("'grid' must be a non-empty array");
    for (const auto& series : grid) {
        io::Fields g(series, "grid entry");
        const Index p = g.integer("p");
        const Index s = g.integer("s");
        const Json& ns = g.require("n");
        g.finish();
        const auto add = [&](const Json& v) {
            if (!v.is_number_integer()) g.fail("'n' entries must be integers");
            c.grid.push_back({v.get<Index>(), p, s});
        };
        if (ns.is_array()) {
            for (const auto& v : ns) add(v);
        } else {
            add(ns);
        }
    }

    c.trials = f.integer("trials");
    if (const Json* t = f.optional("tau")) {
        io::Fields tf(*t, "tau");
        const std::string policy = tf.string("policy");
        if (policy == "recommended") {
            TauRecommended r;
            if (tf.has("C")) r.C = tf.number("C");
            c.tau_policy = r;
        } else if (policy == "fixed") {
            c.tau_policy = TauFixed{tf.number("tau")};
        } else if (policy == "oracle_theorem") {
            c.tau_policy = TauOracleTheorem{};
        } else {
            tf.fail("unknown tau policy '" + policy + "'");
        }
        tf.finish();
    }
    c.alpha_assumed = f.number_or("alpha_assumed", 1.0);
    if (const Json* b = f.optional("beta")) {
        io::Fields bf(*b, "beta");
        c.beta_min = bf.number_or("min", 1.0);
        c.beta_max = bf.number_or("max", c.beta_min);
        if (const Json* ap = bf.optional("all_positive")) {
            if (!ap->is_boolean()) bf.fail("'all_positive' must be a boolean");
            c.all_positive = ap->get<bool>();
        }
        bf.finish();
    }
    if (const Json* g = f.optional("graph")) {
        io::Fields gf(*g, "graph");
        c.rho = gf.number_or("rho", 0.5);
        const std::string pattern = gf.string_or("pattern", "random");
        if (pattern == "chain") {
            c.pattern = GraphPattern::Chain;
        } else if (pattern != "random") {
            gf.fail("unknown graph pattern '" + pattern + "'");
        }
        c.graph_c = gf.number_or("c", 1.0);
        gf.finish();
    }
    c.kappa = f.number_or("kappa", 1.0);
    c.theorem_check = f.boolean_or("theorem_check", false);
    c.witness = f.boolean_or("witness", false);
    c.trial_log = f.boolean_or("trial_log", false);
    if (const Json* s = f.optional("solver")) {
        io::Fields sf(*s, "solver");
        c.solver.max_iters = sf.integer_or("max_iters", c.solver.max_iters);
        c.solver.kkt_tol = sf.number_or("kkt_tol", c.solver.kkt_tol);
        sf.finish();
    }
    c.seed = f.seed("seed");
    f.finish();
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw io::ConfigError(std::string("sweep config: ") + e.what());
    }
    return c;
}

Json sweep_config_to_json(const SweepConfig& c)
{
    Json j;
    j["schema"] = io::kSchemaVersion;
    j["model"] = io::model_to_json(c.model);
    j["design"] = design_family_name(c.family);
    Json grid = Json::array();
    for (const Cell& cell : c.grid) grid.push_back({{"p", cell.p}, {"s", cell.s}, {"n", cell.n}});
    j["grid"] = grid;
    j["trials"] = c.trials;
    Json tau;
    std::visit(
        [&](const auto& pol) {
            using T = std::decay_t<decltype(pol)>;
            if constexpr (std::is_same_v<T, TauRecommended>) {
                tau["policy"] = "recommended";
                if (pol.C) tau["C"] = *pol.C;
            } else if constexpr (std::is_same_v<T, TauFixed>) {
                tau["policy"] = "fixed";
                tau["tau"] = pol.tau;
            } else {
                tau["policy"] = "oracle_theorem";
            }
        },
        c.tau_policy);
    j["tau"] = tau;
    j["alpha_assumed"] = c.alpha_assumed;
    Json beta{{"min", c.beta_min}, {"max", c.beta_max}};
    if (c.all_positive) beta["all_positive"] = *c.all_positive;
    j["beta"] = beta;
    j["graph"] = {{"rho", c.rho}, {"pattern", c.pattern == GraphPattern::Chain ? "chain" : "random"}, {"c", c.graph_c}};
    j["kappa"] = c.kappa;
    j["theorem_check"] = c.theorem_check;
    j["witness"] = c.witness;
    j["trial_log"] = c.trial_log;
    j["solver"] = {{"max_iters", c.solver.max_iters}, {"kkt_tol", c.solver.kkt_tol}};
    j["seed"] = c.seed;
    return j;
}

std::uint64_t trial_seed(std::uint64_t master, const Cell& cell, Index trial)
{
    std::uint64_t s = mix_seed(master, std::uint64_t(cell.n));
    s = mix_seed(s, std::uint64_t(cell.p));
    s = mix_seed(s, std::uint64_t(cell.s));
    return mix_seed(s, std::uint64_t(trial));
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

Json outcome_to_json(const TrialOutcome& o, bool with_time)
{
    Json j;
    j["cell"] = o.cell;
    j["trial"] = o.trial;
    j["tau"] = io::number(o.tau);
    j["converged"] = o.converged;
    j["support_match"] = o.support_match;
    j["sign_match"] = o.sign_match;
    j["l2_error"] = io::number(o.l2_error);
    j["iterations"] = o.iterations;
    j["kkt_residual"] = io::number(o.kkt_residual);
    j["assumptions_ok"] = o.assumptions_ok;
    j["witness_checked"] = o.witness_checked;
    j["witness_held"] = o.witness_held;
    j["witness_support_equal"] = o.witness_support_equal;
    j["theorem_checked"] = o.theorem_checked;
    Json conds = Json::array();
    for (bool b : o.conditions) conds.push_back(b);
    j["conditions"] = conds;
    j["theorem_overall"] = o.theorem_overall;
    j["nonpd_iterates"] = o.nonpd_iterates;
    j["error"] = o.error;
    if (with_time) j["wall_seconds"] = o.wall_seconds;
    return j;
}

TrialOutcome outcome_from_json(const Json& j)
{
    io::Fields f(j, "trial outcome");
    TrialOutcome o;
    o.cell = f.integer("cell");
    o.trial = f.integer("trial");
    o.tau = io::read_number(f.require("tau"));
    o.converged = f.boolean_or("converged", false);
    o.support_match = f.boolean_or("support_match", false);
    o.sign_match = f.boolean_or("sign_match", false);
    o.l2_error = io::read_number(f.require("l2_error"));
    o.iterations = f.integer("iterations");
    o.kkt_residual = io::read_number(f.require("kkt_residual"));
    o.assumptions_ok = f.boolean_or("assumptions_ok", true);
    o.witness_checked = f.boolean_or("witness_checked", false);
    o.witness_held = f.boolean_or("witness_held", false);
    o.witness_support_equal = f.boolean_or("witness_support_equal", false);
    o.theorem_checked = f.boolean_or("theorem_checked", false);
    const Json& conds = f.require("conditions");
    if (!conds.is_array() || conds.size() != std::size_t(kConditionCount)) f.fail("'conditions' must have 7 entries");
    for (std::size_t i = 0; i < conds.size(); ++i) o.conditions[i] = conds[i].get<bool>();
    o.theorem_overall = f.boolean_or("theorem_overall", false);
    o.nonpd_iterates = f.integer("nonpd_iterates");
    o.error = f.string_or("error", "");
    o.wall_seconds = f.number_or("wall_seconds", 0.0);
    f.finish();
    return o;
}

namespace {

double max_diag_of_inverse(const VectorXd& theta_vec, Index d)
{
    const MatrixXd theta = unvec(theta_vec, d);
    return theta.ldlt().solve(MatrixXd::Identity(d, d)).diagonal().maxCoeff();
}

double recommended_tau(const SweepConfig& config, const Instance& inst, const Cell& cell)
{
    const auto& pol = std::get<TauRecommended>(config.tau_policy);
    const double C = pol.C.value_or(default_tau_constant(config.alpha_assumed));
    GraphTailParams gp;
    if (inst.kind() == ModelKind::GraphSelect) {
        gp.c = config.graph_c;
        gp.kappa_sigma = max_diag_of_inverse(inst.truth.beta, cell.p);
    }
    return recommend_tau(inst.model, cell.n, cell.p, config.alpha_assumed, C, gp).tau;
}

} // namespace

TrialOutcome run_trial(const SweepConfig& config, Index cell_index, Index trial)
{
    if (cell_index < 0 || cell_index >= Index(config.grid.size())) throw InvalidArgument("cell index out of range");
    const auto start = std::chrono::steady_clock::now();
    const Cell& cell = config.grid[std::size_t(cell_index)];
    TrialOutcome o;
    o.cell = cell_index;
    o.trial = trial;

    try {
        InstanceConfig ic;
        ic.model = config.model;
        ic.family = config.family;
        ic.n = cell.n;
        ic.p = cell.p;
        ic.s = cell.s;
        ic.beta_min = config.beta_min;
        ic.beta_max = config.beta_max;
        ic.all_positive = config.all_positive;
        ic.rho = config.rho;
        ic.pattern = config.pattern;
        ic.seed = trial_seed(config.seed, cell, trial);
        const Instance inst = make_instance(ic);
        const Oracle f = inst.oracle();
        const GroundTruth& truth = inst.truth;
        const bool graph = inst.kind() == ModelKind::GraphSelect;

        // Conditions 2 and 3 at beta*.
        std::optional<double> alpha;
        double lambda = 0;
        if (!truth.S.empty()) {
            const MatrixXd H = f.hessian(truth.beta);
            lambda = restricted_hessian_lambda_min(H, truth.S);
            if (lambda > 0) alpha = irrepresentability_alpha(H, truth.S);
        }
        o.assumptions_ok = lambda > 0 && alpha.has_value();

        std::optional<LsscCertificate> cert;
        const auto certificate = [&]() -> const LsscCertificate& {
            if (!cert) cert = analytic_certificate(f, truth.beta, truth.S, config.kappa);
            return *cert;
        };

        if (std::holds_alternative<TauFixed>(config.tau_policy)) {
            o.tau = std::get<TauFixed>(config.tau_policy).tau;
        } else if (std::holds_alternative<TauOracleTheorem>(config.tau_policy) && o.assumptions_ok) {
            const auto& c = certificate();
            o.tau = theorem_tau(*alpha, lambda, truth, c.K, c.neighborhood, 0.5);
        } else {
            SweepConfig fallback = config;
            if (!std::holds_alternative<TauRecommended>(config.tau_policy)) fallback.tau_policy = TauRecommended{};
            o.tau = recommended_tau(fallback, inst, cell);
        }

        SolverOptions opts = config.solver;
        const Index d = graph ? cell.p : 0;
        if (graph) {
            opts.on_accept = [&](const VectorXd& b) {
                const MatrixXd theta = unvec(b, d);
                Eigen::LLT<MatrixXd> llt((theta + theta.transpose()) / 2.0);
                if (llt.info() != Eigen::Success) ++o.nonpd_iterates;
            };
        }
        const Estimate est = fit_l1(f, o.tau, opts);
        o.converged = est.converged;
        o.iterations = est.iterations;
        o.kkt_residual = est.kkt_residual;
        const Support coords = graph ? off_diagonal(d) : Support{};
        const auto assess = recovery_assess(est.beta, truth, graph ? &coords : nullptr);
        o.l2_error = assess.l2_error;
        o.support_match = est.converged && assess.support_match;
        o.sign_match = est.converged && assess.sign_match;

        if (config.witness && !truth.S.empty()) {
            SolverOptions ropts = config.solver;
            const Estimate check = fit_restricted(f, truth.S, o.tau, ropts);
            const auto w = witness_check(f, check.beta, truth.S, o.tau);
            o.witness_checked = est.converged && check.converged;
            o.witness_held = w.holds;
            o.witness_support_equal = support_of(est.beta) == support_of(check.beta);
        }

        if (config.theorem_check && !truth.S.empty() && o.tau > 0) {
            o.theorem_checked = true;
            try {
                const auto rep = check_theorem(f, truth, o.tau, certificate());
                o.conditions = rep.verdicts;
                o.theorem_overall = rep.overall;
            } catch (const Error&) {
                o.conditions = {};
                o.theorem_overall = false;
            }
        }
    } catch (const Error& e) {
        o.error = e.what();
        o.converged = false;
        o.support_match = false;
        o.sign_match = false;
    }
    o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return o;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

Interval wilson_interval(Index successes, Index trials, double z)
{
    if (trials <= 0) return {0.0, 1.0};
    const double n = double(trials);
    const double ph = double(successes) / n;
    const double z2 = z * z;
    const double denom = 1 + z2 / n;
    const double center = (ph + z2 / (2 * n)) / denom;
    const double half = z / denom * std::sqrt(ph * (1 - ph) / n + z2 / (4 * n * n));
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

SweepTable summarize(const SweepConfig& config, const std::vector<TrialOutcome>& outcomes)
{
    std::vector<CellSummary> rows(config.grid.size());
    std::vector<double> tau_sum(config.grid.size(), 0.0), l2_sum(config.grid.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].cell = config.grid[i];

    // Sum in trial order so floating-point totals do not depend on completion order.
    std::vector<const TrialOutcome*> sorted;
    for (const auto& o : outcomes) sorted.push_back(&o);
    std::sort(sorted.begin(), sorted.end(), [](const TrialOutcome* a, const TrialOutcome* b) {
        return std::pair(a->cell, a->trial) < std::pair(b->cell, b->trial);
    });
    for (const TrialOutcome* o : sorted) {
        if (o->cell < 0 || o->cell >= Index(rows.size())) throw InvalidArgument("outcome refers to an unknown cell");
        auto& r = rows[std::size_t(o->cell)];
        ++r.trials;
        r.successes += o->sign_match;
        r.support_successes += o->support_match;
        r.nonconverged += !o->converged && o->error.empty();
        r.errors += !o->error.empty();
        r.assumption_failures += !o->assumptions_ok;
        r.witness_checked += o->witness_checked;
        r.witness_held += o->witness_checked && o->witness_held;
        r.witness_violations += o->witness_violation();
        r.theorem_checked += o->theorem_checked;
        r.theorem_all_true += o->theorem_checked && o->theorem_overall;
        r.theorem_violations += o->theorem_violation();
        r.nonpd_iterates += o->nonpd_iterates;
        tau_sum[std::size_t(o->cell)] += o->tau;
        l2_sum[std::size_t(o->cell)] += o->l2_error;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        if (r.trials == 0) continue;
        r.tau = tau_sum[i] / double(r.trials);
        r.mean_l2_error = l2_sum[i] / double(r.trials);
        r.prob = double(r.successes) / double(r.trials);
        const auto w = wilson_interval(r.successes, r.trials);
        r.wilson_lo = w.lo;
        r.wilson_hi = w.hi;
    }
    std::stable_sort(rows.begin(), rows.end(), [](const CellSummary& a, const CellSummary& b) {
        return std::tuple(a.cell.p, a.cell.s, a.cell.n) < std::tuple(b.cell.p, b.cell.s, b.cell.n);
    });
    return {model_name(kind_of(config.model)), std::move(rows)};
}

namespace {

std::string fmt(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

} // namespace

std::string table_to_csv(const SweepTable& table)
{
    std::ostringstream out;
    out << "model,n,p,s,tau,trials,successes,prob,wilson_lo,wilson_hi\n";
    for (const auto& r : table.rows)
        out << table.model << ',' << r.cell.n << ',' << r.cell.p << ',' << r.cell.s << ',' << fmt(r.tau) << ','
            << r.trials << ',' << r.successes << ',' << fmt(r.prob) << ',' << fmt(r.wilson_lo) << ','
            << fmt(r.wilson_hi) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

namespace {

struct Task {
    Index cell;
    Index trial;
};

/// Runs `tasks` on `jobs` workers; `sink` is called under a lock for every outcome.
template <typename Sink>
void run_tasks(const SweepConfig& config, const std::vector<Task>& tasks, unsigned jobs, Sink&& sink)
{
    std::atomic<std::size_t> next{0};
    std::mutex lock;
    std::exception_ptr failure;
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                TrialOutcome o = run_trial(config, tasks[i].cell, tasks[i].trial);
                std::lock_guard<std::mutex> g(lock);
                sink(std::move(o));
            } catch (...) {
                std::lock_guard<std::mutex> g(lock);
                if (!failure) failure = std::current_exception();
                next = tasks.size();
                return;
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, unsigned(std::max<std::size_t>(1, tasks.size()))));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

std::vector<Task> missing_tasks(const SweepConfig& config, const std::vector<std::vector<bool>>& done)
{
    std::vector<Task> tasks;
    for (Index c = 0; c < Index(config.grid.size()); ++c)
        for (Index t = 0; t < config.trials; ++t)
            if (!done[std::size_t(c)][std::size_t(t)]) tasks.push_back({c, t});
    return tasks;
}

void finalize(SweepResult& r, const SweepConfig& config, Index expected)
{
    std::sort(r.outcomes.begin(), r.outcomes.end(),
              [](const TrialOutcome& a, const TrialOutcome& b) { return std::pair(a.cell, a.trial) < std::pair(b.cell, b.trial); });
    r.complete = Index(r.outcomes.size()) == expected;
    r.table = summarize(config, r.outcomes);
}

} // namespace

SweepResult sweep(const SweepConfig& config, const SweepOptions& options)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::vector<bool>> done(config.grid.size(), std::vector<bool>(std::size_t(config.trials), false));
    auto tasks = missing_tasks(config, done);
    if (options.max_trials && Index(tasks.size()) > *options.max_trials) tasks.resize(std::size_t(*options.max_trials));
    SweepResult r;
    run_tasks(config, tasks, options.jobs, [&](TrialOutcome o) { r.outcomes.push_back(std::move(o)); });
    r.executed = Index(tasks.size());
    finalize(r, config, Index(config.grid.size()) * config.trials);
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

namespace {

/// Reads the progress log, dropping a truncated final line; rewrites the file
/// with the valid prefix so later appends start on a fresh line.
std::vector<TrialOutcome> read_progress(const std::filesystem::path& path, const SweepConfig& config)
{
    std::vector<TrialOutcome> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    in.close();

    std::string valid;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = text.find('\n', pos);
        const bool last = end == std::string::npos;
        const std::string line = text.substr(pos, last ? std::string::npos : end - pos);
        pos = last ? text.size() : end + 1;
        if (line.empty()) continue;
        try {
            if (last) throw io::ConfigError("unterminated line");
            TrialOutcome o = outcome_from_json(Json::parse(line));
            if (o.cell < 0 || o.cell >= Index(config.grid.size()) || o.trial < 0 || o.trial >= config.trials)
                throw io::ConfigError("progress entry outside the grid");
            out.push_back(std::move(o));
            valid += line + "\n";
        } catch (const std::exception& e) {
            if (!last) throw io::ConfigError(path.string() + ": corrupt progress entry: " + e.what());
        }
    }
    if (valid.size() != text.size()) io::write_text(path, valid);
    return out;
}

Json manifest(const SweepConfig& config, const SweepResult& r)
{
    Json j;
    j["schema"] = io::kSchemaVersion;
    j["version"] = version_string();
    j["config"] = sweep_config_to_json(config);
    j["complete"] = r.complete;
    j["runtime_seconds"] = r.runtime_seconds;
    Index witness_violations = 0, theorem_violations = 0, witness_checked = 0, theorem_all_true = 0;
    Json cells = Json::array();
    for (const auto& c : r.table.rows) {
        cells.push_back({{"n", c.cell.n},
                         {"p", c.cell.p},
                         {"s", c.cell.s},
                         {"tau", io::number(c.tau)},
                         {"trials", c.trials},
                         {"successes", c.successes},
                         {"support_successes", c.support_successes},
                         {"nonconverged", c.nonconverged},
                         {"errors", c.errors},
                         {"assumption_failures", c.assumption_failures},
                         {"witness_checked", c.witness_checked},
                         {"witness_held", c.witness_held},
                         {"witness_violations", c.witness_violations},
                         {"theorem_checked", c.theorem_checked},
                         {"theorem_all_true", c.theorem_all_true},
                         {"theorem_violations", c.theorem_violations},
                         {"nonpd_iterates", c.nonpd_iterates},
                         {"mean_l2_error", io::number(c.mean_l2_error)}});
        witness_violations += c.witness_violations;
        theorem_violations += c.theorem_violations;
        witness_checked += c.witness_checked;
        theorem_all_true += c.theorem_all_true;
    }
    j["cells"] = cells;
    j["invariants"] = {{"witness_checked", witness_checked},
                       {"witness_violations", witness_violations},
                       {"theorem_all_true", theorem_all_true},
                       {"theorem_violations", theorem_violations}};
    return j;
}

} // namespace

SweepResult sweep_to_dir(const SweepConfig& config, const std::filesystem::path& out_dir, const SweepOptions& options)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io::ConfigError("cannot create '" + out_dir.string() + "': " + ec.message());

    const auto config_path = out_dir / "config.json";
    const auto progress_path = out_dir / "progress.jsonl";
    const Json echo = sweep_config_to_json(config);

    SweepResult r;
    if (options.resume && std::filesystem::exists(config_path)) {
        if (io::read_json(config_path) != echo)
            throw io::ConfigError("--resume: the config differs from the one recorded in '" + config_path.string() + "'");
        r.outcomes = read_progress(progress_path, config);
    } else {
        std::filesystem::remove(progress_path, ec);
        io::write_json(config_path, echo);
    }

    std::vector<std::vector<bool>> done(config.grid.size(), std::vector<bool>(std::size_t(config.trials), false));
    std::vector<TrialOutcome> unique;
    for (auto& o : r.outcomes) {
        auto&& row = done[std::size_t(o.cell)];
        if (row[std::size_t(o.trial)]) continue;
        row[std::size_t(o.trial)] = true;
        unique.push_back(std::move(o));
    }
    r.outcomes = std::move(unique);
    r.reused = Index(r.outcomes.size());

    auto tasks = missing_tasks(config, done);
    if (options.max_trials && Index(tasks.size()) > *options.max_trials) tasks.resize(std::size_t(*options.max_trials));
    {
        std::ofstream log(progress_path, std::ios::binary | std::ios::app);
        if (!log) throw io::ConfigError("cannot append to '" + progress_path.string() + "'");
        run_tasks(config, tasks, options.jobs, [&](TrialOutcome o) {
            log << outcome_to_json(o, true).dump() << '\n';
            log.flush();
            r.outcomes.push_back(std::move(o));
        });
    }
    r.executed = Index(tasks.size());
    finalize(r, config, Index(config.grid.size()) * config.trials);
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (r.complete) {
        io::write_text(out_dir / "results.csv", table_to_csv(r.table));
        if (config.trial_log) {
            std::string lines;
            for (const auto& o : r.outcomes) lines += outcome_to_json(o, false).dump() + "\n";
            io::write_text(out_dir / "trials.jsonl", lines);
        }
        io::write_json(out_dir / "manifest.json", manifest(config, r));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Phase curves
// ---------------------------------------------------------------------------

const char* rescale_name(Rescale r)
{
    switch (r) {
    case Rescale::NOverSLogP: return "n/(s log p)";
    case Rescale::NOverS2LogP: return "n/(s^2 log p)";
    case Rescale::NOverS2Log2P: return "n/(s^2 (log p)^2)";
    }
    return "unknown";
}

Rescale default_rescale(ModelKind kind)
{
    switch (kind) {
    case ModelKind::Linear: return Rescale::NOverSLogP;
    case ModelKind::Gamma: return Rescale::NOverS2Log2P;
    default: return Rescale::NOverS2LogP;
    }
}

std::vector<Curve> phase_curve(const SweepTable& table, Rescale rescale)
{
    if (table.rows.empty()) throw InvalidArgument("phase_curve needs a non-empty table");
    std::map<std::pair<Index, Index>, Curve> series;
    for (const auto& r : table.rows) {
        if (r.cell.s < 1 || r.cell.p < 2) throw InvalidArgument("phase_curve needs s >= 1 and p >= 2 in every cell");
        const double s = double(r.cell.s);
        const double logp = std::log(double(r.cell.p));
        double scale = 0;
        switch (rescale) {
        case Rescale::NOverSLogP: scale = s * logp; break;
        case Rescale::NOverS2LogP: scale = s * s * logp; break;
        case Rescale::NOverS2Log2P: scale = s * s * logp * logp; break;
        }
        auto& c = series[{r.cell.p, r.cell.s}];
        c.p = r.cell.p;
        c.s = r.cell.s;
        c.points.push_back({double(r.cell.n) / scale, r.prob, r.wilson_lo, r.wilson_hi, r.cell.n});
    }
    std::vector<Curve> out;
    for (auto& [key, c] : series) {
        std::sort(c.points.begin(), c.points.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.n < b.n; });
        out.push_back(std::move(c));
    }
    return out;
}

std::string version_string()
{
    return SPARSIST_VERSION;
}

} // namespace sparsist
