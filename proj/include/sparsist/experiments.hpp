#pragma once

// Monte Carlo estimation of sign-recovery probabilities over (n, p, s) grids.
//
// Trial t of cell (n, p, s) draws everything from
// mix_seed(mix_seed(mix_seed(mix_seed(master, n), p), s), t), so results do not
// depend on scheduling, worker count or which other cells are present.

#include "sparsist/io.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <variant>

namespace sparsist {

struct Cell {
    Index n = 0;
    Index p = 0; ///< graph: matrix dimension d
    Index s = 0; ///< graph: off-diagonal nonzeros

    auto operator<=>(const Cell&) const = default;
};

struct TauRecommended {
    std::optional<double> C; ///< default 8 / alpha_assumed
};
struct TauFixed {
    double tau = 0;
};
struct TauOracleTheorem {};

using TauPolicy = std::variant<TauRecommended, TauFixed, TauOracleTheorem>;

struct SweepConfig {
    ModelSpec model = LinearModel{};
    DesignFamily family = DesignFamily::GaussianIID;
    std::vector<Cell> grid;
    Index trials = 1;
    TauPolicy tau_policy = TauRecommended{};
    double alpha_assumed = 1.0; ///< alpha used by the recommended policy's constant and failure bound
    double beta_min = 1.0;
    double beta_max = 1.0;
    std::optional<bool> all_positive;
    double rho = 0.5;
    GraphPattern pattern = GraphPattern::Random;
    double graph_c = 1.0; ///< sub-Gaussian constant of the scaled graph samples
    double kappa = 1.0;   ///< LSSC slack for theorem checks
    bool theorem_check = false;
    bool witness = false;
    bool trial_log = false;
    SolverOptions solver;
    std::uint64_t seed = 0;

    void validate() const;
};

SweepConfig sweep_config_from_json(const io::Json& j);
io::Json sweep_config_to_json(const SweepConfig& c);

std::uint64_t trial_seed(std::uint64_t master, const Cell& cell, Index trial);

struct TrialOutcome {
    Index cell = 0; ///< index into the config grid
    Index trial = 0;
    double tau = 0;
    bool converged = false;
    bool support_match = false;
    bool sign_match = false;
    double l2_error = 0;
    Index iterations = 0;
    double kkt_residual = 0;
    bool assumptions_ok = true; ///< conditions 2 and 3 at beta*; false also when they could not be evaluated
    bool witness_checked = false;
    bool witness_held = false;
    bool witness_support_equal = false; ///< supp(beta_hat) == supp(beta_check)
    bool theorem_checked = false;
    std::array<bool, kConditionCount> conditions{};
    bool theorem_overall = false;
    Index nonpd_iterates = 0;
    std::string error; ///< generation or solver failure, empty otherwise
    double wall_seconds = 0;

    bool witness_violation() const { return witness_checked && witness_held && !witness_support_equal; }
    bool theorem_violation() const { return theorem_checked && theorem_overall && !sign_match; }
};

io::Json outcome_to_json(const TrialOutcome& o, bool with_time);
TrialOutcome outcome_from_json(const io::Json& j);

TrialOutcome run_trial(const SweepConfig& config, Index cell, Index trial);

struct CellSummary {
    Cell cell;
    double tau = 0; ///< mean over trials
    Index trials = 0;
    Index successes = 0; ///< sign matches
    Index support_successes = 0;
    double prob = 0;
    double wilson_lo = 0;
    double wilson_hi = 0;
    Index nonconverged = 0;
    Index errors = 0;
    Index assumption_failures = 0;
    Index witness_checked = 0;
    Index witness_held = 0;
    Index witness_violations = 0;
    Index theorem_checked = 0;
    Index theorem_all_true = 0;
    Index theorem_violations = 0;
    Index nonpd_iterates = 0;
    double mean_l2_error = 0;
};

struct SweepTable {
    std::string model;
    std::vector<CellSummary> rows; ///< sorted by (p, s, n)
};

constexpr double kWilsonZ = 1.959963984540054;

struct Interval {
    double lo;
    double hi;
};

Interval wilson_interval(Index successes, Index trials, double z = kWilsonZ);

/// Aggregates outcomes (any order) into a table.
SweepTable summarize(const SweepConfig& config, const std::vector<TrialOutcome>& outcomes);

std::string table_to_csv(const SweepTable& table);

struct SweepOptions {
    unsigned jobs = 1;
    bool resume = false;
    std::optional<Index> max_trials; ///< stop after this many new trials (simulated interruption)
};

struct SweepResult {
    bool complete = false;
    Index executed = 0; ///< trials run in this invocation
    Index reused = 0;   ///< trials read back from the progress log
    SweepTable table;
    std::vector<TrialOutcome> outcomes; ///< sorted by (cell, trial)
    double runtime_seconds = 0;
};

/// In-memory sweep.
SweepResult sweep(const SweepConfig& config, const SweepOptions& options = {});

/// Sweep persisted under `out_dir`: progress.jsonl (appended per trial),
/// results.csv, manifest.json and, when trial_log is set, trials.jsonl.
SweepResult sweep_to_dir(const SweepConfig& config, const std::filesystem::path& out_dir,
                         const SweepOptions& options = {});

enum class Rescale { NOverSLogP, NOverS2LogP, NOverS2Log2P };

const char* rescale_name(Rescale r);
Rescale default_rescale(ModelKind kind);

struct CurvePoint {
    double x;
    double prob;
    double lo;
    double hi;
    Index n;
};

struct Curve {
    Index p;
    Index s;
    std::vector<CurvePoint> points; ///< increasing n
};

/// One series per (p, s). Throws InvalidArgument on an empty table or s = 0 cells.
std::vector<Curve> phase_curve(const SweepTable& table, Rescale rescale);

/// Version string recorded in manifests.
std::string version_string();

} // namespace sparsist
