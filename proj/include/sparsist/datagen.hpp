#pragma once

// Synthetic ground truths, designs and responses.
//
// Every generator is a pure function of its arguments and seed. Designs always
// satisfy the column normalization ||X_j||_2 <= sqrt(n).

#include "sparsist/conditions.hpp"
#include "sparsist/loss.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace sparsist {

enum class DesignFamily { GaussianIID, Orthogonalized, DuplicateColumnAdversarial };

const char* design_family_name(DesignFamily f);
DesignFamily parse_design_family(const std::string& name);

/// Rescales every column whose norm exceeds sqrt(n) to norm exactly sqrt(n).
void clip_column_norms(MatrixXd& X);

/// n x p design. Orthogonalized needs n >= p and yields X^T X = n I;
/// DuplicateColumnAdversarial copies column 0 into column p - 1.
MatrixXd gen_design(Index n, Index p, DesignFamily family, std::uint64_t seed);

/// s-sparse vector with uniformly chosen support, magnitudes uniform in
/// [beta_min, beta_max] and fair-coin signs (all positive on request).
GroundTruth gen_sparse_beta(Index p, Index s, double beta_min, double beta_max, std::uint64_t seed,
                            bool all_positive = false);

struct ResponseDraw {
    VectorXd y;
    ModelSpec spec; ///< the input spec; for Gamma, mu is replaced by the realized min_i <x_i, beta*>
};

/// Linear: y = X beta* + c W with W standard normal. Logistic: Bernoulli(sigma(<x_i, beta*>)).
/// Gamma: shape k, scale 1 / (k <x_i, beta*>). Throws PredictorFloorViolation for Gamma when
/// some <x_i, beta*> <= 0.
ResponseDraw gen_responses(const ModelSpec& model, const MatrixXd& X, const GroundTruth& truth, std::uint64_t seed);

enum class GraphPattern { Random, Chain };

struct GraphTruth {
    MatrixXd theta;
    MatrixXd sigma;
    Support S; ///< indices into the row-major vectorization, diagonal included
    Index s = 0;
    double rho_min = 0;     ///< smallest eigenvalue of theta
    double kappa_sigma = 0; ///< largest diagonal entry of sigma

    Index dim() const { return theta.rows(); }
    GroundTruth ground_truth() const;
};

/// Diagonally dominant sparse precision matrix: s_offdiag / 2 symmetric pairs
/// with entries in +-[0.1, 0.3], diagonal = absolute row sum + rho_target.
GraphTruth gen_graph_truth(Index d, Index s_offdiag, double rho_target, std::uint64_t seed,
                           GraphPattern pattern = GraphPattern::Random);

struct GraphSamples {
    MatrixXd samples;   ///< n x d, one sample per row
    MatrixXd sigma_hat; ///< (1/n) sum X_i X_i^T
};

/// n zero-mean Gaussian vectors with covariance sigma. Throws NotPD.
GraphSamples gen_graph_samples(const MatrixXd& sigma, Index n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

struct InstanceConfig {
    ModelSpec model = LinearModel{};
    DesignFamily family = DesignFamily::GaussianIID;
    Index n = 0;
    Index p = 0; ///< for the graph model: the matrix dimension d
    Index s = 0; ///< for the graph model: the number of off-diagonal nonzeros
    double beta_min = 1.0;
    double beta_max = 1.0;
    std::optional<bool> all_positive; ///< defaults to true for Gamma
    double rho = 0.5;                 ///< graph only
    GraphPattern pattern = GraphPattern::Random;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Instance {
    ModelSpec model;
    Index n = 0;
    std::uint64_t seed = 0;
    MatrixXd X;         ///< design, or graph samples
    VectorXd y;         ///< empty for the graph model
    MatrixXd sigma_hat; ///< graph only
    GroundTruth truth;

    ModelKind kind() const { return kind_of(model); }
    Oracle oracle() const;
};

/// Draws an instance; the design, beta* and responses use independent streams of `seed`.
Instance make_instance(const InstanceConfig& config);

} // namespace sparsist
