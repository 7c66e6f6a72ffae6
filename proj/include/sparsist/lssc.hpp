#pragma once

// Local structured smoothness certificates.
//
// A certificate is a constant K and a neighborhood N of beta* such that
//     |D^3 L(beta* + delta)[u, u, e_j]| <= K ||u||_2^2
// for every beta* + delta in N, every u supported on S = supp(beta*) and
// every coordinate j. The analytic constants below are the closed forms for
// each model family; verify_lssc checks a certificate by sampling.

#include "sparsist/loss.hpp"

#include <optional>
#include <random>

namespace sparsist {

struct Neighborhood {
    enum class Shape { Ball2, FrobeniusBallSymmetric, AllSpace };

    Shape shape = Shape::AllSpace;
    double radius = infinity<double>();
    bool support_restricted = false;

    static Neighborhood all_space() { return {}; }
    static Neighborhood ball2(double radius, bool restricted)
    {
        if (!(radius > 0)) throw InvalidArgument("ball radius must be positive");
        return {Shape::Ball2, radius, restricted};
    }
    static Neighborhood frobenius_symmetric(double radius)
    {
        if (!(radius > 0)) throw InvalidArgument("ball radius must be positive");
        return {Shape::FrobeniusBallSymmetric, radius, false};
    }

    bool bounded() const { return shape != Shape::AllSpace; }
};

inline const char* shape_name(Neighborhood::Shape s)
{
    switch (s) {
    case Neighborhood::Shape::Ball2: return "ball2";
    case Neighborhood::Shape::FrobeniusBallSymmetric: return "frobenius_ball_symmetric";
    case Neighborhood::Shape::AllSpace: return "all_space";
    }
    return "unknown";
}

/// Quantities the analytic constants were built from; absent when not used.
struct CertificateConstants {
    std::optional<double> nu;         ///< max_i ||(x_i)_S||_2
    std::optional<double> gamma;      ///< max_i ||x_i||_inf
    std::optional<double> mu;         ///< min_i <x_i, beta*>
    std::optional<double> lambda_max; ///< largest restricted eigenvalue of the Hessian at beta*
    std::optional<double> d_max;      ///< largest diagonal entry of the Hessian at beta*
    std::optional<double> rho_min;    ///< smallest eigenvalue of Theta*
};

struct LsscCertificate {
    enum class Provenance { Analytic, Empirical };

    double K = 0;
    Neighborhood neighborhood;
    std::optional<double> kappa;
    Provenance provenance = Provenance::Analytic;
    CertificateConstants constants;
    std::optional<Index> sampling_budget; ///< set for Empirical certificates
    VectorXd center;
};

struct LsscWitness {
    VectorXd delta;
    VectorXd u;
    Index j = 0;
    double ratio = 0;
};

struct VerificationReport {
    std::string model;
    double K = 0;
    double empirical_max_ratio = 0;
    Index n_delta = 0;
    Index n_dir = 0;
    std::uint64_t seed = 0;
    bool pass = false;
    Index resamples = 0; ///< perturbations redrawn after leaving the domain
    double probe_radius = 0;
    std::optional<LsscWitness> witness; ///< recorded when the check fails
};

constexpr double kLsscPassTolerance = 1e-6;
constexpr double kDefaultSlack = 1.0;

// ---------------------------------------------------------------------------
// Analytic certificates
// ---------------------------------------------------------------------------

/// Largest ||(x_i)_S||_2 over the rows of X.
template <typename Derived>
double max_restricted_row_norm(const Eigen::MatrixBase<Derived>& X, const Support& S)
{
    if (S.empty()) return 0.0;
    return static_cast<double>(X(Eigen::all, S).rowwise().norm().maxCoeff());
}

template <typename Scalar>
LsscCertificate analytic_certificate(const LossOracle<Scalar>& oracle, const Vector<Scalar>& beta_star,
                                     const Support& S, double kappa = kDefaultSlack)
{
    LsscCertificate cert;
    cert.center = beta_star.template cast<double>();
    cert.provenance = LsscCertificate::Provenance::Analytic;

    switch (oracle.kind()) {
    case ModelKind::Linear:
        if (!oracle.in_domain(beta_star)) throw DomainViolation("beta* is not finite");
        cert.K = 0;
        cert.neighborhood = Neighborhood::all_space();
        return cert;

    case ModelKind::Logistic: {
        if (!oracle.in_domain(beta_star)) throw DomainViolation("beta* is not finite");
        const auto& X = oracle.data().design();
        const double nu = max_restricted_row_norm(X, S);
        const double gamma = static_cast<double>(X.cwiseAbs().maxCoeff());
        cert.K = 0.25 * nu * nu * gamma;
        cert.neighborhood = Neighborhood::all_space();
        cert.constants.nu = nu;
        cert.constants.gamma = gamma;
        return cert;
    }

    case ModelKind::Gamma: {
        if (!(kappa > 0)) throw InvalidArgument("slack kappa must be positive");
        if (!oracle.in_domain(beta_star)) throw DomainViolation("beta* has a non-positive linear predictor");
        const auto& X = oracle.data().design();
        const double nu = max_restricted_row_norm(X, S);
        const double gamma = static_cast<double>(X.cwiseAbs().maxCoeff());
        const double mu = static_cast<double>((X * beta_star).minCoeff());
        const double inflate = std::pow(1.0 + 1.0 / kappa, 3);
        cert.K = 2.0 * inflate * nu * nu * gamma / (mu * mu * mu);
        cert.neighborhood = Neighborhood::ball2(mu / ((1.0 + kappa) * nu), true);
        cert.kappa = kappa;
        cert.constants.nu = nu;
        cert.constants.gamma = gamma;
        cert.constants.mu = mu;
        const MatrixXd h = oracle.hessian(beta_star).template cast<double>();
        cert.constants.d_max = h.diagonal().maxCoeff();
        if (!S.empty()) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(h(S, S), Eigen::EigenvaluesOnly);
            cert.constants.lambda_max = es.eigenvalues().maxCoeff();
        }
        return cert;
    }

    case ModelKind::GraphSelect: {
        if (!(kappa > 0)) throw InvalidArgument("slack kappa must be positive");
        const Matrix<Scalar> theta = oracle.symmetric_part(beta_star);
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(theta, Eigen::EigenvaluesOnly);
        const double rho = static_cast<double>(es.eigenvalues().minCoeff());
        if (!(rho > 0)) throw DegenerateSpectrum("Theta* has smallest eigenvalue " + std::to_string(rho));
        cert.K = 2.0 * std::pow((1.0 + kappa) / kappa, 3) / (rho * rho * rho);
        cert.neighborhood = Neighborhood::frobenius_symmetric(rho / (1.0 + kappa));
        cert.kappa = kappa;
        cert.constants.rho_min = rho;
        return cert;
    }
    }
    throw InvalidArgument("unknown model");
}

// ---------------------------------------------------------------------------
// Combination (positive weighted sums)
// ---------------------------------------------------------------------------

/// Certificate of w1 * f1 + w2 * f2. Ball2 and the symmetric Frobenius ball
/// measure the same vector norm, so a mixed pair intersects to the symmetric
/// ball of the smaller radius.
inline LsscCertificate combine_certificates(const LsscCertificate& c1, double w1, const LsscCertificate& c2,
                                            double w2)
{
    if (!(w1 > 0 && w2 > 0)) throw InvalidArgument("combination weights must be positive");
    if (c1.center.size() != c2.center.size() || (c1.center - c2.center).lpNorm<Eigen::Infinity>() > 0)
        throw IncompatibleCenters("certificates are centered at different points");

    using Shape = Neighborhood::Shape;
    LsscCertificate out;
    out.center = c1.center;
    out.K = w1 * c1.K + w2 * c2.K;
    const auto& a = c1.neighborhood;
    const auto& b = c2.neighborhood;
    if (!a.bounded()) {
        out.neighborhood = b;
    } else if (!b.bounded()) {
        out.neighborhood = a;
    } else {
        out.neighborhood.shape =
            (a.shape == Shape::FrobeniusBallSymmetric || b.shape == Shape::FrobeniusBallSymmetric)
                ? Shape::FrobeniusBallSymmetric
                : Shape::Ball2;
        out.neighborhood.radius = std::min(a.radius, b.radius);
        out.neighborhood.support_restricted = a.support_restricted || b.support_restricted;
    }
    const bool analytic = c1.provenance == LsscCertificate::Provenance::Analytic &&
                          c2.provenance == LsscCertificate::Provenance::Analytic;
    out.provenance = analytic ? LsscCertificate::Provenance::Analytic : LsscCertificate::Provenance::Empirical;
    if (c1.sampling_budget || c2.sampling_budget)
        out.sampling_budget = std::max(c1.sampling_budget.value_or(0), c2.sampling_budget.value_or(0));
    return out;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar, typename Rng>
Vector<Scalar> gaussian_vector(Index m, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector<Scalar> g(m);
    for (Index i = 0; i < m; ++i) g(i) = Scalar(normal(rng));
    return g;
}

/// Isotropic Gaussian over symmetric d x d matrices in the Frobenius metric,
/// restricted to the vectorized coordinates in `mask` (all when empty).
template <typename Scalar, typename Rng>
Vector<Scalar> gaussian_symmetric(Index d, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix<Scalar> g(d, d);
    for (Index i = 0; i < d; ++i) {
        g(i, i) = Scalar(normal(rng));
        for (Index j = i + 1; j < d; ++j) {
            const Scalar v = Scalar(normal(rng) * std::sqrt(0.5));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return vec(g);
}

/// Uniform draw from the radius-r ball of the space spanned by the sampler.
template <typename Scalar, typename Rng, typename Sampler>
Vector<Scalar> uniform_in_ball(double radius, Index dimension, Rng& rng, Sampler&& direction)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector<Scalar> g;
    do {
        g = direction();
    } while (!(g.norm() > Scalar(0)));
    const double scale = radius * std::pow(unif(rng), 1.0 / double(std::max<Index>(dimension, 1)));
    return g / g.norm() * Scalar(scale);
}

template <typename Scalar>
Vector<Scalar> restrict_to(const Vector<Scalar>& v, const Support& S)
{
    Vector<Scalar> out = Vector<Scalar>::Zero(v.size());
    for (Index i : S) out(i) = v(i);
    return out;
}

/// Perturbation sampler matching a neighborhood shape.
template <typename Scalar, typename OracleT, typename Rng>
Vector<Scalar> sample_perturbation(const OracleT& oracle, const Neighborhood& nb, double radius, bool restricted,
                                   const Support& S, Rng& rng)
{
    const Index p = oracle.dim();
    const bool graph = oracle.kind() == ModelKind::GraphSelect;
    if (graph || nb.shape == Neighborhood::Shape::FrobeniusBallSymmetric) {
        const Index d = oracle.matrix_dim();
        return uniform_in_ball<Scalar>(radius, d * (d + 1) / 2, rng,
                                       [&] { return gaussian_symmetric<Scalar>(d, rng); });
    }
    if (restricted) {
        return uniform_in_ball<Scalar>(radius, Index(S.size()), rng,
                                       [&] { return restrict_to<Scalar>(gaussian_vector<Scalar>(p, rng), S); });
    }
    return uniform_in_ball<Scalar>(radius, p, rng, [&] { return gaussian_vector<Scalar>(p, rng); });
}

} // namespace detail

/// Options beyond the sampling budget.
struct VerifyOverrides {
    /// Radius probed for AllSpace certificates (default 1).
    std::optional<double> probe_radius;
    /// Draw perturbations from the full ball even when the certificate's
    /// neighborhood is support-restricted.
    bool unrestricted_delta = false;
};

constexpr int kMaxDomainRetries = 100;

/// Empirical check of a certificate. `OracleT` needs dim(), matrix_dim(),
/// kind(), in_domain() and third_directional().
template <typename OracleT, typename Scalar>
VerificationReport verify_lssc(const OracleT& oracle, const Vector<Scalar>& beta_star, const Support& S,
                               const LsscCertificate& cert, Index n_delta, Index n_dir, std::uint64_t seed,
                               const VerifyOverrides& overrides = {})
{
    if (n_delta < 1 || n_dir < 1) throw InvalidArgument("sampling budget must be positive");
    const Index p = oracle.dim();
    const bool graph = oracle.kind() == ModelKind::GraphSelect;
    const auto& nb = cert.neighborhood;
    const double radius = nb.bounded() ? nb.radius : overrides.probe_radius.value_or(1.0);
    const bool restricted = nb.support_restricted && !overrides.unrestricted_delta;

    VerificationReport report;
    report.model = model_name(oracle.kind());
    report.K = cert.K;
    report.n_delta = n_delta;
    report.n_dir = n_dir;
    report.seed = seed;
    report.probe_radius = radius;

    std::mt19937_64 rng(seed);
    LsscWitness best;
    best.ratio = -1;

    for (Index a = 0; a < n_delta; ++a) {
        Vector<Scalar> delta;
        int tries = 0;
        for (;;) {
            delta = detail::sample_perturbation<Scalar>(oracle, nb, radius, restricted, S, rng);
            if (oracle.in_domain(Vector<Scalar>(beta_star + delta))) break;
            ++report.resamples;
            if (++tries > kMaxDomainRetries)
                throw DomainViolation("could not draw an in-domain perturbation after 100 retries");
        }
        const Vector<Scalar> point = beta_star + delta;

        for (Index b = 0; b < n_dir; ++b) {
            if (S.empty()) break;
            Vector<Scalar> u;
            do {
                if (graph) {
                    u = detail::restrict_to<Scalar>(detail::gaussian_symmetric<Scalar>(oracle.matrix_dim(), rng), S);
                } else {
                    u = detail::restrict_to<Scalar>(detail::gaussian_vector<Scalar>(p, rng), S);
                }
            } while (!(u.norm() > Scalar(0)));
            u /= u.norm();

            const Vector<Scalar> t = oracle.third_directional(point, u);
            Index j = 0;
            const double ratio = static_cast<double>(t.cwiseAbs().maxCoeff(&j) / u.squaredNorm());
            if (ratio > best.ratio) {
                best.ratio = ratio;
                best.j = j;
                best.delta = delta.template cast<double>();
                best.u = u.template cast<double>();
            }
        }
    }

    report.empirical_max_ratio = std::max(best.ratio, 0.0);
    report.pass = report.empirical_max_ratio <= cert.K * (1.0 + kLsscPassTolerance);
    if (!report.pass) report.witness = best;
    return report;
}

/// Empirical unstructured constant: max ||H(beta* + delta) - H(beta*)||_2 / ||delta||_2
/// over perturbations drawn uniformly from the probe ball.
template <typename OracleT, typename Scalar>
double hessian_lipschitz_ratio(const OracleT& oracle, const Vector<Scalar>& beta_star, double probe_radius,
                               Index n_samples, std::uint64_t seed)
{
    if (!(probe_radius > 0) || n_samples < 1) throw InvalidArgument("probe radius and budget must be positive");
    const Matrix<Scalar> h0 = oracle.hessian(beta_star);
    std::mt19937_64 rng(seed);
    const Support none;
    double best = 0;
    for (Index a = 0; a < n_samples; ++a) {
        Vector<Scalar> delta;
        int tries = 0;
        for (;;) {
            delta = detail::sample_perturbation<Scalar>(oracle, Neighborhood::all_space(), probe_radius, false,
                                                        none, rng);
            if (oracle.in_domain(Vector<Scalar>(beta_star + delta))) break;
            if (++tries > kMaxDomainRetries)
                throw DomainViolation("could not draw an in-domain perturbation after 100 retries");
        }
        const Matrix<Scalar> diff = oracle.hessian(Vector<Scalar>(beta_star + delta)) - h0;
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(diff, Eigen::EigenvaluesOnly);
        const double spectral = static_cast<double>(es.eigenvalues().cwiseAbs().maxCoeff());
        best = std::max(best, spectral / static_cast<double>(delta.norm()));
    }
    return best;
}

} // namespace sparsist
