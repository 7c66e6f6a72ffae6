#include "sparsist/lssc.hpp"

#include "support/random_oracles.hpp"

#include <doctest.h>

using namespace sparsist;
using namespace sparsist::testing;

namespace {

/// w1 * f1 + w2 * f2 over a shared parameter space.
struct WeightedSum {
    const Oracle& f1;
    double w1;
    const Oracle& f2;
    double w2;

    Index dim() const { return f1.dim(); }
    Index matrix_dim() const { return f1.matrix_dim(); }
    ModelKind kind() const { return f2.kind(); }
    bool in_domain(const VectorXd& b) const { return f1.in_domain(b) && f2.in_domain(b); }
    VectorXd third_directional(const VectorXd& b, const VectorXd& u) const
    {
        return w1 * f1.third_directional(b, u) + w2 * f2.third_directional(b, u);
    }
};

Oracle logistic_with_nu2_gamma1()
{
    MatrixXd X = MatrixXd::Zero(8, 5);
    X.row(0) << 1, 1, 1, 1, 0;
    X.row(1) << 0.5, -0.5, 0, 0.2, 1;
    VectorXd y = VectorXd::Zero(8);
    y(0) = 1;
    return Oracle(LogisticModel{}, Dataset<double>::regression(X, y));
}

/// One informative row (M, 1, 0, ...) among M^2 rows; beta* supported on coordinate 1.
Oracle separation_instance(double M, Index p)
{
    const Index n = Index(M * M);
    MatrixXd X = MatrixXd::Zero(n, p);
    X(0, 0) = M;
    X(0, 1) = 1;
    return Oracle(LogisticModel{}, Dataset<double>::regression(X, VectorXd::Zero(n)));
}

Oracle gamma_single()
{
    return Oracle(GammaModel{1, 1}, Dataset<double>::regression(MatrixXd::Ones(1, 1), VectorXd::Ones(1)));
}

LsscCertificate ball_cert(double K, double radius, const VectorXd& center)
{
    LsscCertificate c;
    c.K = K;
    c.neighborhood = Neighborhood::ball2(radius, false);
    c.center = center;
    return c;
}

VectorXd positive_beta(Index p, const Support& S, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.5, 1.5);
    VectorXd b = VectorXd::Zero(p);
    for (Index i : S) b(i) = u(rng);
    return b;
}

} // namespace

TEST_CASE("analytic certificates")
{
    std::mt19937_64 rng(1);
    SUBCASE("linear")
    {
        const auto f = random_linear(20, 5, rng);
        const auto c = analytic_certificate(f, VectorXd(gaussian_vector(5, rng)), Support{0, 1, 2, 3, 4});
        CHECK(c.K == 0.0);
        CHECK(c.neighborhood.shape == Neighborhood::Shape::AllSpace);
    }
    SUBCASE("logistic")
    {
        const auto f = logistic_with_nu2_gamma1();
        VectorXd b = VectorXd::Zero(5);
        b.head(4).setConstant(0.3);
        const auto c = analytic_certificate(f, b, Support{0, 1, 2, 3});
        CHECK(c.K == doctest::Approx(1.0));
        CHECK(*c.constants.nu == doctest::Approx(2.0));
        CHECK(*c.constants.gamma == doctest::Approx(1.0));
    }
    SUBCASE("graph")
    {
        const Oracle f(GraphModel{3}, Dataset<double>::covariance(MatrixXd::Identity(3, 3), 10));
        const auto c = analytic_certificate(f, VectorXd(vec(MatrixXd(MatrixXd::Identity(3, 3)))), Support{0, 4, 8}, 1.0);
        CHECK(c.K == doctest::Approx(16.0));
        CHECK(c.neighborhood.radius == doctest::Approx(0.5));
        CHECK(c.neighborhood.shape == Neighborhood::Shape::FrobeniusBallSymmetric);
        CHECK_THROWS_AS(analytic_certificate(f, VectorXd(VectorXd::Zero(9)), Support{}, 1.0), DegenerateSpectrum);
    }
    SUBCASE("gamma")
    {
        const auto f = random_gamma(30, 4, rng);
        const Support S{0, 2};
        const VectorXd b = positive_beta(4, S, rng);
        const double kappa = 0.5;
        const auto c = analytic_certificate(f, b, S, kappa);
        const MatrixXd& X = f.data().design();
        double nu = 0, gam = 0, mu = 1e300;
        for (Index i = 0; i < X.rows(); ++i) {
            nu = std::max(nu, std::hypot(X(i, 0), X(i, 2)));
            gam = std::max(gam, X.row(i).cwiseAbs().maxCoeff());
            mu = std::min(mu, X.row(i).dot(b));
        }
        CHECK(c.K == doctest::Approx(2 * std::pow(1 + 1 / kappa, 3) * nu * nu * gam / std::pow(mu, 3)));
        CHECK(c.neighborhood.radius == doctest::Approx(mu / ((1 + kappa) * nu)));
        CHECK(c.neighborhood.support_restricted);
        CHECK(c.constants.lambda_max.has_value());
        CHECK_THROWS_AS(analytic_certificate(f, VectorXd(-b), S), DomainViolation);
    }
}

TEST_CASE("verify_lssc on analytic certificates")
{
    std::mt19937_64 rng(2);
    SUBCASE("linear")
    {
        const auto f = random_linear(20, 6, rng);
        const Support S{1, 4};
        VectorXd b = VectorXd::Zero(6);
        b(1) = 1;
        b(4) = -2;
        const auto rep = verify_lssc(f, b, S, analytic_certificate(f, b, S), 20, 20, 7);
        CHECK(rep.pass);
        CHECK(rep.empirical_max_ratio == 0.0);
    }
    SUBCASE("logistic 200x200")
    {
        const auto f = random_logistic(40, 8, rng);
        const Support S{0, 3, 5};
        VectorXd b = VectorXd::Zero(8);
        b(0) = 1;
        b(3) = -0.5;
        b(5) = 2;
        const auto cert = analytic_certificate(f, b, S);
        const auto rep = verify_lssc(f, b, S, cert, 200, 200, 9);
        CHECK(rep.pass);
        CHECK(rep.empirical_max_ratio > 0);
        CHECK(rep.empirical_max_ratio <= cert.K);
    }
    SUBCASE("gamma")
    {
        const auto f = random_gamma(30, 5, rng);
        const Support S{1, 2};
        const VectorXd b = positive_beta(5, S, rng);
        const auto rep = verify_lssc(f, b, S, analytic_certificate(f, b, S), 100, 100, 3);
        CHECK(rep.pass);
    }
    SUBCASE("graph")
    {
        const auto f = random_graph(4, rng);
        const MatrixXd theta = random_spd(4, rng);
        Support S;
        for (Index i = 0; i < 16; ++i)
            if (i / 4 == i % 4 || (i / 4 == 0 && i % 4 == 1) || (i / 4 == 1 && i % 4 == 0)) S.push_back(i);
        const auto rep = verify_lssc(f, VectorXd(vec(theta)), S, analytic_certificate(f, VectorXd(vec(theta)), S), 100,
                                     100, 4);
        CHECK(rep.pass);
    }
}

TEST_CASE("forced failure records a witness")
{
    std::mt19937_64 rng(3);
    const auto f = random_logistic(30, 5, rng);
    const Support S{0, 2};
    VectorXd b = VectorXd::Zero(5);
    b(0) = 1;
    b(2) = 1;
    auto cert = analytic_certificate(f, b, S);
    const auto first = verify_lssc(f, b, S, cert, 30, 30, 5);
    cert.K = 0.5 * first.empirical_max_ratio;
    const auto rep = verify_lssc(f, b, S, cert, 30, 30, 5);
    CHECK_FALSE(rep.pass);
    REQUIRE(rep.witness.has_value());
    CHECK(rep.witness->ratio == doctest::Approx(first.empirical_max_ratio));
    CHECK(rep.witness->u(1) == 0.0);
    const double recomputed = std::abs(f.third_directional(b + rep.witness->delta, rep.witness->u)(rep.witness->j)) /
                              rep.witness->u.squaredNorm();
    CHECK(recomputed == doctest::Approx(rep.witness->ratio));
}

TEST_CASE("combine_certificates")
{
    const VectorXd c = VectorXd::Ones(3);
    SUBCASE("ball arithmetic")
    {
        const auto out = combine_certificates(ball_cert(1, 2, c), 1, ball_cert(3, 1, c), 1);
        CHECK(out.K == 4.0);
        CHECK(out.neighborhood.radius == 1.0);
    }
    SUBCASE("all space absorbs")
    {
        LsscCertificate lin;
        lin.center = c;
        const auto out = combine_certificates(lin, 2, ball_cert(5, 1, c), 1);
        CHECK(out.K == 5.0);
        CHECK(out.neighborhood.radius == 1.0);
        CHECK(out.neighborhood.shape == Neighborhood::Shape::Ball2);
    }
    SUBCASE("convex combination")
    {
        const auto out = combine_certificates(ball_cert(1, 2, c), 0.5, ball_cert(1, 2, c), 0.5);
        CHECK(out.K == 1.0);
        CHECK(out.neighborhood.radius == 2.0);
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(combine_certificates(ball_cert(1, 2, c), 1, ball_cert(1, 2, VectorXd::Zero(3)), 1),
                        IncompatibleCenters);
        CHECK_THROWS_AS(combine_certificates(ball_cert(1, 2, c), 0, ball_cert(1, 2, c), 1), InvalidArgument);
    }
    SUBCASE("weighted sum oracle passes on the intersection")
    {
        std::mt19937_64 rng(4);
        const auto logit = random_logistic(30, 4, rng);
        const auto gam = random_gamma(30, 4, rng);
        const Support S{0, 3};
        const VectorXd b = positive_beta(4, S, rng);
        const auto cl = analytic_certificate(logit, b, S);
        const auto cg = analytic_certificate(gam, b, S);
        const auto cert = combine_certificates(cl, 0.7, cg, 1.3);
        CHECK(cert.neighborhood.radius == cg.neighborhood.radius);
        CHECK(cert.neighborhood.support_restricted);
        const WeightedSum sum{logit, 0.7, gam, 1.3};
        CHECK(verify_lssc(sum, b, S, cert, 100, 100, 8).pass);
    }
}

TEST_CASE("hessian_lipschitz_ratio")
{
    std::mt19937_64 rng(5);
    SUBCASE("linear is zero")
    {
        const auto f = random_linear(20, 4, rng);
        CHECK(hessian_lipschitz_ratio(f, VectorXd(VectorXd::Zero(4)), 1.0, 20, 1) == doctest::Approx(0.0));
    }
    SUBCASE("gamma one-dimensional envelope")
    {
        const auto f = gamma_single();
        const double r = hessian_lipschitz_ratio(f, VectorXd(VectorXd::Ones(1)), 0.1, 500, 2);
        CHECK(r <= 2 / std::pow(0.9, 3));
        CHECK(r > 2.0);
    }
    SUBCASE("logistic separation grows with M")
    {
        double prev_gap = 0;
        for (double M : {4.0, 8.0, 16.0}) {
            const auto f = separation_instance(M, 3);
            VectorXd b = VectorXd::Zero(3);
            b(1) = 0.5;
            const Support S{1};
            const auto cert = analytic_certificate(f, b, S);
            CHECK(cert.K == doctest::Approx(M / 4));
            VerifyOverrides probe;
            probe.probe_radius = 1.0;
            const auto rep = verify_lssc(f, b, S, cert, 100, 50, 3, probe);
            const double unstructured = hessian_lipschitz_ratio(f, b, 1.0, 100, 3);
            CHECK(rep.pass);
            CHECK(rep.empirical_max_ratio < unstructured);
            const double gap = unstructured / rep.empirical_max_ratio;
            CHECK(gap > prev_gap);
            prev_gap = gap;
        }
    }
}

TEST_CASE("structured ratio is below the unstructured ratio on common samples")
{
    std::mt19937_64 rng(6);
    for (int t = 0; t < 5; ++t) {
        const auto f = random_logistic(30, 5, rng);
        const Support S{0, 1};
        VectorXd b = VectorXd::Zero(5);
        b(0) = 0.5;
        b(1) = -1;
        VerifyOverrides probe;
        probe.probe_radius = 0.5;
        const auto rep = verify_lssc(f, b, S, analytic_certificate(f, b, S), 100, 50, 10 + t, probe);
        CHECK(rep.empirical_max_ratio <= hessian_lipschitz_ratio(f, b, 0.5, 100, 10 + t));
    }
}

TEST_CASE("gamma counterexample to the structured-below-unstructured ordering")
{
    // One sample x = 1, beta* = 1, radius 0.1: the structured maximum 2 / 0.9^3 is
    // attained at delta = -0.1 while the Hessian difference quotient there is
    // (1/0.81 - 1) / 0.1.
    const auto f = gamma_single();
    const VectorXd b = VectorXd::Ones(1);
    const VectorXd u = VectorXd::Ones(1);
    const VectorXd lo = VectorXd::Constant(1, 0.9);
    const double structured = std::abs(f.third_directional(lo, u)(0));
    const double quotient = (f.hessian(lo)(0, 0) - f.hessian(b)(0, 0)) / 0.1;
    CHECK(structured == doctest::Approx(2 / std::pow(0.9, 3)));
    CHECK(quotient == doctest::Approx((1 / 0.81 - 1) / 0.1));
    CHECK(structured > quotient);
}

TEST_CASE("trilinear form is symmetric in its arguments")
{
    std::mt19937_64 rng(7);
    const auto check = [&](const Oracle& f, const VectorXd& b, auto draw) {
        for (int t = 0; t < 10; ++t) {
            const VectorXd u = draw(), v = draw(), w = draw();
            const double ref = f.third_trilinear(b, u, v, w);
            const double tol = 1e-9 * std::max(1.0, std::abs(ref));
            CHECK(std::abs(f.third_trilinear(b, u, w, v) - ref) <= tol);
            CHECK(std::abs(f.third_trilinear(b, v, u, w) - ref) <= tol);
            CHECK(std::abs(f.third_trilinear(b, v, w, u) - ref) <= tol);
            CHECK(std::abs(f.third_trilinear(b, w, u, v) - ref) <= tol);
            CHECK(std::abs(f.third_trilinear(b, w, v, u) - ref) <= tol);
        }
    };
    const auto vecs = [&] { return gaussian_vector(5, rng); };
    check(random_logistic(20, 5, rng), gaussian_vector(5, rng), vecs);
    check(random_gamma(20, 5, rng), VectorXd(VectorXd::Ones(5)), vecs);
    check(random_graph(3, rng), VectorXd(vec(random_spd(3, rng))), [&] { return random_symmetric_vec(3, rng); });
}

TEST_CASE("gamma third form against the Hessian at beta* per coordinate")
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(0.2, 1.0);
    for (int t = 0; t < 200; ++t) {
        MatrixXd X(1, 4);
        for (Index j = 0; j < 4; ++j) X(0, j) = pos(rng);
        const Oracle f(GammaModel{1, 0.1}, Dataset<double>::regression(X, VectorXd::Zero(1)));
        const Support S{0, 1};
        const VectorXd b = positive_beta(4, S, rng);
        VectorXd delta = VectorXd::Zero(4);
        delta.head(2) = gaussian_vector(2, rng, 0.2);
        const double gamma = X.row(0).dot(delta) / X.row(0).dot(b);
        if (std::abs(gamma) >= 0.95) continue;
        VectorXd u = VectorXd::Zero(4);
        u.head(2) = gaussian_vector(2, rng);
        const MatrixXd h = f.hessian(b);
        const VectorXd t3 = f.third_directional(b + delta, u);
        for (Index j = 0; j < 4; ++j) {
            const double bound = 2 * std::pow(1 - std::abs(gamma), -3) * u.dot(h * u) * std::sqrt(h(j, j));
            CHECK(std::abs(t3(j)) <= bound * (1 + 1e-12));
        }
    }
}
