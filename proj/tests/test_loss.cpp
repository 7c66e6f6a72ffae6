#include "support/fd.hpp"
#include "support/random_oracles.hpp"

#include <doctest.h>

using namespace sparsist;
using namespace sparsist::testing;

namespace {

Oracle single_sample(ModelSpec spec, double x, double y)
{
    return Oracle(std::move(spec), Dataset<double>::regression(MatrixXd::Constant(1, 1, x), VectorXd::Constant(1, y)));
}

Oracle identity_graph(Index d)
{
    return Oracle(GraphModel{d}, Dataset<double>::covariance(MatrixXd::Identity(d, d), 10));
}

VectorXd e(Index p, Index k) { return VectorXd::Unit(p, k); }

} // namespace

TEST_CASE("dataset validation")
{
    MatrixXd X(2, 1);
    X << 2.0, 0.0;
    CHECK_THROWS_AS(Dataset<double>::regression(X, VectorXd::Zero(2)), InvalidArgument);
    X << 1.0, 1.0;
    CHECK_NOTHROW(Dataset<double>::regression(X, VectorXd::Zero(2)));
    CHECK_THROWS_AS(Dataset<double>::regression(X, VectorXd::Zero(3)), InvalidArgument);

    MatrixXd S(2, 2);
    S << 1, 2, 0, 1; // symmetrizes to [[1,1],[1,1]], PSD
    const auto cov = Dataset<double>::covariance(S, 5);
    CHECK(cov.sample_covariance()(0, 1) == doctest::Approx(1.0));
    S << 1, 3, 3, 1;
    CHECK_THROWS_AS(Dataset<double>::covariance(S, 5), NotPD);
}

TEST_CASE("model spec validation")
{
    CHECK_THROWS_AS(validate(GammaModel{0.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(validate(GammaModel{1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(validate(GraphModel{0}), InvalidArgument);
    CHECK_THROWS_AS(validate(LinearModel{-1.0}), InvalidArgument);
    CHECK_THROWS_AS(single_sample(LogisticModel{}, 1.0, 0.5), InvalidArgument);
}

TEST_CASE("loss values")
{
    std::mt19937_64 rng(1);
    const auto logit = random_logistic(7, 3, rng);
    CHECK(logit.value(VectorXd::Zero(3)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    const auto gam = single_sample(GammaModel{1, 1}, 1.0, 0.0);
    CHECK(gam.value(e(1, 0)) == doctest::Approx(0.0));

    CHECK(identity_graph(2).value(vec(MatrixXd(MatrixXd::Identity(2, 2)))) == doctest::Approx(2.0));
}

TEST_CASE("gradients")
{
    const auto lin = single_sample(LinearModel{}, 1.0, 1.0);
    CHECK(lin.gradient(VectorXd::Zero(1))(0) == doctest::Approx(-1.0));

    const auto gam = single_sample(GammaModel{1, 1}, 1.0, 1.0);
    CHECK(gam.gradient(e(1, 0))(0) == doctest::Approx(0.0));

    const VectorXd g = identity_graph(2).gradient(vec(MatrixXd(MatrixXd::Identity(2, 2))));
    CHECK(g.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("hessians")
{
    std::mt19937_64 rng(2);
    const auto logit = random_logistic(9, 4, rng);
    const MatrixXd& X = logit.data().design();
    const MatrixXd want = X.transpose() * X / (4.0 * 9.0);
    CHECK((logit.hessian(VectorXd::Zero(4)) - want).norm() < 1e-14);

    const auto lin = random_linear(9, 4, rng);
    const MatrixXd& Xl = lin.data().design();
    const MatrixXd gram = Xl.transpose() * Xl / 9.0;
    CHECK((lin.hessian(gaussian_vector(4, rng)) - gram).norm() < 1e-13);
    CHECK((lin.hessian(gaussian_vector(4, rng)) - gram).norm() < 1e-13);

    const auto gam = single_sample(GammaModel{1, 1}, 1.0, 0.3);
    CHECK(gam.hessian(e(1, 0))(0, 0) == doctest::Approx(1.0));
    CHECK(fd_hessian_apply(gam, e(1, 0), e(1, 0))(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("third-order forms")
{
    std::mt19937_64 rng(3);
    const auto lin = random_linear(10, 4, rng);
    const VectorXd b = gaussian_vector(4, rng), u = gaussian_vector(4, rng);
    CHECK(lin.third_directional(b, u).norm() == 0.0);
    CHECK(lin.third_trilinear(b, u, gaussian_vector(4, rng), gaussian_vector(4, rng)) == 0.0);

    const auto logit = single_sample(LogisticModel{}, 1.0, 1.0);
    CHECK(logit.third_directional(VectorXd::Zero(1), e(1, 0))(0) == doctest::Approx(0.0));

    // d^3/dz^3 (-ln z) = -2 / z^3, so the value at z = 1 is -2.
    const auto gam = single_sample(GammaModel{1, 1}, 1.0, 0.0);
    CHECK(gam.third_directional(e(1, 0), e(1, 0))(0) == doctest::Approx(-2.0));
    CHECK(gam.third_trilinear(e(1, 0), e(1, 0), e(1, 0), e(1, 0)) == doctest::Approx(-2.0));
    CHECK(fd_third(gam, e(1, 0), e(1, 0))(0) == doctest::Approx(-2.0).epsilon(1e-6));

    std::mt19937_64 r2(4);
    const auto graph = random_graph(2, r2);
    const VectorXd I = vec(MatrixXd(MatrixXd::Identity(2, 2)));
    CHECK(graph.third_trilinear(I, I, I, I) == doctest::Approx(-4.0));
    CHECK(fd_third(graph, I, I).dot(I) == doctest::Approx(-4.0).epsilon(1e-6));
}

TEST_CASE("domain violations")
{
    const auto gam = single_sample(GammaModel{1, 1}, 1.0, 1.0);
    CHECK_FALSE(gam.in_domain(-e(1, 0)));
    CHECK_THROWS_AS(gam.value(VectorXd::Zero(1)), DomainViolation);
    CHECK_THROWS_AS(gam.gradient(-e(1, 0)), DomainViolation);

    const auto g = identity_graph(2);
    MatrixXd bad(2, 2);
    bad << 1, 2, 2, 1;
    CHECK_THROWS_AS(g.hessian(vec(bad)), DomainViolation);
    CHECK_THROWS_AS(g.value(VectorXd::Zero(3)), InvalidArgument);
}

namespace {

struct Point {
    VectorXd beta;
    VectorXd u;
};

Point random_point(const Oracle& f, std::mt19937_64& rng)
{
    switch (f.kind()) {
    case ModelKind::Gamma: {
        std::uniform_real_distribution<double> pos(0.2, 1.5);
        VectorXd b(f.dim());
        for (Index i = 0; i < b.size(); ++i) b(i) = pos(rng);
        return {b, gaussian_vector(f.dim(), rng)};
    }
    case ModelKind::GraphSelect: {
        const Index d = f.matrix_dim();
        return {vec(random_spd(d, rng)), random_symmetric_vec(d, rng)};
    }
    default: return {gaussian_vector(f.dim(), rng, 0.7), gaussian_vector(f.dim(), rng)};
    }
}

void check_derivatives(const Oracle& f, std::mt19937_64& rng)
{
    for (int t = 0; t < 20; ++t) {
        const auto [beta, u] = random_point(f, rng);
        CHECK(rel_err(f.gradient(beta), fd_gradient(f, beta)) <= 1e-5);
        CHECK(rel_err(f.hessian(beta) * u, fd_hessian_apply(f, beta, u)) <= 1e-4);
        CHECK(rel_err(f.third_directional(beta, u), fd_third(f, beta, u)) <= 1e-3);

        const MatrixXd h = f.hessian(beta);
        CHECK((h - h.transpose()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(h, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());

        const VectorXd w = f.kind() == ModelKind::GraphSelect ? random_symmetric_vec(f.matrix_dim(), rng)
                                                               : gaussian_vector(f.dim(), rng);
        const double tri = f.third_trilinear(beta, u, u, w);
        CHECK(tri == doctest::Approx(f.third_directional(beta, u).dot(w)).epsilon(1e-10));
    }
}

} // namespace

TEST_CASE("derivatives agree with finite differences")
{
    std::mt19937_64 rng(11);
    SUBCASE("linear") { check_derivatives(random_linear(25, 6, rng), rng); }
    SUBCASE("logistic") { check_derivatives(random_logistic(25, 6, rng), rng); }
    SUBCASE("gamma") { check_derivatives(random_gamma(25, 6, rng), rng); }
    SUBCASE("graph") { check_derivatives(random_graph(4, rng), rng); }
}

TEST_CASE("log-det loss is self-concordant")
{
    std::mt19937_64 rng(5);
    for (Index d : {2, 3, 5}) {
        const auto f = random_graph(d, rng);
        for (int t = 0; t < 50; ++t) {
            const VectorXd theta = vec(random_spd(d, rng, 0.2));
            const VectorXd U = random_symmetric_vec(d, rng);
            const double third = std::abs(f.third_trilinear(theta, U, U, U));
            const double second = U.dot(f.hessian(theta) * U);
            CHECK(third <= 2 * std::pow(second, 1.5) * (1 + 1e-6));
        }
    }
}

TEST_CASE("gamma single-sample third form against the Hessian at beta*")
{
    // For f(beta) = -ln<x,beta> and beta = beta* + delta with gamma = <x,delta>/<x,beta*>:
    // D^3 f(beta)[u,u,u] = -2 (1+gamma)^{-3} (D^2 f(beta*)[u,u])^{3/2} sign(<x,u>).
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> pos(0.2, 1.0);
    for (int t = 0; t < 50; ++t) {
        MatrixXd X(1, 3);
        for (Index j = 0; j < 3; ++j) X(0, j) = pos(rng);
        const Oracle f(GammaModel{1, 0.1}, Dataset<double>::regression(X, VectorXd::Zero(1)));
        VectorXd bstar(3);
        for (Index j = 0; j < 3; ++j) bstar(j) = pos(rng);
        VectorXd delta = gaussian_vector(3, rng, 0.1);
        const double z = X.row(0).dot(bstar);
        if (X.row(0).dot(delta) <= -0.9 * z) continue;
        const double gamma = X.row(0).dot(delta) / z;
        const VectorXd u = gaussian_vector(3, rng);
        const double second = u.dot(f.hessian(bstar) * u);
        const double xu = X.row(0).dot(u);
        const double want = -2 * std::pow(1 + gamma, -3) * std::pow(second, 1.5) * (xu > 0 ? 1 : -1);
        CHECK(f.third_trilinear(bstar + delta, u, u, u) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("logistic per-sample third form bound")
{
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
        const MatrixXd X = clip_columns(gaussian_matrix(1, 4, rng));
        const Oracle f(LogisticModel{}, Dataset<double>::regression(X, VectorXd::Ones(1)));
        const VectorXd b = gaussian_vector(4, rng, 2.0), u = gaussian_vector(4, rng), v = gaussian_vector(4, rng);
        const double xu = X.row(0).dot(u), xv = X.row(0).dot(v);
        CHECK(std::abs(f.third_trilinear(b, u, u, v)) <= 0.25 * std::abs(xv) * xu * xu + 1e-15);
    }
}

TEST_CASE("oracle evaluation is deterministic")
{
    std::mt19937_64 rng(8);
    const auto f = random_logistic(30, 5, rng);
    const VectorXd b = gaussian_vector(5, rng);
    CHECK(f.value(b) == f.value(b));
    CHECK(f.gradient(b) == f.gradient(b));
    CHECK(f.hessian(b) == f.hessian(b));
}
