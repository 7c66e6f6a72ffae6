#include "sparsist/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sparsist {

namespace {

using Rng = std::mt19937_64;

// Independent streams derived from one seed.
enum Stream : std::uint64_t { kDesign = 1, kBeta = 2, kResponse = 3, kGraph = 4, kSamples = 5 };

MatrixXd gaussian(Index n, Index p, Rng& rng)
{
    std::normal_distribution<double> z;
    MatrixXd X(n, p);
    // Column-major fill keeps column j independent of later columns.
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) X(i, j) = z(rng);
    return X;
}

/// First k entries of a uniformly random permutation of 0..p-1, sorted.
Support random_subset(Index p, Index k, Rng& rng)
{
    std::vector<Index> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), Index(0));
    for (Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, p - 1);
        std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
    }
    Support s(idx.begin(), idx.begin() + k);
    std::sort(s.begin(), s.end());
    return s;
}

} // namespace

const char* design_family_name(DesignFamily f)
{
    switch (f) {
    case DesignFamily::GaussianIID: return "gaussian_iid";
    case DesignFamily::Orthogonalized: return "orthogonalized";
    case DesignFamily::DuplicateColumnAdversarial: return "duplicate_column";
    }
    return "unknown";
}

DesignFamily parse_design_family(const std::string& name)
{
    for (auto f : {DesignFamily::GaussianIID, DesignFamily::Orthogonalized, DesignFamily::DuplicateColumnAdversarial})
        if (name == design_family_name(f)) return f;
    throw InvalidArgument("unknown design family '" + name + "'");
}

void clip_column_norms(MatrixXd& X)
{
    const double bound = std::sqrt(double(X.rows()));
    for (Index j = 0; j < X.cols(); ++j) {
        const double norm = X.col(j).norm();
        if (norm > bound) X.col(j) *= bound / norm;
    }
}

MatrixXd gen_design(Index n, Index p, DesignFamily family, std::uint64_t seed)
{
    if (n < 1 || p < 1) throw InvalidArgument("design needs n, p >= 1");
    Rng rng(seed);
    MatrixXd X = gaussian(n, p, rng);
    switch (family) {
    case DesignFamily::GaussianIID: break;
    case DesignFamily::Orthogonalized: {
        if (n < p) throw InvalidArgument("an orthogonalized design needs n >= p");
        Eigen::HouseholderQR<MatrixXd> qr(X);
        X = MatrixXd(qr.householderQ() * MatrixXd::Identity(n, p)) * std::sqrt(double(n));
        break;
    }
    case DesignFamily::DuplicateColumnAdversarial:
        if (p < 2) throw InvalidArgument("a duplicate-column design needs p >= 2");
        X.col(p - 1) = X.col(0);
        break;
    }
    clip_column_norms(X);
    return X;
}

GroundTruth gen_sparse_beta(Index p, Index s, double beta_min, double beta_max, std::uint64_t seed,
                            bool all_positive)
{
    if (p < 1 || s < 0 || s > p) throw InvalidArgument("sparsity must satisfy 0 <= s <= p");
    if (!(beta_min > 0 && beta_min <= beta_max)) throw InvalidArgument("need 0 < beta_min <= beta_max");
    Rng rng(seed);
    const Support S = random_subset(p, s, rng);
    std::uniform_real_distribution<double> mag(beta_min, beta_max);
    std::bernoulli_distribution coin(0.5);
    VectorXd b = VectorXd::Zero(p);
    for (Index j : S) {
        const double m = beta_min == beta_max ? beta_min : mag(rng);
        const bool negative = coin(rng) && !all_positive;
        b(j) = negative ? -m : m;
    }
    return GroundTruth::from_beta(std::move(b));
}

ResponseDraw gen_responses(const ModelSpec& model, const MatrixXd& X, const GroundTruth& truth, std::uint64_t seed)
{
    validate(model);
    if (kind_of(model) == ModelKind::GraphSelect) throw InvalidArgument("use gen_graph_samples for the graph model");
    if (X.cols() != truth.dim()) throw InvalidArgument("design and beta* dimensions differ");
    Rng rng(seed);
    const VectorXd z = X * truth.beta;
    const Index n = X.rows();
    ResponseDraw out{VectorXd(n), model};
    switch (kind_of(model)) {
    case ModelKind::Linear: {
        std::normal_distribution<double> w(0.0, std::get<LinearModel>(model).c);
        for (Index i = 0; i < n; ++i) out.y(i) = z(i) + w(rng);
        break;
    }
    case ModelKind::Logistic: {
        std::uniform_real_distribution<double> u;
        for (Index i = 0; i < n; ++i) out.y(i) = u(rng) < 1.0 / (1.0 + std::exp(-z(i))) ? 1.0 : 0.0;
        break;
    }
    case ModelKind::Gamma: {
        const double mu = z.minCoeff();
        if (!(mu > 0))
            throw PredictorFloorViolation("min_i <x_i, beta*> = " + std::to_string(mu) + " is not positive");
        auto spec = std::get<GammaModel>(model);
        spec.mu = mu;
        out.spec = spec;
        for (Index i = 0; i < n; ++i) {
            std::gamma_distribution<double> g(spec.k, 1.0 / (spec.k * z(i)));
            out.y(i) = g(rng);
        }
        break;
    }
    case ModelKind::GraphSelect: break;
    }
    return out;
}

GroundTruth GraphTruth::ground_truth() const
{
    return GroundTruth::from_beta(vec(theta));
}

GraphTruth gen_graph_truth(Index d, Index s_offdiag, double rho_target, std::uint64_t seed, GraphPattern pattern)
{
    if (d < 2) throw InvalidArgument("graph truth needs d >= 2");
    if (s_offdiag < 0 || s_offdiag % 2 != 0) throw InvalidArgument("s_offdiag must be even and non-negative");
    if (!(rho_target > 0)) throw InvalidArgument("rho_target must be positive");
    const Index pairs = s_offdiag / 2;
    const Index available = pattern == GraphPattern::Chain ? d - 1 : d * (d - 1) / 2;
    if (pairs > available) throw InvalidArgument("too many off-diagonal entries for the pattern");

    Rng rng(seed);
    std::vector<std::pair<Index, Index>> edges;
    if (pattern == GraphPattern::Chain) {
        for (Index i = 0; i < pairs; ++i) edges.emplace_back(i, i + 1);
    } else {
        std::vector<std::pair<Index, Index>> all;
        for (Index i = 0; i < d; ++i)
            for (Index j = i + 1; j < d; ++j) all.emplace_back(i, j);
        for (Index k : random_subset(Index(all.size()), pairs, rng)) edges.push_back(all[std::size_t(k)]);
    }

    std::uniform_real_distribution<double> mag(0.1, 0.3);
    std::bernoulli_distribution coin(0.5);
    GraphTruth g;
    g.theta = MatrixXd::Zero(d, d);
    for (const auto& [i, j] : edges) {
        const double m = mag(rng);
        const double v = coin(rng) ? -m : m;
        g.theta(i, j) = v;
        g.theta(j, i) = v;
    }
    for (Index i = 0; i < d; ++i) g.theta(i, i) = g.theta.row(i).cwiseAbs().sum() + rho_target;

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.theta);
    g.rho_min = es.eigenvalues().minCoeff();
    g.sigma = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    g.sigma = (g.sigma + g.sigma.transpose()) / 2.0;
    g.kappa_sigma = g.sigma.diagonal().maxCoeff();
    g.S = support_of(vec(g.theta));
    g.s = Index(g.S.size());
    return g;
}

GraphSamples gen_graph_samples(const MatrixXd& sigma, Index n, std::uint64_t seed)
{
    if (n < 1) throw InvalidArgument("need at least one sample");
    if (sigma.rows() != sigma.cols()) throw InvalidArgument("covariance must be square");
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NotPD("covariance is not positive definite");
    Rng rng(seed);
    const Index d = sigma.rows();
    std::normal_distribution<double> z;
    MatrixXd W(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) W(i, j) = z(rng);
    GraphSamples out;
    out.samples = W * MatrixXd(llt.matrixL()).transpose();
    out.sigma_hat = out.samples.transpose() * out.samples / double(n);
    return out;
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

void InstanceConfig::validate() const
{
    sparsist::validate(model);
    if (n < 1 || p < 1) throw InvalidArgument("instance needs n, p >= 1");
    if (kind_of(model) == ModelKind::GraphSelect) {
        if (p < 2) throw InvalidArgument("graph instance needs d >= 2");
        if (s < 0 || s % 2 != 0) throw InvalidArgument("graph s counts off-diagonal entries and must be even");
        if (!(rho > 0)) throw InvalidArgument("rho must be positive");
        return;
    }
    if (s < 0 || s > p) throw InvalidArgument("sparsity must satisfy 0 <= s <= p");
    if (!(beta_min > 0 && beta_min <= beta_max)) throw InvalidArgument("need 0 < beta_min <= beta_max");
    if (family == DesignFamily::Orthogonalized && n < p) throw InvalidArgument("an orthogonalized design needs n >= p");
}

Oracle Instance::oracle() const
{
    if (kind() == ModelKind::GraphSelect) return Oracle(model, Dataset<double>::covariance(sigma_hat, n));
    return Oracle(model, Dataset<double>::regression(X, y));
}

Instance make_instance(const InstanceConfig& config)
{
    config.validate();
    Instance inst;
    inst.n = config.n;
    inst.seed = config.seed;
    inst.model = config.model;

    if (kind_of(config.model) == ModelKind::GraphSelect) {
        const auto g = gen_graph_truth(config.p, config.s, config.rho, mix_seed(config.seed, kGraph), config.pattern);
        auto samples = gen_graph_samples(g.sigma, config.n, mix_seed(config.seed, kSamples));
        inst.model = GraphModel{config.p};
        inst.X = std::move(samples.samples);
        inst.sigma_hat = std::move(samples.sigma_hat);
        inst.truth = g.ground_truth();
        return inst;
    }

    const bool gamma = kind_of(config.model) == ModelKind::Gamma;
    const bool positive = config.all_positive.value_or(gamma);
    inst.truth = gen_sparse_beta(config.p, config.s, config.beta_min, config.beta_max, mix_seed(config.seed, kBeta),
                                 positive);
    inst.X = gen_design(config.n, config.p, config.family, mix_seed(config.seed, kDesign));
    if (gamma && positive) {
        // Non-negative S-columns make <x_i, beta*> > 0 constructible.
        for (Index j : inst.truth.S) inst.X.col(j) = inst.X.col(j).cwiseAbs();
    }
    auto draw = gen_responses(config.model, inst.X, inst.truth, mix_seed(config.seed, kResponse));
    inst.y = std::move(draw.y);
    inst.model = draw.spec;
    return inst;
}

} // namespace sparsist
