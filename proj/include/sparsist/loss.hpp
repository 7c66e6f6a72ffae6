#pragma once

// Loss oracles for the four supported model families.
//
// Every oracle exposes the loss L_n together with its gradient, Hessian and
// the third-order forms D^3 L_n(beta)[u,u] (a vector) and D^3 L_n(beta)[u,v,w]
// (a scalar). The three generalized-linear families share one code path that
// works on the per-sample predictor z_i = <x_i, beta>; the graphical model
// works on the row-major vectorization of a d x d precision matrix.

#include "sparsist/core.hpp"

#include <string>
#include <variant>

namespace sparsist {

struct LinearModel {
    double c = 1.0; ///< sub-Gaussian noise parameter
};

struct LogisticModel {};

struct GammaModel {
    double k = 1.0;  ///< shape
    double mu = 1.0; ///< predictor floor, min_i <x_i, beta*>
};

struct GraphModel {
    Index d = 1; ///< matrix dimension; the parameter has d*d entries
};

using ModelSpec = std::variant<LinearModel, LogisticModel, GammaModel, GraphModel>;

enum class ModelKind { Linear, Logistic, Gamma, GraphSelect };

inline ModelKind kind_of(const ModelSpec& spec)
{
    return static_cast<ModelKind>(spec.index());
}

inline const char* model_name(ModelKind kind)
{
    switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::Gamma: return "gamma";
    case ModelKind::GraphSelect: return "graph";
    }
    return "unknown";
}

inline void validate(const ModelSpec& spec)
{
    if (auto* m = std::get_if<LinearModel>(&spec); m && !(m->c > 0))
        throw InvalidArgument("linear noise parameter c must be > 0");
    if (auto* m = std::get_if<GammaModel>(&spec); m && !(m->k > 0 && m->mu > 0))
        throw InvalidArgument("gamma model needs k > 0 and mu > 0");
    if (auto* m = std::get_if<GraphModel>(&spec); m && m->d < 1)
        throw InvalidArgument("graph model needs d >= 1");
}

/// Row-major view of a vectorized d x d matrix.
template <typename Scalar>
using RowMajorMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename Derived>
Matrix<typename Derived::Scalar> unvec(const Eigen::MatrixBase<Derived>& v, Index d)
{
    using Scalar = typename Derived::Scalar;
    const Vector<Scalar> tmp = v;
    return RowMajorMap<Scalar>(tmp.data(), d, d);
}

template <typename Derived>
Vector<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    Vector<Scalar> out(m.size());
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) out(i * m.cols() + j) = m(i, j);
    return out;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

template <typename Scalar>
class Dataset {
public:
    /// Design-and-response data for the generalized-linear families.
    /// Every column of X must have l2-norm at most sqrt(n).
    static Dataset regression(Matrix<Scalar> X, Vector<Scalar> y)
    {
        using std::sqrt;
        if (X.rows() < 1 || X.cols() < 1) throw InvalidArgument("design must be non-empty");
        if (y.size() != X.rows()) throw InvalidArgument("response length must equal the number of rows");
        const Scalar bound = sqrt(Scalar(X.rows())) * (Scalar(1) + Scalar(1e-9));
        for (Index j = 0; j < X.cols(); ++j)
            if (!(X.col(j).norm() <= bound))
                throw InvalidArgument("column " + std::to_string(j) + " has l2-norm above sqrt(n)");
        Dataset d;
        d.X_ = std::move(X);
        d.y_ = std::move(y);
        d.n_ = d.X_.rows();
        return d;
    }

    /// Sample covariance data for the graphical model. The matrix is symmetrized.
    static Dataset covariance(const Matrix<Scalar>& sigma_hat, Index n)
    {
        if (sigma_hat.rows() != sigma_hat.cols() || sigma_hat.rows() < 1)
            throw InvalidArgument("sample covariance must be square and non-empty");
        if (n < 1) throw InvalidArgument("sample count must be >= 1");
        Dataset d;
        d.sigma_ = (sigma_hat + sigma_hat.transpose()) / Scalar(2);
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(d.sigma_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < Scalar(-1e-10))
            throw NotPD("sample covariance has a negative eigenvalue");
        d.n_ = n;
        d.is_cov_ = true;
        return d;
    }

    bool is_covariance() const { return is_cov_; }
    Index samples() const { return n_; }
    const Matrix<Scalar>& design() const { return X_; }
    const Vector<Scalar>& response() const { return y_; }
    const Matrix<Scalar>& sample_covariance() const { return sigma_; }

private:
    Dataset() = default;

    Matrix<Scalar> X_;
    Vector<Scalar> y_;
    Matrix<Scalar> sigma_;
    Index n_ = 0;
    bool is_cov_ = false;
};

// ---------------------------------------------------------------------------
// LossOracle
// ---------------------------------------------------------------------------

template <typename Scalar>
class LossOracle {
public:
    using VectorType = Vector<Scalar>;
    using MatrixType = Matrix<Scalar>;

    LossOracle(ModelSpec spec, Dataset<Scalar> data) : spec_(std::move(spec)), data_(std::move(data))
    {
        validate(spec_);
        const bool graph = kind() == ModelKind::GraphSelect;
        if (graph != data_.is_covariance())
            throw InvalidArgument(graph ? "graph model needs covariance data" : "regression model needs design data");
        if (graph) {
            d_ = std::get<GraphModel>(spec_).d;
            if (data_.sample_covariance().rows() != d_)
                throw InvalidArgument("sample covariance dimension does not match d");
            p_ = d_ * d_;
        } else {
            p_ = data_.design().cols();
        }
        if (kind() == ModelKind::Logistic) {
            for (Index i = 0; i < data_.response().size(); ++i) {
                const Scalar yi = data_.response()(i);
                if (yi != Scalar(0) && yi != Scalar(1)) throw InvalidArgument("logistic responses must be 0 or 1");
            }
        }
    }

    const ModelSpec& spec() const { return spec_; }
    ModelKind kind() const { return kind_of(spec_); }
    const Dataset<Scalar>& data() const { return data_; }
    Index dim() const { return p_; }
    Index matrix_dim() const { return d_; }

    bool in_domain(const VectorType& beta) const
    {
        if (beta.size() != p_ || !beta.allFinite()) return false;
        switch (kind()) {
        case ModelKind::Gamma: return (data_.design() * beta).minCoeff() > Scalar(0);
        case ModelKind::GraphSelect: {
            Eigen::LLT<MatrixType> llt(symmetric_part(beta));
            return llt.info() == Eigen::Success;
        }
        default: return true;
        }
    }

    Scalar value(const VectorType& beta) const
    {
        using std::log;
        check_domain(beta);
        if (kind() == ModelKind::GraphSelect) {
            const MatrixType theta = symmetric_part(beta);
            Eigen::LLT<MatrixType> llt(theta);
            const Scalar logdet = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
            return data_.sample_covariance().cwiseProduct(theta).sum() - logdet;
        }
        const VectorType z = data_.design() * beta;
        const VectorType& y = data_.response();
        Scalar total(0);
        for (Index i = 0; i < z.size(); ++i) total += sample_loss(z(i), y(i));
        return total / Scalar(z.size());
    }

    VectorType gradient(const VectorType& beta) const
    {
        check_domain(beta);
        if (kind() == ModelKind::GraphSelect) {
            const MatrixType w = inverse_of(beta);
            return vec(data_.sample_covariance() - w);
        }
        const auto d = derivatives(beta);
        return data_.design().transpose() * d.d1 / Scalar(n());
    }

    MatrixType hessian(const VectorType& beta) const
    {
        check_domain(beta);
        if (kind() == ModelKind::GraphSelect) {
            const MatrixType w = inverse_of(beta);
            return kronecker(w, w);
        }
        const auto d = derivatives(beta);
        const MatrixType& X = data_.design();
        MatrixType h = MatrixType::Zero(p_, p_);
        h.template selfadjointView<Eigen::Lower>().rankUpdate(X.transpose() * d.d2.cwiseSqrt().asDiagonal(),
                                                              Scalar(1) / Scalar(n()));
        return h.template selfadjointView<Eigen::Lower>();
    }

    /// D^3 L_n(beta)[u, u] as the vector v with <v, w> = D^3 L_n(beta)[u, u, w].
    VectorType third_directional(const VectorType& beta, const VectorType& u) const
    {
        check_domain(beta);
        check_direction(u);
        if (kind() == ModelKind::GraphSelect) {
            const MatrixType w = inverse_of(beta);
            const MatrixType us = symmetric_part(u);
            const MatrixType wuw = w * us * w;
            return vec(Scalar(-2) * wuw * us * w);
        }
        const auto d = derivatives(beta);
        const VectorType xu = data_.design() * u;
        return data_.design().transpose() * (d.d3.array() * xu.array().square()).matrix() / Scalar(n());
    }

    /// D^3 L_n(beta)[u, v, w]; symmetric in its three directions.
    Scalar third_trilinear(const VectorType& beta, const VectorType& u, const VectorType& v,
                           const VectorType& w) const
    {
        check_domain(beta);
        check_direction(u);
        check_direction(v);
        check_direction(w);
        if (kind() == ModelKind::GraphSelect) {
            const MatrixType inv = inverse_of(beta);
            const MatrixType a = inv * symmetric_part(u) * inv;
            const MatrixType b = inv * symmetric_part(v) * inv;
            const MatrixType c = symmetric_part(w);
            // -tr(W U W V W Z) - tr(W V W U W Z)
            return -(a * symmetric_part(v) * inv).cwiseProduct(c).sum() -
                   (b * symmetric_part(u) * inv).cwiseProduct(c).sum();
        }
        const auto d = derivatives(beta);
        const MatrixType& X = data_.design();
        const VectorType xu = X * u, xv = X * v, xw = X * w;
        return (d.d3.array() * xu.array() * xv.array() * xw.array()).sum() / Scalar(n());
    }

    MatrixType symmetric_part(const VectorType& beta) const
    {
        const MatrixType m = unvec(beta, d_);
        return (m + m.transpose()) / Scalar(2);
    }

private:
    struct SampleDerivatives {
        VectorType d1, d2, d3;
    };

    Index n() const { return data_.design().rows(); }

    void check_direction(const VectorType& u) const
    {
        if (u.size() != p_) throw InvalidArgument("direction has the wrong dimension");
    }

    void check_domain(const VectorType& beta) const
    {
        if (beta.size() != p_) throw InvalidArgument("parameter has the wrong dimension");
        if (!in_domain(beta)) {
            throw DomainViolation(kind() == ModelKind::Gamma ? "a linear predictor is not positive"
                                  : kind() == ModelKind::GraphSelect ? "precision matrix is not positive definite"
                                                                     : "parameter is not finite");
        }
    }

    MatrixType inverse_of(const VectorType& beta) const
    {
        Eigen::LLT<MatrixType> llt(symmetric_part(beta));
        MatrixType w = llt.solve(MatrixType::Identity(d_, d_));
        return (w + w.transpose()) / Scalar(2);
    }

    static MatrixType kronecker(const MatrixType& a, const MatrixType& b)
    {
        MatrixType out(a.rows() * b.rows(), a.cols() * b.cols());
        for (Index i = 0; i < a.rows(); ++i)
            for (Index k = 0; k < a.cols(); ++k)
                out.block(i * b.rows(), k * b.cols(), b.rows(), b.cols()) = a(i, k) * b;
        return out;
    }

    Scalar sample_loss(Scalar z, Scalar y) const
    {
        using std::abs;
        using std::exp;
        using std::log;
        using std::log1p;
        switch (kind()) {
        case ModelKind::Linear: return Scalar(0.5) * (y - z) * (y - z);
        case ModelKind::Logistic: {
            // ln(1 + exp(-m)) with m = (2y - 1) z
            const Scalar m = (Scalar(2) * y - Scalar(1)) * z;
            return std::max(-m, Scalar(0)) + log1p(exp(-abs(m)));
        }
        case ModelKind::Gamma: return -log(z) + y * z;
        default: return Scalar(0);
        }
    }

    SampleDerivatives derivatives(const VectorType& beta) const
    {
        using std::exp;
        const VectorType z = data_.design() * beta;
        const VectorType& y = data_.response();
        const Index m = z.size();
        SampleDerivatives d{VectorType(m), VectorType(m), VectorType(m)};
        for (Index i = 0; i < m; ++i) {
            switch (kind()) {
            case ModelKind::Linear:
                d.d1(i) = z(i) - y(i);
                d.d2(i) = Scalar(1);
                d.d3(i) = Scalar(0);
                break;
            case ModelKind::Logistic: {
                const Scalar sig = z(i) >= 0 ? Scalar(1) / (Scalar(1) + exp(-z(i)))
                                             : exp(z(i)) / (Scalar(1) + exp(z(i)));
                const Scalar var = sig * (Scalar(1) - sig);
                d.d1(i) = sig - y(i);
                d.d2(i) = var;
                d.d3(i) = var * (Scalar(1) - Scalar(2) * sig);
                break;
            }
            case ModelKind::Gamma: {
                const Scalar inv = Scalar(1) / z(i);
                d.d1(i) = y(i) - inv;
                d.d2(i) = inv * inv;
                d.d3(i) = Scalar(-2) * inv * inv * inv;
                break;
            }
            default: break;
            }
        }
        return d;
    }

    ModelSpec spec_;
    Dataset<Scalar> data_;
    Index p_ = 0;
    Index d_ = 0;
};

using Oracle = LossOracle<double>;

} // namespace sparsist
