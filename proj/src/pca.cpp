#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "csn/dimred.hpp"
#include "csn/error.hpp"

namespace csn::dimred {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(best))) best = i;
    if (v(best) < 0) v = -v;
}

// Orthonormal basis completion for components with no variance behind them.
Eigen::VectorXd orthogonal_complement(const Eigen::MatrixXd& basis, Eigen::Index filled, Eigen::Index dim) {
    for (Eigen::Index e = 0; e < dim; ++e) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(dim, e);
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index j = 0; j < filled; ++j) v -= basis.col(j).dot(v) * basis.col(j);
        if (v.norm() > 1e-6) return v.normalized();
    }
    return Eigen::VectorXd::Zero(dim);
}

}  // namespace

PcaResult pca(const Matrix& x, std::size_t k) {
    const auto n = static_cast<Eigen::Index>(x.rows);
    const auto d = static_cast<Eigen::Index>(x.cols);
    if (x.rows < 2 || x.cols < 1) throw InvalidArgument("pca: need at least two rows and one column");
    if (k < 1 || k > std::min(x.rows, x.cols))
        throw InvalidArgument("pca: k must lie in [1, min(N, D)]");
    for (double v : x.data)
        if (!std::isfinite(v)) throw InvalidArgument("pca: non-finite input");

    Eigen::Map<const RowMatrix> raw(x.data.data(), n, d);
    const Eigen::RowVectorXd mean = raw.colwise().mean();
    const RowMatrix centered = raw.rowwise() - mean;
    if (centered.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("pca: zero variance");

    const double denom = static_cast<double>(n - 1);
    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd components(d, kk);
    Eigen::VectorXd eigenvalues(kk);
    double total = 0.0;

    if (d <= n) {
        const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
        if (solver.info() != Eigen::Success) throw Error("pca: eigensolver failed");
        // Eigen sorts ascending.
        for (Eigen::Index j = 0; j < kk; ++j) {
            eigenvalues(j) = std::max(0.0, solver.eigenvalues()(d - 1 - j));
            components.col(j) = solver.eigenvectors().col(d - 1 - j);
        }
        total = cov.trace();
    } else {
        const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
        if (solver.info() != Eigen::Success) throw Error("pca: eigensolver failed");
        const double tol = 1e-10 * std::max(1.0, solver.eigenvalues()(n - 1));
        for (Eigen::Index j = 0; j < kk; ++j) {
            const double lambda = solver.eigenvalues()(n - 1 - j);
            eigenvalues(j) = std::max(0.0, lambda);
            if (lambda > tol) {
                Eigen::VectorXd v = centered.transpose() * solver.eigenvectors().col(n - 1 - j);
                components.col(j) = v.normalized();
            } else {
                eigenvalues(j) = 0.0;
                components.col(j) = orthogonal_complement(components, j, d);
            }
        }
        total = gram.trace();
    }
    for (Eigen::Index j = 0; j < kk; ++j) fix_sign(components.col(j));

    PcaResult out;
    out.coords = Matrix(x.rows, k);
    out.components = Matrix(k, x.cols);
    Eigen::Map<RowMatrix>(out.coords.data.data(), n, kk) = centered * components;
    Eigen::Map<RowMatrix>(out.components.data.data(), kk, d) = components.transpose();
    out.explained_variance.assign(eigenvalues.data(), eigenvalues.data() + kk);
    out.mean.assign(mean.data(), mean.data() + d);
    out.total_variance = total;
    return out;
}

}  // namespace csn::dimred
