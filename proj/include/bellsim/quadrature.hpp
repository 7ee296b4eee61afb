#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <utility>

namespace bellsim {

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
gauss_legendre(int order)
{
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Matrix jacobi = Matrix::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const Scalar b = Scalar(k) / std::sqrt(Scalar(4 * k * k - 1));
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights =
        Scalar(2) * es.eigenvectors().row(0).transpose().cwiseAbs2();
    return {es.eigenvalues(), weights};
}

} // namespace bellsim
