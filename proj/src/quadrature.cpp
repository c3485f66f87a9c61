#include <avamp/quadrature.hpp>

#include <cmath>
#include <stdexcept>

namespace avamp {

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
// polynomials: off-diagonal sqrt(k), eigenvalues are the nodes and the
// squared first eigenvector components are the normalized weights.
GaussHermite::GaussHermite(int order) {
    if (order < 1) throw std::invalid_argument("GaussHermite: order must be >= 1");
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        jac(k, k - 1) = b;
        jac(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    nodes = es.eigenvalues();
    weights.resize(order);
    for (int i = 0; i < order; ++i) {
        const double c = es.eigenvectors()(0, i);
        weights(i) = c * c;
    }
}

} // namespace avamp
