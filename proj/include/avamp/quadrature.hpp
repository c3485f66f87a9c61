#pragma once
#include <Eigen/Dense>

namespace avamp {

// Gauss-Hermite rule in standard-normal form: E[f(Z)] ~ sum w_i f(z_i)
// for Z ~ N(0,1), weights summing to 1.
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    explicit GaussHermite(int order);

    template <class F>
    double expect(F&& f) const {
        double acc = 0.0;
        for (int i = 0; i < nodes.size(); ++i) acc += weights(i) * f(nodes(i));
        return acc;
    }
};

} // namespace avamp
