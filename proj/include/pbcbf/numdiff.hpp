#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "pbcbf/errors.hpp"

namespace pbcbf {

/// Central-difference step for component value `xi`.
inline double fd_step(double xi) { return 1e-6 * std::max(1.0, std::abs(xi)); }

/// Jacobian of a vector map by central differences, one column per state.
template <typename Map>
Eigen::MatrixXd jacobian_fd(const Map& map, const Eigen::VectorXd& x) {
    const Eigen::VectorXd y0 = map(x);
    Eigen::MatrixXd jac(y0.size(), x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = fd_step(x[j]);
        xp[j] = x[j] + h;
        const Eigen::VectorXd plus = map(xp);
        xp[j] = x[j] - h;
        const Eigen::VectorXd minus = map(xp);
        xp[j] = x[j];
        jac.col(j) = (plus - minus) / (2.0 * h);
    }
    if (!jac.allFinite()) throw NumericalError("finite-difference Jacobian is not finite");
    return jac;
}

/// Gradient of a scalar field by central differences.
template <typename Field>
Eigen::VectorXd gradient_fd(const Field& field, const Eigen::VectorXd& x) {
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = fd_step(x[j]);
        xp[j] = x[j] + h;
        const double plus = field(xp);
        xp[j] = x[j] - h;
        const double minus = field(xp);
        xp[j] = x[j];
        grad[j] = (plus - minus) / (2.0 * h);
    }
    if (!grad.allFinite()) throw NumericalError("finite-difference gradient is not finite");
    return grad;
}

}  // namespace pbcbf
