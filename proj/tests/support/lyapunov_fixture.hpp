#pragma once

#include "nqcs/sdp.hpp"

#include <Eigen/Dense>

namespace fixture {

/// Index of P(i, j), i ≤ j, in the upper-triangular variable layout.
inline int symIndex(int n, int i, int j) {
    if (i > j) {
        std::swap(i, j);
    }
    return i * n - i * (i - 1) / 2 + (j - i);
}

/// AᵀP + PA ⪯ −Q, P ⪰ I (and optionally P ⪯ γI with γ the last variable).
inline nqcs::sdp::AffineConstraintSystem lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q,
                                                  bool withBound = false) {
    using namespace nqcs::sdp;
    const int n = static_cast<int>(a.rows());
    const int vars = n * (n + 1) / 2 + (withBound ? 1 : 0);
    AffineConstraintSystem sys(vars);
    ConstraintBuilder lyap(n, "lyapunov");
    ConstraintBuilder pos(n, "positivity", Sense::PositiveSemidefinite);
    ConstraintBuilder bound(n, "bound");
    lyap.addBlock(-1, 0, 0, q);
    pos.addBlock(-1, 0, 0, -Eigen::MatrixXd::Identity(n, n));
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
            e(i, j) = 1.0;
            e(j, i) = 1.0;
            const int v = symIndex(n, i, j);
            lyap.addBlock(v, 0, 0, a.transpose() * e + e * a);
            pos.addBlock(v, 0, 0, e);
            bound.addBlock(v, 0, 0, e);
        }
    }
    sys.add(lyap.build());
    sys.add(pos.build());
    if (withBound) {
        bound.addBlock(vars - 1, 0, 0, -Eigen::MatrixXd::Identity(n, n));
        sys.add(bound.build());
    }
    return sys;
}

}  // namespace fixture
