#include "nqcs/errors.hpp"
#include "nqcs/lmi.hpp"

#include <cmath>
#include <limits>

namespace nqcs::lmi {

LmiCertificate certificateConstants(double a1, double a2, double a3, double a4, double a5) {
    if (!(a1 > 0.0) || a2 < a1) {
        throw CertificateInvalid("certificate: Lyapunov bounds must satisfy 0 < a1 <= a2");
    }
    if (!(a3 > 2.0 * a5)) {
        throw CertificateInvalid("certificate: a3 must exceed 2 a5");
    }
    if (a2 < a3) {
        throw CertificateInvalid("certificate: a2 must be at least a3");
    }
    if (a4 < 0.0 || a5 < 0.0) {
        throw CertificateInvalid("certificate: a4 and a5 must be non-negative");
    }
    LmiCertificate c;
    c.a1 = a1;
    c.a2 = a2;
    c.a3 = a3;
    c.a4 = a4;
    c.a5 = a5;
    c.c1 = a2 / a1;
    c.c2 = -std::log1p(-(a3 - 2.0 * a5) / a2);
    c.c3 = a2;
    c.gamma1 = a2 * (a4 + 2.0 * a5) / (a1 * (a3 - 2.0 * a5));
    c.gamma2 = a4 + a5;
    return c;
}

LmiCertificate deriveCertificate(const LmiProblem& problem, const Vector& x, double margin) {
    const auto& lay = problem.layout;
    if (x.size() != lay.total) {
        throw DimensionError("deriveCertificate: solution has the wrong dimension");
    }
    if (!x.allFinite()) {
        throw CertificateInvalid("certificate: solution is not finite");
    }
    if (!sdp::verifySolution(problem.system, x, margin)) {
        throw CertificateInvalid("certificate: solution does not satisfy the LMI system");
    }
    double a1 = std::numeric_limits<double>::infinity();
    double a2 = 0.0;
    std::vector<DenseMatrix> ps;
    for (int k = 0; k < lay.lyapunovCount; ++k) {
        DenseMatrix p = lay.lyapunov(x, k);
        const auto eig = linalg::symmetricEigen(p);
        a1 = std::min(a1, eig.eigenvalues(0));
        a2 = std::max(a2, eig.eigenvalues(eig.eigenvalues.size() - 1));
        ps.push_back(std::move(p));
    }
    const double a4 = problem.fixed.ideal ? 0.0 : x(lay.gamma2) - problem.fixed.a5;
    LmiCertificate c = certificateConstants(a1, a2, problem.fixed.a3, a4, problem.fixed.a5);
    c.P = std::move(ps);
    c.rho = x(lay.rho);
    c.zeta.assign(lay.zeta.size(), {});
    for (size_t i = 0; i < lay.zeta.size(); ++i) {
        for (int v : lay.zeta[i]) {
            c.zeta[i].push_back(v >= 0 ? x(v) : 0.0);
        }
    }
    c.margin = -sdp::worstMargin(problem.system, x);
    c.ideal = problem.fixed.ideal;
    if (c.ideal) {
        c.gamma2 = std::numeric_limits<double>::infinity();
    }
    return c;
}

}  // namespace nqcs::lmi
