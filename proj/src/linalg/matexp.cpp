#include "nqcs/linalg.hpp"

#include "nqcs/errors.hpp"

#include <array>
#include <cmath>

namespace nqcs::linalg {

namespace {

constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

void requireSquareFinite(const DenseMatrix& a, const char* op) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(op) + ": matrix must be square");
    }
    if (!a.allFinite()) {
        throw DomainError(std::string(op) + ": matrix has non-finite entries");
    }
}

DenseMatrix pade13(const DenseMatrix& a) {
    const auto n = a.rows();
    const DenseMatrix id = DenseMatrix::Identity(n, n);
    const DenseMatrix a2 = a * a;
    const DenseMatrix a4 = a2 * a2;
    const DenseMatrix a6 = a4 * a2;
    const auto& b = kPade13;

    DenseMatrix inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
    DenseMatrix u = a * (a6 * inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
    DenseMatrix v = a6 * inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

DenseMatrix matexp(const DenseMatrix& a, double t) {
    requireSquareFinite(a, "matexp");
    if (!std::isfinite(t)) {
        throw DomainError("matexp: time argument is not finite");
    }
    const auto n = a.rows();
    if (n == 0) {
        return DenseMatrix(0, 0);
    }
    if (t == 0.0) {
        return DenseMatrix::Identity(n, n);
    }

    DenseMatrix at = a * t;
    const double norm1 = at.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > kPade13Theta) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / kPade13Theta)));
        at /= std::ldexp(1.0, squarings);
    }

    DenseMatrix r = pade13(at);
    for (int i = 0; i < squarings; ++i) {
        r = (r * r).eval();
    }
    return r;
}

std::pair<DenseMatrix, DenseMatrix> matexpWithIntegral(const DenseMatrix& a, double rho) {
    requireSquareFinite(a, "matexpIntegral");
    if (!std::isfinite(rho) || rho < 0.0) {
        throw DomainError("matexpIntegral: integration length must be finite and non-negative");
    }
    const auto n = a.rows();
    if (rho == 0.0) {
        return {DenseMatrix::Identity(n, n), DenseMatrix::Zero(n, n)};
    }
    DenseMatrix aug = DenseMatrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = a;
    aug.topRightCorner(n, n).setIdentity();
    const DenseMatrix e = matexp(aug, rho);
    return {e.topLeftCorner(n, n), e.topRightCorner(n, n)};
}

DenseMatrix matexpIntegral(const DenseMatrix& a, double rho) {
    return matexpWithIntegral(a, rho).second;
}

double spectralNorm(const DenseMatrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    if (m.rows() == 1 || m.cols() == 1) {
        return m.norm();
    }
    Eigen::JacobiSVD<DenseMatrix> svd(m);
    return svd.singularValues()(0);
}

DenseMatrix blockDiag(const std::vector<DenseMatrix>& blocks) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    DenseMatrix out = DenseMatrix::Zero(rows, cols);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

}  // namespace nqcs::linalg
