#include "nqcs/linalg.hpp"

#include "nqcs/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <tuple>

namespace nqcs::linalg {

SymmetricEigen symmetricEigen(const DenseMatrix& s, const Tolerances& tol) {
    if (s.rows() != s.cols()) {
        throw DimensionError("symmetricEigen: matrix must be square");
    }
    if (!s.allFinite()) {
        throw DomainError("symmetricEigen: matrix has non-finite entries");
    }
    const double scale = s.norm();
    if ((s - s.transpose()).norm() > tol.symTol * std::max(scale, 1e-300)) {
        throw DomainError("symmetricEigen: matrix is not symmetric within tolerance");
    }
    if (s.rows() == 0) {
        return {};
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(s);
    if (es.info() != Eigen::Success) {
        throw NumericalFailure("symmetricEigen: eigensolver did not converge");
    }
    return {es.eigenvalues(), es.eigenvectors()};
}

int BlockDecomposition::offset(int i) const {
    int off = 0;
    for (int k = 0; k < i; ++k) {
        off += blockSizes[k];
    }
    return off;
}

DenseMatrix BlockDecomposition::blockDiagonal() const { return blockDiag(blocks); }

namespace {

using Complex = std::complex<double>;

/// Orthonormal basis of the numerical null space of m with the given dimension.
DenseMatrix nullBasis(const DenseMatrix& m, int dim) {
    Eigen::JacobiSVD<DenseMatrix> svd(m, Eigen::ComputeFullV);
    const auto& v = svd.matrixV();
    return v.rightCols(dim);
}

DenseMatrix matrixPower(const DenseMatrix& m, int p) {
    DenseMatrix r = DenseMatrix::Identity(m.rows(), m.cols());
    for (int i = 0; i < p; ++i) {
        r = (r * m).eval();
    }
    return r;
}

int numericalRank(const DenseMatrix& m, double threshold) {
    if (m.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<DenseMatrix> svd(m);
    int r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) > threshold) {
            ++r;
        }
    }
    return r;
}

double condition(const DenseMatrix& m) {
    if (m.size() == 0) {
        return 1.0;
    }
    Eigen::JacobiSVD<DenseMatrix> svd(m);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    return smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
}

struct Piece {
    DenseMatrix columns;  // n x k
    DenseMatrix block;    // k x k
    BlockKind kind;
};

/// Splits the restriction r (already in the cluster's invariant subspace basis)
/// into 1x1 / 2x2 blocks when its eigenvectors are well conditioned.
bool splitDiagonalizable(const DenseMatrix& r, const DenseMatrix& basis, double realTol,
                         double condLimit, double couplingTol, std::vector<Piece>& out) {
    const auto d = r.rows();
    Eigen::EigenSolver<DenseMatrix> es(r);
    if (es.info() != Eigen::Success) {
        return false;
    }
    const auto vals = es.eigenvalues();
    const auto vecs = es.eigenvectors();

    DenseMatrix w(d, d);
    std::vector<std::pair<Eigen::Index, bool>> picks;  // (column start, is pair)
    Eigen::Index col = 0;
    std::vector<bool> used(static_cast<size_t>(d), false);
    for (Eigen::Index k = 0; k < d; ++k) {
        if (used[static_cast<size_t>(k)]) {
            continue;
        }
        const Complex lam = vals(k);
        if (std::abs(lam.imag()) <= realTol) {
            w.col(col) = vecs.col(k).real();
            if (w.col(col).norm() == 0.0) {
                w.col(col) = vecs.col(k).imag();
            }
            used[static_cast<size_t>(k)] = true;
            picks.emplace_back(col, false);
            col += 1;
        } else {
            // find the conjugate partner
            Eigen::Index partner = -1;
            for (Eigen::Index j = k + 1; j < d; ++j) {
                if (!used[static_cast<size_t>(j)] && std::abs(vals(j) - std::conj(lam)) <= 10 * realTol) {
                    partner = j;
                    break;
                }
            }
            if (partner < 0 || col + 2 > d) {
                return false;
            }
            Eigen::VectorXcd v = vecs.col(k);
            if (lam.imag() < 0) {
                v = v.conjugate().eval();
            }
            w.col(col) = v.real();
            w.col(col + 1) = v.imag();
            used[static_cast<size_t>(k)] = used[static_cast<size_t>(partner)] = true;
            picks.emplace_back(col, true);
            col += 2;
        }
    }
    if (col != d || condition(w) > condLimit) {
        return false;
    }
    const DenseMatrix blockFull = w.partialPivLu().solve(r * w);
    DenseMatrix coupling = blockFull;
    for (const auto& [start, isPair] : picks) {
        const Eigen::Index k = isPair ? 2 : 1;
        coupling.block(start, start, k, k).setZero();
    }
    if (coupling.norm() > couplingTol * std::max(r.norm(), 1e-300)) {
        return false;
    }
    const DenseMatrix cols = basis * w;
    for (const auto& [start, isPair] : picks) {
        const Eigen::Index k = isPair ? 2 : 1;
        Piece p;
        p.columns = cols.middleCols(start, k);
        p.block = blockFull.block(start, start, k, k);
        p.kind = isPair ? BlockKind::RotationScaling : BlockKind::Scalar;
        // Rescale so T columns have unit norm on average; blocks are similarity invariant
        // under a common scalar.
        const double s = p.columns.norm() / std::sqrt(static_cast<double>(k));
        if (s > 0.0) {
            p.columns /= s;
        }
        out.push_back(std::move(p));
    }
    return true;
}

/// Single Jordan chain for a real defective cluster: basis [N^{d-1}w, ..., Nw, w].
bool jordanChain(const DenseMatrix& r, const DenseMatrix& basis, double center, double rankTol,
                 std::vector<Piece>& out) {
    const auto d = r.rows();
    const DenseMatrix nil = r - center * DenseMatrix::Identity(d, d);
    if (numericalRank(nil, rankTol) != d - 1) {
        return false;
    }
    const DenseMatrix top = matrixPower(nil, static_cast<int>(d - 1));
    Eigen::JacobiSVD<DenseMatrix> svd(top, Eigen::ComputeFullV);
    Eigen::VectorXd w = svd.matrixV().col(0);
    DenseMatrix chain(d, d);
    chain.col(d - 1) = w;
    for (Eigen::Index k = d - 2; k >= 0; --k) {
        chain.col(k) = nil * chain.col(k + 1);
    }
    const double head = chain.col(0).norm();
    if (head == 0.0) {
        return false;
    }
    chain /= head;
    Piece p;
    p.columns = basis * chain;
    p.block = chain.partialPivLu().solve(r * chain);
    p.kind = BlockKind::Defective;
    out.push_back(std::move(p));
    return true;
}

}  // namespace

BlockDecomposition realBlockDecompose(const DenseMatrix& lambdaBar, const Tolerances& tol) {
    if (lambdaBar.rows() != lambdaBar.cols()) {
        throw DimensionError("realBlockDecompose: matrix must be square");
    }
    if (!lambdaBar.allFinite()) {
        throw DomainError("realBlockDecompose: matrix has non-finite entries");
    }
    const auto n = lambdaBar.rows();
    BlockDecomposition out;
    if (n == 0) {
        out.transform = out.transformInverse = DenseMatrix(0, 0);
        return out;
    }
    const double scale = lambdaBar.norm();
    const double absFloor = std::max(scale, 1e-300);

    Eigen::EigenSolver<DenseMatrix> es(lambdaBar, false);
    if (es.info() != Eigen::Success) {
        throw NumericalFailure("realBlockDecompose: eigenvalue iteration did not converge");
    }
    std::vector<Complex> vals(es.eigenvalues().data(), es.eigenvalues().data() + n);

    auto closeTo = [&](Complex a, Complex b) {
        return std::abs(a - b) <= tol.clusterTol * std::max({std::abs(a), std::abs(b), absFloor});
    };
    auto isReal = [&](Complex a) {
        return std::abs(a.imag()) <= tol.clusterTol * std::max(std::abs(a), absFloor);
    };

    // Representatives: real values as-is, complex pairs by their upper member.
    std::vector<Complex> reps;
    for (const auto& v : vals) {
        if (isReal(v)) {
            reps.emplace_back(v.real(), 0.0);
        } else if (v.imag() > 0) {
            reps.push_back(v);
        }
    }
    std::sort(reps.begin(), reps.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });

    // Single-linkage clustering in sorted order.
    std::vector<std::vector<Complex>> members;
    for (const auto& v : reps) {
        bool placed = false;
        for (size_t c = 0; c < members.size() && !placed; ++c) {
            const bool sameKind = (v.imag() == 0.0) == (members[c].front().imag() == 0.0);
            if (!sameKind) {
                continue;
            }
            for (const auto& m : members[c]) {
                if (closeTo(v, m)) {
                    members[c].push_back(v);
                    placed = true;
                    break;
                }
            }
        }
        if (!placed) {
            members.push_back({v});
        }
    }

    const DenseMatrix id = DenseMatrix::Identity(n, n);
    const double realTol = tol.clusterTol * absFloor;
    auto build = [&](const std::vector<std::vector<Complex>>& groups) {
        std::vector<Piece> pieces;
        for (const auto& group : groups) {
            Complex mean{0.0, 0.0};
            for (const auto& m : group) {
                mean += m;
            }
            mean /= static_cast<double>(group.size());
            const bool real = group.front().imag() == 0.0;
            const int mult = static_cast<int>(group.size());
            const int d = real ? mult : 2 * mult;
            DenseMatrix shifted;
            if (real) {
                shifted = lambdaBar - mean.real() * id;
            } else {
                const DenseMatrix s = lambdaBar - mean.real() * id;
                shifted = s * s + mean.imag() * mean.imag() * id;
            }
            const DenseMatrix basis = nullBasis(matrixPower(shifted, mult), d);
            const DenseMatrix r = basis.transpose() * lambdaBar * basis;

            if (d == 1) {
                pieces.push_back({basis, r, BlockKind::Scalar});
                continue;
            }
            if (splitDiagonalizable(r, basis, realTol, tol.defectiveCondition, tol.reconstructionTol, pieces)) {
                continue;
            }
            if (real && jordanChain(r, basis, mean.real(), std::sqrt(tol.clusterTol) * absFloor, pieces)) {
                continue;
            }
            pieces.push_back({basis, r, BlockKind::Defective});
        }
        DenseMatrix t(n, n);
        Eigen::Index col = 0;
        for (const auto& p : pieces) {
            t.middleCols(col, p.columns.cols()) = p.columns;
            col += p.columns.cols();
        }
        if (col != n) {
            throw NumericalFailure("realBlockDecompose: invariant subspaces do not span the space");
        }
        const double c = condition(t);
        double residual = std::numeric_limits<double>::infinity();
        if (c <= tol.conditionLimit) {
            std::vector<DenseMatrix> blocks;
            for (const auto& p : pieces) {
                blocks.push_back(p.block);
            }
            residual = (t * blockDiag(blocks) * t.partialPivLu().inverse() - lambdaBar).norm();
        }
        return std::make_tuple(std::move(pieces), c, residual);
    };

    // Eigenvalues of a defective cluster split by O(eps^(1/m)); when the resulting
    // basis is nearly singular or inaccurate, merge the closest nearby clusters and rebuild.
    auto [pieces, cond, residual] = build(members);
    const double mergeTol = std::sqrt(tol.clusterTol);
    while (cond > tol.defectiveCondition || residual > tol.reconstructionTol * absFloor) {
        double bestGap = std::numeric_limits<double>::infinity();
        size_t ba = 0;
        size_t bb = 0;
        for (size_t a = 0; a < members.size(); ++a) {
            for (size_t b = a + 1; b < members.size(); ++b) {
                for (const auto& x : members[a]) {
                    for (const auto& y : members[b]) {
                        const double gap = std::abs(x - y) / std::max({std::abs(x), std::abs(y), absFloor});
                        if (gap < bestGap) {
                            bestGap = gap;
                            ba = a;
                            bb = b;
                        }
                    }
                }
            }
        }
        if (!(bestGap <= mergeTol)) {
            break;
        }
        const bool realA = members[ba].front().imag() == 0.0;
        const bool realB = members[bb].front().imag() == 0.0;
        if (realA != realB) {
            // A nearly real complex pair joins a real cluster as two real eigenvalues.
            auto& pairs = realA ? members[bb] : members[ba];
            std::vector<Complex> flattened;
            for (const auto& v : pairs) {
                flattened.emplace_back(v.real(), 0.0);
                flattened.emplace_back(v.real(), 0.0);
            }
            pairs = std::move(flattened);
        }
        members[ba].insert(members[ba].end(), members[bb].begin(), members[bb].end());
        members.erase(members.begin() + static_cast<std::ptrdiff_t>(bb));
        std::tie(pieces, cond, residual) = build(members);
    }

    out.transform = DenseMatrix(n, n);
    Eigen::Index col = 0;
    for (auto& p : pieces) {
        out.transform.middleCols(col, p.columns.cols()) = p.columns;
        col += p.columns.cols();
        out.blockSizes.push_back(static_cast<int>(p.block.rows()));
        out.blocks.push_back(std::move(p.block));
        out.kinds.push_back(p.kind);
    }

    out.condition = condition(out.transform);
    if (!(out.condition <= tol.conditionLimit)) {
        throw IllConditionedDecomposition(out.condition,
                                          "realBlockDecompose: transform condition number exceeds limit");
    }
    out.transformInverse = out.transform.partialPivLu().inverse();

    const DenseMatrix rebuilt = out.transform * out.blockDiagonal() * out.transformInverse;
    if ((rebuilt - lambdaBar).norm() > tol.reconstructionTol * absFloor) {
        throw IllConditionedDecomposition(out.condition,
                                          "realBlockDecompose: reconstruction residual exceeds tolerance");
    }
    return out;
}

}  // namespace nqcs::linalg
