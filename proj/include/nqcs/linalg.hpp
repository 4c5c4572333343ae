#pragma once

#include <Eigen/Dense>

#include <vector>

namespace nqcs::linalg {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Module tolerances. Every caller may override them; nothing below hard-codes
/// a literal in place of these fields.
struct Tolerances {
    /// Relative asymmetry accepted by symmetricEigen.
    double symTol = 1e-10;
    /// Eigenvalues closer than clusterTol (relative to max(|λ|, ‖Λ̄‖)) share a block.
    double clusterTol = 1e-6;
    /// Allowed relative residual of T Λ T⁻¹ against the input.
    double reconstructionTol = 1e-8;
    /// Condition number of T above which the decomposition is rejected.
    double conditionLimit = 1e12;
    /// Condition number of a cluster's eigenvector basis above which it is
    /// treated as defective.
    double defectiveCondition = 1e6;
};

/// Scaling threshold of the order-13 diagonal Padé approximant.
inline constexpr double kPade13Theta = 5.371920351148152;

/// e^{A t} by scaling and squaring with the order-13 diagonal Padé approximant.
DenseMatrix matexp(const DenseMatrix& a, double t = 1.0);

/// ∫₀^ρ e^{A s} ds, read off the upper-right block of exp([[A, I], [0, 0]] ρ).
DenseMatrix matexpIntegral(const DenseMatrix& a, double rho);

/// Both of the above in one augmented exponential: {e^{Aρ}, ∫₀^ρ e^{As} ds}.
std::pair<DenseMatrix, DenseMatrix> matexpWithIntegral(const DenseMatrix& a, double rho);

struct SymmetricEigen {
    Vector eigenvalues;        // ascending
    DenseMatrix eigenvectors;  // orthogonal, columns match eigenvalues
};

SymmetricEigen symmetricEigen(const DenseMatrix& s, const Tolerances& tol = {});

enum class BlockKind { Scalar, RotationScaling, Defective };

/// Real block-diagonal similarity Λ̄ = T diag(blocks) T⁻¹.
struct BlockDecomposition {
    DenseMatrix transform;
    DenseMatrix transformInverse;
    std::vector<DenseMatrix> blocks;
    std::vector<BlockKind> kinds;
    std::vector<int> blockSizes;
    double condition = 1.0;

    int dimension() const { return static_cast<int>(transform.rows()); }
    int blockCount() const { return static_cast<int>(blocks.size()); }
    /// First row/column of block i inside the block-diagonal Λ.
    int offset(int i) const;
    DenseMatrix blockDiagonal() const;
};

BlockDecomposition realBlockDecompose(const DenseMatrix& lambdaBar, const Tolerances& tol = {});

/// Largest singular value.
double spectralNorm(const DenseMatrix& m);

/// Places the given square matrices along a diagonal.
DenseMatrix blockDiag(const std::vector<DenseMatrix>& blocks);

}  // namespace nqcs::linalg
