#pragma once

#include "nqcs/linalg.hpp"
#include "nqcs/model.hpp"
#include "nqcs/timing.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nqcs::overapprox {

using linalg::DenseMatrix;
using linalg::Vector;
using model::TimingPoint;

/// Triangulation of the timing region with per-triangle probabilities.
struct TimingPartition {
    std::vector<TimingPoint> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<double> probabilities;
    int na = 1;
    int nb = 1;
    /// Dimension of the region that was partitioned (2, 1 or 0).
    int dimension = 2;

    int vertexCount() const { return static_cast<int>(vertices.size()); }
    int triangleCount() const { return static_cast<int>(triangles.size()); }
    std::array<TimingPoint, 3> corners(int m) const;
    double totalProbability() const;
    /// Part of the union lying outside the region, as an area (or length).
    double excessMeasure = 0.0;

    struct Location {
        int triangle = -1;
        std::array<double, 3> weights{1.0, 0.0, 0.0};
    };
    /// Containing triangle and barycentric weights of (h, τ). Points slightly
    /// outside every triangle are projected onto the nearest one.
    Location locate(double h, double tau) const;
};

/// Grid over [ε, h_mati] × [τ_min, τ_mad], two triangles per cell, clipped to τ ≤ h.
TimingPartition partitionTheta(const model::TimingRegion& region, const model::TimingDistribution& distribution,
                               int na, int nb);

/// Probability mass of a (possibly degenerate) triangle.
double triangleProbability(const std::array<TimingPoint, 3>& triangle,
                           const model::TimingDistribution& distribution);

/// Ā_{σn}, Ē_{σn} indexed [σ][n].
struct VertexMatrices {
    std::vector<std::vector<DenseMatrix>> A;
    std::vector<std::vector<DenseMatrix>> E;
};

VertexMatrices vertexMatrices(const model::LoopMatrices& loop, const model::NetworkConfig& net,
                              const TimingPartition& partition);

struct MaximizerOptions {
    /// Barycentric grid subdivisions per triangle.
    int resolution = 50;
    /// Golden-section iterations along each edge direction.
    int refineIterations = 40;
    /// Reported maximum is multiplied by 1 + safety.
    double safety = 1e-6;
};

/// Per-block worst-case errors δ_{A,i}, δ_{Eh,i}, δ_{Eh−τ,i}.
struct BlockErrors {
    std::vector<double> deltaA;
    std::vector<double> deltaEh;
    std::vector<double> deltaEr;
    /// Same quantities per triangle, [m][i].
    std::vector<std::vector<double>> perTriangleA;
    std::vector<std::vector<double>> perTriangleEh;
    std::vector<std::vector<double>> perTriangleEr;
};

/// max over the simplex of ‖e^{Λ Σα_l x_l} − Σα_l e^{Λ x_l}‖.
double simplexMaxExpError(const DenseMatrix& block, const std::array<double, 3>& x,
                          const MaximizerOptions& options = {});
/// max over the simplex of ‖E(Σα_l x_l) − Σα_l E(x_l)‖ with E(x) = ∫₀^x e^{Λs} ds.
double simplexMaxIntegralError(const DenseMatrix& block, const std::array<double, 3>& x,
                               const MaximizerOptions& options = {});

BlockErrors worstCaseBlockErrors(const linalg::BlockDecomposition& decomposition, const TimingPartition& partition,
                                 const MaximizerOptions& options = {});

/// B̄ = B̃U, C̄_σ, F̄_σ and the block structure of Δ.
struct UncertaintyEnvelope {
    DenseMatrix Btilde;
    Vector U;  // diagonal of U
    DenseMatrix Bbar;
    std::vector<DenseMatrix> Cbar;
    std::vector<DenseMatrix> Fbar;
    /// Sizes of the 3K blocks of Δ, ordered (A blocks, Eh blocks, Eh−τ blocks).
    std::vector<int> deltaBlocks;
    /// δ per Δ block, same order.
    std::vector<double> deltaScale;
};

UncertaintyEnvelope buildUncertaintyEnvelope(const linalg::BlockDecomposition& decomposition,
                                             const BlockErrors& errors, const model::LoopMatrices& loop,
                                             const model::NetworkConfig& net);

struct PolytopicModel {
    model::Dimensions dims;
    TimingPartition partition;
    linalg::BlockDecomposition decomposition;
    BlockErrors errors;
    UncertaintyEnvelope envelope;
    VertexMatrices vertices;
    double varpi = 0.0;

    int nodeCount() const { return static_cast<int>(envelope.Cbar.size()); }
};

/// ϖ = max_σ ‖B̄‖‖C̄_σ‖.
double tightness(const PolytopicModel& model);

struct ProcedureOptions {
    double varsigma = 1e-3;
    double varpiStar = 10.0;
    int na = 1;
    int nb = 1;
    /// Number of (N_a, N_b) doublings allowed after the first attempt.
    int refinementCap = 8;
    MaximizerOptions maximizer;
    linalg::Tolerances tolerances;
};

/// One pass of the Procedure at a fixed (N_a, N_b).
PolytopicModel buildPolytopicModel(const model::LoopMatrices& loop, const model::NetworkConfig& net, int na, int nb,
                                   const ProcedureOptions& options = {});

/// Doubles (N_a, N_b) until ϖ ≤ ϖ*; throws TightnessNotAchieved at the cap.
PolytopicModel runProcedure(const model::LoopMatrices& loop, const model::NetworkConfig& net,
                            const ProcedureOptions& options = {});

struct ContainmentViolation {
    int sigma = 0;
    double h = 0.0;
    double tau = 0.0;
    double blockNorm = 0.0;
    double residual = 0.0;
};

struct ContainmentReport {
    int samples = 0;
    int checks = 0;
    double maxBlockNorm = 0.0;
    double maxRelativeResidual = 0.0;
    std::vector<ContainmentViolation> violations;

    bool passed() const { return violations.empty(); }
};

struct ContainmentTolerances {
    double blockNorm = 1e-9;
    double residual = 1e-8;
};

/// Checks a single (σ, h, τ). Returns the Δ block norms and relative residual.
ContainmentViolation checkContainmentAt(const PolytopicModel& model, const model::LoopMatrices& loop,
                                        const model::NetworkConfig& net, int sigma, double h, double tau,
                                        const ContainmentTolerances& tol, bool& ok);

/// Samples (h, τ) from the timing distribution and checks membership for every node.
ContainmentReport verifyContainment(const PolytopicModel& model, const model::LoopMatrices& loop,
                                    const model::NetworkConfig& net, int samples, std::uint64_t seed,
                                    const ContainmentTolerances& tol = {});

/// Structured text (JSON) rendering of the partition and of the envelope.
std::string serializePartition(const TimingPartition& partition);
std::string serializeModel(const PolytopicModel& model);

}  // namespace nqcs::overapprox
