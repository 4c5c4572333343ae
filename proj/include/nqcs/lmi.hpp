#pragma once

#include "nqcs/linalg.hpp"
#include "nqcs/model.hpp"
#include "nqcs/overapprox.hpp"
#include "nqcs/sdp.hpp"

#include <array>
#include <string>
#include <vector>

namespace nqcs::lmi {

using linalg::DenseMatrix;
using linalg::Vector;

/// Everything the LMI assembly reads from the polytopic model and the network.
struct LmiInputs {
    int nx = 0;
    int nz = 0;
    DenseMatrix H;                    // nz × nx
    Vector meanInjection;             // diagonal of ϒ
    /// One vector per dropout group with nonzero variance: √v on the group's components, 0 elsewhere.
    std::vector<Vector> fluctuation;
    std::vector<std::vector<DenseMatrix>> A;  // [σ][vertex]
    std::vector<std::vector<DenseMatrix>> E;  // [σ][vertex]
    std::vector<std::array<int, 3>> triangles;
    std::vector<double> probabilities;
    DenseMatrix Bbar;
    std::vector<DenseMatrix> Cbar;
    std::vector<DenseMatrix> Fbar;

    int nodeCount() const { return static_cast<int>(A.size()); }
};

LmiInputs makeInputs(const overapprox::PolytopicModel& model, const model::LoopMatrices& loop,
                     const model::NetworkConfig& net);

/// Multiplier vectors ϱ₁..ϱ₆ over triangles; empty means ϱ_k = p̄ normalized.
struct Multipliers {
    std::array<std::vector<double>, 6> rho;
};

struct FixedParameters {
    double a3 = 1e-2;
    double a5 = 1e-4;
    Multipliers multipliers;
    double marginTol = 1e-7;
    /// Ideal case (γ₂ = ∞): the z̄ and ε̄ rows are removed; dropout fluctuation acts through −ē only.
    bool ideal = false;
    /// One Lyapunov matrix shared by every node or phase.
    bool commonLyapunov = false;
};

struct VariableLayout {
    int nx = 0;
    int lyapunovCount = 0;
    std::vector<int> lyapunovOffset;
    int rho = -1;
    /// zeta[i][l] variable index, −1 where absent.
    std::vector<std::vector<int>> zeta;
    int gamma2 = -1;
    int total = 0;

    int symmetricCount() const { return nx * (nx + 1) / 2; }
    /// Variable index of P_k(r, c).
    int pIndex(int k, int r, int c) const;
    DenseMatrix lyapunov(const Vector& x, int k) const;
    Vector pack(const std::vector<DenseMatrix>& p, double rho, double zeta, double gamma2) const;
};

struct ConstraintTag {
    int i = 0;
    int j = 0;
    int triangle = 0;
    int vertex = 0;
};

enum class ProtocolFamily { Quadratic, Periodic };

struct LmiProblem {
    ProtocolFamily family = ProtocolFamily::Quadratic;
    VariableLayout layout;
    sdp::AffineConstraintSystem system;
    /// Tags of the Ω constraints, in system order (sign and auxiliary constraints follow).
    std::vector<ConstraintTag> tags;
    int omegaCount = 0;
    int omegaSize = 0;
    FixedParameters fixed;
    /// Node transmitting in each phase (periodic) or the node index itself (quadratic).
    std::vector<int> nodeOfIndex;
};

/// Q_i = Mᵀ S_i M with M(x̄, ε̄) = e − ε̄ and S_i selecting node i's components.
std::vector<DenseMatrix> todWeights(const model::Dimensions& dims, const model::NetworkConfig& net);

LmiProblem assembleQuadratic(const LmiInputs& in, const std::vector<DenseMatrix>& weights,
                             const FixedParameters& fixed);

/// `sequence` lists the node of each phase; one Lyapunov matrix per phase, successor p + 1 mod N₁.
LmiProblem assemblePeriodic(const LmiInputs& in, const std::vector<int>& sequence, const FixedParameters& fixed);

/// Good starting point for the solver: P = I, ρ = 1, ζ = 1e-3, γ₂ = gamma2.
Vector initialGuess(const LmiProblem& problem, double gamma2);

struct LmiCertificate {
    std::vector<DenseMatrix> P;
    double rho = 0.0;
    std::vector<std::vector<double>> zeta;
    double margin = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
    double a4 = 0.0;
    double a5 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    bool ideal = false;
};

/// Lemma constants from a solution; throws CertificateInvalid when the hypotheses fail.
LmiCertificate deriveCertificate(const LmiProblem& problem, const Vector& x, double margin);

/// Constants from the Lyapunov bounds alone (used by deriveCertificate and tests).
LmiCertificate certificateConstants(double a1, double a2, double a3, double a4, double a5);

/// Text dump of the problem (variable names, then the sparse system).
std::string dumpProblem(const LmiProblem& problem);

}  // namespace nqcs::lmi
