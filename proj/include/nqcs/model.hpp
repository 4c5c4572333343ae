#pragma once

#include "nqcs/linalg.hpp"
#include "nqcs/timing.hpp"

#include <string>
#include <vector>

namespace nqcs::model {

using linalg::DenseMatrix;
using linalg::Vector;

struct Dimensions {
    int np = 0;
    int nc = 0;
    int ny = 0;
    int nu = 0;
    int n() const { return np + nc; }
    int nz() const { return ny + nu; }
    int nx() const { return np + nc + ny + nu; }
};

/// ẋ_p = A x_p + B û,  y = C x_p.
struct LinearPlantModel {
    DenseMatrix A;
    DenseMatrix B;
    DenseMatrix C;

    int states() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(B.cols()); }
    int outputs() const { return static_cast<int>(C.rows()); }
    void validate() const;
};

/// ẋ_c = A x_c + B ŷ,  u = C x_c + D ŷ.
struct LinearControllerModel {
    DenseMatrix A;
    DenseMatrix B;
    DenseMatrix C;
    DenseMatrix D;

    int states() const { return static_cast<int>(A.rows()); }
    void validate(const LinearPlantModel& plant) const;
};

enum class ProtocolKind { Quadratic, TryOnceDiscard, Periodic, RoundRobin };

struct Protocol {
    ProtocolKind kind = ProtocolKind::TryOnceDiscard;
    /// Quadratic protocol weights Q_i over (x̄, ε̄), one per node.
    std::vector<DenseMatrix> weights;
    /// Periodic schedule (0-based node indices); its length is the period N₁.
    std::vector<int> sequence;

    bool isQuadraticFamily() const {
        return kind == ProtocolKind::Quadratic || kind == ProtocolKind::TryOnceDiscard;
    }
    /// Node transmitting at phase p of a periodic schedule.
    int periodicNode(int phase, int nodeCount) const;
    int period(int nodeCount) const;
};

/// Node ownership, timing, dropouts and scheduling.
struct NetworkConfig {
    int nodeCount = 1;
    /// Output components y owned by each node (0-based).
    std::vector<std::vector<int>> yComponents;
    /// Control components u owned by each node (0-based).
    std::vector<std::vector<int>> uComponents;
    /// Components refreshed at every transmission without quantization.
    std::vector<int> directY;
    std::vector<int> directU;

    TimingRegion region;
    DistributionSpec distribution;
    /// Success probabilities ᾱ (sensor to controller) and β̄ (controller to actuator).
    double alphaBar = 1.0;
    double betaBar = 1.0;
    Protocol protocol;
    /// Optional per-node scaling J_σ ≥ 1 of the uncertainty output maps.
    std::vector<double> nodeScaling;

    void validate(const Dimensions& dims) const;
    /// Γ_y(σ), Γ_u(σ) and Γ_σ = diag(Γ_y, Γ_u) as 0/1 diagonals.
    Vector gammaY(int sigma, int ny) const;
    Vector gammaU(int sigma, int nu) const;
    Vector gamma(int sigma, int ny, int nu) const;
    double scaling(int sigma) const;
    /// Indices into z̄ = (y, u) owned by node j (y first, then u shifted by ny).
    std::vector<int> nodeComponents(int node, int ny) const;
};

struct QuantizerConfig {
    /// Per-node range M_j, error bound Λ_j, dead zone Λ₀j, zoom Ω_j and μ_j(0).
    std::vector<double> range;
    std::vector<double> errorBound;
    std::vector<double> deadZone;
    std::vector<double> zoom;
    std::vector<double> mu0;

    void validate(int nodeCount) const;
};

struct QuantizeResult {
    Vector quantized;
    Vector error;
    /// Per node: ‖z_j‖ > M_j μ_j.
    std::vector<bool> saturated;
    bool anySaturated() const;
};

/// Per-node uniform mid-rise lattice quantizer with step 2Λ_j/√n_j and a dead zone Λ₀j,
/// applied as μ_j q(z_j / μ_j). Direct components pass through unchanged.
QuantizeResult quantize(const QuantizerConfig& q, const NetworkConfig& net, const Vector& mu, const Vector& z,
                        int ny);

/// Held values after an update at r_k.
struct HeldValues {
    Vector yHat;
    Vector uHat;
};

HeldValues updateReceived(const HeldValues& held, const Vector& y, const Vector& u, const Vector& epsY,
                          const Vector& epsU, int sigma, bool alpha, bool beta, const NetworkConfig& net);

Vector updateZoom(const Vector& mu, bool alpha, bool beta, const QuantizerConfig& q);

/// σ_k from the protocol. x̄ = (x_p, x_c, e_y, e_u); e is read from its tail.
int scheduleNode(const Protocol& protocol, const NetworkConfig& net, long k, const Vector& xbar,
                 const Vector& epsbar);

/// Interval-independent building blocks of the discretized loop.
struct LoopMatrices {
    Dimensions dims;
    DenseMatrix lambdaBar;  // diag(A_p, A_c)
    DenseMatrix B;          // [[0, B_p], [B_c, 0]]
    DenseMatrix C;          // diag(C_p, C_c)
    DenseMatrix D;          // [[I, 0], [D_c, I]]
    DenseMatrix Dinv;       // [[I, 0], [-D_c, I]]
};

LoopMatrices loopMatrices(const LinearPlantModel& plant, const LinearControllerModel& controller);

/// Exact discrete-time closed loop at one (σ, h, τ):
/// x̄⁺ = 𝒜 x̄ + ℬ ϒ ε̄ + ℬ ϒ_k w̄,  z̄ = H x̄,  w̄ = ε̄ − ē.
struct ClosedLoopRealization {
    Dimensions dims;
    DenseMatrix A;           // 𝒜, n_x × n_x
    DenseMatrix B;           // ℬ, n_x × n_z
    DenseMatrix H;           // n_z × n_x
    Vector meanInjection;    // diagonal of ϒ = diag(ᾱ I, β̄ I), length n_z
    Vector fluctuationVariance;  // diag(ᾱ(1−ᾱ) I, β̄(1−β̄) I), length n_z

    /// Full fluctuation-covariance diagonal over (ε̄, w̄) blocks: diag(v, v).
    Vector upsilonBold() const;
};

ClosedLoopRealization buildRealization(const LinearPlantModel& plant, const LinearControllerModel& controller,
                                       const NetworkConfig& net, int sigma, double h, double tau);

/// Same as above on precomputed loop matrices (used on hot paths).
ClosedLoopRealization buildRealization(const LoopMatrices& loop, const NetworkConfig& net, int sigma, double h,
                                       double tau);

}  // namespace nqcs::model
