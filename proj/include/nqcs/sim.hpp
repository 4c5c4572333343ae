#pragma once

#include "nqcs/lmi.hpp"
#include "nqcs/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nqcs::sim {

using linalg::DenseMatrix;
using linalg::Vector;

/// Loop data shared by every run of an ensemble.
struct SimulationSetup {
    model::LinearPlantModel plant;
    model::LinearControllerModel controller;
    model::NetworkConfig net;
    model::QuantizerConfig quantizer;
    /// x̄₀ = (x_p, x_c, e_y, e_u).
    Vector x0;
};

/// State at t_k and the transmission that starts there.
struct StepRecord {
    long k = 0;
    double t = 0.0;
    double h = 0.0;
    double tau = 0.0;
    int sigma = 0;
    bool alpha = false;
    bool beta = false;
    double norm2X = 0.0;
    double norm2Eps = 0.0;
    double norm2Z = 0.0;
    Vector mu;
    bool saturated = false;
    /// ‖e_j − ε_j‖ per node (the quantity TOD maximizes).
    Vector nodeError;
};

struct SimulationRun {
    std::uint64_t seed = 0;
    int horizon = 0;
    Vector x0;
    /// K + 1 records.
    std::vector<StepRecord> trace;
    /// x̄_k and ε̄_k for k = 0..K (kept for replay).
    std::vector<Vector> states;
    std::vector<Vector> eps;
    /// x̄₀ outside the quantizer range (Assumption 3), logged only.
    bool initialRangeViolation = false;
};

SimulationRun simulateRun(const model::LinearPlantModel& plant, const model::LinearControllerModel& controller,
                          const model::NetworkConfig& net, const model::QuantizerConfig& quantizer, const Vector& x0,
                          int horizon, std::uint64_t seed);

SimulationRun simulateRun(const SimulationSetup& setup, int horizon, std::uint64_t seed);

/// Largest per-step residual of x̄_{k+1} against the realization at (σ_k, h_k, τ_k) with the
/// realized dropouts, relative to max(1, ‖x̄_{k+1}‖∞).
double replayResidual(const SimulationRun& run, const SimulationSetup& setup);

/// Steps where the scheduled node's error is not maximal (TOD only; 0 otherwise).
int todViolations(const SimulationRun& run, const model::NetworkConfig& net);

/// 17-significant-digit CSV: k,t,h,tau,sigma,alpha,beta,norm2_x,norm2_eps,norm2_z,mu_1..mu_L,saturated.
std::string traceCsv(const SimulationRun& run);

struct EnsembleStatistics {
    int runs = 0;
    int horizon = 0;
    /// Two-sided normal quantile used for half-widths.
    double z = 2.5758293035489;
    bool confidenceValid = false;
    std::vector<double> meanSquareState;
    std::vector<double> stateHalfWidth;
    std::vector<double> meanSquareOutput;
    std::vector<double> meanSquareEps;
    /// Mean over runs of sup_{i ∈ {0..k−1}} ‖ε̄_i‖² (0 at k = 0).
    std::vector<double> epsSup;
    /// Per-run Σ_k ‖z̄_k‖² and Σ_k ‖ε̄_k‖².
    std::vector<double> runOutputSum;
    std::vector<double> runEpsSum;
    double x0Norm2 = 0.0;
    long alphaSuccesses = 0;
    long betaSuccesses = 0;
    long draws = 0;
    int todViolations = 0;
    double maxReplayResidual = 0.0;
    long saturatedSteps = 0;
};

struct EnsembleOptions {
    int workers = 1;
    bool replay = true;
};

/// Runs r = 0..runs−1 with seed seedBase + r.
EnsembleStatistics runEnsemble(const SimulationSetup& setup, int runs, int horizon, std::uint64_t seedBase,
                               const EnsembleOptions& options = {});

/// Runs with explicit seeds (aggregated in list order).
EnsembleStatistics runEnsembleSeeds(const SimulationSetup& setup, const std::vector<std::uint64_t>& seeds,
                                    int horizon, const EnsembleOptions& options = {});

struct BoundReport {
    bool holds = true;
    /// bound − estimate − half-width per step.
    std::vector<double> margin;
    std::vector<int> violations;
    double worstMargin = 0.0;
};

/// E‖x̄_k‖² ≤ c₁‖x̄₀‖²e^{−c₂k} + γ₁ sup_{i<k} ‖ε̄_i‖² at every step.
BoundReport checkEmsissBound(const EnsembleStatistics& stats, const lmi::LmiCertificate& cert, double x0Norm2,
                             const std::vector<double>& epsHistory);

struct HinfReport {
    bool holds = true;
    double lhs = 0.0;
    double rhs = 0.0;
    double halfWidth = 0.0;
    double ratio = 0.0;
    double tailFraction = 0.0;
    double c3 = 0.0;
};

/// Σ E‖z̄_k‖² ≤ c₃‖x̄₀‖² + γ₂ Σ E‖ε̄_k‖², c₃ = a₂ unless overridden (c3 > 0).
/// Throws HorizonTooShort when the estimated output tail exceeds 1% of the right-hand side.
HinfReport checkHinfSum(const EnsembleStatistics& stats, const lmi::LmiCertificate& cert, double x0Norm2,
                        double c3 = -1.0);

struct UltimateReport {
    bool holds = true;
    double bound = 0.0;
    double observedLimsup = 0.0;
    bool zoomActive = false;
    std::vector<double> windowMeans;
    bool monotone = true;
};

/// Tail mean-square state ≤ γ₁‖Λ diag(μ₀)‖²; with active zoom the window means must also decrease.
UltimateReport ultimateBoundCheck(const EnsembleStatistics& stats, const lmi::LmiCertificate& cert,
                                  const model::QuantizerConfig& quantizer, int windows = 5);

/// Per-step statistics CSV: k,mean_norm2_x,half_width_x,mean_norm2_z,mean_norm2_eps,sup_norm2_eps.
std::string statisticsCsv(const EnsembleStatistics& stats);

}  // namespace nqcs::sim
