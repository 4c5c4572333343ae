#pragma once

#include "nqcs/lmi.hpp"
#include "nqcs/model.hpp"
#include "nqcs/overapprox.hpp"
#include "nqcs/sdp.hpp"
#include "nqcs/sim.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nqcs::workbench {

using linalg::DenseMatrix;
using linalg::Vector;

inline constexpr const char* kToolVersion = "nqcs 0.1.0";

/// How γ₂ enters analyze: fixed value, ideal case (γ₂ = ∞) or minimized by bisection.
struct Gamma2Setting {
    enum class Mode { Fixed, Ideal, Minimize };
    Mode mode = Mode::Minimize;
    double value = 0.0;

    static Gamma2Setting fixed(double v) { return {Mode::Fixed, v}; }
    static Gamma2Setting ideal() { return {Mode::Ideal, std::numeric_limits<double>::infinity()}; }
};

struct LmiSettings {
    double a3 = 1e-2;
    double a5 = 1e-4;
    bool commonLyapunov = false;
    Gamma2Setting gamma2;
    /// Upper end of the γ₂ bracket and relative tolerance when minimizing.
    double gamma2Upper = 1e10;
    double gamma2Tolerance = 0.05;
    /// Dictionary of multiplier sets ϱ₁..ϱ₆; empty means the single default (ϱ = p̄).
    std::vector<lmi::Multipliers> multiplierDictionary;
};

struct SimulationSettings {
    int runs = 200;
    int horizon = 500;
    std::uint64_t seed = 42;
    /// Empty means x̄₀ = e₁ (first plant component 1, everything else 0).
    Vector x0;
};

struct SweepSettings {
    std::vector<double> hMad{1e-3, 4e-3, 8e-3, 1.2e-2};
    /// +∞ marks the ideal case.
    std::vector<double> gamma2{1e3, 3e3, 1e4, 1e5, std::numeric_limits<double>::infinity()};
    /// h_mati bracket; a negative lower end means ε.
    double hMatiLower = -1.0;
    double hMatiUpper = 0.05;
    double relativeTolerance = 0.05;
    /// Write measured wall time into runtime_s (breaks byte-identical output).
    bool recordRuntime = false;
};

struct WorkbenchConfig {
    model::LinearPlantModel plant;
    model::LinearControllerModel controller;
    model::NetworkConfig net;
    model::QuantizerConfig quantizer;
    overapprox::ProcedureOptions procedure;
    LmiSettings lmi;
    sdp::SolverOptions solver;
    SimulationSettings simulation;
    SweepSettings sweep;
    int containmentSamples = 100;
    std::uint64_t containmentSeed = 1;
    int workers = 1;

    model::Dimensions dimensions() const;
    /// Throws ConfigError naming the violated invariant.
    void validate() const;
};

/// Parses and validates a JSON document; parse errors carry line and column.
WorkbenchConfig parseConfig(const std::string& text);
WorkbenchConfig loadConfig(const std::string& path);
/// Full configuration with every default materialized.
std::string configJson(const WorkbenchConfig& config);

/// Stable identifier of a manifest (hash of its content).
std::string manifestId(const std::string& manifest);
std::string manifestJson(const WorkbenchConfig& config, const std::string& verb);

enum class AnalysisStatus { Certified, Infeasible, TightnessNotAchieved, CertificateRejected };

std::string statusName(AnalysisStatus s);

struct AnalysisResult {
    AnalysisStatus status = AnalysisStatus::Infeasible;
    std::string message;
    std::optional<overapprox::PolytopicModel> model;
    std::optional<lmi::LmiProblem> problem;
    sdp::SolveOutcome outcome;
    std::optional<lmi::LmiCertificate> certificate;
    overapprox::ContainmentReport containment;
    /// γ₂ used (∞ for the ideal case).
    double gamma2 = 0.0;
    int multiplierIndex = 0;
    int solveCalls = 0;

    bool certified() const { return status == AnalysisStatus::Certified; }
};

struct AnalyzeOptions {
    bool checkContainment = true;
};

AnalysisResult analyze(const WorkbenchConfig& config, const AnalyzeOptions& options = {});

/// JSON report of an analysis (certificate constants or the failure).
std::string analysisJson(const AnalysisResult& result);

/// Certificate fields needed by the simulator, read back from analysisJson output.
lmi::LmiCertificate certificateFromJson(const std::string& text);

struct SweepRow {
    double gamma2 = 0.0;
    double hMad = 0.0;
    double hMatiMax = 0.0;
    bool feasible = false;
    double margin = 0.0;
    double runtime = 0.0;
    int solves = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    /// Fixed-γ₂ comparisons where h_mati_max increased with h_mad.
    int monotonicityViolations = 0;
    /// Bisection resolution; trend comparisons allow this relative slack.
    double tolerance = 0.05;
};

std::string sweepHeader();
std::string sweepCsvRow(const SweepRow& row, bool recordRuntime);

/// Grid in γ₂-major order; `onRow` receives rows in grid order as soon as they are available.
SweepResult sweepTradeoff(const WorkbenchConfig& config, const std::function<void(const SweepRow&)>& onRow = {});

/// Pass counts of the three trend families over adjacent grid pairs.
struct TrendSummary {
    int madComparisons = 0;
    int madHeld = 0;
    int gammaComparisons = 0;
    int gammaHeld = 0;
    int idealComparisons = 0;
    int idealHeld = 0;

    int total() const { return madComparisons + gammaComparisons + idealComparisons; }
    int held() const { return madHeld + gammaHeld + idealHeld; }
};

TrendSummary trendSummary(const SweepResult& result);

struct SimulationReport {
    sim::EnsembleStatistics stats;
    sim::BoundReport emsiss;
    std::optional<sim::HinfReport> hinf;
    std::string hinfError;
    sim::UltimateReport ultimate;
    double alphaFrequency = 0.0;
    double betaFrequency = 0.0;
    bool dropoutWithin3Sigma = true;
    bool passed = false;
    std::string verdict;
    std::string traceCsv;
    std::string statisticsCsv;
};

sim::SimulationSetup simulationSetup(const WorkbenchConfig& config);

SimulationReport simulateAndCheck(const WorkbenchConfig& config, const lmi::LmiCertificate& certificate);

}  // namespace nqcs::workbench
