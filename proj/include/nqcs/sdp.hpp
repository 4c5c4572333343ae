#pragma once

#include "nqcs/linalg.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace nqcs::sdp {

using linalg::DenseMatrix;
using linalg::Vector;

enum class Sense { NegativeSemidefinite, PositiveSemidefinite };

/// One coefficient entry; row ≤ col, mirrored below the diagonal.
struct Entry {
    int var = 0;
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// F(x) = F₀ + Σ_v x_v F_v, required ⪯ 0 (or ⪰ 0).
struct AffineConstraint {
    std::string label;
    Sense sense = Sense::NegativeSemidefinite;
    DenseMatrix constant;
    std::vector<Entry> entries;

    int size() const { return static_cast<int>(constant.rows()); }
    /// F(x) with the sign normalized so that feasibility means ⪯ 0.
    DenseMatrix evaluate(const Vector& x) const;
    /// F(x) as stated, without sign normalization.
    DenseMatrix evaluateRaw(const Vector& x) const;
};

/// Accumulates the symmetric coefficient pattern of one constraint.
class ConstraintBuilder {
public:
    explicit ConstraintBuilder(int size, std::string label = {}, Sense sense = Sense::NegativeSemidefinite);

    int size() const { return size_; }
    /// Adds `value` at (r, c) and (c, r) of F_var; var < 0 targets the constant term.
    void add(int var, int r, int c, double value);
    /// Adds M at rows r0.., cols c0.. and its transpose at the mirrored position.
    /// When the block sits on the diagonal (r0 == c0) M must be symmetric and is added once.
    void addBlock(int var, int r0, int c0, const DenseMatrix& m);
    AffineConstraint build() const;

private:
    int size_;
    std::string label_;
    Sense sense_;
    DenseMatrix constant_;
    std::map<std::tuple<int, int, int>, double> terms_;
};

class AffineConstraintSystem {
public:
    explicit AffineConstraintSystem(int variables = 0) : variables_(variables) {}

    int variableCount() const { return variables_; }
    void setVariableCount(int d) { variables_ = d; }
    /// Validates symmetry and indices, then appends.
    void add(AffineConstraint c);
    const std::vector<AffineConstraint>& constraints() const { return constraints_; }
    int constraintCount() const { return static_cast<int>(constraints_.size()); }
    std::vector<std::string>& variableNames() { return names_; }
    const std::vector<std::string>& variableNames() const { return names_; }

    /// Copy with variable `index` folded into the constants at `value`.
    AffineConstraintSystem withFixedVariable(int index, double value) const;
    /// Copy with every constraint multiplied by c > 0.
    AffineConstraintSystem scaled(double c) const;

private:
    int variables_;
    std::vector<AffineConstraint> constraints_;
    std::vector<std::string> names_;
};

enum class SolveStatus { FeasibleWithMargin, MarginTooSmall, NotFoundWithinBudget };

std::string statusName(SolveStatus s);

struct SolverOptions {
    /// Cap on interior-point iterations.
    int maxIterations = 200;
    double requestedMargin = 1e-7;
    std::uint64_t seed = 0;
    /// Search is confined to ‖x‖ ≤ radius (enlarged to cover the start point).
    double radius = 1e9;
    /// Relative size of the seeded start-point perturbation.
    double perturbation = 1e-6;
    /// Optional start point (zero if empty).
    Vector start;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::NotFoundWithinBudget;
    Vector x;
    /// Largest eigenvalue over all sign-normalized constraints at x.
    double worstMargin = 0.0;
    int iterations = 0;
    int evaluations = 0;
    double wallTimeBudgetUsed = 0.0;
    /// Objective value (minimizeScalarObjective only).
    double objective = 0.0;
    int solveCalls = 1;
    bool infeasibleAtBracket = false;
};

/// Maximum eigenvalue over all sign-normalized constraints.
double worstMargin(const AffineConstraintSystem& system, const Vector& x);

/// Smoothed maximum μ·log Σ exp(λ/μ) over all eigenvalues, with its gradient.
double smoothedMax(const AffineConstraintSystem& system, const Vector& x, double mu, Vector* gradient,
                   double* exactMax = nullptr);

SolveOutcome solveFeasibility(const AffineConstraintSystem& system, const SolverOptions& options = {});

/// Independent check: every constraint has max eigenvalue ≤ −margin + slack.
bool verifySolution(const AffineConstraintSystem& system, const Vector& x, double margin, double slack = 1e-9);

struct BisectionOptions {
    double lower = 0.0;
    double upper = 1e3;
    double relativeTolerance = 1e-2;
    int maxCalls = 60;
};

/// Smallest value of variable `objectiveIndex` (by bisection) for which the system is feasible.
SolveOutcome minimizeScalarObjective(const AffineConstraintSystem& system, int objectiveIndex,
                                     const BisectionOptions& bisection, const SolverOptions& options = {});

/// Plain-text sparse dump: header lines, then "constraint k size sense label" followed by
/// "var row col value" rows (var 0 = constant, 1-based rows/cols, upper triangle).
std::string dumpSystem(const AffineConstraintSystem& system);

}  // namespace nqcs::sdp
