#include "nqcs/errors.hpp"
#include "nqcs/rng.hpp"
#include "nqcs/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <limits>

namespace nqcs::sdp {

namespace {

constexpr double kWeightCutoff = 1e-18;
}  // namespace

double worstMargin(const AffineConstraintSystem& system, const Vector& x) {
    double t = -std::numeric_limits<double>::infinity();
    for (const auto& c : system.constraints()) {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(c.evaluate(x), Eigen::EigenvaluesOnly);
        t = std::max(t, es.eigenvalues()(es.eigenvalues().size() - 1));
    }
    return t;
}

double smoothedMax(const AffineConstraintSystem& system, const Vector& x, double mu, Vector* gradient,
                   double* exactMax) {
    const auto& cons = system.constraints();
    std::vector<Eigen::SelfAdjointEigenSolver<DenseMatrix>> solvers(cons.size());
    double top = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < cons.size(); ++k) {
        solvers[k].compute(cons[k].evaluate(x), Eigen::EigenvaluesOnly);
        top = std::max(top, solvers[k].eigenvalues().maxCoeff());
    }
    double z = 0.0;
    for (const auto& s : solvers) {
        z += ((s.eigenvalues().array() - top) / mu).exp().sum();
    }
    if (exactMax != nullptr) {
        *exactMax = top;
    }
    if (gradient != nullptr) {
        gradient->setZero(system.variableCount());
        for (size_t k = 0; k < cons.size(); ++k) {
            const Vector w = ((solvers[k].eigenvalues().array() - top) / mu).exp() / z;
            if (w.maxCoeff() < kWeightCutoff) {
                continue;
            }
            Eigen::SelfAdjointEigenSolver<DenseMatrix> full(cons[k].evaluate(x));
            std::vector<Eigen::Index> keep;
            for (Eigen::Index i = 0; i < w.size(); ++i) {
                if (w(i) >= kWeightCutoff) {
                    keep.push_back(i);
                }
            }
            DenseMatrix u(full.eigenvectors().rows(), static_cast<Eigen::Index>(keep.size()));
            Vector wk(static_cast<Eigen::Index>(keep.size()));
            for (size_t j = 0; j < keep.size(); ++j) {
                u.col(static_cast<Eigen::Index>(j)) = full.eigenvectors().col(keep[j]);
                wk(static_cast<Eigen::Index>(j)) = w(keep[j]);
            }
            const DenseMatrix wm = u * wk.asDiagonal() * u.transpose();
            const double sign = cons[k].sense == Sense::PositiveSemidefinite ? -1.0 : 1.0;
            for (const Entry& e : cons[k].entries) {
                const double d = e.row == e.col ? wm(e.row, e.row) : 2.0 * wm(e.row, e.col);
                (*gradient)(e.var) += sign * e.value * d;
            }
        }
    }
    return top + mu * std::log(z);
}

bool verifySolution(const AffineConstraintSystem& system, const Vector& x, double margin, double slack) {
    for (const auto& c : system.constraints()) {
        DenseMatrix f = c.evaluateRaw(x);
        if (c.sense == Sense::PositiveSemidefinite) {
            f = -f;
        }
        f = 0.5 * (f + f.transpose());
        const auto eig = linalg::symmetricEigen(f);
        if (eig.eigenvalues(eig.eigenvalues.size() - 1) > -margin + slack) {
            return false;
        }
    }
    return true;
}

namespace {

/// One block of the phase-1 problem in standard dual form: Z = C − Σ y_i A_i ⪰ 0.
struct PdBlock {
    int n = 0;
    DenseMatrix c;
    std::vector<int> vars;
    std::vector<std::vector<Entry>> entries;
};

/// Blocks for Z_k = tI − F_k(x), the floor t ≥ floor and the ball ‖x‖ ≤ R; y = (x, t).
std::vector<PdBlock> phaseOneBlocks(const AffineConstraintSystem& system, double floor, double radius) {
    const int d = system.variableCount();
    std::vector<PdBlock> out;
    for (const auto& c : system.constraints()) {
        const double sign = c.sense == Sense::PositiveSemidefinite ? -1.0 : 1.0;
        PdBlock b;
        b.n = c.size();
        b.c = -sign * c.constant;
        std::map<int, std::vector<Entry>> by;
        for (const Entry& e : c.entries) {
            by[e.var].push_back({e.var, e.row, e.col, sign * e.value});
        }
        for (auto& [v, list] : by) {
            b.vars.push_back(v);
            b.entries.push_back(std::move(list));
        }
        std::vector<Entry> tt;
        for (int i = 0; i < b.n; ++i) {
            tt.push_back({d, i, i, -1.0});
        }
        b.vars.push_back(d);
        b.entries.push_back(std::move(tt));
        out.push_back(std::move(b));
    }
    {
        PdBlock b;
        b.n = 1;
        b.c = DenseMatrix::Constant(1, 1, -floor);
        b.vars = {d};
        b.entries = {{{d, 0, 0, -1.0}}};
        out.push_back(std::move(b));
    }
    {
        PdBlock b;
        b.n = d + 1;
        b.c = radius * DenseMatrix::Identity(d + 1, d + 1);
        for (int u = 0; u < d; ++u) {
            b.vars.push_back(u);
            b.entries.push_back({{u, 0, u + 1, -1.0}});
        }
        out.push_back(std::move(b));
    }
    return out;
}

/// A_a V accumulated column-wise (sparse A_a, dense V).
DenseMatrix sparseTimes(const std::vector<Entry>& a, const DenseMatrix& v) {
    DenseMatrix out = DenseMatrix::Zero(v.rows(), v.cols());
    for (const Entry& e : a) {
        out.row(e.row) += e.value * v.row(e.col);
        if (e.row != e.col) {
            out.row(e.col) += e.value * v.row(e.row);
        }
    }
    return out;
}

/// ⟨A_a, V⟩ = tr(A_a V).
double sparseInner(const std::vector<Entry>& a, const DenseMatrix& v) {
    double s = 0.0;
    for (const Entry& e : a) {
        s += e.row == e.col ? e.value * v(e.row, e.row) : e.value * (v(e.row, e.col) + v(e.col, e.row));
    }
    return s;
}

DenseMatrix adjoint(const PdBlock& b, const Vector& y) {
    DenseMatrix m = DenseMatrix::Zero(b.n, b.n);
    for (size_t a = 0; a < b.vars.size(); ++a) {
        const double ya = y(b.vars[a]);
        if (ya == 0.0) {
            continue;
        }
        for (const Entry& e : b.entries[a]) {
            m(e.row, e.col) += ya * e.value;
            if (e.row != e.col) {
                m(e.col, e.row) += ya * e.value;
            }
        }
    }
    return m;
}

/// Largest α with M + αD ⪰ 0 (∞ when D ⪰ 0 along the factor).
double maxStep(const Eigen::LLT<DenseMatrix>& llt, const DenseMatrix& d) {
    const auto& l = llt.matrixL();
    DenseMatrix e = l.solve(d);
    e = l.solve(e.transpose()).transpose();
    e = 0.5 * (e + e.transpose());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(e, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

}  // namespace

SolveOutcome solveFeasibility(const AffineConstraintSystem& system, const SolverOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    const int d = system.variableCount();
    SolveOutcome out;
    Vector x = Vector::Zero(d);
    if (options.start.size() == d) {
        x = options.start;
    } else if (options.start.size() != 0) {
        throw DimensionError("solveFeasibility: start point has the wrong dimension");
    }
    if (options.perturbation > 0.0) {
        CounterRng rng(options.seed, Stream::Solver, 0);
        for (int i = 0; i < d; ++i) {
            x(i) += options.perturbation * (1.0 + std::abs(x(i))) * (2.0 * rng.uniform() - 1.0);
        }
    }
    auto finish = [&](const Vector& best, double bestMax) {
        out.x = best;
        out.worstMargin = bestMax;
        if (bestMax <= -options.requestedMargin) {
            out.status = SolveStatus::FeasibleWithMargin;
        } else if (bestMax < 0.0) {
            out.status = SolveStatus::MarginTooSmall;
        } else {
            out.status = SolveStatus::NotFoundWithinBudget;
        }
        out.wallTimeBudgetUsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return out;
    };
    if (system.constraintCount() == 0) {
        return finish(x, -std::numeric_limits<double>::infinity());
    }
    const double radius = std::max(options.radius, 10.0 * (1.0 + x.norm()));
    const double target = -options.requestedMargin;

    Vector best = x;
    double bestMax = worstMargin(system, x);
    ++out.evaluations;
    if (bestMax <= target) {
        return finish(best, bestMax);
    }

    // dual-feasible start: t above every eigenvalue, X = I
    const double floor = -std::max(1.0, 10.0 * options.requestedMargin);
    const auto blocks = phaseOneBlocks(system, floor, radius);
    const int dy = d + 1;
    Vector y(dy);
    y.head(d) = x;
    y(d) = bestMax + std::max(1.0, std::abs(bestMax));
    Vector b = Vector::Zero(dy);
    b(d) = -1.0;
    const size_t nb = blocks.size();
    std::vector<DenseMatrix> xs(nb);
    std::vector<DenseMatrix> zs(nb);
    int order = 0;
    for (size_t k = 0; k < nb; ++k) {
        xs[k] = DenseMatrix::Identity(blocks[k].n, blocks[k].n);
        zs[k] = blocks[k].c - adjoint(blocks[k], y);
        order += blocks[k].n;
    }
    const double step = 0.95;

    int it = 0;
    for (; it < options.maxIterations; ++it) {
        // residuals, μ and factorizations
        std::vector<Eigen::LLT<DenseMatrix>> lx(nb);
        std::vector<Eigen::LLT<DenseMatrix>> lz(nb);
        std::vector<DenseMatrix> zinv(nb);
        std::vector<DenseMatrix> rd(nb);
        Vector rp = b;
        double gap = 0.0;
        double primal = 0.0;
        bool broken = false;
        for (size_t k = 0; k < nb; ++k) {
            const auto& blk = blocks[k];
            lx[k].compute(xs[k]);
            lz[k].compute(zs[k]);
            if (lx[k].info() != Eigen::Success || lz[k].info() != Eigen::Success) {
                broken = true;
                break;
            }
            zinv[k] = lz[k].solve(DenseMatrix::Identity(blk.n, blk.n));
            rd[k] = blk.c - zs[k] - adjoint(blk, y);
            for (size_t a = 0; a < blk.vars.size(); ++a) {
                rp(blk.vars[a]) -= sparseInner(blk.entries[a], xs[k]);
            }
            gap += (xs[k].cwiseProduct(zs[k])).sum();
            primal += (blk.c.cwiseProduct(xs[k])).sum();
        }
        if (broken) {
            break;
        }
        const double mu = gap / order;
        const double t = y(d);
        const double rpNorm = rp.lpNorm<Eigen::Infinity>();
        // −⟨C, X⟩ bounds t from below once X is primal feasible
        if (rpNorm <= 1e-8 && -primal > 0.0) {
            break;
        }
        if (rpNorm <= 1e-8 && mu <= 1e-10 * std::max(1.0, std::abs(t))) {
            break;
        }

        // Schur complement M_ij = Σ_k tr(A_i X A_j Z⁻¹)
        DenseMatrix m = DenseMatrix::Zero(dy, dy);
        for (size_t k = 0; k < nb; ++k) {
            const auto& blk = blocks[k];
            const int nv = static_cast<int>(blk.vars.size());
            const Eigen::Index nn = static_cast<Eigen::Index>(blk.n) * blk.n;
            DenseMatrix left(nn, nv);
            DenseMatrix right(nn, nv);
            for (int a = 0; a < nv; ++a) {
                const DenseMatrix za = sparseTimes(blk.entries[static_cast<size_t>(a)], zinv[k]).transpose();
                const DenseMatrix ax = sparseTimes(blk.entries[static_cast<size_t>(a)], xs[k]);
                left.col(a) = Eigen::Map<const Vector>(za.data(), nn);
                // tr(Z⁻¹A_i X A_j) = Σ (Z⁻¹A_i)_pq (X A_j)_qp = vec(Z⁻¹A_i) · vec(A_j X)
                right.col(a) = Eigen::Map<const Vector>(ax.data(), nn);
            }
            const DenseMatrix mk = left.transpose() * right;
            for (int a = 0; a < nv; ++a) {
                for (int c = 0; c < nv; ++c) {
                    m(blk.vars[static_cast<size_t>(a)], blk.vars[static_cast<size_t>(c)]) += 0.5 * (mk(a, c) + mk(c, a));
                }
            }
        }
        const Vector dsc = m.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        DenseMatrix ms = dsc.asDiagonal() * m * dsc.asDiagonal();
        ms.diagonal().array() += 1e-13;
        const Eigen::LDLT<DenseMatrix> ldlt(ms);

        auto direction = [&](double sigmaMu, const std::vector<DenseMatrix>* corr, Vector& dyv,
                             std::vector<DenseMatrix>& dx, std::vector<DenseMatrix>& dz) {
            Vector rhs = rp;
            std::vector<DenseMatrix> base(nb);
            for (size_t k = 0; k < nb; ++k) {
                // σμZ⁻¹ − X − X R_d Z⁻¹ − corr
                base[k] = sigmaMu * zinv[k] - xs[k] - xs[k] * rd[k] * zinv[k];
                if (corr != nullptr) {
                    base[k] -= (*corr)[k];
                }
                const auto& blk = blocks[k];
                for (size_t a = 0; a < blk.vars.size(); ++a) {
                    rhs(blk.vars[a]) -= sparseInner(blk.entries[a], base[k]);
                }
            }
            dyv = dsc.asDiagonal() * ldlt.solve(dsc.asDiagonal() * rhs);
            dx.resize(nb);
            dz.resize(nb);
            for (size_t k = 0; k < nb; ++k) {
                dz[k] = rd[k] - adjoint(blocks[k], dyv);
                DenseMatrix v = base[k] - xs[k] * dz[k] * zinv[k];
                dx[k] = 0.5 * (v + v.transpose());
            }
        };
        auto stepLengths = [&](const std::vector<DenseMatrix>& dx, const std::vector<DenseMatrix>& dz, double& ap,
                               double& ad) {
            ap = 1.0;
            ad = 1.0;
            for (size_t k = 0; k < nb; ++k) {
                ap = std::min(ap, step * maxStep(lx[k], dx[k]));
                ad = std::min(ad, step * maxStep(lz[k], dz[k]));
            }
        };

        Vector dyp;
        std::vector<DenseMatrix> dxp;
        std::vector<DenseMatrix> dzp;
        direction(0.0, nullptr, dyp, dxp, dzp);
        double ap = 1.0;
        double ad = 1.0;
        stepLengths(dxp, dzp, ap, ad);
        double after = 0.0;
        for (size_t k = 0; k < nb; ++k) {
            after += ((xs[k] + ap * dxp[k]).cwiseProduct(zs[k] + ad * dzp[k])).sum();
        }
        const double sigma = std::clamp(std::pow(after / gap, 3.0), 0.0, 1.0);
        std::vector<DenseMatrix> corr(nb);
        for (size_t k = 0; k < nb; ++k) {
            corr[k] = dxp[k] * dzp[k] * zinv[k];
        }
        Vector dyc;
        std::vector<DenseMatrix> dxc;
        std::vector<DenseMatrix> dzc;
        direction(sigma * mu, &corr, dyc, dxc, dzc);
        stepLengths(dxc, dzc, ap, ad);
        if (!dyc.allFinite() || (ap < 1e-10 && ad < 1e-10)) {
            break;
        }
        for (size_t k = 0; k < nb; ++k) {
            xs[k] += ap * dxc[k];
            zs[k] += ad * dzc[k];
        }
        y += ad * dyc;
        ++out.evaluations;
        // Z ⪰ 0 keeps t above every eigenvalue of F(x) up to the dual residual
        if (y(d) <= target) {
            const double exact = worstMargin(system, y.head(d));
            if (exact < bestMax) {
                bestMax = exact;
                best = y.head(d);
            }
            if (bestMax <= target) {
                ++it;
                break;
            }
        }
    }
    out.iterations = it;
    const double exact = worstMargin(system, y.head(d));
    if (exact < bestMax) {
        bestMax = exact;
        best = y.head(d);
    }
    return finish(best, bestMax);
}

SolveOutcome minimizeScalarObjective(const AffineConstraintSystem& system, int objectiveIndex,
                                     const BisectionOptions& bisection, const SolverOptions& options) {
    if (objectiveIndex < 0 || objectiveIndex >= system.variableCount()) {
        throw IndexError("minimizeScalarObjective: objective index out of range");
    }
    if (!(bisection.upper > bisection.lower)) {
        throw DomainError("minimizeScalarObjective: empty bracket");
    }
    int calls = 0;
    double wall = 0.0;
    auto solveAt = [&](double value, const Vector& warm) {
        SolverOptions opt = options;
        if (warm.size() == system.variableCount()) {
            opt.start = warm;
        }
        if (opt.start.size() == system.variableCount()) {
            opt.start(objectiveIndex) = value;
        }
        SolveOutcome o = solveFeasibility(system.withFixedVariable(objectiveIndex, value), opt);
        ++calls;
        wall += o.wallTimeBudgetUsed;
        o.x(objectiveIndex) = value;
        return o;
    };

    SolveOutcome best = solveAt(bisection.upper, Vector());
    if (best.status != SolveStatus::FeasibleWithMargin) {
        best.infeasibleAtBracket = true;
        best.objective = bisection.upper;
        best.solveCalls = calls;
        best.wallTimeBudgetUsed = wall;
        return best;
    }
    double lo = bisection.lower;
    double hi = bisection.upper;
    while (hi - lo > bisection.relativeTolerance * std::abs(hi) && calls < bisection.maxCalls) {
        const double mid = 0.5 * (lo + hi);
        SolveOutcome o = solveAt(mid, best.x);
        if (o.status == SolveStatus::FeasibleWithMargin) {
            hi = mid;
            best = std::move(o);
        } else {
            lo = mid;
        }
    }
    best.objective = hi;
    best.solveCalls = calls;
    best.wallTimeBudgetUsed = wall;
    return best;
}

}  // namespace nqcs::sdp
