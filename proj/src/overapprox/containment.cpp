#include "nqcs/errors.hpp"
#include "nqcs/overapprox.hpp"
#include "nqcs/rng.hpp"

#include <algorithm>
#include <cmath>

namespace nqcs::overapprox {

namespace {

struct DeltaFit {
    DenseMatrix delta;  // block diagonal, 3n × 3n
    double maxBlockNorm = 0.0;
};

/// Stacked rows of [C̄ F̄] belonging to block i in each of the three groups.
DenseMatrix blockRows(const DenseMatrix& w, int n, int off, int ni) {
    DenseMatrix out(3 * ni, w.cols());
    for (int g = 0; g < 3; ++g) {
        out.middleRows(g * ni, ni) = w.middleRows(g * n + off, ni);
    }
    return out;
}

/// Places D_i (n_i × 3n_i, columns grouped A | Eh | Er) into Δ with the δ scaling removed.
void placeBlock(DeltaFit& fit, const DenseMatrix& di, const UncertaintyEnvelope& env, int n, int k, int i, int off,
                int ni) {
    for (int g = 0; g < 3; ++g) {
        const double delta = env.deltaScale[static_cast<size_t>(g * k + i)];
        DenseMatrix block = DenseMatrix::Zero(ni, ni);
        if (delta > 0.0) {
            block = di.middleCols(g * ni, ni) / delta;
        }
        fit.maxBlockNorm = std::max(fit.maxBlockNorm, linalg::spectralNorm(block));
        fit.delta.block(g * n + off, g * n + off, ni, ni) = block;
    }
}

double relativeResidual(const DenseMatrix& r, const UncertaintyEnvelope& env, const DeltaFit& fit,
                        const DenseMatrix& w) {
    const DenseMatrix res = r - env.Bbar * fit.delta * w;
    return linalg::spectralNorm(res) / (1.0 + linalg::spectralNorm(r));
}

}  // namespace

ContainmentViolation checkContainmentAt(const PolytopicModel& model, const model::LoopMatrices& loop,
                                        const model::NetworkConfig& net, int sigma, double h, double tau,
                                        const ContainmentTolerances& tol, bool& ok) {
    const auto& dec = model.decomposition;
    const auto& env = model.envelope;
    const int n = model.dims.n();
    const int nx = model.dims.nx();
    const int nz = model.dims.nz();
    const int k = dec.blockCount();

    const auto loc = model.partition.locate(h, tau);
    const auto& tri = model.partition.triangles[static_cast<size_t>(loc.triangle)];
    const auto exact = model::buildRealization(loop, net, sigma, h, tau);

    DenseMatrix r(nx, nx + nz);
    r << exact.A, exact.B;
    for (int l = 0; l < 3; ++l) {
        const auto v = static_cast<size_t>(tri[l]);
        r.leftCols(nx) -= loc.weights[l] * model.vertices.A[sigma][v];
        r.rightCols(nz) -= loc.weights[l] * model.vertices.E[sigma][v];
    }
    DenseMatrix w(3 * n, nx + nz);
    w << env.Cbar[sigma], env.Fbar[sigma];
    const DenseMatrix y = dec.transformInverse * r.topRows(n);

    // least-squares fit per Jordan block
    DeltaFit fit{DenseMatrix::Zero(3 * n, 3 * n), 0.0};
    for (int i = 0; i < k; ++i) {
        const int off = dec.offset(i);
        const int ni = dec.blockSizes[i];
        const DenseMatrix wi = blockRows(w, n, off, ni);
        const Eigen::CompleteOrthogonalDecomposition<DenseMatrix> cod(wi.transpose());
        const DenseMatrix di = cod.solve(y.middleRows(off, ni).transpose()).transpose();
        placeBlock(fit, di, env, n, k, i, off, ni);
    }
    double residual = relativeResidual(r, env, fit, w);
    ok = fit.maxBlockNorm <= 1.0 + tol.blockNorm && residual <= tol.residual;

    if (!ok) {
        // constructive Δ from the exact per-block approximation errors
        DeltaFit direct{DenseMatrix::Zero(3 * n, 3 * n), 0.0};
        const auto c = model.partition.corners(loc.triangle);
        const double j = net.scaling(sigma);
        for (int i = 0; i < k; ++i) {
            const DenseMatrix& block = dec.blocks[static_cast<size_t>(i)];
            const int ni = dec.blockSizes[i];
            const auto [eh, ih] = linalg::matexpWithIntegral(block, h);
            DenseMatrix da = eh;
            DenseMatrix dh = ih;
            DenseMatrix dr = linalg::matexpIntegral(block, h - tau);
            for (int l = 0; l < 3; ++l) {
                const auto [el, il] = linalg::matexpWithIntegral(block, c[l].h);
                da -= loc.weights[l] * el;
                dh -= loc.weights[l] * il;
                dr -= loc.weights[l] * linalg::matexpIntegral(block, c[l].h - c[l].tau);
            }
            DenseMatrix di(ni, 3 * ni);
            di << da, dh, dr;
            placeBlock(direct, di / j, env, n, k, i, dec.offset(i), ni);
        }
        const double directResidual = relativeResidual(r, env, direct, w);
        const bool directOk = direct.maxBlockNorm <= 1.0 + tol.blockNorm && directResidual <= tol.residual;
        if (directOk || direct.maxBlockNorm + directResidual < fit.maxBlockNorm + residual) {
            fit = direct;
            residual = directResidual;
        }
        ok = directOk;
    }
    return {sigma, h, tau, fit.maxBlockNorm, residual};
}

ContainmentReport verifyContainment(const PolytopicModel& model, const model::LoopMatrices& loop,
                                    const model::NetworkConfig& net, int samples, std::uint64_t seed,
                                    const ContainmentTolerances& tol) {
    const model::TimingDistribution dist(net.region, net.distribution);
    ContainmentReport report;
    report.samples = samples;
    for (int s = 0; s < samples; ++s) {
        CounterRng rng(seed, Stream::Containment, static_cast<std::uint64_t>(s));
        const auto p = dist.sample(rng);
        for (int sigma = 0; sigma < net.nodeCount; ++sigma) {
            bool ok = false;
            const auto v = checkContainmentAt(model, loop, net, sigma, p.h, p.tau, tol, ok);
            ++report.checks;
            report.maxBlockNorm = std::max(report.maxBlockNorm, v.blockNorm);
            report.maxRelativeResidual = std::max(report.maxRelativeResidual, v.residual);
            if (!ok) {
                report.violations.push_back(v);
            }
        }
    }
    return report;
}

}  // namespace nqcs::overapprox
