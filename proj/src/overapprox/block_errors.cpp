#include "nqcs/errors.hpp"
#include "nqcs/overapprox.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace nqcs::overapprox {

namespace {

using Weights = std::array<double, 3>;
using Objective = std::function<double(const Weights&)>;

bool allEqual(const std::array<double, 3>& x) { return x[0] == x[1] && x[1] == x[2]; }

double goldenMax(const std::function<double(double)>& g, double lo, double hi, int iterations, double& argmax) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo;
    double b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double gc = g(c);
    double gd = g(d);
    for (int it = 0; it < iterations; ++it) {
        if (gc > gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - kInvPhi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + kInvPhi * (b - a);
            gd = g(d);
        }
    }
    if (gc > gd) {
        argmax = c;
        return gc;
    }
    argmax = d;
    return gd;
}

double maximizeOnSimplex(const Objective& f, const MaximizerOptions& opt) {
    const int r = std::max(opt.resolution, 1);
    Weights best{1.0, 0.0, 0.0};
    double fbest = -1.0;
    for (int i = 0; i <= r; ++i) {
        for (int j = 0; i + j <= r; ++j) {
            const Weights w{static_cast<double>(i) / r, static_cast<double>(j) / r,
                            static_cast<double>(r - i - j) / r};
            const double v = f(w);
            if (v > fbest) {
                fbest = v;
                best = w;
            }
        }
    }
    if (opt.refineIterations > 0) {
        const std::array<Weights, 3> dirs{Weights{1.0, -1.0, 0.0}, Weights{0.0, 1.0, -1.0}, Weights{-1.0, 0.0, 1.0}};
        const double window = 1.0 / r;
        for (const auto& d : dirs) {
            double lo = -window;
            double hi = window;
            for (int k = 0; k < 3; ++k) {
                if (d[k] > 0.0) {
                    lo = std::max(lo, -best[k] / d[k]);
                } else if (d[k] < 0.0) {
                    hi = std::min(hi, -best[k] / d[k]);
                }
            }
            if (!(hi > lo)) {
                continue;
            }
            auto along = [&](double t) {
                Weights w{best[0] + t * d[0], best[1] + t * d[1], best[2] + t * d[2]};
                for (double& x : w) {
                    x = std::max(x, 0.0);
                }
                return f(w);
            };
            double t = 0.0;
            const double v = goldenMax(along, lo, hi, opt.refineIterations, t);
            if (v > fbest) {
                fbest = v;
                for (int k = 0; k < 3; ++k) {
                    best[k] = std::max(best[k] + t * d[k], 0.0);
                }
            }
        }
    }
    return std::max(fbest, 0.0) * (1.0 + opt.safety);
}

double combine(const Weights& w, const std::array<double, 3>& x) { return w[0] * x[0] + w[1] * x[1] + w[2] * x[2]; }

double scalarIntegral(double lambda, double x) { return lambda == 0.0 ? x : std::expm1(lambda * x) / lambda; }

}  // namespace

double simplexMaxExpError(const DenseMatrix& block, const std::array<double, 3>& x, const MaximizerOptions& options) {
    if (block.rows() != block.cols()) {
        throw DimensionError("simplexMaxExpError: block must be square");
    }
    if (allEqual(x) || block.isZero(0.0)) {
        return 0.0;
    }
    if (block.rows() == 1) {
        const double lambda = block(0, 0);
        const std::array<double, 3> ex{std::exp(lambda * x[0]), std::exp(lambda * x[1]), std::exp(lambda * x[2])};
        return maximizeOnSimplex(
            [&](const Weights& w) { return std::abs(std::exp(lambda * combine(w, x)) - combine(w, ex)); }, options);
    }
    const std::array<DenseMatrix, 3> ex{linalg::matexp(block, x[0]), linalg::matexp(block, x[1]),
                                        linalg::matexp(block, x[2])};
    return maximizeOnSimplex(
        [&](const Weights& w) {
            const DenseMatrix d = linalg::matexp(block, combine(w, x)) - w[0] * ex[0] - w[1] * ex[1] - w[2] * ex[2];
            return linalg::spectralNorm(d);
        },
        options);
}

double simplexMaxIntegralError(const DenseMatrix& block, const std::array<double, 3>& x,
                               const MaximizerOptions& options) {
    if (block.rows() != block.cols()) {
        throw DimensionError("simplexMaxIntegralError: block must be square");
    }
    if (allEqual(x) || block.isZero(0.0)) {
        return 0.0;
    }
    if (block.rows() == 1) {
        const double lambda = block(0, 0);
        const std::array<double, 3> ex{scalarIntegral(lambda, x[0]), scalarIntegral(lambda, x[1]),
                                       scalarIntegral(lambda, x[2])};
        return maximizeOnSimplex(
            [&](const Weights& w) { return std::abs(scalarIntegral(lambda, combine(w, x)) - combine(w, ex)); },
            options);
    }
    const std::array<DenseMatrix, 3> ex{linalg::matexpIntegral(block, x[0]), linalg::matexpIntegral(block, x[1]),
                                        linalg::matexpIntegral(block, x[2])};
    return maximizeOnSimplex(
        [&](const Weights& w) {
            const DenseMatrix d =
                linalg::matexpIntegral(block, combine(w, x)) - w[0] * ex[0] - w[1] * ex[1] - w[2] * ex[2];
            return linalg::spectralNorm(d);
        },
        options);
}

BlockErrors worstCaseBlockErrors(const linalg::BlockDecomposition& decomposition, const TimingPartition& partition,
                                 const MaximizerOptions& options) {
    const int k = decomposition.blockCount();
    const int m = partition.triangleCount();
    BlockErrors out;
    out.perTriangleA.assign(static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(k), 0.0));
    out.perTriangleEh = out.perTriangleA;
    out.perTriangleEr = out.perTriangleA;

    using Key = std::array<double, 3>;
    auto sorted = [](Key key) {
        std::sort(key.begin(), key.end());
        return key;
    };
    for (int i = 0; i < k; ++i) {
        const DenseMatrix& block = decomposition.blocks[static_cast<size_t>(i)];
        std::map<Key, double> memoA;
        std::map<Key, double> memoE;
        auto lookup = [&](std::map<Key, double>& memo, const Key& key, bool integral) {
            const Key s = sorted(key);
            auto it = memo.find(s);
            if (it != memo.end()) {
                return it->second;
            }
            const double v = integral ? simplexMaxIntegralError(block, s, options) : simplexMaxExpError(block, s, options);
            memo.emplace(s, v);
            return v;
        };
        for (int t = 0; t < m; ++t) {
            const auto c = partition.corners(t);
            const Key h{c[0].h, c[1].h, c[2].h};
            const Key rho{c[0].h - c[0].tau, c[1].h - c[1].tau, c[2].h - c[2].tau};
            out.perTriangleA[t][i] = lookup(memoA, h, false);
            out.perTriangleEh[t][i] = lookup(memoE, h, true);
            out.perTriangleEr[t][i] = lookup(memoE, rho, true);
        }
    }
    out.deltaA.assign(static_cast<size_t>(k), 0.0);
    out.deltaEh = out.deltaA;
    out.deltaEr = out.deltaA;
    for (int t = 0; t < m; ++t) {
        for (int i = 0; i < k; ++i) {
            out.deltaA[i] = std::max(out.deltaA[i], out.perTriangleA[t][i]);
            out.deltaEh[i] = std::max(out.deltaEh[i], out.perTriangleEh[t][i]);
            out.deltaEr[i] = std::max(out.deltaEr[i], out.perTriangleEr[t][i]);
        }
    }
    return out;
}

}  // namespace nqcs::overapprox
