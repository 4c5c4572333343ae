#include "nqcs/errors.hpp"
#include "nqcs/rng.hpp"
#include "nqcs/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

namespace nqcs::sim {

namespace {

/// x ← e^{Λ̄s}x + ∫₀ˢe^{Λ̄r}dr · B ẑ.
void propagate(const model::LoopMatrices& loop, Vector& x, const Vector& held, double s) {
    if (s <= 0.0) {
        return;
    }
    const auto [e, f] = linalg::matexpWithIntegral(loop.lambdaBar, s);
    x = e * x + f * (loop.B * held);
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

SimulationRun simulateRun(const SimulationSetup& s, int horizon, std::uint64_t seed) {
    return simulateRun(s.plant, s.controller, s.net, s.quantizer, s.x0, horizon, seed);
}

SimulationRun simulateRun(const model::LinearPlantModel& plant, const model::LinearControllerModel& controller,
                          const model::NetworkConfig& net, const model::QuantizerConfig& quantizer, const Vector& x0,
                          int horizon, std::uint64_t seed) {
    if (horizon < 0) {
        throw DomainError("simulateRun: horizon must be non-negative");
    }
    const model::LoopMatrices loop = model::loopMatrices(plant, controller);
    const model::Dimensions& d = loop.dims;
    net.validate(d);
    quantizer.validate(net.nodeCount);
    if (x0.size() != d.nx()) {
        throw DimensionError("simulateRun: initial state must have n_x entries");
    }
    const model::TimingDistribution dist(net.region, net.distribution);
    const int n = d.n();
    const int ny = d.ny;
    const int nu = d.nu;
    const int nz = d.nz();

    // x = (x_p, x_c), held = (ŷ, û)
    Vector x = x0.head(n);
    Vector held(nz);
    {
        const Vector xp = x.head(d.np);
        const Vector xc = x.tail(d.nc);
        const Vector yHat = plant.C * xp + x0.segment(n, ny);
        const Vector uHat = controller.C * xc + controller.D * yHat + x0.tail(nu);
        held << yHat, uHat;
    }
    Vector mu(net.nodeCount);
    for (int j = 0; j < net.nodeCount; ++j) {
        mu(j) = quantizer.mu0[static_cast<size_t>(j)];
    }
    const DenseMatrix hOut = [&] {
        DenseMatrix m(nz, d.nx());
        m.leftCols(n) = loop.D * loop.C;
        m.rightCols(nz) = loop.D - DenseMatrix::Identity(nz, nz);
        return m;
    }();

    SimulationRun run;
    run.seed = seed;
    run.horizon = horizon;
    run.x0 = x0;
    run.trace.reserve(static_cast<size_t>(horizon) + 1);
    run.states.reserve(static_cast<size_t>(horizon) + 1);
    run.eps.reserve(static_cast<size_t>(horizon) + 1);
    double t = 0.0;
    for (long k = 0; k <= horizon; ++k) {
        const Vector xp = x.head(d.np);
        const Vector xc = x.tail(d.nc);
        const Vector yHat = held.head(ny);
        const Vector y = plant.C * xp;
        const Vector u = controller.C * xc + controller.D * yHat;
        Vector z(nz);
        z << y, u;
        Vector xbar(d.nx());
        xbar << x, held - z;

        const model::QuantizeResult q = model::quantize(quantizer, net, mu, z, ny);
        if (k == 0) {
            run.initialRangeViolation = q.anySaturated();
        }
        const int sigma = model::scheduleNode(net.protocol, net, k, xbar, q.error);

        CounterRng timingRng(seed, Stream::Timing, static_cast<std::uint64_t>(k));
        const model::TimingPoint tp = dist.sample(timingRng);
        CounterRng dropRng(seed, Stream::Dropout, static_cast<std::uint64_t>(k));
        const bool alpha = dropRng.bernoulli(net.alphaBar);
        const bool beta = dropRng.bernoulli(net.betaBar);

        StepRecord rec;
        rec.k = k;
        rec.t = t;
        rec.h = tp.h;
        rec.tau = tp.tau;
        rec.sigma = sigma;
        rec.alpha = alpha;
        rec.beta = beta;
        rec.norm2X = xbar.squaredNorm();
        rec.norm2Eps = q.error.squaredNorm();
        rec.norm2Z = (hOut * xbar).squaredNorm();
        rec.mu = mu;
        rec.saturated = q.anySaturated();
        rec.nodeError.resize(net.nodeCount);
        const Vector gap = xbar.tail(nz) - q.error;
        for (int j = 0; j < net.nodeCount; ++j) {
            double s2 = 0.0;
            for (int c : net.nodeComponents(j, ny)) {
                s2 += gap(c) * gap(c);
            }
            rec.nodeError(j) = std::sqrt(s2);
        }
        run.trace.push_back(std::move(rec));
        run.states.push_back(xbar);
        run.eps.push_back(q.error);
        if (k == horizon) {
            break;
        }

        propagate(loop, x, held, tp.tau);
        model::HeldValues hv{held.head(ny), held.tail(nu)};
        hv = model::updateReceived(hv, y, u, q.error.head(ny), q.error.tail(nu), sigma, alpha, beta, net);
        held << hv.yHat, hv.uHat;
        propagate(loop, x, held, tp.h - tp.tau);
        mu = model::updateZoom(mu, alpha, beta, quantizer);
        // keep μ representable over long horizons
        mu = mu.cwiseMax(std::numeric_limits<double>::min());
        t += tp.h;
    }
    return run;
}

double replayResidual(const SimulationRun& run, const SimulationSetup& setup) {
    const model::LoopMatrices loop = model::loopMatrices(setup.plant, setup.controller);
    const int ny = loop.dims.ny;
    const int nz = loop.dims.nz();
    double worst = 0.0;
    for (size_t k = 0; k + 1 < run.states.size(); ++k) {
        const StepRecord& r = run.trace[k];
        const model::ClosedLoopRealization real = model::buildRealization(loop, setup.net, r.sigma, r.h, r.tau);
        Vector psi(nz);
        psi << Vector::Constant(ny, r.alpha ? 1.0 : 0.0), Vector::Constant(nz - ny, r.beta ? 1.0 : 0.0);
        const Vector& xb = run.states[k];
        const Vector& eps = run.eps[k];
        const Vector w = eps - xb.tail(nz);
        const Vector pred = real.A * xb + real.B * real.meanInjection.cwiseProduct(eps) +
                            real.B * (psi - real.meanInjection).cwiseProduct(w);
        const Vector& next = run.states[k + 1];
        const double res = (pred - next).cwiseAbs().maxCoeff() / std::max(1.0, next.cwiseAbs().maxCoeff());
        worst = std::max(worst, res);
    }
    return worst;
}

int todViolations(const SimulationRun& run, const model::NetworkConfig& net) {
    if (net.protocol.kind != model::ProtocolKind::TryOnceDiscard) {
        return 0;
    }
    int bad = 0;
    for (const StepRecord& r : run.trace) {
        const double best = r.nodeError.maxCoeff();
        if (r.nodeError(r.sigma) < best) {
            ++bad;
        }
    }
    return bad;
}

std::string traceCsv(const SimulationRun& run) {
    std::ostringstream os;
    const Eigen::Index nodes = run.trace.empty() ? 0 : run.trace.front().mu.size();
    os << "k,t,h,tau,sigma,alpha,beta,norm2_x,norm2_eps,norm2_z";
    for (Eigen::Index j = 0; j < nodes; ++j) {
        os << ",mu_" << j + 1;
    }
    os << ",saturated\n";
    for (const StepRecord& r : run.trace) {
        os << r.k << ',' << g17(r.t) << ',' << g17(r.h) << ',' << g17(r.tau) << ',' << r.sigma + 1 << ','
           << (r.alpha ? 1 : 0) << ',' << (r.beta ? 1 : 0) << ',' << g17(r.norm2X) << ',' << g17(r.norm2Eps) << ','
           << g17(r.norm2Z);
        for (Eigen::Index j = 0; j < nodes; ++j) {
            os << ',' << g17(r.mu(j));
        }
        os << ',' << (r.saturated ? 1 : 0) << '\n';
    }
    return os.str();
}

namespace {

/// Per-run quantities retained for aggregation.
struct RunSummary {
    std::vector<double> x2;
    std::vector<double> z2;
    std::vector<double> e2;
    std::vector<double> eSup;
    double zSum = 0.0;
    double eSum = 0.0;
    long alpha = 0;
    long beta = 0;
    long draws = 0;
    int tod = 0;
    double replay = 0.0;
    long saturated = 0;
};

RunSummary summarize(const SimulationSetup& setup, int horizon, std::uint64_t seed, bool replay) {
    const SimulationRun run = simulateRun(setup, horizon, seed);
    RunSummary s;
    const size_t n = run.trace.size();
    s.x2.resize(n);
    s.z2.resize(n);
    s.e2.resize(n);
    s.eSup.resize(n);
    double sup = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const StepRecord& r = run.trace[k];
        s.x2[k] = r.norm2X;
        s.z2[k] = r.norm2Z;
        s.e2[k] = r.norm2Eps;
        s.eSup[k] = sup;
        sup = std::max(sup, r.norm2Eps);
        s.zSum += r.norm2Z;
        s.eSum += r.norm2Eps;
        s.saturated += r.saturated ? 1 : 0;
        if (k + 1 < n) {
            s.alpha += r.alpha ? 1 : 0;
            s.beta += r.beta ? 1 : 0;
            ++s.draws;
        }
    }
    s.tod = todViolations(run, setup.net);
    if (replay) {
        s.replay = replayResidual(run, setup);
    }
    return s;
}

}  // namespace

EnsembleStatistics runEnsemble(const SimulationSetup& setup, int runs, int horizon, std::uint64_t seedBase,
                               const EnsembleOptions& options) {
    if (runs < 1) {
        throw DomainError("runEnsemble: at least one run is required");
    }
    std::vector<std::uint64_t> seeds(static_cast<size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        seeds[static_cast<size_t>(r)] = seedBase + static_cast<std::uint64_t>(r);
    }
    return runEnsembleSeeds(setup, seeds, horizon, options);
}

EnsembleStatistics runEnsembleSeeds(const SimulationSetup& setup, const std::vector<std::uint64_t>& seeds,
                                    int horizon, const EnsembleOptions& options) {
    if (seeds.empty()) {
        throw DomainError("runEnsemble: at least one run is required");
    }
    const size_t runs = seeds.size();
    std::vector<RunSummary> out(runs);
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const size_t r = next.fetch_add(1);
            if (r >= runs || failed.load()) {
                return;
            }
            try {
                out[r] = summarize(setup, horizon, seeds[r], options.replay);
            } catch (...) {
                if (!failed.exchange(true)) {
                    failure = std::current_exception();
                }
                return;
            }
        }
    };
    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(runs)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    // aggregation in run order keeps the result independent of the worker count
    EnsembleStatistics st;
    st.runs = static_cast<int>(runs);
    st.horizon = horizon;
    st.confidenceValid = runs >= 30;
    st.x0Norm2 = setup.x0.squaredNorm();
    const size_t n = static_cast<size_t>(horizon) + 1;
    st.meanSquareState.assign(n, 0.0);
    st.stateHalfWidth.assign(n, 0.0);
    st.meanSquareOutput.assign(n, 0.0);
    st.meanSquareEps.assign(n, 0.0);
    st.epsSup.assign(n, 0.0);
    const double inv = 1.0 / static_cast<double>(runs);
    for (const RunSummary& s : out) {
        for (size_t k = 0; k < n; ++k) {
            st.meanSquareState[k] += s.x2[k] * inv;
            st.meanSquareOutput[k] += s.z2[k] * inv;
            st.meanSquareEps[k] += s.e2[k] * inv;
            st.epsSup[k] += s.eSup[k] * inv;
        }
        st.runOutputSum.push_back(s.zSum);
        st.runEpsSum.push_back(s.eSum);
        st.alphaSuccesses += s.alpha;
        st.betaSuccesses += s.beta;
        st.draws += s.draws;
        st.todViolations += s.tod;
        st.maxReplayResidual = std::max(st.maxReplayResidual, s.replay);
        st.saturatedSteps += s.saturated;
    }
    if (runs > 1) {
        // shifted two-pass variance: exactly zero for identical runs
        const RunSummary& ref = out.front();
        for (size_t k = 0; k < n; ++k) {
            double shift = 0.0;
            for (const RunSummary& s : out) {
                shift += s.x2[k] - ref.x2[k];
            }
            shift /= static_cast<double>(runs);
            double var = 0.0;
            for (const RunSummary& s : out) {
                const double dv = (s.x2[k] - ref.x2[k]) - shift;
                var += dv * dv;
            }
            st.stateHalfWidth[k] = st.z * std::sqrt(var / static_cast<double>(runs - 1) * inv);
        }
    }
    return st;
}

BoundReport checkEmsissBound(const EnsembleStatistics& stats, const lmi::LmiCertificate& cert, double x0Norm2,
                             const std::vector<double>& epsHistory) {
    const size_t n = stats.meanSquareState.size();
    if (epsHistory.size() != n) {
        throw DimensionError("checkEmsissBound: one epsilon entry per step is required");
    }
    BoundReport rep;
    rep.margin.resize(n);
    rep.worstMargin = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < n; ++k) {
        const double bound =
            cert.c1 * x0Norm2 * std::exp(-cert.c2 * static_cast<double>(k)) + cert.gamma1 * epsHistory[k];
        const double m = bound - stats.meanSquareState[k] - stats.stateHalfWidth[k];
        rep.margin[k] = m;
        rep.worstMargin = std::min(rep.worstMargin, m);
        if (m < 0.0) {
            rep.violations.push_back(static_cast<int>(k));
        }
    }
    rep.holds = rep.violations.empty();
    return rep;
}

HinfReport checkHinfSum(const EnsembleStatistics& stats, const lmi::LmiCertificate& cert, double x0Norm2,
                        double c3) {
    HinfReport rep;
    rep.c3 = c3 > 0.0 ? c3 : cert.a2;
    const size_t runs = stats.runOutputSum.size();
    if (runs == 0) {
        throw DomainError("checkHinfSum: empty ensemble");
    }
    // per-run D_r = Σ‖z̄‖² − γ₂Σ‖ε̄‖², compared with c₃‖x̄₀‖²
    double meanZ = 0.0;
    double meanE = 0.0;
    double meanD = 0.0;
    for (size_t r = 0; r < runs; ++r) {
        meanZ += stats.runOutputSum[r];
        meanE += stats.runEpsSum[r];
        meanD += stats.runOutputSum[r] - cert.gamma2 * stats.runEpsSum[r];
    }
    meanZ /= static_cast<double>(runs);
    meanE /= static_cast<double>(runs);
    meanD /= static_cast<double>(runs);
    double var = 0.0;
    for (size_t r = 0; r < runs; ++r) {
        const double dv = stats.runOutputSum[r] - cert.gamma2 * stats.runEpsSum[r] - meanD;
        var += dv * dv;
    }
    rep.halfWidth = runs > 1 ? stats.z * std::sqrt(var / static_cast<double>(runs - 1) / static_cast<double>(runs))
                             : 0.0;
    rep.lhs = meanZ;
    rep.rhs = rep.c3 * x0Norm2 + cert.gamma2 * meanE;
    rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : (rep.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);

    // geometric tail of E‖z̄_k‖² from the last two quarters
    const auto& z = stats.meanSquareOutput;
    const size_t n = z.size();
    double tail = 0.0;
    const double last = z.empty() ? 0.0 : z.back();
    if (last > 0.0) {
        double rate = 1.0;
        if (n >= 2) {
            const size_t q = std::max<size_t>(1, n / 4);
            double a = 0.0;
            double b = 0.0;
            for (size_t k = n - 2 * q; k < n - q; ++k) {
                a += z[k];
            }
            for (size_t k = n - q; k < n; ++k) {
                b += z[k];
            }
            rate = a > 0.0 ? std::pow(b / a, 1.0 / static_cast<double>(q)) : 1.0;
        }
        tail = rate < 1.0 ? last * rate / (1.0 - rate) : std::numeric_limits<double>::infinity();
    }
    const double scale = std::max(rep.rhs, rep.lhs);
    rep.tailFraction = tail == 0.0 ? 0.0 : (scale > 0.0 ? tail / scale : std::numeric_limits<double>::infinity());
    if (rep.tailFraction > 0.01) {
        throw HorizonTooShort(rep.tailFraction, "checkHinfSum: estimated output tail exceeds 1% of the bound");
    }
    rep.holds = meanD + rep.halfWidth <= rep.c3 * x0Norm2;
    return rep;
}

UltimateReport ultimateBoundCheck(const EnsembleStatistics& stats, const lmi::LmiCertificate& cert,
                                  const model::QuantizerConfig& quantizer, int windows) {
    if (windows < 2) {
        throw DomainError("ultimateBoundCheck: at least two windows are required");
    }
    UltimateReport rep;
    double scale = 0.0;
    for (size_t j = 0; j < quantizer.errorBound.size(); ++j) {
        scale = std::max(scale, std::abs(quantizer.errorBound[j] * quantizer.mu0[j]));
        rep.zoomActive = rep.zoomActive || quantizer.zoom[j] < 1.0;
    }
    rep.bound = cert.gamma1 * scale * scale;
    const auto& m = stats.meanSquareState;
    const size_t n = m.size();
    const size_t tail0 = n - std::max<size_t>(1, n / 5);
    for (size_t k = tail0; k < n; ++k) {
        rep.observedLimsup = std::max(rep.observedLimsup, m[k] + stats.stateHalfWidth[k]);
    }
    const size_t w = std::max<size_t>(1, n / static_cast<size_t>(windows));
    for (size_t s = 0; s + w <= n; s += w) {
        double acc = 0.0;
        for (size_t k = s; k < s + w; ++k) {
            acc += m[k];
        }
        rep.windowMeans.push_back(acc / static_cast<double>(w));
    }
    for (size_t i = 1; i < rep.windowMeans.size(); ++i) {
        rep.monotone = rep.monotone && rep.windowMeans[i] <= rep.windowMeans[i - 1];
    }
    rep.holds = rep.observedLimsup <= rep.bound && (!rep.zoomActive || rep.monotone);
    return rep;
}

std::string statisticsCsv(const EnsembleStatistics& stats) {
    std::ostringstream os;
    os << "k,mean_norm2_x,half_width_x,mean_norm2_z,mean_norm2_eps,sup_norm2_eps\n";
    for (size_t k = 0; k < stats.meanSquareState.size(); ++k) {
        os << k << ',' << g17(stats.meanSquareState[k]) << ',' << g17(stats.stateHalfWidth[k]) << ','
           << g17(stats.meanSquareOutput[k]) << ',' << g17(stats.meanSquareEps[k]) << ',' << g17(stats.epsSup[k])
           << '\n';
    }
    return os.str();
}

}  // namespace nqcs::sim
