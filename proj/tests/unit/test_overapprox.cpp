#include <doctest.h>

#include "benchmark.hpp"
#include "oracles.hpp"

#include "nqcs/errors.hpp"
#include "nqcs/overapprox.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

using namespace nqcs;
using namespace nqcs::overapprox;
using model::TimingDistribution;
using model::TimingRegion;

namespace {

TimingRegion rectangle() {
    // τ_mad ≤ ε keeps the whole rectangle feasible
    TimingRegion r;
    r.epsilon = 0.05;
    r.hMati = 0.1;
    r.tauMin = 0.0;
    r.tauMad = 0.05;
    return r;
}

TimingDistribution uniformOn(const TimingRegion& r) { return TimingDistribution(r, {}); }

model::NetworkConfig scalarNetwork(double eps, double hMati, double tauMad) {
    model::NetworkConfig net;
    net.nodeCount = 1;
    net.yComponents = {{0}};
    net.uComponents = {{0}};
    net.region.epsilon = eps;
    net.region.hMati = hMati;
    net.region.tauMad = tauMad;
    net.alphaBar = 0.9;
    return net;
}

model::LoopMatrices scalarLoop() {
    model::LinearPlantModel p{DenseMatrix::Constant(1, 1, -1.0), DenseMatrix::Constant(1, 1, 1.0),
                              DenseMatrix::Constant(1, 1, 1.0)};
    model::LinearControllerModel c{DenseMatrix::Constant(1, 1, -2.0), DenseMatrix::Constant(1, 1, 1.0),
                                   DenseMatrix::Constant(1, 1, 1.0), DenseMatrix::Constant(1, 1, -0.5)};
    return model::loopMatrices(p, c);
}

}  // namespace

TEST_CASE("partition of an unclipped rectangle has the grid counts") {
    const auto r = rectangle();
    const auto d = uniformOn(r);
    auto p1 = partitionTheta(r, d, 1, 1);
    CHECK(p1.triangleCount() == 2);
    CHECK(p1.vertexCount() == 4);
    for (int na : {1, 2, 3}) {
        for (int nb : {1, 2, 4}) {
            auto p = partitionTheta(r, d, na, nb);
            CHECK(p.triangleCount() == 2 * na * nb);
            CHECK(p.vertexCount() == (na + 1) * (nb + 1));
            CHECK(p.totalProbability() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK(p1.probabilities[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(partitionTheta(r, d, 0, 1), DomainError);
}

TEST_CASE("benchmark partition covers the feasible set exactly") {
    auto net = bench::network();
    const TimingDistribution d(net.region, net.distribution);
    for (int n : {1, 2, 4}) {
        auto p = partitionTheta(net.region, d, n, n);
        CHECK(std::abs(p.totalProbability() - 1.0) <= 1e-12);
        CHECK(p.excessMeasure <= 1e-15);
        for (const auto& v : p.vertices) {
            CHECK(net.region.contains(v.h, v.tau, 1e-15));
        }
        double area = 0.0;
        for (int m = 0; m < p.triangleCount(); ++m) {
            const auto c = p.corners(m);
            area += std::abs(model::signedArea({c[0], c[1], c[2]}));
        }
        const double feasible = 0.099 * 0.05 - 0.049 * 0.049 / 2.0;
        CHECK(area == doctest::Approx(feasible).epsilon(1e-12));
    }
}

TEST_CASE("triangle probabilities") {
    const auto r = rectangle();
    const auto d = uniformOn(r);
    CHECK(triangleProbability({TimingPoint{0.06, 0.01}, {0.07, 0.02}, {0.08, 0.03}}, d) == 0.0);
    CHECK(triangleProbability({TimingPoint{0.05, 0.0}, {0.1, 0.0}, {0.1, 0.05}}, d) ==
          doctest::Approx(0.5).epsilon(1e-14));

    // uniform density on [1e-3, 0.1] × [1e-3, 0.05] restricted to τ ≤ h
    TimingRegion s;
    s.epsilon = 1e-3;
    s.hMati = 0.1;
    s.tauMin = 1e-3;
    s.tauMad = 0.05;
    const TimingDistribution ds(s, {});
    const double rectDensity = 1.0 / ((0.1 - 1e-3) * (0.05 - 1e-3));
    CHECK(rectDensity == doctest::Approx(206.14).epsilon(1e-4));
    const double feasible = 0.099 * 0.049 - 0.049 * 0.049 / 2.0;
    CHECK(ds.density(0.08, 0.01) == doctest::Approx(1.0 / feasible).epsilon(1e-12));
    // right triangle with legs 0.02 × 0.01 → area 1e-4
    const std::array<TimingPoint, 3> tri{TimingPoint{0.06, 0.01}, {0.08, 0.01}, {0.08, 0.02}};
    CHECK(triangleProbability(tri, ds) == doctest::Approx(1e-4 * ds.density(0.07, 0.012)).epsilon(1e-12));
}

TEST_CASE("tabulated density probabilities are exact") {
    auto r = rectangle();
    model::DistributionSpec spec;
    spec.kind = model::DistributionSpec::Kind::Tabulated;
    spec.hEdges = {0.05, 0.075, 0.1};
    spec.tauEdges = {0.0, 0.05};
    spec.density = DenseMatrix(2, 1);
    spec.density << 1.0, 3.0;
    const TimingDistribution d(r, spec);
    auto p = partitionTheta(r, d, 2, 1);
    CHECK(p.totalProbability() == doctest::Approx(1.0).epsilon(1e-12));
    // the left column carries 1/4 of the mass
    double left = 0.0;
    for (int m = 0; m < p.triangleCount(); ++m) {
        const auto c = p.corners(m);
        if (std::max({c[0].h, c[1].h, c[2].h}) <= 0.075 + 1e-15) {
            left += p.probabilities[m];
        }
    }
    CHECK(left == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("degenerate regions") {
    TimingRegion seg;
    seg.epsilon = 0.02;
    seg.hMati = 0.06;
    seg.tauMin = 0.01;
    seg.tauMad = 0.01;
    const TimingDistribution ds(seg, {});
    auto p = partitionTheta(seg, ds, 4, 1);
    CHECK(p.dimension == 1);
    CHECK(p.triangleCount() == 4);
    CHECK(p.totalProbability() == doctest::Approx(1.0).epsilon(1e-12));
    auto loc = p.locate(0.035, 0.01);
    const auto c = p.corners(loc.triangle);
    const double h = loc.weights[0] * c[0].h + loc.weights[1] * c[1].h + loc.weights[2] * c[2].h;
    CHECK(h == doctest::Approx(0.035).epsilon(1e-14));

    TimingRegion pt;
    pt.epsilon = 0.05;
    pt.hMati = 0.05;
    pt.tauMin = 0.0;
    pt.tauMad = 0.0;
    const TimingDistribution dp(pt, {});
    auto q = partitionTheta(pt, dp, 3, 3);
    CHECK(q.dimension == 0);
    CHECK(q.triangleCount() == 1);
    CHECK(q.vertexCount() == 1);
    CHECK(q.probabilities[0] == 1.0);
}

TEST_CASE("locate returns barycentric weights reproducing the point") {
    auto net = bench::network();
    const TimingDistribution d(net.region, net.distribution);
    auto p = partitionTheta(net.region, d, 3, 2);
    CounterRng rng(5, Stream::Timing, 0);
    for (int s = 0; s < 200; ++s) {
        const auto q = d.sample(rng);
        const auto loc = p.locate(q.h, q.tau);
        const auto c = p.corners(loc.triangle);
        double h = 0.0;
        double tau = 0.0;
        for (int l = 0; l < 3; ++l) {
            CHECK(loc.weights[l] >= 0.0);
            h += loc.weights[l] * c[l].h;
            tau += loc.weights[l] * c[l].tau;
        }
        CHECK(std::abs(h - q.h) <= 1e-15);
        CHECK(std::abs(tau - q.tau) <= 1e-15);
    }
}

TEST_CASE("vertex matrices delegate to the realization") {
    auto net = bench::network();
    auto loop = model::loopMatrices(bench::plant(), bench::controller());
    const TimingDistribution d(net.region, net.distribution);
    auto p = partitionTheta(net.region, d, 2, 2);
    auto vm = vertexMatrices(loop, net, p);
    REQUIRE(vm.A.size() == 2);
    REQUIRE(static_cast<int>(vm.A[0].size()) == p.vertexCount());
    int corner = -1;
    for (int n = 0; n < p.vertexCount(); ++n) {
        if (p.vertices[n].h == 0.1 && p.vertices[n].tau == 0.05) {
            corner = n;
        }
    }
    REQUIRE(corner >= 0);
    for (int sigma = 0; sigma < 2; ++sigma) {
        auto r = model::buildRealization(bench::plant(), bench::controller(), net, sigma, 0.1, 0.05);
        CHECK(vm.A[sigma][corner] == r.A);
        CHECK(vm.E[sigma][corner] == r.B);
    }
}

TEST_CASE("simplex error maxima") {
    const DenseMatrix zero = DenseMatrix::Zero(1, 1);
    CHECK(simplexMaxExpError(zero, {0.0, 0.1, 0.2}) == 0.0);
    const DenseMatrix one = DenseMatrix::Constant(1, 1, 1.0);
    CHECK(simplexMaxExpError(one, {0.1, 0.1, 0.1}) == 0.0);
    CHECK(simplexMaxIntegralError(one, {0.1, 0.1, 0.1}) == 0.0);

    // convexity puts the maximum on the chord between the extreme vertices
    const double e2 = std::exp(0.2);
    const double want = oracle::denseMax1d(
        [&](double s) { return 1.0 + (e2 - 1.0) * s / 0.2 - std::exp(s); }, 0.0, 0.2, 1e-5);
    const double got = simplexMaxExpError(one, {0.0, 0.1, 0.2});
    CHECK(got >= want);
    CHECK(got <= want * (1.0 + 1e-5));
    // E(x) = e^x − 1 for λ = 1, so the integral error has the same maximum
    CHECK(simplexMaxIntegralError(one, {0.0, 0.1, 0.2}) == doctest::Approx(got).epsilon(1e-9));
}

TEST_CASE("matrix block maxima dominate a dense barycentric oracle") {
    DenseMatrix rot(2, 2);
    rot << -1.0, 3.0, -3.0, -1.0;
    const std::array<double, 3> x{0.01, 0.07, 0.04};
    double dense = 0.0;
    double denseInt = 0.0;
    const int r = 300;
    for (int i = 0; i <= r; ++i) {
        for (int j = 0; i + j <= r; ++j) {
            const double a = double(i) / r, b = double(j) / r, c = 1.0 - a - b;
            const double s = a * x[0] + b * x[1] + c * x[2];
            DenseMatrix m = oracle::taylorExp(rot, s) - a * oracle::taylorExp(rot, x[0]) -
                            b * oracle::taylorExp(rot, x[1]) - c * oracle::taylorExp(rot, x[2]);
            dense = std::max(dense, m.jacobiSvd().singularValues()(0));
            DenseMatrix e = oracle::quadratureExpIntegral(rot, s) - a * oracle::quadratureExpIntegral(rot, x[0]) -
                            b * oracle::quadratureExpIntegral(rot, x[1]) -
                            c * oracle::quadratureExpIntegral(rot, x[2]);
            denseInt = std::max(denseInt, e.jacobiSvd().singularValues()(0));
        }
    }
    const double got = simplexMaxExpError(rot, x);
    CHECK(got >= dense * (1.0 - 1e-9));
    CHECK(got <= dense * (1.0 + 1e-3));
    const double gotInt = simplexMaxIntegralError(rot, x);
    CHECK(gotInt >= denseInt * (1.0 - 1e-9));
    CHECK(gotInt <= denseInt * (1.0 + 1e-3));
}

TEST_CASE("splitting a triangle through its centroid never increases the error") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 0.2);
    MaximizerOptions opt;
    opt.safety = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const DenseMatrix a = oracle::randomStable(2, rng, 0.5) * 5.0;
        const std::array<double, 3> x{u(rng), u(rng), u(rng)};
        const double c = (x[0] + x[1] + x[2]) / 3.0;
        const double parentA = simplexMaxExpError(a, x, opt);
        const double parentE = simplexMaxIntegralError(a, x, opt);
        for (int k = 0; k < 3; ++k) {
            const std::array<double, 3> sub{c, x[k], x[(k + 1) % 3]};
            CHECK(simplexMaxExpError(a, sub, opt) <= parentA * (1.0 + 1e-6) + 1e-15);
            CHECK(simplexMaxIntegralError(a, sub, opt) <= parentE * (1.0 + 1e-6) + 1e-15);
        }
    }
}

TEST_CASE("block errors are the per-triangle maxima") {
    auto net = bench::network();
    auto loop = model::loopMatrices(bench::plant(), bench::controller());
    auto pm = buildPolytopicModel(loop, net, 2, 2);
    const int k = pm.decomposition.blockCount();
    for (int i = 0; i < k; ++i) {
        double a = 0.0;
        for (const auto& row : pm.errors.perTriangleA) {
            CHECK(row[i] >= 0.0);
            a = std::max(a, row[i]);
        }
        CHECK(pm.errors.deltaA[i] == a);
        if (pm.decomposition.blocks[i].isZero(0.0)) {
            CHECK(pm.errors.deltaA[i] == 0.0);
        }
    }
}

TEST_CASE("envelope structure") {
    auto net = bench::network();
    auto loop = model::loopMatrices(bench::plant(), bench::controller());
    auto pm = buildPolytopicModel(loop, net, 2, 2);
    const auto& env = pm.envelope;
    const int n = loop.dims.n();
    CHECK(env.Btilde.rows() == loop.dims.nx());
    CHECK(env.Btilde.cols() == 3 * n);
    CHECK(static_cast<int>(env.deltaBlocks.size()) == 3 * pm.decomposition.blockCount());
    CHECK((env.U.array() >= 0.0).all());
    CHECK(linalg::spectralNorm(env.Bbar) <= linalg::spectralNorm(env.Btilde) * env.U.maxCoeff() * (1 + 1e-12));
    CHECK(pm.varpi == doctest::Approx(tightness(pm)));

    linalg::BlockDecomposition dec;
    dec.transform = dec.transformInverse = DenseMatrix::Identity(2, 2);
    dec.blocks = {DenseMatrix::Constant(1, 1, -1.0), DenseMatrix::Constant(1, 1, -2.0)};
    dec.kinds = {linalg::BlockKind::Scalar, linalg::BlockKind::Scalar};
    dec.blockSizes = {1, 1};
    BlockErrors zero{{0, 0}, {0, 0}, {0, 0}, {}, {}, {}};
    auto sl = scalarLoop();
    auto e0 = buildUncertaintyEnvelope(dec, zero, sl, scalarNetwork(0.01, 0.02, 0.01));
    CHECK(e0.Bbar.isZero(0.0));
    CHECK(e0.deltaBlocks.size() == 6);
}

TEST_CASE("single block loop has three uncertainty blocks") {
    model::LinearPlantModel p{DenseMatrix::Constant(1, 1, -1.0), DenseMatrix::Constant(1, 1, 1.0),
                              DenseMatrix::Constant(1, 1, 1.0)};
    model::LinearControllerModel c{DenseMatrix::Zero(0, 0), DenseMatrix::Zero(0, 1), DenseMatrix::Zero(1, 0),
                                   DenseMatrix::Constant(1, 1, -0.5)};
    auto loop = model::loopMatrices(p, c);
    auto pm = buildPolytopicModel(loop, scalarNetwork(0.01, 0.05, 0.01), 2, 2);
    CHECK(pm.decomposition.blockCount() == 1);
    CHECK(pm.envelope.deltaBlocks.size() == 3);
}

TEST_CASE("tightness behaviour") {
    auto loop = model::loopMatrices(bench::plant(), bench::controller());
    auto net = bench::network();
    double prev = 1e300;
    for (int n : {1, 2, 4, 8}) {
        const double v = buildPolytopicModel(loop, net, n, n).varpi;
        CHECK(v <= prev);
        prev = v;
    }

    auto point = bench::network();
    point.region.epsilon = 0.05;
    point.region.hMati = 0.05;
    point.region.tauMad = 0.0;
    auto pm = buildPolytopicModel(loop, point, 1, 1);
    CHECK(pm.varpi == 0.0);
    CHECK(pm.envelope.Bbar.isZero(0.0));

    ProcedureOptions opt;
    opt.varpiStar = 1e-9;
    opt.refinementCap = 1;
    try {
        runProcedure(loop, net, opt);
        FAIL("expected tightness failure");
    } catch (const TightnessNotAchieved& e) {
        CHECK(e.varpi() > 1e-9);
    }
    opt.varpiStar = 2.0;
    opt.refinementCap = 8;
    auto ok = runProcedure(loop, net, opt);
    CHECK(ok.varpi <= 2.0);
    CHECK(ok.partition.na == 2);
}

TEST_CASE("containment at vertices and on a scalar toy") {
    auto loop = scalarLoop();
    auto net = scalarNetwork(0.01, 0.05, 0.02);
    auto pm = buildPolytopicModel(loop, net, 2, 2);
    bool ok = false;
    const auto& v = pm.partition.vertices[3];
    auto at = checkContainmentAt(pm, loop, net, 0, v.h, v.tau, {}, ok);
    CHECK(ok);
    CHECK(at.blockNorm == 0.0);
    CHECK(at.residual <= 1e-15);

    for (int m = 0; m < pm.partition.triangleCount(); ++m) {
        const auto c = pm.partition.corners(m);
        const double h = 0.5 * (c[0].h + c[1].h);
        const double tau = 0.5 * (c[0].tau + c[1].tau);
        auto mid = checkContainmentAt(pm, loop, net, 0, h, tau, {}, ok);
        CHECK(ok);
        CHECK(mid.blockNorm <= 1.0 + 1e-9);
    }
    auto rep = verifyContainment(pm, loop, net, 200, 4);
    CHECK(rep.passed());
    CHECK(rep.checks == 200);
}

TEST_CASE("benchmark containment with a coarse partition") {
    auto loop = model::loopMatrices(bench::plant(), bench::controller());
    auto net = bench::network();
    auto pm = buildPolytopicModel(loop, net, 2, 2);
    auto rep = verifyContainment(pm, loop, net, 100, 1);
    CHECK(rep.passed());
    CHECK(rep.maxRelativeResidual <= 1e-8);

    // an envelope with shrunken δ must be caught
    auto broken = pm;
    broken.envelope.U *= 0.5;
    broken.envelope.Bbar *= 0.5;
    for (double& d : broken.envelope.deltaScale) {
        d *= 0.5;
    }
    auto bad = verifyContainment(broken, loop, net, 100, 1);
    CHECK_FALSE(bad.passed());
}

TEST_CASE("serialized artifacts parse back") {
    auto loop = model::loopMatrices(bench::plant(), bench::controller());
    auto pm = buildPolytopicModel(loop, bench::network(), 1, 1);
    auto j = nlohmann::json::parse(serializeModel(pm));
    CHECK(j["partition"]["triangles"].size() == static_cast<size_t>(pm.partition.triangleCount()));
    CHECK(j["varpi"].get<double>() == pm.varpi);
    CHECK(j["Bbar"]["rows"].get<int>() == 10);
    auto p = nlohmann::json::parse(serializePartition(pm.partition));
    CHECK(p["probabilities"].size() == pm.partition.probabilities.size());
}
