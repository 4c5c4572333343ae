#include <doctest.h>

#include "benchmark.hpp"

#include "nqcs/errors.hpp"
#include "nqcs/lmi.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace nqcs;
using namespace nqcs::lmi;

namespace {

/// One node, one vertex, Ā = a, Ē = 0, B̄ = 0, no dropouts.
LmiInputs scalarInputs(double a) {
    LmiInputs in;
    in.nx = 1;
    in.nz = 1;
    in.H = DenseMatrix::Zero(1, 1);
    in.meanInjection = Vector::Ones(1);
    in.A = {{DenseMatrix::Constant(1, 1, a)}};
    in.E = {{DenseMatrix::Zero(1, 1)}};
    in.triangles = {{0, 0, 0}};
    in.probabilities = {1.0};
    in.Bbar = DenseMatrix::Zero(1, 0);
    in.Cbar = {DenseMatrix::Zero(0, 1)};
    in.Fbar = {DenseMatrix::Zero(0, 1)};
    return in;
}

struct Reduced {
    model::NetworkConfig net = bench::network(5e-3, 1e-3, 0.8);
    model::LoopMatrices loop = model::loopMatrices(bench::plant(), bench::controller());
    overapprox::PolytopicModel pm = overapprox::buildPolytopicModel(loop, net, 1, 1);
    LmiInputs in = makeInputs(pm, loop, net);
};

const Reduced& reduced() {
    static const Reduced r;
    return r;
}

Vector randomPoint(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vector x(n);
    for (int i = 0; i < n; ++i) {
        x(i) = g(rng);
    }
    return x;
}

/// Same system with every constant term removed.
sdp::AffineConstraintSystem homogeneous(const sdp::AffineConstraintSystem& sys) {
    sdp::AffineConstraintSystem out(sys.variableCount());
    for (auto c : sys.constraints()) {
        c.constant.setZero();
        out.add(std::move(c));
    }
    return out;
}

}  // namespace

TEST_CASE("scalar reduction is the nominal Lyapunov block") {
    const LmiInputs in = scalarInputs(0.5);
    FixedParameters fp;
    const auto w = std::vector<DenseMatrix>{DenseMatrix::Zero(2, 2)};
    const LmiProblem p = assembleQuadratic(in, w, fp);
    CHECK(p.layout.lyapunovCount == 1);
    CHECK(p.omegaCount == 1);
    // x̄, ε̄, z̄ and the successor row
    CHECK(p.omegaSize == 4);

    // [[−P + a₃, 0, 0, 0.5P], [0, −(γ₂ − a₅), 0, 0], [0, 0, −1, 0], [0.5P, 0, 0, −P]] at P = 1, γ₂ = 1
    const Vector x = p.layout.pack({DenseMatrix::Identity(1, 1)}, 1.0, 0.0, 1.0);
    const DenseMatrix f = p.system.constraints()[0].evaluate(x);
    DenseMatrix want = DenseMatrix::Zero(4, 4);
    want(0, 0) = -1.0 + fp.a3;
    want(1, 1) = -(1.0 - fp.a5);
    want(2, 2) = -1.0;
    want(3, 3) = -1.0;
    want(0, 3) = want(3, 0) = 0.5;
    CHECK((f - want).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(sdp::verifySolution(p.system, x, 0.4));

    auto out = sdp::solveFeasibility(p.system, {});
    REQUIRE(out.status == sdp::SolveStatus::FeasibleWithMargin);
    const auto cert = deriveCertificate(p, out.x, 1e-7);
    CHECK(cert.c1 >= 1.0);
    CHECK(cert.c2 > 0.0);
    CHECK(cert.gamma2 == doctest::Approx(cert.a4 + cert.a5));

    // |Ā| ≥ 1 leaves no certificate
    const LmiProblem bad = assembleQuadratic(scalarInputs(1.2), w, fp);
    CHECK(sdp::solveFeasibility(bad.system, {}).status == sdp::SolveStatus::NotFoundWithinBudget);
}

TEST_CASE("benchmark mean injection and fluctuation") {
    const auto& r = reduced();
    REQUIRE(r.in.meanInjection.size() == 4);
    CHECK(r.in.meanInjection(0) == doctest::Approx(0.8));
    CHECK(r.in.meanInjection(1) == doctest::Approx(0.8));
    CHECK(r.in.meanInjection(2) == doctest::Approx(1.0));
    CHECK(r.in.meanInjection(3) == doctest::Approx(1.0));
    // one stochastic group: (1 − ᾱ)ᾱ = 0.16 on y, (1 − β̄)β̄ = 0 on u
    REQUIRE(r.in.fluctuation.size() == 1);
    const Vector v = r.in.fluctuation[0].cwiseAbs2();
    CHECK(v(0) == doctest::Approx(0.16));
    CHECK(v(1) == doctest::Approx(0.16));
    CHECK(v(2) == 0.0);
    CHECK(v(3) == 0.0);
}

TEST_CASE("omega dimension follows the block layout") {
    const auto& r = reduced();
    int kept = 0;
    for (Eigen::Index c = 0; c < r.in.Bbar.cols(); ++c) {
        kept += r.in.Bbar.col(c).cwiseAbs().maxCoeff() > 0.0 ? 1 : 0;
    }
    const int g = static_cast<int>(r.in.fluctuation.size());
    FixedParameters fp;
    const auto w = todWeights(r.pm.dims, r.net);
    const LmiProblem p = assembleQuadratic(r.in, w, fp);
    CHECK(p.omegaSize == r.in.nx + 2 * r.in.nz + r.in.nx * (1 + g) + 2 * kept * (1 + g));
    for (int k = 0; k < p.omegaCount; ++k) {
        CHECK(p.system.constraints()[static_cast<size_t>(k)].size() == p.omegaSize);
    }
    fp.ideal = true;
    const LmiProblem pi = assembleQuadratic(r.in, w, fp);
    CHECK(pi.omegaSize == r.in.nx + r.in.nx * (1 + g) + 2 * kept * (1 + g));
    CHECK(pi.layout.gamma2 == -1);
    // P per node, ρ, ζ₁₂, ζ₂₁, γ₂
    CHECK(p.layout.total == 2 * r.in.nx * (r.in.nx + 1) / 2 + 1 + 2 + 1);
}

TEST_CASE("constraints are symmetric and affine") {
    const auto& r = reduced();
    FixedParameters fp;
    const LmiProblem p = assembleQuadratic(r.in, todWeights(r.pm.dims, r.net), fp);
    std::mt19937_64 rng(5);
    const int n = p.layout.total;
    const Vector x = randomPoint(n, rng);
    const Vector y = randomPoint(n, rng);
    const Vector zero = Vector::Zero(n);
    for (const auto& c : p.system.constraints()) {
        const DenseMatrix f = c.evaluateRaw(x);
        CHECK(f == f.transpose());
        const DenseMatrix lin = c.evaluateRaw(x + y) - c.evaluateRaw(x) - c.evaluateRaw(y) + c.evaluateRaw(zero);
        CHECK(lin.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff()));
        CHECK(c.evaluateRaw(zero) == c.constant);
    }
}

TEST_CASE("equal scheduling weights remove the S-procedure terms") {
    const auto& r = reduced();
    FixedParameters fp;
    const int d = r.in.nx + r.in.nz;
    std::vector<DenseMatrix> w(2, DenseMatrix::Identity(d, d));
    const LmiProblem p = assembleQuadratic(r.in, w, fp);
    std::set<int> zetas;
    for (const auto& row : p.layout.zeta) {
        for (int v : row) {
            if (v >= 0) {
                zetas.insert(v);
            }
        }
    }
    REQUIRE(zetas.size() == 2);
    for (int k = 0; k < p.omegaCount; ++k) {
        for (const auto& e : p.system.constraints()[static_cast<size_t>(k)].entries) {
            CHECK(zetas.count(e.var) == 0);
        }
    }
    // distinct TOD weights do couple ζ
    const LmiProblem t = assembleQuadratic(r.in, todWeights(r.pm.dims, r.net), fp);
    bool coupled = false;
    for (const auto& e : t.system.constraints()[0].entries) {
        coupled = coupled || zetas.count(e.var) > 0;
    }
    CHECK(coupled);
}

TEST_CASE("periodic layouts") {
    const auto& r = reduced();
    FixedParameters fp;
    LmiInputs single = r.in;
    single.A.resize(1);
    single.E.resize(1);
    single.Cbar.resize(1);
    single.Fbar.resize(1);
    const LmiProblem one = assemblePeriodic(single, {0}, fp);
    CHECK(one.layout.lyapunovCount == 1);
    for (const auto& t : one.tags) {
        CHECK(t.i == 0);
        CHECK(t.j == 0);
    }

    const LmiProblem rr = assemblePeriodic(r.in, {0, 1}, fp);
    CHECK(rr.layout.lyapunovCount == 2);
    CHECK(rr.layout.zeta.empty());
    for (const auto& t : rr.tags) {
        CHECK(t.j == (t.i + 1) % 2);
    }
    // L · M · N before removing repeated vertices
    const int full = 2 * static_cast<int>(r.in.triangles.size()) * 3;
    CHECK(rr.omegaCount <= full);
    CHECK(rr.omegaCount >= 2 * static_cast<int>(r.pm.partition.vertices.size()));

    CHECK_THROWS_AS(assemblePeriodic(r.in, {0, 2}, fp), ConfigError);
    CHECK_THROWS_AS(assemblePeriodic(r.in, {}, fp), ConfigError);
}

TEST_CASE("multiplier vectors are validated") {
    const auto& r = reduced();
    FixedParameters fp;
    const auto w = todWeights(r.pm.dims, r.net);
    fp.multipliers.rho[0] = {1.0};
    CHECK_THROWS_AS(assembleQuadratic(r.in, w, fp), ConfigError);
    const size_t m = r.in.triangles.size();
    fp.multipliers.rho[0].assign(m, 0.5 / static_cast<double>(m));
    CHECK_THROWS_AS(assembleQuadratic(r.in, w, fp), ConfigError);
    fp.multipliers.rho[0].assign(m, 1.0 / static_cast<double>(m));
    CHECK_NOTHROW(assembleQuadratic(r.in, w, fp));
}

TEST_CASE("homogeneous part scales with the variables") {
    const auto& r = reduced();
    FixedParameters fp;
    const LmiProblem p = assembleQuadratic(r.in, todWeights(r.pm.dims, r.net), fp);
    const auto h = homogeneous(p.system);
    std::mt19937_64 rng(17);
    const Vector x = randomPoint(p.layout.total, rng);
    for (double c : {0.3, 2.0, 40.0}) {
        CHECK(sdp::worstMargin(h, c * x) == doctest::Approx(c * sdp::worstMargin(h, x)).epsilon(1e-10));
    }
}

TEST_CASE("certificate constants") {
    const auto c = certificateConstants(1.0, 1.0, 0.5, 0.0, 0.1);
    CHECK(c.c1 == 1.0);
    CHECK(c.c2 == doctest::Approx(-std::log(0.7)).epsilon(1e-14));
    CHECK(c.c3 == 1.0);
    CHECK_THROWS_AS(certificateConstants(1.0, 1.0, 0.2, 0.0, 0.1), CertificateInvalid);
    CHECK_THROWS_AS(certificateConstants(1.0, 0.3, 0.5, 0.0, 0.1), CertificateInvalid);
    CHECK_THROWS_AS(certificateConstants(0.0, 1.0, 0.5, 0.0, 0.1), CertificateInvalid);
    CHECK_THROWS_AS(certificateConstants(1.0, 0.4, 0.5, 0.0, 0.1), CertificateInvalid);

    FixedParameters fp;
    CHECK(fp.a3 - 2.0 * fp.a5 == doctest::Approx(0.0098).epsilon(1e-12));
    const auto b = certificateConstants(2.0, 8.0, fp.a3, 3.0, fp.a5);
    CHECK(b.c1 == 4.0);
    CHECK(b.gamma1 == doctest::Approx(8.0 * (3.0 + 2e-4) / (2.0 * 0.0098)));
    CHECK(b.gamma2 == doctest::Approx(3.0001));
    // c₁ is scale free
    CHECK(certificateConstants(20.0, 80.0, fp.a3, 3.0, fp.a5).c1 == b.c1);
}

TEST_CASE("certificate rejects infeasible points") {
    const LmiInputs in = scalarInputs(0.5);
    FixedParameters fp;
    const LmiProblem p = assembleQuadratic(in, {DenseMatrix::Zero(2, 2)}, fp);
    const Vector bad = p.layout.pack({DenseMatrix::Identity(1, 1) * 1e-3}, 1.0, 0.0, 1.0);
    CHECK_THROWS_AS(deriveCertificate(p, bad, 1e-7), CertificateInvalid);
    const Vector good = p.layout.pack({DenseMatrix::Identity(1, 1)}, 1.0, 0.0, 1.0);
    const auto cert = deriveCertificate(p, good, 1e-7);
    CHECK(cert.a1 == 1.0);
    CHECK(cert.a2 == 1.0);
    CHECK(cert.a4 == doctest::Approx(1.0 - fp.a5));
    CHECK(cert.margin > 0.4);
}

TEST_CASE("problem dump carries the layout") {
    const LmiProblem p = assembleQuadratic(scalarInputs(0.5), {DenseMatrix::Zero(2, 2)}, FixedParameters{});
    const std::string d = dumpProblem(p);
    CHECK(d.find("# family quadratic") != std::string::npos);
    CHECK(d.find("name 1 P1(1,1)") != std::string::npos);
    CHECK(d.find("gamma2") != std::string::npos);
}
