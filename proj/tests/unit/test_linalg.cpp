#include <doctest.h>

#include "benchmark.hpp"
#include "oracles.hpp"

#include "nqcs/errors.hpp"
#include "nqcs/linalg.hpp"

#include <random>

using namespace nqcs;
using namespace nqcs::linalg;

TEST_CASE("matexp at zero time is the identity") {
    const DenseMatrix a = bench::Ap();
    CHECK(matexp(a, 0.0).isApprox(DenseMatrix::Identity(4, 4), 0.0));
}

TEST_CASE("matexp of a diagonal matrix") {
    DenseMatrix a = DenseMatrix::Zero(2, 2);
    a(0, 0) = 0.7;
    a(1, 1) = -3.2;
    const DenseMatrix e = matexp(a, 1.0);
    CHECK(e(0, 0) == doctest::Approx(std::exp(0.7)).epsilon(1e-14));
    CHECK(e(1, 1) == doctest::Approx(std::exp(-3.2)).epsilon(1e-14));
    CHECK(e(0, 1) == 0.0);
}

TEST_CASE("matexp of the benchmark plant matches the Taylor oracle") {
    const DenseMatrix a = bench::Ap();
    CHECK(oracle::relErr(matexp(a, 0.1), oracle::taylorExp(a, 0.1)) < 1e-12);
    CHECK(oracle::relErr(matexp(a, 2.0), oracle::taylorExp(a, 2.0)) < 1e-10);
}

TEST_CASE("matexp handles large norms through squaring") {
    std::mt19937_64 rng(11);
    const DenseMatrix a = oracle::randomStable(5, rng) * 4.0;
    CHECK(oracle::relErr(matexp(a, 3.0), oracle::taylorExp(a, 3.0)) < 1e-10);
}

TEST_CASE("matexp rejects bad input") {
    CHECK_THROWS_AS(matexp(DenseMatrix::Zero(2, 3), 1.0), DimensionError);
    DenseMatrix a = DenseMatrix::Zero(2, 2);
    a(0, 1) = std::nan("");
    CHECK_THROWS_AS(matexp(a, 1.0), DomainError);
}

TEST_CASE("matexpIntegral of the zero matrix is rho times identity") {
    const DenseMatrix e = matexpIntegral(DenseMatrix::Zero(3, 3), 0.37);
    CHECK(oracle::relErr(e, 0.37 * DenseMatrix::Identity(3, 3)) < 1e-15);
}

TEST_CASE("matexpIntegral at zero is the zero matrix") {
    CHECK(matexpIntegral(bench::Ap(), 0.0).isZero(0.0));
}

TEST_CASE("matexpIntegral matches the closed form for invertible A") {
    DenseMatrix a(2, 2);
    a << -1.0, 2.0, 0.5, -3.0;
    const double rho = 0.8;
    const DenseMatrix want = a.partialPivLu().solve(oracle::taylorExp(a, rho) - DenseMatrix::Identity(2, 2));
    CHECK(oracle::relErr(matexpIntegral(a, rho), want) < 1e-12);
}

TEST_CASE("matexpIntegral of the benchmark plant matches adaptive quadrature") {
    const DenseMatrix a = bench::Ap();
    CHECK(oracle::relErr(matexpIntegral(a, 0.05), oracle::quadratureExpIntegral(a, 0.05)) < 1e-10);
}

TEST_CASE("matexpIntegral rejects a negative length") {
    CHECK_THROWS_AS(matexpIntegral(bench::Ap(), -1e-3), DomainError);
}

TEST_CASE("matexp semigroup property") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix a = oracle::randomStable(4, rng);
        const double s = u(rng);
        const double t = u(rng);
        const DenseMatrix whole = matexp(a, s + t);
        CHECK((whole - matexp(a, s) * matexp(a, t)).norm() <= 1e-8 * whole.norm());
    }
}

TEST_CASE("derivative of matexpIntegral is matexp") {
    std::mt19937_64 rng(6);
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        const DenseMatrix a = oracle::randomStable(4, rng);
        const double rho = 0.3 + 0.1 * trial;
        const DenseMatrix fd = (matexpIntegral(a, rho + h) - matexpIntegral(a, rho - h)) / (2 * h);
        CHECK(oracle::relErr(fd, matexp(a, rho)) <= 1e-6);
    }
}

TEST_CASE("symmetricEigen on identity and diagonal") {
    auto id = symmetricEigen(DenseMatrix::Identity(3, 3));
    CHECK(id.eigenvalues.isApprox(Vector::Ones(3)));

    DenseMatrix d = DenseMatrix::Zero(3, 3);
    d.diagonal() << 3, 1, 2;
    auto e = symmetricEigen(d);
    CHECK(e.eigenvalues(0) == doctest::Approx(1.0));
    CHECK(e.eigenvalues(1) == doctest::Approx(2.0));
    CHECK(e.eigenvalues(2) == doctest::Approx(3.0));
}

TEST_CASE("symmetricEigen residual and trace on a random matrix") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    DenseMatrix s(6, 6);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j <= i; ++j) {
            s(i, j) = s(j, i) = g(rng);
        }
    }
    auto e = symmetricEigen(s);
    CHECK((s * e.eigenvectors - e.eigenvectors * e.eigenvalues.asDiagonal()).norm() <= 1e-9 * s.norm());
    CHECK(std::abs(e.eigenvalues.sum() - s.trace()) <= 1e-10 * std::max(1.0, std::abs(s.trace())));
    for (int i = 1; i < 6; ++i) {
        CHECK(e.eigenvalues(i - 1) <= e.eigenvalues(i));
    }
    CHECK((e.eigenvectors.transpose() * e.eigenvectors - DenseMatrix::Identity(6, 6)).norm() < 1e-12);
}

TEST_CASE("symmetricEigen rejects asymmetric input") {
    DenseMatrix s = DenseMatrix::Identity(2, 2);
    s(0, 1) = 1e-3;
    CHECK_THROWS_AS(symmetricEigen(s), DomainError);
}

TEST_CASE("realBlockDecompose of a diagonal matrix gives scalar blocks") {
    DenseMatrix d = DenseMatrix::Zero(3, 3);
    d.diagonal() << 1, 2, 3;
    auto bd = realBlockDecompose(d);
    REQUIRE(bd.blockCount() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(bd.kinds[i] == BlockKind::Scalar);
        CHECK(bd.blockSizes[i] == 1);
    }
    // T is a scaled permutation
    for (int c = 0; c < 3; ++c) {
        int nonzero = 0;
        for (int r = 0; r < 3; ++r) {
            nonzero += std::abs(bd.transform(r, c)) > 1e-12 ? 1 : 0;
        }
        CHECK(nonzero == 1);
    }
}

TEST_CASE("realBlockDecompose of a rotation gives one 2x2 block") {
    DenseMatrix r(2, 2);
    r << 0, 1, -1, 0;
    auto bd = realBlockDecompose(r);
    REQUIRE(bd.blockCount() == 1);
    CHECK(bd.kinds[0] == BlockKind::RotationScaling);
    const DenseMatrix& b = bd.blocks[0];
    CHECK(std::abs(b(0, 0)) < 1e-12);
    CHECK(std::abs(b(1, 1)) < 1e-12);
    CHECK(std::abs(std::abs(b(0, 1)) - 1.0) < 1e-12);
    CHECK(std::abs(b(0, 1) + b(1, 0)) < 1e-12);
}

TEST_CASE("realBlockDecompose keeps a Jordan block bidiagonal") {
    DenseMatrix j(3, 3);
    j << 2, 1, 0, 0, 2, 1, 0, 0, 2;
    DenseMatrix s(3, 3);
    s << 1, 2, 0, 0, 1, 1, 1, 0, 3;
    const DenseMatrix a = s * j * s.inverse();
    auto bd = realBlockDecompose(a);
    REQUIRE(bd.blockCount() == 1);
    CHECK(bd.kinds[0] == BlockKind::Defective);
    const DenseMatrix& b = bd.blocks[0];
    CHECK(b.diagonal().isApprox(2.0 * Vector::Ones(3), 1e-6));
    CHECK(std::abs(b(1, 0)) < 1e-6);
    CHECK(std::abs(b(2, 0)) < 1e-6);
    CHECK(std::abs(b(2, 1)) < 1e-6);
    CHECK(std::abs(b(0, 2)) < 1e-6);
    CHECK((bd.transform * bd.blockDiagonal() * bd.transformInverse - a).norm() <= 1e-8 * a.norm());
}

TEST_CASE("realBlockDecompose of the benchmark reconstructs within tolerance") {
    DenseMatrix lam = blockDiag({bench::Ap(), bench::Ac()});
    auto bd = realBlockDecompose(lam);
    int total = 0;
    for (int s : bd.blockSizes) {
        total += s;
    }
    CHECK(total == 6);
    CHECK((bd.transform * bd.blockDiagonal() * bd.transformInverse - lam).norm() <= 1e-8 * lam.norm());
}

TEST_CASE("block-wise exponentials reproduce the full exponential") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const DenseMatrix a = oracle::randomStable(5, rng);
        auto bd = realBlockDecompose(a);
        if (bd.condition > 1e6) {
            continue;
        }
        std::vector<DenseMatrix> eb;
        for (const auto& b : bd.blocks) {
            eb.push_back(matexp(b, 0.7));
        }
        const DenseMatrix full = bd.transform * blockDiag(eb) * bd.transformInverse;
        CHECK(oracle::relErr(full, matexp(a, 0.7)) <= 1e-7);
    }
}

TEST_CASE("realBlockDecompose flags a near-singular transform") {
    DenseMatrix a(2, 2);
    a << 1.0, 1.0, 0.0, 1.0 + 1e-5;
    Tolerances tol;
    tol.clusterTol = 1e-9;
    tol.conditionLimit = 1e3;
    CHECK_THROWS_AS(realBlockDecompose(a, tol), IllConditionedDecomposition);
}
