#include "nqcs/errors.hpp"
#include "nqcs/overapprox.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nqcs::overapprox {

VertexMatrices vertexMatrices(const model::LoopMatrices& loop, const model::NetworkConfig& net,
                              const TimingPartition& partition) {
    VertexMatrices out;
    out.A.resize(static_cast<size_t>(net.nodeCount));
    out.E.resize(static_cast<size_t>(net.nodeCount));
    for (int sigma = 0; sigma < net.nodeCount; ++sigma) {
        for (const auto& v : partition.vertices) {
            auto r = model::buildRealization(loop, net, sigma, v.h, v.tau);
            out.A[sigma].push_back(std::move(r.A));
            out.E[sigma].push_back(std::move(r.B));
        }
    }
    return out;
}

UncertaintyEnvelope buildUncertaintyEnvelope(const linalg::BlockDecomposition& decomposition,
                                             const BlockErrors& errors, const model::LoopMatrices& loop,
                                             const model::NetworkConfig& net) {
    const auto& d = loop.dims;
    const int n = d.n();
    const int nz = d.nz();
    const int k = decomposition.blockCount();
    if (decomposition.dimension() != n || static_cast<int>(errors.deltaA.size()) != k ||
        static_cast<int>(errors.deltaEh.size()) != k || static_cast<int>(errors.deltaEr.size()) != k) {
        throw DimensionError("buildUncertaintyEnvelope: decomposition and errors do not match the loop");
    }
    const DenseMatrix& t = decomposition.transform;
    const DenseMatrix& ti = decomposition.transformInverse;

    UncertaintyEnvelope env;
    env.Btilde.resize(n + nz, 3 * n);
    const DenseMatrix ct = -loop.C * t;
    for (int g = 0; g < 3; ++g) {
        env.Btilde.block(0, g * n, n, n) = t;
        env.Btilde.block(n, g * n, nz, n) = ct;
    }
    env.U = Vector::Zero(3 * n);
    const std::array<const std::vector<double>*, 3> groups{&errors.deltaA, &errors.deltaEh, &errors.deltaEr};
    for (int g = 0; g < 3; ++g) {
        for (int i = 0; i < k; ++i) {
            const double delta = (*groups[g])[i];
            env.U.segment(g * n + decomposition.offset(i), decomposition.blockSizes[i]).setConstant(delta);
            env.deltaBlocks.push_back(decomposition.blockSizes[i]);
            env.deltaScale.push_back(delta);
        }
    }
    env.Bbar = env.Btilde * env.U.asDiagonal();

    Vector ybar(nz);
    ybar << Vector::Constant(d.ny, net.alphaBar), Vector::Constant(d.nu, net.betaBar);
    const DenseMatrix tbd = ti * loop.B * loop.D;
    for (int sigma = 0; sigma < net.nodeCount; ++sigma) {
        const Vector gamma = net.gamma(sigma, d.ny, d.nu);
        const double j = net.scaling(sigma);
        DenseMatrix c = DenseMatrix::Zero(3 * n, n + nz);
        c.block(0, 0, n, n) = ti;
        c.block(n, 0, n, n) = tbd * loop.C;
        c.block(n, n, n, nz) = tbd;
        c.block(2 * n, n, n, nz) = -ti * loop.B * ybar.cwiseProduct(gamma).asDiagonal();
        DenseMatrix f = DenseMatrix::Zero(3 * n, nz);
        f.block(2 * n, 0, n, nz) = ti * loop.B * gamma.asDiagonal();
        env.Cbar.push_back(j * c);
        env.Fbar.push_back(j * f);
    }
    return env;
}

double tightness(const PolytopicModel& model) {
    const double b = linalg::spectralNorm(model.envelope.Bbar);
    double varpi = 0.0;
    for (const auto& c : model.envelope.Cbar) {
        varpi = std::max(varpi, b * linalg::spectralNorm(c));
    }
    return varpi;
}

PolytopicModel buildPolytopicModel(const model::LoopMatrices& loop, const model::NetworkConfig& net, int na, int nb,
                                   const ProcedureOptions& options) {
    net.validate(loop.dims);
    const model::TimingDistribution dist(net.region, net.distribution);
    PolytopicModel pm;
    pm.dims = loop.dims;
    pm.partition = partitionTheta(net.region, dist, na, nb);
    const double total = pm.partition.totalProbability();
    if (total < 1.0 - options.varsigma || total > 1.0 + 1e-9) {
        throw NumericalFailure("partition probabilities sum to " + std::to_string(total) +
                               ", outside [1 - varsigma, 1]");
    }
    pm.decomposition = linalg::realBlockDecompose(loop.lambdaBar, options.tolerances);
    pm.errors = worstCaseBlockErrors(pm.decomposition, pm.partition, options.maximizer);
    pm.envelope = buildUncertaintyEnvelope(pm.decomposition, pm.errors, loop, net);
    pm.vertices = vertexMatrices(loop, net, pm.partition);
    pm.varpi = tightness(pm);
    return pm;
}

PolytopicModel runProcedure(const model::LoopMatrices& loop, const model::NetworkConfig& net,
                            const ProcedureOptions& options) {
    int na = options.na;
    int nb = options.nb;
    PolytopicModel pm;
    for (int round = 0; round <= options.refinementCap; ++round) {
        pm = buildPolytopicModel(loop, net, na, nb, options);
        if (pm.varpi <= options.varpiStar) {
            return pm;
        }
        na *= 2;
        nb *= 2;
    }
    throw TightnessNotAchieved(pm.varpi, "overapproximation tightness not achieved: varpi = " +
                                             std::to_string(pm.varpi) + " > " + std::to_string(options.varpiStar));
}

namespace {

nlohmann::json matrixJson(const DenseMatrix& m) {
    nlohmann::json data = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            data.push_back(m(r, c));
        }
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

nlohmann::json partitionJson(const TimingPartition& p) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& q : p.vertices) {
        v.push_back({q.h, q.tau});
    }
    nlohmann::json t = nlohmann::json::array();
    for (const auto& tri : p.triangles) {
        t.push_back({tri[0], tri[1], tri[2]});
    }
    return {{"na", p.na},
            {"nb", p.nb},
            {"dimension", p.dimension},
            {"vertices", v},
            {"triangles", t},
            {"probabilities", p.probabilities}};
}

}  // namespace

std::string serializePartition(const TimingPartition& partition) { return partitionJson(partition).dump(2); }

std::string serializeModel(const PolytopicModel& model) {
    nlohmann::json j;
    j["partition"] = partitionJson(model.partition);
    j["block_sizes"] = model.decomposition.blockSizes;
    j["delta_A"] = model.errors.deltaA;
    j["delta_Eh"] = model.errors.deltaEh;
    j["delta_Eh_minus_tau"] = model.errors.deltaEr;
    j["varpi"] = model.varpi;
    j["T"] = matrixJson(model.decomposition.transform);
    j["Bbar"] = matrixJson(model.envelope.Bbar);
    nlohmann::json c = nlohmann::json::array();
    nlohmann::json f = nlohmann::json::array();
    for (size_t s = 0; s < model.envelope.Cbar.size(); ++s) {
        c.push_back(matrixJson(model.envelope.Cbar[s]));
        f.push_back(matrixJson(model.envelope.Fbar[s]));
    }
    j["Cbar"] = c;
    j["Fbar"] = f;
    j["delta_blocks"] = model.envelope.deltaBlocks;
    return j.dump(2);
}

}  // namespace nqcs::overapprox
