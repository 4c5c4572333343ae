#include "nqcs/model.hpp"

#include "nqcs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nqcs::model {

namespace {

void requireShape(const DenseMatrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(name + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!m.allFinite()) {
        throw DomainError(name + ": non-finite entries");
    }
}

void requireLength(const Vector& v, Eigen::Index n, const std::string& name) {
    if (v.size() != n) {
        throw DimensionError(name + ": expected length " + std::to_string(n) + ", got " + std::to_string(v.size()));
    }
}

void checkOwnership(const std::vector<std::vector<int>>& perNode, const std::vector<int>& direct, int count,
                    const std::string& what) {
    std::vector<int> owners(static_cast<size_t>(count), 0);
    auto mark = [&](int c) {
        if (c < 0 || c >= count) {
            throw ConfigError("node-ownership", what + " component index " + std::to_string(c) + " out of range");
        }
        owners[static_cast<size_t>(c)] += 1;
    };
    for (const auto& list : perNode) {
        for (int c : list) {
            mark(c);
        }
    }
    for (int c : direct) {
        mark(c);
    }
    for (int c = 0; c < count; ++c) {
        if (owners[static_cast<size_t>(c)] != 1) {
            throw ConfigError("node-ownership", what + " component " + std::to_string(c) +
                                                    " must belong to exactly one node or the direct list");
        }
    }
}

}  // namespace

void LinearPlantModel::validate() const {
    const auto n = A.rows();
    requireShape(A, n, n, "plant A");
    requireShape(B, n, B.cols(), "plant B");
    requireShape(C, C.rows(), n, "plant C");
    if (n == 0 || B.cols() == 0 || C.rows() == 0) {
        throw ConfigError("plant-dimensions", "plant must have states, inputs and outputs");
    }
}

void LinearControllerModel::validate(const LinearPlantModel& plant) const {
    const auto n = A.rows();
    requireShape(A, n, n, "controller A");
    requireShape(B, n, plant.outputs(), "controller B");
    requireShape(C, plant.inputs(), n, "controller C");
    requireShape(D, plant.inputs(), plant.outputs(), "controller D");
}

int Protocol::period(int nodeCount) const {
    if (kind == ProtocolKind::RoundRobin) {
        return nodeCount;
    }
    return static_cast<int>(sequence.size());
}

int Protocol::periodicNode(int phase, int nodeCount) const {
    if (kind == ProtocolKind::RoundRobin) {
        return phase % nodeCount;
    }
    return sequence.at(static_cast<size_t>(phase % static_cast<int>(sequence.size())));
}

void NetworkConfig::validate(const Dimensions& dims) const {
    if (nodeCount < 1) {
        throw ConfigError("node-count", "network needs at least one node");
    }
    if (static_cast<int>(yComponents.size()) != nodeCount || static_cast<int>(uComponents.size()) != nodeCount) {
        throw ConfigError("node-ownership", "one output list and one input list per node are required");
    }
    checkOwnership(yComponents, directY, dims.ny, "output");
    checkOwnership(uComponents, directU, dims.nu, "input");
    for (int j = 0; j < nodeCount; ++j) {
        if (yComponents[static_cast<size_t>(j)].empty() && uComponents[static_cast<size_t>(j)].empty()) {
            throw ConfigError("node-ownership", "node " + std::to_string(j + 1) + " owns no component");
        }
    }
    region.validate();
    distribution.validate();
    if (!(alphaBar > 0.0 && alphaBar <= 1.0) || !(betaBar > 0.0 && betaBar <= 1.0)) {
        throw ConfigError("dropout-rates", "success probabilities must lie in (0, 1]");
    }
    if (!nodeScaling.empty()) {
        if (static_cast<int>(nodeScaling.size()) != nodeCount) {
            throw ConfigError("node-scaling", "node scaling needs one entry per node");
        }
        for (double s : nodeScaling) {
            if (!(s >= 1.0) || !std::isfinite(s)) {
                throw ConfigError("node-scaling", "node scaling entries must be finite and >= 1");
            }
        }
    }
    switch (protocol.kind) {
        case ProtocolKind::Quadratic: {
            if (static_cast<int>(protocol.weights.size()) != nodeCount) {
                throw ConfigError("protocol-weights", "quadratic protocol needs one weight matrix per node");
            }
            const int m = dims.nx() + dims.nz();
            for (const auto& q : protocol.weights) {
                if (q.rows() != m || q.cols() != m) {
                    throw ConfigError("protocol-weights", "quadratic protocol weights must be (n_x+n_z) square");
                }
                if ((q - q.transpose()).norm() > 1e-12 * std::max(1.0, q.norm())) {
                    throw ConfigError("protocol-weights", "quadratic protocol weights must be symmetric");
                }
            }
            break;
        }
        case ProtocolKind::Periodic: {
            if (protocol.sequence.empty()) {
                throw ConfigError("periodic-sequence", "periodic protocol needs a non-empty sequence");
            }
            std::vector<bool> seen(static_cast<size_t>(nodeCount), false);
            for (int s : protocol.sequence) {
                if (s < 0 || s >= nodeCount) {
                    throw ConfigError("periodic-sequence", "periodic sequence entry out of range");
                }
                seen[static_cast<size_t>(s)] = true;
            }
            if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
                throw ConfigError("periodic-sequence", "periodic sequence must cover every node");
            }
            break;
        }
        default:
            break;
    }
}

Vector NetworkConfig::gammaY(int sigma, int ny) const {
    if (sigma < 0 || sigma >= nodeCount) {
        throw IndexError("node index " + std::to_string(sigma) + " out of range");
    }
    Vector g = Vector::Zero(ny);
    for (int c : yComponents[static_cast<size_t>(sigma)]) {
        g(c) = 1.0;
    }
    for (int c : directY) {
        g(c) = 1.0;
    }
    return g;
}

Vector NetworkConfig::gammaU(int sigma, int nu) const {
    if (sigma < 0 || sigma >= nodeCount) {
        throw IndexError("node index " + std::to_string(sigma) + " out of range");
    }
    Vector g = Vector::Zero(nu);
    for (int c : uComponents[static_cast<size_t>(sigma)]) {
        g(c) = 1.0;
    }
    for (int c : directU) {
        g(c) = 1.0;
    }
    return g;
}

Vector NetworkConfig::gamma(int sigma, int ny, int nu) const {
    Vector g(ny + nu);
    g << gammaY(sigma, ny), gammaU(sigma, nu);
    return g;
}

double NetworkConfig::scaling(int sigma) const {
    return nodeScaling.empty() ? 1.0 : nodeScaling.at(static_cast<size_t>(sigma));
}

std::vector<int> NetworkConfig::nodeComponents(int node, int ny) const {
    std::vector<int> out = yComponents.at(static_cast<size_t>(node));
    for (int c : uComponents.at(static_cast<size_t>(node))) {
        out.push_back(ny + c);
    }
    return out;
}

void QuantizerConfig::validate(int nodeCount) const {
    const auto n = static_cast<size_t>(nodeCount);
    if (range.size() != n || errorBound.size() != n || deadZone.size() != n || zoom.size() != n || mu0.size() != n) {
        throw ConfigError("quantizer-size", "quantizer needs one entry per node for every parameter");
    }
    for (size_t j = 0; j < n; ++j) {
        if (!(range[j] > errorBound[j] && errorBound[j] > 0.0)) {
            throw ConfigError("assumption-2", "quantizer needs M_j > Lambda_j > 0");
        }
        if (!(deadZone[j] > 0.0 && deadZone[j] <= errorBound[j])) {
            throw ConfigError("assumption-2", "quantizer needs 0 < Lambda_0j <= Lambda_j");
        }
        if (!(zoom[j] > 0.0 && zoom[j] <= 1.0)) {
            throw ConfigError("zoom-factor", "zoom factor must lie in (0, 1]");
        }
        if (!(mu0[j] > 0.0) || !std::isfinite(mu0[j])) {
            throw ConfigError("zoom-initial", "initial quantization parameter must be positive");
        }
    }
}

bool QuantizeResult::anySaturated() const {
    return std::find(saturated.begin(), saturated.end(), true) != saturated.end();
}

QuantizeResult quantize(const QuantizerConfig& q, const NetworkConfig& net, const Vector& mu, const Vector& z,
                        int ny) {
    requireLength(mu, net.nodeCount, "quantize mu");
    QuantizeResult out;
    out.quantized = z;
    out.error = Vector::Zero(z.size());
    out.saturated.assign(static_cast<size_t>(net.nodeCount), false);
    for (int j = 0; j < net.nodeCount; ++j) {
        const double m = mu(j);
        if (!(m > 0.0)) {
            throw DomainError("quantize: quantization parameter must be positive");
        }
        const auto comps = net.nodeComponents(j, ny);
        Vector zj(static_cast<Eigen::Index>(comps.size()));
        for (size_t c = 0; c < comps.size(); ++c) {
            zj(static_cast<Eigen::Index>(c)) = z(comps[c]);
        }
        const auto js = static_cast<size_t>(j);
        out.saturated[js] = zj.norm() > q.range[js] * m;
        const Vector v = zj / m;
        Vector qv = Vector::Zero(v.size());
        if (v.norm() > q.deadZone[js]) {
            const double step = 2.0 * q.errorBound[js] / std::sqrt(static_cast<double>(v.size()));
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                qv(i) = step * (std::floor(v(i) / step) + 0.5);
            }
        }
        for (size_t c = 0; c < comps.size(); ++c) {
            const double value = m * qv(static_cast<Eigen::Index>(c));
            out.quantized(comps[c]) = value;
            out.error(comps[c]) = value - z(comps[c]);
        }
    }
    return out;
}

HeldValues updateReceived(const HeldValues& held, const Vector& y, const Vector& u, const Vector& epsY,
                          const Vector& epsU, int sigma, bool alpha, bool beta, const NetworkConfig& net) {
    const auto ny = static_cast<int>(held.yHat.size());
    const auto nu = static_cast<int>(held.uHat.size());
    requireLength(y, ny, "updateReceived y");
    requireLength(epsY, ny, "updateReceived eps_y");
    requireLength(u, nu, "updateReceived u");
    requireLength(epsU, nu, "updateReceived eps_u");
    HeldValues out = held;
    if (alpha) {
        const Vector g = net.gammaY(sigma, ny);
        out.yHat = g.cwiseProduct(y + epsY) + (Vector::Ones(ny) - g).cwiseProduct(held.yHat);
    }
    if (beta) {
        const Vector g = net.gammaU(sigma, nu);
        out.uHat = g.cwiseProduct(u + epsU) + (Vector::Ones(nu) - g).cwiseProduct(held.uHat);
    }
    return out;
}

Vector updateZoom(const Vector& mu, bool alpha, bool beta, const QuantizerConfig& q) {
    requireLength(mu, static_cast<Eigen::Index>(q.zoom.size()), "updateZoom mu");
    if (!(alpha && beta)) {
        return mu;
    }
    Vector out = mu;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        out(j) = q.zoom[static_cast<size_t>(j)] * mu(j);
    }
    return out;
}

int scheduleNode(const Protocol& protocol, const NetworkConfig& net, long k, const Vector& xbar,
                 const Vector& epsbar) {
    const int L = net.nodeCount;
    switch (protocol.kind) {
        case ProtocolKind::RoundRobin:
            return static_cast<int>(k % L);
        case ProtocolKind::Periodic:
            return protocol.sequence[static_cast<size_t>(k % static_cast<long>(protocol.sequence.size()))];
        case ProtocolKind::TryOnceDiscard: {
            const auto nz = static_cast<int>(epsbar.size());
            int nu = static_cast<int>(net.directU.size());
            for (const auto& list : net.uComponents) {
                nu += static_cast<int>(list.size());
            }
            const int ny = nz - nu;
            const Vector d = xbar.tail(nz) - epsbar;
            int best = 0;
            double bestValue = -1.0;
            for (int j = 0; j < L; ++j) {
                double s = 0.0;
                for (int c : net.nodeComponents(j, ny)) {
                    s += d(c) * d(c);
                }
                if (s > bestValue) {
                    bestValue = s;
                    best = j;
                }
            }
            return best;
        }
        case ProtocolKind::Quadratic: {
            Vector v(xbar.size() + epsbar.size());
            v << xbar, epsbar;
            int best = 0;
            double bestValue = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < L; ++j) {
                const double s = v.dot(protocol.weights[static_cast<size_t>(j)] * v);
                if (s > bestValue) {
                    bestValue = s;
                    best = j;
                }
            }
            return best;
        }
    }
    return 0;
}

LoopMatrices loopMatrices(const LinearPlantModel& plant, const LinearControllerModel& controller) {
    plant.validate();
    controller.validate(plant);
    LoopMatrices lm;
    auto& d = lm.dims;
    d.np = plant.states();
    d.nc = controller.states();
    d.ny = plant.outputs();
    d.nu = plant.inputs();
    lm.lambdaBar = linalg::blockDiag({plant.A, controller.A});
    lm.B = DenseMatrix::Zero(d.n(), d.nz());
    lm.B.block(0, d.ny, d.np, d.nu) = plant.B;
    lm.B.block(d.np, 0, d.nc, d.ny) = controller.B;
    lm.C = DenseMatrix::Zero(d.nz(), d.n());
    lm.C.block(0, 0, d.ny, d.np) = plant.C;
    lm.C.block(d.ny, d.np, d.nu, d.nc) = controller.C;
    lm.D = DenseMatrix::Identity(d.nz(), d.nz());
    lm.D.block(d.ny, 0, d.nu, d.ny) = controller.D;
    // D is unit lower block-triangular: forward substitution gives D⁻¹ = [[I, 0], [-D_c, I]].
    lm.Dinv = DenseMatrix::Identity(d.nz(), d.nz());
    lm.Dinv.block(d.ny, 0, d.nu, d.ny) = -controller.D;
    return lm;
}

Vector ClosedLoopRealization::upsilonBold() const {
    Vector v(2 * fluctuationVariance.size());
    v << fluctuationVariance, fluctuationVariance;
    return v;
}

ClosedLoopRealization buildRealization(const LoopMatrices& loop, const NetworkConfig& net, int sigma, double h,
                                       double tau) {
    if (!std::isfinite(h) || !std::isfinite(tau) || h < 0.0 || tau < 0.0) {
        throw DomainError("buildRealization: need finite h >= 0 and tau >= 0");
    }
    if (tau > h) {
        throw DomainError("buildRealization: delay exceeds the transmission interval");
    }
    if (sigma < 0 || sigma >= net.nodeCount) {
        throw IndexError("buildRealization: node index " + std::to_string(sigma) + " out of range");
    }
    const Dimensions& d = loop.dims;
    const int n = d.n();
    const int nz = d.nz();

    const auto [ah, eh] = linalg::matexpWithIntegral(loop.lambdaBar, h);
    const DenseMatrix er = linalg::matexpIntegral(loop.lambdaBar, h - tau);

    const Vector g = net.gamma(sigma, d.ny, d.nu);
    Vector ybar(nz);
    ybar << Vector::Constant(d.ny, net.alphaBar), Vector::Constant(d.nu, net.betaBar);
    const DenseMatrix bg = loop.B * g.asDiagonal();
    const DenseMatrix byg = loop.B * ybar.cwiseProduct(g).asDiagonal();
    const DenseMatrix ehbd = eh * loop.B * loop.D;

    ClosedLoopRealization r;
    r.dims = d;
    r.A.resize(d.nx(), d.nx());
    const DenseMatrix a11 = ah + ehbd * loop.C;
    const DenseMatrix a12 = ehbd - er * byg;
    r.A.topLeftCorner(n, n) = a11;
    r.A.topRightCorner(n, nz) = a12;
    r.A.bottomLeftCorner(nz, n) = loop.C * (DenseMatrix::Identity(n, n) - a11);
    r.A.bottomRightCorner(nz, nz) =
        DenseMatrix::Identity(nz, nz) - loop.Dinv * ybar.cwiseProduct(g).asDiagonal() - loop.C * a12;

    r.B.resize(d.nx(), nz);
    const DenseMatrix top = er * bg;
    r.B.topRows(n) = top;
    r.B.bottomRows(nz) = loop.Dinv * g.asDiagonal() - loop.C * top;

    r.H.resize(nz, d.nx());
    r.H.leftCols(n) = loop.D * loop.C;
    r.H.rightCols(nz) = loop.D - DenseMatrix::Identity(nz, nz);

    r.meanInjection = ybar;
    r.fluctuationVariance.resize(nz);
    r.fluctuationVariance << Vector::Constant(d.ny, net.alphaBar * (1.0 - net.alphaBar)),
        Vector::Constant(d.nu, net.betaBar * (1.0 - net.betaBar));
    return r;
}

ClosedLoopRealization buildRealization(const LinearPlantModel& plant, const LinearControllerModel& controller,
                                       const NetworkConfig& net, int sigma, double h, double tau) {
    return buildRealization(loopMatrices(plant, controller), net, sigma, h, tau);
}

}  // namespace nqcs::model
