#include "nqcs/errors.hpp"
#include "nqcs/lmi.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace nqcs::lmi {

int VariableLayout::pIndex(int k, int r, int c) const {
    if (k < 0 || k >= lyapunovCount || r < 0 || c < 0 || r >= nx || c >= nx) {
        throw IndexError("VariableLayout::pIndex: index out of range");
    }
    if (r > c) {
        std::swap(r, c);
    }
    return lyapunovOffset[static_cast<size_t>(k)] + r * nx - r * (r - 1) / 2 + (c - r);
}

DenseMatrix VariableLayout::lyapunov(const Vector& x, int k) const {
    DenseMatrix p(nx, nx);
    for (int r = 0; r < nx; ++r) {
        for (int c = r; c < nx; ++c) {
            p(r, c) = p(c, r) = x(pIndex(k, r, c));
        }
    }
    return p;
}

Vector VariableLayout::pack(const std::vector<DenseMatrix>& p, double rhoValue, double zetaValue,
                            double gamma2Value) const {
    if (static_cast<int>(p.size()) != lyapunovCount) {
        throw DimensionError("VariableLayout::pack: wrong number of Lyapunov matrices");
    }
    Vector x = Vector::Zero(total);
    for (int k = 0; k < lyapunovCount; ++k) {
        for (int r = 0; r < nx; ++r) {
            for (int c = r; c < nx; ++c) {
                x(pIndex(k, r, c)) = 0.5 * (p[static_cast<size_t>(k)](r, c) + p[static_cast<size_t>(k)](c, r));
            }
        }
    }
    x(rho) = rhoValue;
    for (const auto& row : zeta) {
        for (int v : row) {
            if (v >= 0) {
                x(v) = zetaValue;
            }
        }
    }
    if (gamma2 >= 0) {
        x(gamma2) = gamma2Value;
    }
    return x;
}

LmiInputs makeInputs(const overapprox::PolytopicModel& model, const model::LoopMatrices& loop,
                     const model::NetworkConfig& net) {
    LmiInputs in;
    const auto& dims = model.dims;
    in.nx = dims.nx();
    in.nz = dims.nz();
    const auto probe = model::buildRealization(loop, net, 0, net.region.hMati, 0.0);
    in.H = probe.H;
    in.meanInjection = probe.meanInjection;
    const double va = net.alphaBar * (1.0 - net.alphaBar);
    const double vb = net.betaBar * (1.0 - net.betaBar);
    if (dims.ny > 0 && va > 0.0) {
        Vector s = Vector::Zero(in.nz);
        s.head(dims.ny).setConstant(std::sqrt(va));
        in.fluctuation.push_back(s);
    }
    if (dims.nu > 0 && vb > 0.0) {
        Vector s = Vector::Zero(in.nz);
        s.tail(dims.nu).setConstant(std::sqrt(vb));
        in.fluctuation.push_back(s);
    }
    in.A = model.vertices.A;
    in.E = model.vertices.E;
    in.triangles = model.partition.triangles;
    in.probabilities = model.partition.probabilities;
    in.Bbar = model.envelope.Bbar;
    in.Cbar = model.envelope.Cbar;
    in.Fbar = model.envelope.Fbar;
    return in;
}

std::vector<DenseMatrix> todWeights(const model::Dimensions& dims, const model::NetworkConfig& net) {
    const int nx = dims.nx();
    const int nz = dims.nz();
    const int n = dims.n();
    DenseMatrix m = DenseMatrix::Zero(nz, nx + nz);
    m.block(0, n, nz, nz) = DenseMatrix::Identity(nz, nz);
    m.block(0, nx, nz, nz) = -DenseMatrix::Identity(nz, nz);
    std::vector<DenseMatrix> out;
    for (int j = 0; j < net.nodeCount; ++j) {
        DenseMatrix s = DenseMatrix::Zero(nz, nz);
        for (int c : net.nodeComponents(j, dims.ny)) {
            s(c, c) = 1.0;
        }
        out.push_back(m.transpose() * s * m);
    }
    return out;
}

namespace {

/// Row/column offsets of one Ω block.
struct OmegaLayout {
    bool ideal = false;
    int nx = 0;
    int nz = 0;
    int groups = 0;
    int kept = 0;
    int ox = 0;
    int oe = -1;
    int oz = -1;
    int r0 = 0;
    std::vector<int> rg;
    std::vector<int> ol;  // per copy
    std::vector<int> oq;  // per copy
    int size = 0;
};

OmegaLayout makeOmegaLayout(const LmiInputs& in, bool ideal, int kept) {
    OmegaLayout o;
    o.ideal = ideal;
    o.nx = in.nx;
    o.nz = in.nz;
    o.groups = static_cast<int>(in.fluctuation.size());
    o.kept = kept;
    int at = in.nx;
    if (!ideal) {
        o.oe = at;
        at += in.nz;
        o.oz = at;
        at += in.nz;
    }
    o.r0 = at;
    at += in.nx;
    for (int g = 0; g < o.groups; ++g) {
        o.rg.push_back(at);
        at += in.nx;
    }
    if (kept > 0) {
        for (int c = 0; c <= o.groups; ++c) {
            o.ol.push_back(at);
            at += kept;
            o.oq.push_back(at);
            at += kept;
        }
    }
    o.size = at;
    return o;
}

/// Adds P_k X at (r0, c0) (off-diagonal), one coefficient matrix per entry of P_k.
void addLyapunovTimes(sdp::ConstraintBuilder& b, const VariableLayout& lay, int k, int r0, int c0,
                      const DenseMatrix& x) {
    const int n = lay.nx;
    for (int a = 0; a < n; ++a) {
        for (int bb = a; bb < n; ++bb) {
            const int var = lay.pIndex(k, a, bb);
            for (Eigen::Index col = 0; col < x.cols(); ++col) {
                b.add(var, r0 + a, c0 + static_cast<int>(col), x(bb, col));
                if (a != bb) {
                    b.add(var, r0 + bb, c0 + static_cast<int>(col), x(a, col));
                }
            }
        }
    }
}

/// Adds s·P_k on the diagonal block at r0.
void addLyapunovDiagonal(sdp::ConstraintBuilder& b, const VariableLayout& lay, int k, int r0, double s) {
    for (int a = 0; a < lay.nx; ++a) {
        for (int bb = a; bb < lay.nx; ++bb) {
            b.add(lay.pIndex(k, a, bb), r0 + a, r0 + bb, s);
        }
    }
}

struct Coefficients {
    std::array<double, 6> c{1, 1, 1, 1, 1, 1};
};

/// c_k = ϱ_k / p̄ per triangle; triangles with p̄ = 0 are marked by an empty optional (negative c₁).
std::vector<Coefficients> multiplierCoefficients(const LmiInputs& in, const Multipliers& mult) {
    const size_t m = in.probabilities.size();
    const double total = std::accumulate(in.probabilities.begin(), in.probabilities.end(), 0.0);
    if (!(total > 0.0)) {
        throw NumericalFailure("LMI assembly: partition carries no probability");
    }
    std::vector<Coefficients> out(m);
    for (int k = 0; k < 6; ++k) {
        const auto& rho = mult.rho[static_cast<size_t>(k)];
        if (!rho.empty()) {
            if (rho.size() != m) {
                throw ConfigError("multiplier-simplex", "multiplier vector length must equal the triangle count");
            }
            double s = 0.0;
            for (size_t t = 0; t < m; ++t) {
                if (rho[t] < 0.0) {
                    throw ConfigError("multiplier-simplex", "multipliers must be non-negative");
                }
                if (rho[t] > 0.0 && in.probabilities[t] <= 0.0) {
                    throw ConfigError("multiplier-simplex", "multiplier mass on a zero-probability triangle");
                }
                s += rho[t];
            }
            if (std::abs(s - 1.0) > 1e-9) {
                throw ConfigError("multiplier-simplex", "multipliers must sum to one");
            }
        }
        for (size_t t = 0; t < m; ++t) {
            const double p = in.probabilities[t];
            if (p <= 0.0) {
                out[t].c[static_cast<size_t>(k)] = -1.0;
                continue;
            }
            const double r = rho.empty() ? p / total : rho[t];
            out[t].c[static_cast<size_t>(k)] = r / p;
        }
    }
    return out;
}

std::vector<int> keptColumns(const DenseMatrix& bbar) {
    std::vector<int> keep;
    for (Eigen::Index c = 0; c < bbar.cols(); ++c) {
        if (bbar.col(c).cwiseAbs().maxCoeff() > 0.0) {
            keep.push_back(static_cast<int>(c));
        }
    }
    return keep;
}

DenseMatrix selectColumns(const DenseMatrix& m, const std::vector<int>& cols) {
    DenseMatrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
    }
    return out;
}

DenseMatrix selectRows(const DenseMatrix& m, const std::vector<int>& rows) {
    DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (size_t k = 0; k < rows.size(); ++k) {
        out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    }
    return out;
}

void validateInputs(const LmiInputs& in) {
    if (in.nx <= 0 || in.nz < 0) {
        throw DimensionError("LMI assembly: invalid dimensions");
    }
    if (in.A.empty() || in.A.size() != in.E.size() || in.Cbar.size() != in.A.size() ||
        in.Fbar.size() != in.A.size()) {
        throw DimensionError("LMI assembly: per-node data is inconsistent");
    }
    if (in.triangles.size() != in.probabilities.size()) {
        throw DimensionError("LMI assembly: triangles and probabilities differ in length");
    }
    if (in.H.rows() != in.nz || in.H.cols() != in.nx || in.meanInjection.size() != in.nz) {
        throw DimensionError("LMI assembly: output map or mean injection has the wrong shape");
    }
    if (in.Bbar.rows() != in.nx) {
        throw DimensionError("LMI assembly: B-bar has the wrong row count");
    }
}

struct Assembler {
    const LmiInputs& in;
    const FixedParameters& fixed;
    VariableLayout lay;
    OmegaLayout om;
    std::vector<int> keep;
    DenseMatrix bbarK;
    std::vector<DenseMatrix> cbarK;
    std::vector<DenseMatrix> fbarK;

    Assembler(const LmiInputs& inputs, const FixedParameters& f) : in(inputs), fixed(f) {
        validateInputs(in);
        if (!(fixed.a3 > 0.0) || fixed.a5 < 0.0) {
            throw ConfigError("lmi-constants", "a3 must be positive and a5 non-negative");
        }
        keep = keptColumns(in.Bbar);
        bbarK = selectColumns(in.Bbar, keep);
        for (size_t s = 0; s < in.Cbar.size(); ++s) {
            cbarK.push_back(selectRows(in.Cbar[s], keep));
            fbarK.push_back(selectRows(in.Fbar[s], keep));
        }
        om = makeOmegaLayout(in, fixed.ideal, static_cast<int>(keep.size()));
    }

    void buildLayout(int lyapunovCount, bool withZeta, int zetaNodes) {
        lay.nx = in.nx;
        lay.lyapunovCount = lyapunovCount;
        int at = 0;
        for (int k = 0; k < lyapunovCount; ++k) {
            lay.lyapunovOffset.push_back(at);
            at += lay.symmetricCount();
        }
        lay.rho = at++;
        lay.zeta.assign(static_cast<size_t>(zetaNodes), std::vector<int>(static_cast<size_t>(zetaNodes), -1));
        if (withZeta) {
            for (int i = 0; i < zetaNodes; ++i) {
                for (int l = 0; l < zetaNodes; ++l) {
                    if (l != i) {
                        lay.zeta[static_cast<size_t>(i)][static_cast<size_t>(l)] = at++;
                    }
                }
            }
        }
        if (!fixed.ideal) {
            lay.gamma2 = at++;
        }
        lay.total = at;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out(static_cast<size_t>(lay.total));
        for (int k = 0; k < lay.lyapunovCount; ++k) {
            for (int r = 0; r < lay.nx; ++r) {
                for (int c = r; c < lay.nx; ++c) {
                    std::ostringstream os;
                    os << "P" << k + 1 << "(" << r + 1 << "," << c + 1 << ")";
                    out[static_cast<size_t>(lay.pIndex(k, r, c))] = os.str();
                }
            }
        }
        out[static_cast<size_t>(lay.rho)] = "rho";
        for (size_t i = 0; i < lay.zeta.size(); ++i) {
            for (size_t l = 0; l < lay.zeta[i].size(); ++l) {
                if (lay.zeta[i][l] >= 0) {
                    out[static_cast<size_t>(lay.zeta[i][l])] =
                        "zeta(" + std::to_string(i + 1) + "," + std::to_string(l + 1) + ")";
                }
            }
        }
        if (lay.gamma2 >= 0) {
            out[static_cast<size_t>(lay.gamma2)] = "gamma2";
        }
        return out;
    }

    /// Ω for node σ at one vertex with current index pi, successor index pj and coefficients c.
    sdp::AffineConstraint omega(int sigma, int vertex, int pi, int pj, const Coefficients& co,
                                const std::vector<DenseMatrix>* weights, int region, const std::string& label) const {
        const auto& c = co.c;
        sdp::ConstraintBuilder b(om.size, label);
        const int nx = in.nx;
        const int nz = in.nz;
        const DenseMatrix& av = in.A[static_cast<size_t>(sigma)][static_cast<size_t>(vertex)];
        const DenseMatrix& ev = in.E[static_cast<size_t>(sigma)][static_cast<size_t>(vertex)];
        const DenseMatrix upsilon = in.meanInjection.asDiagonal();

        // x̄ block: −c₁P_i + c₃a₃I
        addLyapunovDiagonal(b, lay, pi, om.ox, -c[0]);
        for (int r = 0; r < nx; ++r) {
            b.add(-1, om.ox + r, om.ox + r, c[2] * fixed.a3);
        }
        if (!om.ideal) {
            // ε̄ block: −c₄(γ₂ − a₅)I
            for (int r = 0; r < nz; ++r) {
                b.add(lay.gamma2, om.oe + r, om.oe + r, -c[3]);
                b.add(-1, om.oe + r, om.oe + r, c[3] * fixed.a5);
            }
            // z̄ block
            for (int r = 0; r < nz; ++r) {
                b.add(-1, om.oz + r, om.oz + r, -1.0);
            }
            b.addBlock(-1, om.oz, om.ox, std::sqrt(c[1]) * in.H);
        }
        // S-procedure over the scheduling region
        if (weights != nullptr) {
            const auto& q = *weights;
            for (size_t l = 0; l < q.size(); ++l) {
                const int var = lay.zeta[static_cast<size_t>(region)][l];
                if (var < 0) {
                    continue;
                }
                const DenseMatrix d = c[5] * (q[static_cast<size_t>(region)] - q[l]);
                b.addBlock(var, om.ox, om.ox, 0.5 * (d.topLeftCorner(nx, nx) + d.topLeftCorner(nx, nx).transpose()));
                if (!om.ideal) {
                    b.addBlock(var, om.oe, om.oe,
                               0.5 * (d.bottomRightCorner(nz, nz) + d.bottomRightCorner(nz, nz).transpose()));
                    b.addBlock(var, om.oe, om.ox, 0.5 * (d.bottomLeftCorner(nz, nx) + d.topRightCorner(nx, nz).transpose()));
                }
            }
        }
        // successor rows
        addLyapunovDiagonal(b, lay, pj, om.r0, -1.0);
        addLyapunovTimes(b, lay, pj, om.r0, om.ox, av);
        if (!om.ideal) {
            addLyapunovTimes(b, lay, pj, om.r0, om.oe, ev * upsilon);
        }
        for (int g = 0; g < om.groups; ++g) {
            const int rg = om.rg[static_cast<size_t>(g)];
            addLyapunovDiagonal(b, lay, pj, rg, -1.0);
            // fluctuation acts on w̄ = ε̄ − ē with ē the tail of x̄
            const DenseMatrix es = ev * in.fluctuation[static_cast<size_t>(g)].asDiagonal();
            if (!om.ideal) {
                addLyapunovTimes(b, lay, pj, rg, om.oe, es);
            }
            addLyapunovTimes(b, lay, pj, rg, om.ox + nx - nz, -es);
        }
        // uncertainty: [[M, L, ρRᵀ], [Lᵀ, −ρI, 0], [ρR, 0, −ρI]] per copy
        if (om.kept > 0) {
            const DenseMatrix& cb = cbarK[static_cast<size_t>(sigma)];
            const DenseMatrix& fb = fbarK[static_cast<size_t>(sigma)];
            for (int cp = 0; cp <= om.groups; ++cp) {
                const int ol = om.ol[static_cast<size_t>(cp)];
                const int oq = om.oq[static_cast<size_t>(cp)];
                const int row = cp == 0 ? om.r0 : om.rg[static_cast<size_t>(cp - 1)];
                addLyapunovTimes(b, lay, pj, row, ol, bbarK);
                for (int r = 0; r < om.kept; ++r) {
                    b.add(lay.rho, ol + r, ol + r, -1.0);
                    b.add(lay.rho, oq + r, oq + r, -1.0);
                }
                if (cp == 0) {
                    b.addBlock(lay.rho, oq, om.ox, cb);
                    if (!om.ideal) {
                        b.addBlock(lay.rho, oq, om.oe, fb * upsilon);
                    }
                } else {
                    const DenseMatrix fs = fb * in.fluctuation[static_cast<size_t>(cp - 1)].asDiagonal();
                    if (!om.ideal) {
                        b.addBlock(lay.rho, oq, om.oe, fs);
                    }
                    b.addBlock(lay.rho, oq, om.ox + nx - nz, -fs);
                }
            }
        }
        return b.build();
    }

    void addSignConstraints(LmiProblem& p) const {
        for (int k = 0; k < lay.lyapunovCount; ++k) {
            sdp::ConstraintBuilder b(in.nx, "P" + std::to_string(k + 1) + " positive",
                                     sdp::Sense::PositiveSemidefinite);
            addLyapunovDiagonal(b, lay, k, 0, 1.0);
            p.system.add(b.build());
        }
        {
            sdp::ConstraintBuilder b(1, "rho positive", sdp::Sense::PositiveSemidefinite);
            b.add(lay.rho, 0, 0, 1.0);
            p.system.add(b.build());
        }
        for (const auto& row : lay.zeta) {
            for (int v : row) {
                if (v >= 0) {
                    sdp::ConstraintBuilder b(1, "zeta nonnegative", sdp::Sense::PositiveSemidefinite);
                    b.add(v, 0, 0, 1.0);
                    p.system.add(b.build());
                }
            }
        }
        if (lay.gamma2 >= 0) {
            sdp::ConstraintBuilder b(1, "a4 positive", sdp::Sense::PositiveSemidefinite);
            b.add(lay.gamma2, 0, 0, 1.0);
            b.add(-1, 0, 0, -fixed.a5);
            p.system.add(b.build());
        }
    }
};

using DedupKey = std::tuple<int, int, int, int, std::array<double, 6>>;

}  // namespace

LmiProblem assembleQuadratic(const LmiInputs& in, const std::vector<DenseMatrix>& weights,
                             const FixedParameters& fixed) {
    Assembler as(in, fixed);
    const int l = in.nodeCount();
    if (static_cast<int>(weights.size()) != l) {
        throw ConfigError("protocol-weights", "one scheduling weight per node is required");
    }
    for (const auto& q : weights) {
        if (q.rows() != in.nx + in.nz || q.cols() != in.nx + in.nz) {
            throw DimensionError("assembleQuadratic: weight must be (nx + nz) square");
        }
    }
    const int lyap = fixed.commonLyapunov ? 1 : l;
    as.buildLayout(lyap, l > 1, l);
    const auto coeff = multiplierCoefficients(in, fixed.multipliers);

    LmiProblem p;
    p.family = ProtocolFamily::Quadratic;
    p.fixed = fixed;
    p.layout = as.lay;
    p.system = sdp::AffineConstraintSystem(as.lay.total);
    p.system.variableNames() = as.names();
    p.omegaSize = as.om.size;
    for (int i = 0; i < l; ++i) {
        p.nodeOfIndex.push_back(i);
    }
    std::map<DedupKey, int> seen;
    for (int i = 0; i < l; ++i) {
        const int pi = fixed.commonLyapunov ? 0 : i;
        for (int j = 0; j < lyap; ++j) {
            for (size_t m = 0; m < in.triangles.size(); ++m) {
                if (coeff[m].c[0] < 0.0) {
                    continue;
                }
                for (int v : in.triangles[m]) {
                    const DedupKey key{i, j, v, 0, coeff[m].c};
                    if (!seen.emplace(key, 1).second) {
                        continue;
                    }
                    std::ostringstream label;
                    label << "Omega i=" << i + 1 << " j=" << j + 1 << " m=" << m + 1 << " n=" << v + 1;
                    p.system.add(as.omega(i, v, pi, j, coeff[m], &weights, i, label.str()));
                    p.tags.push_back({i, j, static_cast<int>(m), v});
                }
            }
        }
    }
    p.omegaCount = static_cast<int>(p.tags.size());
    as.addSignConstraints(p);
    return p;
}

LmiProblem assemblePeriodic(const LmiInputs& in, const std::vector<int>& sequence, const FixedParameters& fixed) {
    Assembler as(in, fixed);
    const int l = in.nodeCount();
    if (sequence.empty()) {
        throw ConfigError("periodic-sequence", "periodic schedule must not be empty");
    }
    for (int s : sequence) {
        if (s < 0 || s >= l) {
            throw ConfigError("periodic-sequence", "periodic schedule names an unknown node");
        }
    }
    const int period = static_cast<int>(sequence.size());
    const int lyap = fixed.commonLyapunov ? 1 : period;
    as.buildLayout(lyap, false, 0);
    const auto coeff = multiplierCoefficients(in, fixed.multipliers);

    LmiProblem p;
    p.family = ProtocolFamily::Periodic;
    p.fixed = fixed;
    p.layout = as.lay;
    p.system = sdp::AffineConstraintSystem(as.lay.total);
    p.system.variableNames() = as.names();
    p.omegaSize = as.om.size;
    p.nodeOfIndex = sequence;
    std::map<DedupKey, int> seen;
    for (int ph = 0; ph < period; ++ph) {
        const int pi = fixed.commonLyapunov ? 0 : ph;
        const int pj = fixed.commonLyapunov ? 0 : (ph + 1) % period;
        const int sigma = sequence[static_cast<size_t>(ph)];
        for (size_t m = 0; m < in.triangles.size(); ++m) {
            if (coeff[m].c[0] < 0.0) {
                continue;
            }
            for (int v : in.triangles[m]) {
                const DedupKey key{sigma, pi, pj, v, coeff[m].c};
                if (!seen.emplace(key, 1).second) {
                    continue;
                }
                std::ostringstream label;
                label << "Omega phase=" << ph + 1 << " m=" << m + 1 << " n=" << v + 1;
                p.system.add(as.omega(sigma, v, pi, pj, coeff[m], nullptr, 0, label.str()));
                p.tags.push_back({pi, pj, static_cast<int>(m), v});
            }
        }
    }
    p.omegaCount = static_cast<int>(p.tags.size());
    as.addSignConstraints(p);
    return p;
}

Vector initialGuess(const LmiProblem& problem, double gamma2) {
    const auto& lay = problem.layout;
    std::vector<DenseMatrix> p(static_cast<size_t>(lay.lyapunovCount), DenseMatrix::Identity(lay.nx, lay.nx));
    return lay.pack(p, 1.0, 1e-3, gamma2);
}

std::string dumpProblem(const LmiProblem& problem) {
    std::ostringstream os;
    os << "# family " << (problem.family == ProtocolFamily::Quadratic ? "quadratic" : "periodic") << "\n";
    os << "# lyapunov " << problem.layout.lyapunovCount << " nx " << problem.layout.nx << " omega "
       << problem.omegaCount << " size " << problem.omegaSize << "\n";
    os << "# a3 " << problem.fixed.a3 << " a5 " << problem.fixed.a5 << (problem.fixed.ideal ? " ideal" : "")
       << "\n";
    os << sdp::dumpSystem(problem.system);
    return os.str();
}

}  // namespace nqcs::lmi
