#include "nqcs/errors.hpp"
#include "nqcs/overapprox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nqcs::overapprox {

using model::Polygon;

namespace {

double regionScale(const model::TimingRegion& r) {
    return std::max({std::abs(r.epsilon), std::abs(r.hMati), std::abs(r.tauMad), 1e-300});
}

class VertexPool {
public:
    VertexPool(std::vector<TimingPoint>& out, double tol) : out_(out), tol_(tol) {}

    int add(const TimingPoint& p) {
        for (size_t i = 0; i < out_.size(); ++i) {
            if (std::abs(out_[i].h - p.h) <= tol_ && std::abs(out_[i].tau - p.tau) <= tol_) {
                return static_cast<int>(i);
            }
        }
        out_.push_back(p);
        return static_cast<int>(out_.size()) - 1;
    }

private:
    std::vector<TimingPoint>& out_;
    double tol_;
};

std::pair<TimingPoint, TimingPoint> farthestPair(const Polygon& p) {
    std::pair<TimingPoint, TimingPoint> best{p.front(), p.front()};
    double d = -1.0;
    for (size_t i = 0; i < p.size(); ++i) {
        for (size_t j = i; j < p.size(); ++j) {
            const double dij = std::hypot(p[i].h - p[j].h, p[i].tau - p[j].tau);
            if (dij > d) {
                d = dij;
                best = {p[i], p[j]};
            }
        }
    }
    return best;
}

Polygon uniquePoints(const std::array<TimingPoint, 3>& t) {
    Polygon p;
    for (const auto& q : t) {
        bool seen = false;
        for (const auto& u : p) {
            seen = seen || (u.h == q.h && u.tau == q.tau);
        }
        if (!seen) {
            p.push_back(q);
        }
    }
    return p;
}

}  // namespace

std::array<TimingPoint, 3> TimingPartition::corners(int m) const {
    const auto& t = triangles.at(static_cast<size_t>(m));
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
}

double TimingPartition::totalProbability() const {
    double s = 0.0;
    for (double p : probabilities) {
        s += p;
    }
    return s;
}

TimingPartition::Location TimingPartition::locate(double h, double tau) const {
    Location best;
    double bestScore = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < triangleCount(); ++m) {
        const auto c = corners(m);
        std::array<double, 3> w{1.0, 0.0, 0.0};
        double score = 0.0;
        const double det = (c[1].h - c[0].h) * (c[2].tau - c[0].tau) - (c[2].h - c[0].h) * (c[1].tau - c[0].tau);
        const double scale = std::max({std::abs(c[0].h), std::abs(c[1].h), std::abs(c[2].h), 1e-300});
        if (std::abs(det) > 1e-24 * scale * scale) {
            w[1] = ((h - c[0].h) * (c[2].tau - c[0].tau) - (c[2].h - c[0].h) * (tau - c[0].tau)) / det;
            w[2] = ((c[1].h - c[0].h) * (tau - c[0].tau) - (h - c[0].h) * (c[1].tau - c[0].tau)) / det;
            w[0] = 1.0 - w[1] - w[2];
            score = std::min({w[0], w[1], w[2]});
        } else {
            // segment (a, b, b) or point
            const TimingPoint a = c[0];
            const TimingPoint b = c[1].h != a.h || c[1].tau != a.tau ? c[1] : c[2];
            const int ib = c[1].h != a.h || c[1].tau != a.tau ? 1 : 2;
            const double len2 = (b.h - a.h) * (b.h - a.h) + (b.tau - a.tau) * (b.tau - a.tau);
            double t = 0.0;
            if (len2 > 0.0) {
                t = ((h - a.h) * (b.h - a.h) + (tau - a.tau) * (b.tau - a.tau)) / len2;
            }
            const double tc = std::clamp(t, 0.0, 1.0);
            const double dist = std::hypot(a.h + tc * (b.h - a.h) - h, a.tau + tc * (b.tau - a.tau) - tau);
            const double len = std::max(std::sqrt(len2), 1e-300 + scale);
            score = std::min({t, 1.0 - t, 0.0}) - dist / len;
            if (len2 > 0.0 && dist <= 1e-12 * scale) {
                score = std::min(t, 1.0 - t);
            }
            w = {1.0 - tc, 0.0, 0.0};
            w[ib] = tc;
        }
        if (score > bestScore) {
            bestScore = score;
            best.triangle = m;
            best.weights = w;
        }
    }
    if (best.triangle < 0) {
        throw DomainError("locate: partition has no triangles");
    }
    double s = 0.0;
    for (double& x : best.weights) {
        x = std::max(x, 0.0);
        s += x;
    }
    for (double& x : best.weights) {
        x /= s;
    }
    return best;
}

double triangleProbability(const std::array<TimingPoint, 3>& triangle,
                           const model::TimingDistribution& distribution) {
    const Polygon p = uniquePoints(triangle);
    if (distribution.dimension() == 2 && std::abs(model::signedArea(p)) == 0.0) {
        return 0.0;
    }
    return distribution.probability(p);
}

TimingPartition partitionTheta(const model::TimingRegion& region, const model::TimingDistribution& distribution,
                               int na, int nb) {
    if (na < 1 || nb < 1) {
        throw DomainError("partitionTheta: N_a and N_b must be at least 1");
    }
    region.validate();
    TimingPartition out;
    out.na = na;
    out.nb = nb;
    out.dimension = region.dimension();
    const double scale = regionScale(region);
    VertexPool pool(out.vertices, 1e-12 * scale);

    auto addTriangle = [&](const TimingPoint& a, const TimingPoint& b, const TimingPoint& c) {
        out.triangles.push_back({pool.add(a), pool.add(b), pool.add(c)});
    };

    if (out.dimension == 2) {
        std::vector<double> hs(static_cast<size_t>(na) + 1);
        std::vector<double> ts(static_cast<size_t>(nb) + 1);
        for (int i = 0; i <= na; ++i) {
            hs[i] = i == na ? region.hMati : region.epsilon + (region.hMati - region.epsilon) * i / na;
        }
        for (int j = 0; j <= nb; ++j) {
            ts[j] = j == nb ? region.tauMad : region.tauMin + (region.tauMad - region.tauMin) * j / nb;
        }
        for (int i = 0; i < na; ++i) {
            for (int j = 0; j < nb; ++j) {
                const TimingPoint v00{hs[i], ts[j]};
                const TimingPoint v10{hs[i + 1], ts[j]};
                const TimingPoint v11{hs[i + 1], ts[j + 1]};
                const TimingPoint v01{hs[i], ts[j + 1]};
                for (const Polygon& tri : {Polygon{v00, v10, v11}, Polygon{v00, v11, v01}}) {
                    const Polygon piece = model::clipHalfPlane(tri, -1.0, 1.0, 0.0, true);
                    if (piece.size() < 3 || std::abs(model::signedArea(piece)) <= 1e-14 * scale * scale) {
                        continue;
                    }
                    for (size_t k = 1; k + 1 < piece.size(); ++k) {
                        const Polygon fan{piece[0], piece[k], piece[k + 1]};
                        if (std::abs(model::signedArea(fan)) <= 1e-14 * scale * scale) {
                            continue;
                        }
                        addTriangle(piece[0], piece[k], piece[k + 1]);
                    }
                }
            }
        }
    } else if (out.dimension == 1) {
        const Polygon support = region.polygon();
        auto [a, b] = farthestPair(support);
        if (b.h < a.h || (b.h == a.h && b.tau < a.tau)) {
            std::swap(a, b);
        }
        const int pieces = std::abs(b.h - a.h) >= std::abs(b.tau - a.tau) ? na : nb;
        TimingPoint prev = a;
        for (int k = 1; k <= pieces; ++k) {
            const double t = static_cast<double>(k) / pieces;
            const TimingPoint next = k == pieces ? b : TimingPoint{a.h + t * (b.h - a.h), a.tau + t * (b.tau - a.tau)};
            addTriangle(prev, next, next);
            prev = next;
        }
    } else {
        const TimingPoint p = region.polygon().front();
        addTriangle(p, p, p);
    }

    // snapped points may sit an ulp above the diagonal
    for (auto& v : out.vertices) {
        v.tau = std::min(v.tau, v.h);
    }

    out.probabilities.reserve(out.triangles.size());
    double covered = 0.0;
    for (int m = 0; m < out.triangleCount(); ++m) {
        const auto c = out.corners(m);
        out.probabilities.push_back(out.dimension == 0 ? 1.0 : triangleProbability(c, distribution));
        covered += model::measure(uniquePoints(c), out.dimension);
    }
    out.excessMeasure = std::max(0.0, covered - model::measure(region.polygon(), out.dimension));
    return out;
}

}  // namespace nqcs::overapprox
