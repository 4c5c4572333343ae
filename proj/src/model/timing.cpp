#include "nqcs/timing.hpp"

#include "nqcs/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nqcs::model {

namespace {

constexpr double kTiny = 1e-300;

double pointDistance(const TimingPoint& a, const TimingPoint& b) { return std::hypot(a.h - b.h, a.tau - b.tau); }

std::pair<TimingPoint, TimingPoint> extremePoints(const Polygon& p) {
    std::pair<TimingPoint, TimingPoint> best{p.front(), p.front()};
    double d = -1.0;
    for (size_t i = 0; i < p.size(); ++i) {
        for (size_t j = i; j < p.size(); ++j) {
            const double dij = pointDistance(p[i], p[j]);
            if (dij > d) {
                d = dij;
                best = {p[i], p[j]};
            }
        }
    }
    return best;
}

double scaleOf(const Polygon& p) {
    double s = 0.0;
    for (const auto& q : p) {
        s = std::max({s, std::abs(q.h), std::abs(q.tau)});
    }
    return std::max(s, kTiny);
}

/// Whether q lies in the convex hull of p (a polygon, segment or point).
bool hullContains(const Polygon& p, const TimingPoint& q, double tol) {
    if (p.empty()) {
        return false;
    }
    if (std::abs(signedArea(p)) > tol * tol) {
        const double orient = signedArea(p) > 0 ? 1.0 : -1.0;
        for (size_t i = 0; i < p.size(); ++i) {
            const auto& a = p[i];
            const auto& b = p[(i + 1) % p.size()];
            const double cross = (b.h - a.h) * (q.tau - a.tau) - (b.tau - a.tau) * (q.h - a.h);
            const double len = std::max(pointDistance(a, b), kTiny);
            if (orient * cross / len < -tol) {
                return false;
            }
        }
        return true;
    }
    auto [a, b] = extremePoints(p);
    const double len2 = (b.h - a.h) * (b.h - a.h) + (b.tau - a.tau) * (b.tau - a.tau);
    double t = 0.0;
    if (len2 > 0.0) {
        t = std::clamp(((q.h - a.h) * (b.h - a.h) + (q.tau - a.tau) * (b.tau - a.tau)) / len2, 0.0, 1.0);
    }
    const TimingPoint proj{a.h + t * (b.h - a.h), a.tau + t * (b.tau - a.tau)};
    return pointDistance(proj, q) <= tol;
}

}  // namespace

double signedArea(const Polygon& p) {
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const auto& a = p[i];
        const auto& b = p[(i + 1) % p.size()];
        s += a.h * b.tau - b.h * a.tau;
    }
    return 0.5 * s;
}

double measure(const Polygon& p, int dimension) {
    if (p.empty()) {
        return 0.0;
    }
    switch (dimension) {
        case 2:
            return std::abs(signedArea(p));
        case 1: {
            auto [a, b] = extremePoints(p);
            return pointDistance(a, b);
        }
        default:
            return 1.0;
    }
}

Polygon clipHalfPlane(const Polygon& p, double a, double b, double c, bool snapDiagonal) {
    Polygon out;
    if (p.empty()) {
        return out;
    }
    auto f = [&](const TimingPoint& q) { return a * q.h + b * q.tau - c; };
    for (size_t i = 0; i < p.size(); ++i) {
        const TimingPoint& cur = p[i];
        const TimingPoint& nxt = p[(i + 1) % p.size()];
        const double fc = f(cur);
        const double fn = f(nxt);
        if (fc <= 0.0) {
            out.push_back(cur);
        }
        if ((fc < 0.0 && fn > 0.0) || (fc > 0.0 && fn < 0.0)) {
            const double t = fc / (fc - fn);
            TimingPoint x{cur.h + t * (nxt.h - cur.h), cur.tau + t * (nxt.tau - cur.tau)};
            if (snapDiagonal) {
                x.tau = x.h;
            }
            out.push_back(x);
        }
    }
    // drop consecutive duplicates
    Polygon clean;
    for (const auto& q : out) {
        if (clean.empty() || q.h != clean.back().h || q.tau != clean.back().tau) {
            clean.push_back(q);
        }
    }
    while (clean.size() > 1 && clean.front().h == clean.back().h && clean.front().tau == clean.back().tau) {
        clean.pop_back();
    }
    return clean;
}

void TimingRegion::validate() const {
    const bool finite = std::isfinite(epsilon) && std::isfinite(hMati) && std::isfinite(tauMad) &&
                        std::isfinite(tauMin) && std::isfinite(inflation);
    if (!finite) {
        throw ConfigError("timing-finite", "timing region: all bounds must be finite");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("assumption-1", "timing region: epsilon must be positive (Zeno exclusion)");
    }
    if (!(epsilon <= hMati)) {
        throw ConfigError("assumption-1", "timing region: epsilon must not exceed h_mati");
    }
    if (!(tauMin >= 0.0 && tauMin <= tauMad)) {
        throw ConfigError("assumption-1", "timing region: need 0 <= tau_min <= tau_mad");
    }
    if (!(tauMad <= hMati)) {
        throw ConfigError("assumption-1", "timing region: need tau_mad <= h_mati");
    }
    if (!(tauMin <= hMati)) {
        throw ConfigError("assumption-1", "timing region: tau_min exceeds every admissible interval");
    }
    if (!(inflation >= 0.0)) {
        throw ConfigError("timing-inflation", "timing region: inflation must be non-negative");
    }
}

Polygon TimingRegion::polygon() const {
    Polygon rect{{epsilon, tauMin}, {hMati, tauMin}, {hMati, tauMad}, {epsilon, tauMad}};
    Polygon p = clipHalfPlane(rect, -1.0, 1.0, 0.0, true);
    // collapse duplicates in degenerate rectangles
    Polygon unique;
    for (const auto& q : p) {
        bool seen = false;
        for (const auto& u : unique) {
            seen = seen || (u.h == q.h && u.tau == q.tau);
        }
        if (!seen) {
            unique.push_back(q);
        }
    }
    return unique;
}

int TimingRegion::dimension() const {
    const Polygon p = polygon();
    if (p.empty()) {
        throw ConfigError("assumption-1", "timing region: admissible set is empty");
    }
    const double s = scaleOf(p);
    if (std::abs(signedArea(p)) > 1e-24 * s * s) {
        return 2;
    }
    if (measure(p, 1) > 1e-12 * s) {
        return 1;
    }
    return 0;
}

bool TimingRegion::contains(double h, double tau, double slack) const {
    return h >= epsilon - slack && h <= hMati + slack && tau >= tauMin - slack && tau <= tauMad + slack &&
           tau <= h + slack;
}

void DistributionSpec::validate() const {
    if (kind == Kind::Uniform) {
        return;
    }
    if (hEdges.size() < 2 || tauEdges.size() < 2) {
        throw ConfigError("distribution-table", "tabulated density needs at least two edges per axis");
    }
    if (!std::is_sorted(hEdges.begin(), hEdges.end()) || !std::is_sorted(tauEdges.begin(), tauEdges.end())) {
        throw ConfigError("distribution-table", "tabulated density edges must be ascending");
    }
    if (density.rows() != static_cast<Eigen::Index>(hEdges.size() - 1) ||
        density.cols() != static_cast<Eigen::Index>(tauEdges.size() - 1)) {
        throw ConfigError("distribution-table", "tabulated density must have (|hEdges|-1) x (|tauEdges|-1) cells");
    }
    if (!density.allFinite() || (density.array() < 0.0).any()) {
        throw ConfigError("distribution-table", "tabulated density values must be finite and non-negative");
    }
}

TimingDistribution::TimingDistribution(const TimingRegion& region, const DistributionSpec& spec)
    : region_(region), spec_(spec) {
    region_.validate();
    spec_.validate();
    support_ = region_.polygon();
    dimension_ = region_.dimension();
    maxDensity_ = spec_.kind == DistributionSpec::Kind::Uniform ? 1.0 : spec_.density.maxCoeff();
    totalMass_ = rawMass(support_);
    if (!(totalMass_ > 0.0) || !std::isfinite(totalMass_)) {
        throw ConfigError("distribution-normalizable", "timing distribution has no mass on the admissible region");
    }
}

double TimingDistribution::rawDensity(double h, double tau) const {
    if (spec_.kind == DistributionSpec::Kind::Uniform) {
        return 1.0;
    }
    const auto& he = spec_.hEdges;
    const auto& te = spec_.tauEdges;
    if (h < he.front() || h > he.back() || tau < te.front() || tau > te.back()) {
        return 0.0;
    }
    auto cell = [](const std::vector<double>& edges, double x) {
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        auto idx = static_cast<Eigen::Index>(it - edges.begin()) - 1;
        return std::min(idx, static_cast<Eigen::Index>(edges.size()) - 2);
    };
    return spec_.density(cell(he, h), cell(te, tau));
}

double TimingDistribution::rawMass(const Polygon& p) const {
    if (p.empty()) {
        return 0.0;
    }
    if (dimension_ == 0) {
        const TimingPoint q = support_.front();
        return hullContains(p, q, 1e-12 * scaleOf(p)) ? rawDensity(q.h, q.tau) : 0.0;
    }
    Polygon clipped = p;
    clipped = clipHalfPlane(clipped, -1.0, 0.0, -region_.epsilon);
    clipped = clipHalfPlane(clipped, 1.0, 0.0, region_.hMati);
    clipped = clipHalfPlane(clipped, 0.0, -1.0, -region_.tauMin);
    clipped = clipHalfPlane(clipped, 0.0, 1.0, region_.tauMad);
    clipped = clipHalfPlane(clipped, -1.0, 1.0, 0.0, true);
    if (clipped.empty()) {
        return 0.0;
    }
    if (spec_.kind == DistributionSpec::Kind::Uniform) {
        return measure(clipped, dimension_);
    }
    double mass = 0.0;
    const auto& he = spec_.hEdges;
    const auto& te = spec_.tauEdges;
    for (size_t i = 0; i + 1 < he.size(); ++i) {
        Polygon col = clipHalfPlane(clipped, -1.0, 0.0, -he[i]);
        col = clipHalfPlane(col, 1.0, 0.0, he[i + 1]);
        if (col.empty()) {
            continue;
        }
        for (size_t j = 0; j + 1 < te.size(); ++j) {
            const double d = spec_.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (d == 0.0) {
                continue;
            }
            Polygon cell = clipHalfPlane(col, 0.0, -1.0, -te[j]);
            cell = clipHalfPlane(cell, 0.0, 1.0, te[j + 1]);
            mass += d * measure(cell, dimension_);
        }
    }
    return mass;
}

double TimingDistribution::density(double h, double tau) const {
    if (!region_.contains(h, tau)) {
        return 0.0;
    }
    return rawDensity(h, tau) / totalMass_;
}

double TimingDistribution::probability(const Polygon& p) const {
    return std::clamp(rawMass(p) / totalMass_, 0.0, 1.0);
}

TimingPoint TimingDistribution::sample(CounterRng& rng) const {
    if (dimension_ == 0) {
        return support_.front();
    }
    constexpr int kMaxTries = 1000000;
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
        TimingPoint q;
        if (dimension_ == 2) {
            const double tauHi = std::min(region_.tauMad, region_.hMati);
            q.h = region_.epsilon + rng.uniform() * (region_.hMati - region_.epsilon);
            q.tau = region_.tauMin + rng.uniform() * (tauHi - region_.tauMin);
            if (q.tau > q.h) {
                continue;
            }
        } else {
            auto [a, b] = extremePoints(support_);
            const double t = rng.uniform();
            q = {a.h + t * (b.h - a.h), a.tau + t * (b.tau - a.tau)};
        }
        if (spec_.kind == DistributionSpec::Kind::Uniform || rng.uniform() * maxDensity_ < rawDensity(q.h, q.tau)) {
            return q;
        }
    }
    throw NumericalFailure("timing sampler: rejection sampling did not accept a point");
}

}  // namespace nqcs::model
