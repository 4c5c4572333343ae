#pragma once

#include "nqcs/linalg.hpp"
#include "nqcs/rng.hpp"

#include <string>
#include <vector>

namespace nqcs::model {

using linalg::DenseMatrix;

/// A point of the (transmission interval, delay) plane.
struct TimingPoint {
    double h = 0.0;
    double tau = 0.0;
};

using Polygon = std::vector<TimingPoint>;

/// Signed area (counter-clockwise positive).
double signedArea(const Polygon& p);
/// Area for polygons, length for segments, 0 for points.
double measure(const Polygon& p, int dimension);
/// Keeps the part of a convex polygon with a·h + b·τ ≤ c. Points created on the
/// boundary are snapped onto it when `snapDiagonal` marks the line τ = h.
Polygon clipHalfPlane(const Polygon& p, double a, double b, double c, bool snapDiagonal = false);

/// Admissible (h, τ) set: h ∈ [ε, h_mati], τ ∈ [τ_min, τ_mad], τ ≤ h.
struct TimingRegion {
    double epsilon = 1e-3;
    double hMati = 0.1;
    double tauMad = 0.05;
    double tauMin = 0.0;
    /// Allowed inflation δ of the region by the partition.
    double inflation = 1e-9;

    void validate() const;
    /// Closure of the admissible set as a convex polygon (possibly a segment or a point).
    Polygon polygon() const;
    /// 2 for a proper region, 1 for a segment, 0 for a single point.
    int dimension() const;
    bool contains(double h, double tau, double slack = 0.0) const;
};

/// Density description. Uniform is constant over the admissible set; tabulated is
/// piecewise constant over a rectangular grid (hEdges × tauEdges), zero outside it.
struct DistributionSpec {
    enum class Kind { Uniform, Tabulated };
    Kind kind = Kind::Uniform;
    std::vector<double> hEdges;
    std::vector<double> tauEdges;
    /// density(i, j) on [hEdges[i], hEdges[i+1]] × [tauEdges[j], tauEdges[j+1]].
    DenseMatrix density;

    void validate() const;
};

/// A distribution normalized over a concrete region.
class TimingDistribution {
public:
    TimingDistribution(const TimingRegion& region, const DistributionSpec& spec);

    const TimingRegion& region() const { return region_; }
    const DistributionSpec& spec() const { return spec_; }
    int dimension() const { return dimension_; }

    /// Normalized density (with respect to area, length or counting measure).
    double density(double h, double tau) const;
    /// Probability mass of a convex polygon (or segment, or point) intersected with the region.
    double probability(const Polygon& p) const;
    /// Rejection sampling; consumes draws from `rng` only.
    TimingPoint sample(CounterRng& rng) const;

private:
    double rawMass(const Polygon& p) const;
    double rawDensity(double h, double tau) const;

    TimingRegion region_;
    DistributionSpec spec_;
    Polygon support_;
    int dimension_ = 2;
    double totalMass_ = 1.0;
    double maxDensity_ = 1.0;
};

}  // namespace nqcs::model
