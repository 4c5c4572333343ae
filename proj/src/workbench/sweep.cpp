#include "nqcs/errors.hpp"
#include "nqcs/workbench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

namespace nqcs::workbench {

namespace {

std::string num(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Probe {
    bool feasible = false;
    double margin = 0.0;
    int solves = 0;
};

Probe probe(const WorkbenchConfig& base, double gamma2, double hMad, double hMati) {
    WorkbenchConfig c = base;
    c.net.region.hMati = hMati;
    c.net.region.tauMad = hMad;
    c.lmi.gamma2 = std::isinf(gamma2) ? Gamma2Setting::ideal() : Gamma2Setting::fixed(gamma2);
    Probe p;
    try {
        const AnalysisResult r = analyze(c);
        p.feasible = r.certified();
        p.margin = r.certified() ? r.certificate->margin : -r.outcome.worstMargin;
        p.solves = r.solveCalls;
    } catch (const Error&) {
        // numerical trouble at this grid point counts as no certificate
        p.feasible = false;
    }
    return p;
}

SweepRow sweepPoint(const WorkbenchConfig& c, double gamma2, double hMad) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepRow row;
    row.gamma2 = gamma2;
    row.hMad = hMad;
    double lo = std::max({c.net.region.epsilon, hMad, c.sweep.hMatiLower});
    double hi = c.sweep.hMatiUpper;
    if (lo <= hi) {
        Probe p = probe(c, gamma2, hMad, lo);
        row.solves += p.solves;
        row.margin = p.margin;
        if (p.feasible) {
            row.feasible = true;
            Probe top = probe(c, gamma2, hMad, hi);
            row.solves += top.solves;
            if (top.feasible) {
                lo = hi;
                row.margin = top.margin;
            } else {
                while (hi > lo * (1.0 + c.sweep.relativeTolerance)) {
                    const double mid = std::sqrt(lo * hi);
                    Probe m = probe(c, gamma2, hMad, mid);
                    row.solves += m.solves;
                    if (m.feasible) {
                        lo = mid;
                        row.margin = m.margin;
                    } else {
                        hi = mid;
                    }
                }
            }
            row.hMatiMax = lo;
        }
    }
    if (c.sweep.recordRuntime) {
        row.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return row;
}

}  // namespace

std::string sweepHeader() { return "gamma2,h_mad,h_mati_max,feasible,margin,runtime_s,solves"; }

std::string sweepCsvRow(const SweepRow& row, bool recordRuntime) {
    return num(row.gamma2) + "," + num(row.hMad) + "," + num(row.hMatiMax) + "," + (row.feasible ? "1" : "0") + "," +
           num(row.margin) + "," + num(recordRuntime ? row.runtime : 0.0) + "," + std::to_string(row.solves);
}

SweepResult sweepTradeoff(const WorkbenchConfig& config, const std::function<void(const SweepRow&)>& onRow) {
    config.validate();
    std::vector<std::pair<double, double>> grid;
    for (double g : config.sweep.gamma2) {
        for (double m : config.sweep.hMad) {
            grid.emplace_back(g, m);
        }
    }
    const size_t n = grid.size();
    SweepResult result;
    result.rows.resize(n);
    std::vector<bool> done(n, false);
    std::mutex mu;
    std::mutex emitMu;
    std::atomic<size_t> next{0};
    size_t emitted = 0;

    // emits the completed prefix of the grid, in order
    auto flush = [&] {
        std::lock_guard<std::mutex> order(emitMu);
        for (;;) {
            SweepRow row;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (emitted >= n || !done[emitted]) {
                    return;
                }
                row = result.rows[emitted];
                ++emitted;
            }
            if (onRow) {
                onRow(row);
            }
        }
    };
    auto worker = [&] {
        for (size_t i = next++; i < n; i = next++) {
            SweepRow row = sweepPoint(config, grid[i].first, grid[i].second);
            {
                std::lock_guard<std::mutex> lock(mu);
                result.rows[i] = row;
                done[i] = true;
            }
            flush();
        }
    };
    const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(n)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    std::map<double, std::vector<const SweepRow*>> byGamma;
    for (const auto& r : result.rows) {
        byGamma[r.gamma2].push_back(&r);
    }
    for (auto& [g, rows] : byGamma) {
        std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->hMad < b->hMad; });
        for (size_t i = 1; i < rows.size(); ++i) {
            if (rows[i]->hMatiMax > rows[i - 1]->hMatiMax * (1.0 + config.sweep.relativeTolerance)) {
                ++result.monotonicityViolations;
            }
        }
    }
    result.tolerance = config.sweep.relativeTolerance;
    return result;
}

TrendSummary trendSummary(const SweepResult& result) {
    TrendSummary s;
    const double slack = 1.0 + result.tolerance;
    std::map<double, std::map<double, double>> table;  // γ₂ → h_mad → h_mati_max
    for (const auto& r : result.rows) {
        table[r.gamma2][r.hMad] = r.hMatiMax;
    }
    std::vector<double> gammas;
    std::vector<double> mads;
    for (const auto& [g, row] : table) {
        gammas.push_back(g);
        for (const auto& [m, v] : row) {
            if (std::find(mads.begin(), mads.end(), m) == mads.end()) {
                mads.push_back(m);
            }
        }
    }
    std::sort(mads.begin(), mads.end());
    auto value = [&](double g, double m, double& out) {
        const auto& row = table[g];
        const auto it = row.find(m);
        if (it == row.end()) {
            return false;
        }
        out = it->second;
        return true;
    };
    // non-increasing in h_mad
    for (double g : gammas) {
        for (size_t i = 1; i < mads.size(); ++i) {
            double a = 0.0;
            double b = 0.0;
            if (value(g, mads[i - 1], a) && value(g, mads[i], b)) {
                ++s.madComparisons;
                s.madHeld += b <= a * slack ? 1 : 0;
            }
        }
    }
    // non-decreasing in finite γ₂
    std::vector<double> finiteGammas;
    for (double g : gammas) {
        if (std::isfinite(g)) {
            finiteGammas.push_back(g);
        }
    }
    for (double m : mads) {
        for (size_t i = 1; i < finiteGammas.size(); ++i) {
            double a = 0.0;
            double b = 0.0;
            if (value(finiteGammas[i - 1], m, a) && value(finiteGammas[i], m, b)) {
                ++s.gammaComparisons;
                s.gammaHeld += b * slack >= a ? 1 : 0;
            }
        }
    }
    // the ideal curve dominates every finite-γ₂ curve
    const double inf = std::numeric_limits<double>::infinity();
    if (table.count(inf) != 0) {
        for (double m : mads) {
            double ideal = 0.0;
            if (!value(inf, m, ideal)) {
                continue;
            }
            for (double g : finiteGammas) {
                double v = 0.0;
                if (value(g, m, v)) {
                    ++s.idealComparisons;
                    s.idealHeld += ideal * slack >= v ? 1 : 0;
                }
            }
        }
    }
    return s;
}

}  // namespace nqcs::workbench
