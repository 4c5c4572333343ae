#include "nqcs/errors.hpp"
#include "nqcs/workbench.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>

namespace nqcs::workbench {

using nlohmann::json;

std::string statusName(AnalysisStatus s) {
    switch (s) {
        case AnalysisStatus::Certified:
            return "certified";
        case AnalysisStatus::Infeasible:
            return "infeasible";
        case AnalysisStatus::TightnessNotAchieved:
            return "tightness-not-achieved";
        case AnalysisStatus::CertificateRejected:
            return "certificate-rejected";
    }
    return "infeasible";
}

namespace {

lmi::LmiProblem assembleFor(const WorkbenchConfig& c, const overapprox::PolytopicModel& pm,
                            const lmi::LmiInputs& in, const lmi::FixedParameters& fixed) {
    const auto& proto = c.net.protocol;
    switch (proto.kind) {
        case model::ProtocolKind::TryOnceDiscard:
            return lmi::assembleQuadratic(in, lmi::todWeights(pm.dims, c.net), fixed);
        case model::ProtocolKind::Quadratic:
            return lmi::assembleQuadratic(in, proto.weights, fixed);
        case model::ProtocolKind::Periodic:
            return lmi::assemblePeriodic(in, proto.sequence, fixed);
        case model::ProtocolKind::RoundRobin: {
            std::vector<int> seq(static_cast<size_t>(c.net.nodeCount));
            std::iota(seq.begin(), seq.end(), 0);
            return lmi::assemblePeriodic(in, seq, fixed);
        }
    }
    throw ConfigError("protocol-kind", "unsupported protocol");
}

struct Attempt {
    sdp::SolveOutcome outcome;
    Vector x;
    bool feasible = false;
};

/// Solves with γ₂ held at `gamma2` (or the ideal system) and writes γ₂ back into x.
Attempt solveAt(const lmi::LmiProblem& problem, const sdp::SolverOptions& base, double gamma2) {
    sdp::SolverOptions opts = base;
    const bool ideal = problem.layout.gamma2 < 0;
    opts.start = lmi::initialGuess(problem, ideal ? 1.0 : gamma2);
    Attempt a;
    if (ideal) {
        a.outcome = sdp::solveFeasibility(problem.system, opts);
    } else {
        a.outcome = sdp::solveFeasibility(problem.system.withFixedVariable(problem.layout.gamma2, gamma2), opts);
    }
    a.x = a.outcome.x;
    if (!ideal && a.x.size() == problem.layout.total) {
        a.x(problem.layout.gamma2) = gamma2;
    }
    a.feasible = a.outcome.status == sdp::SolveStatus::FeasibleWithMargin && a.x.size() == problem.layout.total &&
                 sdp::verifySolution(problem.system, a.x, base.requestedMargin);
    return a;
}

}  // namespace

AnalysisResult analyze(const WorkbenchConfig& config, const AnalyzeOptions& options) {
    config.validate();
    AnalysisResult res;
    const model::LoopMatrices loop = model::loopMatrices(config.plant, config.controller);
    try {
        res.model = overapprox::runProcedure(loop, config.net, config.procedure);
    } catch (const TightnessNotAchieved& e) {
        res.status = AnalysisStatus::TightnessNotAchieved;
        res.message = e.what();
        return res;
    }
    const lmi::LmiInputs in = lmi::makeInputs(*res.model, loop, config.net);

    std::vector<lmi::Multipliers> dictionary = config.lmi.multiplierDictionary;
    if (dictionary.empty()) {
        dictionary.emplace_back();
    }
    const auto mode = config.lmi.gamma2.mode;
    std::string lastMessage = "no multiplier set gave a feasible point";
    bool rejected = false;

    for (size_t mi = 0; mi < dictionary.size(); ++mi) {
        lmi::FixedParameters fixed;
        fixed.a3 = config.lmi.a3;
        fixed.a5 = config.lmi.a5;
        fixed.multipliers = dictionary[mi];
        fixed.marginTol = config.solver.requestedMargin;
        fixed.ideal = mode == Gamma2Setting::Mode::Ideal;
        fixed.commonLyapunov = config.lmi.commonLyapunov;
        lmi::LmiProblem problem = assembleFor(config, *res.model, in, fixed);

        Attempt best;
        double gamma2 = std::numeric_limits<double>::infinity();
        if (mode == Gamma2Setting::Mode::Ideal) {
            best = solveAt(problem, config.solver, gamma2);
            ++res.solveCalls;
        } else if (mode == Gamma2Setting::Mode::Fixed) {
            gamma2 = config.lmi.gamma2.value;
            best = solveAt(problem, config.solver, gamma2);
            ++res.solveCalls;
        } else {
            double hi = config.lmi.gamma2Upper;
            best = solveAt(problem, config.solver, hi);
            ++res.solveCalls;
            if (best.feasible) {
                // log-scale bisection on (a5, hi]
                double lo = config.lmi.a5 > 0.0 ? config.lmi.a5 : hi * 1e-12;
                while (hi > lo * (1.0 + config.lmi.gamma2Tolerance)) {
                    const double mid = std::sqrt(lo * hi);
                    Attempt a = solveAt(problem, config.solver, mid);
                    ++res.solveCalls;
                    if (a.feasible) {
                        hi = mid;
                        best = std::move(a);
                    } else {
                        lo = mid;
                    }
                }
            }
            gamma2 = hi;
        }
        res.outcome = best.outcome;
        res.outcome.x = best.x;
        if (!best.feasible) {
            lastMessage = "solver: " + sdp::statusName(best.outcome.status);
            continue;
        }
        try {
            lmi::LmiCertificate cert = lmi::deriveCertificate(problem, best.x, config.solver.requestedMargin);
            if (options.checkContainment && config.containmentSamples > 0) {
                res.containment = overapprox::verifyContainment(*res.model, loop, config.net,
                                                                config.containmentSamples, config.containmentSeed);
                if (!res.containment.passed()) {
                    res.status = AnalysisStatus::CertificateRejected;
                    res.message = "containment check failed at " + std::to_string(res.containment.violations.size()) +
                                  " samples";
                    res.problem = std::move(problem);
                    return res;
                }
            }
            res.status = AnalysisStatus::Certified;
            res.certificate = std::move(cert);
            res.gamma2 = gamma2;
            res.multiplierIndex = static_cast<int>(mi);
            res.problem = std::move(problem);
            res.message = "certified";
            return res;
        } catch (const CertificateInvalid& e) {
            rejected = true;
            lastMessage = e.what();
        }
    }
    res.status = rejected ? AnalysisStatus::CertificateRejected : AnalysisStatus::Infeasible;
    res.message = lastMessage;
    return res;
}

namespace {

json finite(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v;
}

double readNumber(const json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        throw ConfigError("certificate", "unexpected value '" + s + "'");
    }
    return v.get<double>();
}

}  // namespace

std::string analysisJson(const AnalysisResult& r) {
    json j;
    j["tool"] = kToolVersion;
    j["status"] = statusName(r.status);
    j["message"] = r.message;
    j["solve_calls"] = r.solveCalls;
    j["solver"] = {{"status", sdp::statusName(r.outcome.status)},
                   {"worst_margin", r.outcome.worstMargin},
                   {"iterations", r.outcome.iterations}};
    if (r.model) {
        j["procedure"] = {{"na", r.model->partition.na},
                          {"nb", r.model->partition.nb},
                          {"triangles", r.model->partition.triangleCount()},
                          {"varpi", r.model->varpi}};
    }
    if (r.problem) {
        j["lmi"] = {{"omega_count", r.problem->omegaCount},
                    {"omega_size", r.problem->omegaSize},
                    {"variables", r.problem->layout.total},
                    {"multiplier_index", r.multiplierIndex}};
    }
    j["containment"] = {{"samples", r.containment.samples},
                        {"checks", r.containment.checks},
                        {"max_block_norm", r.containment.maxBlockNorm},
                        {"max_relative_residual", r.containment.maxRelativeResidual},
                        {"violations", r.containment.violations.size()}};
    if (r.certificate) {
        const auto& c = *r.certificate;
        j["certificate"] = {{"a1", c.a1},         {"a2", c.a2},         {"a3", c.a3},   {"a4", c.a4},
                            {"a5", c.a5},         {"c1", c.c1},         {"c2", c.c2},   {"c3", c.c3},
                            {"gamma1", c.gamma1}, {"gamma2", finite(c.gamma2)},         {"rho", c.rho},
                            {"margin", c.margin}, {"ideal", c.ideal}};
    }
    return j.dump(2);
}

lmi::LmiCertificate certificateFromJson(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("certificate", std::string("certificate file is not valid JSON: ") + e.what());
    }
    if (!j.contains("certificate")) {
        throw ConfigError("certificate", "file holds no certificate (status: " + j.value("status", std::string("?")) + ")");
    }
    const json& c = j.at("certificate");
    try {
        lmi::LmiCertificate cert = lmi::certificateConstants(readNumber(c.at("a1")), readNumber(c.at("a2")),
                                                             readNumber(c.at("a3")), readNumber(c.at("a4")),
                                                             readNumber(c.at("a5")));
        cert.gamma2 = readNumber(c.at("gamma2"));
        cert.ideal = c.value("ideal", false);
        cert.rho = c.value("rho", 0.0);
        cert.margin = c.value("margin", 0.0);
        return cert;
    } catch (const json::exception& e) {
        throw ConfigError("certificate", std::string("malformed certificate: ") + e.what());
    }
}

}  // namespace nqcs::workbench
