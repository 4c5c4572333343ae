#include "nqcs/errors.hpp"
#include "nqcs/workbench.hpp"

#include <cmath>
#include <sstream>

namespace nqcs::workbench {

namespace {

bool within3Sigma(long successes, long draws, double p) {
    if (draws <= 0) {
        return true;
    }
    const double f = static_cast<double>(successes) / static_cast<double>(draws);
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
    return std::abs(f - p) <= 3.0 * sigma + 1e-15;
}

}  // namespace

sim::SimulationSetup simulationSetup(const WorkbenchConfig& config) {
    sim::SimulationSetup s;
    s.plant = config.plant;
    s.controller = config.controller;
    s.net = config.net;
    s.quantizer = config.quantizer;
    if (config.simulation.x0.size() != 0) {
        s.x0 = config.simulation.x0;
    } else {
        s.x0 = Vector::Zero(config.dimensions().nx());
        s.x0(0) = 1.0;
    }
    return s;
}

SimulationReport simulateAndCheck(const WorkbenchConfig& config, const lmi::LmiCertificate& cert) {
    config.validate();
    const sim::SimulationSetup setup = simulationSetup(config);
    const auto& ss = config.simulation;
    SimulationReport rep;
    sim::EnsembleOptions eo;
    eo.workers = config.workers;
    rep.stats = sim::runEnsemble(setup, ss.runs, ss.horizon, ss.seed, eo);
    const double x0n = setup.x0.squaredNorm();
    rep.emsiss = sim::checkEmsissBound(rep.stats, cert, x0n, rep.stats.epsSup);
    if (std::isinf(cert.gamma2)) {
        rep.hinfError = "ideal certificate: the output sum bound has no finite gain";
    } else {
        try {
            rep.hinf = sim::checkHinfSum(rep.stats, cert, x0n);
        } catch (const HorizonTooShort& e) {
            rep.hinfError = e.what();
        }
    }
    rep.ultimate = sim::ultimateBoundCheck(rep.stats, cert, config.quantizer);
    const long draws = rep.stats.draws;
    rep.alphaFrequency = draws > 0 ? static_cast<double>(rep.stats.alphaSuccesses) / static_cast<double>(draws) : 0.0;
    rep.betaFrequency = draws > 0 ? static_cast<double>(rep.stats.betaSuccesses) / static_cast<double>(draws) : 0.0;
    rep.dropoutWithin3Sigma = within3Sigma(rep.stats.alphaSuccesses, draws, config.net.alphaBar) &&
                              within3Sigma(rep.stats.betaSuccesses, draws, config.net.betaBar);
    const bool hinfOk = rep.hinf ? rep.hinf->holds : std::isinf(cert.gamma2);
    const bool replayOk = rep.stats.maxReplayResidual <= 1e-9;
    rep.passed = rep.emsiss.holds && hinfOk && rep.ultimate.holds && rep.dropoutWithin3Sigma && replayOk &&
                 rep.stats.todViolations == 0;

    std::ostringstream v;
    v.precision(6);
    v << "runs " << rep.stats.runs << ", horizon " << rep.stats.horizon
      << (rep.stats.confidenceValid ? "" : " (fewer than 30 runs: half-widths not valid)") << "\n";
    v << "emsiss bound: " << (rep.emsiss.holds ? "holds" : "violated") << " (worst margin "
      << rep.emsiss.worstMargin << ", violations " << rep.emsiss.violations.size() << ")\n";
    if (rep.hinf) {
        v << "output sum bound: " << (rep.hinf->holds ? "holds" : "violated") << " (lhs " << rep.hinf->lhs << ", rhs "
          << rep.hinf->rhs << ", tail fraction " << rep.hinf->tailFraction << ")\n";
    } else {
        v << "output sum bound: not checked (" << rep.hinfError << ")\n";
    }
    v << "ultimate bound: " << (rep.ultimate.holds ? "holds" : "violated") << " (limsup "
      << rep.ultimate.observedLimsup << ", bound " << rep.ultimate.bound << ")\n";
    v << "dropout frequencies: alpha " << rep.alphaFrequency << ", beta " << rep.betaFrequency << " "
      << (rep.dropoutWithin3Sigma ? "within" : "outside") << " 3 sigma\n";
    v << "replay residual: " << rep.stats.maxReplayResidual << ", protocol violations " << rep.stats.todViolations
      << "\n";
    v << "verdict: " << (rep.passed ? "PASS" : "FAIL") << "\n";
    rep.verdict = v.str();

    rep.traceCsv = sim::traceCsv(sim::simulateRun(setup, ss.horizon, ss.seed));
    rep.statisticsCsv = sim::statisticsCsv(rep.stats);
    return rep;
}

}  // namespace nqcs::workbench
