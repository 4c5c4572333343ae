#include "nqcs/errors.hpp"
#include "nqcs/workbench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace nqcs;

namespace {

enum Exit { Ok = 0, NoCertificate = 2, Invalid = 3, Numerical = 4 };

struct Common {
    std::string config;
    std::string out = ".";
    int workers = 0;
    std::uint64_t seed = 0;
    bool seedGiven = false;
};

void writeFile(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) {
        throw ConfigError("output", "cannot write '" + p.string() + "'");
    }
    f << text;
}

std::string readFile(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("file", "cannot open '" + path + "'");
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Loads the config, applies overrides and writes the manifest; returns the manifest id.
std::string prepare(const Common& c, const std::string& verb, workbench::WorkbenchConfig& cfg) {
    cfg = workbench::loadConfig(c.config);
    if (c.workers > 0) {
        cfg.workers = c.workers;
    }
    if (c.seedGiven) {
        cfg.simulation.seed = c.seed;
    }
    cfg.validate();
    fs::create_directories(c.out);
    const std::string manifest = workbench::manifestJson(cfg, verb);
    const std::string id = workbench::manifestId(manifest);
    writeFile(fs::path(c.out) / ("manifest_" + id + ".json"), manifest + "\n");
    return id;
}

int runAnalyze(const Common& c) {
    workbench::WorkbenchConfig cfg;
    const std::string id = prepare(c, "analyze", cfg);
    const workbench::AnalysisResult r = workbench::analyze(cfg);
    const fs::path out = fs::path(c.out) / ("analysis_" + id + ".json");
    writeFile(out, workbench::analysisJson(r) + "\n");
    std::cout << "status: " << workbench::statusName(r.status) << "\n";
    if (r.certificate) {
        const auto& k = *r.certificate;
        std::cout << "c1 " << k.c1 << "  c2 " << k.c2 << "  c3 " << k.c3 << "  gamma1 " << k.gamma1 << "  gamma2 "
                  << k.gamma2 << "\n";
    } else {
        std::cout << r.message << "\n";
    }
    std::cout << "written: " << out.string() << "\n";
    return r.certified() ? Ok : NoCertificate;
}

int runSweep(const Common& c, const std::string& format) {
    workbench::WorkbenchConfig cfg;
    const std::string id = prepare(c, "sweep", cfg);
    const fs::path out = fs::path(c.out) / ("sweep_" + id + "." + format);
    std::ofstream f(out, std::ios::binary);
    if (!f) {
        throw ConfigError("output", "cannot write '" + out.string() + "'");
    }
    nlohmann::json rows = nlohmann::json::array();
    if (format == "csv") {
        f << workbench::sweepHeader() << "\n" << std::flush;
    }
    const auto result = workbench::sweepTradeoff(cfg, [&](const workbench::SweepRow& row) {
        const std::string line = workbench::sweepCsvRow(row, cfg.sweep.recordRuntime);
        std::cout << line << "\n" << std::flush;
        if (format == "csv") {
            f << line << "\n" << std::flush;
        } else {
            nlohmann::json j = {{"h_mad", row.hMad},       {"h_mati_max", row.hMatiMax}, {"feasible", row.feasible},
                                {"margin", row.margin},    {"solves", row.solves},
                                {"runtime_s", cfg.sweep.recordRuntime ? row.runtime : 0.0}};
            j["gamma2"] = std::isinf(row.gamma2) ? nlohmann::json("inf") : nlohmann::json(row.gamma2);
            rows.push_back(j);
        }
    });
    if (format == "json") {
        f << rows.dump(2) << "\n";
    }
    const auto t = workbench::trendSummary(result);
    std::cout << "trends held: " << t.held() << " of " << t.total() << "\n";
    std::cout << "written: " << out.string() << "\n";
    return Ok;
}

int runSimulate(const Common& c, const std::string& certificatePath) {
    workbench::WorkbenchConfig cfg;
    const std::string id = prepare(c, "simulate", cfg);
    lmi::LmiCertificate cert;
    if (!certificatePath.empty()) {
        cert = workbench::certificateFromJson(readFile(certificatePath));
    } else {
        const auto r = workbench::analyze(cfg);
        if (!r.certified()) {
            std::cout << "status: " << workbench::statusName(r.status) << "\n" << r.message << "\n";
            return NoCertificate;
        }
        cert = *r.certificate;
    }
    const auto rep = workbench::simulateAndCheck(cfg, cert);
    const fs::path dir(c.out);
    writeFile(dir / ("trace_" + id + ".csv"), rep.traceCsv);
    writeFile(dir / ("statistics_" + id + ".csv"), rep.statisticsCsv);
    writeFile(dir / ("report_" + id + ".txt"), rep.verdict);
    std::cout << rep.verdict;
    std::cout << "written: " << (dir / ("trace_" + id + ".csv")).string() << ", "
              << (dir / ("statistics_" + id + ".csv")).string() << "\n";
    return rep.passed ? Ok : NoCertificate;
}

int runContainment(const Common& c, int samples) {
    workbench::WorkbenchConfig cfg;
    const std::string id = prepare(c, "verify-containment", cfg);
    const auto loop = model::loopMatrices(cfg.plant, cfg.controller);
    const auto pm = overapprox::runProcedure(loop, cfg.net, cfg.procedure);
    const auto rep = overapprox::verifyContainment(pm, loop, cfg.net, samples > 0 ? samples : cfg.containmentSamples,
                                                   cfg.containmentSeed);
    nlohmann::json j = {{"tool", workbench::kToolVersion},
                        {"na", pm.partition.na},
                        {"nb", pm.partition.nb},
                        {"varpi", pm.varpi},
                        {"samples", rep.samples},
                        {"checks", rep.checks},
                        {"max_block_norm", rep.maxBlockNorm},
                        {"max_relative_residual", rep.maxRelativeResidual},
                        {"passed", rep.passed()}};
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : rep.violations) {
        v.push_back({{"sigma", x.sigma}, {"h", x.h}, {"tau", x.tau}, {"block_norm", x.blockNorm},
                     {"residual", x.residual}});
    }
    j["violations"] = v;
    const fs::path out = fs::path(c.out) / ("containment_" + id + ".json");
    writeFile(out, j.dump(2) + "\n");
    std::cout << "containment: " << (rep.passed() ? "passed" : "failed") << " (" << rep.checks << " checks, "
              << rep.violations.size() << " violations)\n";
    std::cout << "written: " << out.string() << "\n";
    return rep.passed() ? Ok : NoCertificate;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic stability analysis and simulation of networked quantized control systems"};
    app.set_version_flag("--version", workbench::kToolVersion);
    app.require_subcommand(1);

    Common common;
    std::string format = "csv";
    std::string certificate;
    int samples = 0;

    auto addCommon = [&](CLI::App* sub, bool withSeed) {
        sub->add_option("--config", common.config, "Configuration file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", common.out, "Output directory")->capture_default_str();
        sub->add_option("--workers", common.workers, "Worker threads (overrides the config)")
            ->check(CLI::PositiveNumber);
        if (withSeed) {
            sub->add_option_function<std::uint64_t>(
                "--seed",
                [&](const std::uint64_t& s) {
                    common.seed = s;
                    common.seedGiven = true;
                },
                "Simulation seed (overrides the config)");
        }
    };

    auto* analyzeCmd = app.add_subcommand("analyze", "Build the polytopic model, solve the LMIs, report a certificate");
    addCommon(analyzeCmd, false);
    auto* sweepCmd = app.add_subcommand("sweep", "Trade-off curves h_mati_max(h_mad) for each gamma2");
    addCommon(sweepCmd, false);
    sweepCmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    auto* simulateCmd = app.add_subcommand("simulate", "Monte Carlo ensemble checked against a certificate");
    addCommon(simulateCmd, true);
    simulateCmd->add_option("--certificate", certificate, "Reuse the certificate of an analysis JSON file")
        ->check(CLI::ExistingFile);
    auto* containCmd = app.add_subcommand("verify-containment", "Sample-based check of the uncertainty envelope");
    addCommon(containCmd, false);
    containCmd->add_option("--samples", samples, "Samples per node (default: containment_samples)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : Invalid;
    }

    try {
        if (analyzeCmd->parsed()) {
            return runAnalyze(common);
        }
        if (sweepCmd->parsed()) {
            return runSweep(common, format);
        }
        if (simulateCmd->parsed()) {
            return runSimulate(common, certificate);
        }
        if (containCmd->parsed()) {
            return runContainment(common, samples);
        }
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration [" << e.invariant() << "]: " << e.what() << "\n";
        return Invalid;
    } catch (const DimensionError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return Invalid;
    } catch (const DomainError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return Invalid;
    } catch (const TightnessNotAchieved& e) {
        std::cerr << e.what() << "\n";
        return NoCertificate;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return Numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Numerical;
    }
    return Invalid;
}
