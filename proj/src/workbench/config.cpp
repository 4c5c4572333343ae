#include "nqcs/errors.hpp"
#include "nqcs/workbench.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace nqcs::workbench {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void allowOnly(const json& obj, const std::string& path, const std::set<std::string>& keys) {
    if (!obj.is_object()) {
        throw ConfigError("schema", path + ": expected an object");
    }
    for (const auto& [k, v] : obj.items()) {
        if (keys.count(k) == 0) {
            throw ConfigError("schema", join(path, k) + ": unknown key");
        }
    }
}

double number(const json& v, const std::string& path) {
    if (v.is_number()) {
        return v.get<double>();
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") {
            return std::numeric_limits<double>::infinity();
        }
    }
    throw ConfigError("schema", path + ": expected a number");
}

double optNumber(const json& obj, const std::string& path, const std::string& key, double fallback) {
    return obj.contains(key) ? number(obj.at(key), join(path, key)) : fallback;
}

int optInt(const json& obj, const std::string& path, const std::string& key, int fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError("schema", join(path, key) + ": expected an integer");
    }
    return v.get<int>();
}

std::uint64_t optU64(const json& obj, const std::string& path, const std::string& key, std::uint64_t fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError("schema", join(path, key) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

bool optBool(const json& obj, const std::string& path, const std::string& key, bool fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj.at(key).is_boolean()) {
        throw ConfigError("schema", join(path, key) + ": expected true or false");
    }
    return obj.at(key).get<bool>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) {
        throw ConfigError("schema", path + ": expected an array of numbers");
    }
    std::vector<double> out;
    for (size_t i = 0; i < v.size(); ++i) {
        out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

std::vector<int> integers(const json& v, const std::string& path) {
    if (!v.is_array()) {
        throw ConfigError("schema", path + ": expected an array of integers");
    }
    std::vector<int> out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) {
            throw ConfigError("schema", path + "[" + std::to_string(i) + "]: expected an integer");
        }
        out.push_back(v[i].get<int>());
    }
    return out;
}

std::vector<std::vector<int>> integerLists(const json& v, const std::string& path) {
    if (!v.is_array()) {
        throw ConfigError("schema", path + ": expected an array of integer arrays");
    }
    std::vector<std::vector<int>> out;
    for (size_t i = 0; i < v.size(); ++i) {
        out.push_back(integers(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

DenseMatrix matrix(const json& v, const std::string& path) {
    allowOnly(v, path, {"rows", "cols", "data"});
    if (!v.contains("rows") || !v.contains("cols") || !v.contains("data")) {
        throw ConfigError("schema", path + ": matrix needs rows, cols and data");
    }
    const int r = optInt(v, path, "rows", 0);
    const int c = optInt(v, path, "cols", 0);
    if (r < 0 || c < 0) {
        throw ConfigError("matrix-shape", path + ": negative dimension");
    }
    const auto data = numbers(v.at("data"), join(path, "data"));
    if (data.size() != static_cast<size_t>(r) * static_cast<size_t>(c)) {
        throw ConfigError("matrix-shape", path + ": data length must equal rows * cols");
    }
    DenseMatrix m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            m(i, j) = data[static_cast<size_t>(i * c + j)];
        }
    }
    return m;
}

json matrixJson(const DenseMatrix& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            data.push_back(m(i, j));
        }
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

json numberJson(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

json numbersJson(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) {
        a.push_back(numberJson(x));
    }
    return a;
}

std::string protocolName(model::ProtocolKind k) {
    switch (k) {
        case model::ProtocolKind::Quadratic:
            return "quadratic";
        case model::ProtocolKind::TryOnceDiscard:
            return "tod";
        case model::ProtocolKind::Periodic:
            return "periodic";
        case model::ProtocolKind::RoundRobin:
            return "round_robin";
    }
    return "tod";
}

model::ProtocolKind protocolKind(const std::string& s, const std::string& path) {
    if (s == "quadratic") {
        return model::ProtocolKind::Quadratic;
    }
    if (s == "tod") {
        return model::ProtocolKind::TryOnceDiscard;
    }
    if (s == "periodic") {
        return model::ProtocolKind::Periodic;
    }
    if (s == "round_robin") {
        return model::ProtocolKind::RoundRobin;
    }
    throw ConfigError("protocol-kind", path + ": protocol must be tod, quadratic, periodic or round_robin");
}

void readNetwork(const json& j, WorkbenchConfig& c) {
    const std::string p = "network";
    allowOnly(j, p,
              {"nodes", "y_components", "u_components", "direct_y", "direct_u", "epsilon", "h_mati", "tau_mad",
               "tau_min", "distribution", "alpha_bar", "beta_bar", "protocol", "node_scaling"});
    auto& n = c.net;
    n.nodeCount = optInt(j, p, "nodes", 1);
    if (j.contains("y_components")) {
        n.yComponents = integerLists(j.at("y_components"), join(p, "y_components"));
    }
    if (j.contains("u_components")) {
        n.uComponents = integerLists(j.at("u_components"), join(p, "u_components"));
    }
    if (j.contains("direct_y")) {
        n.directY = integers(j.at("direct_y"), join(p, "direct_y"));
    }
    if (j.contains("direct_u")) {
        n.directU = integers(j.at("direct_u"), join(p, "direct_u"));
    }
    n.region.epsilon = optNumber(j, p, "epsilon", 1e-3);
    n.region.hMati = optNumber(j, p, "h_mati", 0.1);
    n.region.tauMad = optNumber(j, p, "tau_mad", 0.05);
    n.region.tauMin = optNumber(j, p, "tau_min", 0.0);
    n.alphaBar = optNumber(j, p, "alpha_bar", 1.0);
    n.betaBar = optNumber(j, p, "beta_bar", 1.0);
    if (j.contains("node_scaling")) {
        n.nodeScaling = numbers(j.at("node_scaling"), join(p, "node_scaling"));
    }
    if (j.contains("distribution")) {
        const json& d = j.at("distribution");
        const std::string dp = join(p, "distribution");
        allowOnly(d, dp, {"kind", "h_edges", "tau_edges", "density"});
        const std::string kind = d.value("kind", std::string("uniform"));
        if (kind == "uniform") {
            n.distribution.kind = model::DistributionSpec::Kind::Uniform;
        } else if (kind == "tabulated") {
            n.distribution.kind = model::DistributionSpec::Kind::Tabulated;
            if (!d.contains("h_edges") || !d.contains("tau_edges") || !d.contains("density")) {
                throw ConfigError("schema", dp + ": tabulated density needs h_edges, tau_edges and density");
            }
            n.distribution.hEdges = numbers(d.at("h_edges"), join(dp, "h_edges"));
            n.distribution.tauEdges = numbers(d.at("tau_edges"), join(dp, "tau_edges"));
            n.distribution.density = matrix(d.at("density"), join(dp, "density"));
        } else {
            throw ConfigError("distribution-kind", dp + ": kind must be uniform or tabulated");
        }
    }
    if (j.contains("protocol")) {
        const json& pr = j.at("protocol");
        const std::string pp = join(p, "protocol");
        allowOnly(pr, pp, {"kind", "sequence", "weights"});
        if (!pr.contains("kind") || !pr.at("kind").is_string()) {
            throw ConfigError("schema", pp + ".kind: expected a string");
        }
        n.protocol.kind = protocolKind(pr.at("kind").get<std::string>(), pp + ".kind");
        if (pr.contains("sequence")) {
            n.protocol.sequence = integers(pr.at("sequence"), join(pp, "sequence"));
        }
        if (pr.contains("weights")) {
            const json& w = pr.at("weights");
            if (!w.is_array()) {
                throw ConfigError("schema", pp + ".weights: expected an array of matrices");
            }
            for (size_t i = 0; i < w.size(); ++i) {
                n.protocol.weights.push_back(matrix(w[i], pp + ".weights[" + std::to_string(i) + "]"));
            }
        }
    }
}

lmi::Multipliers readMultipliers(const json& j, const std::string& path) {
    allowOnly(j, path, {"rho1", "rho2", "rho3", "rho4", "rho5", "rho6"});
    lmi::Multipliers m;
    for (int k = 0; k < 6; ++k) {
        const std::string key = "rho" + std::to_string(k + 1);
        if (j.contains(key)) {
            m.rho[static_cast<size_t>(k)] = numbers(j.at(key), join(path, key));
        }
    }
    return m;
}

}  // namespace

model::Dimensions WorkbenchConfig::dimensions() const {
    model::Dimensions d;
    d.np = plant.states();
    d.nc = controller.states();
    d.ny = plant.outputs();
    d.nu = plant.inputs();
    return d;
}

void WorkbenchConfig::validate() const {
    plant.validate();
    controller.validate(plant);
    const model::Dimensions d = dimensions();
    net.validate(d);
    quantizer.validate(net.nodeCount);
    if (!(procedure.varsigma > 0.0 && procedure.varsigma < 1.0)) {
        throw ConfigError("procedure-varsigma", "procedure.varsigma must lie in (0, 1)");
    }
    if (!(procedure.varpiStar > 0.0)) {
        throw ConfigError("procedure-varpi", "procedure.varpi_star must be positive");
    }
    if (procedure.na < 1 || procedure.nb < 1 || procedure.refinementCap < 0) {
        throw ConfigError("procedure-grid", "procedure.na and procedure.nb must be >= 1, refinement_cap >= 0");
    }
    if (!(lmi.a3 > 2.0 * lmi.a5) || lmi.a5 < 0.0) {
        throw ConfigError("lemma-2", "lmi: need a3 > 2 a5 >= 0");
    }
    if (lmi.gamma2.mode == Gamma2Setting::Mode::Fixed && !(lmi.gamma2.value > lmi.a5)) {
        throw ConfigError("gamma2-range", "lmi.gamma2 must exceed a5");
    }
    if (!(lmi.gamma2Upper > lmi.a5) || !std::isfinite(lmi.gamma2Upper)) {
        throw ConfigError("gamma2-range", "lmi.gamma2_upper must be finite and exceed a5");
    }
    if (!(lmi.gamma2Tolerance > 0.0 && lmi.gamma2Tolerance < 1.0)) {
        throw ConfigError("gamma2-tolerance", "lmi.gamma2_tolerance must lie in (0, 1)");
    }
    if (solver.maxIterations < 1 || !(solver.requestedMargin >= 0.0) || !(solver.radius > 0.0)) {
        throw ConfigError("solver-options", "solver: need max_iterations >= 1, margin >= 0, radius > 0");
    }
    if (simulation.runs < 1 || simulation.horizon < 1) {
        throw ConfigError("simulation-size", "simulation: runs and horizon must be >= 1");
    }
    if (simulation.x0.size() != 0 && simulation.x0.size() != d.nx()) {
        throw ConfigError("simulation-x0", "simulation.x0 must have n_x = n_p + n_c + n_y + n_u entries");
    }
    if (sweep.hMad.empty() || sweep.gamma2.empty()) {
        throw ConfigError("sweep-grid", "sweep grids must not be empty");
    }
    for (double v : sweep.hMad) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ConfigError("sweep-grid", "sweep.h_mad entries must be finite and non-negative");
        }
    }
    for (double v : sweep.gamma2) {
        if (!(v > lmi.a5)) {
            throw ConfigError("sweep-grid", "sweep.gamma2 entries must exceed a5 (use \"inf\" for the ideal case)");
        }
    }
    if (!(sweep.hMatiUpper > 0.0) || !std::isfinite(sweep.hMatiUpper)) {
        throw ConfigError("sweep-bracket", "sweep.h_mati_upper must be positive and finite");
    }
    if (sweep.hMatiLower >= 0.0 && sweep.hMatiLower < net.region.epsilon) {
        throw ConfigError("assumption-1", "sweep.h_mati_lower must not be below epsilon");
    }
    if (!(sweep.relativeTolerance > 0.0 && sweep.relativeTolerance < 1.0)) {
        throw ConfigError("sweep-tolerance", "sweep.relative_tolerance must lie in (0, 1)");
    }
    if (containmentSamples < 0) {
        throw ConfigError("containment-samples", "containment_samples must be >= 0");
    }
    if (workers < 1) {
        throw ConfigError("workers", "workers must be >= 1");
    }
}

WorkbenchConfig parseConfig(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // byte is 1-based and points just past the offending character
        const size_t at = e.byte == 0 ? 0 : e.byte - 1;
        size_t line = 1;
        size_t col = 1;
        for (size_t i = 0; i < at && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string msg = e.what();
        const auto cut = msg.find("; last read");
        if (cut != std::string::npos) {
            msg = msg.substr(0, cut);
        }
        const auto colPos = msg.find("column ");
        const auto colon = colPos == std::string::npos ? std::string::npos : msg.find(": ", colPos);
        if (colon != std::string::npos) {
            msg = msg.substr(colon + 2);
        }
        throw ConfigError("parse", "parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                                       ": " + msg);
    }
    allowOnly(root, "", {"plant", "controller", "network", "quantizer", "procedure", "lmi", "solver", "simulation",
                         "sweep", "containment_samples", "containment_seed", "workers"});
    WorkbenchConfig c;
    for (const char* key : {"plant", "controller", "network", "quantizer"}) {
        if (!root.contains(key)) {
            throw ConfigError("schema", std::string(key) + ": required section is missing");
        }
    }
    {
        const json& p = root.at("plant");
        allowOnly(p, "plant", {"A", "B", "C"});
        for (const char* k : {"A", "B", "C"}) {
            if (!p.contains(k)) {
                throw ConfigError("schema", std::string("plant.") + k + ": required matrix is missing");
            }
        }
        c.plant.A = matrix(p.at("A"), "plant.A");
        c.plant.B = matrix(p.at("B"), "plant.B");
        c.plant.C = matrix(p.at("C"), "plant.C");
    }
    {
        const json& k = root.at("controller");
        allowOnly(k, "controller", {"A", "B", "C", "D"});
        for (const char* m : {"A", "B", "C", "D"}) {
            if (!k.contains(m)) {
                throw ConfigError("schema", std::string("controller.") + m + ": required matrix is missing");
            }
        }
        c.controller.A = matrix(k.at("A"), "controller.A");
        c.controller.B = matrix(k.at("B"), "controller.B");
        c.controller.C = matrix(k.at("C"), "controller.C");
        c.controller.D = matrix(k.at("D"), "controller.D");
    }
    readNetwork(root.at("network"), c);
    {
        const json& q = root.at("quantizer");
        allowOnly(q, "quantizer", {"range", "error_bound", "dead_zone", "zoom", "mu0"});
        for (const char* k : {"range", "error_bound", "dead_zone", "zoom", "mu0"}) {
            if (!q.contains(k)) {
                throw ConfigError("schema", std::string("quantizer.") + k + ": required array is missing");
            }
        }
        c.quantizer.range = numbers(q.at("range"), "quantizer.range");
        c.quantizer.errorBound = numbers(q.at("error_bound"), "quantizer.error_bound");
        c.quantizer.deadZone = numbers(q.at("dead_zone"), "quantizer.dead_zone");
        c.quantizer.zoom = numbers(q.at("zoom"), "quantizer.zoom");
        c.quantizer.mu0 = numbers(q.at("mu0"), "quantizer.mu0");
    }
    if (root.contains("procedure")) {
        const json& p = root.at("procedure");
        const std::string pp = "procedure";
        allowOnly(p, pp, {"varsigma", "varpi_star", "na", "nb", "refinement_cap", "maximizer_resolution"});
        c.procedure.varsigma = optNumber(p, pp, "varsigma", c.procedure.varsigma);
        c.procedure.varpiStar = optNumber(p, pp, "varpi_star", c.procedure.varpiStar);
        c.procedure.na = optInt(p, pp, "na", c.procedure.na);
        c.procedure.nb = optInt(p, pp, "nb", c.procedure.nb);
        c.procedure.refinementCap = optInt(p, pp, "refinement_cap", c.procedure.refinementCap);
        c.procedure.maximizer.resolution = optInt(p, pp, "maximizer_resolution", c.procedure.maximizer.resolution);
    }
    if (root.contains("lmi")) {
        const json& l = root.at("lmi");
        const std::string lp = "lmi";
        allowOnly(l, lp, {"a3", "a5", "common_lyapunov", "gamma2", "gamma2_upper", "gamma2_tolerance", "multipliers"});
        c.lmi.a3 = optNumber(l, lp, "a3", c.lmi.a3);
        c.lmi.a5 = optNumber(l, lp, "a5", c.lmi.a5);
        c.lmi.commonLyapunov = optBool(l, lp, "common_lyapunov", false);
        if (l.contains("gamma2")) {
            const json& g = l.at("gamma2");
            if (g.is_string() && g.get<std::string>() == "minimize") {
                c.lmi.gamma2 = Gamma2Setting{};
            } else {
                const double v = number(g, "lmi.gamma2");
                c.lmi.gamma2 = std::isinf(v) ? Gamma2Setting::ideal() : Gamma2Setting::fixed(v);
            }
        }
        c.lmi.gamma2Upper = optNumber(l, lp, "gamma2_upper", c.lmi.gamma2Upper);
        c.lmi.gamma2Tolerance = optNumber(l, lp, "gamma2_tolerance", c.lmi.gamma2Tolerance);
        if (l.contains("multipliers")) {
            const json& m = l.at("multipliers");
            if (!m.is_array()) {
                throw ConfigError("schema", "lmi.multipliers: expected an array of multiplier sets");
            }
            for (size_t i = 0; i < m.size(); ++i) {
                c.lmi.multiplierDictionary.push_back(readMultipliers(m[i], "lmi.multipliers[" + std::to_string(i) + "]"));
            }
        }
    }
    if (root.contains("solver")) {
        const json& s = root.at("solver");
        const std::string sp = "solver";
        allowOnly(s, sp, {"max_iterations", "margin", "seed", "radius"});
        c.solver.maxIterations = optInt(s, sp, "max_iterations", c.solver.maxIterations);
        c.solver.requestedMargin = optNumber(s, sp, "margin", c.solver.requestedMargin);
        c.solver.seed = optU64(s, sp, "seed", c.solver.seed);
        c.solver.radius = optNumber(s, sp, "radius", c.solver.radius);
    }
    if (root.contains("simulation")) {
        const json& s = root.at("simulation");
        const std::string sp = "simulation";
        allowOnly(s, sp, {"runs", "horizon", "seed", "x0"});
        c.simulation.runs = optInt(s, sp, "runs", c.simulation.runs);
        c.simulation.horizon = optInt(s, sp, "horizon", c.simulation.horizon);
        c.simulation.seed = optU64(s, sp, "seed", c.simulation.seed);
        if (s.contains("x0")) {
            const auto v = numbers(s.at("x0"), "simulation.x0");
            c.simulation.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
    }
    if (root.contains("sweep")) {
        const json& s = root.at("sweep");
        const std::string sp = "sweep";
        allowOnly(s, sp, {"h_mad", "gamma2", "h_mati_lower", "h_mati_upper", "relative_tolerance", "record_runtime"});
        if (s.contains("h_mad")) {
            c.sweep.hMad = numbers(s.at("h_mad"), "sweep.h_mad");
        }
        if (s.contains("gamma2")) {
            c.sweep.gamma2 = numbers(s.at("gamma2"), "sweep.gamma2");
        }
        c.sweep.hMatiLower = optNumber(s, sp, "h_mati_lower", c.sweep.hMatiLower);
        c.sweep.hMatiUpper = optNumber(s, sp, "h_mati_upper", c.sweep.hMatiUpper);
        c.sweep.relativeTolerance = optNumber(s, sp, "relative_tolerance", c.sweep.relativeTolerance);
        c.sweep.recordRuntime = optBool(s, sp, "record_runtime", false);
    }
    c.containmentSamples = optInt(root, "", "containment_samples", c.containmentSamples);
    c.containmentSeed = optU64(root, "", "containment_seed", c.containmentSeed);
    c.workers = optInt(root, "", "workers", c.workers);
    c.validate();
    return c;
}

WorkbenchConfig loadConfig(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("file", "cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parseConfig(ss.str());
}

std::string configJson(const WorkbenchConfig& c) {
    json j;
    j["plant"] = {{"A", matrixJson(c.plant.A)}, {"B", matrixJson(c.plant.B)}, {"C", matrixJson(c.plant.C)}};
    j["controller"] = {{"A", matrixJson(c.controller.A)},
                       {"B", matrixJson(c.controller.B)},
                       {"C", matrixJson(c.controller.C)},
                       {"D", matrixJson(c.controller.D)}};
    json net;
    net["nodes"] = c.net.nodeCount;
    net["y_components"] = c.net.yComponents;
    net["u_components"] = c.net.uComponents;
    net["direct_y"] = c.net.directY;
    net["direct_u"] = c.net.directU;
    net["epsilon"] = c.net.region.epsilon;
    net["h_mati"] = c.net.region.hMati;
    net["tau_mad"] = c.net.region.tauMad;
    net["tau_min"] = c.net.region.tauMin;
    net["alpha_bar"] = c.net.alphaBar;
    net["beta_bar"] = c.net.betaBar;
    net["node_scaling"] = c.net.nodeScaling;
    if (c.net.distribution.kind == model::DistributionSpec::Kind::Uniform) {
        net["distribution"] = {{"kind", "uniform"}};
    } else {
        net["distribution"] = {{"kind", "tabulated"},
                               {"h_edges", c.net.distribution.hEdges},
                               {"tau_edges", c.net.distribution.tauEdges},
                               {"density", matrixJson(c.net.distribution.density)}};
    }
    json proto = {{"kind", protocolName(c.net.protocol.kind)}, {"sequence", c.net.protocol.sequence}};
    json weights = json::array();
    for (const auto& w : c.net.protocol.weights) {
        weights.push_back(matrixJson(w));
    }
    proto["weights"] = weights;
    net["protocol"] = proto;
    j["network"] = net;
    j["quantizer"] = {{"range", c.quantizer.range},
                      {"error_bound", c.quantizer.errorBound},
                      {"dead_zone", c.quantizer.deadZone},
                      {"zoom", c.quantizer.zoom},
                      {"mu0", c.quantizer.mu0}};
    j["procedure"] = {{"varsigma", c.procedure.varsigma},
                      {"varpi_star", c.procedure.varpiStar},
                      {"na", c.procedure.na},
                      {"nb", c.procedure.nb},
                      {"refinement_cap", c.procedure.refinementCap},
                      {"maximizer_resolution", c.procedure.maximizer.resolution}};
    json lmij = {{"a3", c.lmi.a3},
                 {"a5", c.lmi.a5},
                 {"common_lyapunov", c.lmi.commonLyapunov},
                 {"gamma2_upper", c.lmi.gamma2Upper},
                 {"gamma2_tolerance", c.lmi.gamma2Tolerance}};
    switch (c.lmi.gamma2.mode) {
        case Gamma2Setting::Mode::Minimize:
            lmij["gamma2"] = "minimize";
            break;
        case Gamma2Setting::Mode::Ideal:
            lmij["gamma2"] = "inf";
            break;
        case Gamma2Setting::Mode::Fixed:
            lmij["gamma2"] = c.lmi.gamma2.value;
            break;
    }
    json mult = json::array();
    for (const auto& m : c.lmi.multiplierDictionary) {
        json e = json::object();
        for (int k = 0; k < 6; ++k) {
            if (!m.rho[static_cast<size_t>(k)].empty()) {
                e["rho" + std::to_string(k + 1)] = m.rho[static_cast<size_t>(k)];
            }
        }
        mult.push_back(e);
    }
    lmij["multipliers"] = mult;
    j["lmi"] = lmij;
    j["solver"] = {{"max_iterations", c.solver.maxIterations},
                   {"margin", c.solver.requestedMargin},
                   {"seed", c.solver.seed},
                   {"radius", c.solver.radius}};
    std::vector<double> x0(c.simulation.x0.data(), c.simulation.x0.data() + c.simulation.x0.size());
    j["simulation"] = {{"runs", c.simulation.runs},
                       {"horizon", c.simulation.horizon},
                       {"seed", c.simulation.seed},
                       {"x0", x0}};
    j["sweep"] = {{"h_mad", numbersJson(c.sweep.hMad)},
                  {"gamma2", numbersJson(c.sweep.gamma2)},
                  {"h_mati_lower", c.sweep.hMatiLower},
                  {"h_mati_upper", c.sweep.hMatiUpper},
                  {"relative_tolerance", c.sweep.relativeTolerance},
                  {"record_runtime", c.sweep.recordRuntime}};
    j["containment_samples"] = c.containmentSamples;
    j["containment_seed"] = c.containmentSeed;
    j["workers"] = c.workers;
    return j.dump(2);
}

std::string manifestId(const std::string& manifest) {
    // FNV-1a, 64 bit
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : manifest) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string manifestJson(const WorkbenchConfig& config, const std::string& verb) {
    json j;
    j["tool"] = kToolVersion;
    j["verb"] = verb;
    j["seeds"] = {{"simulation", config.simulation.seed},
                  {"solver", config.solver.seed},
                  {"containment", config.containmentSeed}};
    j["workers"] = config.workers;
    j["config"] = json::parse(configJson(config));
    return j.dump(2);
}

}  // namespace nqcs::workbench
