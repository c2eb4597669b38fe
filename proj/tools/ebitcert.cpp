// Copyright 2026 The ebitcert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ebitcert/entanglement_bound.hpp"
#include "ebitcert/measurement_ingest.hpp"
#include "ebitcert/parallel.hpp"
#include "ebitcert/synthetic_source.hpp"
#include "ebitcert/uncertainty.hpp"
#include "ebitcert/window_scan.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#ifndef EBITCERT_VERSION
#define EBITCERT_VERSION "0.0.0"
#endif

namespace {

using namespace ebitcert;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitMaxIter = 3;

struct Options {
    std::string input;
    std::string out;
    std::string csv;
    int jobs = 0;
    double tol = 1e-8;
    int max_iter = 50000;
    std::string car_convention;
    std::string pin_slack;
    std::optional<std::uint64_t> seed;
    std::optional<int> n;
    int start = 1;
    std::optional<int> n_min;
    std::optional<int> n_max;
    int trials = 200;
    // simulate
    double mean_counts = 1e4;
    double integration = 1.0;
    int phase_points = 8;
    std::string experiment = "time-bin";
    std::string offsets;
};

std::string g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Parses "12..29", "1,2" or a mix such as "1,3..5".
std::vector<int> parse_offsets(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            const auto dots = part.find("..");
            if (dots == std::string::npos) {
                out.push_back(std::stoi(part));
            } else {
                const int lo = std::stoi(part.substr(0, dots));
                const int hi = std::stoi(part.substr(dots + 2));
                if (lo > hi) throw InputError("offset range " + part + " is empty");
                for (int i = lo; i <= hi; ++i) out.push_back(i);
            }
        } catch (const std::logic_error&) {
            throw InputError("cannot parse offsets '" + text + "'");
        }
    }
    return out;
}

json to_json(const SolverDiagnostics& d) {
    return {{"iterations", d.iterations},
            {"primal_residual", d.primal_residual},
            {"dual_residual", d.dual_residual},
            {"min_eigenvalue", d.min_eigenvalue},
            {"constraint_residual", d.constraint_residual},
            {"objective", d.objective},
            {"objective_margined", d.objective_margined},
            {"pin_slack", d.pin_slack},
            {"face_dimension", d.face_dimension},
            {"status", to_string(d.status)}};
}

json to_json(const SolverConfig& c) {
    return {{"tol_eq", c.tol_eq},
            {"tol_psd", c.tol_psd},
            {"max_iter", c.max_iter},
            {"rho", c.rho},
            {"balance_ratio", c.balance_ratio},
            {"balance_factor", c.balance_factor},
            {"balance_interval", c.balance_interval},
            {"relaxation", c.relaxation},
            {"anderson_memory", c.anderson_memory},
            {"anderson_restart", c.anderson_restart},
            {"slack", to_string(c.slack)},
            {"slack_headroom", c.slack_headroom},
            {"infeasibility_tol", c.infeasibility_tol},
            {"face_tol", c.face_tol}};
}

json to_json(const CertificationResult& r, bool with_matrix) {
    json j = {{"n", r.n},
              {"window_start", r.window_start.value()},
              {"b", r.b},
              {"b_raw", r.b_raw},
              {"eof_ebits", r.eof_ebits},
              {"eof_raw_ebits", r.eof_raw_ebits},
              {"concurrence", r.concurrence},
              {"d_min", r.d_min},
              {"diagnostics", to_json(r.diagnostics)}};
    if (with_matrix) {
        json rows = json::array();
        const auto& x = r.completed.entries();
        for (Eigen::Index a = 0; a < x.rows(); ++a) {
            json row = json::array();
            for (Eigen::Index b = 0; b < x.cols(); ++b) row.push_back(x(a, b));
            rows.push_back(row);
        }
        j["completed"] = rows;
    }
    return j;
}

json to_json(const ScanResult& s) {
    json j;
    j["best"] = s.best_entry() ? to_json(*s.best_entry(), true) : json(nullptr);
    json curve = json::array();
    for (const auto& p : s.curve) {
        curve.push_back({{"n", p.n},
                         {"eof", p.eof},
                         {"start", p.start.value()},
                         {"eof_sigma", p.eof_sigma ? json(*p.eof_sigma) : json(nullptr)}});
    }
    j["curve"] = curve;
    json entries = json::array();
    for (const auto& e : s.entries) {
        entries.push_back({{"n", e.n},
                           {"start", e.window_start.value()},
                           {"eof_ebits", e.eof_ebits},
                           {"status", to_string(e.diagnostics.status)},
                           {"iterations", e.diagnostics.iterations}});
    }
    j["entries"] = entries;
    return j;
}

json to_json(const McResult& m) {
    return {{"mean", m.mean},
            {"sd", m.sd},
            {"feasible", m.feasible},
            {"infeasible", m.infeasible},
            {"max_iter", m.max_iter},
            {"trials", m.trials.size()}};
}

int exit_code(SolverStatus s) {
    switch (s) {
        case SolverStatus::Converged: return kExitOk;
        case SolverStatus::Infeasible: return kExitInfeasible;
        case SolverStatus::MaxIter: return kExitMaxIter;
    }
    return kExitInput;
}

struct Loaded {
    Measurement measurement;
    ConstraintSet cs;
    NoiseModel noise;
    CertifyConfig certify;
    std::string digest;
};

Loaded load(const Options& o) {
    Loaded l;
    const std::string bytes = read_file(o.input);
    l.digest = sha256_hex(bytes);
    try {
        l.measurement = parse_measurement(json::parse(bytes));
    } catch (const json::parse_error& e) {
        throw InputError(o.input + " is not valid JSON: " + e.what());
    }
    if (!o.car_convention.empty()) l.measurement.car_convention = car_convention_from_string(o.car_convention);
    if (!o.pin_slack.empty()) l.measurement.pin_slack = slack_mode_from_string(o.pin_slack);
    l.cs = l.measurement.constraints();
    l.noise = l.measurement.noise();
    l.certify.solver.tol_eq = o.tol;
    l.certify.solver.tol_psd = o.tol;
    l.certify.solver.max_iter = o.max_iter;
    l.certify.solver.slack = l.measurement.pin_slack.value_or(SlackMode::Strict);
    return l;
}

json base_report(const std::string& command, const Options& o, const Loaded& l) {
    json config = {{"car", std::isinf(l.noise.car) ? json("inf") : json(l.noise.car)},
                   {"car_convention", to_string(l.noise.convention)},
                   {"solver", to_json(l.certify.solver)},
                   {"jobs", resolve_jobs(o.jobs)}};
    return {{"schema_version", 1},
            {"tool", "ebitcert"},
            {"version", EBITCERT_VERSION},
            {"command", command},
            {"input", {{"path", o.input}, {"sha256", l.digest}}},
            {"config", config}};
}

void write_report(const Options& o, json report, std::chrono::steady_clock::time_point t0) {
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.out.empty()) return;
    std::ofstream out(o.out);
    if (!out) throw InputError("cannot write report " + o.out);
    out << report.dump(2) << "\n";
}

void write_csv(const std::string& path, const std::function<void(std::ostream&)>& body) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    body(out);
}

void print_result(const CertificationResult& r) {
    std::cout << "window      n = " << r.n << ", start = " << r.window_start.value() << "\n"
              << "status      " << to_string(r.diagnostics.status) << " after " << r.diagnostics.iterations
              << " iterations\n";
    if (!r.converged()) return;
    std::cout << "B           " << g6(r.b) << " (raw " << g6(r.b_raw) << ")\n"
              << "E_oF        " << g6(r.eof_ebits) << " ebits (raw " << g6(r.eof_raw_ebits) << ")\n"
              << "concurrence " << g6(r.concurrence) << "\n"
              << "d_min       " << r.d_min << "\n";
    if (r.diagnostics.pin_slack > 0.0) std::cout << "pin slack   " << g6(r.diagnostics.pin_slack) << "\n";
}

// The window a certify or single-window mc run works on.
ConstraintSet select_window(const Options& o, const ConstraintSet& cs, json& config) {
    const int size = o.n.value_or(cs.n);
    config["n"] = size;
    config["start"] = o.start;
    if (size == cs.n && o.start == 1) return cs;
    return restrict_to_window(cs, ModeIndex(o.start), size);
}

std::pair<int, int> scan_range(const Options& o, const ConstraintSet& cs) {
    return {o.n_min.value_or(2), o.n_max.value_or(cs.n)};
}

int cmd_certify(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const Loaded l = load(o);
    json report = base_report("certify", o, l);
    const ConstraintSet window = select_window(o, l.cs, report["config"]);
    const CertificationResult r = certify(window, l.noise, l.certify, ModeIndex(o.start));
    print_result(r);
    report["result"] = to_json(r, true);
    write_report(o, report, t0);
    return exit_code(r.diagnostics.status);
}

int scan_exit(const ScanResult& s) {
    if (s.best) return kExitOk;
    for (const auto& e : s.entries) {
        if (e.diagnostics.status == SolverStatus::Infeasible) return kExitInfeasible;
    }
    return kExitMaxIter;
}

void print_scan(const ScanResult& s) {
    std::cout << "n     eof        start\n";
    for (const auto& p : s.curve) {
        std::printf("%-5d %-10s %d", p.n, g6(p.eof).c_str(), p.start.value());
        if (p.eof_sigma) std::printf("  +- %s", g6(*p.eof_sigma).c_str());
        std::printf("\n");
    }
    std::fflush(stdout);
    if (const auto* best = s.best_entry()) {
        std::cout << "best\n";
        print_result(*best);
    } else {
        std::cout << "no window converged\n";
    }
}

int cmd_scan(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const Loaded l = load(o);
    json report = base_report("scan", o, l);
    const auto [n_min, n_max] = scan_range(o, l.cs);
    report["config"]["n_min"] = n_min;
    report["config"]["n_max"] = n_max;
    const ScanResult s = scan(l.cs, l.noise, ScanConfig{n_min, n_max, l.certify, o.jobs});
    print_scan(s);
    report["result"] = to_json(s);
    write_csv(o.csv, [&](std::ostream& out) { write_curve_csv(out, s); });
    write_report(o, report, t0);
    return scan_exit(s);
}

std::uint64_t resolve_seed(const Options& o) {
    if (o.seed) return *o.seed;
    std::random_device rd;
    const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cout << "seed        " << seed << " (drawn; pass --seed to reproduce)\n";
    return seed;
}

int cmd_mc(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const Loaded l = load(o);
    json report = base_report("mc", o, l);
    McConfig mc;
    mc.trials = o.trials;
    mc.seed = resolve_seed(o);
    mc.jobs = o.jobs;
    report["config"]["trials"] = mc.trials;
    report["config"]["seed"] = mc.seed;

    const bool scanning = o.n_min || o.n_max;
    McResult result;
    if (scanning) {
        const auto [n_min, n_max] = scan_range(o, l.cs);
        report["config"]["n_min"] = n_min;
        report["config"]["n_max"] = n_max;
        ScanResult nominal = scan(l.cs, l.noise, ScanConfig{n_min, n_max, l.certify, o.jobs});
        result = mc_bound(l.cs, l.noise, mc, l.certify, McScan{n_min, n_max});
        attach_sigma(nominal, result);
        print_scan(nominal);
        report["result"] = to_json(nominal);
    } else {
        const ConstraintSet window = select_window(o, l.cs, report["config"]);
        const CertificationResult nominal = certify(window, l.noise, l.certify, ModeIndex(o.start));
        result = mc_bound(window, l.noise, mc, l.certify);
        print_result(nominal);
        report["result"] = to_json(nominal, true);
    }
    std::cout << "MC          mean " << g6(result.mean) << ", sd " << g6(result.sd) << " over " << result.feasible
              << " feasible of " << result.trials.size() << " trials";
    if (result.infeasible > 0) std::cout << " (" << result.infeasible << " infeasible)";
    if (result.max_iter > 0) std::cout << " (" << result.max_iter << " at the iteration limit)";
    std::cout << "\n";
    report["mc"] = to_json(result);
    write_csv(o.csv, [&](std::ostream& out) { write_trials_csv(out, result); });
    write_report(o, report, t0);
    return kExitOk;
}

int cmd_simulate(const Options& o) {
    const SyntheticStateSpec spec = load_spec_file(o.input);
    if (o.out.empty()) throw InputError("simulate needs --out for the measurement file");
    const Experiment experiment = experiment_from_string(o.experiment);
    std::vector<int> offsets;
    if (o.offsets.empty()) {
        for (int i = 1; i < spec.n; ++i) offsets.push_back(i);
    } else {
        offsets = parse_offsets(o.offsets);
    }
    const std::uint64_t seed = resolve_seed(o);
    const ScanSettings settings{o.mean_counts, o.integration, o.phase_points};
    const SyntheticCounts counts = generate_counts(spec, experiment, offsets, settings, seed);
    Measurement m = measurement_from_counts(counts, spec.n, experiment);
    m.notes = "synthetic: spec " + o.input + " (sha256 " + sha256_hex(read_file(o.input)) + "), seed " +
              std::to_string(seed) + ", mean counts " + g6(o.mean_counts) + ", " + std::to_string(o.phase_points) +
              " phase points";
    save_measurement_file(m, o.out);
    std::cout << "wrote " << o.out << ": " << m.visibilities.size() << " visibilities, " << m.band_averages.size()
              << " band averages, car " << g6(m.car) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certify entanglement of formation and dimensionality from sparse photon-pair data"};
    app.set_version_flag("--version", std::string(EBITCERT_VERSION));
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "JSON report path");
        sub->add_option("--jobs", o.jobs, "Worker threads (0 = available parallelism)")->check(CLI::NonNegativeNumber);
        sub->add_option("--tol", o.tol, "Solver tolerance for residuals")->check(CLI::PositiveNumber);
        sub->add_option("--max-iter", o.max_iter, "Solver iteration limit")->check(CLI::PositiveNumber);
        sub->add_option("--car-convention", o.car_convention, "Override the file's CAR convention")
            ->check(CLI::IsMember({"relative", "absolute"}));
        sub->add_option("--pin-slack", o.pin_slack, "Override the file's slack mode")
            ->check(CLI::IsMember({"strict", "minimal"}));
        sub->add_option("--seed", o.seed, "Random seed");
    };
    auto window = [&](CLI::App* sub) {
        sub->add_option("--n", o.n, "Window size (default: all modes)")->check(CLI::PositiveNumber);
        sub->add_option("--start", o.start, "First mode of the window (1-based)")->check(CLI::PositiveNumber);
    };
    auto range = [&](CLI::App* sub) {
        sub->add_option("--n-min", o.n_min, "Smallest window size");
        sub->add_option("--n-max", o.n_max, "Largest window size");
    };

    auto* certify_cmd = app.add_subcommand("certify", "Certify one window");
    certify_cmd->add_option("file", o.input, "Measurement file")->required();
    common(certify_cmd);
    window(certify_cmd);

    auto* scan_cmd = app.add_subcommand("scan", "Certify every window and report the best");
    scan_cmd->add_option("file", o.input, "Measurement file")->required();
    common(scan_cmd);
    range(scan_cmd);
    scan_cmd->add_option("--csv", o.csv, "Curve CSV path (n,eof,eof_sigma)");

    auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo uncertainty of the bound");
    mc_cmd->add_option("file", o.input, "Measurement file")->required();
    common(mc_cmd);
    window(mc_cmd);
    range(mc_cmd);
    mc_cmd->add_option("--trials", o.trials, "Number of trials")->check(CLI::PositiveNumber);
    mc_cmd->add_option("--csv", o.csv, "Per-trial CSV path (trial,eof,n_best,feasible)");

    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic measurement file from a state spec");
    sim_cmd->add_option("spec", o.input, "State spec file")->required();
    sim_cmd->add_option("--out", o.out, "Measurement file to write")->required();
    sim_cmd->add_option("--seed", o.seed, "Random seed");
    sim_cmd->add_option("--mean-counts", o.mean_counts, "Mean coincidences per bin and scan sample")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--integration", o.integration, "Integration time per sample in seconds")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--phase-points", o.phase_points, "Samples per phase scan");
    sim_cmd->add_option("--experiment", o.experiment, "time-bin or energy-time")
        ->check(CLI::IsMember({"time-bin", "energy-time"}));
    sim_cmd->add_option("--offsets", o.offsets, "Measured offsets, e.g. 1,2 or 12..29 (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*certify_cmd) return cmd_certify(o);
        if (*scan_cmd) return cmd_scan(o);
        if (*mc_cmd) return cmd_mc(o);
        if (*sim_cmd) return cmd_simulate(o);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NoFeasibleTrialsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const InvalidBoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
