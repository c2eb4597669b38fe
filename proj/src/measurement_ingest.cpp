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

#include "ebitcert/measurement_ingest.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ebitcert {

using nlohmann::json;

VisibilityEstimate visibility_from_extrema(double c_max, double c_min) {
    if (!(std::isfinite(c_max) && std::isfinite(c_min)) || c_min < 0.0 || c_max < c_min) {
        throw InputError("extrema need c_max >= c_min >= 0");
    }
    const double total = c_max + c_min;
    if (total == 0.0) throw InputError("no signal: both extrema are zero");
    VisibilityEstimate out;
    out.v = (c_max - c_min) / total;
    // dV/dc_max = 2 c_min / T^2, dV/dc_min = -2 c_max / T^2, Var(c) = c.
    out.sigma = std::sqrt(4.0 * c_max * c_min / (total * total * total));
    return out;
}

VisibilityEstimate visibility_from_scan(const PhaseScanRecord& rec) {
    const auto& s = rec.samples;
    if (s.size() < 5) throw InputError("phase scan needs at least 5 samples, got " + std::to_string(s.size()));
    double lo = s.front().phase;
    double hi = lo;
    for (const auto& p : s) {
        if (!(std::isfinite(p.phase) && std::isfinite(p.count) && p.count >= 0.0)) {
            throw InputError("phase scan sample has a non-finite phase or negative count");
        }
        if (!(p.seconds > 0.0)) throw InputError("phase scan integration time must be positive");
        lo = std::min(lo, p.phase);
        hi = std::max(hi, p.phase);
    }
    if (hi - lo <= M_PI) throw InputError("phase scan must span more than half a fringe (pi rad)");

    // Weighted normal equations for counts = seconds * (a + c1 cos + c2 sin).
    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (const auto& p : s) {
        const Eigen::Vector3d row = p.seconds * Eigen::Vector3d(1.0, std::cos(p.phase), std::sin(p.phase));
        const double w = 1.0 / std::max(p.count, 1.0);
        normal += w * row * row.transpose();
        rhs += w * p.count * row;
    }
    Eigen::LDLT<Eigen::Matrix3d> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || std::abs(normal.determinant()) < 1e-300) {
        throw InputError("phase scan fit is singular; phases do not resolve the fringe");
    }
    const Eigen::Vector3d theta = ldlt.solve(rhs);
    const Eigen::Matrix3d cov = ldlt.solve(Eigen::Matrix3d::Identity());
    if (!theta.allFinite()) throw InputError("phase scan fit failed");

    const double a = theta(0);
    if (!(a > 0.0)) throw InputError("phase scan fit has non-positive mean rate");
    const double amp = std::hypot(theta(1), theta(2));

    Eigen::Vector3d grad;
    if (amp > 0.0) {
        grad << -amp / (a * a), theta(1) / (amp * a), theta(2) / (amp * a);
    } else {
        // At zero amplitude the modulus is not differentiable; use the mean
        // variance of the two quadratures.
        VisibilityEstimate flat;
        flat.sigma = std::sqrt(0.5 * (cov(1, 1) + cov(2, 2))) / a;
        return flat;
    }
    VisibilityEstimate out;
    out.v = std::clamp(amp / a, 0.0, 1.0);
    out.sigma = std::sqrt(std::max(0.0, grad.dot(cov * grad)));
    return out;
}

double offdiag_from_visibility(double v, double diag_j, double diag_k) { return v * 0.5 * (diag_j + diag_k); }

double visibility_from_offdiag(double x_jk, double diag_j, double diag_k) { return 2.0 * x_jk / (diag_j + diag_k); }

CarEstimate car_from_histogram(const CoincidenceHistogram& h) {
    double diag_sum = 0.0;
    double off_sum = 0.0;
    int diag_n = 0;
    int off_n = 0;
    for (const auto& [key, count] : h.counts) {
        if (key.first == key.second) {
            diag_sum += static_cast<double>(count);
            ++diag_n;
        } else {
            off_sum += static_cast<double>(count);
            ++off_n;
        }
    }
    if (diag_n == 0 || off_n == 0) {
        throw InputError("histogram needs at least one diagonal and one off-diagonal entry");
    }
    const double diag_mean = diag_sum / diag_n;
    if (!(diag_mean > 0.0)) throw InputError("histogram has no diagonal coincidences");
    if (off_sum == 0.0) return {diag_mean, true};
    return {diag_mean / (off_sum / off_n), false};
}

std::string to_string(Experiment e) { return e == Experiment::TimeBin ? "time-bin" : "energy-time"; }

Experiment experiment_from_string(const std::string& s) {
    if (s == "time-bin") return Experiment::TimeBin;
    if (s == "energy-time") return Experiment::EnergyTime;
    throw InputError("experiment must be 'time-bin' or 'energy-time', got '" + s + "'");
}

ConstraintSet Measurement::constraints() const {
    ConstraintSet cs;
    cs.n = n_modes;
    const double scale = 1.0 / std::sqrt(sigma_runs);

    std::vector<double> diag(static_cast<size_t>(std::max(n_modes, 0)), 1.0);
    std::vector<std::optional<double>> diag_sigma(diag.size());
    for (const auto& d : diagonal) {
        if (d.j >= 1 && d.j <= n_modes) {
            diag[static_cast<size_t>(d.j - 1)] = d.value;
            diag_sigma[static_cast<size_t>(d.j - 1)] = d.sigma * scale;
        }
    }
    if (experiment == Experiment::TimeBin || !diagonal.empty()) {
        for (int j = 1; j <= n_modes; ++j) {
            const auto idx = static_cast<size_t>(j - 1);
            cs.constraints.emplace_back(
                PinElement{ModeIndex(j), ModeIndex(j), diag[idx], diag_sigma[idx].value_or(0.0)});
        }
    }
    for (const auto& v : visibilities) {
        const int j = std::min(v.j, v.k);
        const int k = std::max(v.j, v.k);
        double dj = 1.0;
        double dk = 1.0;
        if (j >= 1 && j <= n_modes) dj = diag[static_cast<size_t>(j - 1)];
        if (k >= 1 && k <= n_modes) dk = diag[static_cast<size_t>(k - 1)];
        cs.constraints.emplace_back(PinElement{ModeIndex(j), ModeIndex(k), offdiag_from_visibility(v.v, dj, dk),
                                               offdiag_from_visibility(v.sigma * scale, dj, dk)});
    }
    for (const auto& b : band_averages) {
        cs.constraints.emplace_back(BandMean{b.offset, b.v, b.sigma * scale});
    }
    cs.constraints.emplace_back(DiagMean{1.0});
    return cs;
}

NoiseModel Measurement::noise() const { return NoiseModel{car, car_convention}; }

namespace {

class FieldReader {
public:
    FieldReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw InputError("measurement schema: " + path(key) + ": " + msg);
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    void allow_only(std::initializer_list<const char*> keys) const {
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [key, _] : obj_.items()) {
            if (!allowed.contains(key)) fail(key, "unknown field");
        }
    }

    double number(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) fail(key, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(key, "expected a finite number");
        return d;
    }

    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<int>();
    }

    std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    const json& array(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array()) fail(key, "expected an array");
        return v;
    }

    std::string path(const std::string& key) const {
        if (key.empty()) return where_.empty() ? "<root>" : where_;
        return where_.empty() ? key : where_ + "." + key;
    }

private:
    const json& at(const std::string& key) const {
        if (!obj_.contains(key)) fail(key, "missing required field");
        return obj_.at(key);
    }

    const json& obj_;
    std::string where_;
};

double parse_car(const json& doc) {
    const json& v = doc.at("car");
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw InputError("measurement schema: car: expected a number or \"inf\"");
    }
    if (!v.is_number() || !(v.get<double>() > 0.0)) {
        throw InputError("measurement schema: car: expected a positive number or \"inf\"");
    }
    return v.get<double>();
}

}  // namespace

Measurement parse_measurement(const json& doc) {
    FieldReader root(doc, "");
    root.allow_only({"experiment", "n_modes", "car", "car_convention", "diagonal", "visibilities", "band_averages",
                     "pin_slack", "sigma_runs", "notes"});
    Measurement m;
    try {
        m.experiment = experiment_from_string(root.string("experiment"));
    } catch (const InputError& e) {
        root.fail("experiment", e.what());
    }
    m.n_modes = root.integer("n_modes");
    if (m.n_modes < 1) root.fail("n_modes", "must be at least 1");
    if (!root.has("car")) root.fail("car", "missing required field");
    m.car = parse_car(doc);
    if (root.has("car_convention")) {
        try {
            m.car_convention = car_convention_from_string(root.string("car_convention"));
        } catch (const InputError& e) {
            root.fail("car_convention", e.what());
        }
    }
    if (root.has("pin_slack")) {
        try {
            m.pin_slack = slack_mode_from_string(root.string("pin_slack"));
        } catch (const InputError& e) {
            root.fail("pin_slack", e.what());
        }
    }
    m.sigma_runs = root.number_or("sigma_runs", 1.0);
    if (!(m.sigma_runs >= 1.0)) root.fail("sigma_runs", "must be at least 1");
    if (root.has("notes")) m.notes = root.string("notes");

    auto entries = [&](const std::string& key, auto&& parse_one) {
        if (!root.has(key)) return;
        const json& arr = root.array(key);
        for (size_t i = 0; i < arr.size(); ++i) {
            parse_one(FieldReader(arr[i], key + "[" + std::to_string(i) + "]"));
        }
    };
    auto check_sigma = [](const FieldReader& r, double sigma) {
        if (sigma < 0.0) r.fail("sigma", "must be non-negative");
    };
    auto check_mode = [&](const FieldReader& r, const std::string& key, int j) {
        if (j < 1 || j > m.n_modes) r.fail(key, "mode index outside 1.." + std::to_string(m.n_modes));
    };

    entries("diagonal", [&](const FieldReader& r) {
        r.allow_only({"j", "value", "sigma"});
        DiagonalEntry d{r.integer("j"), r.number("value"), r.number_or("sigma", 0.0)};
        check_mode(r, "j", d.j);
        if (!(d.value > 0.0)) r.fail("value", "diagonal intensity must be positive");
        check_sigma(r, d.sigma);
        m.diagonal.push_back(d);
    });
    entries("visibilities", [&](const FieldReader& r) {
        r.allow_only({"j", "k", "v", "sigma"});
        VisibilityEntry v{r.integer("j"), r.integer("k"), r.number("v"), r.number_or("sigma", 0.0)};
        check_mode(r, "j", v.j);
        check_mode(r, "k", v.k);
        if (v.j == v.k) r.fail("k", "visibility needs two distinct modes");
        if (v.v < 0.0 || v.v > 1.0) r.fail("v", "visibility must lie in [0, 1]");
        check_sigma(r, v.sigma);
        m.visibilities.push_back(v);
    });
    entries("band_averages", [&](const FieldReader& r) {
        r.allow_only({"offset", "v", "sigma"});
        BandEntry b{r.integer("offset"), r.number("v"), r.number_or("sigma", 0.0)};
        if (b.offset < 1 || b.offset >= m.n_modes) {
            r.fail("offset", "band offset must lie in 1.." + std::to_string(m.n_modes - 1));
        }
        if (b.v < -1.0 || b.v > 1.0) r.fail("v", "band visibility must lie in [-1, 1]");
        check_sigma(r, b.sigma);
        m.band_averages.push_back(b);
    });

    if (m.visibilities.empty() && m.band_averages.empty()) {
        root.fail("", "no visibilities or band_averages given");
    }
    if (m.experiment == Experiment::TimeBin && !m.band_averages.empty()) {
        root.fail("band_averages", "time-bin files carry per-pair visibilities");
    }
    if (m.experiment == Experiment::EnergyTime && !m.visibilities.empty()) {
        root.fail("visibilities", "energy-time files carry band averages");
    }
    return m;
}

json to_json(const Measurement& m) {
    json doc;
    doc["experiment"] = to_string(m.experiment);
    doc["n_modes"] = m.n_modes;
    if (std::isinf(m.car)) {
        doc["car"] = "inf";
    } else {
        doc["car"] = m.car;
    }
    doc["car_convention"] = to_string(m.car_convention);
    if (m.pin_slack) doc["pin_slack"] = to_string(*m.pin_slack);
    if (m.sigma_runs != 1.0) doc["sigma_runs"] = m.sigma_runs;
    if (!m.notes.empty()) doc["notes"] = m.notes;
    if (!m.diagonal.empty()) {
        json arr = json::array();
        for (const auto& d : m.diagonal) arr.push_back({{"j", d.j}, {"value", d.value}, {"sigma", d.sigma}});
        doc["diagonal"] = arr;
    }
    if (!m.visibilities.empty()) {
        json arr = json::array();
        for (const auto& v : m.visibilities) arr.push_back({{"j", v.j}, {"k", v.k}, {"v", v.v}, {"sigma", v.sigma}});
        doc["visibilities"] = arr;
    }
    if (!m.band_averages.empty()) {
        json arr = json::array();
        for (const auto& b : m.band_averages) arr.push_back({{"offset", b.offset}, {"v", b.v}, {"sigma", b.sigma}});
        doc["band_averages"] = arr;
    }
    return doc;
}

Measurement load_measurement_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open measurement file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("measurement file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_measurement(doc);
}

void save_measurement_file(const Measurement& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write measurement file " + path.string());
    out << to_json(m).dump(2) << "\n";
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& header) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw InputError(path.string() + ":1: expected header '" + header + "'");

    const auto columns = static_cast<size_t>(std::count(header.begin(), header.end(), ',') + 1);
    std::vector<std::vector<std::string>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != columns) {
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                             " columns");
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

template <class T>
T parse_cell(const std::string& cell, const std::filesystem::path& path, size_t row) {
    T value{};
    std::istringstream ss(cell);
    ss >> value;
    if (ss.fail() || !ss.eof()) {
        throw InputError(path.string() + ":" + std::to_string(row + 2) + ": cannot parse '" + cell + "'");
    }
    return value;
}

}  // namespace

CoincidenceHistogram load_histogram_csv(const std::filesystem::path& path) {
    CoincidenceHistogram h;
    const auto rows = read_csv(path, "j,k,count");
    for (size_t r = 0; r < rows.size(); ++r) {
        const int j = parse_cell<int>(rows[r][0], path, r);
        const int k = parse_cell<int>(rows[r][1], path, r);
        const auto count = parse_cell<std::uint64_t>(rows[r][2], path, r);
        if (j < 1 || k < 1) throw InputError(path.string() + ":" + std::to_string(r + 2) + ": mode labels are 1-based");
        h.counts[{j, k}] += count;
    }
    return h;
}

PhaseScanRecord load_phase_scan_csv(const std::filesystem::path& path) {
    PhaseScanRecord rec;
    const auto rows = read_csv(path, "phase,count,seconds");
    for (size_t r = 0; r < rows.size(); ++r) {
        rec.samples.push_back(
            {parse_cell<double>(rows[r][0], path, r), parse_cell<double>(rows[r][1], path, r),
             parse_cell<double>(rows[r][2], path, r)});
    }
    return rec;
}

}  // namespace ebitcert
