#include "relloc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <json.hpp>

namespace relloc {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& scope) {
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError("unknown key '" + key + "' in " + scope);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("field '") + key +
                              "' has the wrong type");
    }
}

std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt9(double v) { return fmt(v, "%.9g"); }
std::string fmt_full(double v) { return fmt(v, "%.17g"); }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

constexpr const char* kMpcHeader =
    "node,observer,mpc,delay_ns,dir_x,dir_y,dir_z,sigma_ns";
constexpr const char* kReportHeader =
    "sweep_var,sweep_value,estimator,rmse_m,bias_m,median_abs_err_m,trials,"
    "failures,stderr_m";

} // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config root must be an object");

    ExperimentConfig cfg;
    reject_unknown_keys(j,
                        {"channel", "d_m", "sigma_dir_deg", "n_alien",
                         "snr_scale", "sweep", "estimators", "trials", "seed"},
                        "config");
    if (j.contains("channel")) {
        const json& c = j.at("channel");
        if (!c.is_object()) throw ValidationError("channel must be an object");
        reject_unknown_keys(
            c,
            {"n_observers", "k_per_observer", "observer_radius_m", "p_los",
             "gamma_rise_ns", "gamma_1_ns", "omega_1", "chi", "n0", "e1",
             "xi_nlos_db", "bandwidth_ghz", "eps_ns", "clock_offset_range_ns",
             "per_observer_offsets", "excess_truncation_ns"},
            "channel");
        ChannelConfig& ch = cfg.channel;
        read_field(c, "n_observers", ch.n_observers);
        read_field(c, "k_per_observer", ch.k_per_observer);
        read_field(c, "observer_radius_m", ch.observer_radius_m);
        read_field(c, "p_los", ch.p_los);
        read_field(c, "gamma_rise_ns", ch.gamma_rise_ns);
        read_field(c, "gamma_1_ns", ch.gamma_1_ns);
        read_field(c, "omega_1", ch.omega_1);
        read_field(c, "chi", ch.chi);
        read_field(c, "n0", ch.n0);
        read_field(c, "e1", ch.e1);
        read_field(c, "xi_nlos_db", ch.xi_nlos_db);
        read_field(c, "bandwidth_ghz", ch.bandwidth_ghz);
        read_field(c, "eps_ns", ch.eps_ns);
        read_field(c, "clock_offset_range_ns", ch.clock_offset_range_ns);
        read_field(c, "per_observer_offsets", ch.per_observer_offsets);
        read_field(c, "excess_truncation_ns", ch.excess_truncation_ns);
    }
    read_field(j, "d_m", cfg.d_m);
    read_field(j, "sigma_dir_deg", cfg.sigma_dir_deg);
    read_field(j, "n_alien", cfg.n_alien);
    read_field(j, "snr_scale", cfg.snr_scale);
    read_field(j, "trials", cfg.trials);
    read_field(j, "seed", cfg.base_seed);
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        if (!s.is_object()) throw ValidationError("sweep must be an object");
        reject_unknown_keys(s, {"var", "grid"}, "sweep");
        std::string var = sweep_var_name(cfg.sweep_var);
        read_field(s, "var", var);
        cfg.sweep_var = sweep_var_from_name(var);
        read_field(s, "grid", cfg.grid);
    } else {
        cfg.grid = {cfg.d_m};
    }
    if (j.contains("estimators")) {
        std::vector<std::string> names;
        read_field(j, "estimators", names);
        cfg.estimators.clear();
        for (const auto& n : names)
            cfg.estimators.push_back(estimator_from_name(n));
    }
    try {
        cfg.validate();
    } catch (const ConfigInvalid& e) {
        throw ValidationError(e.what());
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {

void append_entry(std::vector<std::vector<MpcEntry>>& side, int observer,
                  const MpcEntry& e) {
    if (int(side.size()) <= observer) side.resize(size_t(observer) + 1);
    side[size_t(observer)].push_back(e);
}

struct PairedView {
    std::vector<std::vector<std::pair<MpcEntry, MpcEntry>>> groups;
};

PairedView pair_by_index(const Observation& obs) {
    if (obs.side_a.size() != obs.side_b.size())
        throw CountMismatch("observer counts differ between sides");
    PairedView pv;
    for (size_t o = 0; o < obs.side_a.size(); ++o) {
        if (obs.side_a[o].size() != obs.side_b[o].size())
            throw CountMismatch("per-observer A/B MPC counts differ");
        std::map<int, MpcEntry> bmap;
        for (const auto& e : obs.side_b[o]) bmap[e.mpc_index] = e;
        std::vector<std::pair<MpcEntry, MpcEntry>> g;
        for (const auto& a : obs.side_a[o]) {
            const auto it = bmap.find(a.mpc_index);
            if (it == bmap.end())
                throw CountMismatch("unpaired MPC index on side A");
            g.emplace_back(a, it->second);
        }
        pv.groups.push_back(std::move(g));
    }
    return pv;
}

} // namespace

DeltaObservation Observation::to_delta_observation() const {
    const PairedView pv = pair_by_index(*this);
    DeltaObservation out;
    bool any_sigma = false;
    for (const auto& g : pv.groups)
        for (const auto& [a, b] : g) any_sigma |= a.sigma_ns || b.sigma_ns;
    for (const auto& g : pv.groups) {
        std::vector<double> d, sig;
        for (const auto& [a, b] : g) {
            d.push_back(b.delay_ns - a.delay_ns);
            const double sa = a.sigma_ns.value_or(0.0);
            const double sb = b.sigma_ns.value_or(0.0);
            sig.push_back(std::sqrt(sa * sa + sb * sb));
        }
        out.delta_ns.push_back(std::move(d));
        if (any_sigma) out.sigma_ns.push_back(std::move(sig));
    }
    return out;
}

PosObservation Observation::to_pos_observation() const {
    const PairedView pv = pair_by_index(*this);
    PosObservation out;
    for (size_t o = 0; o < pv.groups.size(); ++o)
        for (const auto& [a, b] : pv.groups[o]) {
            if (!a.dir || !b.dir)
                throw ValidationError(
                    "position estimation needs directions on both sides");
            out.push_back({int(o), a.delay_ns, b.delay_ns, *a.dir, *b.dir});
        }
    return out;
}

NoAssocInput Observation::to_noassoc_input() const {
    if (side_a.size() != side_b.size())
        throw CountMismatch("observer counts differ between sides");
    NoAssocInput in;
    for (size_t o = 0; o < side_a.size(); ++o) {
        if (side_a[o].size() != side_b[o].size())
            throw CountMismatch("per-observer A/B MPC counts differ");
        std::vector<double> a, b, sig;
        bool any_sigma = false;
        for (size_t k = 0; k < side_a[o].size(); ++k) {
            a.push_back(side_a[o][k].delay_ns);
            b.push_back(side_b[o][k].delay_ns);
            const double sa = side_a[o][k].sigma_ns.value_or(0.0);
            const double sb = side_b[o][k].sigma_ns.value_or(0.0);
            any_sigma |= sa > 0 || sb > 0;
            sig.push_back(std::sqrt(sa * sa + sb * sb));
        }
        in.tau_a_ns.push_back(std::move(a));
        in.tau_b_ns.push_back(std::move(b));
        in.sigma_ns.push_back(std::move(sig));
    }
    return in;
}

Observation read_mpc_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open MPC file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw SchemaError("empty MPC file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMpcHeader)
        throw SchemaError("MPC file header must be exactly: " +
                          std::string(kMpcHeader));

    Observation obs;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 8)
            throw SchemaError("line " + std::to_string(lineno) +
                              ": expected 8 cells");
        auto num = [&](const std::string& s, const char* what) {
            try {
                size_t pos = 0;
                const double v = std::stod(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(what);
                return v;
            } catch (const std::exception&) {
                throw SchemaError("line " + std::to_string(lineno) +
                                  ": bad numeric value for " + what);
            }
        };
        const std::string& node = cells[0];
        if (node != "A" && node != "B")
            throw SchemaError("line " + std::to_string(lineno) +
                              ": node must be A or B");
        const int observer = int(num(cells[1], "observer"));
        MpcEntry e;
        e.mpc_index = int(num(cells[2], "mpc"));
        e.delay_ns = num(cells[3], "delay_ns");
        if (observer < 0 || e.mpc_index < 0 || e.delay_ns < 0)
            throw SchemaError("line " + std::to_string(lineno) +
                              ": negative index or delay");
        const bool hx = !cells[4].empty(), hy = !cells[5].empty(),
                   hz = !cells[6].empty();
        if (hx != hy || hy != hz)
            throw SchemaError("line " + std::to_string(lineno) +
                              ": direction cells must be all present or all "
                              "absent");
        if (hx) {
            Vec3 v(num(cells[4], "dir_x"), num(cells[5], "dir_y"),
                   num(cells[6], "dir_z"));
            const double n = v.norm();
            if (n < 1e-12)
                throw SchemaError("line " + std::to_string(lineno) +
                                  ": zero direction vector");
            e.dir = v / n;
        }
        if (!cells[7].empty()) {
            const double s = num(cells[7], "sigma_ns");
            if (s < 0)
                throw SchemaError("line " + std::to_string(lineno) +
                                  ": sigma must be >= 0");
            e.sigma_ns = s;
        }
        append_entry(node == "A" ? obs.side_a : obs.side_b, observer, e);
    }
    if (int(obs.side_a.size()) < int(obs.side_b.size()))
        obs.side_a.resize(obs.side_b.size());
    if (int(obs.side_b.size()) < int(obs.side_a.size()))
        obs.side_b.resize(obs.side_a.size());
    return obs;
}

void write_mpc_file(const Observation& obs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write MPC file: " + path);
    out << kMpcHeader << "\n";
    auto emit = [&](const char* node,
                    const std::vector<std::vector<MpcEntry>>& side) {
        for (size_t o = 0; o < side.size(); ++o)
            for (const auto& e : side[o]) {
                out << node << ',' << o << ',' << e.mpc_index << ','
                    << fmt_full(e.delay_ns) << ',';
                if (e.dir)
                    out << fmt_full(e.dir->x()) << ',' << fmt_full(e.dir->y())
                        << ',' << fmt_full(e.dir->z());
                else
                    out << ",,";
                out << ',';
                if (e.sigma_ns) out << fmt_full(*e.sigma_ns);
                out << "\n";
            }
    };
    emit("A", obs.side_a);
    emit("B", obs.side_b);
    if (!out) throw IoError("failed writing MPC file: " + path);
}

std::string report_csv_text(const RmseReport& report) {
    std::vector<ReportRow> rows = report.rows;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ReportRow& a, const ReportRow& b) {
                         if (a.sweep_value != b.sweep_value)
                             return a.sweep_value < b.sweep_value;
                         return a.estimator < b.estimator;
                     });
    std::string out = std::string(kReportHeader) + "\n";
    for (const auto& r : rows) {
        out += r.sweep_var + ',' + fmt9(r.sweep_value) + ',' + r.estimator +
               ',' + fmt9(r.rmse_m) + ',' + fmt9(r.bias_m) + ',' +
               fmt9(r.median_abs_err_m) + ',' + std::to_string(r.trials) +
               ',' + std::to_string(r.failures) + ',' + fmt9(r.stderr_m) +
               '\n';
    }
    return out;
}

void write_report_csv(const RmseReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << report_csv_text(report);
    if (!out) throw IoError("failed writing report: " + path);
}

} // namespace relloc
