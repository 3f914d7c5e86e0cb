#pragma once
#include <optional>
#include <string>
#include <vector>
#include "relloc/distance.hpp"
#include "relloc/harness.hpp"
#include "relloc/position.hpp"

// Config parsing (JSON), MPC measurement file ingestion/emission (CSV), and
// report CSV writing.

namespace relloc {

// One side's measured MPC: delay plus optional direction and error sigma.
struct MpcEntry {
    int mpc_index = 0;
    double delay_ns = 0;
    std::optional<Vec3> dir;
    std::optional<double> sigma_ns;
};

struct Observation {
    std::vector<std::vector<MpcEntry>> side_a; // indexed by observer
    std::vector<std::vector<MpcEntry>> side_b;

    // Pair rows by (observer, mpc index); throws CountMismatch when the
    // per-observer counts or indices differ.
    DeltaObservation to_delta_observation() const;
    PosObservation to_pos_observation() const; // requires directions
    NoAssocInput to_noassoc_input() const;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);

Observation read_mpc_file(const std::string& path);
void write_mpc_file(const Observation& obs, const std::string& path);

void write_report_csv(const RmseReport& report, const std::string& path);
std::string report_csv_text(const RmseReport& report);

} // namespace relloc
