#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gridcf {

struct Bus {
    int id = 0;                    // external bus number from the case file
    int type = 1;                  // MATPOWER bus type (1 PQ, 2 PV, 3 ref)
    double nominal_load = 0.0;     // MW, >= 0
    // Negative Pd rows in the source file are carried as a constant injection
    // (MW, >= 0) so that the perturbable demand stays non-negative.
    double fixed_injection = 0.0;

    bool operator==(const Bus&) const = default;
};

struct Generator {
    std::size_t bus = 0;  // internal bus index
    double p_min = 0.0;   // MW
    double p_max = 0.0;   // MW
    double cost_linear = 0.0;     // $/MWh
    double cost_quadratic = 0.0;  // $/MWh^2, parsed but unused by dispatch

    bool operator==(const Generator&) const = default;
};

struct Branch {
    std::size_t from_bus = 0;  // internal bus index
    std::size_t to_bus = 0;
    double susceptance = 0.0;  // per unit, 1/x
    double flow_limit = 0.0;   // MW
    bool unlimited = false;    // rateA was 0; flow_limit holds the sentinel

    bool operator==(const Branch&) const = default;
};

// Immutable description of a network. Bus order follows the source file and
// is the index order used by every profile and LP in the library.
struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Generator> generators;
    std::vector<Branch> branches;
    std::size_t slack_bus = 0;

    std::size_t bus_count() const { return buses.size(); }
    std::vector<double> nominal_loads() const;
    double total_generation_capacity() const;
    // Internal index of an external bus number; throws IndexError.
    std::size_t bus_index(int id) const;

    bool operator==(const NetworkCase&) const = default;
};

struct ParseOptions {
    double line_limit_scale = 1.0;
    // rateA == 0 maps to sentinel_factor * sum(p_max).
    double sentinel_factor = 10.0;
};

NetworkCase parse_case(std::string_view text, const ParseOptions& options = {});
NetworkCase parse_case(std::string_view text, double line_limit_scale);
NetworkCase load_case_file(const std::string& path, double line_limit_scale = 1.0);

// Multiplies every finite (non-sentinel) branch limit by `factor`.
NetworkCase scale_line_limits(const NetworkCase& c, double factor);

// Sum of flow limits over the branches touching `bus`.
double incident_line_capacity(const NetworkCase& c, std::size_t bus);

nlohmann::json case_to_json(const NetworkCase& c);
NetworkCase case_from_json(const nlohmann::json& j);

}  // namespace gridcf
