#pragma once

#include <string>
#include <vector>

#include "cloudopf/errors.hpp"

namespace cloudopf {

enum class BusKind { PQ, PV, Slack };  // Slack is the single theta-V reference bus

struct Bus {
    int id = 0;             // original case-file id, for reporting
    BusKind kind = BusKind::PQ;
    double pd_base = 0.0;   // demand at loading 1.0 (p.u.)
    double qd_base = 0.0;
    double vmin = 0.9;
    double vmax = 1.1;
    double gs = 0.0;        // shunt conductance (p.u. at V=1)
    double bs = 0.0;        // shunt susceptance (p.u. at V=1)
};

struct Branch {
    int from_bus = 0;       // internal bus index
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;  // total line charging susceptance
    double tap_ratio = 1.0;
    double phase_shift = 0.0;  // radians
    double s_max = 0.0;        // apparent-power limit, 0 = unlimited

    bool limited() const { return s_max > 0.0; }
};

struct Generator {
    int bus = 0;            // internal bus index
    double pmin = 0.0, pmax = 0.0;
    double qmin = 0.0, qmax = 0.0;
    double cost_a = 0.0;    // $/h per p.u.^2
    double cost_b = 0.0;    // $/h per p.u.
    double cost_c = 0.0;    // $/h
    double v_setpoint = 1.0;
    double pg_init = 0.0;   // case-file dispatch, used for power-flow defaults
    double qg_init = 0.0;
};

// Immutable after construction/validation; demands are stored at loading 1.0
// together with a multiplier so that repeated scale_loading composes exactly.
struct NetworkCase {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    int slack_bus = -1;          // internal index
    double demand_scale = 1.0;

    int n_buses() const { return int(buses.size()); }
    int n_branches() const { return int(branches.size()); }
    int n_generators() const { return int(generators.size()); }

    double pd(int bus) const { return buses[bus].pd_base * demand_scale; }
    double qd(int bus) const { return buses[bus].qd_base * demand_scale; }

    // generators attached to each bus, in generator order
    std::vector<std::vector<int>> gens_at_bus() const;
    // the generator that absorbs the slack residual (first at the slack bus)
    int slack_generator() const;
    std::vector<int> pq_buses() const;
    int bus_index(int original_id) const;  // -1 if unknown

    double total_pd() const;
};

// Throws ValidationError when an invariant does not hold.
void validate(const NetworkCase& net);

// Copy with every bus demand multiplied by factor (> 0, else InvalidFactor).
NetworkCase scale_loading(const NetworkCase& net, double factor);

// Copy with extra active demand added per bus (used to apply sample deviations).
NetworkCase with_extra_demand(const NetworkCase& net, const std::vector<double>& pd_extra);

}  // namespace cloudopf
