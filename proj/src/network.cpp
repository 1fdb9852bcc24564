#include "cloudopf/network.hpp"

#include <cmath>
#include <set>

namespace cloudopf {

std::vector<std::vector<int>> NetworkCase::gens_at_bus() const {
    std::vector<std::vector<int>> at(buses.size());
    for (int g = 0; g < n_generators(); ++g) at[generators[g].bus].push_back(g);
    return at;
}

int NetworkCase::slack_generator() const {
    for (int g = 0; g < n_generators(); ++g)
        if (generators[g].bus == slack_bus) return g;
    return -1;
}

std::vector<int> NetworkCase::pq_buses() const {
    std::vector<int> out;
    for (int i = 0; i < n_buses(); ++i)
        if (buses[i].kind == BusKind::PQ) out.push_back(i);
    return out;
}

int NetworkCase::bus_index(int original_id) const {
    for (int i = 0; i < n_buses(); ++i)
        if (buses[i].id == original_id) return i;
    return -1;
}

double NetworkCase::total_pd() const {
    double s = 0.0;
    for (int i = 0; i < n_buses(); ++i) s += pd(i);
    return s;
}

void validate(const NetworkCase& net) {
    if (!(net.base_mva > 0.0)) throw ValidationError("base_mva must be positive");
    if (net.buses.empty()) throw ValidationError("case has no buses");

    std::set<int> ids;
    int slack_count = 0;
    for (int i = 0; i < net.n_buses(); ++i) {
        const Bus& b = net.buses[i];
        if (!ids.insert(b.id).second) throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.vmin > b.vmax) throw ValidationError("bus " + std::to_string(b.id) + ": vmin > vmax");
        if (b.kind == BusKind::Slack) ++slack_count;
    }
    if (slack_count != 1) throw ValidationError("case must have exactly one slack bus, found " + std::to_string(slack_count));
    if (net.slack_bus < 0 || net.slack_bus >= net.n_buses() || net.buses[net.slack_bus].kind != BusKind::Slack)
        throw ValidationError("slack_bus index does not point at the slack bus");

    for (const Branch& br : net.branches) {
        if (br.from_bus < 0 || br.from_bus >= net.n_buses() || br.to_bus < 0 || br.to_bus >= net.n_buses())
            throw ValidationError("branch references a nonexistent bus");
        if (br.x == 0.0) throw ValidationError("branch with zero series reactance");
        if (br.s_max < 0.0) throw ValidationError("branch with negative s_max");
        if (!(br.tap_ratio > 0.0)) throw ValidationError("branch with non-positive tap ratio");
    }

    std::vector<int> gens_per_bus(net.buses.size(), 0);
    for (const Generator& g : net.generators) {
        if (g.bus < 0 || g.bus >= net.n_buses()) throw ValidationError("generator references a nonexistent bus");
        if (g.pmin > g.pmax) throw ValidationError("generator with pmin > pmax");
        if (g.qmin > g.qmax) throw ValidationError("generator with qmin > qmax");
        if (g.cost_a < 0.0) throw ValidationError("generator with negative quadratic cost");
        ++gens_per_bus[g.bus];
    }
    for (int i = 0; i < net.n_buses(); ++i) {
        bool has_gen = gens_per_bus[i] > 0;
        bool gen_kind = net.buses[i].kind != BusKind::PQ;
        if (has_gen != gen_kind)
            throw ValidationError("bus " + std::to_string(net.buses[i].id) +
                                  ": kind/generator mismatch (PV or slack iff a generator is attached)");
    }
    if (!(net.demand_scale > 0.0)) throw ValidationError("demand_scale must be positive");
}

NetworkCase scale_loading(const NetworkCase& net, double factor) {
    if (!(factor > 0.0)) throw InvalidFactor("loading factor must be positive");
    NetworkCase out = net;
    out.demand_scale = net.demand_scale * factor;
    return out;
}

NetworkCase with_extra_demand(const NetworkCase& net, const std::vector<double>& pd_extra) {
    if (int(pd_extra.size()) != net.n_buses()) throw DimensionMismatch("pd_extra size != bus count");
    NetworkCase out = net;
    out.demand_scale = 1.0;
    for (int i = 0; i < net.n_buses(); ++i) {
        out.buses[i].pd_base = net.pd(i) + pd_extra[i];
        out.buses[i].qd_base = net.qd(i);
    }
    return out;
}

}  // namespace cloudopf
