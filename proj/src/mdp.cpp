#include "arc/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace arc {

namespace {

double unit_clamp(double v) { return std::clamp(v, 0.0, 1.0); }

double norm_compute(double v) { return unit_clamp(v / kMaxCompute); }
double norm_node_cost(double v) { return unit_clamp((v - kMinCompute) / (kMaxCompute - kMinCompute)); }
double norm_capacity(double v) { return unit_clamp(v / kMaxLinkCapacity); }
double norm_latency(double v) { return unit_clamp((v - kMinLatency) / (kMaxLatency - kMinLatency)); }
double norm_link_cost(double v) {
    return unit_clamp((v - kMinLinkCapacity) / (kMaxLinkCapacity - kMinLinkCapacity));
}
double norm_demand(double v) { return unit_clamp((v - 2.0) / 3.0); }

double total_demand(const ServiceSpec& service) {
    double d = 0.0;
    for (const auto& b : service.blocks) d += b.compute_demand;
    return d;
}

const ServiceSpec& service_of(const std::vector<ServiceSpec>& services, const User& user) {
    return find_service(services, user.service);
}

double mean_node_cost(const Topology& t) {
    double sum = 0.0;
    for (const Node& n : t.nodes) sum += n.compute_cost;
    return t.nodes.empty() ? 0.0 : sum / static_cast<double>(t.nodes.size());
}

double mean_link_cost(const Topology& t) {
    double sum = 0.0;
    for (const Link& l : t.links) sum += l.cost;
    return t.links.empty() ? 0.0 : sum / static_cast<double>(t.links.size());
}

double stddev(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

const ServiceSpec& find_service(const std::vector<ServiceSpec>& services, int id) {
    for (const auto& s : services) {
        if (s.id == id) return s;
    }
    throw std::out_of_range("unknown service " + std::to_string(id));
}

const char* to_string(ActionKind kind) {
    return kind == ActionKind::Placement ? "placement" : "routing";
}

const char* to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::MinCost: return "MinCost";
        case ObjectiveKind::MaxQuality: return "MaxQuality";
        case ObjectiveKind::LoadBalance: return "LoadBalance";
    }
    return "?";
}

ObjectiveKind parse_objective_kind(const std::string& name) {
    if (name == "MinCost") return ObjectiveKind::MinCost;
    if (name == "MaxQuality") return ObjectiveKind::MaxQuality;
    if (name == "LoadBalance") return ObjectiveKind::LoadBalance;
    throw std::invalid_argument("unknown objective " + name);
}

Objective make_objective(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::MinCost:
            return {kind,
                    "Minimizing Cost: prioritize users with lower capacity requirements and select "
                    "resources with the lowest associated cost, a normalized sum of energy "
                    "consumption and monetary price."};
        case ObjectiveKind::MaxQuality:
            return {kind,
                    "Maximizing Quality: focus on users with stringent QoE demands and assign them "
                    "to resources that offer superior performance."};
        case ObjectiveKind::LoadBalance:
            return {kind,
                    "Load Balancing: ensure an even distribution of resource usage across the "
                    "infrastructure nodes and links."};
    }
    throw std::invalid_argument("objective kind");
}

ActionProfile action_profile(const ServiceSpec& service) {
    ActionProfile profile;
    for (std::size_t b = 0; b < service.blocks.size(); ++b) {
        profile.steps.push_back({ActionKind::Placement, static_cast<int>(b)});
    }
    profile.steps.push_back({ActionKind::Routing, 0});
    return profile;
}

std::string describe(const ActionDecision& d) {
    std::ostringstream os;
    os << "u" << d.user << " " << to_string(d.kind);
    if (d.kind == ActionKind::Placement) {
        os << " block " << d.block << " on n" << d.node.value_or(-1) << " (" << d.compute_amount
           << " MIPS)";
    } else {
        os << " via ";
        for (std::size_t i = 0; i < d.path.size(); ++i) os << (i ? "-" : "") << "n" << d.path[i];
        os << " (" << d.capacity_amount << " Mbps)";
    }
    return os.str();
}

State index_state(const Topology& topology, const std::vector<User>& users,
                  const std::vector<ServiceSpec>& services, const AllocationTable& allocations,
                  const std::vector<bool>& qoe_met) {
    State state;
    state.slot = topology.slot;
    state.layout = {topology.num_nodes(), static_cast<int>(users.size())};
    state.values.assign(state.layout.size(), 0.0);
    const int n = topology.num_nodes();

    // Discarded allocations are added back to availability.
    std::vector<double> compute(n);
    for (const Node& node : topology.nodes) compute[node.id] = node.compute_available;
    std::vector<double> reserved(topology.links.size());
    for (std::size_t i = 0; i < topology.links.size(); ++i) reserved[i] = topology.links[i].reserved;

    auto is_kept = [&](const User& u) {
        return u.status == UserStatus::Served && u.id < static_cast<int>(allocations.size()) &&
               allocations[u.id].has_value() && u.id < static_cast<int>(qoe_met.size()) &&
               qoe_met[u.id];
    };
    for (const User& u : users) {
        if (u.status != UserStatus::Served || is_kept(u)) continue;
        if (u.id >= static_cast<int>(allocations.size()) || !allocations[u.id]) continue;
        const AllocationRecord& a = *allocations[u.id];
        for (std::size_t b = 0; b < a.hosts.size(); ++b) {
            compute[a.hosts[b]] = std::min(topology.nodes[a.hosts[b]].compute_capacity,
                                           compute[a.hosts[b]] + a.compute[b]);
        }
        for (std::size_t i = 0; i + 1 < a.path.size(); ++i) {
            const int li = topology.link_index(a.path[i], a.path[i + 1]);
            if (li >= 0) reserved[li] = std::max(0.0, reserved[li] - a.capacity_amount);
        }
    }

    for (const Node& node : topology.nodes) {
        const int o = state.layout.node_offset(node.id);
        state.values[o] = norm_compute(compute[node.id]);
        state.values[o + 1] = norm_node_cost(node.compute_cost);
    }
    for (std::size_t i = 0; i < topology.links.size(); ++i) {
        const Link& l = topology.links[i];
        const int o = state.layout.link_offset(l.src, l.dst);
        state.values[o] = 1.0;
        state.values[o + 1] = norm_capacity(std::max(0.0, l.capacity - reserved[i]));
        state.values[o + 2] = norm_latency(l.latency);
        state.values[o + 3] = norm_link_cost(l.cost);
    }
    for (const User& u : users) {
        const ServiceSpec& service = service_of(services, u);
        const int o = state.layout.user_offset(u.id);
        const bool kept = is_kept(u);
        state.values[o] = kept ? 0.0 : 1.0;
        state.values[o + 1] = n > 1 ? static_cast<double>(u.attach_node) / (n - 1) : 0.0;
        state.values[o + 2] = norm_demand(total_demand(service));
        state.values[o + 3] = norm_capacity(service.rate_requirement);
        if (kept) {
            const AllocationRecord& a = *allocations[u.id];
            state.values[o + 4] = a.hosts.empty() ? 0.0 : static_cast<double>(a.hosts[0] + 1) / n;
            state.values[o + 5] = norm_capacity(a.capacity_amount);
        }
    }
    return state;
}

std::vector<ActionDecision> feasible_decisions(const Topology& topology, const User& user,
                                               const ServiceSpec& service, ActionStep step,
                                               std::optional<NodeId> host,
                                               const DecisionLimits& limits) {
    std::vector<ActionDecision> out;
    if (step.kind == ActionKind::Placement) {
        const double demand = service.blocks.at(step.block).compute_demand;
        for (const Node& node : topology.nodes) {
            if (node.id == user.attach_node) continue;
            if (node.compute_available + kCapacityEpsilon < demand) continue;
            ActionDecision d;
            d.user = user.id;
            d.kind = ActionKind::Placement;
            d.block = step.block;
            d.node = node.id;
            d.compute_amount = demand;
            d.action_index = node.id;
            out.push_back(d);
        }
        return out;
    }
    if (!host) throw std::invalid_argument("routing needs a placed host");
    const auto routes =
        candidate_routes(topology, user.attach_node, *host, limits.max_hops, limits.route_limit);
    for (std::size_t i = 0; i < routes.size(); ++i) {
        const Path& p = routes[i];
        if (p.hops() < 1) continue;
        if (p.bottleneck_available + kCapacityEpsilon < service.rate_requirement) continue;
        ActionDecision d;
        d.user = user.id;
        d.kind = ActionKind::Routing;
        d.path = p.nodes;
        d.capacity_amount = service.rate_requirement;
        d.action_index = static_cast<int>(i);
        out.push_back(d);
    }
    return out;
}

std::vector<int> MaskedState::feasible_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (decisions[i]) out.push_back(static_cast<int>(i));
    }
    return out;
}

// [node block 3N][link block 4N(N-1)][attach one-hot N][host one-hot N]
// [demand, rate][objective one-hot]
int masked_dimension(int n) { return 3 * n + 4 * n * (n - 1) + 2 * n + 2 + kNumObjectives; }

MaskedState mask_state(const StateHistory& history, const Topology& topology, const User& user,
                       const ServiceSpec& service, ActionStep step, std::optional<NodeId> host,
                       const Objective& objective, const DecisionLimits& limits) {
    if (history.empty()) throw std::invalid_argument("mask_state on empty history");
    const State& state = history.latest();
    const StateLayout& layout = state.layout;
    const int n = layout.num_nodes;
    if (n != topology.num_nodes()) throw std::invalid_argument("state/topology node count mismatch");

    MaskedState masked;
    masked.kind = step.kind;
    masked.values.assign(masked_dimension(n), 0.0);
    masked.decisions.assign(action_count(step.kind, n, limits), std::nullopt);

    const auto feasible = feasible_decisions(topology, user, service, step, host, limits);
    for (const auto& d : feasible) masked.decisions[d.action_index] = d;

    std::vector<char> node_on(n, 0);
    std::vector<char> link_on(static_cast<std::size_t>(n) * n, 0);
    if (step.kind == ActionKind::Placement) {
        for (const auto& d : feasible) node_on[*d.node] = 1;
        for (const Link& l : topology.links) {
            if (l.capacity_available + kCapacityEpsilon >= service.rate_requirement) {
                link_on[l.src * n + l.dst] = 1;
            }
        }
    } else {
        for (const auto& d : feasible) {
            for (std::size_t i = 0; i < d.path.size(); ++i) {
                node_on[d.path[i]] = 1;
                if (i + 1 < d.path.size()) link_on[d.path[i] * n + d.path[i + 1]] = 1;
            }
        }
    }

    auto& v = masked.values;
    for (NodeId j = 0; j < n; ++j) {
        if (!node_on[j]) continue;
        const int so = layout.node_offset(j);
        v[3 * j] = 1.0;
        v[3 * j + 1] = state.values[so];
        v[3 * j + 2] = state.values[so + 1];
    }
    const int link_base = 3 * n;
    for (NodeId a = 0; a < n; ++a) {
        for (NodeId b = 0; b < n; ++b) {
            if (a == b || !link_on[a * n + b]) continue;
            const int so = layout.link_offset(a, b);
            const int mo = link_base + layout.pair_index(a, b) * StateLayout::kLinkFeatures;
            for (int f = 0; f < StateLayout::kLinkFeatures; ++f) v[mo + f] = state.values[so + f];
        }
    }
    const int ctx = link_base + 4 * n * (n - 1);
    v[ctx + user.attach_node] = 1.0;
    if (step.kind == ActionKind::Routing && host) v[ctx + n + *host] = 1.0;
    v[ctx + 2 * n] = norm_demand(service.blocks.at(step.block).compute_demand);
    v[ctx + 2 * n + 1] = norm_capacity(service.rate_requirement);
    v[ctx + 2 * n + 2 + static_cast<int>(objective.kind)] = 1.0;
    return masked;
}

double allocated_cost(const Topology& topology, const ActionDecision& d) {
    if (d.kind == ActionKind::Placement) {
        const Node& node = topology.nodes.at(*d.node);
        return node.compute_cost * d.compute_amount / node.compute_capacity;
    }
    double cost = 0.0;
    for (std::size_t i = 0; i + 1 < d.path.size(); ++i) {
        const Link* l = topology.find_link(d.path[i], d.path[i + 1]);
        if (l == nullptr) throw RewardDefinitionError("decision path uses a missing link");
        cost += l->cost;
    }
    return cost;
}

double allocation_cost(const Topology& topology, const AllocationRecord& a) {
    double cost = 0.0;
    for (std::size_t b = 0; b < a.hosts.size(); ++b) {
        const Node& node = topology.nodes.at(a.hosts[b]);
        cost += node.compute_cost * a.compute[b] / node.compute_capacity;
    }
    for (std::size_t i = 0; i + 1 < a.path.size(); ++i) {
        const Link* l = topology.find_link(a.path[i], a.path[i + 1]);
        if (l != nullptr) cost += l->cost;
    }
    return cost;
}

double action_reward(const Topology& topology, const ActionDecision& d, const Objective& objective,
                     double rate_requirement) {
    switch (objective.kind) {
        case ObjectiveKind::MinCost: {
            const double spent = allocated_cost(topology, d);
            if (spent <= 0.0) throw RewardDefinitionError("zero allocated cost");
            const double mean =
                d.kind == ActionKind::Placement ? mean_node_cost(topology) : mean_link_cost(topology);
            return mean / spent;
        }
        case ObjectiveKind::MaxQuality: {
            if (d.kind == ActionKind::Placement) {
                if (d.compute_amount <= 0.0) throw RewardDefinitionError("zero compute grant");
                return std::min(2.0, topology.nodes.at(*d.node).compute_available / d.compute_amount);
            }
            double bottleneck = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i + 1 < d.path.size(); ++i) {
                const Link* l = topology.find_link(d.path[i], d.path[i + 1]);
                bottleneck = std::min(bottleneck, l ? l->capacity : 0.0);
            }
            if (rate_requirement <= 0.0) return 2.0;
            return std::min(2.0, bottleneck / rate_requirement);
        }
        case ObjectiveKind::LoadBalance: {
            std::vector<double> util;
            if (d.kind == ActionKind::Placement) {
                for (const Node& node : topology.nodes) {
                    util.push_back(1.0 - node.compute_available / node.compute_capacity);
                }
            } else {
                for (const Link& l : topology.links) util.push_back(std::min(1.0, l.reserved / l.capacity));
            }
            return 1.0 - stddev(util);
        }
    }
    throw std::invalid_argument("objective kind");
}

std::vector<RewardRecord> compute_reward(const std::vector<ActionDecision>& decisions,
                                         const Objective& objective,
                                         const std::vector<bool>& qoe_met,
                                         const Topology& topology, const std::vector<User>& users,
                                         const std::vector<ServiceSpec>& services) {
    std::vector<RewardRecord> records;
    for (const ActionDecision& d : decisions) {
        auto it = std::find_if(records.begin(), records.end(),
                               [&](const RewardRecord& r) { return r.user == d.user; });
        if (it == records.end()) {
            records.push_back({d.user, {}, 0.0});
            it = std::prev(records.end());
        }
        const bool met = d.user >= 0 && d.user < static_cast<int>(qoe_met.size()) && qoe_met[d.user];
        double reward = 0.0;
        if (met) {
            const User& user = users.at(d.user);
            reward = action_reward(topology, d, objective, service_of(services, user).rate_requirement);
        }
        it->per_action.emplace_back(d, reward);
        it->total += reward;
    }
    return records;
}

}  // namespace arc
