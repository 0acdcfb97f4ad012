#include "arc/executor.hpp"

#include <stdexcept>

namespace arc {

const char* to_string(Backend backend) {
    switch (backend) {
        case Backend::Oracle: return "oracle";
        case Backend::Heuristic: return "heuristic";
        case Backend::Remote: return "remote";
    }
    return "?";
}

Backend parse_backend(const std::string& name) {
    if (name == "oracle") return Backend::Oracle;
    if (name == "heuristic") return Backend::Heuristic;
    if (name == "remote") return Backend::Remote;
    throw std::invalid_argument("unknown backend " + name);
}

Sequence make_sequence(const std::vector<int>& order, const std::vector<User>& users,
                       const std::vector<ServiceSpec>& services, Backend backend) {
    Sequence seq;
    seq.backend_used = backend;
    for (int u : order) {
        seq.ordered.push_back({u, action_profile(find_service(services, users.at(u).service)).steps});
    }
    return seq;
}

ActionDecision select_action(const Agent& agent, const MaskedState& masked, std::mt19937_64& rng) {
    const std::vector<int> feasible = masked.feasible_indices();
    if (feasible.empty()) throw std::invalid_argument("select_action with no feasible action");
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < agent.epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
        return *masked.decisions[feasible[pick(rng)]];
    }
    const Eigen::VectorXd q = q_forward(agent.acting, masked.values);
    int best = feasible.front();
    for (int a : feasible) {
        if (q[a] > q[best]) best = a;
    }
    return *masked.decisions[best];
}

int AgentPolicy::choose(const MaskedState& masked, const ChoiceContext& context) {
    const Agent* agent = agents_[static_cast<int>(context.step.kind)];
    if (agent == nullptr) throw std::logic_error("no agent for action kind");
    return select_action(*agent, masked, rng_).action_index;
}

std::vector<bool> kept_allocations(const std::vector<User>& users, const AllocationTable& allocations) {
    std::vector<bool> kept(users.size(), false);
    for (const User& u : users) {
        kept[u.id] = u.status == UserStatus::Served && u.id < static_cast<int>(allocations.size()) &&
                     allocations[u.id].has_value();
    }
    return kept;
}

ExecutionResult execute_sequence(const Sequence& sequence, StateHistory& history,
                                 DecisionPolicy& policy, Topology& topology, std::vector<User>& users,
                                 const std::vector<ServiceSpec>& services, AllocationTable& allocations,
                                 const Objective& objective, const DecisionLimits& limits) {
    ExecutionResult result;
    if (allocations.size() < users.size()) allocations.resize(users.size());
    for (const SequenceEntry& entry : sequence.ordered) {
        User& user = users.at(entry.user);
        const ServiceSpec& service = find_service(services, user.service);

        AllocationRecord record;
        record.user = user.id;
        record.slot = topology.slot;
        record.hosts.assign(service.blocks.size(), -1);
        record.compute.assign(service.blocks.size(), 0.0);
        std::vector<StepRecord> steps;
        bool failed = false;
        const Topology before = topology;

        for (const ActionStep& step : entry.steps) {
            const std::optional<NodeId> host =
                step.kind == ActionKind::Routing ? std::optional<NodeId>(record.hosts.at(0)) : std::nullopt;
            const MaskedState masked =
                mask_state(history, topology, user, service, step, host, objective, limits);
            if (masked.feasible_indices().empty()) {
                failed = true;
                break;
            }
            const ChoiceContext ctx{topology, user, service, step, host, objective, limits};
            const int action = policy.choose(masked, ctx);
            if (action < 0 || action >= static_cast<int>(masked.decisions.size()) ||
                !masked.decisions[action]) {
                throw std::logic_error("policy chose an infeasible action");
            }
            const ActionDecision& d = *masked.decisions[action];
            if (d.kind == ActionKind::Placement) {
                topology.reserve_compute(*d.node, d.compute_amount);
                record.hosts[d.block] = *d.node;
                record.compute[d.block] = d.compute_amount;
            } else {
                for (std::size_t i = 0; i + 1 < d.path.size(); ++i) {
                    topology.reserve_link(d.path[i], d.path[i + 1], d.capacity_amount);
                }
                record.path = d.path;
                record.capacity_amount = d.capacity_amount;
            }
            steps.push_back({user.id, d.kind, masked.values, action, d});
        }

        if (failed) {
            topology = before;
            user.status = UserStatus::Unsupported;
            allocations[user.id].reset();
            result.unsupported.push_back(user.id);
        } else {
            user.status = UserStatus::Served;
            allocations[user.id] = record;
            result.served.push_back(user.id);
            for (StepRecord& s : steps) {
                result.decisions.push_back(s.decision);
                result.steps.push_back(std::move(s));
            }
        }

        State refreshed = index_state(topology, users, services, allocations,
                                      kept_allocations(users, allocations));
        refreshed.slot = history.latest().slot;
        history.states.back() = std::move(refreshed);
    }
    return result;
}

}  // namespace arc
