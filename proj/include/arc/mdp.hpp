#pragma once
// State encoding, action profiles, feasibility, masking and rewards.

#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "arc/environment.hpp"

namespace arc {

enum class ActionKind { Placement = 0, Routing = 1 };
inline constexpr int kNumActionKinds = 2;

enum class ObjectiveKind { MinCost = 0, MaxQuality = 1, LoadBalance = 2 };
inline constexpr int kNumObjectives = 3;

const char* to_string(ActionKind kind);
const char* to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(const std::string& name);

struct Objective {
    ObjectiveKind kind = ObjectiveKind::MinCost;
    std::string profile_text;

    bool operator==(const Objective&) const = default;
};

// The objective profile stored in the static knowledge base for `kind`.
Objective make_objective(ObjectiveKind kind);

struct ActionStep {
    ActionKind kind = ActionKind::Placement;
    int block = 0;
};

// Placement of every functional block in chain order, then one routing
// step connecting the user's attach node to the host of block 0.
struct ActionProfile {
    std::vector<ActionStep> steps;
};

ActionProfile action_profile(const ServiceSpec& service);

struct ActionDecision {
    int user = 0;
    ActionKind kind = ActionKind::Placement;
    int block = 0;
    std::optional<NodeId> node;
    std::vector<NodeId> path;
    double compute_amount = 0.0;
    double capacity_amount = 0.0;
    // Position in the deciding agent's action space (node id or route rank).
    int action_index = -1;

    bool operator==(const ActionDecision&) const = default;
};

std::string describe(const ActionDecision& decision);

// Fixed layout of the state vector for a scenario:
//   per node:         compute available, compute cost
//   per ordered pair: link present, capacity available, latency, cost
//   per user:         request flag, attach node, demand, rate, host, granted rate
struct StateLayout {
    int num_nodes = 0;
    int num_users = 0;

    static constexpr int kNodeFeatures = 2;
    static constexpr int kLinkFeatures = 4;
    static constexpr int kUserFeatures = 6;

    int node_offset(NodeId node) const { return node * kNodeFeatures; }
    int pair_index(NodeId src, NodeId dst) const {
        return src * (num_nodes - 1) + (dst < src ? dst : dst - 1);
    }
    int link_offset(NodeId src, NodeId dst) const {
        return num_nodes * kNodeFeatures + pair_index(src, dst) * kLinkFeatures;
    }
    int user_offset(int user) const {
        return num_nodes * kNodeFeatures + num_nodes * (num_nodes - 1) * kLinkFeatures +
               user * kUserFeatures;
    }
    int size() const { return user_offset(num_users); }

    bool operator==(const StateLayout&) const = default;
};

struct State {
    long slot = 0;
    StateLayout layout;
    std::vector<double> values;

    double request_flag(int user) const { return values[layout.user_offset(user)]; }
    bool operator==(const State&) const = default;
};

struct StateHistory {
    std::deque<State> states;
    Objective objective;

    const State& latest() const { return states.back(); }
    bool empty() const { return states.empty(); }
    std::size_t size() const { return states.size(); }
};

const ServiceSpec& find_service(const std::vector<ServiceSpec>& services, int id);

// Per-user allocation table indexed by user id.
using AllocationTable = std::vector<std::optional<AllocationRecord>>;

// Users whose QoE failed are encoded as if their resources were already
// returned: request flag raised, allocation fields zero, availability
// restored.
State index_state(const Topology& topology, const std::vector<User>& users,
                  const std::vector<ServiceSpec>& services, const AllocationTable& allocations,
                  const std::vector<bool>& qoe_met);

struct DecisionLimits {
    int max_hops = 4;
    int route_limit = 16;
};

inline int action_count(ActionKind kind, int num_nodes, const DecisionLimits& limits) {
    return kind == ActionKind::Placement ? num_nodes : limits.route_limit;
}

// Feasible decisions in action-index order. Routing needs the host chosen by
// the preceding placement step.
std::vector<ActionDecision> feasible_decisions(const Topology& topology, const User& user,
                                               const ServiceSpec& service, ActionStep step,
                                               std::optional<NodeId> host,
                                               const DecisionLimits& limits);

struct MaskedState {
    ActionKind kind = ActionKind::Placement;
    std::vector<double> values;
    // Indexed by action; nullopt where the action is infeasible.
    std::vector<std::optional<ActionDecision>> decisions;

    std::vector<int> feasible_indices() const;
};

int masked_dimension(int num_nodes);

MaskedState mask_state(const StateHistory& history, const Topology& topology, const User& user,
                       const ServiceSpec& service, ActionStep step, std::optional<NodeId> host,
                       const Objective& objective, const DecisionLimits& limits);

struct RewardRecord {
    int user = 0;
    std::vector<std::pair<ActionDecision, double>> per_action;
    double total = 0.0;
};

struct RewardDefinitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Cost units a decision consumes on `topology`.
double allocated_cost(const Topology& topology, const ActionDecision& decision);
double allocation_cost(const Topology& topology, const AllocationRecord& allocation);

// Reward of one decision under `objective`, evaluated on the topology as it
// stands after the decision's grant.
double action_reward(const Topology& topology, const ActionDecision& decision,
                     const Objective& objective, double rate_requirement);

// One record per user, in order of first appearance in `decisions`.
// qoe_met is indexed by user id.
std::vector<RewardRecord> compute_reward(const std::vector<ActionDecision>& decisions,
                                         const Objective& objective,
                                         const std::vector<bool>& qoe_met,
                                         const Topology& topology,
                                         const std::vector<User>& users,
                                         const std::vector<ServiceSpec>& services);

}  // namespace arc
