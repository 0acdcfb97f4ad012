#pragma once
// Serial execution of a user sequence: per user, each action step is decided
// on a masked view of the latest state and granted immediately.

#include <array>
#include <random>
#include <vector>

#include "arc/crl.hpp"
#include "arc/sequence.hpp"

namespace arc {

// With probability epsilon a uniform feasible action, otherwise the
// feasible action with the highest acting-network Q (ties: lowest index).
ActionDecision select_action(const Agent& agent, const MaskedState& masked, std::mt19937_64& rng);

struct ChoiceContext {
    const Topology& topology;
    const User& user;
    const ServiceSpec& service;
    ActionStep step;
    std::optional<NodeId> host;
    const Objective& objective;
    const DecisionLimits& limits;
};

// Picks one feasible action index for a step.
class DecisionPolicy {
public:
    virtual ~DecisionPolicy() = default;
    virtual int choose(const MaskedState& masked, const ChoiceContext& context) = 0;
};

class AgentPolicy : public DecisionPolicy {
public:
    AgentPolicy(std::array<Agent*, kNumActionKinds> agents, std::mt19937_64& rng)
        : agents_(agents), rng_(rng) {}
    int choose(const MaskedState& masked, const ChoiceContext& context) override;

private:
    std::array<Agent*, kNumActionKinds> agents_;
    std::mt19937_64& rng_;
};

struct StepRecord {
    int user = 0;
    ActionKind kind = ActionKind::Placement;
    std::vector<double> masked;
    int action = 0;
    ActionDecision decision;
};

struct ExecutionResult {
    std::vector<ActionDecision> decisions;
    // Steps of users that ended up served, in execution order.
    std::vector<StepRecord> steps;
    std::vector<int> served;
    std::vector<int> unsupported;
};

// Processes users in order. Granted users become Served with their
// allocation recorded; a user with an empty feasible set at any step is
// rolled back and marked Unsupported. The latest state of `history` is
// re-indexed after each user.
ExecutionResult execute_sequence(const Sequence& sequence, StateHistory& history,
                                 DecisionPolicy& policy, Topology& topology, std::vector<User>& users,
                                 const std::vector<ServiceSpec>& services, AllocationTable& allocations,
                                 const Objective& objective, const DecisionLimits& limits);

// Keep-flags for index_state: Served users holding an allocation.
std::vector<bool> kept_allocations(const std::vector<User>& users, const AllocationTable& allocations);

}  // namespace arc
