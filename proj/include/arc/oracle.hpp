#pragma once
// Exhaustive ground truth for small instances.

#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "arc/knowledge.hpp"
#include "arc/mdp.hpp"

namespace arc {

struct InstanceTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OracleBounds {
    int max_users = 4;
    int max_nodes = 6;
};

// One complete allocation for one user: a placement per block then routing.
struct UserOption {
    int user = 0;
    std::vector<ActionDecision> decisions;
};

// Options feasible on `topology` as it stands, hosts ascending then route rank.
std::vector<UserOption> enumerate_user_options(const Topology& topology, const User& user,
                                               const ServiceSpec& service, const DecisionLimits& limits);

// Grants the option on `topology` and returns its reward, each action
// evaluated right after its own grant.
double apply_option(Topology& topology, const UserOption& option, const Objective& objective,
                    const ServiceSpec& service);

struct UserAssignment {
    int user = 0;
    std::optional<UserOption> option;  // nullopt: unsupported
    double reward = 0.0;
};

struct OptimalResult {
    std::vector<UserAssignment> assignment;  // in input user order
    double total_reward = 0.0;
    int supported = 0;
    // Supported users by decreasing reward (ties ascending id), then
    // unsupported users ascending.
    std::vector<int> ordering;
};

// Orders assignments the way OptimalResult::ordering is defined.
std::vector<int> decreasing_reward_order(const std::vector<UserAssignment>& assignment);

// Greedy execution along `order`: each user takes its best-reward feasible
// option (ties: first enumerated) on the topology left by earlier users.
OptimalResult greedy_allocate(Topology topology, const std::vector<User>& users,
                              const std::vector<ServiceSpec>& services, const Objective& objective,
                              const std::vector<int>& order, const DecisionLimits& limits);

// Lexicographic optimum (supported users, then total reward) by exhaustive
// branch and bound. Ties keep the first assignment in enumeration order.
OptimalResult optimal_allocation(const Topology& topology, const std::vector<User>& users,
                                 const std::vector<ServiceSpec>& services, const Objective& objective,
                                 const DecisionLimits& limits, const OracleBounds& bounds = {});

struct TheoremCheck {
    std::vector<int> ordering;
    bool holds = false;
    double optimal_total = 0.0;
    double greedy_total = 0.0;
};

TheoremCheck verify_sequence_theorem(const Topology& topology, const std::vector<User>& users,
                                     const std::vector<ServiceSpec>& services, const Objective& objective,
                                     const DecisionLimits& limits, double tolerance = 1e-9);

struct Instance {
    Topology topology;
    std::vector<User> users;
    std::vector<ServiceSpec> services;
};

// Seeded small instance: 2..max_nodes nodes, 1..max_users users, reference
// parameter ranges.
Instance random_instance(std::mt19937_64& rng, int max_users = 4, int max_nodes = 5);

// Stores n exemplars for (history, objective): ceil(n/3) from the optimum,
// ceil(n/3) greedy, the rest random. Each draws a random subset of at most
// bounds.max_users requesting users.
int bootstrap_exemplars(KnowledgeBase& dkb, const StateHistory& history, const Topology& topology,
                        const std::vector<User>& users, const std::vector<ServiceSpec>& services,
                        const Objective& objective, int n, const DecisionLimits& limits,
                        const OracleBounds& bounds, std::mt19937_64& rng);

// Reasoning exemplar for an executed assignment, rewards via compute_reward
// with every listed user's QoE met.
ReasoningExemplar exemplar_from_assignment(const StateHistory& history, const Objective& objective,
                                           const std::vector<UserAssignment>& assignment,
                                           const std::vector<int>& order, const Topology& granted,
                                           const std::vector<User>& users,
                                           const std::vector<ServiceSpec>& services);

// Cheapest cost to serve `user` alone on a fully available topology
// (nullopt when nothing is feasible even then).
std::optional<double> contention_free_cost(const Topology& topology, const User& user,
                                           const ServiceSpec& service, const DecisionLimits& limits);

// Exact minimum total cost serving every user in `users` on a fully
// available copy of `topology`; nullopt when no joint assignment exists.
std::optional<double> min_cost_allocation(const Topology& topology, const std::vector<User>& users,
                                          const std::vector<ServiceSpec>& services,
                                          const DecisionLimits& limits, const OracleBounds& bounds = {});

// Copy of `topology` with every reservation returned.
Topology fully_available(Topology topology);

}  // namespace arc
