#pragma once
// Outer planning tier: the order in which requesting users are allocated.

#include <chrono>
#include <string>
#include <vector>

#include "arc/oracle.hpp"
#include "arc/rag.hpp"
#include "arc/sequence.hpp"

namespace arc {

struct SequencerContext {
    const Topology& topology;
    const std::vector<User>& users;  // indexed by id
    const std::vector<ServiceSpec>& services;
    const Objective& objective;
    DecisionLimits limits;
    OracleBounds bounds;
    ChatEndpoint endpoint;
    std::chrono::milliseconds deadline{10000};
};

// Best reward each user could get alone on the current topology (0 when
// nothing is feasible).
double best_single_user_reward(const Topology& topology, const User& user, const ServiceSpec& service,
                               const Objective& objective, const DecisionLimits& limits);

// Users by best single-user reward, descending; ties by ascending id.
std::vector<int> heuristic_order(const std::vector<int>& user_ids, const SequencerContext& context);

// User ids in first-mention order, unknown and repeated ids dropped, missing
// ids appended in `fallback` order. Always a permutation of `expected`.
std::vector<int> parse_sequence(const std::string& response, const std::vector<int>& expected,
                                const std::vector<int>& fallback);

// Oracle beyond its bounds and remote failures fall back to the heuristic;
// backend_used reports what actually produced the order.
Sequence sequence_users(const AllocationPrompt& prompt, Backend backend, const SequencerContext& context);

}  // namespace arc
