#include "arc/sequencer.hpp"

#include <algorithm>
#include <regex>

namespace arc {

double best_single_user_reward(const Topology& topology, const User& user, const ServiceSpec& service,
                               const Objective& objective, const DecisionLimits& limits) {
    double best = 0.0;
    for (const UserOption& option : enumerate_user_options(topology, user, service, limits)) {
        Topology scratch = topology;
        best = std::max(best, apply_option(scratch, option, objective, service));
    }
    return best;
}

std::vector<int> heuristic_order(const std::vector<int>& user_ids, const SequencerContext& context) {
    std::vector<std::pair<double, int>> scored;
    for (int id : user_ids) {
        const User& u = context.users.at(id);
        scored.emplace_back(best_single_user_reward(context.topology, u, find_service(context.services, u.service),
                                                    context.objective, context.limits),
                            id);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> out;
    for (const auto& [r, id] : scored) out.push_back(id);
    return out;
}

std::vector<int> parse_sequence(const std::string& response, const std::vector<int>& expected,
                                const std::vector<int>& fallback) {
    static const std::regex id_re(R"([uU](\d{1,9}))");
    std::vector<int> out;
    auto wanted = [&](int id) {
        return std::find(expected.begin(), expected.end(), id) != expected.end() &&
               std::find(out.begin(), out.end(), id) == out.end();
    };
    for (auto it = std::sregex_iterator(response.begin(), response.end(), id_re); it != std::sregex_iterator();
         ++it) {
        const int id = std::stoi((*it)[1].str());
        if (wanted(id)) out.push_back(id);
    }
    for (int id : fallback) {
        if (wanted(id)) out.push_back(id);
    }
    for (int id : expected) {
        if (wanted(id)) out.push_back(id);
    }
    return out;
}

Sequence sequence_users(const AllocationPrompt& prompt, Backend backend, const SequencerContext& context) {
    const std::vector<int>& ids = prompt.user_ids;
    std::vector<int> order;
    Backend used = Backend::Heuristic;

    if (backend == Backend::Oracle && static_cast<int>(ids.size()) <= context.bounds.max_users &&
        context.topology.num_nodes() <= context.bounds.max_nodes) {
        std::vector<User> requesting;
        for (int id : ids) requesting.push_back(context.users.at(id));
        order = optimal_allocation(context.topology, requesting, context.services, context.objective,
                                   context.limits, context.bounds)
                    .ordering;
        used = Backend::Oracle;
    } else if (backend == Backend::Remote) {
        const std::string reply = chat_complete(context.endpoint, prompt.serialize(), context.deadline);
        if (reply != kChatFailure) {
            order = parse_sequence(reply, ids, heuristic_order(ids, context));
            used = Backend::Remote;
        }
    }
    if (used == Backend::Heuristic) order = heuristic_order(ids, context);
    return make_sequence(order, context.users, context.services, used);
}

}  // namespace arc
