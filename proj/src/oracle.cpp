#include "arc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace arc {

namespace {

constexpr double kRewardTie = 1e-12;

void place_blocks(Topology& scratch, const User& user, const ServiceSpec& service,
                  const DecisionLimits& limits, std::size_t block, std::vector<ActionDecision>& prefix,
                  std::vector<UserOption>& out) {
    if (block == service.blocks.size()) {
        const ActionStep route{ActionKind::Routing, 0};
        for (const ActionDecision& r :
             feasible_decisions(scratch, user, service, route, prefix.front().node, limits)) {
            UserOption o;
            o.user = user.id;
            o.decisions = prefix;
            o.decisions.push_back(r);
            out.push_back(std::move(o));
        }
        return;
    }
    const ActionStep place{ActionKind::Placement, static_cast<int>(block)};
    for (const ActionDecision& d : feasible_decisions(scratch, user, service, place, std::nullopt, limits)) {
        scratch.reserve_compute(*d.node, d.compute_amount);
        prefix.push_back(d);
        place_blocks(scratch, user, service, limits, block + 1, prefix, out);
        prefix.pop_back();
        scratch.release_compute(*d.node, d.compute_amount);
    }
}

double option_cost(const Topology& topology, const UserOption& option) {
    double cost = 0.0;
    for (const ActionDecision& d : option.decisions) cost += allocated_cost(topology, d);
    return cost;
}

void grant_option(Topology& topology, const UserOption& option) {
    for (const ActionDecision& d : option.decisions) {
        if (d.kind == ActionKind::Placement) {
            topology.reserve_compute(*d.node, d.compute_amount);
        } else {
            for (std::size_t i = 0; i + 1 < d.path.size(); ++i) {
                topology.reserve_link(d.path[i], d.path[i + 1], d.capacity_amount);
            }
        }
    }
}

// Best standalone reward of each option set, used as an optimistic bound.
double reward_bound(const Topology& topology, const std::vector<UserOption>& options,
                    const Objective& objective, const ServiceSpec& service) {
    if (options.empty()) return 0.0;
    if (objective.kind == ObjectiveKind::LoadBalance) {
        return static_cast<double>(options.front().decisions.size());
    }
    double best = 0.0;
    for (const UserOption& o : options) {
        Topology scratch = topology;
        best = std::max(best, apply_option(scratch, o, objective, service));
    }
    return best;
}

struct BranchAndBound {
    const std::vector<User>& users;
    const std::vector<ServiceSpec>& services;
    const Objective& objective;
    const DecisionLimits& limits;
    bool canonical;

    std::vector<char> decided;
    std::vector<UserAssignment> current;
    double reward = 0.0;
    int supported = 0;

    std::vector<UserAssignment> best;
    double best_reward = -1.0;
    int best_supported = -1;

    bool improves(int s, double r) const {
        return s > best_supported || (s == best_supported && r > best_reward + kRewardTie);
    }

    void search(const Topology& topology) {
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < users.size(); ++i) {
            if (!decided[i]) open.push_back(i);
        }
        if (open.empty()) {
            if (improves(supported, reward)) {
                best = current;
                best_reward = reward;
                best_supported = supported;
            }
            return;
        }
        std::vector<std::vector<UserOption>> options(users.size());
        int s_bound = supported;
        double r_bound = reward;
        for (std::size_t i : open) {
            const ServiceSpec& service = find_service(services, users[i].service);
            options[i] = enumerate_user_options(topology, users[i], service, limits);
            if (!options[i].empty()) ++s_bound;
            r_bound += reward_bound(topology, options[i], objective, service);
        }
        if (best_supported >= 0 && !improves(s_bound, r_bound)) return;

        const std::size_t branch_count = canonical ? 1 : open.size();
        for (std::size_t b = 0; b < branch_count; ++b) {
            const std::size_t i = open[b];
            const ServiceSpec& service = find_service(services, users[i].service);
            decided[i] = 1;
            for (const UserOption& o : options[i]) {
                Topology next = topology;
                const double r = apply_option(next, o, objective, service);
                current[i] = {users[i].id, o, r};
                reward += r;
                ++supported;
                search(next);
                --supported;
                reward -= r;
            }
            current[i] = {users[i].id, std::nullopt, 0.0};
            search(topology);
            decided[i] = 0;
        }
    }
};

void check_bounds(const Topology& topology, std::size_t users, const OracleBounds& bounds) {
    if (static_cast<int>(users) > bounds.max_users || topology.num_nodes() > bounds.max_nodes) {
        throw InstanceTooLarge("instance with " + std::to_string(users) + " users and " +
                               std::to_string(topology.num_nodes()) + " nodes exceeds oracle bounds (" +
                               std::to_string(bounds.max_users) + " users, " +
                               std::to_string(bounds.max_nodes) + " nodes)");
    }
}

}  // namespace

std::vector<UserOption> enumerate_user_options(const Topology& topology, const User& user,
                                               const ServiceSpec& service, const DecisionLimits& limits) {
    std::vector<UserOption> out;
    if (service.blocks.empty()) return out;
    Topology scratch = topology;
    std::vector<ActionDecision> prefix;
    place_blocks(scratch, user, service, limits, 0, prefix, out);
    return out;
}

double apply_option(Topology& topology, const UserOption& option, const Objective& objective,
                    const ServiceSpec& service) {
    double total = 0.0;
    for (const ActionDecision& d : option.decisions) {
        grant_option(topology, {option.user, {d}});
        total += action_reward(topology, d, objective, service.rate_requirement);
    }
    return total;
}

std::vector<int> decreasing_reward_order(const std::vector<UserAssignment>& assignment) {
    std::vector<const UserAssignment*> served, unserved;
    for (const auto& a : assignment) (a.option ? served : unserved).push_back(&a);
    std::stable_sort(served.begin(), served.end(), [](const UserAssignment* a, const UserAssignment* b) {
        return a->reward > b->reward || (a->reward == b->reward && a->user < b->user);
    });
    std::stable_sort(unserved.begin(), unserved.end(),
                     [](const UserAssignment* a, const UserAssignment* b) { return a->user < b->user; });
    std::vector<int> order;
    for (const auto* a : served) order.push_back(a->user);
    for (const auto* a : unserved) order.push_back(a->user);
    return order;
}

OptimalResult greedy_allocate(Topology topology, const std::vector<User>& users,
                              const std::vector<ServiceSpec>& services, const Objective& objective,
                              const std::vector<int>& order, const DecisionLimits& limits) {
    OptimalResult result;
    for (const User& u : users) result.assignment.push_back({u.id, std::nullopt, 0.0});
    for (int id : order) {
        const auto pos = std::find_if(users.begin(), users.end(), [&](const User& u) { return u.id == id; });
        if (pos == users.end()) throw std::invalid_argument("order names an unknown user");
        const auto idx = static_cast<std::size_t>(pos - users.begin());
        const ServiceSpec& service = find_service(services, pos->service);
        const auto options = enumerate_user_options(topology, *pos, service, limits);
        const UserOption* chosen = nullptr;
        double chosen_reward = 0.0;
        for (const UserOption& o : options) {
            Topology scratch = topology;
            const double r = apply_option(scratch, o, objective, service);
            if (chosen == nullptr || r > chosen_reward + kRewardTie) {
                chosen = &o;
                chosen_reward = r;
            }
        }
        if (chosen == nullptr) continue;
        apply_option(topology, *chosen, objective, service);
        result.assignment[idx] = {id, *chosen, chosen_reward};
        result.total_reward += chosen_reward;
        ++result.supported;
    }
    result.ordering = decreasing_reward_order(result.assignment);
    return result;
}

OptimalResult optimal_allocation(const Topology& topology, const std::vector<User>& users,
                                 const std::vector<ServiceSpec>& services, const Objective& objective,
                                 const DecisionLimits& limits, const OracleBounds& bounds) {
    check_bounds(topology, users.size(), bounds);
    // Under MinCost an assignment's value does not depend on grant order, so
    // one canonical order covers every ordering.
    BranchAndBound bb{users, services, objective, limits, objective.kind == ObjectiveKind::MinCost,
                      std::vector<char>(users.size(), 0), {}, 0.0, 0, {}, -1.0, -1};
    for (const User& u : users) bb.current.push_back({u.id, std::nullopt, 0.0});
    bb.search(topology);

    OptimalResult result;
    result.assignment = bb.best;
    result.supported = std::max(0, bb.best_supported);
    // Re-sum in input order so the total is independent of search order.
    for (const auto& a : result.assignment) result.total_reward += a.reward;
    result.ordering = decreasing_reward_order(result.assignment);
    return result;
}

TheoremCheck verify_sequence_theorem(const Topology& topology, const std::vector<User>& users,
                                     const std::vector<ServiceSpec>& services, const Objective& objective,
                                     const DecisionLimits& limits, double tolerance) {
    const OptimalResult opt = optimal_allocation(topology, users, services, objective, limits);
    const OptimalResult greedy = greedy_allocate(topology, users, services, objective, opt.ordering, limits);
    TheoremCheck check;
    check.ordering = opt.ordering;
    check.optimal_total = opt.total_reward;
    check.greedy_total = greedy.total_reward;
    check.holds = greedy.supported == opt.supported &&
                  std::abs(greedy.total_reward - opt.total_reward) <= tolerance;
    return check;
}

Instance random_instance(std::mt19937_64& rng, int max_users, int max_nodes) {
    std::uniform_int_distribution<int> node_count(2, std::max(2, max_nodes));
    std::uniform_int_distribution<int> user_count(1, std::max(1, max_users));
    std::uniform_real_distribution<double> demand(2.0, 5.0);
    std::uniform_real_distribution<double> rate(10.0, 30.0);

    Instance inst;
    const int n = node_count(rng);
    NetworkConfig config;
    config.ground_nodes = n >= 5 ? 4 : n;
    config.air_nodes = n >= 5 ? n - 4 : 0;
    config.space_nodes = 0;
    inst.topology = build_topology(config, rng());

    const int m = user_count(rng);
    std::uniform_int_distribution<int> attach(0, config.ground_nodes - 1);
    for (int i = 0; i < m; ++i) {
        inst.services.push_back({i, {{0, demand(rng)}}, "the image must be 1920x1080", 0.99, rate(rng)});
        inst.users.push_back({i, attach(rng), i, UserStatus::Requesting});
    }
    return inst;
}

ReasoningExemplar exemplar_from_assignment(const StateHistory& history, const Objective& objective,
                                           const std::vector<UserAssignment>& assignment,
                                           const std::vector<int>& order, const Topology& granted,
                                           const std::vector<User>& users,
                                           const std::vector<ServiceSpec>& services) {
    std::vector<ActionDecision> decisions;
    std::vector<bool> met(users.size(), false);
    for (int id : order) {
        for (const auto& a : assignment) {
            if (a.user != id || !a.option) continue;
            for (const auto& d : a.option->decisions) decisions.push_back(d);
            met.at(id) = true;
        }
    }
    ReasoningExemplar e;
    e.input = embed(history, objective);
    e.objective = objective.kind;
    e.slot = history.empty() ? 0 : history.latest().slot;
    for (const RewardRecord& r : compute_reward(decisions, objective, met, granted, users, services)) {
        for (const auto& [d, v] : r.per_action) e.cot.push_back({r.user, d, v});
    }
    double total = 0.0;
    for (const auto& step : e.cot) total += step.reward;
    e.output = total;
    return e;
}

int bootstrap_exemplars(KnowledgeBase& dkb, const StateHistory& history, const Topology& topology,
                        const std::vector<User>& users, const std::vector<ServiceSpec>& services,
                        const Objective& objective, int n, const DecisionLimits& limits,
                        const OracleBounds& bounds, std::mt19937_64& rng) {
    if (n < 3) throw std::invalid_argument("bootstrap needs n >= 3");
    if (users.empty()) return 0;
    const int per_class = (n + 2) / 3;
    int stored = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<std::size_t> pool(users.size());
        std::iota(pool.begin(), pool.end(), 0);
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(bounds.max_users)));
        std::sort(pool.begin(), pool.end());
        std::vector<User> subset;
        for (std::size_t p : pool) subset.push_back(users[p]);

        std::vector<UserAssignment> assignment;
        std::vector<int> order;
        if (i < per_class) {
            const OptimalResult opt = optimal_allocation(topology, subset, services, objective, limits, bounds);
            assignment = opt.assignment;
            order = opt.ordering;
        } else if (i < 2 * per_class) {
            for (const User& u : subset) order.push_back(u.id);
            assignment = greedy_allocate(topology, subset, services, objective, order, limits).assignment;
        } else {
            for (const User& u : subset) order.push_back(u.id);
            std::shuffle(order.begin(), order.end(), rng);
            Topology scratch = topology;
            for (const User& u : subset) assignment.push_back({u.id, std::nullopt, 0.0});
            for (int id : order) {
                const User& u = *std::find_if(subset.begin(), subset.end(), [&](const User& x) { return x.id == id; });
                const ServiceSpec& service = find_service(services, u.service);
                const auto options = enumerate_user_options(scratch, u, service, limits);
                if (options.empty()) continue;
                std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
                const UserOption& o = options[pick(rng)];
                const double r = apply_option(scratch, o, objective, service);
                for (auto& a : assignment) {
                    if (a.user == id) a = {id, o, r};
                }
            }
        }
        Topology granted = topology;
        for (int id : order) {
            for (const auto& a : assignment) {
                if (a.user == id && a.option) grant_option(granted, *a.option);
            }
        }
        ReasoningExemplar e =
            exemplar_from_assignment(history, objective, assignment, order, granted, users, services);
        if (e.cot.empty()) continue;
        store_exemplar(dkb, std::move(e));
        ++stored;
    }
    return stored;
}

Topology fully_available(Topology topology) {
    for (Node& node : topology.nodes) node.compute_available = node.compute_capacity;
    for (Link& l : topology.links) {
        l.reserved = 0.0;
        l.capacity_available = l.capacity;
    }
    return topology;
}

std::optional<double> contention_free_cost(const Topology& topology, const User& user,
                                           const ServiceSpec& service, const DecisionLimits& limits) {
    const Topology free = fully_available(topology);
    std::optional<double> best;
    for (const UserOption& o : enumerate_user_options(free, user, service, limits)) {
        const double c = option_cost(free, o);
        if (!best || c < *best) best = c;
    }
    return best;
}

std::optional<double> min_cost_allocation(const Topology& topology, const std::vector<User>& users,
                                          const std::vector<ServiceSpec>& services,
                                          const DecisionLimits& limits, const OracleBounds& bounds) {
    check_bounds(topology, users.size(), bounds);
    const Topology free = fully_available(topology);
    std::vector<double> floor(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
        const auto c = contention_free_cost(free, users[i], find_service(services, users[i].service), limits);
        if (!c) return std::nullopt;
        floor[i] = *c;
    }
    std::vector<double> tail(users.size() + 1, 0.0);
    for (std::size_t i = users.size(); i-- > 0;) tail[i] = tail[i + 1] + floor[i];

    std::optional<double> best;
    std::function<void(const Topology&, std::size_t, double)> dfs = [&](const Topology& t, std::size_t i,
                                                                         double cost) {
        if (best && cost + tail[i] >= *best) return;
        if (i == users.size()) {
            best = cost;
            return;
        }
        const ServiceSpec& service = find_service(services, users[i].service);
        for (const UserOption& o : enumerate_user_options(t, users[i], service, limits)) {
            Topology next = t;
            grant_option(next, o);
            dfs(next, i + 1, cost + option_cost(t, o));
        }
    };
    dfs(free, 0, 0.0);
    return best;
}

}  // namespace arc
