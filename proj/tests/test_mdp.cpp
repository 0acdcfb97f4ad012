#include <doctest.h>

#include <random>

#include "arc/mdp.hpp"

using namespace arc;

namespace {

Topology triangle() {
    Topology t;
    for (int i = 0; i < 3; ++i) {
        Node n;
        n.id = i;
        n.compute_capacity = n.compute_available = n.compute_cost = 20.0 + 10.0 * i;
        t.nodes.push_back(n);
    }
    auto add = [&](int s, int d, double cost) {
        Link l;
        l.src = s;
        l.dst = d;
        l.latency = 5.0;
        l.capacity = l.capacity_available = l.cost = cost;
        t.links.push_back(l);
    };
    add(0, 1, 50.0);
    add(1, 2, 60.0);
    add(0, 2, 55.0);
    t.reindex();
    return t;
}

ServiceSpec service(double demand = 3.0, double rate = 20.0) {
    return {0, {{0, demand}}, "the image must be 1920x1080", 0.99, rate};
}

ActionDecision routing(int user, std::vector<NodeId> path, double rate) {
    ActionDecision d;
    d.user = user;
    d.kind = ActionKind::Routing;
    d.path = std::move(path);
    d.capacity_amount = rate;
    return d;
}

StateHistory history_of(const State& s) {
    StateHistory h;
    h.states.push_back(s);
    return h;
}

}  // namespace

TEST_CASE("min-cost routing rewards") {
    const Topology t = triangle();
    const std::vector<User> users{{0, 0, 0, UserStatus::Served}};
    const std::vector<ServiceSpec> services{service()};
    const Objective obj = make_objective(ObjectiveKind::MinCost);

    SUBCASE("path at the mean cost scores 1") {
        const auto r = compute_reward({routing(0, {0, 2}, 20.0)}, obj, {true}, t, users, services);
        REQUIRE(r.size() == 1);
        CHECK(r[0].total == 1.0);
    }
    SUBCASE("two-link path costing 110 scores 0.5") {
        const auto r = compute_reward({routing(0, {0, 1, 2}, 20.0)}, obj, {true}, t, users, services);
        CHECK(r[0].total == 0.5);
    }
    SUBCASE("unmet QoE zeroes every action") {
        ActionDecision place;
        place.user = 0;
        place.node = 2;
        place.compute_amount = 3.0;
        const auto r =
            compute_reward({place, routing(0, {0, 2}, 20.0)}, obj, {false}, t, users, services);
        REQUIRE(r[0].per_action.size() == 2);
        for (const auto& [d, v] : r[0].per_action) CHECK(v == 0.0);
        CHECK(r[0].total == 0.0);
    }
}

TEST_CASE("cheaper paths earn strictly more") {
    const Topology t = triangle();
    const Objective obj = make_objective(ObjectiveKind::MinCost);
    const double cheap = action_reward(t, routing(0, {0, 2}, 10.0), obj, 10.0);
    const double dear = action_reward(t, routing(0, {0, 1, 2}, 10.0), obj, 10.0);
    CHECK(cheap > dear);
}

TEST_CASE("placement reward and record totals") {
    const Topology t = triangle();
    const Objective obj = make_objective(ObjectiveKind::MinCost);
    ActionDecision place;
    place.user = 1;
    place.node = 1;
    place.compute_amount = 3.0;
    // cost = capacity, so allocated cost is the demand itself; mean node cost is 30.
    CHECK(action_reward(t, place, obj, 10.0) == doctest::Approx(10.0));

    const std::vector<User> users{{0, 0, 0}, {1, 0, 0}};
    const auto r = compute_reward({place, routing(1, {0, 2}, 20.0)}, obj, {false, true}, t, users,
                                  {service()});
    REQUIRE(r.size() == 1);
    CHECK(r[0].user == 1);
    CHECK(r[0].total == doctest::Approx(r[0].per_action[0].second + r[0].per_action[1].second));
}

TEST_CASE("other objectives") {
    Topology t = triangle();
    SUBCASE("max quality caps the margin at 2") {
        const Objective q = make_objective(ObjectiveKind::MaxQuality);
        CHECK(action_reward(t, routing(0, {0, 1, 2}, 20.0), q, 20.0) == 2.0);
        CHECK(action_reward(t, routing(0, {0, 1, 2}, 40.0), q, 40.0) == doctest::Approx(1.25));
    }
    SUBCASE("load balance is one minus utilisation spread") {
        const Objective lb = make_objective(ObjectiveKind::LoadBalance);
        CHECK(action_reward(t, routing(0, {0, 2}, 0.0), lb, 0.0) == 1.0);
        t.reserve_link(0, 2, 55.0);
        // Utilisations {0, 0, 1}: stddev sqrt(2)/3.
        CHECK(action_reward(t, routing(0, {0, 2}, 55.0), lb, 55.0) ==
              doctest::Approx(1.0 - std::sqrt(2.0) / 3.0));
    }
}

TEST_CASE("state request flags and discarded allocations") {
    Topology t = triangle();
    std::vector<User> users{{0, 0, 0, UserStatus::Requesting}, {1, 0, 0, UserStatus::Requesting}};
    const std::vector<ServiceSpec> services{service()};
    AllocationTable alloc(2);

    SUBCASE("all requesting") {
        const State s = index_state(t, users, services, alloc, {false, false});
        CHECK(s.request_flag(0) == 1.0);
        CHECK(s.request_flag(1) == 1.0);
        CHECK(static_cast<int>(s.values.size()) == s.layout.size());
        for (double v : s.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    AllocationRecord a{0, {2}, {3.0}, {0, 2}, 20.0, 0};
    grant(t, a);
    alloc[0] = a;
    users[0].status = UserStatus::Served;

    SUBCASE("served with QoE met") {
        const State s = index_state(t, users, services, alloc, {true, false});
        CHECK(s.request_flag(0) == 0.0);
        CHECK(s.values[s.layout.user_offset(0) + 4] == doctest::Approx(1.0));
        CHECK(s.values[s.layout.node_offset(2)] == doctest::Approx(37.0 / 100.0));
        CHECK(s.values[s.layout.link_offset(0, 2) + 1] == doctest::Approx(35.0 / 100.0));
    }
    SUBCASE("served with QoE failed looks unallocated") {
        const State failed = index_state(t, users, services, alloc, {false, false});
        release(t, a);
        users[0].status = UserStatus::Requesting;
        const State fresh = index_state(t, users, services, AllocationTable(2), {false, false});
        CHECK(failed.request_flag(0) == 1.0);
        CHECK(failed.values == fresh.values);
    }
    SUBCASE("encoding is pure") {
        CHECK(index_state(t, users, services, alloc, {true, false}) ==
              index_state(t, users, services, alloc, {true, false}));
    }
}

TEST_CASE("feasible decisions") {
    Topology t = triangle();
    const User u{0, 0, 0};
    const DecisionLimits limits;

    SUBCASE("saturated nodes leave no placement") {
        for (Node& n : t.nodes) n.compute_available = 1.0;
        CHECK(feasible_decisions(t, u, service(2.0), {ActionKind::Placement, 0}, std::nullopt, limits).empty());
    }
    SUBCASE("single node with room") {
        for (Node& n : t.nodes) n.compute_available = 0.0;
        t.nodes[1].compute_available = 5.0;
        const auto d = feasible_decisions(t, u, service(2.0), {ActionKind::Placement, 0}, std::nullopt, limits);
        REQUIRE(d.size() == 1);
        CHECK(*d[0].node == 1);
        CHECK(d[0].compute_amount == 2.0);
        CHECK(d[0].action_index == 1);
    }
    SUBCASE("routes filtered by rate") {
        t.find_link(0, 2)->capacity_available = 5.0;
        const auto d = feasible_decisions(t, u, service(2.0, 20.0), {ActionKind::Routing, 0}, 2, limits);
        REQUIRE(d.size() == 1);
        CHECK(d[0].path == std::vector<NodeId>{0, 1, 2});
        CHECK(d[0].capacity_amount == 20.0);
    }
    SUBCASE("route count matches a direct enumeration") {
        Topology ref = build_topology(NetworkConfig{}, 7);
        std::mt19937 rng(3);
        for (const Link& l : ref.links) ref.reserve_link(l.src, l.dst, std::uniform_real_distribution<>(0, 60)(rng));
        for (NodeId host = 1; host < ref.num_nodes(); ++host) {
            const auto d = feasible_decisions(ref, u, service(2.0, 25.0), {ActionKind::Routing, 0}, host, limits);
            int expected = 0;
            const auto routes = candidate_routes(ref, 0, host, limits.max_hops, limits.route_limit);
            for (const Path& p : routes) {
                bool ok = true;
                for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
                    ok = ok && ref.find_link(p.nodes[i], p.nodes[i + 1])->capacity_available >= 25.0;
                }
                expected += ok ? 1 : 0;
            }
            CHECK(static_cast<int>(d.size()) == expected);
        }
    }
}

TEST_CASE("masked state") {
    Topology t = build_topology(NetworkConfig{}, 7);
    std::vector<User> users;
    for (int i = 0; i < 4; ++i) users.push_back({i, i, 0});
    const std::vector<ServiceSpec> services{service(4.0, 25.0)};
    t.nodes[6].compute_available = 1.0;
    const State s = index_state(t, users, services, AllocationTable(users.size()), std::vector<bool>(4));
    const StateHistory h = history_of(s);
    const DecisionLimits limits;
    const Objective cost = make_objective(ObjectiveKind::MinCost);
    const Objective lb = make_objective(ObjectiveKind::LoadBalance);
    const ActionStep place{ActionKind::Placement, 0};

    const MaskedState a = mask_state(h, t, users[0], services[0], place, std::nullopt, cost, limits);
    const MaskedState b = mask_state(h, t, users[3], services[0], place, std::nullopt, cost, limits);
    CHECK(a.values.size() == b.values.size());
    CHECK(static_cast<int>(a.values.size()) == masked_dimension(10));

    SUBCASE("infeasible nodes are zero") {
        CHECK(a.values[3 * 6] == 0.0);
        CHECK(a.values[3 * 6 + 1] == 0.0);
        CHECK(a.values[3 * 0] == 0.0);  // attach node
        const auto feasible = feasible_decisions(t, users[0], services[0], place, std::nullopt, limits);
        for (NodeId n = 0; n < 10; ++n) {
            const bool listed = std::any_of(feasible.begin(), feasible.end(),
                                            [&](const ActionDecision& d) { return *d.node == n; });
            CHECK((a.values[3 * n] != 0.0) == listed);
            CHECK(a.decisions[n].has_value() == listed);
        }
    }
    SUBCASE("objective only changes the one-hot block") {
        const MaskedState c = mask_state(h, t, users[0], services[0], place, std::nullopt, lb, limits);
        const std::size_t tail = c.values.size() - kNumObjectives;
        for (std::size_t i = 0; i < tail; ++i) CHECK(a.values[i] == c.values[i]);
        CHECK(a.values[tail] == 1.0);
        CHECK(c.values[tail + 2] == 1.0);
    }
    SUBCASE("routing mask exposes only candidate route links") {
        const MaskedState r = mask_state(h, t, users[0], services[0], {ActionKind::Routing, 0}, 7, cost, limits);
        CHECK(static_cast<int>(r.decisions.size()) == limits.route_limit);
        CHECK(r.values.size() == a.values.size());
        for (int idx : r.feasible_indices()) {
            const auto& path = r.decisions[idx]->path;
            CHECK(path.front() == 0);
            CHECK(path.back() == 7);
            for (std::size_t i = 0; i + 1 < path.size(); ++i) {
                const int o = 30 + s.layout.pair_index(path[i], path[i + 1]) * 4;
                CHECK(r.values[o] == 1.0);
            }
        }
    }
}
