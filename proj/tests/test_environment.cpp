#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "arc/environment.hpp"

using namespace arc;

namespace {

Topology line_topology(int n, double latency = 5.0) {
    Topology t;
    for (int i = 0; i < n; ++i) {
        Node node;
        node.id = i;
        node.compute_capacity = node.compute_available = node.compute_cost = 50.0;
        t.nodes.push_back(node);
    }
    for (int i = 0; i + 1 < n; ++i) {
        for (auto [s, d] : {std::pair{i, i + 1}, std::pair{i + 1, i}}) {
            Link l;
            l.src = s;
            l.dst = d;
            l.latency = latency;
            l.capacity = l.capacity_available = l.cost = capacity_from_latency(latency);
            t.links.push_back(l);
        }
    }
    t.reindex();
    return t;
}

// Independent path counter: plain recursion over the link list.
int brute_force_paths(const Topology& t, NodeId at, NodeId dst, int hops_left, std::vector<NodeId>& seen) {
    if (at == dst) return 1;
    if (hops_left == 0) return 0;
    int count = 0;
    for (const Link& l : t.links) {
        if (l.src != at || std::find(seen.begin(), seen.end(), l.dst) != seen.end()) continue;
        seen.push_back(l.dst);
        count += brute_force_paths(t, l.dst, dst, hops_left - 1, seen);
        seen.pop_back();
    }
    return count;
}

void check_ranges(const Topology& t) {
    for (const Link& l : t.links) {
        CHECK(l.latency >= kMinLatency);
        CHECK(l.latency <= kMaxLatency);
        CHECK(l.capacity >= kMinLinkCapacity);
        CHECK(l.capacity <= kMaxLinkCapacity);
        CHECK(l.cost == l.capacity);
        CHECK(l.capacity_available >= 0.0);
        CHECK(l.capacity_available <= l.capacity);
    }
    for (const Node& n : t.nodes) {
        CHECK(n.compute_available >= 0.0);
        CHECK(n.compute_available <= n.compute_capacity);
    }
}

}  // namespace

TEST_CASE("reference topology has ten nodes, half non-terrestrial") {
    const Topology t = build_topology(NetworkConfig{}, 7);
    CHECK(t.num_nodes() == 10);
    const auto ntn = std::count_if(t.nodes.begin(), t.nodes.end(),
                                   [](const Node& n) { return n.layer != Layer::Ground; });
    CHECK(ntn == 5);
    for (const Node& n : t.nodes) {
        CHECK(n.compute_capacity >= 10.0);
        CHECK(n.compute_capacity <= 100.0);
        CHECK(n.orbit.has_value() == (n.layer != Layer::Ground));
    }
    check_ranges(t);
}

TEST_CASE("topology construction is deterministic per seed") {
    CHECK(build_topology(NetworkConfig{}, 11) == build_topology(NetworkConfig{}, 11));
    CHECK_FALSE(build_topology(NetworkConfig{}, 11) == build_topology(NetworkConfig{}, 12));
}

TEST_CASE("two ground nodes give one wired link pair") {
    NetworkConfig c;
    c.ground_nodes = 2;
    c.air_nodes = c.space_nodes = 0;
    const Topology t = build_topology(c, 1);
    REQUIRE(t.num_nodes() == 2);
    REQUIRE(t.links.size() == 2);
    CHECK(t.find_link(0, 1) != nullptr);
    CHECK(t.find_link(1, 0) != nullptr);
    CHECK(t.links[0].wired);
}

TEST_CASE("invalid node counts are configuration errors") {
    NetworkConfig c;
    c.ground_nodes = 3;
    CHECK_THROWS_AS(build_topology(c, 1), ConfigError);
    c.ground_nodes = 1;
    c.air_nodes = c.space_nodes = 0;
    CHECK_THROWS_AS(build_topology(c, 1), ConfigError);
}

TEST_CASE("mobility is periodic") {
    Topology t = build_topology(NetworkConfig{}, 3);
    const Topology start = t;
    for (int i = 0; i < 24; ++i) t = advance(t);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) CHECK(t.nodes[i].position == start.nodes[i].position);
    for (const Node& n : start.nodes) {
        if (!n.orbit) continue;
        CHECK(orbit_position(*n.orbit, 5) == orbit_position(*n.orbit, 5 + n.orbit->period));
    }
}

TEST_CASE("non-terrestrial nodes link to their three nearest neighbours") {
    Topology t = build_topology(NetworkConfig{}, 5);
    for (int step = 0; step < 30; ++step) {
        std::set<std::pair<int, int>> justified;
        for (const Node& n : t.nodes) {
            if (n.layer == Layer::Ground) continue;
            const auto near = nearest_nodes(t, n.id, 3);
            REQUIRE(near.size() == 3);
            for (NodeId m : near) {
                CHECK(t.find_link(n.id, m) != nullptr);
                CHECK(t.find_link(m, n.id) != nullptr);
                justified.insert({n.id, m});
                justified.insert({m, n.id});
            }
        }
        std::set<std::pair<int, int>> seen;
        for (const Link& l : t.links) {
            CHECK(seen.insert({l.src, l.dst}).second);
            CHECK(l.src != l.dst);
            const bool both_ground =
                t.nodes[l.src].layer == Layer::Ground && t.nodes[l.dst].layer == Layer::Ground;
            CHECK((both_ground || justified.contains({l.src, l.dst})));
        }
        check_ranges(t);
        t = advance(t);
    }
}

TEST_CASE("latency swap reverses link ranks") {
    Topology t = line_topology(3);
    const double lat[] = {1.0, 2.0, 9.0, 10.0};
    for (int i = 0; i < 4; ++i) {
        t.links[i].latency = lat[i];
        t.links[i].capacity = t.links[i].cost = t.links[i].capacity_available = capacity_from_latency(lat[i]);
    }
    const Topology s = apply_perturbation(t, {0, EventKind::LatencySwap});
    for (int i = 0; i < 4; ++i) {
        CHECK(s.links[i].latency == lat[3 - i]);
        CHECK(s.links[i].src == t.links[i].src);
        CHECK(s.links[i].dst == t.links[i].dst);
        CHECK(s.links[i].cost == s.links[i].capacity);
    }
    CHECK(s.latency_swapped);
}

TEST_CASE("latency swap preserves the latency multiset") {
    const Topology t = build_topology(NetworkConfig{}, 9);
    const Topology s = apply_perturbation(t, {3000, EventKind::LatencySwap});
    std::vector<double> a, b;
    for (const Link& l : t.links) a.push_back(l.latency);
    for (const Link& l : s.links) b.push_back(l.latency);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    check_ranges(s);
}

TEST_CASE("swap on a single link is identity") {
    Topology t = line_topology(2);
    t.links.pop_back();
    t.reindex();
    const Topology s = apply_perturbation(t, {0, EventKind::LatencySwap});
    CHECK(s.links[0].latency == t.links[0].latency);
}

TEST_CASE("swapped topology stays rank-reversed after mobility") {
    Topology t = apply_perturbation(build_topology(NetworkConfig{}, 4), {0, EventKind::LatencySwap});
    t = advance(t);
    Topology base = t;
    base.latency_swapped = false;
    base = advance(base);
    Topology swapped = t;
    swapped = advance(swapped);
    // Same geometry; the swapped trace is the rank reversal of the plain one.
    const Topology reversed = apply_perturbation(base, {0, EventKind::LatencySwap});
    REQUIRE(reversed.links.size() == swapped.links.size());
    for (std::size_t i = 0; i < swapped.links.size(); ++i) {
        CHECK(swapped.links[i].latency == reversed.links[i].latency);
    }
    check_ranges(swapped);
}

TEST_CASE("unknown perturbation kind is rejected") {
    const Topology t = line_topology(2);
    CHECK_THROWS_AS(apply_perturbation(t, {0, static_cast<EventKind>(7)}), UnsupportedEvent);
}

TEST_CASE("path enumeration") {
    const Topology line = line_topology(3);
    SUBCASE("src equals dst") {
        const auto p = enumerate_paths(line, 1, 1, 4);
        REQUIRE(p.size() == 1);
        CHECK(p[0].hops() == 0);
        CHECK(p[0].cost == 0.0);
    }
    SUBCASE("line graph") {
        const auto p = enumerate_paths(line, 0, 2, 2);
        REQUIRE(p.size() == 1);
        CHECK(p[0].nodes == std::vector<NodeId>{0, 1, 2});
        CHECK(p[0].cost == doctest::Approx(2 * capacity_from_latency(5.0)));
        CHECK(enumerate_paths(line, 0, 2, 1).empty());
    }
    SUBCASE("reference topology matches brute force") {
        Topology t = build_topology(NetworkConfig{}, 7);
        for (int step = 0; step < 3; ++step) {
            for (NodeId s = 0; s < t.num_nodes(); ++s) {
                for (NodeId d = 0; d < t.num_nodes(); ++d) {
                    if (s == d) continue;
                    std::vector<NodeId> seen{s};
                    const auto paths = enumerate_paths(t, s, d, 4);
                    CHECK(static_cast<int>(paths.size()) == brute_force_paths(t, s, d, 4, seen));
                    CHECK(std::is_sorted(paths.begin(), paths.end(),
                                         [](const Path& a, const Path& b) { return a.nodes < b.nodes; }));
                }
            }
            t = advance(t);
        }
    }
}

TEST_CASE("feedback tiers follow delivered rate") {
    Topology t = line_topology(2, 9.0);  // capacity 20
    ServiceSpec svc{0, {{0, 3.0}}, "the image must be 1920x1080", 0.99, 20.0};
    User u{0, 0, 0, UserStatus::Served};
    AllocationRecord a{0, {1}, {3.0}, {0, 1}, 20.0, 0};
    grant(t, a);
    CHECK(render_feedback(u, &a, t, svc) == "received image at 1920x1080");

    // Mobility halves the link: the grant is oversubscribed 2:1.
    Link* l = t.find_link(0, 1);
    l->capacity = 10.0;
    CHECK(delivered_rate(t, a) == doctest::Approx(10.0));
    CHECK(render_feedback(u, &a, t, svc) == "received image at 960x540");
    l->capacity = 8.0;
    CHECK(render_feedback(u, &a, t, svc) == "received image at 480x270");

    CHECK(render_feedback(u, nullptr, t, svc) == kNoFeedback);
    u.status = UserStatus::Requesting;
    CHECK(render_feedback(u, &a, t, svc) == kNoFeedback);
}

TEST_CASE("grant and release conserve resources") {
    Topology t = build_topology(NetworkConfig{}, 2);
    const Topology before = t;
    const auto paths = enumerate_paths(t, 0, 7, 3);
    REQUIRE_FALSE(paths.empty());
    AllocationRecord a{0, {7}, {4.0}, paths.back().nodes, 12.5, 0};
    grant(t, a);
    CHECK(t.nodes[7].compute_available == doctest::Approx(before.nodes[7].compute_available - 4.0));
    for (std::size_t i = 0; i + 1 < a.path.size(); ++i) {
        const Link* l = t.find_link(a.path[i], a.path[i + 1]);
        CHECK(l->capacity_available == doctest::Approx(l->capacity - 12.5));
    }
    release(t, a);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        CHECK(t.nodes[i].compute_available == doctest::Approx(before.nodes[i].compute_available));
    }
    for (std::size_t i = 0; i < t.links.size(); ++i) {
        CHECK(t.links[i].capacity_available == doctest::Approx(before.links[i].capacity_available));
        CHECK(t.links[i].reserved == doctest::Approx(0.0));
    }
}
