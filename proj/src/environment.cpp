#include "arc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

namespace arc {

namespace {

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void set_latency(Link& link, double latency) {
    link.latency = std::clamp(latency, kMinLatency, kMaxLatency);
    link.capacity = capacity_from_latency(link.latency);
    link.cost = link.capacity;
    link.capacity_available = std::max(0.0, link.capacity - link.reserved);
}

// Exchange latencies between the i-th lowest and i-th highest link.
void reverse_latency_ranks(std::vector<Link>& links) {
    std::vector<std::size_t> order(links.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(links[a].latency, links[a].src, links[a].dst) <
               std::tie(links[b].latency, links[b].src, links[b].dst);
    });
    std::vector<double> sorted(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = links[order[i]].latency;
    const std::size_t n = order.size();
    for (std::size_t i = 0; i < n; ++i) set_latency(links[order[i]], sorted[n - 1 - i]);
}

void rebuild_links(Topology& topology, int neighbours) {
    std::vector<Link> previous = std::move(topology.links);
    std::vector<Link> links;
    const int n = topology.num_nodes();

    for (const Node& a : topology.nodes) {
        if (a.layer != Layer::Ground) continue;
        for (const Node& b : topology.nodes) {
            if (b.layer != Layer::Ground || a.id == b.id) continue;
            Link link;
            link.src = a.id;
            link.dst = b.id;
            link.wired = true;
            links.push_back(link);
        }
    }
    std::vector<char> present(static_cast<std::size_t>(n) * n, 0);
    for (const Link& l : links) present[l.src * n + l.dst] = 1;
    for (const Node& a : topology.nodes) {
        if (a.layer == Layer::Ground) continue;
        for (NodeId b : nearest_nodes(topology, a.id, neighbours)) {
            for (auto [s, d] : {std::pair{a.id, b}, std::pair{b, a.id}}) {
                if (present[s * n + d]) continue;
                present[s * n + d] = 1;
                Link link;
                link.src = s;
                link.dst = d;
                links.push_back(link);
            }
        }
    }
    std::sort(links.begin(), links.end(),
              [](const Link& a, const Link& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });

    // Carry reservations over for links that persist.
    std::size_t j = 0;
    for (Link& link : links) {
        while (j < previous.size() &&
               std::tie(previous[j].src, previous[j].dst) < std::tie(link.src, link.dst)) {
            ++j;
        }
        if (j < previous.size() && previous[j].src == link.src && previous[j].dst == link.dst) {
            link.reserved = previous[j].reserved;
        }
        const double d = distance(topology.nodes[link.src].position, topology.nodes[link.dst].position);
        set_latency(link, latency_from_distance(d, topology.max_distance));
    }
    if (topology.latency_swapped) reverse_latency_ranks(links);
    topology.links = std::move(links);
    topology.reindex();
}

}  // namespace

const char* to_string(Layer layer) {
    switch (layer) {
        case Layer::Ground: return "ground";
        case Layer::Air: return "air";
        case Layer::Space: return "space";
    }
    return "?";
}

Vec3 orbit_position(const MobilitySpec& orbit, long slot) {
    const long period = std::max(1, orbit.period);
    const long step = ((slot % period) + period) % period;
    const double angle = orbit.phase + 2.0 * std::numbers::pi * static_cast<double>(step) /
                                           static_cast<double>(period);
    return {orbit.center[0] + orbit.radius * std::cos(angle),
            orbit.center[1] + orbit.radius * std::sin(angle), orbit.center[2]};
}

double latency_from_distance(double d, double max_distance) {
    return kMinLatency + (kMaxLatency - kMinLatency) * std::clamp(d / max_distance, 0.0, 1.0);
}

double capacity_from_latency(double latency) {
    return std::clamp(110.0 - 10.0 * latency, kMinLinkCapacity, kMaxLinkCapacity);
}

const Link* Topology::find_link(NodeId src, NodeId dst) const {
    const int i = link_index(src, dst);
    return i < 0 ? nullptr : &links[i];
}

Link* Topology::find_link(NodeId src, NodeId dst) {
    const int i = link_index(src, dst);
    return i < 0 ? nullptr : &links[i];
}

int Topology::link_index(NodeId src, NodeId dst) const {
    const int n = num_nodes();
    if (src < 0 || dst < 0 || src >= n || dst >= n) return -1;
    if (index_.size() != static_cast<std::size_t>(n) * n) return -1;
    return index_[src * n + dst];
}

std::vector<NodeId> Topology::neighbours(NodeId node) const {
    std::vector<NodeId> out;
    for (const Link& l : links) {
        if (l.src == node) out.push_back(l.dst);
    }
    return out;
}

void Topology::reserve_link(NodeId src, NodeId dst, double amount) {
    Link* l = find_link(src, dst);
    if (l == nullptr) throw std::logic_error("reserve on missing link");
    l->reserved += amount;
    l->capacity_available = std::max(0.0, l->capacity - l->reserved);
}

void Topology::release_link(NodeId src, NodeId dst, double amount) {
    Link* l = find_link(src, dst);
    if (l == nullptr) return;
    l->reserved = std::max(0.0, l->reserved - amount);
    l->capacity_available = std::max(0.0, l->capacity - l->reserved);
}

void Topology::reserve_compute(NodeId node, double amount) {
    Node& n = nodes.at(node);
    n.compute_available -= amount;
    if (n.compute_available < -kCapacityEpsilon) throw std::logic_error("compute over-subscribed");
    n.compute_available = std::max(0.0, n.compute_available);
}

void Topology::release_compute(NodeId node, double amount) {
    Node& n = nodes.at(node);
    n.compute_available = std::min(n.compute_capacity, n.compute_available + amount);
}

void Topology::reindex() {
    std::sort(links.begin(), links.end(),
              [](const Link& a, const Link& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
    const int n = num_nodes();
    index_.assign(static_cast<std::size_t>(n) * n, -1);
    for (std::size_t i = 0; i < links.size(); ++i) {
        index_[links[i].src * n + links[i].dst] = static_cast<int>(i);
    }
}

bool Topology::operator==(const Topology& o) const {
    if (slot != o.slot || max_distance != o.max_distance || latency_swapped != o.latency_swapped ||
        nodes.size() != o.nodes.size() || links.size() != o.links.size()) {
        return false;
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& a = nodes[i];
        const Node& b = o.nodes[i];
        if (a.id != b.id || a.layer != b.layer || a.position != b.position ||
            a.compute_capacity != b.compute_capacity || a.compute_available != b.compute_available ||
            a.compute_cost != b.compute_cost) {
            return false;
        }
    }
    for (std::size_t i = 0; i < links.size(); ++i) {
        const Link& a = links[i];
        const Link& b = o.links[i];
        if (a.src != b.src || a.dst != b.dst || a.latency != b.latency || a.capacity != b.capacity ||
            a.capacity_available != b.capacity_available || a.cost != b.cost || a.reserved != b.reserved) {
            return false;
        }
    }
    return true;
}

Topology build_topology(const NetworkConfig& config, std::uint64_t seed) {
    const int ntn = config.air_nodes + config.space_nodes;
    const int total = config.ground_nodes + ntn;
    if (config.ground_nodes < 0 || ntn < 0 || total < 2) {
        throw ConfigError("topology needs at least 2 nodes");
    }
    if (ntn > 0 && config.ground_nodes < 4) {
        throw ConfigError("non-terrestrial nearest-neighbour linking needs at least 4 ground nodes");
    }
    if (config.area_km <= 0.0 || config.compute_min <= 0.0 || config.compute_max < config.compute_min) {
        throw ConfigError("invalid area or compute range");
    }
    if (config.air_period < 1 || config.space_period < 1) throw ConfigError("orbit period must be >= 1");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    Topology topo;
    const double height = std::max(config.space_altitude_km, config.air_altitude_km);
    topo.max_distance =
        std::sqrt(2.0 * config.area_km * config.area_km + height * height);

    auto add_node = [&](Layer layer) {
        Node node;
        node.id = topo.num_nodes();
        node.layer = layer;
        node.compute_capacity = uniform(config.compute_min, config.compute_max);
        node.compute_available = node.compute_capacity;
        node.compute_cost = node.compute_capacity;
        if (layer == Layer::Ground) {
            node.position = {uniform(0.0, config.area_km), uniform(0.0, config.area_km), 0.0};
        } else {
            MobilitySpec orbit;
            orbit.period = layer == Layer::Air ? config.air_period : config.space_period;
            orbit.radius = uniform(0.1, 0.25) * config.area_km;
            orbit.center = {uniform(orbit.radius, config.area_km - orbit.radius),
                            uniform(orbit.radius, config.area_km - orbit.radius),
                            layer == Layer::Air ? config.air_altitude_km : config.space_altitude_km};
            orbit.phase = uniform(0.0, 2.0 * std::numbers::pi);
            node.orbit = orbit;
            node.position = orbit_position(orbit, 0);
        }
        topo.nodes.push_back(node);
    };
    for (int i = 0; i < config.ground_nodes; ++i) add_node(Layer::Ground);
    for (int i = 0; i < config.air_nodes; ++i) add_node(Layer::Air);
    for (int i = 0; i < config.space_nodes; ++i) add_node(Layer::Space);

    topo.nearest_links = config.neighbours;
    rebuild_links(topo, std::min(config.neighbours, total - 1));
    return topo;
}

Topology advance(Topology topology) {
    ++topology.slot;
    for (Node& node : topology.nodes) {
        if (node.orbit) node.position = orbit_position(*node.orbit, topology.slot);
    }
    rebuild_links(topology, std::min(topology.nearest_links, topology.num_nodes() - 1));
    return topology;
}

Topology apply_perturbation(Topology topology, const PerturbationEvent& event) {
    switch (event.kind) {
        case EventKind::LatencySwap:
            reverse_latency_ranks(topology.links);
            topology.latency_swapped = !topology.latency_swapped;
            return topology;
    }
    throw UnsupportedEvent("unsupported perturbation kind " +
                           std::to_string(static_cast<int>(event.kind)));
}

std::vector<NodeId> nearest_nodes(const Topology& topology, NodeId node, int count) {
    std::vector<std::pair<double, NodeId>> ranked;
    for (const Node& other : topology.nodes) {
        if (other.id == node) continue;
        ranked.emplace_back(distance(topology.nodes[node].position, other.position), other.id);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<NodeId> out;
    for (int i = 0; i < count && i < static_cast<int>(ranked.size()); ++i) out.push_back(ranked[i].second);
    return out;
}

std::vector<Path> enumerate_paths(const Topology& topology, NodeId src, NodeId dst, int max_hops) {
    std::vector<Path> out;
    const int n = topology.num_nodes();
    if (src < 0 || dst < 0 || src >= n || dst >= n) return out;
    if (src == dst) {
        Path p;
        p.nodes = {src};
        out.push_back(p);
        return out;
    }
    std::vector<std::vector<NodeId>> adjacency(n);
    for (const Link& l : topology.links) adjacency[l.src].push_back(l.dst);
    for (auto& a : adjacency) std::sort(a.begin(), a.end());

    std::vector<char> visited(n, 0);
    Path current;
    current.nodes = {src};
    visited[src] = 1;

    auto dfs = [&](auto&& self, NodeId at) -> void {
        if (current.hops() >= max_hops) return;
        for (NodeId next : adjacency[at]) {
            if (visited[next]) continue;
            const Link& l = *topology.find_link(at, next);
            Path saved = current;
            current.nodes.push_back(next);
            current.latency += l.latency;
            current.cost += l.cost;
            current.bottleneck_available = std::min(current.bottleneck_available, l.capacity_available);
            current.bottleneck_capacity = std::min(current.bottleneck_capacity, l.capacity);
            if (next == dst) {
                out.push_back(current);
            } else {
                visited[next] = 1;
                self(self, next);
                visited[next] = 0;
            }
            current = std::move(saved);
        }
    };
    dfs(dfs, src);
    return out;
}

std::vector<Path> candidate_routes(const Topology& topology, NodeId src, NodeId dst, int max_hops,
                                   int limit) {
    std::vector<Path> paths = enumerate_paths(topology, src, dst, max_hops);
    std::stable_sort(paths.begin(), paths.end(),
                     [](const Path& a, const Path& b) { return a.hops() < b.hops(); });
    if (limit >= 0 && static_cast<int>(paths.size()) > limit) paths.resize(limit);
    return paths;
}

void grant(Topology& topology, const AllocationRecord& allocation) {
    for (std::size_t b = 0; b < allocation.hosts.size(); ++b) {
        topology.reserve_compute(allocation.hosts[b], allocation.compute[b]);
    }
    for (std::size_t i = 0; i + 1 < allocation.path.size(); ++i) {
        topology.reserve_link(allocation.path[i], allocation.path[i + 1], allocation.capacity_amount);
    }
}

void release(Topology& topology, const AllocationRecord& allocation) {
    for (std::size_t b = 0; b < allocation.hosts.size(); ++b) {
        topology.release_compute(allocation.hosts[b], allocation.compute[b]);
    }
    for (std::size_t i = 0; i + 1 < allocation.path.size(); ++i) {
        topology.release_link(allocation.path[i], allocation.path[i + 1], allocation.capacity_amount);
    }
}

double delivered_rate(const Topology& topology, const AllocationRecord& allocation) {
    double rate = allocation.capacity_amount;
    for (std::size_t i = 0; i + 1 < allocation.path.size(); ++i) {
        const Link* l = topology.find_link(allocation.path[i], allocation.path[i + 1]);
        if (l == nullptr) return 0.0;
        double hop = allocation.capacity_amount;
        if (l->reserved > l->capacity + kCapacityEpsilon) hop *= l->capacity / l->reserved;
        rate = std::min(rate, hop);
    }
    return rate;
}

std::string render_feedback(const User& user, const AllocationRecord* allocation,
                            const Topology& topology, const ServiceSpec& service) {
    if (allocation == nullptr || user.status != UserStatus::Served) return kNoFeedback;
    const double ratio = service.rate_requirement > 0.0
                             ? delivered_rate(topology, *allocation) / service.rate_requirement
                             : 1.0;
    if (ratio >= 1.0) return "received image at 1920x1080";
    if (ratio >= 0.5) return "received image at 960x540";
    return "received image at 480x270";
}

}  // namespace arc
