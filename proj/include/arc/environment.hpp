#pragma once
// Three-layer infrastructure model: ground/air/space nodes, periodic
// mobility, distance-derived links, perturbations, services and users.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace arc {

using NodeId = int;
using Vec3 = std::array<double, 3>;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedEvent : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Layer { Ground, Air, Space };

const char* to_string(Layer layer);

// Circular orbit in a horizontal plane; angle advances one step per slot.
struct MobilitySpec {
    int period = 1;
    double phase = 0.0;
    double radius = 0.0;
    Vec3 center{};
};

Vec3 orbit_position(const MobilitySpec& orbit, long slot);

struct Node {
    NodeId id = 0;
    Layer layer = Layer::Ground;
    Vec3 position{};
    double compute_capacity = 0.0;
    double compute_available = 0.0;
    double compute_cost = 0.0;
    std::optional<MobilitySpec> orbit;
};

struct Link {
    NodeId src = 0;
    NodeId dst = 0;
    double latency = 0.0;
    double capacity = 0.0;
    double capacity_available = 0.0;
    double cost = 0.0;
    // Sum of grants currently reserved on this link; may exceed capacity
    // after mobility shrinks the link.
    double reserved = 0.0;
    bool wired = false;
};

// Link metric ranges of the reference scenario.
inline constexpr double kMinLatency = 1.0;
inline constexpr double kMaxLatency = 10.0;
inline constexpr double kMinLinkCapacity = 10.0;
inline constexpr double kMaxLinkCapacity = 100.0;
inline constexpr double kMinCompute = 10.0;
inline constexpr double kMaxCompute = 100.0;
// Slack for comparing accumulated grants against capacities.
inline constexpr double kCapacityEpsilon = 1e-9;

double latency_from_distance(double distance, double max_distance);
double capacity_from_latency(double latency);

class Topology {
public:
    std::vector<Node> nodes;
    std::vector<Link> links;  // sorted by (src, dst)
    long slot = 0;
    double max_distance = 1.0;
    // Set by a LatencySwap; subsequent recomputations keep latencies
    // rank-reversed.
    bool latency_swapped = false;
    int nearest_links = 3;

    int num_nodes() const { return static_cast<int>(nodes.size()); }

    const Link* find_link(NodeId src, NodeId dst) const;
    Link* find_link(NodeId src, NodeId dst);
    int link_index(NodeId src, NodeId dst) const;

    // Out-neighbours in ascending id order.
    std::vector<NodeId> neighbours(NodeId node) const;

    void reserve_link(NodeId src, NodeId dst, double amount);
    void release_link(NodeId src, NodeId dst, double amount);
    void reserve_compute(NodeId node, double amount);
    void release_compute(NodeId node, double amount);

    // Re-sorts links and rebuilds the dense (src, dst) lookup.
    void reindex();

    bool operator==(const Topology& other) const;

private:
    std::vector<int> index_;
};

struct NetworkConfig {
    int ground_nodes = 5;
    int air_nodes = 3;
    int space_nodes = 2;
    double area_km = 1000.0;
    double air_altitude_km = 20.0;
    double space_altitude_km = 550.0;
    int air_period = 24;
    int space_period = 12;
    double compute_min = kMinCompute;
    double compute_max = kMaxCompute;
    int neighbours = 3;
};

Topology build_topology(const NetworkConfig& config, std::uint64_t seed);
Topology advance(Topology topology);

enum class EventKind { LatencySwap };

struct PerturbationEvent {
    long iteration = 0;
    EventKind kind = EventKind::LatencySwap;
};

Topology apply_perturbation(Topology topology, const PerturbationEvent& event);

// The non-self nodes nearest to `node`, ascending by (distance, id).
std::vector<NodeId> nearest_nodes(const Topology& topology, NodeId node, int count);

struct Path {
    std::vector<NodeId> nodes;
    double latency = 0.0;
    double bottleneck_available = std::numeric_limits<double>::infinity();
    double bottleneck_capacity = std::numeric_limits<double>::infinity();
    double cost = 0.0;

    int hops() const { return static_cast<int>(nodes.size()) - 1; }
};

// All simple paths with at most max_hops links, lexicographic by node ids.
std::vector<Path> enumerate_paths(const Topology& topology, NodeId src, NodeId dst,
                                  int max_hops);

// Routing candidates: enumerate_paths re-ordered by hop count (stable), truncated.
std::vector<Path> candidate_routes(const Topology& topology, NodeId src, NodeId dst,
                                   int max_hops, int limit);

struct FunctionalBlock {
    int id = 0;
    double compute_demand = 0.0;
};

struct ServiceSpec {
    int id = 0;
    std::vector<FunctionalBlock> blocks;
    std::string qoe_requirement;
    double qoe_threshold = 0.99;
    double rate_requirement = 0.0;
};

enum class UserStatus { Requesting, Served, Unsupported };

struct User {
    int id = 0;
    NodeId attach_node = 0;
    int service = 0;
    UserStatus status = UserStatus::Requesting;
};

struct AllocationRecord {
    int user = 0;
    std::vector<NodeId> hosts;         // one per functional block
    std::vector<double> compute;       // granted MIPS per block
    std::vector<NodeId> path;          // attach node -> host of block 0
    double capacity_amount = 0.0;      // granted Mbps on every hop
    long slot = 0;
};

// Grants an allocation's resources on the topology / returns them. Release
// skips links that no longer exist.
void grant(Topology& topology, const AllocationRecord& allocation);
void release(Topology& topology, const AllocationRecord& allocation);

// Throughput actually delivered along the allocated path: each hop delivers
// the grant, scaled down proportionally when the link is oversubscribed; a
// vanished hop delivers 0.
double delivered_rate(const Topology& topology, const AllocationRecord& allocation);

inline constexpr const char* kNoFeedback = "<no feedback>";

std::string render_feedback(const User& user, const AllocationRecord* allocation,
                            const Topology& topology, const ServiceSpec& service);

}  // namespace arc
