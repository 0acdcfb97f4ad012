#pragma once
// Scenario files, the per-slot simulation loop, ablation modes and metrics.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "arc/executor.hpp"
#include "arc/oracle.hpp"
#include "arc/rag.hpp"
#include "arc/sequencer.hpp"

namespace arc {

enum class Mode { Arc, RuArc, NrArc };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Users drawn at scenario start when no explicit [user] sections exist: each
// attaches to a uniform ground node and gets its own single-block service.
struct UserGeneration {
    int count = 0;
    double demand_min = 2.0;
    double demand_max = 5.0;
    double rate_min = 10.0;
    double rate_max = 30.0;
    std::string qoe = "the image must be 1920x1080";
    double qoe_threshold = 0.99;
};

struct ScheduledEvent {
    long iteration = 0;
    std::optional<PerturbationEvent> perturbation;
    std::optional<StrategistCommand> command;
};

struct ScenarioConfig {
    NetworkConfig network;
    DecisionLimits limits;
    std::vector<ServiceSpec> services;
    std::vector<User> users;
    UserGeneration generate;

    long iterations = 5000;
    std::uint64_t seed = 1;
    Mode mode = Mode::Arc;
    Backend backend = Backend::Heuristic;
    ObjectiveKind objective = ObjectiveKind::MinCost;
    long pretrain_slots = 2000;
    int hold_slots = 1;
    long chat_deadline_ms = 10000;

    int window = 16;
    // Shrink the window by one every `window_adapt_every` slots unless the
    // mean reward fell by more than `window_adapt_drop` (0 disables).
    long window_adapt_every = 0;
    double window_adapt_drop = 0.05;
    int exemplar_k = 2;
    int exemplar_m = 8;
    int bootstrap_exemplars = 30;
    int bootstrap_users = 2;

    AgentConfig agent;
    double nr_temperature = 1.0;

    std::vector<ScheduledEvent> events;  // sorted by iteration
};

ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
// Throws ConfigError on inconsistent settings.
void validate(const ScenarioConfig& config);

struct Population {
    std::vector<User> users;
    std::vector<ServiceSpec> services;
};

// Explicit users and services, or the generated ones (deterministic in seed).
Population materialize(const ScenarioConfig& config, const Topology& topology);

struct MetricsRow {
    long iteration = 0;
    Mode mode = Mode::Arc;
    double normalized_cost_score = 0.0;
    int supported_users = 0;
    double mean_reward = 0.0;

    bool operator==(const MetricsRow&) const = default;
};

struct RunStats {
    long train_calls = 0;
    long agents_constructed = 0;
    long transitions_offered = 0;
    long qoe_failures = 0;
    long remote_fallbacks = 0;
    long exemplars_stored = 0;
};

struct SlotView {
    long iteration;
    const Topology& topology;
    const std::vector<User>& users;
    const AllocationTable& allocations;
    const std::vector<RewardRecord>& rewards;
    const Objective& objective;
    const StateHistory& history;
    // The state as indexed before sequencing.
    const State& indexed;
};

struct RunHooks {
    // Called right after the environment advances, before QoE evaluation.
    std::function<void(long iteration, Topology&)> after_advance;
    // Called at the end of every iteration, after perturbations.
    std::function<void(const SlotView&)> observer;
};

// Agents and dynamic knowledge carried from the warm-up into a run.
struct Pretrained {
    std::array<Agent, kNumActionKinds> agents;
    KnowledgeBase dkb{KnowledgeKind::Dynamic};
    long slots = 0;
};

class Simulation {
public:
    Simulation(ScenarioConfig config, RunHooks hooks = {}, std::optional<Pretrained> pretrained = std::nullopt,
               RunStats* stats = nullptr);

    MetricsRow step();
    long iteration() const { return iteration_; }
    int window() const { return window_; }

    const Topology& topology() const { return topology_; }
    const std::vector<User>& users() const { return users_; }
    const std::vector<ServiceSpec>& services() const { return services_; }
    const KnowledgeBase& dkb() const { return dkb_; }
    const std::optional<std::array<Agent, kNumActionKinds>>& agents() const { return agents_; }
    const Objective& objective() const { return objective_; }
    const std::string& last_prompt() const { return last_prompt_; }

    Pretrained release_learned();
    // Rows carry only iteration and mode when off.
    void set_metrics(bool on) { metrics_on_ = on; }

private:
    struct Pending {
        std::vector<ActionDecision> decisions;
        std::vector<StepRecord> steps;
        Topology granted;
        StateHistory history;
        Objective objective;
    };

    void evaluate_standing(std::vector<bool>& qoe_met);
    void learn(const std::vector<RewardRecord>& rewards);
    void adapt_window(const std::vector<RewardRecord>& rewards);
    MetricsRow metrics(const std::vector<RewardRecord>& rewards) const;

    ScenarioConfig config_;
    RunHooks hooks_;
    RunStats local_stats_;
    RunStats* stats_;
    std::mt19937_64 rng_;
    std::mt19937_64 act_rng_;
    std::mt19937_64 replay_rng_;

    Topology topology_;
    std::vector<User> users_;
    std::vector<ServiceSpec> services_;
    AllocationTable allocations_;
    KnowledgeBase skb_;
    KnowledgeBase dkb_{KnowledgeKind::Dynamic};
    StateHistory history_;
    Objective objective_;
    std::optional<std::array<Agent, kNumActionKinds>> agents_;
    std::optional<Pending> pending_;
    long iteration_ = 0;
    long slot_offset_ = 0;
    bool bootstrapped_ = false;
    std::string last_prompt_;
    State indexed_;
    int window_ = 1;
    double block_reward_ = 0.0;
    std::optional<double> previous_block_reward_;
    bool metrics_on_ = true;
};

// Warm-up of config.pretrain_slots ARC slots (no events, no metrics).
Pretrained pretrain(const ScenarioConfig& config, RunStats* stats = nullptr);

// Full run in config.mode: ARC and RU-ARC start from the warm-up, NR-ARC
// builds no agents. `stats` covers the run after the warm-up.
std::vector<MetricsRow> run(const ScenarioConfig& config, const RunHooks& hooks = {},
                            RunStats* stats = nullptr);
// As run, starting from a given warm-up (ignored in NR-ARC).
std::vector<MetricsRow> run_with(const ScenarioConfig& config, std::optional<Pretrained> warm,
                                 const RunHooks& hooks = {}, RunStats* stats = nullptr);

inline constexpr const char* kCsvHeader = "iteration,mode,normalized_cost_score,supported_users,mean_reward";

std::string format_csv(const std::vector<MetricsRow>& rows);
void emit_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> parse_csv(const std::string& text);
std::vector<MetricsRow> read_csv(const std::string& path);

// Trailing moving average (edge windows normalized by their actual length).
std::vector<double> smooth(const std::vector<double>& values, int window);

}  // namespace arc
