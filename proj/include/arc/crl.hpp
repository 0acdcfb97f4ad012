#pragma once
// Replay buffers with gradient-diversity admission, double-Q batch
// training and acting-network sync.

#include <optional>
#include <random>
#include <vector>

#include "arc/mdp.hpp"
#include "arc/qnetwork.hpp"

namespace arc {

inline constexpr int kSketchDim = 128;

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    // Feasible action indices at next_state; empty means all.
    std::vector<int> next_feasible;
    bool terminal = true;
    Eigen::VectorXd grad_feature;
};

struct ReplayBuffer {
    std::size_t capacity = 2048;
    std::vector<Transition> items;
    std::size_t admitted = 0;
    std::size_t rejected = 0;
    // Next slot overwritten by FIFO replacement.
    std::size_t cursor = 0;

    bool full() const { return items.size() >= capacity; }
};

struct AgentConfig {
    int hidden = 64;
    std::size_t buffer_capacity = 2048;
    int batch_size = 64;
    double gamma = 0.9;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    long epsilon_decay_slots = 2000;
    long sync_every = 100;
    int train_steps_per_slot = 1;
    int compare_sample = 32;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
};

struct Agent {
    ActionKind kind = ActionKind::Placement;
    QNetwork acting;
    QNetwork training;
    ReplayBuffer buffer;
    double epsilon = 1.0;
    AdamState adam;
    long train_steps = 0;
    AgentConfig config;
};

Agent make_agent(ActionKind kind, int input_dim, int actions, const AgentConfig& config,
                 std::mt19937_64& rng);

// Linear decay from epsilon_start to epsilon_end over epsilon_decay_slots.
double epsilon_at(const AgentConfig& config, long slot);

// Signed-hash projection of a flat gradient to kSketchDim, L2-normalized.
// A zero gradient maps to the first basis vector.
Eigen::VectorXd sketch_gradient(const Eigen::VectorXd& gradient);

// Single-sample TD-loss gradient of `net` (targets from the same net,
// treated as constants), sketched.
Eigen::VectorXd gradient_feature(const QNetwork& net, const Transition& t, double gamma);

// Admission with a precomputed grad_feature.
bool gdss_admit(ReplayBuffer& buffer, Transition t, int compare_sample, std::mt19937_64& rng);
bool gdss_insert(ReplayBuffer& buffer, Transition t, const QNetwork& net, double gamma,
                 int compare_sample, std::mt19937_64& rng);
// Baseline: overwrite the oldest item when full.
void fifo_insert(ReplayBuffer& buffer, Transition t);

double mean_pairwise_cosine(const ReplayBuffer& buffer);

// Double-Q targets: y = r + gamma * Q_training(s', argmax_a Q_acting(s', a)),
// the argmax restricted to next_feasible.
Eigen::VectorXd double_q_targets(const QNetwork& acting, const QNetwork& training,
                                 const std::vector<const Transition*>& batch, double gamma);

// One Adam step on the training network over a uniform batch. nullopt when
// the buffer is empty.
std::optional<double> train_step(Agent& agent, int batch_size, double gamma, double lr,
                                 std::mt19937_64& rng);

void sync(Agent& agent);

}  // namespace arc
