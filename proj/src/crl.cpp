#include "arc/crl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace arc {

namespace {

// Fixed bucket/sign per parameter position, from a splitmix64 hash.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Eigen::MatrixXd stack_states(const std::vector<const Transition*>& batch, bool next) {
    const auto& first = next ? batch.front()->next_state : batch.front()->state;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(first.size()), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& s = next ? batch[i]->next_state : batch[i]->state;
        m.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    }
    return m;
}

double feature_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }

}  // namespace

Agent make_agent(ActionKind kind, int input_dim, int actions, const AgentConfig& config,
                 std::mt19937_64& rng) {
    Agent agent;
    agent.kind = kind;
    agent.config = config;
    agent.training = QNetwork(input_dim, config.hidden, actions);
    agent.training.initialize(rng);
    agent.acting = agent.training;
    agent.buffer.capacity = config.buffer_capacity;
    agent.epsilon = config.epsilon_start;
    return agent;
}

double epsilon_at(const AgentConfig& c, long slot) {
    if (c.epsilon_decay_slots <= 0 || slot >= c.epsilon_decay_slots) return c.epsilon_end;
    const double frac = static_cast<double>(slot) / static_cast<double>(c.epsilon_decay_slots);
    return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac;
}

Eigen::VectorXd sketch_gradient(const Eigen::VectorXd& gradient) {
    // Bucket and sign per coordinate, extended on demand.
    thread_local std::vector<std::pair<int, double>> table;
    while (static_cast<Eigen::Index>(table.size()) < gradient.size()) {
        const std::uint64_t h = mix(static_cast<std::uint64_t>(table.size()));
        table.emplace_back(static_cast<int>(h % kSketchDim), ((h >> 32) & 1U) ? 1.0 : -1.0);
    }
    Eigen::VectorXd s = Eigen::VectorXd::Zero(kSketchDim);
    for (Eigen::Index i = 0; i < gradient.size(); ++i) {
        const auto& [bucket, sign] = table[static_cast<std::size_t>(i)];
        s[bucket] += sign * gradient[i];
    }
    const double n = s.norm();
    if (n == 0.0 || !std::isfinite(n)) {
        s.setZero();
        s[0] = 1.0;
        return s;
    }
    return s / n;
}

Eigen::VectorXd gradient_feature(const QNetwork& net, const Transition& t, double gamma) {
    const std::vector<const Transition*> one{&t};
    const Eigen::VectorXd y = double_q_targets(net, net, one, gamma);
    Eigen::VectorXd grad;
    td_loss_gradient(net, stack_states(one, false), {t.action}, y, grad);
    return sketch_gradient(grad);
}

bool gdss_admit(ReplayBuffer& buffer, Transition t, int compare_sample, std::mt19937_64& rng) {
    if (!buffer.full()) {
        buffer.items.push_back(std::move(t));
        ++buffer.admitted;
        return true;
    }
    if (buffer.capacity == 0) {
        ++buffer.rejected;
        return false;
    }
    const std::size_t n = buffer.items.size();
    const std::size_t s = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(compare_sample, 1)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates for a sample without replacement.
    for (std::size_t i = 0; i < s; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(s);
    std::sort(idx.begin(), idx.end());

    double score_new = -1.0;
    for (std::size_t j : idx) score_new = std::max(score_new, feature_cosine(t.grad_feature, buffer.items[j].grad_feature));

    std::size_t worst = idx.front();
    double worst_score = -2.0;
    for (std::size_t a : idx) {
        double sc = -1.0;
        for (std::size_t b : idx) {
            if (a == b) continue;
            sc = std::max(sc, feature_cosine(buffer.items[a].grad_feature, buffer.items[b].grad_feature));
        }
        if (sc > worst_score) {
            worst_score = sc;
            worst = a;
        }
    }
    if (score_new < worst_score) {
        buffer.items[worst] = std::move(t);
        ++buffer.admitted;
        return true;
    }
    ++buffer.rejected;
    return false;
}

bool gdss_insert(ReplayBuffer& buffer, Transition t, const QNetwork& net, double gamma,
                 int compare_sample, std::mt19937_64& rng) {
    t.grad_feature = gradient_feature(net, t, gamma);
    return gdss_admit(buffer, std::move(t), compare_sample, rng);
}

void fifo_insert(ReplayBuffer& buffer, Transition t) {
    if (buffer.capacity == 0) return;
    ++buffer.admitted;
    if (!buffer.full()) {
        buffer.items.push_back(std::move(t));
        return;
    }
    buffer.items[buffer.cursor] = std::move(t);
    buffer.cursor = (buffer.cursor + 1) % buffer.capacity;
}

double mean_pairwise_cosine(const ReplayBuffer& buffer) {
    const std::size_t n = buffer.items.size();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            sum += feature_cosine(buffer.items[i].grad_feature, buffer.items[j].grad_feature);
        }
    }
    return sum / static_cast<double>(n * (n - 1) / 2);
}

Eigen::VectorXd double_q_targets(const QNetwork& acting, const QNetwork& training,
                                 const std::vector<const Transition*>& batch, double gamma) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
    std::vector<const Transition*> open;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        y[static_cast<Eigen::Index>(i)] = batch[i]->reward;
        if (!batch[i]->terminal && gamma != 0.0) open.push_back(batch[i]);
    }
    if (open.empty()) return y;
    const Eigen::MatrixXd next = stack_states(open, true);
    const Eigen::MatrixXd q_act = forward(acting, next).q;
    const Eigen::MatrixXd q_train = forward(training, next).q;
    std::size_t k = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i]->terminal || gamma == 0.0) continue;
        const auto col = static_cast<Eigen::Index>(k++);
        int best = -1;
        auto consider = [&](int a) {
            if (best < 0 || q_act(a, col) > q_act(best, col)) best = a;
        };
        if (batch[i]->next_feasible.empty()) {
            for (int a = 0; a < acting.actions(); ++a) consider(a);
        } else {
            for (int a : batch[i]->next_feasible) consider(a);
        }
        y[static_cast<Eigen::Index>(i)] += gamma * q_train(best, col);
    }
    return y;
}

std::optional<double> train_step(Agent& agent, int batch_size, double gamma, double lr,
                                 std::mt19937_64& rng) {
    auto& items = agent.buffer.items;
    if (items.empty() || batch_size < 1) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
    std::vector<const Transition*> batch;
    std::vector<int> actions;
    for (int i = 0; i < batch_size; ++i) {
        const Transition* t = &items[pick(rng)];
        batch.push_back(t);
        actions.push_back(t->action);
    }
    const Eigen::VectorXd y = double_q_targets(agent.acting, agent.training, batch, gamma);
    Eigen::VectorXd grad;
    const double loss = td_loss_gradient(agent.training, stack_states(batch, false), actions, y, grad);

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    AdamState& s = agent.adam;
    if (s.m.size() != grad.size()) {
        s.m = Eigen::VectorXd::Zero(grad.size());
        s.v = Eigen::VectorXd::Zero(grad.size());
        s.step = 0;
    }
    ++s.step;
    s.m = beta1 * s.m + (1.0 - beta1) * grad;
    s.v = beta2 * s.v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
    agent.training.parameters().array() -=
        lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
    ++agent.train_steps;
    return loss;
}

void sync(Agent& agent) { agent.acting = agent.training; }

}  // namespace arc
