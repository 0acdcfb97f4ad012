#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "arc/crl.hpp"
#include "arc/executor.hpp"

using namespace arc;

namespace {

QNetwork aggregation_net() {
    QNetwork net(1, 1, 3);
    auto& p = net.parameters();
    p[net.offset_w1()] = 1.0;
    p[net.offset_w2()] = 1.0;
    p[net.offset_wv()] = 1.0;
    for (int a = 0; a < 3; ++a) p[net.offset_wa() + a] = a + 1.0;
    return net;
}

MaskedState masked_of(int dim, int actions, std::vector<int> feasible) {
    MaskedState m;
    m.values.assign(dim, 0.5);
    m.decisions.assign(actions, std::nullopt);
    for (int a : feasible) {
        ActionDecision d;
        d.action_index = a;
        d.node = a;
        m.decisions[a] = d;
    }
    return m;
}

Transition transition(std::vector<double> s, int action, double reward) {
    Transition t;
    t.state = std::move(s);
    t.action = action;
    t.reward = reward;
    return t;
}

Transition with_feature(Eigen::VectorXd f) {
    Transition t;
    t.grad_feature = std::move(f);
    return t;
}

Eigen::VectorXd basis(int i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kSketchDim);
    v[i] = 1.0;
    return v;
}

}  // namespace

TEST_CASE("dueling aggregation") {
    QNetwork net = aggregation_net();
    const Eigen::VectorXd q = q_forward(net, {1.0});
    CHECK(q[0] == 0.0);
    CHECK(q[1] == 1.0);
    CHECK(q[2] == 2.0);

    for (int a = 0; a < 3; ++a) net.parameters()[net.offset_ba() + a] += 4.0;
    CHECK(q_forward(net, {1.0}) == q);

    std::mt19937_64 rng(3);
    QNetwork r(6, 5, 4);
    r.initialize(rng);
    const Eigen::VectorXd before = q_forward(r, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    for (int a = 0; a < 4; ++a) r.parameters()[r.offset_ba() + a] += 0.37;
    const Eigen::VectorXd after = q_forward(r, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    CHECK((after - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero network is indifferent") {
    const QNetwork net(5, 4, 3);
    const Eigen::VectorXd q = q_forward(net, {1, 2, 3, 4, 5});
    CHECK(q[0] == q[1]);
    CHECK(q[1] == q[2]);
}

TEST_CASE("input dimension is checked") {
    const QNetwork net(5, 4, 3);
    CHECK_THROWS_AS(q_forward(net, {1, 2}), ShapeError);
}

TEST_CASE("action selection") {
    std::mt19937_64 rng(8);
    Agent agent;
    agent.acting = QNetwork(3, 4, 3);
    agent.acting.initialize(rng);

    SUBCASE("exploration stays feasible") {
        agent.epsilon = 1.0;
        const MaskedState m = masked_of(3, 3, {0, 2});
        for (int i = 0; i < 200; ++i) {
            const int a = select_action(agent, m, rng).action_index;
            CHECK((a == 0 || a == 2));
        }
    }
    SUBCASE("greedy argmax, restricted to feasible") {
        agent.epsilon = 0.0;
        QNetwork net(1, 1, 3);
        auto& p = net.parameters();
        p[net.offset_w1()] = 1.0;
        p[net.offset_w2()] = 1.0;
        p[net.offset_wa()] = 0.1;
        p[net.offset_wa() + 1] = 0.9;
        p[net.offset_wa() + 2] = 0.3;
        agent.acting = net;
        MaskedState m = masked_of(1, 3, {0, 1, 2});
        m.values = {1.0};
        CHECK(select_action(agent, m, rng).action_index == 1);
        m = masked_of(1, 3, {0, 2});
        m.values = {1.0};
        CHECK(select_action(agent, m, rng).action_index == 2);
    }
    SUBCASE("ties go to the lowest index") {
        agent.epsilon = 0.0;
        agent.acting = QNetwork(3, 4, 3);
        CHECK(select_action(agent, masked_of(3, 3, {1, 2}), rng).action_index == 1);
    }
}

TEST_CASE("analytic gradient matches finite differences") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        QNetwork net(8, 4 + trial % 3, 2 + trial % 4);
        net.initialize(rng);
        const int b = 6;
        Eigen::MatrixXd x(8, b);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        std::vector<int> actions;
        Eigen::VectorXd y(b);
        for (int i = 0; i < b; ++i) {
            actions.push_back(static_cast<int>(rng() % net.actions()));
            y[i] = g(rng);
        }
        Eigen::VectorXd grad;
        td_loss_gradient(net, x, actions, y, grad);
        Eigen::VectorXd fd(grad.size());
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < grad.size(); ++i) {
            QNetwork plus = net, minus = net;
            plus.parameters()[i] += h;
            minus.parameters()[i] -= h;
            fd[i] = (td_loss(plus, x, actions, y) - td_loss(minus, x, actions, y)) / (2 * h);
        }
        const double rel = (grad - fd).norm() / std::max(1e-12, grad.norm() + fd.norm());
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("double-Q target decouples argmax and value") {
    // Acting net prefers action 0, training net prefers action 1.
    QNetwork acting = aggregation_net();
    for (int a = 0; a < 3; ++a) acting.parameters()[acting.offset_wa() + a] = a == 0 ? 5.0 : 0.0;
    QNetwork training = aggregation_net();  // Q = [0, 1, 2] at input 1
    Transition t = transition({1.0}, 0, 0.5);
    t.next_state = {1.0};
    t.terminal = false;
    const Eigen::VectorXd y = double_q_targets(acting, training, {&t}, 0.5);
    CHECK(y[0] == doctest::Approx(0.5 + 0.5 * 0.0));

    t.next_feasible = {1, 2};
    CHECK(double_q_targets(acting, training, {&t}, 0.5)[0] == doctest::Approx(0.5 + 0.5 * 1.0));
    t.terminal = true;
    CHECK(double_q_targets(acting, training, {&t}, 0.5)[0] == 0.5);
}

TEST_CASE("sync copies exactly and isolates") {
    std::mt19937_64 rng(4);
    AgentConfig cfg;
    cfg.hidden = 8;
    Agent agent = make_agent(ActionKind::Placement, 4, 3, cfg, rng);
    agent.training.initialize(rng);
    sync(agent);
    const std::vector<double> x{0.3, -0.2, 0.9, 0.1};
    CHECK(q_forward(agent.acting, x) == q_forward(agent.training, x));
    sync(agent);
    CHECK(agent.acting.parameters() == agent.training.parameters());

    for (int i = 0; i < 8; ++i) gdss_insert(agent.buffer, transition(x, i % 3, 1.0), agent.training, 0.9, 32, rng);
    const Eigen::VectorXd frozen = agent.acting.parameters();
    for (int i = 0; i < 5; ++i) train_step(agent, 4, 0.9, 1e-2, rng);
    CHECK(agent.acting.parameters() == frozen);
    CHECK_FALSE(agent.training.parameters() == frozen);
}

TEST_CASE("training edge cases") {
    std::mt19937_64 rng(6);
    AgentConfig cfg;
    cfg.hidden = 8;
    Agent agent = make_agent(ActionKind::Routing, 3, 2, cfg, rng);
    CHECK_FALSE(train_step(agent, 8, 0.9, 1e-3, rng).has_value());

    for (int i = 0; i < 20; ++i) {
        fifo_insert(agent.buffer, transition({0.1 * i, 0.5, 1.0}, i % 2, 0.0));
    }
    double loss = 1.0;
    for (int i = 0; i < 1500; ++i) loss = *train_step(agent, 8, 0.0, 1e-2, rng);
    CHECK(loss < 1e-4);
    CHECK(q_forward(agent.training, {0.5, 0.5, 1.0}).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("gdss admission rules") {
    std::mt19937_64 rng(12);
    ReplayBuffer buf;
    buf.capacity = 8;

    SUBCASE("empty buffer admits") { CHECK(gdss_admit(buf, with_feature(basis(0)), 32, rng)); }
    SUBCASE("orthogonal joins a uniform buffer") {
        for (int i = 0; i < 8; ++i) gdss_admit(buf, with_feature(basis(0)), 32, rng);
        CHECK(gdss_admit(buf, with_feature(basis(1)), 32, rng));
        CHECK(buf.items.size() == 8);
    }
    SUBCASE("duplicate of a diverse buffer is rejected") {
        for (int i = 0; i < 8; ++i) gdss_admit(buf, with_feature(basis(i)), 32, rng);
        CHECK_FALSE(gdss_admit(buf, with_feature(basis(3)), 32, rng));
    }
    SUBCASE("bookkeeping") {
        for (int i = 0; i < 100; ++i) {
            Eigen::VectorXd f = Eigen::VectorXd::Random(kSketchDim);
            gdss_admit(buf, with_feature(f.normalized()), 32, rng);
            CHECK(buf.items.size() <= buf.capacity);
        }
        CHECK(buf.admitted + buf.rejected == 100);
    }
}

TEST_CASE("gradient features are unit norm") {
    std::mt19937_64 rng(2);
    QNetwork net(4, 6, 3);
    net.initialize(rng);
    const Eigen::VectorXd f = gradient_feature(net, transition({0.2, 0.4, 0.6, 0.8}, 1, 1.0), 0.9);
    CHECK(f.size() == kSketchDim);
    CHECK(std::abs(f.norm() - 1.0) < 1e-12);
    const Eigen::VectorXd z = sketch_gradient(Eigen::VectorXd::Zero(50));
    CHECK(z.norm() == 1.0);
}

TEST_CASE("epsilon schedule") {
    AgentConfig c;
    CHECK(epsilon_at(c, 0) == 1.0);
    CHECK(epsilon_at(c, 1000) == doctest::Approx(0.525));
    CHECK(epsilon_at(c, 2000) == 0.05);
    CHECK(epsilon_at(c, 99999) == 0.05);
}

TEST_CASE("network persistence") {
    std::mt19937_64 rng(31);
    QNetwork net(7, 5, 3);
    net.initialize(rng);
    const auto path = (std::filesystem::temp_directory_path() / "arc_net.txt").string();
    save_network(net, path);
    const QNetwork back = load_network(path);
    CHECK(back.same_shape(net));
    CHECK(back.parameters() == net.parameters());
    std::filesystem::remove(path);
}
