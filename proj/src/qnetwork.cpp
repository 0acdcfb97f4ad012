#include "arc/qnetwork.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace arc {

QNetwork::QNetwork(int input_dim, int hidden, int actions)
    : input_(input_dim), hidden_(hidden), actions_(actions) {
    if (input_dim < 1 || hidden < 1 || actions < 1) throw ShapeError("network dimensions must be positive");
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset_ba() + actions_));
}

void QNetwork::initialize(std::mt19937_64& rng) {
    params_.setZero();
    auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < count; ++i) params_[static_cast<Eigen::Index>(offset + i)] = u(rng);
    };
    fill(offset_w1(), static_cast<std::size_t>(hidden_) * input_, input_);
    fill(offset_w2(), static_cast<std::size_t>(hidden_) * hidden_, hidden_);
    fill(offset_wv(), hidden_, hidden_);
    fill(offset_wa(), static_cast<std::size_t>(actions_) * hidden_, hidden_);
}

QNetwork::Layers QNetwork::layers() const {
    const double* p = params_.data();
    return {Eigen::Map<const Eigen::MatrixXd>(p + offset_w1(), hidden_, input_),
            Eigen::Map<const Eigen::VectorXd>(p + offset_b1(), hidden_),
            Eigen::Map<const Eigen::MatrixXd>(p + offset_w2(), hidden_, hidden_),
            Eigen::Map<const Eigen::VectorXd>(p + offset_b2(), hidden_),
            Eigen::Map<const Eigen::VectorXd>(p + offset_wv(), hidden_),
            p[offset_bv()],
            Eigen::Map<const Eigen::MatrixXd>(p + offset_wa(), actions_, hidden_),
            Eigen::Map<const Eigen::VectorXd>(p + offset_ba(), actions_)};
}

ForwardPass forward(const QNetwork& net, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != net.input_dim()) {
        throw ShapeError("input dimension " + std::to_string(inputs.rows()) + " != network input " +
                         std::to_string(net.input_dim()));
    }
    const auto L = net.layers();
    ForwardPass f;
    f.h1 = ((L.w1 * inputs).colwise() + L.b1).cwiseMax(0.0);
    f.h2 = ((L.w2 * f.h1).colwise() + L.b2).cwiseMax(0.0);
    f.value = (L.wv.transpose() * f.h2).array() + L.bv;
    f.advantage = (L.wa * f.h2).colwise() + L.ba;
    const Eigen::RowVectorXd mean = f.advantage.colwise().mean();
    f.q = f.advantage;
    f.q.rowwise() += f.value - mean;
    return f;
}

Eigen::VectorXd q_forward(const QNetwork& net, const std::vector<double>& input) {
    if (static_cast<int>(input.size()) != net.input_dim()) {
        throw ShapeError("input dimension " + std::to_string(input.size()) + " != network input " +
                         std::to_string(net.input_dim()));
    }
    const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
    return forward(net, x).q.col(0);
}

double td_loss(const QNetwork& net, const Eigen::MatrixXd& inputs, const std::vector<int>& actions,
               const Eigen::VectorXd& targets) {
    const ForwardPass f = forward(net, inputs);
    const Eigen::Index b = inputs.cols();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double e = f.q(actions[i], i) - targets[i];
        loss += e * e;
    }
    return loss / static_cast<double>(b);
}

double td_loss_gradient(const QNetwork& net, const Eigen::MatrixXd& inputs,
                        const std::vector<int>& actions, const Eigen::VectorXd& targets,
                        Eigen::VectorXd& gradient) {
    const ForwardPass f = forward(net, inputs);
    const auto L = net.layers();
    const Eigen::Index b = inputs.cols();
    const int na = net.actions();

    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(na, b);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double e = f.q(actions[i], i) - targets[i];
        loss += e * e;
        dq(actions[i], i) = 2.0 * e / static_cast<double>(b);
    }
    loss /= static_cast<double>(b);

    const Eigen::RowVectorXd dv = dq.colwise().sum();
    Eigen::MatrixXd da = dq;
    da.rowwise() -= dq.colwise().mean();

    gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    double* g = gradient.data();
    const int h = net.hidden();
    const int in = net.input_dim();
    Eigen::Map<Eigen::MatrixXd> gw1(g + net.offset_w1(), h, in);
    Eigen::Map<Eigen::VectorXd> gb1(g + net.offset_b1(), h);
    Eigen::Map<Eigen::MatrixXd> gw2(g + net.offset_w2(), h, h);
    Eigen::Map<Eigen::VectorXd> gb2(g + net.offset_b2(), h);
    Eigen::Map<Eigen::VectorXd> gwv(g + net.offset_wv(), h);
    Eigen::Map<Eigen::MatrixXd> gwa(g + net.offset_wa(), na, h);
    Eigen::Map<Eigen::VectorXd> gba(g + net.offset_ba(), na);

    gwv = f.h2 * dv.transpose();
    g[net.offset_bv()] = dv.sum();
    gwa = da * f.h2.transpose();
    gba = da.rowwise().sum();

    Eigen::MatrixXd dh2 = L.wv * dv + L.wa.transpose() * da;
    dh2 = dh2.cwiseProduct((f.h2.array() > 0.0).cast<double>().matrix());
    gw2 = dh2 * f.h1.transpose();
    gb2 = dh2.rowwise().sum();

    Eigen::MatrixXd dh1 = L.w2.transpose() * dh2;
    dh1 = dh1.cwiseProduct((f.h1.array() > 0.0).cast<double>().matrix());
    gw1 = dh1 * inputs.transpose();
    gb1 = dh1.rowwise().sum();
    return loss;
}

void save_network(const QNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "arc-qnetwork 1 " << net.input_dim() << " " << net.hidden() << " " << net.actions() << " "
        << net.parameter_count() << "\n";
    char buf[32];
    for (Eigen::Index i = 0; i < net.parameters().size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", net.parameters()[i]);
        out << buf << "\n";
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

QNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string magic;
    int version = 0, input = 0, hidden = 0, actions = 0;
    std::size_t count = 0;
    in >> magic >> version >> input >> hidden >> actions >> count;
    if (!in || magic != "arc-qnetwork" || version != 1) throw std::runtime_error(path + ": bad header");
    QNetwork net(input, hidden, actions);
    if (count != net.parameter_count()) throw ShapeError(path + ": parameter count mismatch");
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> net.parameters()[static_cast<Eigen::Index>(i)])) {
            throw std::runtime_error(path + ": truncated parameters");
        }
    }
    return net;
}

}  // namespace arc
