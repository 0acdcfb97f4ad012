#pragma once
// Dueling Q-network with two rectifier hidden layers, parameters stored as a
// single flat vector.

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace arc {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class QNetwork {
public:
    QNetwork() = default;
    // Zero-initialized parameters.
    QNetwork(int input_dim, int hidden, int actions);

    int input_dim() const { return input_; }
    int hidden() const { return hidden_; }
    int actions() const { return actions_; }
    std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

    Eigen::VectorXd& parameters() { return params_; }
    const Eigen::VectorXd& parameters() const { return params_; }

    // He-uniform weights, zero biases.
    void initialize(std::mt19937_64& rng);

    bool same_shape(const QNetwork& other) const {
        return input_ == other.input_ && hidden_ == other.hidden_ && actions_ == other.actions_;
    }

    struct Layers {
        Eigen::Map<const Eigen::MatrixXd> w1;
        Eigen::Map<const Eigen::VectorXd> b1;
        Eigen::Map<const Eigen::MatrixXd> w2;
        Eigen::Map<const Eigen::VectorXd> b2;
        Eigen::Map<const Eigen::VectorXd> wv;
        double bv;
        Eigen::Map<const Eigen::MatrixXd> wa;
        Eigen::Map<const Eigen::VectorXd> ba;
    };
    Layers layers() const;

    // Offsets into the flat vector, in storage order.
    std::size_t offset_w1() const { return 0; }
    std::size_t offset_b1() const { return offset_w1() + hidden_ * input_; }
    std::size_t offset_w2() const { return offset_b1() + hidden_; }
    std::size_t offset_b2() const { return offset_w2() + hidden_ * hidden_; }
    std::size_t offset_wv() const { return offset_b2() + hidden_; }
    std::size_t offset_bv() const { return offset_wv() + hidden_; }
    std::size_t offset_wa() const { return offset_bv() + 1; }
    std::size_t offset_ba() const { return offset_wa() + actions_ * hidden_; }

private:
    int input_ = 0;
    int hidden_ = 0;
    int actions_ = 0;
    Eigen::VectorXd params_;
};

struct ForwardPass {
    Eigen::MatrixXd h1;  // hidden x batch, post-activation
    Eigen::MatrixXd h2;
    Eigen::RowVectorXd value;
    Eigen::MatrixXd advantage;  // actions x batch
    Eigen::MatrixXd q;
};

// Inputs as columns (input_dim x batch).
ForwardPass forward(const QNetwork& net, const Eigen::MatrixXd& inputs);

Eigen::VectorXd q_forward(const QNetwork& net, const std::vector<double>& input);

// Mean squared TD loss over a batch with fixed targets:
//   L = 1/B * sum_i (Q(s_i, a_i) - y_i)^2
double td_loss(const QNetwork& net, const Eigen::MatrixXd& inputs, const std::vector<int>& actions,
               const Eigen::VectorXd& targets);

// Loss and its gradient with respect to the flat parameter vector.
double td_loss_gradient(const QNetwork& net, const Eigen::MatrixXd& inputs,
                        const std::vector<int>& actions, const Eigen::VectorXd& targets,
                        Eigen::VectorXd& gradient);

// Persistence: a text shape header followed by the flat parameters.
void save_network(const QNetwork& net, const std::string& path);
QNetwork load_network(const std::string& path);

}  // namespace arc
