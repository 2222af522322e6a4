#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stakesim/types.hpp"

namespace stakesim::infer {

// Dense feedforward classifier: ReLU hidden layers, softmax output,
// cross-entropy loss, adaptive-moment updates. Double precision throughout
// so gradient checks against central differences are meaningful.
class Mlp {
  public:
    Mlp(std::vector<int> layer_sizes, std::uint64_t seed);

    const std::vector<int>& layer_sizes() const { return sizes_; }

    // Probabilities for a single example.
    std::vector<double> predict(const std::vector<double>& x) const;

    // Mean cross-entropy over a row-major batch (n rows of input_dim).
    double batch_loss(const std::vector<double>& X, const std::vector<int>& y, int n) const;

    struct Gradients {
        std::vector<std::vector<double>> w;
        std::vector<std::vector<double>> b;
    };
    Gradients gradients(const std::vector<double>& X, const std::vector<int>& y, int n) const;

    // One adaptive-moment step over the batch; returns the pre-step loss.
    double train_step(const std::vector<double>& X, const std::vector<int>& y, int n, double lr);

    std::vector<std::vector<double>>& weights() { return w_; }
    std::vector<std::vector<double>>& biases() { return b_; }
    const std::vector<std::vector<double>>& weights() const { return w_; }
    const std::vector<std::vector<double>>& biases() const { return b_; }

    void save(const std::string& path) const;
    static Mlp load(const std::string& path);

  private:
    void forward(const std::vector<double>& X, int n, std::vector<std::vector<double>>& acts,
                 std::vector<std::vector<double>>& zs) const;

    std::vector<int> sizes_;
    std::vector<std::vector<double>> w_;  // per layer, row-major (out x in)
    std::vector<std::vector<double>> b_;
    // adaptive-moment state
    std::vector<std::vector<double>> mw_, vw_, mb_, vb_;
    std::int64_t step_ = 0;
};

}  // namespace stakesim::infer
