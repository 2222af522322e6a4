#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "stakesim/mlp.hpp"
#include "stakesim/rng.hpp"

using namespace stakesim;
using namespace stakesim::infer;

namespace {

// Toy separable data: class = argmax of first `classes` inputs.
void make_data(int n, int dim, int classes, std::uint64_t seed, std::vector<double>& X,
               std::vector<int>& y) {
    Rng rng(seed);
    X.assign(static_cast<std::size_t>(n) * dim, 0.0);
    y.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        int cls = static_cast<int>(rng.uniform_below(classes));
        for (int k = 0; k < dim; ++k) X[static_cast<std::size_t>(i) * dim + k] = rng.normal() * 0.3;
        X[static_cast<std::size_t>(i) * dim + cls] += 2.0;
        y[i] = cls;
    }
}

}  // namespace

TEST_CASE("output is a probability vector") {
    Mlp model({6, 16, 8, 4}, 1);
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(6);
        for (auto& v : x) v = rng.normal();
        auto p = model.predict(x);
        REQUIRE(p.size() == 4);
        double sum = 0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    const int dim = 6, classes = 4, n = 10;
    Mlp model({dim, 12, 8, classes}, 3);
    std::vector<double> X;
    std::vector<int> y;
    make_data(n, dim, classes, 5, X, y);

    Mlp::Gradients g = model.gradients(X, y, n);
    const double h = 1e-5;
    int checked = 0;
    for (std::size_t l = 0; l < model.weights().size(); ++l) {
        for (std::size_t k = 0; k < model.weights()[l].size(); k += 3) {
            double saved = model.weights()[l][k];
            model.weights()[l][k] = saved + h;
            double up = model.batch_loss(X, y, n);
            model.weights()[l][k] = saved - h;
            double down = model.batch_loss(X, y, n);
            model.weights()[l][k] = saved;
            double fd = (up - down) / (2 * h);
            double analytic = g.w[l][k];
            if (std::abs(analytic) < 1e-7 && std::abs(fd) < 1e-7) continue;
            double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
            CHECK(rel < 1e-4);
            ++checked;
        }
        for (std::size_t k = 0; k < model.biases()[l].size(); ++k) {
            double saved = model.biases()[l][k];
            model.biases()[l][k] = saved + h;
            double up = model.batch_loss(X, y, n);
            model.biases()[l][k] = saved - h;
            double down = model.batch_loss(X, y, n);
            model.biases()[l][k] = saved;
            double fd = (up - down) / (2 * h);
            double analytic = g.b[l][k];
            if (std::abs(analytic) < 1e-7 && std::abs(fd) < 1e-7) continue;
            double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
            CHECK(rel < 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("training separates toy data and loss trends down") {
    const int dim = 8, classes = 5, n = 200;
    std::vector<double> X;
    std::vector<int> y;
    make_data(n, dim, classes, 7, X, y);
    Mlp model({dim, 32, 16, classes}, 9);

    std::vector<double> losses;
    for (int pass = 0; pass < 300; ++pass) losses.push_back(model.train_step(X, y, n, 0.001));
    CHECK(losses.back() < 0.3 * losses.front());

    // Windowed means are non-increasing (small slack for moment noise).
    auto window_mean = [&](int start) {
        double s = 0;
        for (int i = start; i < start + 50; ++i) s += losses[i];
        return s / 50.0;
    };
    for (int t = 0; t + 100 <= static_cast<int>(losses.size()); t += 10)
        CHECK(window_mean(t + 50) <= window_mean(t) * 1.02);

    int correct = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> x(X.begin() + static_cast<std::size_t>(i) * dim,
                              X.begin() + static_cast<std::size_t>(i + 1) * dim);
        auto p = model.predict(x);
        if (static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == y[i]) ++correct;
    }
    CHECK(static_cast<double>(correct) / n > 0.9);
}

TEST_CASE("weights round-trip through the flat binary format") {
    Mlp model({6, 10, 4}, 11);
    std::vector<double> X;
    std::vector<int> y;
    make_data(20, 6, 4, 13, X, y);
    for (int pass = 0; pass < 20; ++pass) model.train_step(X, y, 20, 0.01);

    const std::string path = (std::filesystem::temp_directory_path() / "stakesim_model.bin").string();
    model.save(path);
    Mlp back = Mlp::load(path);
    REQUIRE(back.layer_sizes() == model.layer_sizes());
    for (std::size_t l = 0; l < model.weights().size(); ++l) {
        CHECK(back.weights()[l] == model.weights()[l]);
        CHECK(back.biases()[l] == model.biases()[l]);
    }
    Rng rng(17);
    std::vector<double> x(6);
    for (auto& v : x) v = rng.normal();
    CHECK(model.predict(x) == back.predict(x));
    std::remove(path.c_str());

    CHECK_THROWS_AS(Mlp::load(path), ConfigError);
}
