#include "stakesim/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "stakesim/rng.hpp"

namespace stakesim::infer {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr std::uint32_t kMagic = 0x4D4C5057;  // "MLPW"
constexpr std::uint32_t kVersion = 1;
}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ConfigError("classifier needs at least input and output layers");
    Rng rng = Rng::derive(seed, "mlp-init");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double scale = std::sqrt(6.0 / static_cast<double>(in + out));
        std::vector<double> w(static_cast<std::size_t>(in) * out);
        for (auto& x : w) x = rng.uniform_range(-scale, scale);
        w_.push_back(std::move(w));
        b_.push_back(std::vector<double>(out, 0.0));
        mw_.push_back(std::vector<double>(static_cast<std::size_t>(in) * out, 0.0));
        vw_.push_back(std::vector<double>(static_cast<std::size_t>(in) * out, 0.0));
        mb_.push_back(std::vector<double>(out, 0.0));
        vb_.push_back(std::vector<double>(out, 0.0));
    }
}

void Mlp::forward(const std::vector<double>& X, int n, std::vector<std::vector<double>>& acts,
                  std::vector<std::vector<double>>& zs) const {
    const std::size_t layers = w_.size();
    acts.assign(layers + 1, {});
    zs.assign(layers, {});
    acts[0] = X;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        zs[l].assign(static_cast<std::size_t>(n) * out, 0.0);
        const double* a = acts[l].data();
        const double* w = w_[l].data();
        for (int i = 0; i < n; ++i) {
            const double* ai = a + static_cast<std::size_t>(i) * in;
            double* zi = zs[l].data() + static_cast<std::size_t>(i) * out;
            for (int j = 0; j < out; ++j) {
                const double* wj = w + static_cast<std::size_t>(j) * in;
                double acc = b_[l][j];
                for (int k = 0; k < in; ++k) acc += wj[k] * ai[k];
                zi[j] = acc;
            }
        }
        if (l + 1 < layers) {
            acts[l + 1].resize(zs[l].size());
            for (std::size_t k = 0; k < zs[l].size(); ++k) acts[l + 1][k] = std::max(0.0, zs[l][k]);
        } else {
            // softmax rows
            acts[l + 1].resize(zs[l].size());
            for (int i = 0; i < n; ++i) {
                const double* zi = zs[l].data() + static_cast<std::size_t>(i) * out;
                double* pi = acts[l + 1].data() + static_cast<std::size_t>(i) * out;
                double mx = zi[0];
                for (int j = 1; j < out; ++j) mx = std::max(mx, zi[j]);
                double denom = 0;
                for (int j = 0; j < out; ++j) {
                    pi[j] = std::exp(zi[j] - mx);
                    denom += pi[j];
                }
                for (int j = 0; j < out; ++j) pi[j] /= denom;
            }
        }
    }
}

std::vector<double> Mlp::predict(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != sizes_.front()) throw ConfigError("bad input width");
    std::vector<std::vector<double>> acts, zs;
    forward(x, 1, acts, zs);
    return acts.back();
}

double Mlp::batch_loss(const std::vector<double>& X, const std::vector<int>& y, int n) const {
    std::vector<std::vector<double>> acts, zs;
    forward(X, n, acts, zs);
    const int out = sizes_.back();
    double loss = 0;
    for (int i = 0; i < n; ++i) {
        double p = acts.back()[static_cast<std::size_t>(i) * out + y[i]];
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss / n;
}

Mlp::Gradients Mlp::gradients(const std::vector<double>& X, const std::vector<int>& y, int n) const {
    const std::size_t layers = w_.size();
    std::vector<std::vector<double>> acts, zs;
    forward(X, n, acts, zs);

    Gradients g;
    g.w.resize(layers);
    g.b.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        g.w[l].assign(w_[l].size(), 0.0);
        g.b[l].assign(b_[l].size(), 0.0);
    }

    const int out_dim = sizes_.back();
    std::vector<double> delta(acts.back());
    for (int i = 0; i < n; ++i) delta[static_cast<std::size_t>(i) * out_dim + y[i]] -= 1.0;
    for (auto& d : delta) d /= n;

    for (std::size_t l = layers; l-- > 0;) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double* a = acts[l].data();
        for (int i = 0; i < n; ++i) {
            const double* di = delta.data() + static_cast<std::size_t>(i) * out;
            const double* ai = a + static_cast<std::size_t>(i) * in;
            for (int j = 0; j < out; ++j) {
                const double dj = di[j];
                if (dj == 0.0) continue;
                double* gw = g.w[l].data() + static_cast<std::size_t>(j) * in;
                for (int k = 0; k < in; ++k) gw[k] += dj * ai[k];
                g.b[l][j] += dj;
            }
        }
        if (l == 0) break;
        std::vector<double> prev(static_cast<std::size_t>(n) * in, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* di = delta.data() + static_cast<std::size_t>(i) * out;
            double* pi = prev.data() + static_cast<std::size_t>(i) * in;
            for (int j = 0; j < out; ++j) {
                const double dj = di[j];
                if (dj == 0.0) continue;
                const double* wj = w_[l].data() + static_cast<std::size_t>(j) * in;
                for (int k = 0; k < in; ++k) pi[k] += dj * wj[k];
            }
            const double* zi = zs[l - 1].data() + static_cast<std::size_t>(i) * in;
            for (int k = 0; k < in; ++k)
                if (zi[k] <= 0.0) pi[k] = 0.0;
        }
        delta = std::move(prev);
    }
    return g;
}

double Mlp::train_step(const std::vector<double>& X, const std::vector<int>& y, int n, double lr) {
    Gradients g = gradients(X, y, n);
    const int out_dim = sizes_.back();
    // loss before the step, reusing nothing fancy; cheap relative to grads
    double loss = batch_loss(X, y, n);
    (void)out_dim;

    ++step_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    for (std::size_t l = 0; l < w_.size(); ++l) {
        for (std::size_t k = 0; k < w_[l].size(); ++k) {
            double grad = g.w[l][k];
            mw_[l][k] = kBeta1 * mw_[l][k] + (1 - kBeta1) * grad;
            vw_[l][k] = kBeta2 * vw_[l][k] + (1 - kBeta2) * grad * grad;
            w_[l][k] -= lr * (mw_[l][k] / c1) / (std::sqrt(vw_[l][k] / c2) + kEps);
        }
        for (std::size_t k = 0; k < b_[l].size(); ++k) {
            double grad = g.b[l][k];
            mb_[l][k] = kBeta1 * mb_[l][k] + (1 - kBeta1) * grad;
            vb_[l][k] = kBeta2 * vb_[l][k] + (1 - kBeta2) * grad * grad;
            b_[l][k] -= lr * (mb_[l][k] / c1) / (std::sqrt(vb_[l][k] / c2) + kEps);
        }
    }
    return loss;
}

void Mlp::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write model file: " + path);
    auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    put_u32(kMagic);
    put_u32(kVersion);
    put_u32(static_cast<std::uint32_t>(sizes_.size()));
    for (int s : sizes_) put_u32(static_cast<std::uint32_t>(s));
    for (std::size_t l = 0; l < w_.size(); ++l) {
        out.write(reinterpret_cast<const char*>(w_[l].data()),
                  static_cast<std::streamsize>(w_[l].size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(b_[l].data()),
                  static_cast<std::streamsize>(b_[l].size() * sizeof(double)));
    }
}

Mlp Mlp::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read model file: " + path);
    auto get_u32 = [&]() {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) throw ConfigError("truncated model file: " + path);
        return v;
    };
    if (get_u32() != kMagic) throw ConfigError("not a model file: " + path);
    if (get_u32() != kVersion) throw ConfigError("unsupported model version in: " + path);
    std::uint32_t n_layers = get_u32();
    std::vector<int> sizes(n_layers);
    for (auto& s : sizes) s = static_cast<int>(get_u32());
    Mlp model(sizes, 0);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        in.read(reinterpret_cast<char*>(model.w_[l].data()),
                static_cast<std::streamsize>(model.w_[l].size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(model.b_[l].data()),
                static_cast<std::streamsize>(model.b_[l].size() * sizeof(double)));
        if (!in) throw ConfigError("truncated model file: " + path);
    }
    return model;
}

}  // namespace stakesim::infer
