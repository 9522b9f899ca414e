#ifndef RITZ_NETWORK_HPP
#define RITZ_NETWORK_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ritz/error.hpp"

namespace ritz {

/// GlobalResNet shape. Each block holds two dense layers.
struct Architecture {
    int input_dim = 1;
    int width = 100;
    int n_blocks = 3;

    void validate() const
    {
        require(input_dim >= 1, "architecture: input_dim must be >= 1");
        require(width >= 1, "architecture: width must be >= 1");
        require(n_blocks >= 1, "architecture: n_blocks must be >= 1");
    }

    bool operator==(const Architecture&) const = default;
};

/// Value and first two derivatives of max(z, 0)^1.5. Derivatives are 0 for z <= 0.
struct ActivationValue {
    double value;
    double d1;
    double d2;
};

inline ActivationValue activation(double z)
{
    if (!(z > 0.0)) return {0.0, 0.0, 0.0};
    const double r = std::sqrt(z);
    return {z * r, 1.5 * r, 0.75 / r};
}

/// Offsets of each parameter group inside the flat vector.
struct ParamLayout {
    struct Block {
        Eigen::Index w1, b1, w2, b2;
        int in;
    };

    Eigen::Index beta1 = 0;
    Eigen::Index beta2 = 1;
    Eigen::Index w = 2;
    std::vector<Block> blocks;
    Eigen::Index head_w = 0;
    Eigen::Index head_b = 0;
    Eigen::Index total = 0;

    explicit ParamLayout(const Architecture& a)
    {
        Eigen::Index off = 2 + a.input_dim;
        for (int b = 0; b < a.n_blocks; ++b) {
            Block blk{};
            blk.in = b == 0 ? a.input_dim : a.width;
            blk.w1 = off;
            off += static_cast<Eigen::Index>(a.width) * blk.in;
            blk.b1 = off;
            off += a.width;
            blk.w2 = off;
            off += static_cast<Eigen::Index>(a.width) * a.width;
            blk.b2 = off;
            off += a.width;
            blocks.push_back(blk);
        }
        head_w = off;
        off += a.width;
        head_b = off;
        total = off + 1;
    }
};

/**
 * All trainable scalars of u(x) = beta1 * w^T g + beta2 + head(blocks(g)),
 * with g the network input (the feature vector when a map is active).
 *
 * Canonical flat order: beta1, beta2, w, then per block W1 (width x in,
 * column-major), b1, W2 (width x width), b2, then head weights and bias.
 */
class NetParams {
public:
    using Matrix = Eigen::Map<Eigen::MatrixXd>;
    using ConstMatrix = Eigen::Map<const Eigen::MatrixXd>;
    using Vector = Eigen::Map<Eigen::VectorXd>;
    using ConstVector = Eigen::Map<const Eigen::VectorXd>;

    NetParams() : NetParams(Architecture{}) {}

    explicit NetParams(const Architecture& arch) : arch_(arch), layout_((arch.validate(), arch))
    {
        flat_ = Eigen::VectorXd::Zero(layout_.total);
    }

    NetParams(const Architecture& arch, Eigen::VectorXd flat) : NetParams(arch)
    {
        require(flat.size() == layout_.total, "NetParams: flat vector has " + std::to_string(flat.size())
                                                  + " entries, architecture needs " + std::to_string(layout_.total));
        flat_ = std::move(flat);
    }

    const Architecture& arch() const { return arch_; }
    const ParamLayout& layout() const { return layout_; }
    Eigen::Index size() const { return layout_.total; }

    Eigen::VectorXd& flat() { return flat_; }
    const Eigen::VectorXd& flat() const { return flat_; }

    double& beta1() { return flat_[layout_.beta1]; }
    double beta1() const { return flat_[layout_.beta1]; }
    double& beta2() { return flat_[layout_.beta2]; }
    double beta2() const { return flat_[layout_.beta2]; }
    Vector w() { return {flat_.data() + layout_.w, arch_.input_dim}; }
    ConstVector w() const { return {flat_.data() + layout_.w, arch_.input_dim}; }

    Matrix w1(int b) { return {flat_.data() + layout_.blocks[b].w1, arch_.width, layout_.blocks[b].in}; }
    ConstMatrix w1(int b) const { return {flat_.data() + layout_.blocks[b].w1, arch_.width, layout_.blocks[b].in}; }
    Vector b1(int b) { return {flat_.data() + layout_.blocks[b].b1, arch_.width}; }
    ConstVector b1(int b) const { return {flat_.data() + layout_.blocks[b].b1, arch_.width}; }
    Matrix w2(int b) { return {flat_.data() + layout_.blocks[b].w2, arch_.width, arch_.width}; }
    ConstMatrix w2(int b) const { return {flat_.data() + layout_.blocks[b].w2, arch_.width, arch_.width}; }
    Vector b2(int b) { return {flat_.data() + layout_.blocks[b].b2, arch_.width}; }
    ConstVector b2(int b) const { return {flat_.data() + layout_.blocks[b].b2, arch_.width}; }
    Vector head_w() { return {flat_.data() + layout_.head_w, arch_.width}; }
    ConstVector head_w() const { return {flat_.data() + layout_.head_w, arch_.width}; }
    double& head_b() { return flat_[layout_.head_b]; }
    double head_b() const { return flat_[layout_.head_b]; }

private:
    Architecture arch_;
    ParamLayout layout_;
    Eigen::VectorXd flat_;
};

/// Kaiming-normal weights N(0, 2/fan_in), zero biases, beta1 = 1, beta2 = 0.
inline NetParams init_network(const Architecture& arch, std::uint64_t seed)
{
    NetParams p(arch);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto&& target, int fan_in) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
        for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = normal(rng);
    };
    p.beta1() = 1.0;
    p.beta2() = 0.0;
    fill(p.w(), arch.input_dim);
    for (int b = 0; b < arch.n_blocks; ++b) {
        fill(p.w1(b), p.layout().blocks[b].in);
        fill(p.w2(b), arch.width);
    }
    fill(p.head_w(), arch.width);
    return p;
}

} // namespace ritz

#endif // RITZ_NETWORK_HPP
