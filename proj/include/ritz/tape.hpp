#ifndef RITZ_TAPE_HPP
#define RITZ_TAPE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "ritz/error.hpp"
#include "ritz/features.hpp"
#include "ritz/network.hpp"
#include "ritz/parallel.hpp"
#include "ritz/sampling.hpp"

namespace ritz {

/// Network values and spatial gradients on a point batch.
struct EvalResult {
    Eigen::VectorXd values;        // n
    Eigen::MatrixXd spatial_grads; // d x n, column i is grad_x u(x_i)
};

/// Gradient of a scalar loss with respect to every trainable scalar, in NetParams order.
struct ParamGradient {
    Eigen::VectorXd entries;
};

/// Points per evaluation chunk. Fixed so reductions do not depend on the thread count.
constexpr Eigen::Index kernel_chunk = 256;

namespace detail {

// Streams are stored side by side: columns [s*n, (s+1)*n) hold stream s,
// where stream 0 carries values and stream 1+j the derivative along x_j.

inline void activate_streams(const Eigen::MatrixXd& z, Eigen::Index n, int streams, Eigen::MatrixXd& a)
{
    const Eigen::Index rows = z.rows();
    a.resize(rows, z.cols());
    const double* zp = z.data();
    double* ap = a.data();
    const Eigen::Index stride = rows * n;
    for (Eigen::Index k = 0; k < stride; ++k) {
        const double v = zp[k];
        if (v > 0.0) {
            const double r = std::sqrt(v);
            ap[k] = v * r;
            const double d1 = 1.5 * r;
            for (int s = 1; s < streams; ++s) ap[k + s * stride] = d1 * zp[k + s * stride];
        } else {
            ap[k] = 0.0;
            for (int s = 1; s < streams; ++s) ap[k + s * stride] = 0.0;
        }
    }
}

// In place: abar holds the adjoint of act(z) on entry and of z on exit.
inline void activation_adjoint(const Eigen::MatrixXd& z, Eigen::Index n, int streams, Eigen::MatrixXd& abar)
{
    const Eigen::Index rows = z.rows();
    const double* zp = z.data();
    double* bp = abar.data();
    const Eigen::Index stride = rows * n;
    for (Eigen::Index k = 0; k < stride; ++k) {
        const double v = zp[k];
        if (v > 0.0) {
            const double r = std::sqrt(v);
            const double d1 = 1.5 * r;
            const double d2 = 0.75 / r;
            double cross = 0.0;
            for (int s = 1; s < streams; ++s) {
                cross += zp[k + s * stride] * bp[k + s * stride];
                bp[k + s * stride] *= d1;
            }
            bp[k] = d1 * bp[k] + d2 * cross;
        } else {
            bp[k] = 0.0;
            for (int s = 1; s < streams; ++s) bp[k + s * stride] = 0.0;
        }
    }
}

inline void feature_streams(const FeatureMap& map, const Eigen::Ref<const Eigen::MatrixXd>& pts, bool tangents,
                            Eigen::MatrixXd& out)
{
    const int d = map.dim();
    const Eigen::Index n = pts.cols();
    const int streams = tangents ? d + 1 : 1;
    const int p = map.output_dim();
    out.resize(p, n * streams);

    if (map.kind == FeatureKind::none) {
        out.leftCols(n) = pts;
        for (int j = 0; j < d && tangents; ++j) {
            auto block = out.middleCols((j + 1) * n, n);
            block.setZero();
            block.row(j).setOnes();
        }
        return;
    }

    constexpr double two_pi = 2.0 * std::numbers::pi;
    const int m = map.modes();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < m; ++k) {
            double phase = 0.0;
            for (int j = 0; j < d; ++j) phase += map.B(k, j) * map.wrap(pts(j, i), j);
            phase *= two_pi;
            const double c = std::cos(phase);
            const double s = std::sin(phase);
            out(k, i) = c;
            out(m + k, i) = s;
            for (int j = 0; j < d && tangents; ++j) {
                const double b = two_pi * map.B(k, j);
                out(k, (j + 1) * n + i) = -b * s;
                out(m + k, (j + 1) * n + i) = b * c;
            }
        }
    }
}

} // namespace detail

/**
 * Recorded forward pass of the network on one chunk of points.
 *
 * Spatial derivatives are propagated forward as d tangent streams next to
 * the value stream; backward() then runs the reverse pass over the whole
 * composite (values and tangents), so losses that depend on grad_x u get
 * exact parameter gradients. Blocks compute
 * out = in + W2 act(W1 act(in) + b1) + b2, except that the first block
 * (input_dim -> width) has no skip connection.
 */
class Tape {
public:
    void forward(const NetParams& params, const FeatureMap& map, const Eigen::Ref<const Eigen::MatrixXd>& pts,
                 bool tangents)
    {
        const Architecture& arch = params.arch();
        n_ = pts.cols();
        streams_ = tangents ? map.dim() + 1 : 1;
        detail::feature_streams(map, pts, tangents, input_);

        blocks_.resize(arch.n_blocks);
        const Eigen::MatrixXd* x = &input_;
        for (int b = 0; b < arch.n_blocks; ++b) {
            Record& rec = blocks_[b];
            detail::activate_streams(*x, n_, streams_, rec.act_in);
            rec.pre.noalias() = params.w1(b) * rec.act_in;
            rec.pre.leftCols(n_).colwise() += params.b1(b);
            detail::activate_streams(rec.pre, n_, streams_, rec.act);
            if (b == 0) {
                rec.out.noalias() = params.w2(b) * rec.act;
            } else {
                rec.out = *x;
                rec.out.noalias() += params.w2(b) * rec.act;
            }
            rec.out.leftCols(n_).colwise() += params.b2(b);
            x = &rec.out;
        }

        bypass_.noalias() = params.w().transpose() * input_;
        u_.noalias() = params.head_w().transpose() * (*x);
        u_ += params.beta1() * bypass_;
        u_.head(n_).array() += params.head_b() + params.beta2();
    }

    Eigen::Index points() const { return n_; }

    /// Smallest nonzero |z| fed to any activation in the last forward pass.
    /// Exact zeros are skipped: they only come from identically-zero features.
    double min_abs_preactivation() const
    {
        double m = std::numeric_limits<double>::infinity();
        auto scan = [&m, this](const Eigen::MatrixXd& z) {
            for (double v : z.leftCols(n_).reshaped())
                if (v != 0.0) m = std::min(m, std::abs(v));
        };
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            scan(blocks_[b].pre);
            scan(b == 0 ? input_ : blocks_[b - 1].out);
        }
        return m;
    }

    /// Appends every parameter-dependent activation input (value stream).
    void append_activation_inputs(std::vector<double>& out) const
    {
        auto push = [&out, this](const Eigen::MatrixXd& z) {
            for (double v : z.leftCols(n_).reshaped()) out.push_back(v);
        };
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            if (b > 0) push(blocks_[b - 1].out);
            push(blocks_[b].pre);
        }
    }

    int streams() const { return streams_; }

    /// 1 x (n * streams): values followed by each tangent stream.
    const Eigen::RowVectorXd& output() const { return u_; }

    void copy_to(EvalResult& res, Eigen::Index offset) const
    {
        res.values.segment(offset, n_) = u_.head(n_).transpose();
        for (int j = 1; j < streams_; ++j)
            res.spatial_grads.row(j - 1).segment(offset, n_) = u_.segment(j * n_, n_);
    }

    /**
     * Accumulate d(sum_k seed_k * output_k)/d(theta) into grad.
     * seed has the layout of output().
     */
    void backward(const NetParams& params, const Eigen::Ref<const Eigen::RowVectorXd>& seed,
                  Eigen::Ref<Eigen::VectorXd> grad)
    {
        const Architecture& arch = params.arch();
        const ParamLayout& L = params.layout();
        const int width = arch.width;
        auto gmat = [&grad](Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
            return Eigen::Map<Eigen::MatrixXd>(grad.data() + off, rows, cols);
        };
        auto gvec = [&grad](Eigen::Index off, Eigen::Index len) {
            return Eigen::Map<Eigen::VectorXd>(grad.data() + off, len);
        };

        // Output head and global bypass.
        const double seed_sum = seed.head(n_).sum();
        grad[L.beta2] += seed_sum;
        grad[L.head_b] += seed_sum;
        grad[L.beta1] += bypass_.dot(seed);
        gvec(L.w, arch.input_dim).noalias() += params.beta1() * (input_ * seed.transpose());
        const Eigen::MatrixXd& last = blocks_.back().out;
        gvec(L.head_w, width).noalias() += last * seed.transpose();
        xbar_.noalias() = params.head_w() * seed;

        for (int b = arch.n_blocks - 1; b >= 0; --b) {
            Record& rec = blocks_[b];
            const ParamLayout::Block& lb = L.blocks[b];
            gvec(lb.b2, width) += xbar_.leftCols(n_).rowwise().sum();
            gmat(lb.w2, width, width).noalias() += xbar_ * rec.act.transpose();
            hbar_.noalias() = params.w2(b).transpose() * xbar_;
            detail::activation_adjoint(rec.pre, n_, streams_, hbar_);
            gvec(lb.b1, width) += hbar_.leftCols(n_).rowwise().sum();
            gmat(lb.w1, width, lb.in).noalias() += hbar_ * rec.act_in.transpose();
            if (b == 0) break; // the network input carries no parameters
            rbar_.noalias() = params.w1(b).transpose() * hbar_;
            const Eigen::MatrixXd& block_in = blocks_[b - 1].out;
            detail::activation_adjoint(block_in, n_, streams_, rbar_);
            xbar_ += rbar_; // skip connection
        }
    }

private:
    struct Record {
        Eigen::MatrixXd act_in; // act(block input)
        Eigen::MatrixXd pre;    // W1 * (...) + b1
        Eigen::MatrixXd act;    // act(pre)
        Eigen::MatrixXd out;    // block output
    };

    Eigen::Index n_ = 0;
    int streams_ = 1;
    Eigen::MatrixXd input_;
    std::vector<Record> blocks_;
    Eigen::RowVectorXd bypass_;
    Eigen::RowVectorXd u_;
    Eigen::MatrixXd xbar_, hbar_, rbar_;
};

inline void check_shapes(const NetParams& params, const FeatureMap& map, int batch_dim)
{
    require(map.dim() == batch_dim, "feature map dimension " + std::to_string(map.dim())
                                        + " does not match batch dimension " + std::to_string(batch_dim));
    require(params.arch().input_dim == map.output_dim(),
            "network input_dim " + std::to_string(params.arch().input_dim) + " does not match feature output "
                + std::to_string(map.output_dim()));
}

inline int chunk_count(Eigen::Index n) { return static_cast<int>((n + kernel_chunk - 1) / kernel_chunk); }

/// u and grad_x u at every point of the batch.
inline EvalResult eval_batch(const NetParams& params, const FeatureMap& map, const PointBatch& batch,
                             bool with_gradients = true)
{
    check_shapes(params, map, batch.dim());
    const Eigen::Index n = batch.size();
    EvalResult res;
    res.values.resize(n);
    res.spatial_grads.resize(with_gradients ? batch.dim() : 0, n);

    const int chunks = chunk_count(n);
    std::vector<Tape> tapes(std::min(thread_count(), std::max(chunks, 1)));
    parallel_for(chunks, [&](int c, int worker) {
        const Eigen::Index begin = c * kernel_chunk;
        const Eigen::Index len = std::min(kernel_chunk, n - begin);
        tapes[worker].forward(params, map, batch.points.middleCols(begin, len), with_gradients);
        tapes[worker].copy_to(res, begin);
    });
    return res;
}

/// Values entering every activation whose input depends on the parameters.
inline std::vector<double> activation_inputs(const NetParams& params, const FeatureMap& map, const PointBatch& batch)
{
    check_shapes(params, map, batch.dim());
    std::vector<double> out;
    Tape tape;
    for (Eigen::Index begin = 0; begin < batch.size(); begin += kernel_chunk) {
        tape.forward(params, map, batch.points.middleCols(begin, std::min(kernel_chunk, batch.size() - begin)), false);
        tape.append_activation_inputs(out);
    }
    return out;
}

/// u at a single point x (x is mapped through the feature map first).
inline double network_forward(const NetParams& params, const FeatureMap& map, const Eigen::VectorXd& x)
{
    check_shapes(params, map, static_cast<int>(x.size()));
    Tape tape;
    tape.forward(params, map, x, false);
    return tape.output()[0];
}

/// u for an already-lifted network input vector.
inline double network_forward(const NetParams& params, const Eigen::VectorXd& input)
{
    return network_forward(params, identity_features(static_cast<int>(input.size())), input);
}

} // namespace ritz

#endif // RITZ_TAPE_HPP
