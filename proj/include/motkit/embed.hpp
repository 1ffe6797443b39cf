// Learnable view sampling and the 4-layer projection head.
//
// Per detection: look up the center feature r on the feature map, regress
// per-keypoint offsets (a linear head on r) added to a fixed 3x3 pattern,
// clamp the keypoints into the detection box, bilinear-sample each
// keypoint, and push every sampled vector through the projection head.
// Forward records a tape so backward can produce analytic gradients for
// all parameters; bilinear sampling (rather than nearest lookup) is what
// makes the offset head trainable at all.
#pragma once

#include "motkit/core.hpp"
#include "motkit/feature_map.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace motkit {

struct OffsetHead {
    Eigen::MatrixXd weight;  // (2 * n_keypoints) x channels

    int n_keypoints() const { return static_cast<int>(weight.rows()) / 2; }
    int channels() const { return static_cast<int>(weight.cols()); }
};

// Offsets start from zero so the initial keypoints are exactly the fixed
// pattern (the usual choice for deformable offset regressors).
inline OffsetHead make_offset_head(int n_keypoints, int channels) {
    if (n_keypoints < 1 || channels < 1)
        throw std::invalid_argument("make_offset_head: bad dimensions");
    return {Eigen::MatrixXd::Zero(2 * n_keypoints, channels)};
}

struct DenseLayer {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
};

// Four affine layers; rectifier after layers 1 and 2, L2 normalization
// after layer 3, affine output.
struct ProjectionHead {
    std::array<DenseLayer, 4> layers;

    int input_dim() const { return static_cast<int>(layers[0].w.cols()); }
    int output_dim() const { return static_cast<int>(layers[3].w.rows()); }
};

template <typename UniformFn>
inline ProjectionHead make_projection_head(int in, int h1, int h2, int pre, int out,
                                           UniformFn&& unit_uniform) {
    auto glorot = [&](int rows, int cols) {
        const double s = std::sqrt(6.0 / (rows + cols));
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = s * (2.0 * unit_uniform() - 1.0);
        return m;
    };
    ProjectionHead head;
    const int dims[5] = {in, h1, h2, pre, out};
    for (int l = 0; l < 4; ++l) {
        head.layers[static_cast<std::size_t>(l)].w = glorot(dims[l + 1], dims[l]);
        head.layers[static_cast<std::size_t>(l)].b = Eigen::VectorXd::Zero(dims[l + 1]);
    }
    return head;
}

// Fixed initial sampling pattern: the center point followed by the eight
// surrounding points at unit spacing, then (for larger counts) the next
// raster-ordered ring, and so on.
inline std::vector<std::pair<double, double>> initial_pattern(int n_keypoints) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(static_cast<std::size_t>(n_keypoints));
    pts.emplace_back(0.0, 0.0);
    for (int ring = 1; static_cast<int>(pts.size()) < n_keypoints; ++ring) {
        for (int dy = -ring; dy <= ring; ++dy)
            for (int dx = -ring; dx <= ring; ++dx)
                if (std::max(std::abs(dx), std::abs(dy)) == ring)
                    pts.emplace_back(dx, dy);
    }
    pts.resize(static_cast<std::size_t>(n_keypoints));
    return pts;
}

// Learned offsets on top of the fixed pattern: pair i reads rows
// (2i, 2i+1) of weight * r.
inline std::vector<std::pair<double, double>> regress_offsets(const OffsetHead& head,
                                                              const Eigen::VectorXd& r) {
    if (head.weight.cols() != r.size())
        throw std::invalid_argument("regress_offsets: dimension mismatch");
    const Eigen::VectorXd raw = head.weight * r;
    const auto pattern = initial_pattern(head.n_keypoints());
    std::vector<std::pair<double, double>> out(pattern.size());
    for (std::size_t i = 0; i < pattern.size(); ++i)
        out[i] = {pattern[i].first + raw(2 * static_cast<Eigen::Index>(i)),
                  pattern[i].second + raw(2 * static_cast<Eigen::Index>(i) + 1)};
    return out;
}

// Keypoints falling outside the box are clamped to its boundary
// (edges inclusive).
inline std::vector<std::pair<double, double>> clip_keypoints(
    double center_x, double center_y, const std::vector<std::pair<double, double>>& offsets,
    const BoundingBox& box) {
    std::vector<std::pair<double, double>> out;
    out.reserve(offsets.size());
    for (const auto& [dx, dy] : offsets)
        out.emplace_back(std::clamp(center_x + dx, box.left, box.right()),
                         std::clamp(center_y + dy, box.top, box.bottom()));
    return out;
}

struct ProjectionTrace {
    Eigen::VectorXd input;
    Eigen::VectorXd pre1, act1, pre2, act2, pre3, normed3;
    Eigen::VectorXd output;
    double norm3 = 0.0;
    bool degenerate3 = false;
};

inline ProjectionTrace project_trace(const ProjectionHead& head, const Eigen::VectorXd& v) {
    if (head.layers[0].w.cols() != v.size())
        throw std::invalid_argument("project: dimension mismatch");
    ProjectionTrace t;
    t.input = v;
    t.pre1 = head.layers[0].w * v + head.layers[0].b;
    t.act1 = t.pre1.cwiseMax(0.0);
    t.pre2 = head.layers[1].w * t.act1 + head.layers[1].b;
    t.act2 = t.pre2.cwiseMax(0.0);
    t.pre3 = head.layers[2].w * t.act2 + head.layers[2].b;
    t.norm3 = t.pre3.norm();
    if (t.norm3 < kNormEpsilon) {
        t.normed3 = Eigen::VectorXd::Zero(t.pre3.size());
        t.degenerate3 = true;
    } else {
        t.normed3 = t.pre3 / t.norm3;
    }
    t.output = head.layers[3].w * t.normed3 + head.layers[3].b;
    return t;
}

inline Eigen::VectorXd project(const ProjectionHead& head, const Eigen::VectorXd& v) {
    return project_trace(head, v).output;
}

// Gradient buffers mirroring the parameter shapes.
struct EmbedGradients {
    Eigen::MatrixXd offset_weight;
    std::array<DenseLayer, 4> proj;

    static EmbedGradients zeros_like(const OffsetHead& offsets, const ProjectionHead& head) {
        EmbedGradients g;
        g.offset_weight = Eigen::MatrixXd::Zero(offsets.weight.rows(), offsets.weight.cols());
        for (std::size_t l = 0; l < 4; ++l) {
            g.proj[l].w = Eigen::MatrixXd::Zero(head.layers[l].w.rows(), head.layers[l].w.cols());
            g.proj[l].b = Eigen::VectorXd::Zero(head.layers[l].b.size());
        }
        return g;
    }

    void set_zero() {
        offset_weight.setZero();
        for (auto& l : proj) {
            l.w.setZero();
            l.b.setZero();
        }
    }
};

enum class OffsetUnits {
    FeatureMapPixels,  // learned offsets are map pixels (default)
    BoxNormalized,     // learned offsets scale with half box extents
};

struct ViewSamplerOptions {
    OffsetUnits units = OffsetUnits::FeatureMapPixels;
};

// Everything backward needs, recorded by forward_views. Single use.
struct ViewTape {
    const FeatureMap* map = nullptr;
    Eigen::VectorXd center_feature;  // r
    double center_x = 0.0, center_y = 0.0;
    double scale_x = 1.0, scale_y = 1.0;  // learned-offset units

    struct View {
        double pre_x = 0.0, pre_y = 0.0;  // before clamping
        double x = 0.0, y = 0.0;          // after clamping
        bool clamped_x = false, clamped_y = false;
        BilinearSample sample;
        ProjectionTrace proj;
    };
    std::vector<View> views;
    bool consumed = false;

    std::vector<Eigen::VectorXd> outputs() const {
        std::vector<Eigen::VectorXd> out;
        out.reserve(views.size());
        for (const auto& v : views) out.push_back(v.proj.output);
        return out;
    }
};

// box is expressed on feature-map scale. Keypoints are clamped to the
// intersection of the box with the sampleable map extent.
inline ViewTape forward_views(const FeatureMap& map, const BoundingBox& box,
                              const OffsetHead& offsets, const ProjectionHead& proj,
                              ViewSamplerOptions opts = {}) {
    if (map.channels != offsets.channels())
        throw std::invalid_argument("forward_views: feature/offset channel mismatch");
    const double lo_x = std::max(box.left, 0.0);
    const double hi_x = std::min(box.right(), static_cast<double>(map.width - 1));
    const double lo_y = std::max(box.top, 0.0);
    const double hi_y = std::min(box.bottom(), static_cast<double>(map.height - 1));
    if (lo_x > hi_x || lo_y > hi_y)
        throw std::invalid_argument("forward_views: box does not intersect feature map");

    ViewTape tape;
    tape.map = &map;

    const int zx = std::clamp(static_cast<int>(std::lround(box.center_x())), 0, map.width - 1);
    const int zy = std::clamp(static_cast<int>(std::lround(box.center_y())), 0, map.height - 1);
    tape.center_feature = sample_center_feature(map, zx, zy);
    tape.center_x = zx;
    tape.center_y = zy;
    if (opts.units == OffsetUnits::BoxNormalized) {
        tape.scale_x = 0.5 * box.width;
        tape.scale_y = 0.5 * box.height;
    }

    const Eigen::VectorXd raw = offsets.weight * tape.center_feature;
    const auto pattern = initial_pattern(offsets.n_keypoints());
    tape.views.resize(pattern.size());
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        auto& view = tape.views[i];
        view.pre_x = tape.center_x + pattern[i].first +
                     tape.scale_x * raw(2 * static_cast<Eigen::Index>(i));
        view.pre_y = tape.center_y + pattern[i].second +
                     tape.scale_y * raw(2 * static_cast<Eigen::Index>(i) + 1);
        view.x = std::clamp(view.pre_x, lo_x, hi_x);
        view.y = std::clamp(view.pre_y, lo_y, hi_y);
        view.clamped_x = view.x != view.pre_x;
        view.clamped_y = view.y != view.pre_y;
        view.sample = bilinear_sample(map, view.x, view.y);
        view.proj = project_trace(proj, view.sample.value);
    }
    return tape;
}

// Accumulates parameter gradients for one tape given dLoss/d(output) per
// view. Coordinates clamped in forward receive zero offset-gradient in
// the clamped component (subgradient of the clamp). The projection head
// must be the one used in forward. Tapes are single-use.
inline void backward_views(ViewTape& tape, const std::vector<Eigen::VectorXd>& upstream,
                           const ProjectionHead& proj, EmbedGradients& grads) {
    if (tape.consumed) throw std::logic_error("backward_views: tape already consumed");
    if (upstream.size() != tape.views.size())
        throw std::invalid_argument("backward_views: upstream count mismatch");
    tape.consumed = true;

    for (std::size_t i = 0; i < tape.views.size(); ++i) {
        const auto& view = tape.views[i];
        const auto& t = view.proj;
        const Eigen::VectorXd& g_out = upstream[i];
        if (g_out.size() != t.output.size())
            throw std::invalid_argument("backward_views: upstream dimension mismatch");

        // Layer 4.
        grads.proj[3].b += g_out;
        grads.proj[3].w += g_out * t.normed3.transpose();
        Eigen::VectorXd g_n3 = proj.layers[3].w.transpose() * g_out;

        // L2 normalization after layer 3.
        Eigen::VectorXd g_pre3;
        if (t.degenerate3) {
            g_pre3 = Eigen::VectorXd::Zero(t.pre3.size());
        } else {
            g_pre3 = (g_n3 - g_n3.dot(t.normed3) * t.normed3) / t.norm3;
        }

        // Layer 3.
        grads.proj[2].b += g_pre3;
        grads.proj[2].w += g_pre3 * t.act2.transpose();
        Eigen::VectorXd g_act2 = proj.layers[2].w.transpose() * g_pre3;

        // Layer 2 + rectifier.
        Eigen::VectorXd g_pre2 =
            g_act2.cwiseProduct((t.pre2.array() > 0.0).cast<double>().matrix());
        grads.proj[1].b += g_pre2;
        grads.proj[1].w += g_pre2 * t.act1.transpose();
        Eigen::VectorXd g_act1 = proj.layers[1].w.transpose() * g_pre2;

        // Layer 1 + rectifier.
        Eigen::VectorXd g_pre1 =
            g_act1.cwiseProduct((t.pre1.array() > 0.0).cast<double>().matrix());
        grads.proj[0].b += g_pre1;
        grads.proj[0].w += g_pre1 * t.input.transpose();
        Eigen::VectorXd g_input = proj.layers[0].w.transpose() * g_pre1;

        // Bilinear sample -> keypoint coordinate.
        double g_x = g_input.dot(view.sample.ddx);
        double g_y = g_input.dot(view.sample.ddy);
        if (view.clamped_x) g_x = 0.0;
        if (view.clamped_y) g_y = 0.0;

        // Coordinate -> learned offset rows of the offset head.
        grads.offset_weight.row(2 * static_cast<Eigen::Index>(i)) +=
            g_x * tape.scale_x * tape.center_feature.transpose();
        grads.offset_weight.row(2 * static_cast<Eigen::Index>(i) + 1) +=
            g_y * tape.scale_y * tape.center_feature.transpose();
    }
}

// Inference-time representation of one detection: the views concatenated
// into a single vector, L2-normalized so dot products stay cosines.
inline Embedding concat_views(const std::vector<Eigen::VectorXd>& views) {
    if (views.empty()) throw std::invalid_argument("concat_views: no views");
    Eigen::Index total = 0;
    for (const auto& v : views) total += v.size();
    Embedding out(total);
    Eigen::Index off = 0;
    for (const auto& v : views) {
        out.segment(off, v.size()) = v;
        off += v.size();
    }
    return l2_normalize(out).value;
}

} // namespace motkit
