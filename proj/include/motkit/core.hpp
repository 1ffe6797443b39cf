// Shared geometric and vector primitives: boxes, IoU, cosine similarity,
// L2 normalization. Everything here is a pure function over plain values.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace motkit {

// Guard for zero-norm vectors; the trajectory-center bank is
// zero-initialized, so zero vectors are a legal input everywhere.
inline constexpr double kNormEpsilon = 1e-12;

using Embedding = Eigen::VectorXd;

// Axis-aligned box in (left, top, width, height), continuous pixels.
// The layout matches the MOTChallenge text format used for file I/O.
struct BoundingBox {
    double left = 0.0;
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;

    double right() const { return left + width; }
    double bottom() const { return top + height; }
    double area() const { return width * height; }
    double center_x() const { return left + 0.5 * width; }
    double center_y() const { return top + 0.5 * height; }
    bool valid() const { return width >= 0.0 && height >= 0.0; }
};

struct Detection {
    long frame = 0;
    BoundingBox box;
    double confidence = 1.0;          // in [0, 1]
    Embedding embedding;
    std::optional<long> gt_identity;  // simulator only
};

// Intersection over union, clamped to [0, 1]: float rounding of
// left+width can push the raw ratio a few ulps past 1 for coincident
// boxes. Degenerate boxes (zero union) yield 0.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left, b.left));
    const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

// Dot-product cosine similarity. Returns 0 when either norm falls below
// kNormEpsilon so zero-initialized bank centers never produce NaN.
inline double cosine_similarity(const Embedding& u, const Embedding& v) {
    if (u.size() != v.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu < kNormEpsilon || nv < kNormEpsilon) return 0.0;
    return u.dot(v) / (nu * nv);
}

struct NormalizedEmbedding {
    Embedding value;
    bool degenerate = false;  // input norm was below kNormEpsilon
};

// Unit-norm copy of v. The zero vector maps to itself with the
// degenerate flag set. Inputs already within 1e-12 of unit norm are
// returned unchanged, which makes normalization exactly idempotent.
inline NormalizedEmbedding l2_normalize(const Embedding& v) {
    const double n = v.norm();
    if (n < kNormEpsilon) return {Embedding::Zero(v.size()), true};
    if (std::abs(n - 1.0) < 1e-12) return {v, false};
    return {v / n, false};
}

} // namespace motkit
