// Deterministic synthetic scenario generator: ground-truth agents on
// random-waypoint paths, noisy detections with appearance embeddings,
// occlusion accounting, and rasterized feature maps standing in for a
// detection backbone.
//
// Randomness is split into named substreams of the scenario seed (agent
// paths, per-frame detection noise, per-frame map noise) so frames could
// be generated independently; the result is a pure function of the
// config either way.
#pragma once

#include "motkit/core.hpp"
#include "motkit/feature_map.hpp"
#include "motkit/metrics.hpp"
#include "motkit/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

namespace motkit {

struct ScenarioConfig {
    int n_identities = 20;
    int n_frames = 200;
    double arena_width = 256.0;
    double arena_height = 192.0;
    int waypoints = 6;         // waypoints per agent, cycled
    double speed_min = 0.5;    // px/frame
    double speed_max = 2.5;
    double box_min = 12.0;
    double box_max = 28.0;
    double p_drop = 0.05;
    double occlusion_drop_boost = 0.5;  // extra drop probability at zero visibility
    double sigma_box = 0.5;    // px jitter on detection boxes
    double sigma_emb = 0.1;    // embedding noise scale
    bool occlusion = true;     // corrupt embeddings and elevate drops when occluded
    int embedding_dim = 32;
    double feature_stride = 4.0;
    int feature_channels = 16;
    double background_noise = 0.05;
    double latent_max_cos = 0.5;  // inter-identity latent separation bound
    // Fraction of the way each identity's appearance slides toward a
    // second separated endpoint over the sequence (0 = static targets).
    double appearance_drift = 0.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_identities < 1) throw std::invalid_argument("sim: need at least one identity");
        if (n_frames < 1) throw std::invalid_argument("sim: need at least one frame");
        if (!(p_drop >= 0.0 && p_drop <= 1.0))
            throw std::invalid_argument("sim: p_drop outside [0,1]");
        if (sigma_box < 0.0 || sigma_emb < 0.0 || background_noise < 0.0)
            throw std::invalid_argument("sim: negative noise scale");
        if (!(box_min >= 2.0 && box_min <= box_max))
            throw std::invalid_argument("sim: bad box size range");
        if (box_max > std::min(arena_width, arena_height))
            throw std::invalid_argument("sim: boxes larger than arena");
        if (embedding_dim < 1 || feature_channels < 1)
            throw std::invalid_argument("sim: bad embedding/channel dims");
        if (!(feature_stride > 0.0)) throw std::invalid_argument("sim: bad feature stride");
        if (feature_stride > box_min)
            throw std::invalid_argument("sim: feature_stride must not exceed box_min");
        if (!(latent_max_cos > 0.0 && latent_max_cos < 1.0))
            throw std::invalid_argument("sim: latent_max_cos outside (0,1)");
        if (!(appearance_drift >= 0.0 && appearance_drift <= 1.0))
            throw std::invalid_argument("sim: appearance_drift outside [0,1]");
        if (!(speed_min >= 0.0 && speed_min <= speed_max))
            throw std::invalid_argument("sim: bad speed range");
        if (waypoints < 1) throw std::invalid_argument("sim: need at least one waypoint");
    }

    int map_width() const {
        return std::max(2, static_cast<int>(std::ceil(arena_width / feature_stride)));
    }
    int map_height() const {
        return std::max(2, static_cast<int>(std::ceil(arena_height / feature_stride)));
    }
};

struct SimulatedFrame {
    long frame = 0;  // 1-based
    std::vector<Detection> detections;
    GroundTruthFrame gt;
    std::vector<double> visibility;  // aligned with gt.boxes
};

struct Scenario {
    ScenarioConfig cfg;
    std::vector<Eigen::VectorXd> latents;         // per identity, unit, D-dim
    std::vector<Eigen::VectorXd> latents_end;     // drift endpoints
    std::vector<Eigen::VectorXd> signatures;      // per identity, unit, C-dim
    std::vector<Eigen::VectorXd> signatures_end;  // drift endpoints
    std::vector<SimulatedFrame> frames;

    // Appearance of identity `index` (0-based) at frame index t: the unit
    // interpolation between the start vector and the drift endpoint.
    Eigen::VectorXd latent_at(int index, int t) const {
        return drifted(latents, latents_end, index, t);
    }
    Eigen::VectorXd signature_at(int index, int t) const {
        return drifted(signatures, signatures_end, index, t);
    }

private:
    Eigen::VectorXd drifted(const std::vector<Eigen::VectorXd>& start,
                            const std::vector<Eigen::VectorXd>& end, int index, int t) const {
        const auto& s0 = start[static_cast<std::size_t>(index)];
        if (cfg.appearance_drift <= 0.0 || cfg.n_frames < 2) return s0;
        const double u = cfg.appearance_drift * static_cast<double>(t) /
                         static_cast<double>(cfg.n_frames - 1);
        const Eigen::VectorXd mix =
            (1.0 - u) * s0 + u * end[static_cast<std::size_t>(index)];
        auto n = l2_normalize(mix);
        return n.degenerate ? s0 : n.value;
    }
};

// Visibility of each box given front-to-back depth = list index (index 0
// is frontmost): 1 - (area occluded by boxes in front) / area. Exact via
// coordinate compression of the covering rectangles.
inline std::vector<double> occlusion_visibility(const std::vector<BoundingBox>& boxes) {
    std::vector<double> vis(boxes.size(), 1.0);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const BoundingBox& b = boxes[i];
        if (b.area() <= 0.0) {
            vis[i] = 0.0;
            continue;
        }
        std::vector<const BoundingBox*> front;
        for (std::size_t j = 0; j < i; ++j)
            if (std::max(boxes[j].left, b.left) < std::min(boxes[j].right(), b.right()) &&
                std::max(boxes[j].top, b.top) < std::min(boxes[j].bottom(), b.bottom()))
                front.push_back(&boxes[j]);
        if (front.empty()) continue;

        std::set<double> xs{b.left, b.right()}, ys{b.top, b.bottom()};
        for (const auto* f : front) {
            xs.insert(std::clamp(f->left, b.left, b.right()));
            xs.insert(std::clamp(f->right(), b.left, b.right()));
            ys.insert(std::clamp(f->top, b.top, b.bottom()));
            ys.insert(std::clamp(f->bottom(), b.top, b.bottom()));
        }
        const std::vector<double> xv(xs.begin(), xs.end()), yv(ys.begin(), ys.end());
        double covered = 0.0;
        for (std::size_t xi = 0; xi + 1 < xv.size(); ++xi) {
            for (std::size_t yi = 0; yi + 1 < yv.size(); ++yi) {
                const double cx = 0.5 * (xv[xi] + xv[xi + 1]);
                const double cy = 0.5 * (yv[yi] + yv[yi + 1]);
                for (const auto* f : front) {
                    if (cx >= f->left && cx <= f->right() && cy >= f->top &&
                        cy <= f->bottom()) {
                        covered += (xv[xi + 1] - xv[xi]) * (yv[yi + 1] - yv[yi]);
                        break;
                    }
                }
            }
        }
        vis[i] = std::clamp(1.0 - covered / b.area(), 0.0, 1.0);
    }
    return vis;
}

namespace detail {

// Unit vectors kept pairwise below the cosine bound by rejection.
inline std::vector<Eigen::VectorXd> draw_separated_unit_vectors(int count, int dim,
                                                                double max_cos, Rng& rng) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            Eigen::VectorXd v(dim);
            for (int d = 0; d < dim; ++d) v(d) = rng.gauss();
            auto n = l2_normalize(v);
            if (n.degenerate) continue;
            placed = true;
            for (const auto& u : out)
                if (u.dot(n.value) > max_cos) {
                    placed = false;
                    break;
                }
            if (placed) out.push_back(n.value);
        }
        if (!placed)
            throw std::runtime_error(
                "sim: could not separate identity latents; raise embedding_dim or "
                "latent_max_cos");
    }
    return out;
}

struct Agent {
    double w = 0.0, h = 0.0;
    double x = 0.0, y = 0.0;  // box center
    double speed = 1.0;
    std::vector<std::pair<double, double>> targets;  // cycled waypoints
    std::size_t target_idx = 0;

    void draw_targets(int count, double arena_w, double arena_h, Rng& rng) {
        const double lo_x = 0.5 * w, hi_x = arena_w - 0.5 * w;
        const double lo_y = 0.5 * h, hi_y = arena_h - 0.5 * h;
        targets.resize(static_cast<std::size_t>(count));
        for (auto& [tx, ty] : targets) {
            tx = hi_x > lo_x ? rng.uniform(lo_x, hi_x) : lo_x;
            ty = hi_y > lo_y ? rng.uniform(lo_y, hi_y) : lo_y;
        }
    }

    void step() {
        const auto& [tx, ty] = targets[target_idx];
        const double dx = tx - x, dy = ty - y;
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (dist <= speed) {
            x = tx;
            y = ty;
            target_idx = (target_idx + 1) % targets.size();
        } else if (dist > 0.0) {
            x += speed * dx / dist;
            y += speed * dy / dist;
        }
    }

    BoundingBox box() const { return {x - 0.5 * w, y - 0.5 * h, w, h}; }
};

// Substream ids for Rng::fork.
inline constexpr std::uint64_t kStreamLatents = 1;
inline constexpr std::uint64_t kStreamSignatures = 2;
inline constexpr std::uint64_t kStreamAgentBase = 1000;
inline constexpr std::uint64_t kStreamFrameBase = 1u << 20;
inline constexpr std::uint64_t kStreamMapBase = 1u << 21;

} // namespace detail

inline Scenario generate_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    Scenario sc;
    sc.cfg = cfg;

    Rng root(cfg.seed);
    Rng latent_rng = root.fork(detail::kStreamLatents);
    Rng signature_rng = root.fork(detail::kStreamSignatures);
    // With drift enabled each identity gets a second endpoint, drawn from
    // the same stream right after the start vectors so that the start
    // vectors match the drift-free scenario bit for bit.
    const int sets = cfg.appearance_drift > 0.0 ? 2 : 1;
    auto latent_pool = detail::draw_separated_unit_vectors(
        sets * cfg.n_identities, cfg.embedding_dim, cfg.latent_max_cos, latent_rng);
    auto signature_pool = detail::draw_separated_unit_vectors(
        sets * cfg.n_identities, cfg.feature_channels, cfg.latent_max_cos, signature_rng);
    sc.latents.assign(latent_pool.begin(), latent_pool.begin() + cfg.n_identities);
    sc.signatures.assign(signature_pool.begin(), signature_pool.begin() + cfg.n_identities);
    if (sets == 2) {
        sc.latents_end.assign(latent_pool.begin() + cfg.n_identities, latent_pool.end());
        sc.signatures_end.assign(signature_pool.begin() + cfg.n_identities,
                                 signature_pool.end());
    }

    std::vector<detail::Agent> agents(static_cast<std::size_t>(cfg.n_identities));
    for (int i = 0; i < cfg.n_identities; ++i) {
        auto& a = agents[static_cast<std::size_t>(i)];
        Rng agent_rng = root.fork(detail::kStreamAgentBase + static_cast<std::uint64_t>(i));
        a.w = agent_rng.uniform(cfg.box_min, cfg.box_max);
        a.h = agent_rng.uniform(cfg.box_min, cfg.box_max);
        a.speed = agent_rng.uniform(cfg.speed_min, cfg.speed_max);
        a.x = agent_rng.uniform(0.5 * a.w, cfg.arena_width - 0.5 * a.w);
        a.y = agent_rng.uniform(0.5 * a.h, cfg.arena_height - 0.5 * a.h);
        a.draw_targets(std::max(1, cfg.waypoints), cfg.arena_width, cfg.arena_height,
                       agent_rng);
    }

    sc.frames.resize(static_cast<std::size_t>(cfg.n_frames));
    for (int t = 0; t < cfg.n_frames; ++t) {
        auto& frame = sc.frames[static_cast<std::size_t>(t)];
        frame.frame = t + 1;
        frame.gt.frame = t + 1;

        std::vector<BoundingBox> boxes;
        boxes.reserve(agents.size());
        for (auto& a : agents) {
            if (t > 0) a.step();
            boxes.push_back(a.box());
        }
        frame.visibility = occlusion_visibility(boxes);
        for (int i = 0; i < cfg.n_identities; ++i)
            frame.gt.boxes.push_back({i + 1, boxes[static_cast<std::size_t>(i)]});

        Rng noise = root.fork(detail::kStreamFrameBase + static_cast<std::uint64_t>(t));
        for (int i = 0; i < cfg.n_identities; ++i) {
            const double vis = frame.visibility[static_cast<std::size_t>(i)];
            double drop_p = cfg.p_drop;
            if (cfg.occlusion) drop_p += cfg.occlusion_drop_boost * (1.0 - vis);
            if (noise.bernoulli(std::clamp(drop_p, 0.0, 1.0))) continue;

            BoundingBox b = boxes[static_cast<std::size_t>(i)];
            if (cfg.sigma_box > 0.0) {
                b.left += noise.gauss(0.0, cfg.sigma_box);
                b.top += noise.gauss(0.0, cfg.sigma_box);
                b.width = std::max(2.0, b.width + noise.gauss(0.0, cfg.sigma_box));
                b.height = std::max(2.0, b.height + noise.gauss(0.0, cfg.sigma_box));
            }

            // Embedding: identity latent, optionally mixed toward the
            // frontmost occluder and perturbed by noise.
            Eigen::VectorXd e = sc.latent_at(i, t);
            if (cfg.occlusion && vis < 1.0) {
                int front = -1;
                for (int j = 0; j < i; ++j) {
                    const BoundingBox& other = boxes[static_cast<std::size_t>(j)];
                    if (std::max(other.left, boxes[static_cast<std::size_t>(i)].left) <
                            std::min(other.right(), boxes[static_cast<std::size_t>(i)].right()) &&
                        std::max(other.top, boxes[static_cast<std::size_t>(i)].top) <
                            std::min(other.bottom(), boxes[static_cast<std::size_t>(i)].bottom())) {
                        front = j;
                        break;
                    }
                }
                if (front >= 0) e = vis * e + (1.0 - vis) * sc.latent_at(front, t);
            }
            if (cfg.sigma_emb > 0.0)
                for (int d = 0; d < cfg.embedding_dim; ++d)
                    e(d) += noise.gauss(0.0, cfg.sigma_emb);
            auto norm = l2_normalize(e);

            Detection det;
            det.frame = t + 1;
            det.box = b;
            det.confidence = std::clamp(vis, 0.05, 1.0);
            det.embedding = norm.degenerate ? sc.latent_at(i, t) : norm.value;
            det.gt_identity = i + 1;
            frame.detections.push_back(std::move(det));
        }
    }
    return sc;
}

// Feature map for one frame: a signature layer (each agent's signature
// painted uniformly inside its box, back to front so occluders overwrite
// what they cover) plus background channel noise everywhere.
inline FeatureMap render_feature_map(const Scenario& sc, int frame_index) {
    if (frame_index < 0 || frame_index >= static_cast<int>(sc.frames.size()))
        throw std::out_of_range("render_feature_map: frame index out of range");
    const ScenarioConfig& cfg = sc.cfg;
    const SimulatedFrame& frame = sc.frames[static_cast<std::size_t>(frame_index)];

    FeatureMap map(cfg.map_height(), cfg.map_width(), cfg.feature_channels);

    // Signature layer, painted highest index first: lower identity index
    // is nearer the camera.
    for (int i = static_cast<int>(frame.gt.boxes.size()) - 1; i >= 0; --i) {
        const BoundingBox& b = frame.gt.boxes[static_cast<std::size_t>(i)].box;
        const Eigen::VectorXd sig = sc.signature_at(i, frame_index);
        const int x0 = std::max(0, static_cast<int>(std::floor(b.left / cfg.feature_stride)));
        const int x1 = std::min(map.width - 1,
                                static_cast<int>(std::floor((b.right() - 1e-9) / cfg.feature_stride)));
        const int y0 = std::max(0, static_cast<int>(std::floor(b.top / cfg.feature_stride)));
        const int y1 = std::min(map.height - 1,
                                static_cast<int>(std::floor((b.bottom() - 1e-9) / cfg.feature_stride)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                map.at(y, x) = sig.transpose();
    }

    if (cfg.background_noise > 0.0) {
        Rng noise = Rng(cfg.seed).fork(detail::kStreamMapBase +
                                       static_cast<std::uint64_t>(frame_index));
        for (Eigen::Index i = 0; i < map.values.rows(); ++i)
            for (Eigen::Index c = 0; c < map.values.cols(); ++c)
                map.values(i, c) += noise.gauss(0.0, cfg.background_noise);
    }
    return map;
}

// Scale an image-space box onto the feature-map grid.
inline BoundingBox to_map_scale(const BoundingBox& b, double stride) {
    return {b.left / stride, b.top / stride, b.width / stride, b.height / stride};
}

} // namespace motkit
