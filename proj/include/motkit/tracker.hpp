// Online tracker: three-stage association per frame (appearance with
// Kalman gating, then IoU for activated trajectories, then IoU for
// unactivated ones), trajectory lifecycle bookkeeping, and
// similarity-guided fusion of the trajectory representation.
#pragma once

#include "motkit/assignment.hpp"
#include "motkit/core.hpp"
#include "motkit/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

namespace motkit {

enum class TrackStatus { Unactivated, Active, Lost, Deleted };

inline const char* to_string(TrackStatus s) {
    switch (s) {
        case TrackStatus::Unactivated: return "unactivated";
        case TrackStatus::Active: return "active";
        case TrackStatus::Lost: return "lost";
        case TrackStatus::Deleted: return "deleted";
    }
    return "?";
}

struct TrackerConfig {
    double kappa1 = 0.3;  // appearance (cosine-distance) threshold
    double kappa2 = 0.5;  // IoU-distance threshold, activated trajectories
    double kappa3 = 0.7;  // IoU-distance threshold, unactivated trajectories
    int lambda = 15;      // max missing frames before deletion
    int memory_q = 30;    // recent-embedding memory length Q
    bool adaptive_beta = true;
    double fixed_beta = 0.9;  // used when adaptive_beta is false
    double gate = KalmanFilter::kDefaultGate;

    void validate() const {
        auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in01(kappa1) || !in01(kappa2) || !in01(kappa3))
            throw std::invalid_argument("TrackerConfig: kappa outside [0,1]");
        if (lambda < 1) throw std::invalid_argument("TrackerConfig: lambda must be >= 1");
        if (memory_q < 1) throw std::invalid_argument("TrackerConfig: Q must be >= 1");
        if (!in01(fixed_beta)) throw std::invalid_argument("TrackerConfig: beta outside [0,1]");
        if (!(gate > 0.0)) throw std::invalid_argument("TrackerConfig: gate must be > 0");
    }

    // Stricter association for very crowded scenes.
    void apply_mot20_preset() {
        kappa1 = 0.25;
        kappa3 = 0.5;
    }
};

struct Trajectory {
    long id = 0;
    TrackStatus status = TrackStatus::Unactivated;
    KalmanState kalman;
    Embedding fused;                 // trajectory representation f
    std::deque<Embedding> memory;    // up to Q recent embeddings z
    int missing_frames = 0;
    BoundingBox last_box;
    double last_confidence = 0.0;
    std::vector<std::pair<long, BoundingBox>> history;  // (frame, box)
};

// Mean cosine similarity of z_t against the most recent Q' memory
// entries, clamped to [0, 1]. An empty memory yields 1: the first
// embedding fully defines the representation.
inline double adaptive_beta(const Embedding& z_t, const std::deque<Embedding>& memory, int q) {
    const int available = static_cast<int>(memory.size());
    const int count = std::min(q, available);
    if (count == 0) return 1.0;
    double sum = 0.0;
    for (int i = 0; i < count; ++i)
        sum += cosine_similarity(z_t, memory[static_cast<std::size_t>(available - 1 - i)]);
    return std::clamp(sum / count, 0.0, 1.0);
}

// Momentum fusion f <- (1 - beta) f + beta z, re-normalized so Step-1
// dot products remain cosines. Exact cancellation (antipodal inputs)
// falls back to the new embedding.
inline Embedding fuse(const Embedding& f_prev, const Embedding& z_t, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("fuse: beta outside [0,1]");
    if (f_prev.size() != z_t.size()) throw std::invalid_argument("fuse: dimension mismatch");
    const Embedding mixed = (1.0 - beta) * f_prev + beta * z_t;
    auto n = l2_normalize(mixed);
    if (!n.degenerate) return n.value;
    auto nz = l2_normalize(z_t);
    return nz.degenerate ? mixed : nz.value;
}

struct TrackOutput {
    long id = 0;
    BoundingBox box;
    double confidence = 0.0;
};

struct FrameResult {
    long frame = 0;
    struct Match {
        int detection = -1;
        long trajectory = 0;
        int step = 0;  // 1, 2 or 3
        double cost = 0.0;
    };
    std::vector<Match> matches;
    std::vector<long> created;
    std::vector<long> promoted;  // unactivated -> active
    std::vector<long> lost;      // newly lost this frame
    std::vector<long> deleted;
    std::vector<TrackOutput> outputs;  // active trajectories only
};

class Tracker {
public:
    explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    const TrackerConfig& config() const { return cfg_; }
    long frame_count() const { return frame_; }
    const std::vector<Trajectory>& trajectories() const { return tracks_; }

    FrameResult associate_frame(const std::vector<Detection>& detections) {
        ++frame_;
        FrameResult result;
        result.frame = frame_;

        for (auto& t : tracks_) t.kalman = kf_.predict(t.kalman);

        std::vector<char> det_matched(detections.size(), 0);
        std::vector<char> trk_matched(tracks_.size(), 0);

        // Step 1: appearance similarity (gated cosine distance) against
        // active and lost trajectories.
        const std::vector<int> pool1 = pool({TrackStatus::Active, TrackStatus::Lost});
        run_step(detections, det_matched, trk_matched, pool1, 1, cfg_.kappa1, result);

        // Step 2: IoU distance against activated trajectories left over
        // from Step 1 (lost ones are appearance-only).
        std::vector<int> pool2;
        for (int idx : pool1)
            if (!trk_matched[static_cast<std::size_t>(idx)] &&
                tracks_[static_cast<std::size_t>(idx)].status == TrackStatus::Active)
                pool2.push_back(idx);
        run_step(detections, det_matched, trk_matched, pool2, 2, cfg_.kappa2, result);

        // Age every activated trajectory that stayed unmatched; drop the
        // ones missing longer than lambda.
        for (int idx : pool1) {
            if (trk_matched[static_cast<std::size_t>(idx)]) continue;
            auto& t = tracks_[static_cast<std::size_t>(idx)];
            ++t.missing_frames;
            if (t.missing_frames > cfg_.lambda) {
                t.status = TrackStatus::Deleted;
                result.deleted.push_back(t.id);
            } else if (t.status == TrackStatus::Active) {
                t.status = TrackStatus::Lost;
                result.lost.push_back(t.id);
            }
        }

        // Step 3: unactivated trajectories against the remaining
        // detections; unmatched unactivated trajectories are dropped.
        const std::vector<int> pool3 = pool({TrackStatus::Unactivated});
        run_step(detections, det_matched, trk_matched, pool3, 3, cfg_.kappa3, result);
        for (int idx : pool3) {
            if (trk_matched[static_cast<std::size_t>(idx)]) continue;
            auto& t = tracks_[static_cast<std::size_t>(idx)];
            t.status = TrackStatus::Deleted;
            result.deleted.push_back(t.id);
        }

        // Update every matched trajectory: Kalman correction, memory
        // push, similarity-guided fusion, activation.
        for (const auto& match : result.matches) {
            auto& t = track_by_id(match.trajectory);
            const Detection& det = detections[static_cast<std::size_t>(match.detection)];
            t.kalman = kf_.update(t.kalman, det.box);
            const Embedding z = l2_normalize(det.embedding).value;
            const double beta =
                cfg_.adaptive_beta ? adaptive_beta(z, t.memory, cfg_.memory_q) : cfg_.fixed_beta;
            t.fused = fuse(t.fused, z, beta);
            t.memory.push_back(z);
            while (static_cast<int>(t.memory.size()) > cfg_.memory_q) t.memory.pop_front();
            if (t.status == TrackStatus::Unactivated) result.promoted.push_back(t.id);
            t.status = TrackStatus::Active;
            t.missing_frames = 0;
            t.last_box = det.box;
            t.last_confidence = det.confidence;
            t.history.emplace_back(frame_, det.box);
        }

        // Leftover detections start new trajectories. In the very first
        // frame there is nothing to confirm against, so they activate
        // immediately; afterwards they must survive one re-match.
        for (std::size_t d = 0; d < detections.size(); ++d) {
            if (det_matched[d]) continue;
            const Detection& det = detections[d];
            if (det.box.area() <= 0.0) continue;  // cannot seed a Kalman state
            Trajectory t;
            t.id = next_id_++;
            t.status = frame_ == 1 ? TrackStatus::Active : TrackStatus::Unactivated;
            t.kalman = kf_.initiate(det.box);
            t.fused = l2_normalize(det.embedding).value;
            t.memory.push_back(t.fused);
            t.last_box = det.box;
            t.last_confidence = det.confidence;
            t.history.emplace_back(frame_, det.box);
            result.created.push_back(t.id);
            tracks_.push_back(std::move(t));
        }

        for (const auto& t : tracks_)
            if (t.status == TrackStatus::Active)
                result.outputs.push_back({t.id, t.last_box, t.last_confidence});

        std::erase_if(tracks_, [](const Trajectory& t) {
            return t.status == TrackStatus::Deleted;
        });
        return result;
    }

private:
    std::vector<int> pool(std::initializer_list<TrackStatus> statuses) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < tracks_.size(); ++i)
            for (TrackStatus s : statuses)
                if (tracks_[i].status == s) out.push_back(static_cast<int>(i));
        return out;
    }

    Trajectory& track_by_id(long id) {
        for (auto& t : tracks_)
            if (t.id == id) return t;
        throw std::logic_error("Tracker: unknown trajectory id");
    }

    void run_step(const std::vector<Detection>& detections, std::vector<char>& det_matched,
                  std::vector<char>& trk_matched, const std::vector<int>& trk_pool, int step,
                  double kappa, FrameResult& result) {
        std::vector<int> det_pool;
        for (std::size_t d = 0; d < detections.size(); ++d)
            if (!det_matched[d]) det_pool.push_back(static_cast<int>(d));
        if (det_pool.empty() || trk_pool.empty()) return;

        CostMatrix costs(static_cast<int>(det_pool.size()), static_cast<int>(trk_pool.size()));
        if (step == 1) {
            std::vector<KalmanState> states;
            std::vector<Detection> dets;
            states.reserve(trk_pool.size());
            dets.reserve(det_pool.size());
            for (int idx : trk_pool) states.push_back(tracks_[static_cast<std::size_t>(idx)].kalman);
            for (int d : det_pool) dets.push_back(detections[static_cast<std::size_t>(d)]);
            for (int r = 0; r < costs.rows; ++r)
                for (int c = 0; c < costs.cols; ++c)
                    costs.at(r, c) = std::max(
                        0.0, 1.0 - cosine_similarity(
                                       dets[static_cast<std::size_t>(r)].embedding,
                                       tracks_[static_cast<std::size_t>(trk_pool[static_cast<std::size_t>(c)])].fused));
            costs = gate_cost_matrix(costs, kf_, states, dets, cfg_.gate);
        } else {
            for (int r = 0; r < costs.rows; ++r) {
                const auto& det = detections[static_cast<std::size_t>(det_pool[static_cast<std::size_t>(r)])];
                for (int c = 0; c < costs.cols; ++c) {
                    const auto& t = tracks_[static_cast<std::size_t>(trk_pool[static_cast<std::size_t>(c)])];
                    costs.at(r, c) = 1.0 - iou(det.box, t.kalman.to_box());
                }
            }
        }

        const AssignmentResult assignment = solve_with_threshold(costs, kappa);
        for (const auto& [r, c] : assignment.matches) {
            const int det_idx = det_pool[static_cast<std::size_t>(r)];
            const int trk_idx = trk_pool[static_cast<std::size_t>(c)];
            det_matched[static_cast<std::size_t>(det_idx)] = 1;
            trk_matched[static_cast<std::size_t>(trk_idx)] = 1;
            result.matches.push_back({det_idx, tracks_[static_cast<std::size_t>(trk_idx)].id, step,
                                      costs.at(r, c)});
        }
    }

    TrackerConfig cfg_;
    KalmanFilter kf_;
    std::vector<Trajectory> tracks_;
    long frame_ = 0;
    long next_id_ = 1;
};

// Predict-then-associate over an ordered sequence of frames.
inline std::vector<FrameResult> run_sequence(const std::vector<std::vector<Detection>>& frames,
                                             const TrackerConfig& cfg = {}) {
    Tracker tracker(cfg);
    std::vector<FrameResult> out;
    out.reserve(frames.size());
    for (const auto& dets : frames) out.push_back(tracker.associate_frame(dets));
    return out;
}

} // namespace motkit
