// CLEAR-MOT and identity metrics: MOTA, MOTP, IDF1, MT, ML, FP, FN, IDS.
//
// Frame matching follows the standard protocol: matches persisting from
// the previous frames are kept while their IoU stays >= 0.5, the rest is
// matched by Hungarian on IoU distance with the same threshold. An
// identity switch is counted when a ground-truth identity's matched
// hypothesis id differs from the one at its previous matched frame.
#pragma once

#include "motkit/assignment.hpp"
#include "motkit/core.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace motkit {

inline constexpr double kMatchIouThreshold = 0.5;
inline constexpr double kMostlyTrackedCoverage = 0.8;
inline constexpr double kMostlyLostCoverage = 0.2;

struct IdBox {
    long id = 0;
    BoundingBox box;
};

struct GroundTruthFrame {
    long frame = 0;
    std::vector<IdBox> boxes;
};

// Hypothesis frames share the same shape.
using HypothesisFrame = GroundTruthFrame;

struct EvalResult {
    double idf1 = 0.0;
    double mota = 0.0;
    double motp = 0.0;  // mean IoU over matches
    double mt = 0.0;    // fraction of identities covered >= 80%
    double ml = 0.0;    // fraction of identities covered <= 20%
    long fp = 0;
    long fn = 0;
    long ids = 0;
    long tp = 0;
    long gt_total = 0;
    long mostly_tracked = 0;
    long mostly_lost = 0;
    long identities = 0;
};

struct FrameMatch {
    long gt_id = 0;
    long hyp_id = 0;
    double iou = 0.0;
};

namespace detail {

inline void check_unique_ids(const GroundTruthFrame& f, const char* what) {
    std::set<long> seen;
    for (const auto& b : f.boxes)
        if (!seen.insert(b.id).second)
            throw std::invalid_argument(std::string(what) + ": duplicate id " +
                                        std::to_string(b.id) + " in frame " +
                                        std::to_string(f.frame));
}

} // namespace detail

// Matches one frame, preferring correspondences carried over from
// previous frames when they still overlap.
inline std::vector<FrameMatch> match_frame(const GroundTruthFrame& gt,
                                           const HypothesisFrame& hyp,
                                           const std::map<long, long>& prev_matches) {
    if (gt.frame != hyp.frame)
        throw std::invalid_argument("match_frame: frame index mismatch");
    detail::check_unique_ids(gt, "ground truth");
    detail::check_unique_ids(hyp, "hypothesis");

    std::map<long, const BoundingBox*> hyp_by_id;
    for (const auto& b : hyp.boxes) hyp_by_id[b.id] = &b.box;

    std::vector<FrameMatch> matches;
    std::set<long> gt_done, hyp_done;

    for (const auto& g : gt.boxes) {
        auto prev = prev_matches.find(g.id);
        if (prev == prev_matches.end()) continue;
        auto h = hyp_by_id.find(prev->second);
        if (h == hyp_by_id.end() || hyp_done.count(h->first)) continue;
        const double overlap = iou(g.box, *h->second);
        if (overlap >= kMatchIouThreshold) {
            matches.push_back({g.id, h->first, overlap});
            gt_done.insert(g.id);
            hyp_done.insert(h->first);
        }
    }

    std::vector<const IdBox*> gt_rest, hyp_rest;
    for (const auto& g : gt.boxes)
        if (!gt_done.count(g.id)) gt_rest.push_back(&g);
    for (const auto& h : hyp.boxes)
        if (!hyp_done.count(h.id)) hyp_rest.push_back(&h);

    if (!gt_rest.empty() && !hyp_rest.empty()) {
        CostMatrix costs(static_cast<int>(gt_rest.size()), static_cast<int>(hyp_rest.size()));
        for (int r = 0; r < costs.rows; ++r)
            for (int c = 0; c < costs.cols; ++c)
                costs.at(r, c) = 1.0 - iou(gt_rest[static_cast<std::size_t>(r)]->box,
                                           hyp_rest[static_cast<std::size_t>(c)]->box);
        const AssignmentResult res = solve_with_threshold(costs, 1.0 - kMatchIouThreshold);
        for (const auto& [r, c] : res.matches)
            matches.push_back({gt_rest[static_cast<std::size_t>(r)]->id,
                               hyp_rest[static_cast<std::size_t>(c)]->id,
                               1.0 - costs.at(r, c)});
    }
    return matches;
}

namespace detail {

struct AlignedFrames {
    std::vector<long> order;
    std::map<long, const GroundTruthFrame*> gt;
    std::map<long, const HypothesisFrame*> hyp;
};

inline AlignedFrames align(const std::vector<GroundTruthFrame>& gt_seq,
                           const std::vector<HypothesisFrame>& hyp_seq) {
    AlignedFrames a;
    std::set<long> frames;
    for (const auto& f : gt_seq) {
        if (a.gt.count(f.frame))
            throw std::invalid_argument("ground truth: duplicate frame " +
                                        std::to_string(f.frame));
        a.gt[f.frame] = &f;
        frames.insert(f.frame);
    }
    for (const auto& f : hyp_seq) {
        if (a.hyp.count(f.frame))
            throw std::invalid_argument("hypothesis: duplicate frame " +
                                        std::to_string(f.frame));
        a.hyp[f.frame] = &f;
        frames.insert(f.frame);
    }
    a.order.assign(frames.begin(), frames.end());
    return a;
}

} // namespace detail

inline EvalResult clear_mot(const std::vector<GroundTruthFrame>& gt_seq,
                            const std::vector<HypothesisFrame>& hyp_seq) {
    const auto aligned = detail::align(gt_seq, hyp_seq);

    EvalResult out;
    double iou_sum = 0.0;
    std::map<long, long> persistent;        // gt id -> last matched hyp id
    std::map<long, long> frames_present;    // gt id -> #frames in gt
    std::map<long, long> frames_matched;    // gt id -> #frames matched

    for (long frame : aligned.order) {
        static const GroundTruthFrame empty_gt{};
        GroundTruthFrame gt_frame = aligned.gt.count(frame) ? *aligned.gt.at(frame) : empty_gt;
        HypothesisFrame hyp_frame = aligned.hyp.count(frame) ? *aligned.hyp.at(frame) : empty_gt;
        gt_frame.frame = frame;
        hyp_frame.frame = frame;

        out.gt_total += static_cast<long>(gt_frame.boxes.size());
        for (const auto& g : gt_frame.boxes) ++frames_present[g.id];

        const auto matches = match_frame(gt_frame, hyp_frame, persistent);
        out.tp += static_cast<long>(matches.size());
        out.fn += static_cast<long>(gt_frame.boxes.size() - matches.size());
        out.fp += static_cast<long>(hyp_frame.boxes.size() - matches.size());

        for (const auto& m : matches) {
            iou_sum += m.iou;
            ++frames_matched[m.gt_id];
            auto last = persistent.find(m.gt_id);
            if (last != persistent.end() && last->second != m.hyp_id) ++out.ids;
            persistent[m.gt_id] = m.hyp_id;
        }
    }

    if (out.gt_total == 0)
        throw std::runtime_error(
            "clear_mot: MOTA undefined, ground truth contains no boxes");

    out.mota = 1.0 - static_cast<double>(out.fp + out.fn + out.ids) /
                         static_cast<double>(out.gt_total);
    out.motp = out.tp > 0 ? iou_sum / static_cast<double>(out.tp) : 0.0;

    out.identities = static_cast<long>(frames_present.size());
    for (const auto& [id, present] : frames_present) {
        const long matched = frames_matched.count(id) ? frames_matched.at(id) : 0;
        const double coverage = static_cast<double>(matched) / static_cast<double>(present);
        if (coverage >= kMostlyTrackedCoverage) ++out.mostly_tracked;
        if (coverage <= kMostlyLostCoverage) ++out.mostly_lost;
    }
    out.mt = static_cast<double>(out.mostly_tracked) / static_cast<double>(out.identities);
    out.ml = static_cast<double>(out.mostly_lost) / static_cast<double>(out.identities);
    return out;
}

// Global identity matching: pairs ground-truth and hypothesis identities
// to maximize identity-consistent true positives, then
// IDF1 = 2 IDTP / (2 IDTP + IDFP + IDFN).
inline double idf1(const std::vector<GroundTruthFrame>& gt_seq,
                   const std::vector<HypothesisFrame>& hyp_seq) {
    const auto aligned = detail::align(gt_seq, hyp_seq);

    long total_gt = 0, total_hyp = 0;
    std::map<long, int> gt_ids, hyp_ids;  // id -> dense index
    std::map<std::pair<int, int>, long> overlap;

    for (long frame : aligned.order) {
        const GroundTruthFrame* gt_frame = aligned.gt.count(frame) ? aligned.gt.at(frame) : nullptr;
        const HypothesisFrame* hyp_frame =
            aligned.hyp.count(frame) ? aligned.hyp.at(frame) : nullptr;
        if (gt_frame != nullptr) {
            detail::check_unique_ids(*gt_frame, "ground truth");
            total_gt += static_cast<long>(gt_frame->boxes.size());
            for (const auto& g : gt_frame->boxes)
                gt_ids.emplace(g.id, static_cast<int>(gt_ids.size()));
        }
        if (hyp_frame != nullptr) {
            detail::check_unique_ids(*hyp_frame, "hypothesis");
            total_hyp += static_cast<long>(hyp_frame->boxes.size());
            for (const auto& h : hyp_frame->boxes)
                hyp_ids.emplace(h.id, static_cast<int>(hyp_ids.size()));
        }
        if (gt_frame == nullptr || hyp_frame == nullptr) continue;
        for (const auto& g : gt_frame->boxes)
            for (const auto& h : hyp_frame->boxes)
                if (iou(g.box, h.box) >= kMatchIouThreshold)
                    ++overlap[{gt_ids.at(g.id), hyp_ids.at(h.id)}];
    }

    if (total_gt == 0)
        throw std::runtime_error("idf1: undefined, ground truth contains no boxes");
    if (total_hyp == 0 || overlap.empty()) return 0.0;

    long max_overlap = 0;
    for (const auto& [pair, count] : overlap) max_overlap = std::max(max_overlap, count);

    CostMatrix costs(static_cast<int>(gt_ids.size()), static_cast<int>(hyp_ids.size()),
                     static_cast<double>(max_overlap));
    for (const auto& [pair, count] : overlap)
        costs.at(pair.first, pair.second) = static_cast<double>(max_overlap - count);

    const AssignmentResult res = solve_min_cost(costs);
    long idtp = 0;
    for (const auto& [r, c] : res.matches) {
        auto it = overlap.find({r, c});
        if (it != overlap.end()) idtp += it->second;
    }
    const long idfn = total_gt - idtp;
    const long idfp = total_hyp - idtp;
    return 2.0 * static_cast<double>(idtp) /
           static_cast<double>(2 * idtp + idfp + idfn);
}

inline EvalResult evaluate_sequences(const std::vector<GroundTruthFrame>& gt_seq,
                                     const std::vector<HypothesisFrame>& hyp_seq) {
    EvalResult out = clear_mot(gt_seq, hyp_seq);
    out.idf1 = idf1(gt_seq, hyp_seq);
    return out;
}

} // namespace motkit
