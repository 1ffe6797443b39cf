// Trajectory-center memory bank: one center vector per trajectory,
// zero-initialized at every epoch start and updated by momentum rather
// than by the optimizer. Centers are re-normalized after each update so
// dot products against unit appearance vectors remain cosines.
#pragma once

#include "motkit/core.hpp"
#include "motkit/rng.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace motkit {

enum class UpdateStrategy { Hard, Easy, Random, Average };

inline UpdateStrategy parse_update_strategy(const std::string& s) {
    if (s == "hard") return UpdateStrategy::Hard;
    if (s == "easy") return UpdateStrategy::Easy;
    if (s == "random") return UpdateStrategy::Random;
    if (s == "average") return UpdateStrategy::Average;
    throw std::invalid_argument("unknown update strategy: " + s);
}

inline const char* to_string(UpdateStrategy s) {
    switch (s) {
        case UpdateStrategy::Hard: return "hard";
        case UpdateStrategy::Easy: return "easy";
        case UpdateStrategy::Random: return "random";
        case UpdateStrategy::Average: return "average";
    }
    return "?";
}

class TrajectoryCenterBank {
public:
    TrajectoryCenterBank() = default;
    TrajectoryCenterBank(int n_trajectories, int dim, bool normalize_centers = true)
        : centers_(Eigen::MatrixXd::Zero(n_trajectories, dim)),
          update_counts_(static_cast<std::size_t>(n_trajectories), 0),
          normalize_(normalize_centers) {
        if (n_trajectories < 1 || dim < 1)
            throw std::invalid_argument("TrajectoryCenterBank: bad dimensions");
    }

    int size() const { return static_cast<int>(centers_.rows()); }
    int dim() const { return static_cast<int>(centers_.cols()); }

    Eigen::VectorXd center(int l) const {
        check_index(l);
        return centers_.row(l).transpose();
    }
    long update_count(int l) const {
        check_index(l);
        return update_counts_[static_cast<std::size_t>(l)];
    }
    bool is_zero(int l) const { return update_count(l) == 0; }

    // Momentum update c_l <- alpha * c_l + (1 - alpha) * p_m, then
    // normalize. A still-zero center bootstraps directly from p_m
    // (its cosine to anything is undefined).
    void update_center(int l, const Embedding& p_m, double alpha) {
        check_index(l);
        if (p_m.size() != centers_.cols())
            throw std::invalid_argument("update_center: dimension mismatch");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw std::invalid_argument("update_center: alpha outside [0,1]");
        if (update_counts_[static_cast<std::size_t>(l)] == 0) {
            centers_.row(l) = p_m.transpose();
        } else {
            Embedding next = alpha * centers_.row(l).transpose() + (1.0 - alpha) * p_m;
            if (normalize_) {
                auto n = l2_normalize(next);
                if (!n.degenerate) next = n.value;
            }
            centers_.row(l) = next.transpose();
        }
        ++update_counts_[static_cast<std::size_t>(l)];
    }

private:
    void check_index(int l) const {
        if (l < 0 || l >= size())
            throw std::out_of_range("TrajectoryCenterBank: index out of range");
    }

    Eigen::MatrixXd centers_;  // N x D
    std::vector<long> update_counts_;
    bool normalize_ = true;

    friend const Eigen::MatrixXd& centers_of(const TrajectoryCenterBank& b);
};

inline const Eigen::MatrixXd& centers_of(const TrajectoryCenterBank& b) { return b.centers_; }

inline TrajectoryCenterBank init_bank(int n_trajectories, int dim,
                                      bool normalize_centers = true) {
    return TrajectoryCenterBank(n_trajectories, dim, normalize_centers);
}

// Picks the appearance vector that updates the center. Hard: minimum
// cosine similarity to the center; easy: maximum; random: seeded uniform
// pick; average: normalized componentwise mean. While the center is
// still zero the first candidate in batch order bootstraps it whatever
// the strategy.
inline Embedding select_update_sample(const std::vector<Embedding>& candidates,
                                      const Embedding& center, UpdateStrategy strategy,
                                      Rng& rng) {
    if (candidates.empty())
        throw std::invalid_argument("select_update_sample: no candidates");
    if (center.norm() < kNormEpsilon) return candidates.front();

    switch (strategy) {
        case UpdateStrategy::Hard:
        case UpdateStrategy::Easy: {
            std::size_t pick = 0;
            double pick_sim = cosine_similarity(candidates[0], center);
            for (std::size_t i = 1; i < candidates.size(); ++i) {
                const double sim = cosine_similarity(candidates[i], center);
                const bool take = strategy == UpdateStrategy::Hard ? sim < pick_sim
                                                                   : sim > pick_sim;
                if (take) {
                    pick = i;
                    pick_sim = sim;
                }
            }
            return candidates[pick];
        }
        case UpdateStrategy::Random:
            return candidates[static_cast<std::size_t>(
                rng.uniform_index(candidates.size()))];
        case UpdateStrategy::Average: {
            Embedding mean = Embedding::Zero(candidates[0].size());
            for (const auto& c : candidates) mean += c;
            mean /= static_cast<double>(candidates.size());
            auto n = l2_normalize(mean);
            return n.degenerate ? candidates.front() : n.value;
        }
    }
    return candidates.front();
}

} // namespace motkit
