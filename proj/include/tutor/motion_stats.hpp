#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "tutor/bvh.hpp"
#include "tutor/common.hpp"

namespace tutor::motion {

constexpr int kNumStats = 5;
inline const std::array<const char*, kNumStats> kStatNames = {"amplitude", "velocity", "jerk", "energy",
                                                              "range"};

struct MotionStats {
    double amplitude = 0.0;  // mean per-frame displacement magnitude (units/frame)
    double velocity = 0.0;   // mean speed (units/s)
    double jerk = 0.0;       // RMS third derivative (units/s^3)
    double energy = 0.0;     // mean squared speed (units^2/s^2)
    double range = 0.0;      // mean per-joint bounding-box diagonal (units)

    std::array<double, kNumStats> as_array() const { return {amplitude, velocity, jerk, energy, range}; }
};

// Central differences in the interior, one-sided at the boundaries; the jerk
// RMS excludes 3 boundary frames each side. Requires >= 4 frames.
MotionStats compute_stats(const bvh::JointTrajectory& traj, double fps);

struct NormalizedStatsTable {
    std::vector<std::string> acts;
    std::vector<std::array<double, kNumStats>> rows;      // per act, in [0,1]
    std::array<std::string, kNumStats> normalizer{};      // act holding each column max
    std::array<bool, kNumStats> zero_column{};            // all-zero columns left as zeros

    std::string to_csv() const;
};

NormalizedStatsTable normalize_table(const std::map<std::string, MotionStats>& stats);

struct DistanceMatrix {
    std::vector<std::string> acts;
    std::vector<std::vector<double>> D;  // symmetric, zero diagonal

    // mean off-diagonal distance; 0 for fewer than 2 acts
    double separation_score() const;
    std::string to_csv() const;
};

DistanceMatrix pairwise_distances(const NormalizedStatsTable& table);

struct AblationReport {
    NormalizedStatsTable baseline_table;
    NormalizedStatsTable conditioned_table;
    DistanceMatrix baseline_distances;
    DistanceMatrix conditioned_distances;
    double baseline_separation = 0.0;
    double conditioned_separation = 0.0;
    std::vector<std::string> notes;  // e.g. acts missing from one corpus
};

// Per-act corpora of raw stats (clips averaged per act inside).
AblationReport ablation_report(const std::map<std::string, std::vector<MotionStats>>& baseline,
                               const std::map<std::string, std::vector<MotionStats>>& conditioned);

// Writes tables/matrices as CSV plus PNG heatmaps under `out_dir`.
void write_ablation_report(const AblationReport& report, const std::string& out_dir);

}  // namespace tutor::motion
