#include "tutor/motion_stats.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tutor/heatmap.hpp"

namespace tutor::motion {

MotionStats compute_stats(const bvh::JointTrajectory& traj, double fps) {
    const int T = static_cast<int>(traj.positions.size());
    if (T < 4) throw std::invalid_argument("compute_stats: need at least 4 frames");
    if (!(fps > 0.0)) throw std::invalid_argument("compute_stats: fps must be positive");
    const int J = static_cast<int>(traj.names.size());
    if (J == 0) throw std::invalid_argument("compute_stats: no joints");

    auto pos = [&](int f, int j) -> const Eigen::Vector3d& {
        return traj.positions[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)];
    };

    MotionStats s;

    // per-frame displacement: central differences interior, one-sided at ends
    double amp_acc = 0.0, energy_acc = 0.0;
    for (int j = 0; j < J; ++j) {
        for (int f = 0; f < T; ++f) {
            Eigen::Vector3d d;
            if (f == 0)
                d = pos(1, j) - pos(0, j);
            else if (f == T - 1)
                d = pos(T - 1, j) - pos(T - 2, j);
            else
                d = 0.5 * (pos(f + 1, j) - pos(f - 1, j));
            const double step = d.norm();
            amp_acc += step;
            energy_acc += step * fps * step * fps;
        }
    }
    const double n_fj = static_cast<double>(T) * J;
    s.amplitude = amp_acc / n_fj;
    s.velocity = s.amplitude * fps;
    s.energy = energy_acc / n_fj;

    // RMS jerk from the central third difference, excluding 3 boundary frames
    // each side
    if (T >= 7) {
        double jerk_acc = 0.0;
        int count = 0;
        const double scale = fps * fps * fps;
        for (int j = 0; j < J; ++j) {
            for (int f = 3; f < T - 3; ++f) {
                const Eigen::Vector3d third =
                    0.5 * (pos(f + 2, j) - 2.0 * pos(f + 1, j) + 2.0 * pos(f - 1, j) - pos(f - 2, j)) *
                    scale;
                jerk_acc += third.squaredNorm();
                ++count;
            }
        }
        if (count > 0) s.jerk = std::sqrt(jerk_acc / count);
    }

    // mean over joints of the per-joint bounding-box diagonal
    double range_acc = 0.0;
    for (int j = 0; j < J; ++j) {
        Eigen::Vector3d lo = pos(0, j), hi = pos(0, j);
        for (int f = 1; f < T; ++f) {
            lo = lo.cwiseMin(pos(f, j));
            hi = hi.cwiseMax(pos(f, j));
        }
        range_acc += (hi - lo).norm();
    }
    s.range = range_acc / J;
    return s;
}

NormalizedStatsTable normalize_table(const std::map<std::string, MotionStats>& stats) {
    if (stats.empty()) throw std::invalid_argument("normalize_table: no acts");
    NormalizedStatsTable t;
    std::array<double, kNumStats> col_max{};
    for (const auto& [act, s] : stats) {
        t.acts.push_back(act);
        t.rows.push_back(s.as_array());
        const auto row = s.as_array();
        for (int c = 0; c < kNumStats; ++c) {
            if (row[static_cast<std::size_t>(c)] > col_max[static_cast<std::size_t>(c)]) {
                col_max[static_cast<std::size_t>(c)] = row[static_cast<std::size_t>(c)];
                t.normalizer[static_cast<std::size_t>(c)] = act;
            }
        }
    }
    for (int c = 0; c < kNumStats; ++c) {
        if (col_max[static_cast<std::size_t>(c)] <= 0.0) {
            t.zero_column[static_cast<std::size_t>(c)] = true;  // left as zeros
            continue;
        }
        for (auto& row : t.rows) row[static_cast<std::size_t>(c)] /= col_max[static_cast<std::size_t>(c)];
    }
    return t;
}

std::string NormalizedStatsTable::to_csv() const {
    std::ostringstream out;
    out << "act";
    for (const char* n : kStatNames) out << "," << n;
    out << "\n";
    for (std::size_t i = 0; i < acts.size(); ++i) {
        out << acts[i];
        for (int c = 0; c < kNumStats; ++c) out << "," << rows[i][static_cast<std::size_t>(c)];
        out << "\n";
    }
    return out.str();
}

DistanceMatrix pairwise_distances(const NormalizedStatsTable& table) {
    if (table.acts.size() < 2) throw std::invalid_argument("pairwise_distances: need at least 2 acts");
    DistanceMatrix m;
    m.acts = table.acts;
    const std::size_t n = table.acts.size();
    m.D.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (int c = 0; c < kNumStats; ++c) {
                const double d =
                    table.rows[i][static_cast<std::size_t>(c)] - table.rows[j][static_cast<std::size_t>(c)];
                acc += d * d;
            }
            m.D[i][j] = m.D[j][i] = std::sqrt(acc);
        }
    }
    return m;
}

double DistanceMatrix::separation_score() const {
    const std::size_t n = acts.size();
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) acc += D[i][j];
    return acc / static_cast<double>(n * (n - 1));
}

std::string DistanceMatrix::to_csv() const {
    std::ostringstream out;
    out << "act";
    for (const auto& a : acts) out << "," << a;
    out << "\n";
    for (std::size_t i = 0; i < acts.size(); ++i) {
        out << acts[i];
        for (std::size_t j = 0; j < acts.size(); ++j) out << "," << D[i][j];
        out << "\n";
    }
    return out.str();
}

namespace {

std::map<std::string, MotionStats> average_per_act(
    const std::map<std::string, std::vector<MotionStats>>& corpus) {
    std::map<std::string, MotionStats> out;
    for (const auto& [act, clips] : corpus) {
        if (clips.empty()) continue;
        MotionStats m;
        for (const auto& s : clips) {
            m.amplitude += s.amplitude;
            m.velocity += s.velocity;
            m.jerk += s.jerk;
            m.energy += s.energy;
            m.range += s.range;
        }
        const double n = static_cast<double>(clips.size());
        m.amplitude /= n;
        m.velocity /= n;
        m.jerk /= n;
        m.energy /= n;
        m.range /= n;
        out[act] = m;
    }
    return out;
}

}  // namespace

AblationReport ablation_report(const std::map<std::string, std::vector<MotionStats>>& baseline,
                               const std::map<std::string, std::vector<MotionStats>>& conditioned) {
    AblationReport r;
    for (const auto& [act, clips] : baseline)
        if (!conditioned.count(act) || conditioned.at(act).empty())
            r.notes.push_back("act '" + act + "' missing from conditioned corpus");
    for (const auto& [act, clips] : conditioned)
        if (!baseline.count(act) || baseline.at(act).empty())
            r.notes.push_back("act '" + act + "' missing from baseline corpus");

    const auto base_avg = average_per_act(baseline);
    const auto cond_avg = average_per_act(conditioned);
    r.baseline_table = normalize_table(base_avg);
    r.conditioned_table = normalize_table(cond_avg);
    if (base_avg.size() >= 2) {
        r.baseline_distances = pairwise_distances(r.baseline_table);
        r.baseline_separation = r.baseline_distances.separation_score();
    }
    if (cond_avg.size() >= 2) {
        r.conditioned_distances = pairwise_distances(r.conditioned_table);
        r.conditioned_separation = r.conditioned_distances.separation_score();
    }
    return r;
}

void write_ablation_report(const AblationReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        f << body;
    };
    write("baseline_stats.csv", report.baseline_table.to_csv());
    write("conditioned_stats.csv", report.conditioned_table.to_csv());
    if (!report.baseline_distances.acts.empty()) {
        write("baseline_distances.csv", report.baseline_distances.to_csv());
        write_heatmap_png((fs::path(out_dir) / "baseline_distances.png").string(),
                          report.baseline_distances.D, report.baseline_distances.acts);
    }
    if (!report.conditioned_distances.acts.empty()) {
        write("conditioned_distances.csv", report.conditioned_distances.to_csv());
        write_heatmap_png((fs::path(out_dir) / "conditioned_distances.png").string(),
                          report.conditioned_distances.D, report.conditioned_distances.acts);
    }
    std::ostringstream summary;
    summary << "baseline_separation," << report.baseline_separation << "\n";
    summary << "conditioned_separation," << report.conditioned_separation << "\n";
    for (const auto& n : report.notes) summary << "note," << n << "\n";
    write("separation.csv", summary.str());
}

}  // namespace tutor::motion
