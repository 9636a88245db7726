#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "tutor/motion_stats.hpp"

using namespace tutor;
using namespace tutor::motion;

namespace {

bvh::JointTrajectory make_traj(int frames, int joints,
                               const std::function<Eigen::Vector3d(int f, int j)>& pos, double fps) {
    bvh::JointTrajectory t;
    t.fps = fps;
    for (int j = 0; j < joints; ++j) t.names.push_back("j" + std::to_string(j));
    for (int f = 0; f < frames; ++f) {
        std::vector<Eigen::Vector3d> row;
        for (int j = 0; j < joints; ++j) row.push_back(pos(f, j));
        t.positions.push_back(std::move(row));
    }
    return t;
}

}  // namespace

TEST_CASE("static clip yields all-zero statistics") {
    const auto t = make_traj(20, 3, [](int, int j) { return Eigen::Vector3d(j, 2.0 * j, 0.0); }, 30.0);
    const MotionStats s = compute_stats(t, 30.0);
    CHECK(s.amplitude == 0.0);
    CHECK(s.velocity == 0.0);
    CHECK(s.jerk == 0.0);
    CHECK(s.energy == 0.0);
    CHECK(s.range == 0.0);
}

TEST_CASE("constant-velocity line: exact velocity, exactly zero jerk") {
    // power-of-two fps and dyadic velocities keep every position exactly
    // representable, so the jerk check can demand exact zero
    const double fps = 64.0;
    const Eigen::Vector3d vel(0.25, -0.125, 0.5);  // units/s
    const auto t = make_traj(
        40, 2, [&](int f, int j) { return Eigen::Vector3d(j, 0, 0) + vel * (f / fps); }, fps);
    const MotionStats s = compute_stats(t, fps);
    CHECK(std::abs(s.velocity - vel.norm()) < 1e-9);
    CHECK(s.jerk == 0.0);
    CHECK(std::abs(s.energy - vel.squaredNorm()) < 1e-9);
    CHECK(std::abs(s.amplitude - vel.norm() / fps) < 1e-12);
}

TEST_CASE("sinusoid RMS jerk approaches the analytic A*w^3/sqrt(2)") {
    const double fps = 120.0, A = 0.8, freq = 0.5;
    const double w = 2.0 * M_PI * freq;
    const int frames = 960;  // 8 s = 4 full periods
    const auto t = make_traj(
        frames, 1, [&](int f, int) { return Eigen::Vector3d(A * std::sin(w * f / fps), 0, 0); }, fps);
    const MotionStats s = compute_stats(t, fps);
    const double analytic = A * w * w * w / std::sqrt(2.0);
    CHECK(std::abs(s.jerk - analytic) / analytic < 0.02);
}

TEST_CASE("stats scale linearly (quadratically for energy) with position scale") {
    Rng rng(51);
    std::vector<Eigen::Vector3d> base;
    for (int f = 0; f < 50; ++f)
        base.emplace_back(rng.gaussian(), rng.gaussian(), rng.gaussian());
    auto traj = [&](double k) {
        return make_traj(50, 1, [&](int f, int) { return k * base[static_cast<std::size_t>(f)]; }, 30.0);
    };
    const MotionStats s1 = compute_stats(traj(1.0), 30.0);
    const MotionStats s3 = compute_stats(traj(3.0), 30.0);
    CHECK(s3.amplitude == doctest::Approx(3.0 * s1.amplitude).epsilon(1e-9));
    CHECK(s3.velocity == doctest::Approx(3.0 * s1.velocity).epsilon(1e-9));
    CHECK(s3.jerk == doctest::Approx(3.0 * s1.jerk).epsilon(1e-9));
    CHECK(s3.energy == doctest::Approx(9.0 * s1.energy).epsilon(1e-9));
    CHECK(s3.range == doctest::Approx(3.0 * s1.range).epsilon(1e-9));
}

TEST_CASE("stats are invariant under time reversal") {
    Rng rng(52);
    std::vector<Eigen::Vector3d> base;
    for (int f = 0; f < 40; ++f)
        base.emplace_back(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const auto fwd = make_traj(40, 1, [&](int f, int) { return base[static_cast<std::size_t>(f)]; }, 30.0);
    const auto rev = make_traj(40, 1, [&](int f, int) { return base[static_cast<std::size_t>(39 - f)]; }, 30.0);
    const MotionStats a = compute_stats(fwd, 30.0), b = compute_stats(rev, 30.0);
    CHECK(a.amplitude == doctest::Approx(b.amplitude).epsilon(1e-12));
    CHECK(a.velocity == doctest::Approx(b.velocity).epsilon(1e-12));
    CHECK(a.jerk == doctest::Approx(b.jerk).epsilon(1e-9));
    CHECK(a.energy == doctest::Approx(b.energy).epsilon(1e-12));
    CHECK(a.range == doctest::Approx(b.range).epsilon(1e-12));
}

TEST_CASE("compute_stats input validation") {
    const auto t = make_traj(3, 1, [](int, int) { return Eigen::Vector3d::Zero(); }, 30.0);
    CHECK_THROWS(compute_stats(t, 30.0));  // too few frames
    const auto ok = make_traj(10, 1, [](int, int) { return Eigen::Vector3d::Zero(); }, 30.0);
    CHECK_THROWS(compute_stats(ok, 0.0));
    bvh::JointTrajectory empty;
    empty.positions.resize(10);
    CHECK_THROWS(compute_stats(empty, 30.0));
}

TEST_CASE("normalized table: every column max is exactly 1") {
    Rng rng(53);
    std::map<std::string, MotionStats> stats;
    for (const char* act : {"a", "b", "c", "d"}) {
        MotionStats m;
        m.amplitude = rng.uniform(0.1, 5.0);
        m.velocity = rng.uniform(0.1, 5.0);
        m.jerk = rng.uniform(0.1, 5.0);
        m.energy = rng.uniform(0.1, 5.0);
        m.range = rng.uniform(0.1, 5.0);
        stats[act] = m;
    }
    const NormalizedStatsTable t = normalize_table(stats);
    for (int c = 0; c < kNumStats; ++c) {
        double col_max = 0.0;
        for (const auto& row : t.rows) col_max = std::max(col_max, row[static_cast<std::size_t>(c)]);
        CHECK(col_max == 1.0);
        CHECK(!t.normalizer[static_cast<std::size_t>(c)].empty());
    }
}

TEST_CASE("normalized table reproduces the published checkin row exactly") {
    // raw input shaped like the published table: the dominant act holds every
    // column max at 1.0, checkin raw values are the published fractions
    std::map<std::string, MotionStats> stats;
    MotionStats explain;
    explain.amplitude = explain.velocity = explain.jerk = explain.energy = explain.range = 1.0;
    MotionStats checkin;
    checkin.amplitude = 0.50;
    checkin.velocity = 0.50;
    checkin.jerk = 0.14;
    checkin.energy = 0.07;
    checkin.range = 0.80;
    stats["explain"] = explain;
    stats["checkin"] = checkin;
    const NormalizedStatsTable t = normalize_table(stats);
    const std::size_t row = t.acts[0] == "checkin" ? 0 : 1;
    CHECK(t.rows[row][0] == 0.50);
    CHECK(t.rows[row][1] == 0.50);
    CHECK(t.rows[row][2] == 0.14);
    CHECK(t.rows[row][3] == 0.07);
    CHECK(t.rows[row][4] == 0.80);
    const std::size_t erow = 1 - row;
    for (int c = 0; c < kNumStats; ++c) CHECK(t.rows[erow][static_cast<std::size_t>(c)] == 1.0);
}

TEST_CASE("zero columns are flagged and left at zero") {
    std::map<std::string, MotionStats> stats;
    MotionStats a;
    a.amplitude = 1.0;  // jerk stays 0 for both acts
    MotionStats b;
    b.amplitude = 0.5;
    stats["a"] = a;
    stats["b"] = b;
    const NormalizedStatsTable t = normalize_table(stats);
    CHECK(t.zero_column[2]);  // jerk
    for (const auto& row : t.rows) CHECK(row[2] == 0.0);
    CHECK_THROWS(normalize_table({}));
}

TEST_CASE("pairwise distances are a metric and match the published example") {
    // published normalized rows
    std::map<std::string, MotionStats> stats;
    auto mk = [](double a, double v, double j, double e, double r) {
        MotionStats m;
        m.amplitude = a;
        m.velocity = v;
        m.jerk = j;
        m.energy = e;
        m.range = r;
        return m;
    };
    stats["explain"] = mk(1.00, 1.00, 1.00, 1.00, 1.00);
    stats["checkin"] = mk(0.50, 0.50, 0.14, 0.07, 0.80);
    stats["challenge"] = mk(0.47, 0.47, 0.04, 0.02, 0.84);
    stats["neutral"] = mk(0.45, 0.45, 0.14, 0.04, 0.85);
    stats["praise"] = mk(0.34, 0.34, 0.03, 0.02, 0.90);
    stats["unclear"] = mk(0.61, 0.61, 0.04, 0.03, 0.53);
    NormalizedStatsTable t;
    for (const auto& [act, m] : stats) {
        t.acts.push_back(act);
        t.rows.push_back(m.as_array());
    }
    const DistanceMatrix d = pairwise_distances(t);
    const std::size_t n = t.acts.size();
    std::size_t ie = 0, ip = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (t.acts[i] == "explain") ie = i;
        if (t.acts[i] == "praise") ip = i;
        CHECK(d.D[i][i] == 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(d.D[i][j] == d.D[j][i]);
            for (std::size_t k = 0; k < n; ++k)
                CHECK(d.D[i][j] <= d.D[i][k] + d.D[k][j] + 1e-12);
        }
    }
    // sqrt(0.66^2 + 0.66^2 + 0.97^2 + 0.98^2 + 0.10^2)
    CHECK(d.D[ie][ip] == doctest::Approx(1.6680827317612275).epsilon(1e-9));
    CHECK(d.separation_score() > 0.0);
}

TEST_CASE("identical rows have zero distance; single act has zero separation") {
    NormalizedStatsTable t;
    t.acts = {"a", "b"};
    t.rows = {{0.1, 0.2, 0.3, 0.4, 0.5}, {0.1, 0.2, 0.3, 0.4, 0.5}};
    const DistanceMatrix d = pairwise_distances(t);
    CHECK(d.D[0][1] == 0.0);
    DistanceMatrix single;
    single.acts = {"a"};
    single.D = {{0.0}};
    CHECK(single.separation_score() == 0.0);
    NormalizedStatsTable one;
    one.acts = {"a"};
    one.rows = {{0, 0, 0, 0, 0}};
    CHECK_THROWS(pairwise_distances(one));
}

TEST_CASE("ablation report handles missing acts and writes all artifacts") {
    std::map<std::string, std::vector<MotionStats>> base, cond;
    MotionStats m;
    m.amplitude = m.velocity = m.jerk = m.energy = m.range = 1.0;
    MotionStats m2 = m;
    m2.amplitude = 0.2;
    base["explain"] = {m};
    base["neutral"] = {m2};
    cond["explain"] = {m, m2};
    cond["neutral"] = {m2};
    cond["praise"] = {m};
    const AblationReport r = ablation_report(base, cond);
    REQUIRE(r.notes.size() == 1);
    CHECK(r.notes[0].find("praise") != std::string::npos);
    CHECK(r.conditioned_separation > 0.0);

    const std::string dir = "ablation_test_out";
    write_ablation_report(r, dir);
    namespace fs = std::filesystem;
    for (const char* f : {"baseline_stats.csv", "conditioned_stats.csv", "baseline_distances.csv",
                          "conditioned_distances.csv", "baseline_distances.png",
                          "conditioned_distances.png", "separation.csv"})
        CHECK(fs::exists(fs::path(dir) / f));
    fs::remove_all(dir);
}

TEST_CASE("equal corpora produce equal reports") {
    std::map<std::string, std::vector<MotionStats>> corpus;
    MotionStats a;
    a.amplitude = 1.0;
    a.jerk = 0.5;
    MotionStats b;
    b.amplitude = 0.3;
    b.jerk = 0.1;
    corpus["x"] = {a};
    corpus["y"] = {b};
    const AblationReport r = ablation_report(corpus, corpus);
    CHECK(r.baseline_separation == r.conditioned_separation);
    CHECK(r.notes.empty());
}
