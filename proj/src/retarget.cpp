#include "tutor/retarget.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace tutor::retarget {

nlohmann::json RobotProfile::to_json() const {
    nlohmann::json jj = nlohmann::json::array();
    for (const auto& j : joints)
        jj.push_back({{"name", j.name},
                      {"min_rad", j.min_rad},
                      {"max_rad", j.max_rad},
                      {"max_velocity", j.max_velocity}});
    nlohmann::json jm = nlohmann::json::array();
    for (const auto& m : mapping)
        jm.push_back({{"robot_joint", m.robot_joint},
                      {"bvh_joint", m.bvh_joint},
                      {"channel", bvh::channel_name(m.channel)},
                      {"sign", m.sign},
                      {"offset_rad", m.offset_rad}});
    return {{"format", "robot_profile"},
            {"version", 1},
            {"control_rate", control_rate},
            {"joints", std::move(jj)},
            {"mapping", std::move(jm)}};
}

RobotProfile RobotProfile::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "robot_profile" || j.value("version", 0) != 1)
        throw DataError("unrecognized robot profile envelope");
    RobotProfile p;
    p.control_rate = j.at("control_rate").get<double>();
    if (!(p.control_rate > 0.0)) throw ConfigError("robot profile: control_rate must be positive");
    for (const auto& jt : j.at("joints")) {
        JointLimit l;
        l.name = jt.at("name").get<std::string>();
        l.min_rad = jt.at("min_rad").get<double>();
        l.max_rad = jt.at("max_rad").get<double>();
        l.max_velocity = jt.at("max_velocity").get<double>();
        if (!(l.min_rad < l.max_rad)) throw ConfigError("robot profile: min >= max for " + l.name);
        if (!(l.max_velocity > 0.0)) throw ConfigError("robot profile: max_velocity <= 0 for " + l.name);
        p.joints.push_back(std::move(l));
    }
    for (const auto& jm : j.value("mapping", nlohmann::json::array())) {
        ChannelMapping m;
        m.robot_joint = jm.at("robot_joint").get<std::string>();
        m.bvh_joint = jm.at("bvh_joint").get<std::string>();
        const std::string cn = jm.at("channel").get<std::string>();
        bool found = false;
        for (bvh::Channel c : {bvh::Channel::Xposition, bvh::Channel::Yposition, bvh::Channel::Zposition,
                               bvh::Channel::Xrotation, bvh::Channel::Yrotation, bvh::Channel::Zrotation})
            if (cn == bvh::channel_name(c)) {
                m.channel = c;
                found = true;
            }
        if (!found) throw ConfigError("robot profile: unknown channel " + cn);
        m.sign = jm.value("sign", 1.0);
        m.offset_rad = jm.value("offset_rad", 0.0);
        p.mapping.push_back(std::move(m));
    }
    return p;
}

std::string JointCommandTrack::to_csv() const {
    std::ostringstream out;
    out << "time";
    for (const auto& j : joints) out << "," << j;
    out << "\n";
    for (std::size_t f = 0; f < times.size(); ++f) {
        out << times[f];
        for (double a : angles[f]) out << "," << a;
        out << "\n";
    }
    return out.str();
}

nlohmann::json RetargetResult::events_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : events) out.push_back({{"frame", e.frame}, {"joint", e.joint}, {"kind", e.kind}});
    return out;
}

namespace {

// Column of this mapping's channel in the motion table, or -1.
int channel_column(const bvh::BvhDocument& doc, const ChannelMapping& m) {
    for (const auto& j : doc.joints) {
        if (j.name != m.bvh_joint) continue;
        for (std::size_t c = 0; c < j.channels.size(); ++c)
            if (j.channels[c] == m.channel) return j.channel_offset + static_cast<int>(c);
    }
    return -1;
}

constexpr double kDeg2Rad = M_PI / 180.0;

}  // namespace

RetargetResult retarget(const bvh::BvhDocument& doc, const RobotProfile& profile) {
    if (doc.frame_count < 1) throw std::invalid_argument("retarget: empty motion");

    std::map<std::string, const ChannelMapping*> by_joint;
    for (const auto& m : profile.mapping) {
        if (channel_column(doc, m) < 0)
            throw ConfigError("retarget: mapping references missing BVH channel " + m.bvh_joint + "/" +
                              bvh::channel_name(m.channel));
        by_joint[m.robot_joint] = &m;
    }

    const int nj = static_cast<int>(profile.joints.size());
    const double src_duration = (doc.frame_count - 1) * doc.frame_time;
    const double dt = 1.0 / profile.control_rate;
    const int nt = std::max(1, static_cast<int>(std::floor(src_duration / dt)) + 1);

    RetargetResult res;
    res.track.times.resize(static_cast<std::size_t>(nt));
    res.track.angles.assign(static_cast<std::size_t>(nt), std::vector<double>(static_cast<std::size_t>(nj)));
    for (const auto& j : profile.joints) res.track.joints.push_back(j.name);

    for (int f = 0; f < nt; ++f) {
        const double t = f * dt;
        res.track.times[static_cast<std::size_t>(f)] = t;
        // source frame interpolation
        const double x = doc.frame_count > 1 ? t / doc.frame_time : 0.0;
        const int i0 = std::min(doc.frame_count - 1, static_cast<int>(std::floor(x)));
        const int i1 = std::min(doc.frame_count - 1, i0 + 1);
        const double u = x - i0;
        for (int jx = 0; jx < nj; ++jx) {
            const JointLimit& lim = profile.joints[static_cast<std::size_t>(jx)];
            double angle;
            const auto it = by_joint.find(lim.name);
            if (it == by_joint.end()) {
                angle = 0.5 * (lim.min_rad + lim.max_rad);  // unmapped: hold neutral
            } else {
                const int col = channel_column(doc, *it->second);
                const double v0 = doc.motion[static_cast<std::size_t>(i0)][static_cast<std::size_t>(col)];
                const double v1 = doc.motion[static_cast<std::size_t>(i1)][static_cast<std::size_t>(col)];
                const double deg = v0 + (v1 - v0) * u;
                angle = it->second->sign * deg * kDeg2Rad + it->second->offset_rad;
            }
            if (angle < lim.min_rad) {
                res.events.push_back({f, lim.name, "clamp_min"});
                angle = lim.min_rad;
            } else if (angle > lim.max_rad) {
                res.events.push_back({f, lim.name, "clamp_max"});
                angle = lim.max_rad;
            }
            res.track.angles[static_cast<std::size_t>(f)][static_cast<std::size_t>(jx)] = angle;
        }
    }

    // causal rate-limit sweep: |delta| <= vmax * dt per tick
    for (int jx = 0; jx < nj; ++jx) {
        const double max_step = profile.joints[static_cast<std::size_t>(jx)].max_velocity * dt;
        for (int f = 1; f < nt; ++f) {
            double& cur = res.track.angles[static_cast<std::size_t>(f)][static_cast<std::size_t>(jx)];
            const double prev = res.track.angles[static_cast<std::size_t>(f - 1)][static_cast<std::size_t>(jx)];
            const double delta = cur - prev;
            if (std::abs(delta) > max_step) {
                cur = prev + (delta > 0 ? max_step : -max_step);
                res.events.push_back({f, profile.joints[static_cast<std::size_t>(jx)].name, "rate_limit"});
            }
        }
    }
    return res;
}

nlohmann::json ValidationReport::to_json() const {
    return {{"pass", pass}, {"violations", violations}};
}

ValidationReport validate_track(const JointCommandTrack& track, const RobotProfile& profile) {
    ValidationReport rep;
    const double tol = 1e-9;
    for (std::size_t f = 1; f < track.times.size(); ++f)
        if (!(track.times[f] > track.times[f - 1])) {
            rep.pass = false;
            rep.violations.push_back("times not strictly increasing at frame " + std::to_string(f));
        }
    for (std::size_t jx = 0; jx < track.joints.size(); ++jx) {
        const JointLimit* lim = nullptr;
        for (const auto& l : profile.joints)
            if (l.name == track.joints[jx]) lim = &l;
        if (!lim) {
            rep.pass = false;
            rep.violations.push_back("unknown joint " + track.joints[jx]);
            continue;
        }
        for (std::size_t f = 0; f < track.angles.size(); ++f) {
            const double a = track.angles[f][jx];
            if (a < lim->min_rad - tol || a > lim->max_rad + tol) {
                rep.pass = false;
                rep.violations.push_back("joint " + lim->name + " out of limits at frame " +
                                         std::to_string(f));
            }
            if (f > 0) {
                const double dt = track.times[f] - track.times[f - 1];
                if (std::abs(a - track.angles[f - 1][jx]) > lim->max_velocity * dt + tol) {
                    rep.pass = false;
                    rep.violations.push_back("joint " + lim->name + " exceeds velocity at frame " +
                                             std::to_string(f));
                }
            }
        }
    }
    return rep;
}

}  // namespace tutor::retarget
