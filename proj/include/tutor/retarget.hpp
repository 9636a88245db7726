#pragma once

#include <string>
#include <vector>

#include "tutor/bvh.hpp"
#include "tutor/common.hpp"

#include <json.hpp>

namespace tutor::retarget {

struct JointLimit {
    std::string name;
    double min_rad = 0.0;
    double max_rad = 0.0;
    double max_velocity = 1.0;  // rad/s
};

struct ChannelMapping {
    std::string robot_joint;
    std::string bvh_joint;
    bvh::Channel channel = bvh::Channel::Xrotation;
    double sign = 1.0;
    double offset_rad = 0.0;
};

struct RobotProfile {
    std::vector<JointLimit> joints;
    double control_rate = 50.0;  // Hz
    std::vector<ChannelMapping> mapping;

    nlohmann::json to_json() const;
    static RobotProfile from_json(const nlohmann::json& j);
};

struct JointCommandTrack {
    std::vector<std::string> joints;
    std::vector<double> times;                 // strictly increasing, seconds
    std::vector<std::vector<double>> angles;   // frames x joints, rad

    std::string to_csv() const;
};

struct RetargetEvent {
    int frame;
    std::string joint;
    std::string kind;  // "clamp_min" / "clamp_max" / "rate_limit"
};

struct RetargetResult {
    JointCommandTrack track;
    std::vector<RetargetEvent> events;

    nlohmann::json events_json() const;
};

// Per-joint affine channel mapping, linear resampling to the control rate,
// limit clamping, then a causal rate-limit sweep. Unmapped profile joints hold
// the midpoint of their range.
RetargetResult retarget(const bvh::BvhDocument& doc, const RobotProfile& profile);

struct ValidationReport {
    bool pass = true;
    std::vector<std::string> violations;

    nlohmann::json to_json() const;
};

ValidationReport validate_track(const JointCommandTrack& track, const RobotProfile& profile);

}  // namespace tutor::retarget
