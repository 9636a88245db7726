#pragma once

#include <string>
#include <vector>

#include "tutor/common.hpp"

#include <Eigen/Dense>

namespace tutor::bvh {

struct ParseError : std::runtime_error {
    int line = 0;
    ParseError(const std::string& msg, int line_no)
        : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

enum class Channel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

const char* channel_name(Channel c);

struct Joint {
    std::string name;
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
    std::vector<Channel> channels;
    int parent = -1;               // index into BvhDocument::joints, -1 for root
    std::vector<int> children;
    bool end_site = false;         // End Site segments keep their offset, no channels
    int channel_offset = 0;        // column of this joint's first channel in the motion table
};

struct BvhDocument {
    std::vector<Joint> joints;  // depth-first, root at index 0
    int frame_count = 0;
    double frame_time = 1.0 / 30.0;
    // frame_count x total_channels, channel-ordered exactly as declared
    std::vector<std::vector<double>> motion;

    int total_channels() const;
    double fps() const { return 1.0 / frame_time; }
};

BvhDocument parse(const std::string& text);

// Canonical form: tab indentation, 6-decimal motion values. parse(serialize(d))
// reproduces the document with motion equal at 6 decimals.
std::string serialize(const BvhDocument& doc);

struct JointTrajectory {
    std::vector<std::string> names;                   // J joint names
    std::vector<std::vector<Eigen::Vector3d>> positions;  // frame_count x J world positions
    double fps = 30.0;
};

// World-space joint positions. Rotation channels are degrees, applied
// intrinsically in the declared per-joint order.
JointTrajectory forward_kinematics(const BvhDocument& doc, bool include_end_sites = false);

}  // namespace tutor::bvh
