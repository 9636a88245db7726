#pragma once

#include "tutor/bvh.hpp"

#include <Eigen/Dense>

namespace tutor::pipeline {

// Builds a serial-chain skeleton whose total rotation channel count equals
// `num_channels`: the root and each link take up to three rotation channels
// (Z, X, Y order), links are offset along +Y, and the chain ends in an End
// Site. Used to render generated motion matrices as BVH.
bvh::BvhDocument make_chain_skeleton(int num_channels);

// Wraps a T x D motion matrix in a chain skeleton with D rotation channels.
// channel_scale converts model units to degrees.
bvh::BvhDocument motion_to_bvh(const Eigen::MatrixXd& motion, double fps, double channel_scale = 20.0);

}  // namespace tutor::pipeline
