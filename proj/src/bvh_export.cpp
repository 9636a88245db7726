#include "tutor/bvh_export.hpp"

#include "tutor/common.hpp"

namespace tutor::pipeline {

bvh::BvhDocument make_chain_skeleton(int num_channels) {
    if (num_channels < 1) throw ConfigError("chain skeleton: need at least one channel");
    bvh::BvhDocument doc;
    const bvh::Channel order[3] = {bvh::Channel::Zrotation, bvh::Channel::Xrotation,
                                   bvh::Channel::Yrotation};
    int remaining = num_channels;
    int col = 0;
    int index = 0;
    while (remaining > 0) {
        bvh::Joint j;
        j.name = index == 0 ? "root" : "j" + std::to_string(index);
        j.offset = index == 0 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(0.0, 10.0, 0.0);
        const int take = std::min(remaining, 3);
        for (int k = 0; k < take; ++k) j.channels.push_back(order[k]);
        j.parent = index - 1;
        j.channel_offset = col;
        if (index > 0) doc.joints[static_cast<std::size_t>(index - 1)].children.push_back(index);
        doc.joints.push_back(std::move(j));
        col += take;
        remaining -= take;
        ++index;
    }
    bvh::Joint tip;
    tip.name = "End Site";
    tip.offset = Eigen::Vector3d(0.0, 10.0, 0.0);
    tip.parent = index - 1;
    tip.end_site = true;
    tip.channel_offset = col;
    doc.joints[static_cast<std::size_t>(index - 1)].children.push_back(index);
    doc.joints.push_back(std::move(tip));
    return doc;
}

bvh::BvhDocument motion_to_bvh(const Eigen::MatrixXd& motion, double fps, double channel_scale) {
    if (motion.rows() < 1 || motion.cols() < 1) throw ConfigError("motion_to_bvh: empty motion");
    if (fps <= 0.0) throw ConfigError("motion_to_bvh: fps must be positive");
    bvh::BvhDocument doc = make_chain_skeleton(static_cast<int>(motion.cols()));
    doc.frame_count = static_cast<int>(motion.rows());
    doc.frame_time = 1.0 / fps;
    doc.motion.assign(static_cast<std::size_t>(motion.rows()),
                      std::vector<double>(static_cast<std::size_t>(motion.cols())));
    for (Eigen::Index t = 0; t < motion.rows(); ++t)
        for (Eigen::Index j = 0; j < motion.cols(); ++j)
            doc.motion[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] =
                channel_scale * motion(t, j);
    return doc;
}

}  // namespace tutor::pipeline
