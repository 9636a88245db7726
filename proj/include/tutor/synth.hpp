#pragma once

#include <string>
#include <vector>

#include "tutor/container.hpp"
#include "tutor/diffusion/train.hpp"

namespace tutor::pipeline {

// Synthetic affect segments with planted modality-target structure: each
// modality's informative dims encode nonlinear functions of (valence,
// arousal) with noise scaled by the per-sample reliability, so experts are
// learnable and the gate has a real signal to arbitrate on.
struct AffectSynthSpec {
    int segments = 600;
    int text_dim = 20;
    int visual_dim = 24;
    int acoustic_dim = 16;
    double noise_text = 0.05;
    double noise_visual = 0.10;
    double noise_acoustic = 0.15;
    double degrade_fraction = 0.0;  // fraction of segments with one modality masked
    std::uint64_t seed = 0;
};

DataContainer generate_affect_dataset(const AffectSynthSpec& spec);

// Act-conditioned sinusoid motion clips with a per-clip random phase; the
// conditioning tracks carry the phase, the act label carries the amplitude.
struct MotionSynthSpec {
    int clips_per_act = 32;
    int frames = 32;
    int motion_dim = 8;
    int audio_dim = 12;
    int text_dim = 6;
    std::vector<std::string> acts = {"explain", "neutral"};
    std::vector<double> amplitudes = {1.5, 0.5};  // one per act
    double base_freq = 2.0;                       // cycles per clip
    double noise = 0.05;
    double fps = 30.0;
    std::uint64_t seed = 0;
};

DataContainer generate_motion_dataset(const MotionSynthSpec& spec);

// Converts a motion container into diffusion training clips (one-hot acts are
// built against the container's act vocabulary).
std::vector<diffusion::ClipSample> clips_from_container(const DataContainer& container, int num_acts,
                                                        int seed_frames = 0);

}  // namespace tutor::pipeline
