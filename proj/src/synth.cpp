#include "tutor/synth.hpp"

#include <cmath>

#include "tutor/policy.hpp"

namespace tutor::pipeline {

namespace {

// small fixed basis of nonlinear features of (v, a)
double basis(int k, double v, double a) {
    switch (k % 6) {
        case 0: return v;
        case 1: return a;
        case 2: return v * v;
        case 3: return std::sin(3.0 * v);
        case 4: return v * a;
        default: return std::cos(2.0 * a);
    }
}

}  // namespace

DataContainer generate_affect_dataset(const AffectSynthSpec& spec) {
    if (spec.segments < 1) throw ConfigError("affect synth: segments must be positive");
    if (spec.text_dim < 2 || spec.visual_dim < 2 || spec.acoustic_dim < 2)
        throw ConfigError("affect synth: modality dims must be >= 2");

    DataContainer c;
    c.schema = {{"text", spec.text_dim, false},
                {"visual", spec.visual_dim, false},
                {"acoustic", spec.acoustic_dim, false},
                {"reliability", 3, true},
                {"targets", 2, true}};
    c.fps = 1.0;
    c.meta = {{"generator", "affect_synth"},
              {"segments", spec.segments},
              {"degrade_fraction", spec.degrade_fraction},
              {"seed", spec.seed}};

    Rng rng(derive_seed(spec.seed, "affect-synth"));
    const int dims[3] = {spec.visual_dim, spec.acoustic_dim, spec.text_dim};
    const double noise[3] = {spec.noise_visual, spec.noise_acoustic, spec.noise_text};
    const char* names[3] = {"visual", "acoustic", "text"};

    for (int i = 0; i < spec.segments; ++i) {
        const double v = rng.uniform(-1.0, 1.0);
        const double a = rng.uniform(0.0, 1.0);
        double g[3];
        for (double& q : g) q = rng.uniform(0.2, 1.0);

        int masked = -1;
        if (spec.degrade_fraction > 0.0 && rng.uniform() < spec.degrade_fraction)
            masked = static_cast<int>(rng.uniform_index(3));

        DataContainer::Clip clip;
        clip.id = "seg" + std::to_string(i);
        clip.frames = 1;
        for (int m = 0; m < 3; ++m) {  // (vis, aud, txt) order
            std::vector<float> feats(static_cast<std::size_t>(dims[m]));
            const int informative = dims[m] / 2;
            const double sigma = noise[m] * (1.2 - g[m]);
            for (int k = 0; k < dims[m]; ++k) {
                double x;
                if (k < informative)
                    x = basis(k + m, v, a) + sigma * rng.gaussian();
                else
                    x = rng.gaussian();
                feats[static_cast<std::size_t>(k)] = static_cast<float>(x);
            }
            if (masked == m) {
                std::fill(feats.begin(), feats.end(), 0.0f);
                g[m] = 0.0;
            }
            clip.streams[names[m]] = std::move(feats);
        }
        clip.streams["reliability"] = {static_cast<float>(g[0]), static_cast<float>(g[1]),
                                       static_cast<float>(g[2])};
        clip.streams["targets"] = {static_cast<float>(v), static_cast<float>(a)};
        c.clips.push_back(std::move(clip));
    }
    return c;
}

DataContainer generate_motion_dataset(const MotionSynthSpec& spec) {
    if (spec.acts.empty() || spec.acts.size() != spec.amplitudes.size())
        throw ConfigError("motion synth: acts and amplitudes must align");
    if (spec.frames < 4 || spec.motion_dim < 1) throw ConfigError("motion synth: bad dimensions");
    if (spec.audio_dim < 2) throw ConfigError("motion synth: audio_dim must be >= 2");

    DataContainer c;
    c.schema = {{"motion", spec.motion_dim, false},
                {"audio", spec.audio_dim, false},
                {"text", spec.text_dim, false},
                {"acts", 1, false},
                {"act_clip", 1, true}};
    c.fps = spec.fps;
    for (int i = 0; i < policy::kNumActs; ++i) c.act_vocab.push_back(policy::act_name(static_cast<policy::Act>(i)));
    c.meta = {{"generator", "motion_synth"},
              {"acts", spec.acts},
              {"amplitudes", spec.amplitudes},
              {"base_freq", spec.base_freq},
              {"noise", spec.noise},
              {"seed", spec.seed}};

    Rng rng(derive_seed(spec.seed, "motion-synth"));
    const double omega = 2.0 * M_PI * spec.base_freq / spec.frames;
    for (std::size_t ai = 0; ai < spec.acts.size(); ++ai) {
        const int act_index = static_cast<int>(policy::act_from_name(spec.acts[ai]));
        const double amp = spec.amplitudes[ai];
        for (int k = 0; k < spec.clips_per_act; ++k) {
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            DataContainer::Clip clip;
            clip.id = spec.acts[ai] + "_" + std::to_string(k);
            clip.frames = spec.frames;
            std::vector<float> motion(static_cast<std::size_t>(spec.frames * spec.motion_dim));
            std::vector<float> audio(static_cast<std::size_t>(spec.frames * spec.audio_dim));
            std::vector<float> text(static_cast<std::size_t>(spec.frames * spec.text_dim));
            std::vector<float> acts(static_cast<std::size_t>(spec.frames),
                                    static_cast<float>(act_index));
            for (int t = 0; t < spec.frames; ++t) {
                for (int j = 0; j < spec.motion_dim; ++j)
                    motion[static_cast<std::size_t>(t * spec.motion_dim + j)] = static_cast<float>(
                        amp * std::sin(omega * t + phase + 0.7 * j) + spec.noise * rng.gaussian());
                // the phase is recoverable from the conditioning track
                audio[static_cast<std::size_t>(t * spec.audio_dim + 0)] =
                    static_cast<float>(std::sin(omega * t + phase));
                audio[static_cast<std::size_t>(t * spec.audio_dim + 1)] =
                    static_cast<float>(std::cos(omega * t + phase));
                for (int j = 2; j < spec.audio_dim; ++j)
                    audio[static_cast<std::size_t>(t * spec.audio_dim + j)] =
                        static_cast<float>(0.1 * rng.gaussian());
                for (int j = 0; j < spec.text_dim; ++j)
                    text[static_cast<std::size_t>(t * spec.text_dim + j)] =
                        static_cast<float>(0.1 * rng.gaussian());
            }
            clip.streams["motion"] = std::move(motion);
            clip.streams["audio"] = std::move(audio);
            clip.streams["text"] = std::move(text);
            clip.streams["acts"] = std::move(acts);
            clip.streams["act_clip"] = {static_cast<float>(act_index)};
            c.clips.push_back(std::move(clip));
        }
    }
    return c;
}

std::vector<diffusion::ClipSample> clips_from_container(const DataContainer& container, int num_acts,
                                                        int seed_frames) {
    std::vector<diffusion::ClipSample> out;
    const int Dm = container.stream_def("motion").cols;
    const int Da = container.stream_def("audio").cols;
    const int Dt = container.stream_def("text").cols;
    for (const auto& clip : container.clips) {
        const int T = clip.frames;
        diffusion::ClipSample s;
        s.motion.resize(T, Dm);
        s.cond.resize(T, Da + Dt);
        s.u_frames = Eigen::MatrixXd::Zero(T, num_acts);
        const auto& motion = clip.streams.at("motion");
        const auto& audio = clip.streams.at("audio");
        const auto& text = clip.streams.at("text");
        const auto& acts = clip.streams.at("acts");
        for (int t = 0; t < T; ++t) {
            for (int j = 0; j < Dm; ++j) s.motion(t, j) = motion[static_cast<std::size_t>(t * Dm + j)];
            for (int j = 0; j < Da; ++j) s.cond(t, j) = audio[static_cast<std::size_t>(t * Da + j)];
            for (int j = 0; j < Dt; ++j) s.cond(t, Da + j) = text[static_cast<std::size_t>(t * Dt + j)];
            const int fa = static_cast<int>(acts[static_cast<std::size_t>(t)]);
            if (fa < 0 || fa >= num_acts) throw DataError("clip " + clip.id + ": act index out of range");
            s.u_frames(t, fa) = 1.0;
        }
        s.act_index = static_cast<int>(clip.streams.at("act_clip")[0]);
        if (s.act_index < 0 || s.act_index >= num_acts)
            throw DataError("clip " + clip.id + ": clip act out of range");
        s.u = Eigen::VectorXd::Zero(num_acts);
        s.u(s.act_index) = 1.0;
        s.seed_frames = seed_frames;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace tutor::pipeline
