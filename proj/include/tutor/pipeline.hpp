#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tutor/common.hpp"
#include "tutor/container.hpp"
#include "tutor/diffusion/train.hpp"
#include "tutor/fusion.hpp"
#include "tutor/gbdt.hpp"
#include "tutor/policy.hpp"
#include "tutor/retarget.hpp"
#include "tutor/synth.hpp"

#include <json.hpp>

namespace tutor::pipeline {

enum class Mode { synth_data, train_experts, train_gate, train_diffusion, run, analyze, ablate };

Mode mode_from_name(const std::string& name);
const char* mode_name(Mode m);

// Per-modality valence/arousal experts plus their output calibrations.
struct ModalityExpert {
    gbdt::BoostedModel valence;
    gbdt::BoostedModel arousal;
    fusion::Calibration cal_valence;
    fusion::Calibration cal_arousal;
};

struct AffectModels {
    std::array<ModalityExpert, 3> experts{};  // (vis, aud, txt)

    fusion::ExpertPrediction predict(int modality, std::span<const double> features) const;

    nlohmann::json to_json() const;
    static AffectModels from_json(const nlohmann::json& j);

    void save(const std::string& path) const;
    static AffectModels load(const std::string& path);
};

struct RunOptions {
    int max_sentences = 8;
    int frames_per_sentence = 16;
    int infer_steps = 50;
    int seed_frames = 0;
    double channel_scale = 20.0;
    std::optional<double> force_confidence;  // overrides gate confidence when set
};

struct AblateOptions {
    std::string checkpoint_conditioned;  // empty -> train in place
    std::string checkpoint_baseline;
    int clips_per_act = 8;
    int infer_steps = 40;
    int segments = 4;  // within-clip segments for the scheduling ablation
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    std::string affect_data;  // container paths
    std::string motion_data;

    std::string experts_path;  // model artifact paths
    std::string gate_path;
    std::string diffusion_path;
    std::string profile_path;

    nlohmann::json synth;  // generator spec, forwarded to the synth parsers
    policy::PolicyThresholds thresholds;
    gbdt::BoostingConfig boosting;
    fusion::GateTrainConfig gate_train;
    diffusion::DenoiserConfig denoiser;
    diffusion::TrainConfig diffusion_train;
    RunOptions run;
    AblateOptions ablate;

    nlohmann::json to_json() const;  // resolved config, logged on every run
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::string& path);
};

// Exclusive ownership of an output directory via a lock file; throws
// ConfigError if another process holds it.
class DirLock {
  public:
    explicit DirLock(const std::string& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    std::string path_;
};

// Dispatches one pipeline mode; writes artifacts under config.out_dir.
void run_mode(const PipelineConfig& config, Mode mode);

// Individual stages (exposed for tests).
void synth_data(const PipelineConfig& config);
AffectModels train_experts(const PipelineConfig& config);
fusion::GateParams train_gate_stage(const PipelineConfig& config);
void train_diffusion_stage(const PipelineConfig& config);
void run_pipeline(const PipelineConfig& config);
void analyze(const PipelineConfig& config);
void ablate(const PipelineConfig& config);

}  // namespace tutor::pipeline
