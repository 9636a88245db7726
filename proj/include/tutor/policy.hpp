#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tutor/common.hpp"

#include <json.hpp>

namespace tutor::policy {

constexpr int kNumActs = 8;

enum class Act : int {
    praise = 0,
    hint = 1,
    explain_ = 2,
    checkin = 3,
    slow_down = 4,
    challenge = 5,
    neutral = 6,
    unclear = 7,
};

const char* act_name(Act a);
Act act_from_name(const std::string& name);

inline std::array<int, kNumActs> one_hot(Act a) {
    std::array<int, kNumActs> u{};
    u[static_cast<std::size_t>(static_cast<int>(a))] = 1;
    return u;
}

struct AffectState {
    double v_bar = 0.0;
    double a_bar = 0.0;
    double dv = 0.0;
    double da = 0.0;
    double confidence = 1.0;
    int step_index = 0;
};

struct PolicyThresholds {
    double v_pos = 0.24;
    double v_neg = -0.11;
    double a_high = 0.42;
    double trend_eps = 0.02;
    double conf_min = 0.5;
    double alpha = 0.3;

    nlohmann::json to_json() const;
    static PolicyThresholds from_json(const nlohmann::json& j);
};

// One exponential smoothing step. With no previous state the smoothed values
// are initialized to the raw ones.
std::pair<double, double> smooth(const std::optional<AffectState>& prev, double v, double a, double alpha);

// Advances a conversation stream by one sentence: smoothing, trends, and step
// index bookkeeping.
AffectState advance(const std::optional<AffectState>& prev, double v, double a, double confidence,
                    double alpha);

// Prioritized rule evaluation; first matching rule wins. All comparisons are
// strict.
Act decide(const AffectState& state, const PolicyThresholds& th);

struct ActSchedule {
    std::vector<std::array<int, kNumActs>> per_frame;  // T x K, each row one-hot
    std::array<int, kNumActs> clip_level{};            // modal act, ties to lower index
    Act clip_act = Act::neutral;
};

struct SentenceSpan {
    Act act;
    int begin;  // inclusive frame
    int end;    // exclusive frame
};

// Spans must cover [0, T) without overlap, in order.
ActSchedule encode_schedule(const std::vector<SentenceSpan>& spans, int total_frames);

}  // namespace tutor::policy
