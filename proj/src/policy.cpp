#include "tutor/policy.hpp"

#include <stdexcept>

namespace tutor::policy {

const char* act_name(Act a) {
    switch (a) {
        case Act::praise: return "praise";
        case Act::hint: return "hint";
        case Act::explain_: return "explain";
        case Act::checkin: return "checkin";
        case Act::slow_down: return "slow_down";
        case Act::challenge: return "challenge";
        case Act::neutral: return "neutral";
        case Act::unclear: return "unclear";
    }
    return "?";
}

Act act_from_name(const std::string& name) {
    for (int i = 0; i < kNumActs; ++i)
        if (name == act_name(static_cast<Act>(i))) return static_cast<Act>(i);
    throw std::invalid_argument("unknown act: " + name);
}

nlohmann::json PolicyThresholds::to_json() const {
    return {{"v_pos", v_pos},         {"v_neg", v_neg},       {"a_high", a_high},
            {"trend_eps", trend_eps}, {"conf_min", conf_min}, {"alpha", alpha}};
}

PolicyThresholds PolicyThresholds::from_json(const nlohmann::json& j) {
    PolicyThresholds t;
    t.v_pos = j.value("v_pos", t.v_pos);
    t.v_neg = j.value("v_neg", t.v_neg);
    t.a_high = j.value("a_high", t.a_high);
    t.trend_eps = j.value("trend_eps", t.trend_eps);
    t.conf_min = j.value("conf_min", t.conf_min);
    t.alpha = j.value("alpha", t.alpha);
    if (!(t.v_neg < 0.0 && 0.0 < t.v_pos)) throw ConfigError("policy thresholds: need v_neg < 0 < v_pos");
    if (!(t.a_high > 0.0 && t.a_high < 1.0)) throw ConfigError("policy thresholds: a_high must be in (0,1)");
    if (!(t.alpha > 0.0 && t.alpha <= 1.0)) throw ConfigError("policy thresholds: alpha must be in (0,1]");
    return t;
}

std::pair<double, double> smooth(const std::optional<AffectState>& prev, double v, double a, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("smooth: alpha must be in (0,1]");
    if (!prev) return {v, a};
    return {alpha * v + (1.0 - alpha) * prev->v_bar, alpha * a + (1.0 - alpha) * prev->a_bar};
}

AffectState advance(const std::optional<AffectState>& prev, double v, double a, double confidence,
                    double alpha) {
    AffectState s;
    const auto [vb, ab] = smooth(prev, v, a, alpha);
    s.v_bar = vb;
    s.a_bar = ab;
    s.dv = prev ? vb - prev->v_bar : 0.0;
    s.da = prev ? ab - prev->a_bar : 0.0;
    s.confidence = confidence;
    s.step_index = prev ? prev->step_index + 1 : 0;
    return s;
}

Act decide(const AffectState& s, const PolicyThresholds& th) {
    // 1. uncertainty handling
    if (s.confidence < th.conf_min) return Act::unclear;
    // 2. regulation first
    if ((s.a_bar > th.a_high && s.v_bar < th.v_neg) || (s.da > th.trend_eps && s.dv < -th.trend_eps))
        return Act::slow_down;
    // 3. progression
    if (s.v_bar > th.v_pos && s.a_bar > th.a_high && s.dv > th.trend_eps) return Act::challenge;
    // 4. positive reinforcement
    if (s.v_bar > th.v_pos) return Act::praise;
    // 5. instructional support: worsening trend without high arousal
    if (s.dv < -th.trend_eps && s.a_bar <= th.a_high) return Act::hint;
    // 6. neutral valence with moderate arousal
    if (s.v_bar >= th.v_neg && s.v_bar <= th.v_pos && s.a_bar > th.a_high / 2.0) return Act::explain_;
    // 7. stable neutral
    return Act::neutral;
}

ActSchedule encode_schedule(const std::vector<SentenceSpan>& spans, int total_frames) {
    if (total_frames <= 0) throw std::invalid_argument("encode_schedule: total_frames must be positive");
    int cursor = 0;
    for (const auto& sp : spans) {
        if (sp.begin != cursor || sp.end <= sp.begin)
            throw std::invalid_argument("encode_schedule: spans must tile [0,T) in order, gap at frame " +
                                        std::to_string(cursor));
        cursor = sp.end;
    }
    if (cursor != total_frames)
        throw std::invalid_argument("encode_schedule: spans cover [0," + std::to_string(cursor) +
                                    ") but T=" + std::to_string(total_frames));

    ActSchedule sched;
    sched.per_frame.resize(static_cast<std::size_t>(total_frames));
    std::array<int, kNumActs> counts{};
    for (const auto& sp : spans) {
        const auto u = one_hot(sp.act);
        for (int f = sp.begin; f < sp.end; ++f) sched.per_frame[static_cast<std::size_t>(f)] = u;
        counts[static_cast<std::size_t>(static_cast<int>(sp.act))] += sp.end - sp.begin;
    }
    int best = 0;
    for (int i = 1; i < kNumActs; ++i)
        if (counts[static_cast<std::size_t>(i)] > counts[static_cast<std::size_t>(best)]) best = i;
    sched.clip_act = static_cast<Act>(best);
    sched.clip_level = one_hot(sched.clip_act);
    return sched;
}

}  // namespace tutor::policy
