#pragma once

#include <map>
#include <string>
#include <vector>

#include "tutor/common.hpp"

#include <json.hpp>

namespace tutor::pipeline {

// Chunked columnar container: a JSON header (schema, dims, fps, act
// vocabulary, per-clip index with byte offsets) followed by raw little-endian
// float32 blocks, one per (clip, stream). Write -> read -> write is
// byte-identical.
struct DataContainer {
    struct StreamDef {
        std::string name;
        int cols = 0;
        bool per_clip_constant = false;  // single row per clip (e.g. reliability, targets)
    };
    struct Clip {
        std::string id;
        int frames = 0;  // T; rows of non-constant streams
        std::map<std::string, std::vector<float>> streams;
    };

    std::vector<StreamDef> schema;
    double fps = 30.0;
    std::vector<std::string> act_vocab;
    nlohmann::json meta;  // free-form generator metadata
    std::vector<Clip> clips;

    const StreamDef& stream_def(const std::string& name) const;
    bool has_stream(const std::string& name) const;

    void save(const std::string& path) const;
    static DataContainer load(const std::string& path);
};

}  // namespace tutor::pipeline
