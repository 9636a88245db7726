#include "tutor/container.hpp"

#include <cstring>
#include <fstream>

namespace tutor::pipeline {

const DataContainer::StreamDef& DataContainer::stream_def(const std::string& name) const {
    for (const auto& s : schema)
        if (s.name == name) return s;
    throw DataError("container: no stream named '" + name + "'");
}

bool DataContainer::has_stream(const std::string& name) const {
    for (const auto& s : schema)
        if (s.name == name) return true;
    return false;
}

void DataContainer::save(const std::string& path) const {
    // layout the data blob first so the header can carry exact offsets
    std::vector<char> blob;
    nlohmann::json jclips = nlohmann::json::array();
    for (const auto& clip : clips) {
        nlohmann::json jc = {{"id", clip.id}, {"frames", clip.frames}};
        nlohmann::json joff = nlohmann::json::object();
        for (const auto& sd : schema) {
            const auto it = clip.streams.find(sd.name);
            if (it == clip.streams.end()) throw DataError("container: clip " + clip.id + " missing stream " + sd.name);
            const std::size_t rows = sd.per_clip_constant ? 1 : static_cast<std::size_t>(clip.frames);
            if (it->second.size() != rows * static_cast<std::size_t>(sd.cols))
                throw DataError("container: clip " + clip.id + " stream " + sd.name + " has wrong length");
            joff[sd.name] = blob.size();
            const std::size_t bytes = it->second.size() * sizeof(float);
            const std::size_t at = blob.size();
            blob.resize(at + bytes);
            std::memcpy(blob.data() + at, it->second.data(), bytes);
        }
        jc["offsets"] = std::move(joff);
        jclips.push_back(std::move(jc));
    }

    nlohmann::json jschema = nlohmann::json::array();
    for (const auto& s : schema)
        jschema.push_back({{"name", s.name}, {"cols", s.cols}, {"per_clip_constant", s.per_clip_constant}});
    const nlohmann::json header = {{"format", "data_container"}, {"version", 1},
                                   {"schema", std::move(jschema)}, {"fps", fps},
                                   {"act_vocab", act_vocab},      {"meta", meta},
                                   {"clips", std::move(jclips)}};
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("container: cannot write " + path);
    const char magic[4] = {'T', 'M', 'D', 'C'};
    f.write(magic, 4);
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

DataContainer DataContainer::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("container: cannot read " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "TMDC", 4) != 0) throw DataError("container: bad magic in " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw DataError("container: truncated header in " + path);
    const nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw DataError("container: corrupt header JSON in " + path);
    if (header.value("format", "") != "data_container" || header.value("version", 0) != 1)
        throw DataError("container: unrecognized envelope in " + path);

    DataContainer c;
    for (const auto& js : header.at("schema")) {
        StreamDef s;
        s.name = js.at("name").get<std::string>();
        s.cols = js.at("cols").get<int>();
        s.per_clip_constant = js.at("per_clip_constant").get<bool>();
        c.schema.push_back(std::move(s));
    }
    c.fps = header.at("fps").get<double>();
    c.act_vocab = header.at("act_vocab").get<std::vector<std::string>>();
    c.meta = header.value("meta", nlohmann::json::object());

    std::vector<char> blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    for (const auto& jc : header.at("clips")) {
        Clip clip;
        clip.id = jc.at("id").get<std::string>();
        clip.frames = jc.at("frames").get<int>();
        const auto& joff = jc.at("offsets");
        for (const auto& sd : c.schema) {
            const std::size_t off = joff.at(sd.name).get<std::size_t>();
            const std::size_t rows = sd.per_clip_constant ? 1 : static_cast<std::size_t>(clip.frames);
            const std::size_t count = rows * static_cast<std::size_t>(sd.cols);
            if (off + count * sizeof(float) > blob.size())
                throw DataError("container: offset out of range for clip " + clip.id + " stream " + sd.name);
            std::vector<float> data(count);
            std::memcpy(data.data(), blob.data() + off, count * sizeof(float));
            clip.streams[sd.name] = std::move(data);
        }
        c.clips.push_back(std::move(clip));
    }
    return c;
}

}  // namespace tutor::pipeline
