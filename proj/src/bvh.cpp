#include "tutor/bvh.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tutor::bvh {

const char* channel_name(Channel c) {
    switch (c) {
        case Channel::Xposition: return "Xposition";
        case Channel::Yposition: return "Yposition";
        case Channel::Zposition: return "Zposition";
        case Channel::Xrotation: return "Xrotation";
        case Channel::Yrotation: return "Yrotation";
        case Channel::Zrotation: return "Zrotation";
    }
    return "?";
}

int BvhDocument::total_channels() const {
    int n = 0;
    for (const auto& j : joints) n += static_cast<int>(j.channels.size());
    return n;
}

namespace {

struct Tokenizer {
    const std::string& text;
    std::size_t pos = 0;
    int line = 1;

    explicit Tokenizer(const std::string& t) : text(t) {}

    void skip_ws() {
        while (pos < text.size()) {
            const char c = text[pos];
            if (c == '\n') {
                ++line;
                ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    }

    bool eof() {
        skip_ws();
        return pos >= text.size();
    }

    std::string next() {
        skip_ws();
        if (pos >= text.size()) throw ParseError("unexpected end of file", line);
        std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return text.substr(start, pos - start);
    }

    // line of the next token (skips leading whitespace so errors point at it)
    int next_line() {
        skip_ws();
        return line;
    }

    std::string expect(const std::string& keyword) {
        const int at = next_line();
        const std::string t = next();
        if (t != keyword) throw ParseError("expected '" + keyword + "', got '" + t + "'", at);
        return t;
    }

    double number() {
        const int at = next_line();
        const std::string t = next();
        double v = 0.0;
        const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
            throw ParseError("expected a number, got '" + t + "'", at);
        return v;
    }

    int integer() {
        const double v = number();
        if (v != std::floor(v)) throw ParseError("expected an integer", line);
        return static_cast<int>(v);
    }
};

Channel channel_from_token(const std::string& t, int line) {
    for (Channel c : {Channel::Xposition, Channel::Yposition, Channel::Zposition, Channel::Xrotation,
                      Channel::Yrotation, Channel::Zrotation})
        if (t == channel_name(c)) return c;
    throw ParseError("unknown channel '" + t + "'", line);
}

void parse_offset(Tokenizer& tk, Joint& j) {
    tk.expect("OFFSET");
    j.offset.x() = tk.number();
    j.offset.y() = tk.number();
    j.offset.z() = tk.number();
}

// Parses one JOINT/ROOT body; returns index of the created joint.
int parse_joint(Tokenizer& tk, BvhDocument& doc, int parent, const std::string& name) {
    const int idx = static_cast<int>(doc.joints.size());
    doc.joints.emplace_back();
    doc.joints[static_cast<std::size_t>(idx)].name = name;
    doc.joints[static_cast<std::size_t>(idx)].parent = parent;
    if (parent >= 0) doc.joints[static_cast<std::size_t>(parent)].children.push_back(idx);

    tk.expect("{");
    parse_offset(tk, doc.joints[static_cast<std::size_t>(idx)]);
    {
        const int at = tk.next_line();
        const std::string kw = tk.next();
        if (kw != "CHANNELS") throw ParseError("expected CHANNELS, got '" + kw + "'", at);
        const int n = tk.integer();
        if (n < 0 || n > 6) throw ParseError("channel count out of range", at);
        for (int i = 0; i < n; ++i) {
            const int cl = tk.next_line();
            doc.joints[static_cast<std::size_t>(idx)].channels.push_back(
                channel_from_token(tk.next(), cl));
        }
    }
    for (;;) {
        const int at = tk.next_line();
        const std::string kw = tk.next();
        if (kw == "}") break;
        if (kw == "JOINT") {
            const std::string child = tk.next();
            parse_joint(tk, doc, idx, child);
        } else if (kw == "End") {
            tk.expect("Site");
            const int ei = static_cast<int>(doc.joints.size());
            doc.joints.emplace_back();
            doc.joints[static_cast<std::size_t>(ei)].name = doc.joints[static_cast<std::size_t>(idx)].name + "_end";
            doc.joints[static_cast<std::size_t>(ei)].parent = idx;
            doc.joints[static_cast<std::size_t>(ei)].end_site = true;
            doc.joints[static_cast<std::size_t>(idx)].children.push_back(ei);
            tk.expect("{");
            parse_offset(tk, doc.joints[static_cast<std::size_t>(ei)]);
            tk.expect("}");
        } else {
            throw ParseError("expected JOINT, End Site or '}', got '" + kw + "'", at);
        }
    }
    return idx;
}

}  // namespace

BvhDocument parse(const std::string& text) {
    Tokenizer tk(text);
    BvhDocument doc;
    tk.expect("HIERARCHY");
    tk.expect("ROOT");
    const std::string root_name = tk.next();
    parse_joint(tk, doc, -1, root_name);

    int col = 0;
    for (auto& j : doc.joints) {
        j.channel_offset = col;
        col += static_cast<int>(j.channels.size());
    }

    tk.expect("MOTION");
    {
        const int at = tk.next_line();
        const std::string kw = tk.next();
        if (kw != "Frames:") throw ParseError("expected 'Frames:', got '" + kw + "'", at);
    }
    doc.frame_count = tk.integer();
    if (doc.frame_count < 0) throw ParseError("negative frame count", tk.line);
    tk.expect("Frame");
    {
        const int at = tk.next_line();
        const std::string kw = tk.next();
        if (kw != "Time:") throw ParseError("expected 'Time:', got '" + kw + "'", at);
    }
    doc.frame_time = tk.number();
    if (!(doc.frame_time > 0.0)) throw ParseError("frame time must be positive", tk.line);

    const int width = doc.total_channels();
    doc.motion.reserve(static_cast<std::size_t>(doc.frame_count));
    for (int f = 0; f < doc.frame_count; ++f) {
        std::vector<double> row;
        row.reserve(static_cast<std::size_t>(width));
        for (int c = 0; c < width; ++c) {
            if (tk.eof())
                throw ParseError("motion row " + std::to_string(f) + " has " + std::to_string(c) +
                                     " of " + std::to_string(width) + " values",
                                 tk.line);
            row.push_back(tk.number());
        }
        doc.motion.push_back(std::move(row));
    }
    if (!tk.eof()) throw ParseError("trailing data after motion table", tk.line);
    return doc;
}

namespace {

void write_joint(std::ostringstream& out, const BvhDocument& doc, int idx, int depth) {
    const Joint& j = doc.joints[static_cast<std::size_t>(idx)];
    const std::string ind(static_cast<std::size_t>(depth), '\t');
    if (j.end_site) {
        out << ind << "End Site\n" << ind << "{\n";
        out << ind << "\tOFFSET " << j.offset.x() << " " << j.offset.y() << " " << j.offset.z() << "\n";
        out << ind << "}\n";
        return;
    }
    out << ind << (j.parent < 0 ? "ROOT " : "JOINT ") << j.name << "\n" << ind << "{\n";
    out << ind << "\tOFFSET " << j.offset.x() << " " << j.offset.y() << " " << j.offset.z() << "\n";
    out << ind << "\tCHANNELS " << j.channels.size();
    for (Channel c : j.channels) out << " " << channel_name(c);
    out << "\n";
    for (int child : j.children) write_joint(out, doc, child, depth + 1);
    out << ind << "}\n";
}

}  // namespace

std::string serialize(const BvhDocument& doc) {
    if (doc.joints.empty()) throw std::invalid_argument("serialize: document has no joints");
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(6);
    out << "HIERARCHY\n";
    write_joint(out, doc, 0, 0);
    out << "MOTION\n";
    out << "Frames: " << doc.frame_count << "\n";
    out << "Frame Time: " << doc.frame_time << "\n";
    for (const auto& row : doc.motion) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
        out << "\n";
    }
    return out.str();
}

namespace {

Eigen::Matrix3d axis_rotation(Channel c, double degrees) {
    const double r = degrees * M_PI / 180.0;
    const double cs = std::cos(r), sn = std::sin(r);
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    switch (c) {
        case Channel::Xrotation:
            m(1, 1) = cs; m(1, 2) = -sn;
            m(2, 1) = sn; m(2, 2) = cs;
            break;
        case Channel::Yrotation:
            m(0, 0) = cs; m(0, 2) = sn;
            m(2, 0) = -sn; m(2, 2) = cs;
            break;
        case Channel::Zrotation:
            m(0, 0) = cs; m(0, 1) = -sn;
            m(1, 0) = sn; m(1, 1) = cs;
            break;
        default:
            throw std::invalid_argument("axis_rotation: not a rotation channel");
    }
    return m;
}

}  // namespace

JointTrajectory forward_kinematics(const BvhDocument& doc, bool include_end_sites) {
    JointTrajectory traj;
    traj.fps = doc.fps();
    std::vector<int> selected;
    for (std::size_t i = 0; i < doc.joints.size(); ++i) {
        if (doc.joints[i].end_site && !include_end_sites) continue;
        selected.push_back(static_cast<int>(i));
        traj.names.push_back(doc.joints[i].name);
    }

    const std::size_t nj = doc.joints.size();
    std::vector<Eigen::Matrix3d> world_rot(nj);
    std::vector<Eigen::Vector3d> world_pos(nj);

    traj.positions.reserve(static_cast<std::size_t>(doc.frame_count));
    for (int f = 0; f < doc.frame_count; ++f) {
        const auto& row = doc.motion[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < nj; ++i) {
            const Joint& j = doc.joints[i];
            Eigen::Vector3d local_t = j.offset;
            Eigen::Matrix3d local_r = Eigen::Matrix3d::Identity();
            int col = j.channel_offset;
            for (Channel c : j.channels) {
                const double v = row[static_cast<std::size_t>(col++)];
                switch (c) {
                    case Channel::Xposition: local_t.x() += v; break;
                    case Channel::Yposition: local_t.y() += v; break;
                    case Channel::Zposition: local_t.z() += v; break;
                    default: local_r = local_r * axis_rotation(c, v); break;
                }
            }
            if (j.parent < 0) {
                world_rot[i] = local_r;
                world_pos[i] = local_t;
            } else {
                const auto p = static_cast<std::size_t>(j.parent);
                world_rot[i] = world_rot[p] * local_r;
                world_pos[i] = world_pos[p] + world_rot[p] * local_t;
            }
        }
        std::vector<Eigen::Vector3d> frame;
        frame.reserve(selected.size());
        for (int idx : selected) frame.push_back(world_pos[static_cast<std::size_t>(idx)]);
        traj.positions.push_back(std::move(frame));
    }
    return traj;
}

}  // namespace tutor::bvh
