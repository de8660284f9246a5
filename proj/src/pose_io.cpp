#include "peva/pose_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace peva::kin {

namespace {

constexpr char kPoseMagic[8] = {'P', 'E', 'V', 'A', 'P', 'O', 'S', 'E'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError(std::string("pose file truncated reading ") + what);
    return v;
}

}  // namespace

void write_pose_file(const std::string& path, const std::vector<PoseFrame>& frames) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f.write(kPoseMagic, 8);
    put<uint32_t>(f, kPoseFileVersion);
    put<uint32_t>(f, kNumJoints);
    put<uint64_t>(f, frames.size());
    for (const auto& p : frames) {
        put<double>(f, p.timestamp);
        for (int i = 0; i < 3; ++i) put<float>(f, static_cast<float>(p.root_translation[i]));
        for (const auto& q : p.joint_rotations) {
            put<float>(f, static_cast<float>(q.w));
            put<float>(f, static_cast<float>(q.x));
            put<float>(f, static_cast<float>(q.y));
            put<float>(f, static_cast<float>(q.z));
        }
    }
    if (!f) throw DataError("write failed: " + path);
}

std::vector<PoseFrame> read_pose_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kPoseMagic, 8) != 0)
        throw DataError("bad pose file magic: " + path);
    auto version = get<uint32_t>(f, "version");
    if (version != kPoseFileVersion)
        throw DataError("unsupported pose file version " + std::to_string(version));
    auto joints = get<uint32_t>(f, "joint count");
    if (joints != kNumJoints)
        throw DataError("pose file joint count " + std::to_string(joints) + " != 16");
    auto count = get<uint64_t>(f, "frame count");
    std::vector<PoseFrame> frames(count);
    for (auto& p : frames) {
        p.timestamp = get<double>(f, "timestamp");
        for (int i = 0; i < 3; ++i) p.root_translation[i] = get<float>(f, "translation");
        for (auto& q : p.joint_rotations) {
            q.w = get<float>(f, "quat");
            q.x = get<float>(f, "quat");
            q.y = get<float>(f, "quat");
            q.z = get<float>(f, "quat");
        }
    }
    return frames;
}

void write_segments_csv(const std::string& path, const std::vector<AtomicSegment>& segments) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << "label,start,end,magnitude\n";
    f.precision(10);
    for (const auto& s : segments)
        f << atomic_label_name(s.label) << "," << s.start_index << "," << s.end_index << ","
          << s.magnitude << "\n";
}

std::vector<AtomicSegment> read_segments_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<AtomicSegment> out;
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string label, start, end, mag;
        if (!std::getline(ss, label, ',') || !std::getline(ss, start, ',') ||
            !std::getline(ss, end, ',') || !std::getline(ss, mag, ','))
            throw DataError("malformed segment row: " + line);
        auto l = atomic_label_from_name(label);
        if (!l) throw DataError("unknown atomic label: " + label);
        out.push_back({*l, std::stoul(start), std::stoul(end), std::stod(mag)});
    }
    return out;
}

}  // namespace peva::kin
