#include <cstring>
#include <fstream>

#include "peva/synthworld.hpp"

namespace peva::world {

namespace {

constexpr char kDataMagic[8] = {'P', 'E', 'V', 'A', 'D', 'A', 'T', 'A'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError(std::string("dataset truncated reading ") + what);
    return v;
}

void write_pose_block(std::ostream& os, const kin::PoseFrame& p) {
    put<double>(os, p.timestamp);
    for (int i = 0; i < 3; ++i) put<float>(os, static_cast<float>(p.root_translation[i]));
    for (const auto& q : p.joint_rotations) {
        put<float>(os, static_cast<float>(q.w));
        put<float>(os, static_cast<float>(q.x));
        put<float>(os, static_cast<float>(q.y));
        put<float>(os, static_cast<float>(q.z));
    }
}

kin::PoseFrame read_pose_block(std::istream& is) {
    kin::PoseFrame p;
    p.timestamp = get<double>(is, "timestamp");
    for (int i = 0; i < 3; ++i) p.root_translation[i] = get<float>(is, "translation");
    for (auto& q : p.joint_rotations) {
        q.w = get<float>(is, "quat");
        q.x = get<float>(is, "quat");
        q.y = get<float>(is, "quat");
        q.z = get<float>(is, "quat");
    }
    return p;
}

struct Header {
    DatasetMeta meta;
    std::vector<uint64_t> offsets;
    std::vector<uint64_t> frame_counts;
};

Header read_header(std::istream& f, const std::string& path) {
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kDataMagic, 8) != 0)
        throw DataError("bad dataset magic: " + path);
    auto version = get<uint32_t>(f, "version");
    if (version != kDatasetVersion)
        throw DataError("unsupported dataset version " + std::to_string(version));
    Header h;
    h.meta.width = get<uint32_t>(f, "width");
    h.meta.height = get<uint32_t>(f, "height");
    h.meta.fps = get<double>(f, "fps");
    h.meta.seed = get<uint64_t>(f, "seed");
    auto joints = get<uint32_t>(f, "joint count");
    if (joints != kin::kNumJoints) throw DataError("dataset joint count mismatch");
    auto n_traj = get<uint64_t>(f, "trajectory count");
    h.offsets.resize(n_traj);
    h.frame_counts.resize(n_traj);
    for (uint64_t i = 0; i < n_traj; ++i) {
        h.offsets[i] = get<uint64_t>(f, "offset");
        h.frame_counts[i] = get<uint64_t>(f, "frame count");
    }
    return h;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f.write(kDataMagic, 8);
    put<uint32_t>(f, kDatasetVersion);
    put<uint32_t>(f, ds.meta.width);
    put<uint32_t>(f, ds.meta.height);
    put<double>(f, ds.meta.fps);
    put<uint64_t>(f, ds.meta.seed);
    put<uint32_t>(f, kin::kNumJoints);
    put<uint64_t>(f, ds.trajectories.size());

    size_t frame_bytes = static_cast<size_t>(ds.meta.width) * ds.meta.height * 3;
    size_t pose_bytes = sizeof(double) + 3 * sizeof(float) + kin::kNumJoints * 4 * sizeof(float);
    uint64_t offset = 8 + 4 + 4 + 4 + 8 + 8 + 4 + 8 + 16 * ds.trajectories.size();
    for (const auto& t : ds.trajectories) {
        put<uint64_t>(f, offset);
        put<uint64_t>(f, t.frames.size());
        offset += t.frames.size() * (frame_bytes + pose_bytes);
    }
    for (const auto& t : ds.trajectories) {
        PEVA_CHECK(t.frames.size() == t.poses.size(), "frames/poses must align");
        for (const auto& fr : t.frames) {
            PEVA_CHECK(fr.rgb.size() == frame_bytes, "frame resolution mismatch");
            f.write(reinterpret_cast<const char*>(fr.rgb.data()),
                    static_cast<std::streamsize>(fr.rgb.size()));
        }
        for (const auto& p : t.poses) write_pose_block(f, p);
    }
    if (!f) throw DataError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    DatasetReader reader(path);
    Dataset ds;
    ds.meta = reader.meta();
    ds.trajectories.reserve(reader.trajectory_count());
    for (uint64_t i = 0; i < reader.trajectory_count(); ++i)
        ds.trajectories.push_back(reader.load_trajectory(i));
    return ds;
}

DatasetReader::DatasetReader(const std::string& path) : path_(path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    Header h = read_header(f, path);
    meta_ = h.meta;
    offsets_ = std::move(h.offsets);
    frame_counts_ = std::move(h.frame_counts);
    // verify the file is long enough for the table it promises
    f.seekg(0, std::ios::end);
    auto file_size = static_cast<uint64_t>(f.tellg());
    size_t frame_bytes = static_cast<size_t>(meta_.width) * meta_.height * 3;
    size_t pose_bytes = sizeof(double) + 3 * sizeof(float) + kin::kNumJoints * 4 * sizeof(float);
    for (size_t i = 0; i < offsets_.size(); ++i) {
        uint64_t need = offsets_[i] + frame_counts_[i] * (frame_bytes + pose_bytes);
        if (need > file_size) throw DataError("dataset truncated: " + path);
    }
}

uint64_t DatasetReader::frame_count(uint64_t traj) const {
    PEVA_CHECK(traj < frame_counts_.size(), "trajectory index out of range");
    return frame_counts_[traj];
}

Trajectory DatasetReader::load_trajectory(uint64_t traj) const {
    PEVA_CHECK(traj < offsets_.size(), "trajectory index out of range");
    std::ifstream f(path_, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path_);
    f.seekg(static_cast<std::streamoff>(offsets_[traj]));
    Trajectory t;
    uint64_t n = frame_counts_[traj];
    size_t frame_bytes = static_cast<size_t>(meta_.width) * meta_.height * 3;
    t.frames.resize(n);
    for (auto& fr : t.frames) {
        fr.width = static_cast<int>(meta_.width);
        fr.height = static_cast<int>(meta_.height);
        fr.rgb.resize(frame_bytes);
        f.read(reinterpret_cast<char*>(fr.rgb.data()),
               static_cast<std::streamsize>(frame_bytes));
        if (!f) throw DataError("dataset truncated reading frames: " + path_);
    }
    t.poses.resize(n);
    for (auto& p : t.poses) p = read_pose_block(f);
    return t;
}

}  // namespace peva::world
