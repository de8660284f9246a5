#pragma once

#include <string>
#include <vector>

#include "peva/kinematics.hpp"

namespace peva::kin {

/// Pose trajectory file, binary little-endian:
///   magic "PEVAPOSE", version u32, joint count u32, frame count u64,
///   then per frame: f64 timestamp, 3 x f32 translation, 16 x 4 x f32
///   quaternions (w, x, y, z).
inline constexpr uint32_t kPoseFileVersion = 1;

void write_pose_file(const std::string& path, const std::vector<PoseFrame>& frames);
std::vector<PoseFrame> read_pose_file(const std::string& path);

/// Atomic segments as CSV: label,start,end,magnitude.
void write_segments_csv(const std::string& path, const std::vector<AtomicSegment>& segments);
std::vector<AtomicSegment> read_segments_csv(const std::string& path);

}  // namespace peva::kin
