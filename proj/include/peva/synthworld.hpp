#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "peva/kinematics.hpp"

namespace peva::world {

using Eigen::Vector3d;

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

struct SceneConfig {
    int min_obstacles = 8;
    int max_obstacles = 32;
    int min_panels = 2;
    int max_panels = 5;
    double bounds_half = 12.0;  // scene is [-b, b]^2 in x/y
};

struct ObstacleBox {
    Vector3d lo, hi;  // axis-aligned, world frame
    Rgb color;
};

/// Deterministic function of (seed, config): colored boxes and vertical
/// panels on a checkered ground plane under a gradient sky.
struct Scene {
    uint64_t seed = 0;
    double bounds_half = 12.0;
    std::vector<ObstacleBox> boxes;
    std::vector<ObstacleBox> panels;
    Rgb floor_a{92, 96, 100}, floor_b{128, 132, 138};
    Rgb sky_horizon{180, 200, 225}, sky_top{70, 110, 180};
    double floor_cell = 1.5;  // checker size, meters
};

Scene generate_scene(uint64_t seed, const SceneConfig& cfg = {});

/// Stable fingerprint of the obstacle layout (for determinism tests).
uint64_t scene_fingerprint(const Scene& scene);

// ---------------------------------------------------------------------------
// Body
// ---------------------------------------------------------------------------

/// A pose plus its forward-kinematics joint positions and the collision flag
/// set when a step had to be clamped to the scene bounds.
struct BodyState {
    kin::PoseFrame pose;
    std::array<Vector3d, kin::kNumJoints> joint_pos;
    bool collision = false;
};

/// Neutral standing body: pelvis at pos with the given yaw, arms hanging.
BodyState make_body(const Vector3d& pelvis_pos, double yaw, double timestamp = 0.0);

/// Recompute joint positions from the pose.
void refresh_fk(BodyState& state);

/// Apply one raw (unnormalized) action: translation in the current pelvis
/// frame, per-joint world-frame rotation deltas; the pelvis orientation
/// follows the L5 delta so heading tracks the torso. Pelvis x/y is clamped
/// to scene bounds (with margin) when a scene is given, setting collision.
BodyState step_body(const BodyState& state, const std::array<double, kin::kActionDim>& raw,
                    double dt, const Scene* scene = nullptr);

struct CameraPose {
    Vector3d pos;
    kin::Quat orient;  // camera forward = orient * +x, up = orient * +z
};

/// Pinhole camera rigidly attached to the Head joint.
CameraPose head_camera(const BodyState& state);

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct Frame {
    int width = 0, height = 0;
    std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

    bool operator==(const Frame&) const = default;
};

inline constexpr double kCameraFovDeg = 90.0;

/// Deterministic raycast from the head camera: scene boxes/panels, ground
/// checker, sky gradient, plus the body's forearms and hands so arm actions
/// have visual consequences.
Frame render_frame(const Scene& scene, const BodyState& state, int width, int height);

// ---------------------------------------------------------------------------
// Policy and trajectories
// ---------------------------------------------------------------------------

struct PolicyConfig {
    double walk_speed_min = 0.5, walk_speed_max = 1.0;   // m/s
    double yaw_rate_min = 0.4, yaw_rate_max = 0.8;       // rad/s
    double gesture_seconds_min = 1.0, gesture_seconds_max = 1.8;
    double dwell_seconds_min = 0.6, dwell_seconds_max = 1.4;
    // behavior mix (relative weights)
    double w_dwell = 0.10, w_walk = 0.30, w_turn = 0.25, w_gesture = 0.35;
};

struct Trajectory {
    std::vector<Frame> frames;
    std::vector<kin::PoseFrame> poses;
};

/// Scripted stochastic behavior mixing locomotion, turning, arm gestures and
/// near-static dwell (with a small idle sway). Frames and poses share
/// timestamps on the fps grid. Deterministic in (scene, policy_seed, args).
Trajectory sample_trajectory(const Scene& scene, uint64_t policy_seed, int n_frames, double fps,
                             int width, int height, const PolicyConfig& cfg = {});

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

inline constexpr uint32_t kDatasetVersion = 1;

struct DatasetMeta {
    uint32_t width = 64, height = 64;
    double fps = 4.0;
    uint64_t seed = 0;
};

/// In-memory dataset: trajectories of aligned frames and poses.
struct Dataset {
    DatasetMeta meta;
    std::vector<Trajectory> trajectories;
};

/// Generate a dataset: per-trajectory scene and policy streams derived from
/// meta.seed xor the trajectory index. Parallel across trajectories.
Dataset generate_dataset(const DatasetMeta& meta, int n_trajectories, int frames_per_traj,
                         const SceneConfig& scene_cfg = {}, const PolicyConfig& policy_cfg = {});

/// Binary dataset file, little-endian: magic "PEVADATA", version, config
/// block, per-trajectory offset table, then per trajectory a raw RGB frame
/// block followed by a pose block in the pose-file layout.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

/// O(1) single-trajectory access through the offset table.
class DatasetReader {
  public:
    explicit DatasetReader(const std::string& path);
    const DatasetMeta& meta() const { return meta_; }
    uint64_t trajectory_count() const { return offsets_.size(); }
    uint64_t frame_count(uint64_t traj) const;
    Trajectory load_trajectory(uint64_t traj) const;

  private:
    std::string path_;
    DatasetMeta meta_;
    std::vector<uint64_t> offsets_;
    std::vector<uint64_t> frame_counts_;
};

}  // namespace peva::world
