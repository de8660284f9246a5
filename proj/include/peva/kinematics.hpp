#pragma once

#include <Eigen/Core>

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "peva/common.hpp"

namespace peva::kin {

using Eigen::Matrix3d;
using Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Quaternions and Euler angles
// ---------------------------------------------------------------------------

/// Unit quaternion (w, x, y, z), Hamilton convention. Plain struct so the
/// component order in wire formats is unambiguous.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quat identity() { return {}; }
    double norm() const;
    Quat normalized() const;
    Quat conj() const { return {w, -x, -y, -z}; }
    friend Quat operator*(const Quat& a, const Quat& b);  // Hamilton product
    Vector3d rotate(const Vector3d& v) const;
    Matrix3d to_matrix() const;
    static Quat from_axis_angle(const Vector3d& axis, double angle);
    /// Geodesic distance as a rotation angle in [0, pi]; sign-insensitive.
    double angle_to(const Quat& other) const;
};

/// Euler convention used throughout: intrinsic Z-X-Y.
/// q = qz(angles[0]) * qx(angles[1]) * qy(angles[2]); all angles in [-pi, pi].
/// The X angle is the singular axis (|cos| < kGimbalEps), kept away from the
/// dominant human yaw (Z) and arm swing (Y) axes.
inline constexpr double kGimbalEps = 1e-7;

/// Decompose a rotation into intrinsic Z-X-Y Euler angles.
/// Non-unit inputs are renormalized (counted in stats). In the gimbal-lock
/// region the third (Y) angle is zeroed and *gimbal (if given) set to true.
Vector3d quat_to_euler(const Quat& q, bool* gimbal = nullptr);

Quat euler_to_quat(const Vector3d& zxy);

/// conj(prev) * next: the rotation taking prev to next (prev * result = next).
Quat relative_rotation(const Quat& q_prev, const Quat& q_next);

/// Process-wide counters surfaced in run stats.
uint64_t gimbal_lock_count();
uint64_t non_unit_quat_count();
void reset_kin_counters();

// ---------------------------------------------------------------------------
// Skeleton
// ---------------------------------------------------------------------------

inline constexpr int kNumJoints = 16;
/// Non-root joints contributing rotation deltas to the action vector.
inline constexpr int kActionJoints = kNumJoints - 1;
inline constexpr int kActionDim = 3 + 3 * kActionJoints;  // 48

struct Joint {
    std::string name;
    int parent;        // -1 for the root
    Vector3d offset;   // rest offset from parent, in the parent frame (meters)
};

/// Pelvis-rooted upper-body tree in canonical XSens segment order.
/// Joint indices are topological: parent index < child index.
struct KinematicTree {
    std::array<Joint, kNumJoints> joints;
    int root = 0;

    static const KinematicTree& upper_body();

    int index_of(const std::string& name) const;
};

/// Canonical joint indices (see KinematicTree::upper_body for the full list).
enum JointId : int {
    kPelvis = 0,
    kL5 = 1,
    kL3 = 2,
    kT12 = 3,
    kT8 = 4,
    kNeck = 5,
    kHead = 6,
    kRightShoulder = 7,
    kRightUpperArm = 8,
    kRightForearm = 9,
    kRightHand = 10,
    kLeftShoulder = 11,
    kLeftUpperArm = 12,
    kLeftForearm = 13,
    kLeftHand = 14,
    kSternum = 15,
};

/// One timestamped full-body pose: world-frame root translation plus
/// world-frame orientation quaternions for all 16 joints.
struct PoseFrame {
    double timestamp = 0.0;
    Vector3d root_translation = Vector3d::Zero();
    std::array<Quat, kNumJoints> joint_rotations;

    bool valid(double tol = 1e-6) const;
};

/// World positions of every joint from the tree's rest offsets and the
/// pose's world-frame orientations (position[j] = position[parent] +
/// R_parent * offset[j]).
std::array<Vector3d, kNumJoints> fk_positions(const KinematicTree& tree, const PoseFrame& pose);

/// Re-express a pose in its own pelvis frame: zero root translation, joint
/// orientations premultiplied by conj(pelvis). Invariant under any rigid
/// transform of the input's world frame.
PoseFrame to_pelvis_frame(const PoseFrame& pose);

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

/// a in R^48: [0..3) root-translation delta, [3..48) per-joint relative
/// rotation deltas as intrinsic Z-X-Y Euler angles, for joints 1..15 in tree
/// order. Values are normalized to [-1, 1] unless stated otherwise. The
/// timeskip rides alongside and is conditioned on separately.
struct ActionVector {
    std::array<double, kActionDim> values{};
    double timeskip = 0.0;
};

/// First action slot of joint j's Euler triple (j in [1, 15]).
inline constexpr int action_slot(int joint) { return 3 + 3 * (joint - 1); }

/// Per-dimension affine normalization bounds. Rotation dims are fixed
/// analytic [-pi, pi]; translation bounds default to [-1, 1] m and can be
/// fit from data percentiles.
struct NormalizationBounds {
    std::array<double, kActionDim> lo{};
    std::array<double, kActionDim> hi{};
    /// When false, rotation dims pass through in radians instead of being
    /// scaled to [-1, 1].
    bool scale_rotations = true;

    static NormalizationBounds defaults();
    /// Translation bounds from the 1st/99th percentile of raw deltas.
    static NormalizationBounds fit(const std::vector<std::array<double, kActionDim>>& raw,
                                   double lo_pct = 0.01, double hi_pct = 0.99);
};

/// Raw (unnormalized) action: translation delta in pose_t's pelvis frame
/// (meters) and per-joint Euler deltas (radians). Throws on non-positive
/// timeskip.
std::array<double, kActionDim> compute_action_raw(const PoseFrame& pose_t,
                                                  const PoseFrame& pose_next);

/// Normalized action plus timeskip. Out-of-range inputs clamp (counted via
/// clamp counter); degenerate bounds map to 0.
ActionVector normalize_action(const std::array<double, kActionDim>& raw,
                              const NormalizationBounds& bounds);
std::array<double, kActionDim> denormalize_action(const ActionVector& a,
                                                  const NormalizationBounds& bounds);

ActionVector compute_action(const PoseFrame& pose_t, const PoseFrame& pose_next,
                            const NormalizationBounds& bounds);

uint64_t normalize_clamp_count();

// ---------------------------------------------------------------------------
// Atomic segments
// ---------------------------------------------------------------------------

enum class AtomicLabel : int {
    kForward = 0,
    kRotateLeft,
    kRotateRight,
    kLhandLeft,
    kLhandRight,
    kLhandUp,
    kLhandDown,
    kRhandLeft,
    kRhandRight,
    kRhandUp,
    kRhandDown,
};
inline constexpr int kNumAtomicLabels = 11;

const char* atomic_label_name(AtomicLabel label);
std::optional<AtomicLabel> atomic_label_from_name(const std::string& name);

/// Frame range [start_index, end_index) dominated by one primitive motion.
struct AtomicSegment {
    AtomicLabel label;
    size_t start_index = 0;
    size_t end_index = 0;  // exclusive
    double magnitude = 0.0;  // meters (hands/forward) or radians (rotate)
};

struct AtomicThresholds {
    double hand_m = 0.15;
    double forward_m = 0.5;
    double rotate_rad = 0.35;
};

/// Sliding-window detection of atomic segments. Hand deltas are measured in
/// the pelvis frame (body-relative), forward/rotate from the pelvis itself.
/// Overlapping detections of the same effector resolve by magnitude
/// (tie -> earlier start). cap_per_label keeps the top-magnitude N per label
/// (0 = unlimited). Deterministic.
std::vector<AtomicSegment> extract_atomic_segments(const std::vector<PoseFrame>& traj,
                                                   const AtomicThresholds& thresholds,
                                                   size_t window_frames,
                                                   size_t cap_per_label = 0);

// ---------------------------------------------------------------------------
// Action statistics
// ---------------------------------------------------------------------------

enum class Arm { kLeft, kRight };

/// 12-D arm block order: shoulder, upper arm, forearm, hand (Euler triples).
/// Right arm occupies action slots [21, 33), left arm [33, 45).
inline constexpr int arm_slot_begin(Arm arm) {
    return arm == Arm::kRight ? action_slot(kRightShoulder) : action_slot(kLeftShoulder);
}

/// Per-dimension mean/variance over a set of actions, kept in both raw
/// (meters/radians) and normalized spaces. Variance is the population
/// (1/N) estimate.
struct ActionStats {
    std::array<double, kActionDim> mean{};
    std::array<double, kActionDim> variance{};
    std::array<double, kActionDim> raw_mean{};
    std::array<double, kActionDim> raw_variance{};
    size_t count = 0;

    std::array<double, 12> arm_mean(Arm arm, bool raw = false) const;
    std::array<double, 12> arm_variance(Arm arm, bool raw = false) const;
};

ActionStats action_stats(const std::vector<ActionVector>& actions,
                         const NormalizationBounds& bounds);

/// Arm-segment stats table file (CSV: segment,statistic,arm,phi,theta,psi),
/// raw radians. Used to exchange CEM initialization statistics.
void write_arm_stats_csv(const std::string& path, const ActionStats& stats);
struct ArmStatsTable {
    // [arm][segment][component]; segments: shoulder, upper arm, forearm, hand
    double mean[2][4][3] = {};
    double variance[2][4][3] = {};
};
ArmStatsTable read_arm_stats_csv(const std::string& path);

}  // namespace peva::kin
