#include "peva/kinematics.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace peva::kin {

namespace {
std::atomic<uint64_t> g_gimbal_count{0};
std::atomic<uint64_t> g_non_unit_count{0};
std::atomic<uint64_t> g_clamp_count{0};

constexpr double kPi = 3.14159265358979323846;
}  // namespace

uint64_t gimbal_lock_count() { return g_gimbal_count.load(); }
uint64_t non_unit_quat_count() { return g_non_unit_count.load(); }
uint64_t normalize_clamp_count() { return g_clamp_count.load(); }
void reset_kin_counters() {
    g_gimbal_count = 0;
    g_non_unit_count = 0;
    g_clamp_count = 0;
}

// ---------------------------------------------------------------------------
// Quat
// ---------------------------------------------------------------------------

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
    double n = norm();
    PEVA_CHECK(n > 0.0, "cannot normalize zero quaternion");
    return {w / n, x / n, y / n, z / n};
}

Quat operator*(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Vector3d Quat::rotate(const Vector3d& v) const {
    // v' = v + 2 q_v x (q_v x v + w v)
    Vector3d qv(x, y, z);
    Vector3d t = 2.0 * qv.cross(v);
    return v + w * t + qv.cross(t);
}

Matrix3d Quat::to_matrix() const {
    Matrix3d m;
    double ww = w * w, xx = x * x, yy = y * y, zz = z * z;
    m << ww + xx - yy - zz, 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), ww - xx + yy - zz, 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), ww - xx - yy + zz;
    return m;
}

Quat Quat::from_axis_angle(const Vector3d& axis, double angle) {
    double n = axis.norm();
    PEVA_CHECK(n > 0.0, "axis must be nonzero");
    double h = 0.5 * angle;
    double s = std::sin(h) / n;
    return {std::cos(h), axis.x() * s, axis.y() * s, axis.z() * s};
}

double Quat::angle_to(const Quat& other) const {
    Quat d = conj() * other;
    double c = std::min(1.0, std::abs(d.w));
    return 2.0 * std::acos(c);
}

namespace {
Quat ensure_unit(const Quat& q, double tol = 1e-6) {
    double n = q.norm();
    if (std::abs(n - 1.0) > tol) {
        g_non_unit_count.fetch_add(1, std::memory_order_relaxed);
        return q.normalized();
    }
    return q;
}
}  // namespace

// ---------------------------------------------------------------------------
// Euler (intrinsic Z-X-Y)
// ---------------------------------------------------------------------------
//
// R = Rz(a) * Rx(b) * Ry(c):
//   [ ca*cc - sa*sb*sc,  -sa*cb,  ca*sc + sa*sb*cc ]
//   [ sa*cc + ca*sb*sc,   ca*cb,  sa*sc - ca*sb*cc ]
//   [           -cb*sc,      sb,             cb*cc ]
// so b = asin(R21), a = atan2(-R01, R11), c = atan2(-R20, R22); at |cos b| -> 0
// only a +/- c is observable and we pin c = 0, a = atan2(R10, R00).

Vector3d quat_to_euler(const Quat& q_in, bool* gimbal) {
    Quat q = ensure_unit(q_in);
    Matrix3d r = q.to_matrix();
    double sb = std::clamp(r(2, 1), -1.0, 1.0);
    double cb = std::sqrt(std::max(0.0, 1.0 - sb * sb));
    bool locked = cb < kGimbalEps;
    if (gimbal) *gimbal = locked;
    if (locked) {
        g_gimbal_count.fetch_add(1, std::memory_order_relaxed);
        double a = std::atan2(r(1, 0), r(0, 0));
        return {a, std::asin(sb), 0.0};
    }
    double a = std::atan2(-r(0, 1), r(1, 1));
    double b = std::asin(sb);
    double c = std::atan2(-r(2, 0), r(2, 2));
    return {a, b, c};
}

Quat euler_to_quat(const Vector3d& zxy) {
    double ha = 0.5 * zxy[0], hb = 0.5 * zxy[1], hc = 0.5 * zxy[2];
    Quat qz{std::cos(ha), 0, 0, std::sin(ha)};
    Quat qx{std::cos(hb), std::sin(hb), 0, 0};
    Quat qy{std::cos(hc), 0, std::sin(hc), 0};
    return qz * qx * qy;
}

Quat relative_rotation(const Quat& q_prev, const Quat& q_next) {
    return ensure_unit(q_prev).conj() * ensure_unit(q_next);
}

// ---------------------------------------------------------------------------
// Skeleton
// ---------------------------------------------------------------------------

const KinematicTree& KinematicTree::upper_body() {
    static const KinematicTree tree = [] {
        KinematicTree t;
        auto set = [&](int i, const char* name, int parent, double ox, double oy, double oz) {
            t.joints[i] = Joint{name, parent, Vector3d(ox, oy, oz)};
        };
        // Offsets are rest-pose bone vectors in the parent frame
        // (x forward, y left, z up), meters.
        set(kPelvis, "Pelvis", -1, 0.0, 0.0, 0.0);
        set(kL5, "L5", kPelvis, 0.0, 0.0, 0.10);
        set(kL3, "L3", kL5, 0.0, 0.0, 0.10);
        set(kT12, "T12", kL3, 0.0, 0.0, 0.10);
        set(kT8, "T8", kT12, 0.0, 0.0, 0.12);
        set(kNeck, "Neck", kT8, 0.0, 0.0, 0.14);
        set(kHead, "Head", kNeck, 0.0, 0.0, 0.12);
        set(kRightShoulder, "RightShoulder", kT8, 0.0, -0.05, 0.10);
        set(kRightUpperArm, "RightUpperArm", kRightShoulder, 0.0, -0.15, 0.0);
        set(kRightForearm, "RightForearm", kRightUpperArm, 0.0, -0.02, -0.28);
        set(kRightHand, "RightHand", kRightForearm, 0.0, 0.0, -0.25);
        set(kLeftShoulder, "LeftShoulder", kT8, 0.0, 0.05, 0.10);
        set(kLeftUpperArm, "LeftUpperArm", kLeftShoulder, 0.0, 0.15, 0.0);
        set(kLeftForearm, "LeftForearm", kLeftUpperArm, 0.0, 0.02, -0.28);
        set(kLeftHand, "LeftHand", kLeftForearm, 0.0, 0.0, -0.25);
        set(kSternum, "Sternum", kT8, 0.04, 0.0, 0.02);
        for (int i = 1; i < kNumJoints; ++i) {
            PEVA_CHECK(t.joints[i].parent >= 0 && t.joints[i].parent < i,
                       "tree must be topologically ordered");
        }
        return t;
    }();
    return tree;
}

int KinematicTree::index_of(const std::string& name) const {
    for (int i = 0; i < kNumJoints; ++i)
        if (joints[i].name == name) return i;
    return -1;
}

bool PoseFrame::valid(double tol) const {
    for (const auto& q : joint_rotations)
        if (std::abs(q.norm() - 1.0) > tol) return false;
    return root_translation.allFinite();
}

std::array<Vector3d, kNumJoints> fk_positions(const KinematicTree& tree, const PoseFrame& pose) {
    std::array<Vector3d, kNumJoints> pos;
    pos[0] = pose.root_translation;
    for (int j = 1; j < kNumJoints; ++j) {
        int p = tree.joints[j].parent;
        pos[j] = pos[p] + pose.joint_rotations[p].rotate(tree.joints[j].offset);
    }
    return pos;
}

PoseFrame to_pelvis_frame(const PoseFrame& pose) {
    PoseFrame out;
    out.timestamp = pose.timestamp;
    out.root_translation = Vector3d::Zero();
    Quat inv = ensure_unit(pose.joint_rotations[kPelvis]).conj();
    for (int j = 0; j < kNumJoints; ++j)
        out.joint_rotations[j] = inv * ensure_unit(pose.joint_rotations[j]);
    return out;
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

std::array<double, kActionDim> compute_action_raw(const PoseFrame& pose_t,
                                                  const PoseFrame& pose_next) {
    if (!(pose_next.timestamp > pose_t.timestamp)) {
        throw std::invalid_argument("compute_action: timeskip must be positive");
    }
    std::array<double, kActionDim> raw{};
    // Translation delta in pose_t's pelvis frame: heading-invariant.
    Vector3d dp = pose_next.root_translation - pose_t.root_translation;
    Vector3d local = ensure_unit(pose_t.joint_rotations[kPelvis]).conj().rotate(dp);
    raw[0] = local.x();
    raw[1] = local.y();
    raw[2] = local.z();
    for (int j = 1; j < kNumJoints; ++j) {
        Quat rel = relative_rotation(pose_t.joint_rotations[j], pose_next.joint_rotations[j]);
        Vector3d e = quat_to_euler(rel);
        int s = action_slot(j);
        raw[s + 0] = e[0];
        raw[s + 1] = e[1];
        raw[s + 2] = e[2];
    }
    return raw;
}

NormalizationBounds NormalizationBounds::defaults() {
    NormalizationBounds b;
    for (int i = 0; i < 3; ++i) {
        b.lo[i] = -1.0;
        b.hi[i] = 1.0;
    }
    for (int i = 3; i < kActionDim; ++i) {
        b.lo[i] = -kPi;
        b.hi[i] = kPi;
    }
    return b;
}

NormalizationBounds NormalizationBounds::fit(
    const std::vector<std::array<double, kActionDim>>& raw, double lo_pct, double hi_pct) {
    PEVA_CHECK(!raw.empty(), "cannot fit bounds on empty data");
    NormalizationBounds b = defaults();
    std::vector<double> col(raw.size());
    for (int d = 0; d < 3; ++d) {
        for (size_t i = 0; i < raw.size(); ++i) col[i] = raw[i][d];
        std::sort(col.begin(), col.end());
        auto pick = [&](double p) {
            double idx = p * static_cast<double>(col.size() - 1);
            size_t i0 = static_cast<size_t>(idx);
            size_t i1 = std::min(i0 + 1, col.size() - 1);
            double f = idx - static_cast<double>(i0);
            return col[i0] * (1.0 - f) + col[i1] * f;
        };
        double lo = pick(lo_pct), hi = pick(hi_pct);
        // keep the map symmetric and never tighter than a minimal span
        double m = std::max({std::abs(lo), std::abs(hi), 1e-3});
        b.lo[d] = -m;
        b.hi[d] = m;
    }
    return b;
}

namespace {
double normalize_dim(double x, double lo, double hi) {
    if (hi <= lo) return 0.0;
    double t = 2.0 * (x - lo) / (hi - lo) - 1.0;
    if (t < -1.0 || t > 1.0) {
        g_clamp_count.fetch_add(1, std::memory_order_relaxed);
        t = std::clamp(t, -1.0, 1.0);
    }
    return t;
}
double denormalize_dim(double t, double lo, double hi) {
    if (hi <= lo) return lo;
    return lo + (t + 1.0) * 0.5 * (hi - lo);
}
}  // namespace

ActionVector normalize_action(const std::array<double, kActionDim>& raw,
                              const NormalizationBounds& bounds) {
    for (int i = 0; i < kActionDim; ++i)
        PEVA_CHECK(std::isfinite(bounds.lo[i]) && std::isfinite(bounds.hi[i]), "bounds finite");
    ActionVector a;
    for (int i = 0; i < kActionDim; ++i) {
        if (i >= 3 && !bounds.scale_rotations) {
            a.values[i] = raw[i];
        } else {
            a.values[i] = normalize_dim(raw[i], bounds.lo[i], bounds.hi[i]);
        }
    }
    return a;
}

std::array<double, kActionDim> denormalize_action(const ActionVector& a,
                                                  const NormalizationBounds& bounds) {
    std::array<double, kActionDim> raw{};
    for (int i = 0; i < kActionDim; ++i) {
        if (i >= 3 && !bounds.scale_rotations) {
            raw[i] = a.values[i];
        } else {
            raw[i] = denormalize_dim(a.values[i], bounds.lo[i], bounds.hi[i]);
        }
    }
    return raw;
}

ActionVector compute_action(const PoseFrame& pose_t, const PoseFrame& pose_next,
                            const NormalizationBounds& bounds) {
    ActionVector a = normalize_action(compute_action_raw(pose_t, pose_next), bounds);
    a.timeskip = pose_next.timestamp - pose_t.timestamp;
    return a;
}

// ---------------------------------------------------------------------------
// Atomic segments
// ---------------------------------------------------------------------------

const char* atomic_label_name(AtomicLabel label) {
    switch (label) {
        case AtomicLabel::kForward: return "forward";
        case AtomicLabel::kRotateLeft: return "rotate_left";
        case AtomicLabel::kRotateRight: return "rotate_right";
        case AtomicLabel::kLhandLeft: return "lhand_left";
        case AtomicLabel::kLhandRight: return "lhand_right";
        case AtomicLabel::kLhandUp: return "lhand_up";
        case AtomicLabel::kLhandDown: return "lhand_down";
        case AtomicLabel::kRhandLeft: return "rhand_left";
        case AtomicLabel::kRhandRight: return "rhand_right";
        case AtomicLabel::kRhandUp: return "rhand_up";
        case AtomicLabel::kRhandDown: return "rhand_down";
    }
    return "?";
}

std::optional<AtomicLabel> atomic_label_from_name(const std::string& name) {
    for (int i = 0; i < kNumAtomicLabels; ++i) {
        auto l = static_cast<AtomicLabel>(i);
        if (name == atomic_label_name(l)) return l;
    }
    return std::nullopt;
}

namespace {

struct Candidate {
    AtomicLabel label;
    size_t start, end;
    double magnitude;
    int effector;  // 0 body-forward, 1 body-rotate, 2 lhand, 3 rhand
};

// Hand displacement measured relative to the pelvis, in the pelvis frame, so
// locomotion does not register as hand motion.
Vector3d hand_in_pelvis(const KinematicTree& tree, const PoseFrame& pose, int hand) {
    auto pos = fk_positions(tree, pose);
    Vector3d rel = pos[hand] - pos[kPelvis];
    return pose.joint_rotations[kPelvis].conj().rotate(rel);
}

double pelvis_yaw_delta(const PoseFrame& a, const PoseFrame& b) {
    Quat rel = relative_rotation(a.joint_rotations[kPelvis], b.joint_rotations[kPelvis]);
    return quat_to_euler(rel)[0];  // Z component of Z-X-Y
}

}  // namespace

std::vector<AtomicSegment> extract_atomic_segments(const std::vector<PoseFrame>& traj,
                                                   const AtomicThresholds& th,
                                                   size_t window_frames, size_t cap_per_label) {
    std::vector<AtomicSegment> out;
    if (traj.empty() || window_frames < 2 || traj.size() < window_frames) return out;
    const auto& tree = KinematicTree::upper_body();

    std::vector<Candidate> cands;
    size_t n = traj.size();
    for (size_t i = 0; i + window_frames <= n; ++i) {
        const PoseFrame& a = traj[i];
        const PoseFrame& b = traj[i + window_frames - 1];
        size_t end = i + window_frames;

        // body forward: displacement along the starting pelvis forward axis
        Vector3d dp = a.joint_rotations[kPelvis].conj().rotate(b.root_translation -
                                                               a.root_translation);
        if (dp.x() >= th.forward_m)
            cands.push_back({AtomicLabel::kForward, i, end, dp.x(), 0});

        double yaw = pelvis_yaw_delta(a, b);
        if (yaw >= th.rotate_rad)
            cands.push_back({AtomicLabel::kRotateLeft, i, end, yaw, 1});
        else if (yaw <= -th.rotate_rad)
            cands.push_back({AtomicLabel::kRotateRight, i, end, -yaw, 1});

        for (int side = 0; side < 2; ++side) {
            int hand = side == 0 ? kLeftHand : kRightHand;
            Vector3d d = hand_in_pelvis(tree, b, hand) - hand_in_pelvis(tree, a, hand);
            // labeled axes: y (left/right), z (up/down); dominant one wins
            double ay = std::abs(d.y()), az = std::abs(d.z());
            double mag = std::max(ay, az);
            if (mag < th.hand_m) continue;
            AtomicLabel label;
            if (az >= ay) {
                label = side == 0 ? (d.z() > 0 ? AtomicLabel::kLhandUp : AtomicLabel::kLhandDown)
                                  : (d.z() > 0 ? AtomicLabel::kRhandUp : AtomicLabel::kRhandDown);
            } else {
                label = side == 0
                            ? (d.y() > 0 ? AtomicLabel::kLhandLeft : AtomicLabel::kLhandRight)
                            : (d.y() > 0 ? AtomicLabel::kRhandLeft : AtomicLabel::kRhandRight);
            }
            cands.push_back({label, i, end, mag, 2 + side});
        }
    }

    // Per effector, keep the strongest of any overlapping detections.
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
        if (x.magnitude != y.magnitude) return x.magnitude > y.magnitude;
        return x.start < y.start;
    });
    std::vector<Candidate> kept;
    for (const auto& c : cands) {
        bool clash = false;
        for (const auto& k : kept) {
            if (k.effector == c.effector && c.start < k.end && k.start < c.end) {
                clash = true;
                break;
            }
        }
        if (!clash) kept.push_back(c);
    }

    if (cap_per_label > 0) {
        std::array<size_t, kNumAtomicLabels> used{};
        std::vector<Candidate> capped;
        for (const auto& c : kept) {  // kept is magnitude-sorted
            auto& u = used[static_cast<int>(c.label)];
            if (u < cap_per_label) {
                ++u;
                capped.push_back(c);
            }
        }
        kept.swap(capped);
    }

    std::sort(kept.begin(), kept.end(), [](const Candidate& x, const Candidate& y) {
        if (x.start != y.start) return x.start < y.start;
        return static_cast<int>(x.label) < static_cast<int>(y.label);
    });
    out.reserve(kept.size());
    for (const auto& c : kept) out.push_back({c.label, c.start, c.end, c.magnitude});
    return out;
}

// ---------------------------------------------------------------------------
// Stats
// ---------------------------------------------------------------------------

ActionStats action_stats(const std::vector<ActionVector>& actions,
                         const NormalizationBounds& bounds) {
    PEVA_CHECK(!actions.empty(), "action_stats requires a nonempty dataset");
    ActionStats s;
    s.count = actions.size();
    double inv = 1.0 / static_cast<double>(actions.size());
    for (const auto& a : actions) {
        auto raw = denormalize_action(a, bounds);
        for (int d = 0; d < kActionDim; ++d) {
            s.mean[d] += a.values[d] * inv;
            s.raw_mean[d] += raw[d] * inv;
        }
    }
    for (const auto& a : actions) {
        auto raw = denormalize_action(a, bounds);
        for (int d = 0; d < kActionDim; ++d) {
            double t = a.values[d] - s.mean[d];
            s.variance[d] += t * t * inv;
            double r = raw[d] - s.raw_mean[d];
            s.raw_variance[d] += r * r * inv;
        }
    }
    return s;
}

std::array<double, 12> ActionStats::arm_mean(Arm arm, bool raw) const {
    std::array<double, 12> out{};
    int base = arm_slot_begin(arm);
    for (int i = 0; i < 12; ++i) out[i] = raw ? raw_mean[base + i] : mean[base + i];
    return out;
}

std::array<double, 12> ActionStats::arm_variance(Arm arm, bool raw) const {
    std::array<double, 12> out{};
    int base = arm_slot_begin(arm);
    for (int i = 0; i < 12; ++i) out[i] = raw ? raw_variance[base + i] : variance[base + i];
    return out;
}

namespace {
const char* kSegmentNames[4] = {"shoulder", "upper_arm", "forearm", "hand"};
}

void write_arm_stats_csv(const std::string& path, const ActionStats& stats) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << "segment,statistic,arm,phi,theta,psi\n";
    f.precision(10);
    for (int arm = 0; arm < 2; ++arm) {
        auto m = stats.arm_mean(arm == 0 ? Arm::kRight : Arm::kLeft, /*raw=*/true);
        auto v = stats.arm_variance(arm == 0 ? Arm::kRight : Arm::kLeft, /*raw=*/true);
        const char* arm_name = arm == 0 ? "right" : "left";
        for (int seg = 0; seg < 4; ++seg) {
            f << kSegmentNames[seg] << ",mean," << arm_name << "," << m[seg * 3] << ","
              << m[seg * 3 + 1] << "," << m[seg * 3 + 2] << "\n";
            f << kSegmentNames[seg] << ",variance," << arm_name << "," << v[seg * 3] << ","
              << v[seg * 3 + 1] << "," << v[seg * 3 + 2] << "\n";
        }
    }
}

ArmStatsTable read_arm_stats_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    ArmStatsTable t;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string seg, stat, arm, a, b, c;
        if (!std::getline(ss, seg, ',') || !std::getline(ss, stat, ',') ||
            !std::getline(ss, arm, ',') || !std::getline(ss, a, ',') ||
            !std::getline(ss, b, ',') || !std::getline(ss, c, ',')) {
            throw DataError("malformed arm stats row: " + line);
        }
        int si = -1;
        for (int i = 0; i < 4; ++i)
            if (seg == kSegmentNames[i]) si = i;
        if (si < 0) throw DataError("unknown segment: " + seg);
        int ai = arm == "right" ? 0 : arm == "left" ? 1 : -1;
        if (ai < 0) throw DataError("unknown arm: " + arm);
        double* dst = stat == "mean"       ? t.mean[ai][si]
                      : stat == "variance" ? t.variance[ai][si]
                                           : nullptr;
        if (!dst) throw DataError("unknown statistic: " + stat);
        dst[0] = std::stod(a);
        dst[1] = std::stod(b);
        dst[2] = std::stod(c);
    }
    return t;
}

}  // namespace peva::kin
