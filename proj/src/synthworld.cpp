#include "peva/synthworld.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "peva/rng.hpp"

namespace peva::world {

using kin::Quat;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPelvisHeight = 0.95;
constexpr double kBoundsMargin = 0.6;

Rgb hsv(double h, double s, double v) {
    h = std::fmod(h, 1.0) * 6.0;
    int i = static_cast<int>(h);
    double f = h - i;
    double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r, g, b;
    switch (i % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    auto u8 = [](double x) { return static_cast<uint8_t>(std::lround(x * 255.0)); };
    return {u8(r), u8(g), u8(b)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

Scene generate_scene(uint64_t seed, const SceneConfig& cfg) {
    PEVA_CHECK(cfg.min_obstacles >= 0 && cfg.max_obstacles >= cfg.min_obstacles,
               "bad obstacle range");
    Scene scene;
    scene.seed = seed;
    scene.bounds_half = cfg.bounds_half;
    Rng rng(derive_seed(seed, /*purpose=*/0x5ce9e));

    int n_boxes = cfg.min_obstacles +
                  static_cast<int>(rng.below(cfg.max_obstacles - cfg.min_obstacles + 1));
    double place = cfg.bounds_half - 1.5;
    for (int i = 0; i < n_boxes; ++i) {
        double w = rng.uniform(0.4, 2.0), d = rng.uniform(0.4, 2.0), h = rng.uniform(0.4, 2.2);
        double cx = rng.uniform(-place, place), cy = rng.uniform(-place, place);
        ObstacleBox box;
        box.lo = {cx - w / 2, cy - d / 2, 0.0};
        box.hi = {cx + w / 2, cy + d / 2, h};
        box.color = hsv(rng.uniform(), rng.uniform(0.55, 0.9), rng.uniform(0.6, 0.95));
        scene.boxes.push_back(box);
    }
    int n_panels = cfg.min_panels +
                   static_cast<int>(rng.below(cfg.max_panels - cfg.min_panels + 1));
    for (int i = 0; i < n_panels; ++i) {
        double len = rng.uniform(1.5, 3.0), h = rng.uniform(2.2, 3.0);
        double cx = rng.uniform(-place, place), cy = rng.uniform(-place, place);
        bool along_x = rng.below(2) == 0;
        ObstacleBox p;
        double t = 0.08;
        if (along_x) {
            p.lo = {cx - len / 2, cy - t / 2, 0.0};
            p.hi = {cx + len / 2, cy + t / 2, h};
        } else {
            p.lo = {cx - t / 2, cy - len / 2, 0.0};
            p.hi = {cx + t / 2, cy + len / 2, h};
        }
        p.color = hsv(rng.uniform(), rng.uniform(0.55, 0.9), rng.uniform(0.6, 0.95));
        scene.panels.push_back(p);
    }
    return scene;
}

uint64_t scene_fingerprint(const Scene& scene) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const ObstacleBox& b) {
        h = fnv1a(b.lo.data(), 3 * sizeof(double), h);
        h = fnv1a(b.hi.data(), 3 * sizeof(double), h);
        h = fnv1a(&b.color, sizeof(Rgb), h);
    };
    for (const auto& b : scene.boxes) mix(b);
    for (const auto& b : scene.panels) mix(b);
    return h;
}

// ---------------------------------------------------------------------------
// Body
// ---------------------------------------------------------------------------

BodyState make_body(const Vector3d& pelvis_pos, double yaw, double timestamp) {
    BodyState s;
    s.pose.timestamp = timestamp;
    s.pose.root_translation = pelvis_pos;
    Quat q = Quat::from_axis_angle({0, 0, 1}, yaw);
    for (auto& j : s.pose.joint_rotations) j = q;
    refresh_fk(s);
    return s;
}

void refresh_fk(BodyState& state) {
    state.joint_pos = kin::fk_positions(kin::KinematicTree::upper_body(), state.pose);
}

BodyState step_body(const BodyState& state, const std::array<double, kin::kActionDim>& raw,
                    double dt, const Scene* scene) {
    PEVA_CHECK(dt > 0.0, "step_body needs dt > 0");
    BodyState next = state;
    next.collision = false;
    next.pose.timestamp = state.pose.timestamp + dt;

    const Quat& pelvis = state.pose.joint_rotations[kin::kPelvis];
    next.pose.root_translation =
        state.pose.root_translation + pelvis.rotate({raw[0], raw[1], raw[2]});

    for (int j = 1; j < kin::kNumJoints; ++j) {
        int s = kin::action_slot(j);
        Quat delta = kin::euler_to_quat({raw[s], raw[s + 1], raw[s + 2]});
        next.pose.joint_rotations[j] = (state.pose.joint_rotations[j] * delta).normalized();
    }
    // heading rides with the torso; translation used the old pelvis frame above
    {
        int s = kin::action_slot(kin::kL5);
        Quat delta = kin::euler_to_quat({raw[s], raw[s + 1], raw[s + 2]});
        next.pose.joint_rotations[kin::kPelvis] =
            (state.pose.joint_rotations[kin::kPelvis] * delta).normalized();
    }

    if (scene) {
        double lim = scene->bounds_half - kBoundsMargin;
        auto& p = next.pose.root_translation;
        if (std::abs(p.x()) > lim || std::abs(p.y()) > lim) {
            p.x() = std::clamp(p.x(), -lim, lim);
            p.y() = std::clamp(p.y(), -lim, lim);
            next.collision = true;
        }
    }
    refresh_fk(next);
    return next;
}

CameraPose head_camera(const BodyState& state) {
    const Quat& head = state.pose.joint_rotations[kin::kHead];
    CameraPose cam;
    cam.pos = state.joint_pos[kin::kHead] + head.rotate({0.08, 0.0, 0.06});
    cam.orient = head;
    return cam;
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

namespace {

enum class Behavior { kDwell, kWalk, kTurn, kGesture };

struct ArmTargets {
    // local joint angles: upper-arm pitch (about y) and yaw (about z)
    double ua_pitch = -0.7;  // rest: slightly forward so hands sit near the frame edge
    double ua_yaw = 0.0;
    double fa_pitch = -0.25;
};

struct PolicyState {
    Vector3d pos{0, 0, kPelvisHeight};
    double yaw = 0.0;
    ArmTargets left, right;         // current
    ArmTargets left_t, right_t;     // easing targets
    Behavior behavior = Behavior::kDwell;
    double behavior_left = 0.5;     // seconds in the current behavior
    double speed = 0.0, yaw_rate = 0.0;
    double phase = 0.0;             // idle sway phase
    int gesture_phase = 0;          // 0 move, 1 return
};

double ease_to(double cur, double target, double rate, double dt) {
    double step = rate * dt;
    if (std::abs(target - cur) <= step) return target;
    return cur + (target > cur ? step : -step);
}

void pick_behavior(PolicyState& st, Rng& rng, const PolicyConfig& cfg, const Scene& scene) {
    double total = cfg.w_dwell + cfg.w_walk + cfg.w_turn + cfg.w_gesture;
    double u = rng.uniform() * total;
    if ((u -= cfg.w_dwell) < 0) {
        st.behavior = Behavior::kDwell;
        st.behavior_left = rng.uniform(cfg.dwell_seconds_min, cfg.dwell_seconds_max);
    } else if ((u -= cfg.w_walk) < 0) {
        st.behavior = Behavior::kWalk;
        st.behavior_left = rng.uniform(1.5, 4.0);
        st.speed = rng.uniform(cfg.walk_speed_min, cfg.walk_speed_max);
    } else if ((u -= cfg.w_turn) < 0) {
        st.behavior = Behavior::kTurn;
        st.behavior_left = rng.uniform(0.8, 2.0);
        st.yaw_rate = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(cfg.yaw_rate_min, cfg.yaw_rate_max);
    } else {
        st.behavior = Behavior::kGesture;
        st.behavior_left = rng.uniform(cfg.gesture_seconds_min, cfg.gesture_seconds_max);
        st.gesture_phase = 0;
        bool left = rng.below(2) == 0;
        ArmTargets& t = left ? st.left_t : st.right_t;
        switch (rng.below(4)) {
            case 0: t.ua_pitch = -1.5; t.fa_pitch = -0.1; break;                  // up
            case 1: t.ua_pitch = -0.15; t.fa_pitch = -0.05; break;                // down
            case 2: t.ua_yaw = left ? 0.8 : 0.7; break;                           // outward
            default: t.ua_yaw = left ? -0.7 : -0.8; break;                        // inward
        }
    }
    (void)scene;
}

// avoid walking out of bounds or into an obstacle: steer when blocked
bool blocked_ahead(const PolicyState& st, const Scene& scene) {
    Vector3d fwd(std::cos(st.yaw), std::sin(st.yaw), 0.0);
    Vector3d probe = st.pos + 1.4 * fwd;
    double lim = scene.bounds_half - kBoundsMargin - 0.4;
    if (std::abs(probe.x()) > lim || std::abs(probe.y()) > lim) return true;
    for (const auto& b : scene.boxes) {
        if (probe.x() > b.lo.x() - 0.3 && probe.x() < b.hi.x() + 0.3 &&
            probe.y() > b.lo.y() - 0.3 && probe.y() < b.hi.y() + 0.3)
            return true;
    }
    return false;
}

kin::PoseFrame compose_pose(const PolicyState& st, double timestamp, double sway) {
    kin::PoseFrame pose;
    pose.timestamp = timestamp;
    pose.root_translation = st.pos + Vector3d(0, 0, sway);
    Quat yaw = Quat::from_axis_angle({0, 0, 1}, st.yaw);
    for (auto& q : pose.joint_rotations) q = yaw;

    auto arm = [&](bool left, const ArmTargets& a) {
        int ua = left ? kin::kLeftUpperArm : kin::kRightUpperArm;
        int fa = left ? kin::kLeftForearm : kin::kRightForearm;
        int hand = left ? kin::kLeftHand : kin::kRightHand;
        Quat ua_q = yaw * Quat::from_axis_angle({0, 0, 1}, a.ua_yaw) *
                    Quat::from_axis_angle({0, 1, 0}, a.ua_pitch);
        Quat fa_q = ua_q * Quat::from_axis_angle({0, 1, 0}, a.fa_pitch);
        pose.joint_rotations[ua] = ua_q;
        pose.joint_rotations[fa] = fa_q;
        pose.joint_rotations[hand] = fa_q;
    };
    arm(true, st.left);
    arm(false, st.right);
    return pose;
}

}  // namespace

Trajectory sample_trajectory(const Scene& scene, uint64_t policy_seed, int n_frames, double fps,
                             int width, int height, const PolicyConfig& cfg) {
    PEVA_CHECK(n_frames >= 2, "trajectory needs at least 2 frames");
    PEVA_CHECK(fps > 0.0, "fps must be positive");
    Rng rng(policy_seed);
    double dt = 1.0 / fps;

    PolicyState st;
    // spawn clear of obstacles
    for (int attempt = 0; attempt < 64; ++attempt) {
        double r = scene.bounds_half * 0.5;
        st.pos = {rng.uniform(-r, r), rng.uniform(-r, r), kPelvisHeight};
        bool inside = false;
        for (const auto& b : scene.boxes)
            inside |= st.pos.x() > b.lo.x() - 0.4 && st.pos.x() < b.hi.x() + 0.4 &&
                      st.pos.y() > b.lo.y() - 0.4 && st.pos.y() < b.hi.y() + 0.4;
        if (!inside) break;
    }
    st.yaw = rng.uniform(-kPi, kPi);
    st.left_t = st.left;
    st.right_t = st.right;
    pick_behavior(st, rng, cfg, scene);

    Trajectory out;
    out.frames.reserve(n_frames);
    out.poses.reserve(n_frames);

    const double kArmRate = 1.6;  // rad/s easing
    for (int i = 0; i < n_frames; ++i) {
        double t = i * dt;
        // integrate one frame of behavior (skip for i = 0 so the first pose
        // is the spawn state)
        if (i > 0) {
            st.phase += dt;
            switch (st.behavior) {
                case Behavior::kDwell:
                    break;
                case Behavior::kWalk: {
                    if (blocked_ahead(st, scene)) {
                        st.behavior = Behavior::kTurn;
                        st.behavior_left = rng.uniform(0.8, 1.6);
                        st.yaw_rate =
                            (rng.below(2) ? 1.0 : -1.0) *
                            rng.uniform(cfg.yaw_rate_min, cfg.yaw_rate_max);
                        break;
                    }
                    st.pos += st.speed * dt * Vector3d(std::cos(st.yaw), std::sin(st.yaw), 0.0);
                    break;
                }
                case Behavior::kTurn:
                    st.yaw += st.yaw_rate * dt;
                    break;
                case Behavior::kGesture:
                    break;
            }
            auto ease_arm = [&](ArmTargets& a, const ArmTargets& target) {
                a.ua_pitch = ease_to(a.ua_pitch, target.ua_pitch, kArmRate, dt);
                a.ua_yaw = ease_to(a.ua_yaw, target.ua_yaw, kArmRate, dt);
                a.fa_pitch = ease_to(a.fa_pitch, target.fa_pitch, kArmRate, dt);
            };
            ease_arm(st.left, st.left_t);
            ease_arm(st.right, st.right_t);

            st.behavior_left -= dt;
            if (st.behavior_left <= 0.0) {
                if (st.behavior == Behavior::kGesture && st.gesture_phase == 0) {
                    // return to rest before picking something new
                    st.gesture_phase = 1;
                    st.left_t = ArmTargets{};
                    st.right_t = ArmTargets{};
                    st.behavior_left = rng.uniform(cfg.gesture_seconds_min,
                                                   cfg.gesture_seconds_max);
                } else {
                    st.left_t = ArmTargets{};
                    st.right_t = ArmTargets{};
                    pick_behavior(st, rng, cfg, scene);
                }
            }
        }
        double sway = 0.008 * std::sin(2.0 * kPi * 0.4 * st.phase);
        kin::PoseFrame pose = compose_pose(st, t, sway);
        BodyState body;
        body.pose = pose;
        refresh_fk(body);
        out.poses.push_back(pose);
        out.frames.push_back(render_frame(scene, body, width, height));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

Dataset generate_dataset(const DatasetMeta& meta, int n_trajectories, int frames_per_traj,
                         const SceneConfig& scene_cfg, const PolicyConfig& policy_cfg) {
    PEVA_CHECK(n_trajectories > 0, "need at least one trajectory");
    Dataset ds;
    ds.meta = meta;
    ds.trajectories.resize(n_trajectories);
    int threads = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (int i = 0; i < n_trajectories; ++i) {
        uint64_t scene_seed = derive_seed(meta.seed, 0x5ce9e5eedULL, i);
        uint64_t policy_seed = derive_seed(meta.seed, 0x9011c75eedULL, i);
        Scene scene = generate_scene(scene_seed, scene_cfg);
        ds.trajectories[i] = sample_trajectory(scene, policy_seed, frames_per_traj, meta.fps,
                                               meta.width, meta.height, policy_cfg);
    }
    (void)threads;
    return ds;
}

}  // namespace peva::world
