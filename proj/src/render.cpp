#include <Eigen/Geometry>

#include <cmath>
#include <limits>

#include "peva/synthworld.hpp"

namespace peva::world {

using kin::Quat;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Rgb color;
    double shade = 1.0;
};

// face brightness by the axis the ray entered through
double face_shade(int axis, double dir_sign) {
    if (axis == 2) return dir_sign < 0 ? 1.0 : 0.45;  // top vs bottom
    return axis == 0 ? 0.85 : 0.7;
}

// slab test against an AABB; updates hit if nearer
void hit_aabb(const Vector3d& o, const Vector3d& d, const ObstacleBox& box, Hit& hit) {
    double t_near = 0.0, t_far = hit.t;
    int near_axis = -1;
    for (int a = 0; a < 3; ++a) {
        double da = d[a];
        if (std::abs(da) < 1e-12) {
            if (o[a] < box.lo[a] || o[a] > box.hi[a]) return;
            continue;
        }
        double inv = 1.0 / da;
        double t0 = (box.lo[a] - o[a]) * inv;
        double t1 = (box.hi[a] - o[a]) * inv;
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > t_near) {
            t_near = t0;
            near_axis = a;
        }
        t_far = std::min(t_far, t1);
        if (t_near > t_far) return;
    }
    if (near_axis < 0 || t_near <= 1e-6 || t_near >= hit.t) return;
    hit.t = t_near;
    hit.color = box.color;
    hit.shade = face_shade(near_axis, d[near_axis]);
}

// oriented box: transform the ray into the box frame, then slab-test
struct OrientedBox {
    Vector3d center;
    Quat orient;
    Vector3d half;
    Rgb color;
};

void hit_obb(const Vector3d& o, const Vector3d& d, const OrientedBox& box, Hit& hit) {
    Quat inv = box.orient.conj();
    Vector3d lo_local = -box.half, hi_local = box.half;
    ObstacleBox local{lo_local, hi_local, box.color};
    hit_aabb(inv.rotate(o - box.center), inv.rotate(d), local, hit);
}

uint8_t mul_u8(uint8_t c, double f) {
    return static_cast<uint8_t>(std::lround(std::clamp(c * f, 0.0, 255.0)));
}

Rgb shade(const Rgb& c, double f) { return {mul_u8(c.r, f), mul_u8(c.g, f), mul_u8(c.b, f)}; }

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
    auto mix = [&](uint8_t x, uint8_t y) {
        return static_cast<uint8_t>(std::lround(x + (y - x) * t));
    };
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

constexpr Rgb kSkin{230, 190, 150};
constexpr Rgb kLeftSleeve{70, 110, 220};
constexpr Rgb kRightSleeve{220, 140, 60};

}  // namespace

Frame render_frame(const Scene& scene, const BodyState& state, int width, int height) {
    PEVA_CHECK(width > 0 && height > 0, "frame size must be positive");
    Frame frame;
    frame.width = width;
    frame.height = height;
    frame.rgb.resize(static_cast<size_t>(width) * height * 3);

    CameraPose cam = head_camera(state);
    Vector3d fwd = cam.orient.rotate({1, 0, 0});
    Vector3d up = cam.orient.rotate({0, 0, 1});
    Vector3d right = fwd.cross(up);
    double half_tan = std::tan(kCameraFovDeg * kPi / 180.0 / 2.0);

    // body geometry visible from the head camera: forearms and hands
    OrientedBox parts[4];
    int n_parts = 0;
    auto add_arm = [&](int fa, int hand, const Rgb& sleeve) {
        Vector3d elbow = state.joint_pos[fa];
        Vector3d wrist = state.joint_pos[hand];
        parts[n_parts++] = {0.5 * (elbow + wrist), state.pose.joint_rotations[fa],
                            {0.045, 0.045, 0.5 * (wrist - elbow).norm() + 0.02}, sleeve};
        parts[n_parts++] = {wrist, state.pose.joint_rotations[hand], {0.06, 0.05, 0.08}, kSkin};
    };
    add_arm(kin::kLeftForearm, kin::kLeftHand, kLeftSleeve);
    add_arm(kin::kRightForearm, kin::kRightHand, kRightSleeve);

    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            double ndc_x = (2.0 * (px + 0.5) / width - 1.0) * half_tan;
            double ndc_y = (2.0 * (py + 0.5) / height - 1.0) * half_tan;
            Vector3d dir = (fwd + ndc_x * right - ndc_y * up).normalized();

            Hit hit;
            for (const auto& b : scene.boxes) hit_aabb(cam.pos, dir, b, hit);
            for (const auto& b : scene.panels) hit_aabb(cam.pos, dir, b, hit);
            for (int i = 0; i < n_parts; ++i) hit_obb(cam.pos, dir, parts[i], hit);

            Rgb color;
            if (dir.z() < -1e-9) {
                double t_ground = -cam.pos.z() / dir.z();
                if (t_ground < hit.t) {
                    Vector3d g = cam.pos + t_ground * dir;
                    auto cell = static_cast<long long>(std::floor(g.x() / scene.floor_cell)) +
                                static_cast<long long>(std::floor(g.y() / scene.floor_cell));
                    hit.t = t_ground;
                    hit.color = (cell & 1) ? scene.floor_a : scene.floor_b;
                    hit.shade = 1.0;
                }
            }
            if (std::isinf(hit.t)) {
                double a = std::clamp(dir.z(), 0.0, 1.0);
                color = lerp(scene.sky_horizon, scene.sky_top, a);
            } else {
                color = shade(hit.color, hit.shade);
            }
            size_t idx = (static_cast<size_t>(py) * width + px) * 3;
            frame.rgb[idx] = color.r;
            frame.rgb[idx + 1] = color.g;
            frame.rgb[idx + 2] = color.b;
        }
    }
    return frame;
}

}  // namespace peva::world
