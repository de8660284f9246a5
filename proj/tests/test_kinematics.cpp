#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "peva/kinematics.hpp"
#include "peva/pose_io.hpp"
#include "test_util.hpp"

using namespace peva;
using namespace peva::kin;
using test_oracle::euler_zxy_matrix;
using test_oracle::frobenius;
using test_oracle::quat_close_up_to_sign;
using test_oracle::random_unit_quat;

namespace {

constexpr double kPi = 3.14159265358979323846;

PoseFrame rest_pose(double t = 0.0) {
    PoseFrame p;
    p.timestamp = t;
    return p;
}

// Rigid transform of a whole pose: rotate orientations and positions by R,
// then translate.
PoseFrame apply_rigid(const PoseFrame& p, const Quat& r, const Eigen::Vector3d& v) {
    PoseFrame out = p;
    out.root_translation = r.rotate(p.root_translation) + v;
    for (int j = 0; j < kNumJoints; ++j) out.joint_rotations[j] = r * p.joint_rotations[j];
    return out;
}

}  // namespace

TEST_CASE("quat_to_euler identity") {
    auto e = quat_to_euler(Quat::identity());
    CHECK(e.norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("quat_to_euler 90 deg about first decomposition axis") {
    Quat q = Quat::from_axis_angle({0, 0, 1}, kPi / 2);
    auto e = quat_to_euler(q);
    // oracle: the matrix of (pi/2, 0, 0) must equal the quat's matrix
    CHECK(frobenius(euler_zxy_matrix({kPi / 2, 0, 0}), q.to_matrix()) < 1e-9);
    CHECK(e[0] == doctest::Approx(kPi / 2).epsilon(1e-9));
    CHECK(std::abs(e[1]) < 1e-9);
    CHECK(std::abs(e[2]) < 1e-9);
}

TEST_CASE("euler round trip against quaternion algebra oracle") {
    Rng rng(42);
    for (int i = 0; i < 500; ++i) {
        Quat q = random_unit_quat(rng);
        auto e = quat_to_euler(q);
        Quat back = euler_to_quat(e);
        CHECK(quat_close_up_to_sign(back, q, 1e-6));
    }
}

TEST_CASE("euler round trip as rotation matrices") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        Quat q = random_unit_quat(rng);
        auto e = quat_to_euler(q);
        bool gimbal;
        quat_to_euler(q, &gimbal);
        if (gimbal) continue;  // singular region tested separately
        CHECK(frobenius(euler_zxy_matrix(e), q.to_matrix()) < 1e-6);
        // matrix built from the euler oracle, independent of euler_to_quat
        CHECK(frobenius(euler_zxy_matrix(e), euler_to_quat(e).to_matrix()) < 1e-9);
    }
}

TEST_CASE("gimbal lock canonicalization") {
    reset_kin_counters();
    // theta = pi/2 collapses phi and psi into one observable angle
    Quat q = euler_to_quat({0.8, kPi / 2, -0.3});
    bool gimbal = false;
    auto e = quat_to_euler(q, &gimbal);
    CHECK(gimbal);
    CHECK(e[2] == 0.0);
    CHECK(gimbal_lock_count() >= 1);
    // the canonical triple still denotes the same rotation
    CHECK(frobenius(euler_zxy_matrix(e), q.to_matrix()) < 1e-6);
}

TEST_CASE("non-unit quaternion repaired and counted") {
    reset_kin_counters();
    Quat q{2.0, 0.0, 0.0, 0.0};
    auto e = quat_to_euler(q);
    CHECK(e.norm() < 1e-12);
    CHECK(non_unit_quat_count() >= 1);
}

TEST_CASE("relative_rotation") {
    Rng rng(3);
    Quat q = random_unit_quat(rng);
    CHECK(quat_close_up_to_sign(relative_rotation(q, q), Quat::identity(), 1e-12));
    CHECK(quat_close_up_to_sign(relative_rotation(Quat::identity(), q), q, 1e-12));
    for (int i = 0; i < 100; ++i) {
        Quat a = random_unit_quat(rng), b = random_unit_quat(rng);
        Quat rel = relative_rotation(a, b);
        CHECK(quat_close_up_to_sign(a * rel, b, 1e-6));
    }
}

TEST_CASE("to_pelvis_frame") {
    Rng rng(11);
    PoseFrame p = rest_pose();
    for (int j = 0; j < kNumJoints; ++j) p.joint_rotations[j] = random_unit_quat(rng);
    p.root_translation = {1.5, -2.0, 0.9};

    SUBCASE("already centered pose unchanged") {
        PoseFrame c = p;
        c.root_translation.setZero();
        c.joint_rotations[kPelvis] = Quat::identity();
        PoseFrame out = to_pelvis_frame(c);
        CHECK(out.root_translation.norm() == 0.0);
        for (int j = 0; j < kNumJoints; ++j)
            CHECK(quat_close_up_to_sign(out.joint_rotations[j], c.joint_rotations[j], 1e-12));
    }
    SUBCASE("invariant to rigid transforms") {
        Quat r = Quat::from_axis_angle({0, 0, 1}, kPi / 2);
        PoseFrame moved = apply_rigid(p, r, {5, 0, 2});
        PoseFrame a = to_pelvis_frame(p);
        PoseFrame b = to_pelvis_frame(moved);
        for (int j = 0; j < kNumJoints; ++j)
            CHECK(quat_close_up_to_sign(a.joint_rotations[j], b.joint_rotations[j], 1e-9));
        CHECK(b.root_translation.norm() == 0.0);
    }
}

TEST_CASE("compute_action basics") {
    auto bounds = NormalizationBounds::defaults();
    PoseFrame p0 = rest_pose(0.0);
    PoseFrame p1 = rest_pose(0.25);

    SUBCASE("identical poses give zeros") {
        auto a = compute_action(p0, p1, bounds);
        CHECK(a.values.size() == 48);
        for (double v : a.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(a.timeskip == doctest::Approx(0.25));
    }
    SUBCASE("pure forward step touches only translation slots") {
        // yaw the whole body first so the pelvis frame matters
        Quat yaw = Quat::from_axis_angle({0, 0, 1}, 0.6);
        for (int j = 0; j < kNumJoints; ++j) {
            p0.joint_rotations[j] = yaw;
            p1.joint_rotations[j] = yaw;
        }
        double d = 0.4;
        p1.root_translation = p0.root_translation + yaw.rotate(Eigen::Vector3d(d, 0, 0));
        auto raw = compute_action_raw(p0, p1);
        CHECK(raw[0] == doctest::Approx(d).epsilon(1e-9));
        for (int i = 1; i < kActionDim; ++i) CHECK(std::abs(raw[i]) < 1e-9);
    }
    SUBCASE("non-positive timeskip rejected") {
        PoseFrame bad = rest_pose(0.0);
        CHECK_THROWS_AS(compute_action(p0, bad, bounds), std::invalid_argument);
    }
}

TEST_CASE("rigid invariance of compute_action") {
    auto bounds = NormalizationBounds::defaults();
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        PoseFrame p0 = rest_pose(0.0), p1 = rest_pose(0.5);
        for (int j = 0; j < kNumJoints; ++j) {
            p0.joint_rotations[j] = random_unit_quat(rng);
            // keep p1 near p0 so deltas are generic but bounded
            p1.joint_rotations[j] =
                p0.joint_rotations[j] *
                Quat::from_axis_angle({rng.normal(), rng.normal(), rng.normal() + 1e-3}, 0.3 * rng.uniform());
        }
        p0.root_translation = {rng.normal(), rng.normal(), rng.normal()};
        p1.root_translation = p0.root_translation + 0.5 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());

        Quat r = Quat::from_axis_angle({0, 0, 1}, rng.uniform(-kPi, kPi));
        Eigen::Vector3d v(rng.normal() * 10, rng.normal() * 10, rng.normal());
        auto a = compute_action(p0, p1, bounds);
        auto b = compute_action(apply_rigid(p0, r, v), apply_rigid(p1, r, v), bounds);
        for (int i = 0; i < kActionDim; ++i)
            CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("relative rotation chaining") {
    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        Quat q0 = random_unit_quat(rng), q1 = random_unit_quat(rng), q2 = random_unit_quat(rng);
        Quat chained = relative_rotation(q0, q1) * relative_rotation(q1, q2);
        Quat direct = relative_rotation(q0, q2);
        CHECK(chained.angle_to(direct) < 1e-5);
    }
}

TEST_CASE("normalize/denormalize") {
    auto bounds = NormalizationBounds::defaults();
    std::array<double, kActionDim> raw{};

    SUBCASE("min maps to -1, midpoint to 0, +pi to +1") {
        raw[0] = bounds.lo[0];
        raw[5] = kPi;
        auto a = normalize_action(raw, bounds);
        CHECK(a.values[0] == doctest::Approx(-1.0));
        CHECK(a.values[1] == doctest::Approx(0.0));  // midpoint of symmetric bounds
        CHECK(a.values[5] == doctest::Approx(1.0));
    }
    SUBCASE("round trip within 1e-6") {
        Rng rng(5);
        for (int i = 0; i < kActionDim; ++i) raw[i] = rng.uniform(bounds.lo[i], bounds.hi[i]);
        ActionVector a = normalize_action(raw, bounds);
        auto back = denormalize_action(a, bounds);
        for (int i = 0; i < kActionDim; ++i) CHECK(back[i] == doctest::Approx(raw[i]).epsilon(1e-6));
    }
    SUBCASE("degenerate bounds map to 0") {
        auto b = bounds;
        b.lo[7] = b.hi[7] = 0.4;
        raw[7] = 123.0;
        CHECK(normalize_action(raw, b).values[7] == 0.0);
    }
    SUBCASE("out of range clamps and counts") {
        reset_kin_counters();
        raw[2] = 50.0;
        auto a = normalize_action(raw, bounds);
        CHECK(a.values[2] == 1.0);
        CHECK(normalize_clamp_count() >= 1);
    }
    SUBCASE("fit uses percentiles and stays symmetric") {
        std::vector<std::array<double, kActionDim>> data(200);
        Rng rng(17);
        for (auto& r : data) r[0] = rng.normal(0.0, 0.3);
        data[0][0] = 100.0;  // outlier that percentiles should ignore
        auto b = NormalizationBounds::fit(data);
        CHECK(b.hi[0] < 2.0);
        CHECK(b.lo[0] == doctest::Approx(-b.hi[0]));
    }
}

TEST_CASE("fk positions follow the chain") {
    const auto& tree = KinematicTree::upper_body();
    PoseFrame p = rest_pose();
    auto pos = fk_positions(tree, p);
    // head sits above the pelvis at rest
    CHECK(pos[kHead].z() > pos[kPelvis].z() + 0.4);
    // hands hang below the shoulders
    CHECK(pos[kLeftHand].z() < pos[kLeftShoulder].z());
    CHECK(pos[kRightHand].z() < pos[kRightShoulder].z());
    // yawing the whole body spins positions around the vertical
    Quat yaw = Quat::from_axis_angle({0, 0, 1}, kPi / 2);
    PoseFrame rotated = apply_rigid(p, yaw, {0, 0, 0});
    auto pos2 = fk_positions(tree, rotated);
    CHECK((pos2[kHead] - yaw.rotate(pos[kHead])).norm() < 1e-9);
}

namespace {

// Trajectory with the left arm swinging from hanging to horizontal over
// frames [4, 12); everything else static. fps = 4.
std::vector<PoseFrame> left_raise_trajectory(int n_frames = 20) {
    std::vector<PoseFrame> traj;
    for (int i = 0; i < n_frames; ++i) {
        PoseFrame p = rest_pose(i * 0.25);
        double t = std::clamp((i - 4) / 8.0, 0.0, 1.0);
        Quat lift = Quat::from_axis_angle({0, 1, 0}, -t * kPi / 2);
        p.joint_rotations[kLeftUpperArm] = lift;
        p.joint_rotations[kLeftForearm] = lift;
        traj.push_back(p);
    }
    return traj;
}

}  // namespace

TEST_CASE("atomic segment extraction") {
    AtomicThresholds th;
    th.hand_m = 0.2;

    SUBCASE("hand raise produces one lhand_up") {
        auto traj = left_raise_trajectory();
        auto segs = extract_atomic_segments(traj, th, 8);
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].label == AtomicLabel::kLhandUp);
        CHECK(segs[0].magnitude >= th.hand_m);
        CHECK(segs[0].end_index > segs[0].start_index);
    }
    SUBCASE("stationary trajectory gives nothing") {
        std::vector<PoseFrame> traj;
        for (int i = 0; i < 20; ++i) traj.push_back(rest_pose(i * 0.25));
        CHECK(extract_atomic_segments(traj, th, 8).empty());
    }
    SUBCASE("empty trajectory gives nothing") {
        CHECK(extract_atomic_segments({}, th, 8).empty());
    }
    SUBCASE("deterministic") {
        auto traj = left_raise_trajectory();
        auto a = extract_atomic_segments(traj, th, 8);
        auto b = extract_atomic_segments(traj, th, 8);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].label == b[i].label);
            CHECK(a[i].start_index == b[i].start_index);
            CHECK(a[i].magnitude == b[i].magnitude);
        }
    }
    SUBCASE("per-label cap") {
        // two separated raises -> two candidates, cap keeps one
        auto traj = left_raise_trajectory(20);
        auto lower = traj;
        std::reverse(lower.begin(), lower.end());
        for (size_t i = 0; i < lower.size(); ++i) lower[i].timestamp = 5.0 + i * 0.25;
        std::vector<PoseFrame> both = traj;
        both.insert(both.end(), lower.begin(), lower.end());
        auto uncapped = extract_atomic_segments(both, th, 8);
        auto capped = extract_atomic_segments(both, th, 8, 1);
        size_t ups = 0, capped_ups = 0;
        for (auto& s : uncapped) ups += s.label == AtomicLabel::kLhandUp;
        for (auto& s : capped) capped_ups += s.label == AtomicLabel::kLhandUp;
        CHECK(ups >= 1);
        CHECK(capped_ups == 1);
    }
    SUBCASE("forward walk detected") {
        std::vector<PoseFrame> traj;
        for (int i = 0; i < 16; ++i) {
            PoseFrame p = rest_pose(i * 0.25);
            p.root_translation = {0.2 * i, 0.0, 0.9};
            traj.push_back(p);
        }
        auto segs = extract_atomic_segments(traj, th, 8);
        REQUIRE(!segs.empty());
        CHECK(segs[0].label == AtomicLabel::kForward);
    }
    SUBCASE("rotation direction") {
        std::vector<PoseFrame> traj;
        for (int i = 0; i < 16; ++i) {
            PoseFrame p = rest_pose(i * 0.25);
            Quat yaw = Quat::from_axis_angle({0, 0, 1}, -0.1 * i);  // clockwise = right
            for (int j = 0; j < kNumJoints; ++j) p.joint_rotations[j] = yaw;
            traj.push_back(p);
        }
        auto segs = extract_atomic_segments(traj, th, 8);
        REQUIRE(!segs.empty());
        CHECK(segs[0].label == AtomicLabel::kRotateRight);
    }
}

TEST_CASE("action_stats") {
    auto bounds = NormalizationBounds::defaults();
    ActionVector a;
    a.values[21] = 0.3;  // right shoulder phi
    a.timeskip = 0.25;

    SUBCASE("identical actions have zero variance") {
        auto s = action_stats({a, a, a}, bounds);
        CHECK(s.count == 3);
        CHECK(s.mean[21] == doctest::Approx(0.3));
        for (double v : s.variance) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("{a, -a} has zero mean and variance a^2") {
        ActionVector neg = a;
        for (auto& v : neg.values) v = -v;
        auto s = action_stats({a, neg}, bounds);
        CHECK(s.mean[21] == doctest::Approx(0.0));
        CHECK(s.variance[21] == doctest::Approx(0.09));
    }
    SUBCASE("arm subset picks the right slots") {
        auto s = action_stats({a, a}, bounds);
        auto right = s.arm_mean(kin::Arm::kRight);
        auto left = s.arm_mean(kin::Arm::kLeft);
        CHECK(right[0] == doctest::Approx(0.3));
        for (double v : left) CHECK(v == 0.0);
    }
}

TEST_CASE("arm stats table file round trip") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "peva_arm_stats_test.csv").string();
    // reference values in published-table format
    std::ofstream f(path);
    f << "segment,statistic,arm,phi,theta,psi\n";
    f << "shoulder,mean,right,0.0027,-0.0012,-0.0015\n";
    f << "forearm,mean,right,0.0068,-0.0035,0.0077\n";
    f << "forearm,variance,left,0.1791,0.2012,0.2186\n";
    f.close();
    auto t = read_arm_stats_csv(path);
    CHECK(t.mean[0][2][0] == doctest::Approx(0.0068));
    CHECK(t.mean[0][2][1] == doctest::Approx(-0.0035));
    CHECK(t.mean[0][2][2] == doctest::Approx(0.0077));
    CHECK(t.mean[0][0][0] == doctest::Approx(0.0027));
    CHECK(t.variance[1][2][1] == doctest::Approx(0.2012));
    fs::remove(path);
}

TEST_CASE("pose file io") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "peva_pose_test.bin").string();
    Rng rng(8);
    std::vector<PoseFrame> frames;
    for (int i = 0; i < 5; ++i) {
        PoseFrame p = rest_pose(i * 0.25);
        p.root_translation = {rng.normal(), rng.normal(), rng.normal()};
        for (int j = 0; j < kNumJoints; ++j) p.joint_rotations[j] = random_unit_quat(rng);
        frames.push_back(p);
    }
    write_pose_file(path, frames);
    auto back = read_pose_file(path);
    REQUIRE(back.size() == frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        CHECK(back[i].timestamp == frames[i].timestamp);
        CHECK((back[i].root_translation - frames[i].root_translation).norm() < 1e-6);
        for (int j = 0; j < kNumJoints; ++j)
            CHECK(quat_close_up_to_sign(back[i].joint_rotations[j], frames[i].joint_rotations[j],
                                        1e-6));
    }
    // second write of the read-back data is byte-stable
    auto path2 = (fs::temp_directory_path() / "peva_pose_test2.bin").string();
    write_pose_file(path2, back);
    auto read_all = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    CHECK(read_all(path) == read_all(path2));

    SUBCASE("truncated file raises a format error") {
        auto bytes = read_all(path);
        std::ofstream trunc(path + ".t", std::ios::binary);
        trunc.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        trunc.close();
        CHECK_THROWS_AS(read_pose_file(path + ".t"), DataError);
        fs::remove(path + ".t");
    }
    SUBCASE("bad magic raises") {
        std::ofstream bad(path + ".m", std::ios::binary);
        bad << "NOTAPOSE" << std::string(64, '\0');
        bad.close();
        CHECK_THROWS_AS(read_pose_file(path + ".m"), DataError);
        fs::remove(path + ".m");
    }
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("segments csv round trip") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "peva_segs_test.csv").string();
    std::vector<AtomicSegment> segs = {{AtomicLabel::kForward, 3, 11, 0.8},
                                       {AtomicLabel::kRhandUp, 20, 28, 0.31}};
    write_segments_csv(path, segs);
    auto back = read_segments_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].label == AtomicLabel::kRhandUp);
    CHECK(back[1].start_index == 20);
    CHECK(back[1].magnitude == doctest::Approx(0.31));
    fs::remove(path);
}
