#include <doctest.h>

#include <cmath>
#include <vector>

#include "peva/diffusion.hpp"
#include "peva/rng.hpp"

using namespace peva;
using namespace peva::diff;

TEST_CASE("schedule construction") {
    SUBCASE("alpha_bar starts at 1 - beta_0") {
        auto s = NoiseSchedule::make(1000, ScheduleKind::kLinear);
        CHECK(s.alpha_bar[0] == doctest::Approx(1.0 - s.beta[0]).epsilon(1e-15));
    }
    SUBCASE("linear 1000 ends deep in noise") {
        auto s = NoiseSchedule::make(1000, ScheduleKind::kLinear);
        // independent computation via log-sum
        double log_prod = 0.0;
        for (int t = 0; t < 1000; ++t)
            log_prod += std::log1p(-(1e-4 + (2e-2 - 1e-4) * t / 999.0));
        CHECK(s.alpha_bar[999] == doctest::Approx(std::exp(log_prod)).epsilon(1e-9));
        CHECK(s.alpha_bar[999] < 1e-4);
    }
    SUBCASE("alpha_bar monotone decreasing for both kinds") {
        for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kCosine}) {
            auto s = NoiseSchedule::make(500, kind);
            for (int t = 1; t < s.n_steps; ++t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
            s.validate(true);
        }
    }
    SUBCASE("invalid step count rejected") {
        CHECK_THROWS_AS(NoiseSchedule::make(1, ScheduleKind::kLinear), CheckError);
    }
    SUBCASE("strided subset keeps endpoints and marginals") {
        auto base = NoiseSchedule::make(1000, ScheduleKind::kLinear);
        auto sub = base.strided(50);
        CHECK(sub.n_steps == 50);
        CHECK(sub.base_index.front() == 0);
        CHECK(sub.base_index.back() == 999);
        // the strided chain must reproduce the base marginals at the picked steps
        for (int j = 0; j < 50; ++j)
            CHECK(sub.alpha_bar[j] ==
                  doctest::Approx(base.alpha_bar[sub.base_index[j]]).epsilon(1e-12));
    }
}

TEST_CASE("q_sample") {
    auto sch = NoiseSchedule::make(100, ScheduleKind::kLinear);

    SUBCASE("near alpha_bar = 1 the sample is the signal") {
        double s = 0.8, eps = 0.0, z = 0.0;
        q_sample(&s, &eps, 1, sch, 0, &z);
        CHECK(z == doctest::Approx(s * sch.sqrt_alpha_bar[0]).epsilon(1e-15));
        CHECK(std::abs(z - s) < 1e-4);
    }
    SUBCASE("zero signal leaves scaled noise") {
        std::vector<double> s(16, 0.0), eps(16), z(16);
        Rng rng(1);
        rng.fill_normal(eps.data(), eps.size());
        int tau = 60;
        q_sample(s.data(), eps.data(), 16, sch, tau, z.data());
        for (int i = 0; i < 16; ++i)
            CHECK(z[i] == doctest::Approx(sch.sqrt_one_minus_alpha_bar[tau] * eps[i])
                              .epsilon(1e-15));
    }
    SUBCASE("Monte Carlo marginals within 2% at 1e5 draws") {
        Rng rng(7);
        const int n = 100000;
        int tau = 40;
        double s = 0.7;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double eps = rng.normal(), z;
            q_sample(&s, &eps, 1, sch, tau, &z);
            sum += z;
            sum2 += z * z;
        }
        double mean = sum / n;
        double var = sum2 / n - mean * mean;
        CHECK(mean == doctest::Approx(sch.sqrt_alpha_bar[tau] * s).epsilon(0.02));
        CHECK(var == doctest::Approx(1.0 - sch.alpha_bar[tau]).epsilon(0.02));
    }
}

TEST_CASE("loss_simple") {
    SUBCASE("zero at perfect prediction") {
        std::vector<double> e = {0.3, -0.2, 1.0, 0.5};
        CHECK(loss_simple(e.data(), e.data(), 4) == 0.0);
    }
    SUBCASE("unit for unit-magnitude errors") {
        std::vector<double> eh(8, 0.0), e = {1, -1, 1, 1, -1, 1, -1, -1};
        CHECK(loss_simple(eh.data(), e.data(), 8) == doctest::Approx(1.0));
    }
    SUBCASE("hand-computed 2x2 case") {
        // elements: (1-0)^2 + (2-1)^2 + (0-2)^2 + (1-1)^2 = 1+1+4+0 = 6; /4 = 1.5
        std::vector<double> eh = {1, 2, 0, 1}, e = {0, 1, 2, 1};
        CHECK(loss_simple(eh.data(), e.data(), 4) == doctest::Approx(1.5));
    }
    SUBCASE("gradient matches central differences") {
        Rng rng(3);
        std::vector<double> eh(12), e(12), grad(12, 0.0);
        rng.fill_normal(eh.data(), 12);
        rng.fill_normal(e.data(), 12);
        loss_simple_backward(eh.data(), e.data(), 12, 1.0, grad.data());
        for (int i = 0; i < 12; ++i) {
            double h = 1e-6;
            auto perturbed = eh;
            perturbed[i] += h;
            double up = loss_simple(perturbed.data(), e.data(), 12);
            perturbed[i] -= 2 * h;
            double dn = loss_simple(perturbed.data(), e.data(), 12);
            CHECK(grad[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
        }
    }
}

namespace {

// Builds a consistent (z, eps) pair for signal s at step tau.
struct TransitionFixture {
    std::vector<double> s, eps, z;
    TransitionFixture(const NoiseSchedule& sch, int tau, int n, uint64_t seed) {
        Rng rng(seed);
        s.resize(n);
        eps.resize(n);
        z.resize(n);
        for (int i = 0; i < n; ++i) {
            s[i] = rng.uniform(-0.9, 0.9);
            eps[i] = rng.normal();
        }
        q_sample(s.data(), eps.data(), n, sch, tau, z.data());
    }
};

}  // namespace

TEST_CASE("loss_vlb") {
    auto sch = NoiseSchedule::make(100, ScheduleKind::kLinear);

    SUBCASE("zero when the model matches the true posterior") {
        int tau = 30, n = 32;
        TransitionFixture fx(sch, tau, n, 11);
        // eps_hat = true eps makes mu_theta equal the posterior mean; v = 0
        // selects exactly the posterior variance
        std::vector<double> v(n, 0.0);
        double kl = loss_vlb(fx.eps.data(), v.data(), n, 1, fx.z.data(), fx.s.data(), sch, tau,
                             kDefaultBinWidth);
        CHECK(kl == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("KL non-negativity under fuzzing") {
        Rng rng(23);
        for (int trial = 0; trial < 10000; ++trial) {
            int tau = 1 + static_cast<int>(rng.below(99));
            double s = rng.uniform(-1, 1), eps = rng.normal(), z;
            q_sample(&s, &eps, 1, sch, tau, &z);
            double eh = eps + rng.normal();       // wrong mean
            double v = rng.uniform(-0.5, 1.5);    // variance off either way
            double kl = loss_vlb(&eh, &v, 1, 1, &z, &s, sch, tau, kDefaultBinWidth);
            CHECK(kl >= -1e-12);
        }
    }
    SUBCASE("equal-variance mean-gap KL closed form") {
        int tau = 50;
        TransitionFixture fx(sch, tau, 1, 5);
        std::vector<double> v(1, 0.0);  // sigma_p^2 == posterior variance
        // shift the model mean by delta via the eps parameterization
        double delta = 0.2;
        double eh = fx.eps[0] + delta * std::sqrt(sch.alpha[tau]) / sch.eps_coef[tau];
        double kl = loss_vlb(&eh, v.data(), 1, 1, fx.z.data(), fx.s.data(), sch, tau,
                             kDefaultBinWidth);
        double expect = delta * delta / (2.0 * sch.posterior_var[tau]);
        CHECK(kl == doctest::Approx(expect).epsilon(1e-9));
    }
    SUBCASE("tau=0 decoder term is finite and small for a perfect model") {
        int n = 16;
        TransitionFixture fx(sch, 0, n, 9);
        std::vector<double> v(n, 0.0);
        double nll = loss_vlb(fx.eps.data(), v.data(), n, 1, fx.z.data(), fx.s.data(), sch, 0,
                              kDefaultBinWidth);
        CHECK(std::isfinite(nll));
        // perfect mean, near-bin-scale sigma: a few nats per element at most
        CHECK(nll < 8.0);
    }
    SUBCASE("v gradient matches central differences, including tau=0") {
        Rng rng(31);
        for (int tau : {0, 1, 17, 70}) {
            int n = 6;
            TransitionFixture fx(sch, tau, n, 100 + tau);
            std::vector<double> v(n), dv(n, 0.0), eh(n);
            for (int i = 0; i < n; ++i) {
                v[i] = rng.uniform(-0.3, 1.2);
                eh[i] = fx.eps[i] + 0.3 * rng.normal();
            }
            loss_vlb(eh.data(), v.data(), n, 1, fx.z.data(), fx.s.data(), sch, tau,
                     kDefaultBinWidth, 1.0, dv.data());
            for (int i = 0; i < n; ++i) {
                double h = 1e-6;
                auto vp = v;
                vp[i] += h;
                double up = loss_vlb(eh.data(), vp.data(), n, 1, fx.z.data(), fx.s.data(), sch,
                                     tau, kDefaultBinWidth);
                vp[i] -= 2 * h;
                double dn = loss_vlb(eh.data(), vp.data(), n, 1, fx.z.data(), fx.s.data(), sch,
                                     tau, kDefaultBinWidth);
                double fd = (up - dn) / (2 * h);
                CHECK(dv[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
            }
        }
    }
    SUBCASE("NaN inputs rejected loudly") {
        int n = 4;
        TransitionFixture fx(sch, 10, n, 2);
        std::vector<double> v(n, 0.0);
        auto eh = fx.eps;
        eh[2] = std::nan("");
        CHECK_THROWS_AS(loss_vlb(eh.data(), v.data(), n, 1, fx.z.data(), fx.s.data(), sch, 10,
                                 kDefaultBinWidth),
                        CheckError);
    }
}

TEST_CASE("total_transition_loss") {
    auto sch = NoiseSchedule::make(100, ScheduleKind::kLinear);
    int tau = 25, n = 24;
    TransitionFixture fx(sch, tau, n, 77);
    std::vector<double> v(n, 0.1), eh(n);
    Rng rng(4);
    for (int i = 0; i < n; ++i) eh[i] = fx.eps[i] + 0.2 * rng.normal();

    SUBCASE("lambda 0 reduces to the simple loss") {
        double t = total_transition_loss(eh.data(), v.data(), n, 1, fx.z.data(), fx.eps.data(),
                                         fx.s.data(), sch, tau, 0.0, kDefaultBinWidth);
        CHECK(t == doctest::Approx(loss_simple(eh.data(), fx.eps.data(), n)).epsilon(1e-15));
    }
    SUBCASE("lambda 1 is the exact sum of both terms") {
        double simple = loss_simple(eh.data(), fx.eps.data(), n);
        double vlb = loss_vlb(eh.data(), v.data(), n, 1, fx.z.data(), fx.s.data(), sch, tau,
                              kDefaultBinWidth);
        double total = total_transition_loss(eh.data(), v.data(), n, 1, fx.z.data(),
                                             fx.eps.data(), fx.s.data(), sch, tau, 1.0,
                                             kDefaultBinWidth);
        CHECK(total == doctest::Approx(simple + vlb).epsilon(1e-12));
    }
}

TEST_CASE("p_sample_step") {
    auto sch = NoiseSchedule::make(100, ScheduleKind::kLinear);

    SUBCASE("no noise at the final step") {
        TransitionFixture fx(sch, 0, 8, 13);
        std::vector<double> out1(8), out2(8);
        Rng a(1), b(999);  // different rngs must not matter at tau = 0
        p_sample_step(fx.eps.data(), (const double*)nullptr, 8, 1, fx.z.data(), sch, 0, a,
                      out1.data());
        p_sample_step(fx.eps.data(), (const double*)nullptr, 8, 1, fx.z.data(), sch, 0, b,
                      out2.data());
        CHECK(out1 == out2);
    }
    SUBCASE("fixed seed gives identical steps") {
        TransitionFixture fx(sch, 50, 8, 14);
        std::vector<double> out1(8), out2(8);
        Rng a(5), b(5);
        p_sample_step(fx.eps.data(), (const double*)nullptr, 8, 1, fx.z.data(), sch, 50, a,
                      out1.data());
        p_sample_step(fx.eps.data(), (const double*)nullptr, 8, 1, fx.z.data(), sch, 50, b,
                      out2.data());
        CHECK(out1 == out2);
    }
    SUBCASE("oracle-eps denoising recovers the clean latent") {
        const int n = 64;
        for (bool strided : {false, true}) {
            auto full = NoiseSchedule::make(1000, ScheduleKind::kLinear);
            NoiseSchedule run = strided ? full.strided(50) : full;
            Rng rng(21);
            std::vector<double> s(n), eps(n), z(n), eh(n), next(n);
            for (int i = 0; i < n; ++i) s[i] = rng.uniform(-0.9, 0.9);
            rng.fill_normal(eps.data(), n);
            q_sample(s.data(), eps.data(), n, run, run.n_steps - 1, z.data());
            for (int tau = run.n_steps - 1; tau >= 0; --tau) {
                // oracle model: the exact noise implied by the current z
                for (int i = 0; i < n; ++i)
                    eh[i] = (z[i] - run.sqrt_alpha_bar[tau] * s[i]) /
                            run.sqrt_one_minus_alpha_bar[tau];
                p_sample_step(eh.data(), (const double*)nullptr, n, 1, z.data(), run, tau, rng,
                              next.data());
                z = next;
            }
            double mse = 0.0;
            for (int i = 0; i < n; ++i) mse += (z[i] - s[i]) * (z[i] - s[i]);
            CHECK(std::sqrt(mse / n) < 0.05);
        }
    }
}
