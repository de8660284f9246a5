#include "peva/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "peva/tensor.hpp"

namespace peva::diff {

namespace {
constexpr double kPi = 3.14159265358979323846;

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }
}  // namespace

const char* schedule_kind_name(ScheduleKind k) {
    return k == ScheduleKind::kLinear ? "linear" : "cosine";
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
    if (name == "linear") return ScheduleKind::kLinear;
    if (name == "cosine") return ScheduleKind::kCosine;
    throw DataError("unknown schedule kind: " + name);
}

static void fill_derived(NoiseSchedule& s) {
    int n = s.n_steps;
    s.alpha.resize(n);
    s.alpha_bar.resize(n);
    s.sqrt_alpha_bar.resize(n);
    s.sqrt_one_minus_alpha_bar.resize(n);
    s.posterior_var.resize(n);
    s.log_posterior_var_clipped.resize(n);
    s.log_beta.resize(n);
    s.posterior_coef_s.resize(n);
    s.posterior_coef_z.resize(n);
    s.recip_sqrt_alpha.resize(n);
    s.eps_coef.resize(n);
    double prod = 1.0;
    for (int t = 0; t < n; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        prod *= s.alpha[t];
        s.alpha_bar[t] = prod;
        s.sqrt_alpha_bar[t] = std::sqrt(prod);
        s.sqrt_one_minus_alpha_bar[t] = std::sqrt(1.0 - prod);
        s.log_beta[t] = std::log(s.beta[t]);
        s.recip_sqrt_alpha[t] = 1.0 / std::sqrt(s.alpha[t]);
        s.eps_coef[t] = s.beta[t] / s.sqrt_one_minus_alpha_bar[t];
        double ab_prev = t == 0 ? 1.0 : s.alpha_bar[t - 1];
        s.posterior_var[t] = (1.0 - ab_prev) / (1.0 - s.alpha_bar[t]) * s.beta[t];
        s.posterior_coef_s[t] = std::sqrt(ab_prev) * s.beta[t] / (1.0 - s.alpha_bar[t]);
        s.posterior_coef_z[t] = std::sqrt(s.alpha[t]) * (1.0 - ab_prev) / (1.0 - s.alpha_bar[t]);
    }
    // posterior_var[0] = 0; keep its log finite for variance interpolation
    for (int t = 0; t < n; ++t) {
        double pv = t == 0 ? (n > 1 ? s.posterior_var[1] : s.beta[0]) : s.posterior_var[t];
        s.log_posterior_var_clipped[t] = std::log(pv);
    }
    if (s.base_index.empty()) {
        s.base_index.resize(n);
        for (int t = 0; t < n; ++t) s.base_index[t] = t;
    }
}

NoiseSchedule NoiseSchedule::make(int n_steps, ScheduleKind kind) {
    PEVA_CHECK(n_steps >= 2, "schedule needs at least 2 steps");
    NoiseSchedule s;
    s.n_steps = n_steps;
    s.kind = kind;
    s.beta.resize(n_steps);
    if (kind == ScheduleKind::kLinear) {
        const double lo = 1e-4, hi = 2e-2;
        for (int t = 0; t < n_steps; ++t)
            s.beta[t] = lo + (hi - lo) * static_cast<double>(t) / (n_steps - 1);
    } else {
        // alpha_bar(u) = cos^2((u + 0.008) / 1.008 * pi/2) / cos^2(...)
        auto ab = [&](double u) {
            double c = std::cos((u + 0.008) / 1.008 * kPi / 2.0);
            return c * c;
        };
        double ab0 = ab(0.0);
        double prev = 1.0;
        for (int t = 0; t < n_steps; ++t) {
            double cur = ab(static_cast<double>(t + 1) / n_steps) / ab0;
            s.beta[t] = std::clamp(1.0 - cur / prev, 1e-8, 0.999);
            prev = cur;
        }
    }
    fill_derived(s);
    s.validate(true);
    return s;
}

NoiseSchedule NoiseSchedule::strided(int n_sample) const {
    PEVA_CHECK(n_sample >= 2 && n_sample <= n_steps, "invalid strided step count");
    NoiseSchedule s;
    s.n_steps = n_sample;
    s.kind = kind;
    s.beta.resize(n_sample);
    s.base_index.resize(n_sample);
    double prev_ab = 1.0;
    for (int j = 0; j < n_sample; ++j) {
        int idx = static_cast<int>(std::llround(static_cast<double>(j) * (n_steps - 1) /
                                                (n_sample - 1)));
        s.base_index[j] = base_index[idx];
        double ab = alpha_bar[idx];
        s.beta[j] = 1.0 - ab / prev_ab;
        prev_ab = ab;
    }
    fill_derived(s);
    s.validate(false);
    return s;
}

void NoiseSchedule::validate(bool base) const {
    PEVA_CHECK(n_steps >= 2, "schedule too short");
    double prod = 1.0;
    for (int t = 0; t < n_steps; ++t) {
        PEVA_CHECK(beta[t] > 0.0 && beta[t] < 1.0, "beta out of (0,1)");
        if (base && t > 0) {
            // strictly increasing except where the cosine clip plateaus
            bool clipped = beta[t] >= 0.999 && beta[t - 1] >= 0.999;
            PEVA_CHECK(beta[t] > beta[t - 1] || clipped, "beta must increase");
        }
        if (t > 0) PEVA_CHECK(alpha_bar[t] < alpha_bar[t - 1], "alpha_bar must decrease");
        prod *= 1.0 - beta[t];
        PEVA_CHECK(std::abs(prod - alpha_bar[t]) <= 1e-12, "alpha_bar product identity");
    }
}

template <typename T>
void q_sample(const T* s, const T* eps, int64_t n, const NoiseSchedule& sch, int tau, T* z_out) {
    PEVA_CHECK(tau >= 0 && tau < sch.n_steps, "tau out of range");
    T a = static_cast<T>(sch.sqrt_alpha_bar[tau]);
    T b = static_cast<T>(sch.sqrt_one_minus_alpha_bar[tau]);
    for (int64_t i = 0; i < n; ++i) z_out[i] = a * s[i] + b * eps[i];
}

template <typename T>
T loss_simple(const T* eps_hat, const T* eps, int64_t n) {
    PEVA_CHECK(n > 0, "empty loss input");
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double d = static_cast<double>(eps_hat[i]) - static_cast<double>(eps[i]);
        acc += d * d;
    }
    double out = acc / static_cast<double>(n);
    if (!std::isfinite(out)) throw CheckError("loss_simple produced a non-finite value");
    return static_cast<T>(out);
}

template <typename T>
void loss_simple_backward(const T* eps_hat, const T* eps, int64_t n, T scale, T* d_eps_hat) {
    T c = scale * T(2) / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) d_eps_hat[i] += c * (eps_hat[i] - eps[i]);
}

template <typename T>
T loss_vlb(const T* eps_hat, const T* v, int64_t n, int64_t v_group, const T* z_tau,
           const T* s_true, const NoiseSchedule& sch, int tau, double bin_width, T scale,
           T* d_v) {
    PEVA_CHECK(tau >= 0 && tau < sch.n_steps, "tau out of range");
    PEVA_CHECK(n % v_group == 0, "v_group must divide n");
    if (!all_finite(eps_hat, n) || !all_finite(v, n / v_group) || !all_finite(z_tau, n))
        throw CheckError("loss_vlb given non-finite inputs");

    const double log_b = sch.log_beta[tau];
    const double log_bt = sch.log_posterior_var_clipped[tau];
    const double rsa = sch.recip_sqrt_alpha[tau];
    const double ec = sch.eps_coef[tau];
    double acc = 0.0;

    if (tau >= 1) {
        const double var_q = sch.posterior_var[tau];
        const double log_var_q = std::log(var_q);
        const double cs = sch.posterior_coef_s[tau];
        const double cz = sch.posterior_coef_z[tau];
        for (int64_t g = 0; g < n / v_group; ++g) {
            double vg = static_cast<double>(v[g]);
            double log_var_p = vg * log_b + (1.0 - vg) * log_bt;
            double var_p = std::exp(log_var_p);
            double dkl_dvarp_sum = 0.0;
            for (int64_t k = 0; k < v_group; ++k) {
                int64_t i = g * v_group + k;
                double mu_q = cs * static_cast<double>(s_true[i]) +
                              cz * static_cast<double>(z_tau[i]);
                // model mean from the eps parameterization; constant w.r.t. grads here
                double mu_p = rsa * (static_cast<double>(z_tau[i]) -
                                     ec * static_cast<double>(eps_hat[i]));
                double gap = mu_q - mu_p;
                double kl = 0.5 * (log_var_p - log_var_q) +
                            (var_q + gap * gap) / (2.0 * var_p) - 0.5;
                acc += kl;
                dkl_dvarp_sum += 0.5 / var_p - (var_q + gap * gap) / (2.0 * var_p * var_p);
            }
            if (d_v) {
                double dvarp_dv = var_p * (log_b - log_bt);
                d_v[g] += static_cast<T>(static_cast<double>(scale) * dkl_dvarp_sum * dvarp_dv /
                                         static_cast<double>(n));
            }
        }
    } else {
        // decoder term: discretized Gaussian log-likelihood of s under the model
        const double half = bin_width * 0.5;
        for (int64_t g = 0; g < n / v_group; ++g) {
            double vg = static_cast<double>(v[g]);
            double log_var_p = vg * log_b + (1.0 - vg) * log_bt;
            double sigma = std::exp(0.5 * log_var_p);
            double dnll_dsigma_sum = 0.0;
            for (int64_t k = 0; k < v_group; ++k) {
                int64_t i = g * v_group + k;
                double x = static_cast<double>(s_true[i]);
                double mu = rsa * (static_cast<double>(z_tau[i]) -
                                   ec * static_cast<double>(eps_hat[i]));
                double a = (x - half - mu) / sigma;
                double b = (x + half - mu) / sigma;
                bool lo_edge = x <= -1.0 + half;
                bool hi_edge = x >= 1.0 - half;
                double p = hi_edge   ? 1.0 - std_normal_cdf(a)
                           : lo_edge ? std_normal_cdf(b)
                                     : std_normal_cdf(b) - std_normal_cdf(a);
                p = std::max(p, 1e-12);
                acc += -std::log(p);
                if (d_v) {
                    auto phi = [](double t) {
                        return std::exp(-0.5 * t * t) / std::sqrt(2.0 * kPi);
                    };
                    double dp_dsigma = 0.0;
                    if (!hi_edge) dp_dsigma += phi(b) * (-b / sigma);
                    if (!lo_edge) dp_dsigma -= phi(a) * (-a / sigma);
                    dnll_dsigma_sum += -dp_dsigma / p;
                }
            }
            if (d_v) {
                double dsigma_dv = 0.5 * sigma * (log_b - log_bt);
                d_v[g] += static_cast<T>(static_cast<double>(scale) * dnll_dsigma_sum *
                                         dsigma_dv / static_cast<double>(n));
            }
        }
    }
    double out = acc / static_cast<double>(n);
    if (!std::isfinite(out)) throw CheckError("loss_vlb produced a non-finite value");
    return static_cast<T>(out);
}

template <typename T>
T total_transition_loss(const T* eps_hat, const T* v, int64_t n, int64_t v_group, const T* z_tau,
                        const T* eps, const T* s_true, const NoiseSchedule& sch, int tau,
                        double lambda_vlb, double bin_width) {
    T l = loss_simple(eps_hat, eps, n);
    if (lambda_vlb > 0.0) {
        l += static_cast<T>(lambda_vlb) *
             loss_vlb(eps_hat, v, n, v_group, z_tau, s_true, sch, tau, bin_width);
    }
    return l;
}

template <typename T>
void p_sample_step(const T* eps_hat, const T* v, int64_t n, int64_t v_group, const T* z,
                   const NoiseSchedule& sch, int tau, Rng& rng, T* z_prev) {
    PEVA_CHECK(tau >= 0 && tau < sch.n_steps, "tau out of range");
    const double rsa = sch.recip_sqrt_alpha[tau];
    const double ec = sch.eps_coef[tau];
    const double log_b = sch.log_beta[tau];
    const double log_bt = sch.log_posterior_var_clipped[tau];
    for (int64_t i = 0; i < n; ++i) {
        double mu = rsa * (static_cast<double>(z[i]) - ec * static_cast<double>(eps_hat[i]));
        if (tau > 0) {
            double log_var = v ? static_cast<double>(v[i / v_group]) * log_b +
                                     (1.0 - static_cast<double>(v[i / v_group])) * log_bt
                               : std::log(sch.posterior_var[tau]);
            mu += std::exp(0.5 * log_var) * rng.normal();
        }
        z_prev[i] = static_cast<T>(mu);
    }
}

// explicit instantiations for the two supported precisions
#define PEVA_DIFF_INSTANTIATE(T)                                                              \
    template void q_sample<T>(const T*, const T*, int64_t, const NoiseSchedule&, int, T*);    \
    template T loss_simple<T>(const T*, const T*, int64_t);                                   \
    template void loss_simple_backward<T>(const T*, const T*, int64_t, T, T*);                \
    template T loss_vlb<T>(const T*, const T*, int64_t, int64_t, const T*, const T*,          \
                           const NoiseSchedule&, int, double, T, T*);                         \
    template T total_transition_loss<T>(const T*, const T*, int64_t, int64_t, const T*,      \
                                        const T*, const T*, const NoiseSchedule&, int,        \
                                        double, double);                                      \
    template void p_sample_step<T>(const T*, const T*, int64_t, int64_t, const T*,            \
                                   const NoiseSchedule&, int, Rng&, T*);

PEVA_DIFF_INSTANTIATE(float)
PEVA_DIFF_INSTANTIATE(double)

}  // namespace peva::diff
