#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peva/common.hpp"
#include "peva/rng.hpp"

namespace peva::diff {

enum class ScheduleKind { kLinear, kCosine };

const char* schedule_kind_name(ScheduleKind k);
ScheduleKind schedule_kind_from_name(const std::string& name);

/// Noising schedule and every derived quantity the forward/reverse processes
/// need. All arrays are f64 and indexed by step tau in [0, n_steps).
///
/// alpha_bar[t] = prod_{i<=t} (1 - beta[i]). The posterior of z_{t-1} given
/// (z_t, s) is Gaussian with variance posterior_var[t]; its log is clipped at
/// t=0 (posterior_var[0] = 0) to the t=1 value so learned-variance
/// interpolation stays finite.
struct NoiseSchedule {
    int n_steps = 0;
    ScheduleKind kind = ScheduleKind::kLinear;
    std::vector<double> beta;
    std::vector<double> alpha;            // 1 - beta
    std::vector<double> alpha_bar;
    std::vector<double> sqrt_alpha_bar;
    std::vector<double> sqrt_one_minus_alpha_bar;
    std::vector<double> posterior_var;    // beta~
    std::vector<double> log_posterior_var_clipped;
    std::vector<double> log_beta;
    std::vector<double> posterior_coef_s;  // mean = coef_s * s + coef_z * z
    std::vector<double> posterior_coef_z;
    std::vector<double> recip_sqrt_alpha;  // mu = recip_sqrt_alpha * (z - eps_coef * eps_hat)
    std::vector<double> eps_coef;
    /// Map to the schedule this one was strided from (identity for a base
    /// schedule). Model conditioning uses base_index[tau].
    std::vector<int> base_index;

    static NoiseSchedule make(int n_steps, ScheduleKind kind);
    /// Evenly spaced n_sample-step subsequence with recomputed noise scales.
    NoiseSchedule strided(int n_sample) const;
    /// Enforces beta in (0,1) nondecreasing (strictly increasing for base
    /// schedules away from the cosine clip), alpha_bar strictly decreasing,
    /// and the cumulative-product identity to 1e-12.
    void validate(bool base = true) const;
};

/// z_tau = sqrt(alpha_bar) * s + sqrt(1 - alpha_bar) * eps, elementwise.
template <typename T>
void q_sample(const T* s, const T* eps, int64_t n, const NoiseSchedule& sch, int tau, T* z_out);

/// Mean squared error over all elements.
template <typename T>
T loss_simple(const T* eps_hat, const T* eps, int64_t n);

/// Accumulates scale * d(loss_simple)/d(eps_hat) into d_eps_hat.
template <typename T>
void loss_simple_backward(const T* eps_hat, const T* eps, int64_t n, T scale, T* d_eps_hat);

/// Variational term for one transition, mean nats per element.
///
/// tau >= 1: KL between the true posterior q(z_{tau-1} | z_tau, s) and the
/// model's N(mu_theta, sigma^2) where log sigma^2 interpolates between
/// log beta and log beta~ with coefficient v (one v per v_group consecutive
/// elements). tau == 0: discretized log-likelihood of s under the model
/// Gaussian with bin width bin_width.
///
/// The model mean is treated as constant here: only d/dv is produced
/// (accumulated scaled by scale into d_v when non-null). NaN inputs throw.
template <typename T>
T loss_vlb(const T* eps_hat, const T* v, int64_t n, int64_t v_group, const T* z_tau,
           const T* s_true, const NoiseSchedule& sch, int tau, double bin_width, T scale = T(1),
           T* d_v = nullptr);

/// loss_simple + lambda_vlb * loss_vlb.
template <typename T>
T total_transition_loss(const T* eps_hat, const T* v, int64_t n, int64_t v_group, const T* z_tau,
                        const T* eps, const T* s_true, const NoiseSchedule& sch, int tau,
                        double lambda_vlb, double bin_width);

/// One reverse step z_tau -> z_{tau-1} in schedule sch (possibly strided).
/// v == nullptr uses the fixed posterior variance. No noise is added at the
/// final step (tau == 0); otherwise noise comes from rng.
template <typename T>
void p_sample_step(const T* eps_hat, const T* v, int64_t n, int64_t v_group, const T* z,
                   const NoiseSchedule& sch, int tau, Rng& rng, T* z_prev);

inline constexpr double kDefaultLambdaVlb = 0.001;
inline constexpr double kDefaultBinWidth = 2.0 / 255.0;

}  // namespace peva::diff
