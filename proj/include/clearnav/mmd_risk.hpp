#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace clearnav {

inline constexpr double kDiracVariance = 1e-5;
inline constexpr std::size_t kDefaultRiskSamples = 50;

// Constraint residual max(0, -d + d_o).
inline double residual(double clearance, double robot_radius) {
  return std::max(0.0, robot_radius - clearance);
}

inline double laplacian_kernel(double z, double z2, double width) {
  if (!(width > 0.0)) throw std::domain_error("laplacian kernel width must be positive");
  return std::exp(-std::abs(z - z2) / width);
}

namespace detail {

// sum_i sum_j exp(-|a_i - b_j| / width) for ascending `a` and `b`, in O(|a| + |b|).
// Two sweeps over the merged order: the ascending sweep accumulates every b at
// or below each a, the descending sweep every b strictly above it.
inline double sorted_kernel_sum(std::span<const double> a, std::span<const double> b, double width) {
  const double inv = 1.0 / width;
  double total = 0.0;

  // Ascending sweep; ties put b first so equal pairs are counted here.
  {
    double acc = 0.0;
    double prev = 0.0;
    bool started = false;
    std::size_t i = 0, j = 0;
    while (i < a.size()) {
      const bool take_b = j < b.size() && b[j] <= a[i];
      const double x = take_b ? b[j] : a[i];
      if (started) acc *= std::exp(-(x - prev) * inv);
      started = true;
      prev = x;
      if (take_b) {
        acc += 1.0;
        ++j;
      } else {
        total += acc;
        ++i;
      }
    }
  }
  // Descending sweep; ties put a first so equal pairs are not counted twice.
  {
    double acc = 0.0;
    double prev = 0.0;
    bool started = false;
    std::size_t i = a.size(), j = b.size();
    while (i > 0) {
      const bool take_b = j > 0 && b[j - 1] > a[i - 1];
      const double x = take_b ? b[j - 1] : a[i - 1];
      if (started) acc *= std::exp(-(prev - x) * inv);
      started = true;
      prev = x;
      if (take_b) {
        acc += 1.0;
        --j;
      } else {
        total += acc;
        --i;
      }
    }
  }
  return total;
}

inline std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

inline void check_mmd_args(std::size_t n_h, std::size_t n_d, double width) {
  if (n_h != n_d) throw std::invalid_argument("violation and dirac sample counts differ");
  if (n_h == 0) throw std::invalid_argument("empirical MMD needs at least one sample");
  if (!(width > 0.0)) throw std::domain_error("laplacian kernel width must be positive");
}

}  // namespace detail

// Squared RKHS distance between the empirical Laplacian-kernel embeddings of
// the violation samples and the Dirac samples (biased V-statistic), clamped at 0.
// Runs in O(N log N) using the ordering structure of the 1-D Laplacian kernel.
inline double empirical_mmd(std::span<const double> hbar, std::span<const double> delta, double width) {
  detail::check_mmd_args(hbar.size(), delta.size(), width);
  const auto a = detail::sorted_copy(hbar);
  const auto b = detail::sorted_copy(delta);
  const double n2 = static_cast<double>(a.size()) * static_cast<double>(a.size());
  const double aa = detail::sorted_kernel_sum(a, a, width);
  const double ab = detail::sorted_kernel_sum(a, b, width);
  const double bb = detail::sorted_kernel_sum(b, b, width);
  return std::max(0.0, (aa - 2.0 * ab + bb) / n2);
}

// Dirac-sample reference embedding reused across many violation sets (the
// planner scores every candidate against one shared set).
class MmdReference {
 public:
  MmdReference() = default;
  explicit MmdReference(std::span<const double> delta) : sorted_(detail::sorted_copy(delta)) {}

  std::size_t size() const { return sorted_.size(); }
  std::span<const double> samples() const { return sorted_; }

  // Same value as empirical_mmd(hbar, delta, width). `hbar` is sorted in place.
  double operator()(std::vector<double>& hbar, double width) const {
    detail::check_mmd_args(hbar.size(), sorted_.size(), width);
    std::sort(hbar.begin(), hbar.end());
    const double n2 = static_cast<double>(hbar.size()) * static_cast<double>(hbar.size());
    const double aa = detail::sorted_kernel_sum(hbar, hbar, width);
    const double ab = detail::sorted_kernel_sum(hbar, sorted_, width);
    const double bb = detail::sorted_kernel_sum(sorted_, sorted_, width);
    return std::max(0.0, (aa - 2.0 * ab + bb) / n2);
  }

 private:
  std::vector<double> sorted_;
};

struct MmdGradient {
  double value = 0.0;
  std::vector<double> d_hbar;  // d value / d hbar_i
  double d_width = 0.0;        // d value / d width
};

// Direct O(N^2) evaluation with derivatives w.r.t. the violation samples and
// the kernel width. The kink of |z - z'| at zero takes the zero subgradient.
inline MmdGradient empirical_mmd_with_gradient(std::span<const double> hbar,
                                               std::span<const double> delta, double width) {
  detail::check_mmd_args(hbar.size(), delta.size(), width);
  const std::size_t n = hbar.size();
  const double inv = 1.0 / width;
  const double inv2 = inv * inv;
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

  MmdGradient g;
  g.d_hbar.assign(n, 0.0);
  double aa = 0.0, ab = 0.0, bb = 0.0;
  double daa = 0.0, dab = 0.0, dbb = 0.0;  // width derivatives

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double diff_hh = hbar[i] - hbar[j];
      const double k_hh = std::exp(-std::abs(diff_hh) * inv);
      aa += k_hh;
      daa += k_hh * std::abs(diff_hh) * inv2;
      // Both (i, j) and (j, i) terms depend on hbar_i.
      const double sgn_hh = (diff_hh > 0.0) - (diff_hh < 0.0);
      g.d_hbar[i] += -2.0 * k_hh * sgn_hh * inv;

      const double diff_hd = hbar[i] - delta[j];
      const double k_hd = std::exp(-std::abs(diff_hd) * inv);
      ab += k_hd;
      dab += k_hd * std::abs(diff_hd) * inv2;
      const double sgn_hd = (diff_hd > 0.0) - (diff_hd < 0.0);
      g.d_hbar[i] -= 2.0 * (-k_hd * sgn_hd * inv);

      const double diff_dd = delta[i] - delta[j];
      const double k_dd = std::exp(-std::abs(diff_dd) * inv);
      bb += k_dd;
      dbb += k_dd * std::abs(diff_dd) * inv2;
    }
  }
  const double raw = scale * (aa - 2.0 * ab + bb);
  if (raw <= 0.0) {
    g.value = 0.0;
    std::fill(g.d_hbar.begin(), g.d_hbar.end(), 0.0);
    return g;
  }
  g.value = raw;
  for (auto& d : g.d_hbar) d *= scale;
  g.d_width = scale * (daa - 2.0 * dab + dbb);
  return g;
}

// N draws from N(0, variance) approximating the Dirac delta at zero.
template <class Rng>
std::vector<double> draw_dirac_samples(Rng& rng, std::size_t n, double variance = kDiracVariance) {
  std::vector<double> out(n, 0.0);
  if (variance <= 0.0) return out;
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
  for (auto& x : out) x = gauss(rng);
  return out;
}

// Monte-Carlo estimate of P(-d + d_o >= 0) for d ~ N(mu, sigma^2).
template <class Rng>
double chance_probability_oracle(double mu, double sigma, double robot_radius, std::size_t samples,
                                  Rng& rng) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (samples == 0) throw std::invalid_argument("need at least one sample");
  std::normal_distribution<double> gauss(mu, sigma);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i)
    if (robot_radius - gauss(rng) >= 0.0) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace clearnav
