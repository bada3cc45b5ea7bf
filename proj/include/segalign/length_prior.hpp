#pragma once

// Monotone length priors over a state's current run length.
//
// Every decay function is normalized to a maximum of one and floored at
// kEpsilon. A run of length zero has value one for every kind, so the ratio
// form used during decoding telescopes back to prior_value for any run.

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "segalign/core.hpp"

namespace segalign {

enum class PriorKind { none, box, linear_decay, half_poisson, half_gaussian };

inline constexpr double kPriorEpsilon = 0.001;

inline std::string_view to_string(PriorKind k) {
  switch (k) {
    case PriorKind::none: return "none";
    case PriorKind::box: return "box";
    case PriorKind::linear_decay: return "linear";
    case PriorKind::half_poisson: return "half-poisson";
    case PriorKind::half_gaussian: return "half-gaussian";
  }
  return "none";
}

inline constexpr const char* kPriorChoices = "none, box, linear, half-poisson, half-gaussian";

inline PriorKind parse_prior_kind(std::string_view s) {
  if (s == "none") return PriorKind::none;
  if (s == "box") return PriorKind::box;
  if (s == "linear") return PriorKind::linear_decay;
  if (s == "half-poisson") return PriorKind::half_poisson;
  if (s == "half-gaussian") return PriorKind::half_gaussian;
  throw Error("unknown length prior '" + std::string(s) + "' (valid: " + kPriorChoices + ")");
}

// Value of the decay function for run length `l` given the state's mean
// length. l = 0 is the empty run and yields 1.
inline double prior_value(PriorKind kind, int l, double mean_len) {
  if (!(mean_len > 0.0)) throw Error("mean state length must be positive");
  if (l < 0) throw Error("run length must be non-negative");
  if (l == 0) return 1.0;
  const double x = static_cast<double>(l);
  switch (kind) {
    case PriorKind::none:
      return 1.0;
    case PriorKind::box:
      return x > 2.0 * mean_len ? kPriorEpsilon : 1.0;
    case PriorKind::linear_decay: {
      if (x <= mean_len) return 1.0;
      if (x >= 2.0 * mean_len) return kPriorEpsilon;
      return std::max(1.0 - (x - mean_len) / mean_len, kPriorEpsilon);
    }
    case PriorKind::half_poisson: {
      if (x <= mean_len) return 1.0;
      // Poisson pmf at l divided by the pmf at its mode floor(mean_len).
      const double mode = std::floor(mean_len);
      const double log_ratio = (x - mode) * std::log(mean_len) - std::lgamma(x + 1.0) +
                               std::lgamma(mode + 1.0);
      return std::max(std::exp(log_ratio), kPriorEpsilon);
    }
    case PriorKind::half_gaussian:
      return std::max(std::exp(-(x * x) / (mean_len * mean_len)), kPriorEpsilon);
  }
  return 1.0;
}

inline double log_prior_value(PriorKind kind, int l, double mean_len) {
  return std::log(prior_value(kind, l, mean_len));
}

// Recursive run length: grows on a self-transition, restarts otherwise.
// Pass prev_state < 0 for the first frame.
inline int run_length_update(int prev_state, int cur_state, int prev_l) {
  if (prev_state < 0 || prev_state != cur_state) return 1;
  return prev_l + 1;
}

// Log of p(l) / p(l - 1); the factor multiplied in when a run grows to `l`.
// For l = 1 (state entry) this is log p(1).
inline double log_ratio_prior(PriorKind kind, int l, double mean_len) {
  if (l < 1) throw Error("ratio prior needs run length >= 1");
  if (kind == PriorKind::none) return 0.0;
  return log_prior_value(kind, l, mean_len) - log_prior_value(kind, l - 1, mean_len);
}

inline double ratio_prior(PriorKind kind, int l, double mean_len) {
  return std::exp(log_ratio_prior(kind, l, mean_len));
}

}  // namespace segalign
