#pragma once

#include <optional>
#include <string>

namespace dpa {

// Coupled kernel scales eps << eps_tilde << eps_star and viscosity scale alpha.
struct ParameterSchedule {
  double epsilon = 0.0;
  double epsilon_tilde = 0.0;
  double epsilon_star = 0.0;
  double alpha = 0.0;      // may underflow to 0; log_alpha keeps the exponent
  double log_alpha = 0.0;  // -inf when alpha was set to exactly 0
  double m = 2.0;
  int dim = 1;
  double p = 0.0;  // eps_tilde = eps^p
  double q = 0.5;  // eps_star = eps_tilde^q
  double c = 1.0;  // alpha = exp(-c/eps)

  bool has_viscosity() const { return alpha > 0.0; }
  std::string describe() const;
};

struct ScheduleOverrides {
  std::optional<double> epsilon_tilde;
  std::optional<double> epsilon_star;
  std::optional<double> alpha;
  std::optional<double> p;
  std::optional<double> q;
  std::optional<double> c;
  std::optional<double> m;
};

ParameterSchedule schedule_from_epsilon(double epsilon, int dim, const ScheduleOverrides& overrides = {});

// Throws std::invalid_argument naming the first violated ordering.
void validate_schedule(const ParameterSchedule& s);

}  // namespace dpa
