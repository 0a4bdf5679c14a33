#include "dpa/schedule.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dpa {

std::string ParameterSchedule::describe() const {
  std::ostringstream os;
  os.precision(6);
  os << "eps=" << epsilon << " eps_tilde=" << epsilon_tilde << " eps_star=" << epsilon_star
     << " alpha=" << alpha << " (log " << log_alpha << ") m=" << m << " d=" << dim;
  return os.str();
}

void validate_schedule(const ParameterSchedule& s) {
  if (!(s.epsilon > 0.0 && s.epsilon < 0.5)) throw std::invalid_argument("schedule: need 0 < eps < 1/2");
  if (s.dim < 1 || s.dim > 3) throw std::invalid_argument("schedule: dimension must be 1, 2 or 3");
  if (!(s.m > 1.0)) throw std::invalid_argument("schedule: need m > 1");
  if (!(s.epsilon < s.epsilon_tilde))
    throw std::invalid_argument("schedule: ordering eps < eps_tilde violated");
  if (!(s.epsilon_tilde < s.epsilon_star))
    throw std::invalid_argument("schedule: ordering eps_tilde < eps_star violated");
  if (!(s.alpha >= 0.0) || !std::isfinite(s.alpha)) throw std::invalid_argument("schedule: alpha must be >= 0");
}

ParameterSchedule schedule_from_epsilon(double epsilon, int dim, const ScheduleOverrides& o) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("schedule: need 0 < eps < 1/2");
  ParameterSchedule s;
  s.epsilon = epsilon;
  s.dim = dim;
  s.p = o.p.value_or(1.0 / (dim + 6));
  s.q = o.q.value_or(0.5);
  s.c = o.c.value_or(1.0);
  s.m = o.m.value_or(2.0);
  s.epsilon_tilde = o.epsilon_tilde.value_or(std::pow(epsilon, s.p));
  s.epsilon_star = o.epsilon_star.value_or(std::pow(s.epsilon_tilde, s.q));
  if (o.alpha) {
    s.alpha = *o.alpha;
    s.log_alpha = s.alpha > 0.0 ? std::log(s.alpha) : -std::numeric_limits<double>::infinity();
  } else {
    s.log_alpha = -s.c / epsilon;
    s.alpha = std::exp(s.log_alpha);
  }
  validate_schedule(s);
  return s;
}

}  // namespace dpa
