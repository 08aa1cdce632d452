#pragma once

#include <functional>

namespace ccf {

struct Minimum {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

// Brent's method (golden section with parabolic steps) for a bounded 1-D
// minimization on [lo, hi]. Stops when the bracket is within `tol` of x.
Minimum brent_minimize(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-8,
                       int max_iter = 200);

}  // namespace ccf
