#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace mntk {

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

// One snapshot along a discrete run (step, t = step * sqrt(eta)) or an ODE
// integration (step = RK4 step index). NaN marks a column that does not apply.
struct TrajectoryRecord {
  long step = 0;
  double t = 0.0;
  double loss = 0.0;
  double pseudo_loss = 0.0;
  double residual_norm = 0.0;
  double max_displacement = kNotApplicable;
  double lambda_min_H = kNotApplicable;
  std::optional<double> lyapunov;
  std::optional<double> bound;
};

using Trajectory = std::vector<TrajectoryRecord>;

}  // namespace mntk
