#pragma once

#include <Eigen/Dense>

namespace stormcast {

// Mean of squared differences. Errors on length mismatch or empty input.
double mse(const Eigen::Ref<const Eigen::VectorXd>& pred,
           const Eigen::Ref<const Eigen::VectorXd>& actual);

// sqrt(mean((log(p+1) - log(a+1))^2)) on unit-scale vectors. All entries
// must be non-negative; upstream clamping guarantees that for predictions.
double rmsle(const Eigen::Ref<const Eigen::VectorXd>& predicted_units,
             const Eigen::Ref<const Eigen::VectorXd>& actual_units);

} // namespace stormcast
