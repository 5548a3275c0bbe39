#include "stormcast/metrics.hpp"

#include <cmath>
#include <string>

#include "stormcast/errors.hpp"

namespace stormcast {

double mse(const Eigen::Ref<const Eigen::VectorXd>& pred,
           const Eigen::Ref<const Eigen::VectorXd>& actual) {
    if (pred.size() != actual.size())
        throw DataError("mse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                        std::to_string(actual.size()) + ")");
    if (pred.size() == 0) throw DataError("mse: empty vectors");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const double d = pred(i) - actual(i);
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

double rmsle(const Eigen::Ref<const Eigen::VectorXd>& predicted_units,
             const Eigen::Ref<const Eigen::VectorXd>& actual_units) {
    if (predicted_units.size() != actual_units.size())
        throw DataError("rmsle: length mismatch (" + std::to_string(predicted_units.size()) +
                        " vs " + std::to_string(actual_units.size()) + ")");
    if (predicted_units.size() == 0) throw DataError("rmsle: empty vectors");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < predicted_units.size(); ++i) {
        if (predicted_units(i) < 0 || actual_units(i) < 0)
            throw DataError("rmsle: negative entry at index " + std::to_string(i));
        const double d = std::log1p(predicted_units(i)) - std::log1p(actual_units(i));
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predicted_units.size()));
}

} // namespace stormcast
