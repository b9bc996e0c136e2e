#pragma once

#include <functional>
#include <span>
#include <vector>

namespace novaclass {

using LossFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
/// Throws NumericError if the loss is not finite at any probe point.
std::vector<double> numeric_gradient(const LossFunction& loss, std::span<const double> params,
                                     double h = 1e-5);

}  // namespace novaclass
