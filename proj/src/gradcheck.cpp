#include "novaclass/gradcheck.hpp"

#include <cmath>
#include <string>

#include "novaclass/errors.hpp"

namespace novaclass {

std::vector<double> numeric_gradient(const LossFunction& loss, std::span<const double> params,
                                     double h) {
    if (!(h > 0.0)) throw InvalidArgument("numeric_gradient step must be positive");
    std::vector<double> x(params.begin(), params.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = loss(x);
        x[i] = saved - h;
        const double down = loss(x);
        x[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericError("loss is not finite while probing coordinate " + std::to_string(i));
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace novaclass
