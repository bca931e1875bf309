#include "v2a/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "v2a/error.hpp"

namespace v2a {
namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("grad_check: non-finite ") + what);
}

}  // namespace

template <typename T>
GradCheckReport grad_check_report(const ScalarFunction<T>& f, const BasicTensor<T>& x,
                                  double epsilon) {
  if (!(epsilon > 0.0)) throw ContractError("grad_check: epsilon must be positive");

  const std::vector<T> base(x.data().begin(), x.data().end());
  BasicTensor<T> probe(x.shape(), base, true);
  const auto loss = f(probe);
  if (loss.size() != 1) throw ContractError("grad_check: function must return a scalar");
  require_finite(loss.item(), "loss");
  backward(loss);
  const std::vector<T> analytic(probe.grad().begin(), probe.grad().end());

  NoGradGuard<T> no_grad;
  GradCheckReport report;
  for (std::size_t i = 0; i < base.size(); ++i) {
    // The step actually taken, which differs from 2*eps once rounded to T.
    const T upper = static_cast<T>(base[i] + epsilon);
    const T lower = static_cast<T>(base[i] - epsilon);
    auto evaluate = [&](T value) {
      std::vector<T> shifted = base;
      shifted[i] = value;
      const double loss_value = f(BasicTensor<T>(x.shape(), std::move(shifted))).item();
      require_finite(loss_value, "perturbed loss");
      return loss_value;
    };
    const double numeric = (evaluate(upper) - evaluate(lower)) /
                           (static_cast<double>(upper) - static_cast<double>(lower));
    const double a = analytic[i];
    require_finite(a, "analytic gradient");
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    if (i == 0 || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = i;
      report.analytic = a;
      report.numeric = numeric;
    }
  }
  return report;
}

template GradCheckReport grad_check_report(const ScalarFunction<float>&,
                                           const BasicTensor<float>&, double);
template GradCheckReport grad_check_report(const ScalarFunction<double>&,
                                           const BasicTensor<double>&, double);

}  // namespace v2a
