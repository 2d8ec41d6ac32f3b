#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "btc/tensor.hpp"

namespace btc {

struct GradCheckResult {
  double max_rel_err = 0.0;
  bool pass = false;
};

// Compares reverse-mode gradients against central finite differences in
// 64-bit. Non-scalar outputs are contracted with a fixed random cotangent u,
// turning the check into the scalar s(x) = <u, f(x)> whose gradient is u^T J.
// Only inputs with requires_grad set are perturbed; the callable must be
// deterministic across repeated invocations.
template <class F>
GradCheckResult grad_check(F&& fn, std::vector<Tensor<double>> inputs, double tol = 1e-4,
                           double h = 1e-5, std::uint64_t seed = 1234) {
  Tensor<double> out0 = fn(inputs);
  Rng rng(seed);
  std::vector<double> u(static_cast<std::size_t>(out0.size()));
  for (auto& v : u) v = rng.normal();
  Tensor<double> cot = Tensor<double>::from(out0.shape(), u, false);

  for (auto& in : inputs)
    if (in.requires_grad()) in.zero_grad();
  Tensor<double> loss = sum(mul(out0, cot));
  loss.backward();

  auto contracted = [&]() {
    Tensor<double> out = fn(inputs);
    double s = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i)
      s += out.data()[i] * u[static_cast<std::size_t>(i)];
    return s;
  };

  GradCheckResult res;
  for (auto& in : inputs) {
    if (!in.requires_grad()) continue;
    auto data = in.mutable_data();  // span view into the node's storage
    const std::vector<double> grad(in.grad().begin(), in.grad().end());
    for (std::int64_t i = 0; i < in.size(); ++i) {
      const double keep = data[static_cast<std::size_t>(i)];
      data[static_cast<std::size_t>(i)] = keep + h;
      const double up = contracted();
      data[static_cast<std::size_t>(i)] = keep - h;
      const double down = contracted();
      data[static_cast<std::size_t>(i)] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad[static_cast<std::size_t>(i)];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      res.max_rel_err = std::max(res.max_rel_err, rel);
    }
  }
  res.pass = res.max_rel_err < tol;
  return res;
}

}  // namespace btc
