// SPDX-License-Identifier: Apache-2.0
#include "cad/numkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cad/errors.hpp"

namespace cad::numkit {
namespace {

double scalar_of(const Var& v) {
  if (v.value().size() != 1)
    throw ContractError("gradcheck: function must be scalar-valued, got shape " + shape_str(v.shape()));
  return v.value()[0];
}

void check_eps(double eps) {
  if (!(eps > 0.0)) throw ContractError("gradcheck: step must be positive");
}

}  // namespace

double relative_error(double analytic, double numeric) {
  double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

double gradcheck(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double eps) {
  check_eps(eps);
  Tensor analytic;
  {
    Graph g;
    Var in = g.input(x);
    Var out = f(g, in);
    scalar_of(out);
    g.backward(out);
    analytic = in.grad();
  }
  auto eval_at = [&](const Tensor& point) {
    Graph g;
    return scalar_of(f(g, g.constant(point)));
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    double up = eval_at(probe);
    probe[i] = x[i] - eps;
    double down = eval_at(probe);
    probe[i] = x[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

double gradcheck_params(const std::function<Var(Graph&)>& f, std::span<Parameter* const> params, double eps) {
  check_eps(eps);
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    Var out = f(g);
    scalar_of(out);
    g.backward(out);
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) {
    analytic.push_back(p->grad());
    p->zero_grad();
  }
  auto eval = [&] {
    Graph g;
    return scalar_of(f(g));
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k]->value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      double up = eval();
      value[i] = saved - eps;
      double down = eval();
      value[i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace cad::numkit
