// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>

#include "cad/numkit/graph.hpp"

namespace cad::numkit {

/// Relative error used by the checks below:
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares the reverse-mode gradient of a scalar function of x against
/// central differences with step eps. Returns the worst coordinate's
/// relative error. Throws ContractError when f is not scalar or eps <= 0.
double gradcheck(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double eps = 1e-5);

/// Same check over every coordinate of a set of Parameters. f builds a
/// fresh graph each call and returns its scalar loss. Parameter values are
/// restored afterwards and their gradients left zeroed.
double gradcheck_params(const std::function<Var(Graph&)>& f, std::span<Parameter* const> params,
                        double eps = 1e-5);

}  // namespace cad::numkit
