#pragma once

#include <cmath>
#include <functional>

#include <doctest.h>

#include "ampc/mlp.hpp"

namespace ampc::testutil {

// central finite differences of a scalar function of a flat parameter vector
inline ParamVector fd_grad(const std::function<double(const ParamVector&)>& f,
                           const ParamVector& p0, double h = 1e-5) {
  ParamVector g(p0.size());
  ParamVector p = p0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    p[i] = p0[i] + h;
    const double up = f(p);
    p[i] = p0[i] - h;
    const double dn = f(p);
    p[i] = p0[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// per-coordinate relative comparison; coordinates far below the gradient's
// own scale are held to a proportional absolute tolerance instead
inline void require_grad_close(const ParamVector& analytic, const ParamVector& fd, double tol) {
  REQUIRE(analytic.size() == fd.size());
  double scale = 0.0;
  for (double v : fd) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double denom = std::max(std::abs(fd[i]), 1e-3 * scale + 1e-12);
    REQUIRE(std::abs(analytic[i] - fd[i]) <= tol * denom);
  }
}

inline double max_rel_err(const ParamVector& analytic, const ParamVector& fd) {
  double scale = 0.0;
  for (double v : fd) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double denom = std::max(std::abs(fd[i]), 1e-3 * scale + 1e-12);
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
  }
  return worst;
}

// smallest |pre-activation| across a batch; finite-difference checks need a
// margin around ReLU kinks
inline double relu_margin(const Mlp& net, const Batch& batch) {
  double margin = 1e300;
  MlpScratch ws;
  Vector y;
  for (const auto& [x, t] : batch) {
    mlp_forward_ws(net, x, ws, y);
    for (int l = 0; l + 1 < net.layer_count(); ++l) {
      for (double v : ws.pre[l]) margin = std::min(margin, std::abs(v));
    }
  }
  return margin;
}

}  // namespace ampc::testutil
