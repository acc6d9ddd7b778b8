#pragma once

#include "lvopt/latent.hpp"
#include "lvopt/tensor.hpp"
#include "lvopt/thermal.hpp"

namespace lvopt {

// Affine one-step model s' = s A + a B + d E + c fitted by least squares.
// Matrices are stored in (in x out) layout so batches multiply as rows x M.
struct LinearModel {
  int zones = 0, actions = 0, dists = 0;
  Tensor A;  // zones x zones
  Tensor B;  // actions x zones
  Tensor E;  // dists x zones
  Tensor c;  // 1 x zones
  ZoneMetrics train_residuals;

  Tensor predict(const Tensor& S, const Tensor& Act, const Tensor& D) const;
  // Iterates the model from s0 under the given inputs; returns the state
  // after each step (T x zones), matching simulate's convention.
  Tensor rollout(const std::vector<double>& s0, const Tensor& actions, const Tensor& dist) const;
};

// Solves A X = B for symmetric positive definite A by Cholesky factorization.
// Throws if a pivot collapses (A not positive definite within roundoff).
Tensor solve_spd(const Tensor& A, const Tensor& B);

// Normal-equations fit with ridge damping 1e-8 on the one-step pairs of the
// trajectory. Requires at least zones + actions + dists + 1 samples.
LinearModel oriiden_identify(const Trajectory& data);

}  // namespace lvopt
