#pragma once
// Random 6-node scoring fixtures and a central finite-difference check of
// the analytic gradient, shared by the unit tests and the acceptance suite.
#include <cstdint>

#include "bichunter/gcnrank.hpp"

namespace bichunter::testing {

struct GradFixture {
  RankModel model;
  Eigen::MatrixXd op;
  Eigen::MatrixXd features;
  PairBatch pairs;
};

/// Random weighted graph, 2-layer model with perturbed gain and biases,
/// and all pairs among the first `num_deleted` nodes with one or two
/// planted root causes.
GradFixture random_grad_fixture(std::uint64_t seed, Eigen::Index nodes, Eigen::Index num_deleted, int input_dim,
                                int hidden);

/// True when perturbing any single parameter by +-eps leaves the sign of
/// every ReLU input unchanged, so a central difference of half-width eps
/// stays on one linear piece.
bool stencil_is_smooth(const GradFixture& f, double eps);

/// Draws fixtures from consecutive seeds starting at `seed` until one
/// satisfies stencil_is_smooth(f, eps).
GradFixture kink_free_fixture(std::uint64_t seed, double eps, Eigen::Index nodes, Eigen::Index num_deleted,
                              int input_dim, int hidden);

struct GradCheck {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t parameters = 0;
};

/// Compares backward() against (L(θ+ε) - L(θ-ε)) / 2ε per parameter.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheck finite_difference_check(const GradFixture& f, double eps);

}  // namespace bichunter::testing
