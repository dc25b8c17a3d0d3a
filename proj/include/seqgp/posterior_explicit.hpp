// Dense, small-scale reference conditioning: batch formulas, stagewise
// updates, and the representing-sequence construction. These are the oracles
// the matrix-free engine is verified against; they are not meant to scale.
#pragma once

#include "seqgp/kernels.hpp"
#include "seqgp/operators.hpp"

namespace seqgp {

struct ExplicitPosterior {
  Vector mean;  // m
  Matrix cov;   // m x m, kept symmetric
  int stage = 0;
};

/// Conditions the prior on one stage:
///   mean = m + K G^T (G K G^T + tau2 I)^-1 (y - G m)
///   cov  = K - K G^T (G K G^T + tau2 I)^-1 G K
ExplicitPosterior condition_batch(const PriorModel& model, const Grid& grid,
                                  const DataStage& stage);

/// Low-rank update of an existing posterior with one further stage.
ExplicitPosterior update_stage_explicit(const ExplicitPosterior& post, const DataStage& stage);

/// Noiseless conditioning through an explicitly constructed representing
/// sequence y_i* = C_nu^{-1/2} e_i, where C_nu = G K G^T must have full rank.
ExplicitPosterior condition_via_representing_sequence(const PriorModel& model, const Grid& grid,
                                                      const Operator& op, const Vector& y);

}  // namespace seqgp
