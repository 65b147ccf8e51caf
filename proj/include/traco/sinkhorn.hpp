#pragma once

#include <cstddef>
#include <vector>

#include "traco/matrix.hpp"
#include "traco/tape.hpp"

namespace traco {

struct SinkhornConfig {
    double epsilon = 0.05;
    int max_iterations = 1000;
    double stop_tolerance = 0.005;
    // unrolled: the plan participates in gradient computation through every
    // iteration; detached: the plan is treated as a constant downstream.
    bool unrolled = true;

    bool operator==(const SinkhornConfig&) const = default;
};

// Discrete measures on the two topic-embedding sets: rows are child topics
// (uniform weight), columns are parent topics (weight vector s).
struct Marginals {
    Matrix row;  // K_child x 1
    Matrix col;  // K_parent x 1

    static Marginals uniform(std::size_t child_count, std::size_t parent_count);
    void validate() const;
};

struct SinkhornResult {
    Matrix plan;  // K_child x K_parent
    int iterations = 0;
    double row_error = 0.0;  // L1 deviation of plan row sums from the row marginal
    double col_error = 0.0;
    bool converged = false;
};

// Squared Euclidean transport cost between child and parent topic embeddings
// (both D x K, one column per topic).
Matrix transport_cost(const Matrix& child_embeddings, const Matrix& parent_embeddings);

// Log-domain Sinkhorn iterations for the entropy-regularized plan. Stops when
// the row-marginal L1 error drops below cfg.stop_tolerance or at
// cfg.max_iterations, whichever comes first (the final result reports which).
SinkhornResult sinkhorn(const Matrix& cost, const Marginals& marginals,
                        const SinkhornConfig& cfg);

// Same iterations recorded on a tape so gradients flow through every sweep.
// With fixed_iterations > 0 runs exactly that many sweeps with no stopping
// test (used to replay an epoch's solve); otherwise stops adaptively like the
// value-domain solver. Diagnostics land in *info when given. When
// log_col_weights is non-null it supplies log(s) as a 1 x K_parent tape node
// (a trainable weight vector); marginals.col must hold its exped values.
Var sinkhorn_unrolled(Tape& tape, Var cost, const Marginals& marginals,
                      const SinkhornConfig& cfg, int fixed_iterations = -1,
                      SinkhornResult* info = nullptr, const Var* log_col_weights = nullptr);

// Total transport cost of the plan: sum_kk' C_kk' * plan_kk'.
double tpd_loss(const Matrix& cost, const Matrix& plan);
Var tpd_loss(Var cost, Var plan);
// Detached convention: the plan is a constant, gradients flow only through C.
Var tpd_loss_detached(Var cost, const Matrix& plan);

// Argmax parent column per child row; ties break toward the lower index.
std::vector<std::size_t> parent_of(const Matrix& plan);

// -sum p log p with 0 log 0 = 0.
double plan_entropy(const Matrix& plan);

// Dependency-matrix invariant check: L1 deviations of the achieved marginals
// from their targets plus an entry range test.
struct PlanCheck {
    double row_l1 = 0.0;
    double col_l1 = 0.0;
    bool entries_in_unit_range = true;
};

PlanCheck check_plan(const Matrix& plan, const Marginals& marginals);

}  // namespace traco
