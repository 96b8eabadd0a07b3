#pragma once

#include "lot/types.hpp"

namespace lot {

struct SinkhornResult {
    TransportPlan plan;
    SolveInfo info;
    Vector alpha;
    Vector beta;
};

// Balanced entropic OT by alternating scaling of k.  The dual trace is scaled by
// the kernel's epsilon.
SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const GibbsKernel& k,
                        const SolverConfig& cfg);

// Sum C .* P with 0 * inf = 0.
double ot_cost(const TransportPlan& p, const CostMatrix& c);
double ot_cost(const Matrix& p, const Matrix& c);

// -sum P log P, with 0 log 0 = 0.
double entropy(const Matrix& p);
double entropy(const Vector& p);

// sum P log(P/K).  Returns +inf for mass on a zero of K.
double kl_divergence(const Matrix& p, const Matrix& k);
// sum P log(P/K) - P + K.
double generalized_kl(const Matrix& p, const Matrix& k);

}  // namespace lot
