#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dagfit/graph.hpp"
#include "dagfit/linalg.hpp"
#include "dagfit/parameters.hpp"

namespace dagfit {
namespace transforms {

// ---------------------------------------------------------------------------
// element-wise and structural nodes
// ---------------------------------------------------------------------------

/// 1 input -> copy.
Node& make_identity(Graph& g, std::string name);

/// n inputs of one DataType -> element-wise sum, DataType preserved.
Node& make_sum(Graph& g, std::string name, std::size_t n_inputs);

/// n inputs of one DataType -> element-wise product.
Node& make_product(Graph& g, std::string name, std::size_t n_inputs);

/// out[i] = sum_k w_k * in_k[i]. Inputs [0, n) are the data arrays (one
/// shared DataType, edges carried through); inputs [n, 2n) are the scalar
/// weights (Points[1] each, typically parameter variable nodes).
Node& make_weighted_sum(Graph& g, std::string name, std::size_t n_terms);

/// (r,c) x (c,k) -> (r,k); a rank-1 right operand is treated as (c,1) and
/// yields a rank-1 result. Output is Points.
Node& make_matrix_product(Graph& g, std::string name);

/// n rank-1 inputs concatenated in argument order into Points[sum of lengths].
Node& make_concat(Graph& g, std::string name, std::size_t n_inputs);

/// Points[n] -> Histogram with the given n+1 edges (values copied).
Node& make_histogram(Graph& g, std::string name, std::vector<double> edges);

/// 0 inputs -> fixed buffer (copied into the output on evaluation).
Node& make_constant(Graph& g, std::string name, DataBuffer value);

/// Constant rank-1 Points source.
Node& make_constant(Graph& g, std::string name, std::vector<double> values);

// ---------------------------------------------------------------------------
// histogram & matrix nodes
// ---------------------------------------------------------------------------

/// Merge-only rebin: new_edges must be a subsequence of the input histogram's
/// edges sharing the first and last edge; contents are summed into the merged
/// bins, preserving the total exactly.
Node& make_rebin(Graph& g, std::string name, std::vector<double> new_edges);

/// inputs (M: (n,n), h: Histogram[n]) -> M * h with h's edges preserved.
/// Column sums of M may not exceed 1 + 1e-12 (leakage below 1 is allowed).
Node& make_smear_apply(Graph& g, std::string name);

/// input (n,n) symmetric positive definite -> lower-triangular L, L L^T = V.
Node& make_cholesky(Graph& g, std::string name);

// ---------------------------------------------------------------------------
// quadrature (sampler/collector pair)
// ---------------------------------------------------------------------------

/// Per-bin Gauss-Legendre rule over a strictly increasing edge grid,
/// flattened to nbins*order sample points.
struct QuadratureRule {
    std::vector<double> edges;
    int order = 0;
    std::vector<double> points;  // nbins * order
    std::vector<double> weights; // nbins * order
};

/// Throws BadEdges / BadOrder.
std::shared_ptr<const QuadratureRule> make_quadrature_rule(std::vector<double> edges, int order);

/// 0 inputs -> Points[nbins*order] sample positions. The integrand is an
/// ordinary subgraph evaluated on these points.
Node& make_gl_sampler(Graph& g, std::string name, std::shared_ptr<const QuadratureRule> rule);

/// input Points[nbins*order] of integrand values -> Histogram of per-bin
/// integrals (weights applied).
Node& make_gl_collector(Graph& g, std::string name, std::shared_ptr<const QuadratureRule> rule);

// ---------------------------------------------------------------------------
// interpolation
// ---------------------------------------------------------------------------

enum class Extrapolation { Constant, Linear };

/// inputs (xk, yk, xq), all rank 1 -> piecewise-linear values at xq.
/// xk must be strictly increasing with at least 2 knots (BadKnots).
Node& make_interp_linear(Graph& g, std::string name,
                         Extrapolation extrap = Extrapolation::Constant);

/// Pure kernel behind the node; directly usable on raw arrays.
void interp_linear(std::span<const double> xk, std::span<const double> yk,
                   std::span<const double> xq, Extrapolation extrap, std::span<double> out);

// ---------------------------------------------------------------------------
// numeric kernels
// ---------------------------------------------------------------------------

/// Gauss-Legendre abscissas and weights on [-1, 1] (Newton on P_n).
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// ---------------------------------------------------------------------------
// derivatives
// ---------------------------------------------------------------------------

/// Central-difference Jacobian d target / d params with per-parameter step
/// h_k = rel_step * sigma_k. Parameter values are restored afterwards and the
/// target is re-touched, so subsequent evaluation behavior is unchanged.
/// Mutates parameters while running: exclusive, not evaluation-safe.
Matrix finite_diff_jacobian(Graph& g, OutputPort& target, std::span<Parameter* const> params,
                            double rel_step = 0.01);

} // namespace transforms
} // namespace dagfit
