#pragma once

#include "mtload/linalg.hpp"

#include <vector>

namespace mtload {

// Cubic B-spline basis on equidistant knots over [lo, hi]. Cyclic bases wrap
// the domain seam so the fitted function is periodic with period hi - lo.
struct BasisSpec {
	int k = 0;            // number of basis functions
	double lo = 0.0;
	double hi = 1.0;
	bool cyclic = false;
	int penaltyOrder = 2;

	void validate() const;
};

// Cardinal cubic B-spline, support [0, 4], peak 2/3 at u = 2.
double cubicCardinal(double u);

// rows x k design matrix of basis evaluations. Non-cyclic inputs must lie in
// [lo, hi]; cyclic inputs are reduced modulo the domain length. Every row
// sums to one.
Matrix bsplineDesign(const Vector& x, const BasisSpec& spec);

// Order-p difference matrix D. Non-cyclic: (k-p) x k. Cyclic: k x k with
// wrapped rows, e.g. for p = 2 the seam terms (b1 - 2bk + b{k-1}) and
// (b2 - 2b1 + bk).
Matrix differenceMatrix(const BasisSpec& spec);

// S = D^T D, symmetrized. beta^T S beta = sum of squared p-th differences.
Matrix differencePenalty(const BasisSpec& spec);

struct TensorProduct {
	Matrix design;                   // rows x (k1*k2*...*km)
	std::vector<Matrix> penalties;   // one embedded penalty per marginal
};

// Row-wise Kronecker product of marginal designs (first marginal slowest).
// Each marginal penalty S_j is embedded as I x ... x S_j x ... x I so each
// marginal keeps its own smoothing parameter downstream.
TensorProduct tensorDesign(const std::vector<Matrix>& designs,
                           const std::vector<Matrix>& penalties);

}  // namespace mtload
