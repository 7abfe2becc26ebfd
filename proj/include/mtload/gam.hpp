#pragma once

#include "mtload/linalg.hpp"
#include "mtload/splines.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mtload {

// Named covariate columns, one value per observation row.
struct FeatureTable {
	Eigen::Index rows = 0;
	std::map<std::string, Vector> columns;

	void set(const std::string& name, Vector v);
	const Vector& col(const std::string& name) const;
	bool has(const std::string& name) const { return columns.count(name) > 0; }
};

using TermBuilder = std::function<Matrix(const FeatureTable&)>;

// One additive smooth term: a design-block builder plus one penalty (and one
// smoothing parameter) per marginal.
struct GamTerm {
	std::string name;
	TermBuilder build;
	std::vector<Matrix> penalties;
	std::vector<double> lambdaGrid;
};

struct GamSpec {
	std::vector<GamTerm> terms;
	void validate() const;
};

// Counts horizon covariates clamped to a non-cyclic basis domain boundary.
using ClampCounter = std::shared_ptr<long>;

// log10-spaced 1e-4 .. 1e6, 21 points.
std::vector<double> defaultLambdaGrid();

GamTerm splineTerm(const std::string& name, const std::string& column, const BasisSpec& spec,
                   std::vector<double> lambdaGrid, ClampCounter clamps = nullptr);

// Design rows scaled by another column (indicator or varying coefficient).
GamTerm scaledSplineTerm(const std::string& name, const std::string& scaleColumn,
                         const std::string& column, const BasisSpec& spec,
                         std::vector<double> lambdaGrid, ClampCounter clamps = nullptr);

GamTerm tensorTerm(const std::string& name, const std::vector<std::string>& columns,
                   const std::vector<BasisSpec>& specs, std::vector<double> lambdaGrid,
                   ClampCounter clamps = nullptr);

struct GamFit {
	GamSpec spec;
	double intercept = 0.0;
	std::vector<Vector> coefs;                 // per term
	std::vector<std::vector<double>> lambdas;  // per term, per penalty
	std::vector<Vector> centering;             // per-term training column means
	Vector fitted;
	Vector residuals;
	double residualScale = 0.0;
	double gcv = 0.0;
	double jitterApplied = 0.0;

	Vector predict(const FeatureTable& covariates) const;
	std::vector<Vector> termContributions(const FeatureTable& covariates) const;
};

// Penalized least squares with per-term smoothing parameters selected by GCV
// (cyclic coordinate descent over the penalty slots, each scanning its grid).
GamFit fitGam(const GamSpec& spec, const FeatureTable& covariates, const Vector& y);

// Same solve at fixed smoothing parameters (one value per term per penalty).
GamFit fitGamAtLambda(const GamSpec& spec, const FeatureTable& covariates, const Vector& y,
                      const std::vector<std::vector<double>>& lambdas);

// n * RSS / (n - tr(A))^2 for the penalized solve with design x and total
// penalty matrix. Rejects saturated fits (tr(A) >= n).
double gcvScore(const Vector& y, const Matrix& x, const Matrix& penalty);

}  // namespace mtload
