#include "mtload/gam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mtload {

void FeatureTable::set(const std::string& name, Vector v) {
	if (rows == 0) rows = v.size();
	if (v.size() != rows) {
		throw std::invalid_argument("FeatureTable: column '" + name + "' has " +
		                            std::to_string(v.size()) + " rows, table has " +
		                            std::to_string(rows));
	}
	columns[name] = std::move(v);
}

const Vector& FeatureTable::col(const std::string& name) const {
	auto it = columns.find(name);
	if (it == columns.end()) {
		throw std::invalid_argument("FeatureTable: missing column '" + name + "'");
	}
	return it->second;
}

void GamSpec::validate() const {
	for (std::size_t i = 0; i < terms.size(); ++i) {
		const GamTerm& t = terms[i];
		if (t.penalties.empty()) {
			throw std::invalid_argument("GamSpec: term '" + t.name + "' has no penalty");
		}
		if (t.lambdaGrid.empty()) {
			throw std::invalid_argument("GamSpec: term '" + t.name + "' has an empty lambda grid");
		}
		for (double l : t.lambdaGrid) {
			if (l < 0.0 || !std::isfinite(l)) {
				throw std::invalid_argument("GamSpec: term '" + t.name + "' has invalid lambda");
			}
		}
		for (std::size_t j = 0; j < terms.size(); ++j) {
			if (j != i && terms[j].name == t.name) {
				throw std::invalid_argument("GamSpec: duplicate term name '" + t.name + "'");
			}
		}
	}
}

std::vector<double> defaultLambdaGrid() {
	std::vector<double> grid;
	for (int i = 0; i <= 20; ++i) {
		grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
	}
	return grid;
}

namespace {

Vector clampedColumn(const FeatureTable& f, const std::string& column, const BasisSpec& spec,
                     const ClampCounter& clamps) {
	Vector x = f.col(column);
	if (!spec.cyclic) {
		for (Eigen::Index i = 0; i < x.size(); ++i) {
			if (x[i] < spec.lo || x[i] > spec.hi) {
				x[i] = std::min(std::max(x[i], spec.lo), spec.hi);
				if (clamps) ++(*clamps);
			}
		}
	}
	return x;
}

}  // namespace

GamTerm splineTerm(const std::string& name, const std::string& column, const BasisSpec& spec,
                   std::vector<double> lambdaGrid, ClampCounter clamps) {
	spec.validate();
	GamTerm t;
	t.name = name;
	t.penalties.push_back(differencePenalty(spec));
	t.lambdaGrid = std::move(lambdaGrid);
	t.build = [column, spec, clamps](const FeatureTable& f) {
		return bsplineDesign(clampedColumn(f, column, spec, clamps), spec);
	};
	return t;
}

GamTerm scaledSplineTerm(const std::string& name, const std::string& scaleColumn,
                         const std::string& column, const BasisSpec& spec,
                         std::vector<double> lambdaGrid, ClampCounter clamps) {
	spec.validate();
	GamTerm t;
	t.name = name;
	t.penalties.push_back(differencePenalty(spec));
	t.lambdaGrid = std::move(lambdaGrid);
	t.build = [scaleColumn, column, spec, clamps](const FeatureTable& f) {
		Matrix design = bsplineDesign(clampedColumn(f, column, spec, clamps), spec);
		design.array().colwise() *= f.col(scaleColumn).array();
		return design;
	};
	return t;
}

GamTerm tensorTerm(const std::string& name, const std::vector<std::string>& columns,
                   const std::vector<BasisSpec>& specs, std::vector<double> lambdaGrid,
                   ClampCounter clamps) {
	if (columns.size() != specs.size() || columns.empty()) {
		throw std::invalid_argument("tensorTerm: need one column per basis spec");
	}
	std::vector<Matrix> marginalPenalties;
	for (const BasisSpec& s : specs) {
		s.validate();
		marginalPenalties.push_back(differencePenalty(s));
	}
	// Embed the marginal penalties once on a dummy design to get sizes right.
	GamTerm t;
	t.name = name;
	t.lambdaGrid = std::move(lambdaGrid);
	{
		std::vector<Matrix> dummy;
		for (const BasisSpec& s : specs) dummy.push_back(Matrix::Zero(1, s.k));
		t.penalties = tensorDesign(dummy, marginalPenalties).penalties;
	}
	t.build = [columns, specs, marginalPenalties, clamps](const FeatureTable& f) {
		std::vector<Matrix> designs;
		for (std::size_t j = 0; j < columns.size(); ++j) {
			designs.push_back(bsplineDesign(clampedColumn(f, columns[j], specs[j], clamps), specs[j]));
		}
		return tensorDesign(designs, marginalPenalties).design;
	};
	return t;
}

namespace {

struct Assembled {
	Matrix x;                            // column-centered full design
	std::vector<Eigen::Index> offsets;   // per term
	std::vector<Eigen::Index> sizes;
	std::vector<Vector> centering;
};

Assembled assembleDesign(const GamSpec& spec, const FeatureTable& covariates) {
	Assembled a;
	std::vector<Matrix> blocks;
	Eigen::Index total = 0;
	for (const GamTerm& t : spec.terms) {
		Matrix block = t.build(covariates);
		if (!block.allFinite()) {
			throw std::invalid_argument("fitGam: non-finite design values in term '" + t.name + "'");
		}
		a.offsets.push_back(total);
		a.sizes.push_back(block.cols());
		total += block.cols();
		blocks.push_back(std::move(block));
	}
	a.x.resize(covariates.rows, total);
	for (std::size_t i = 0; i < blocks.size(); ++i) {
		Vector center = blocks[i].colwise().mean();
		blocks[i].rowwise() -= center.transpose();
		a.x.middleCols(a.offsets[i], a.sizes[i]) = blocks[i];
		a.centering.push_back(std::move(center));
	}
	return a;
}

struct PenaltySlot {
	std::size_t term;
	std::size_t penalty;
	Eigen::Index offset;      // into the full coefficient vector
	const Matrix* s;          // term-sized penalty matrix
	double lambda;
};

Matrix totalPenalty(const std::vector<PenaltySlot>& slots, Eigen::Index k) {
	Matrix p = Matrix::Zero(k, k);
	for (const PenaltySlot& slot : slots) {
		p.block(slot.offset, slot.offset, slot.s->rows(), slot.s->cols()) += slot.lambda * *slot.s;
	}
	return p;
}

struct GcvParts {
	double rss;
	double trA;
};

// The centered design columns of a partition-of-unity basis sum to zero per
// row, and the constant coefficient direction also lies in the difference
// penalty null space, so the normal matrix is exactly singular. A plain LLT
// can then "succeed" on a rounding-level pivot and corrupt the solve; start
// the factorization at the escalation base jitter instead of zero.
Matrix factorWithFloor(const Matrix& c, double* jitterApplied, const char* context) {
	Matrix trial = c;
	double base = 1e-10 * c.trace() / static_cast<double>(c.rows());
	if (base <= 0.0) base = 1e-14;
	trial.diagonal().array() += base;
	double extra = 0.0;
	Matrix l = choleskyWithJitter(trial, &extra, context);
	if (jitterApplied) *jitterApplied = base + extra;
	return l;
}

// GCV pieces for P = C + lambda * S_slot via the low-rank identity
// (I + lambda U S U^T)^{-1} = I - lambda U S (I + lambda A S)^{-1} U^T,
// so a whole lambda-grid scan costs about one factorization of C.
class SlotScanner {
public:
	SlotScanner(const Matrix& g, const Matrix& c, const Vector& xty, double yty,
	            const PenaltySlot& slot)
	    : s_(*slot.s), yty_(yty) {
		double jitter = 0.0;
		Matrix l = factorWithFloor(c, &jitter, "fitGam normal equations");
		Eigen::TriangularView<Matrix, Eigen::Lower> lv = l.triangularView<Eigen::Lower>();
		// w = C^{-1} xty ; V = C^{-1} E_slot ; trG0 = tr(C^{-1} G)
		Vector w = lv.solve(xty);
		l.transpose().triangularView<Eigen::Upper>().solveInPlace(w);
		const Eigen::Index ks = s_.rows();
		Matrix v = Matrix::Zero(c.rows(), ks);
		v.middleRows(slot.offset, ks).setIdentity();
		lv.solveInPlace(v);
		l.transpose().triangularView<Eigen::Upper>().solveInPlace(v);
		Matrix cg = lv.solve(g);
		l.transpose().triangularView<Eigen::Upper>().solveInPlace(cg);
		trG0_ = cg.trace();
		a_ = v.middleRows(slot.offset, ks);  // E^T C^{-1} E
		Matrix gv = g * v;
		q_ = v.transpose() * gv;             // V^T G V
		ug_ = v.transpose() * xty;           // V^T g
		tv_ = gv.transpose() * w;            // V^T G w
		gg_ = xty.dot(w);
		gGg_ = w.dot(g * w);
	}

	GcvParts at(double lambda) const {
		const Eigen::Index ks = s_.rows();
		Matrix b = Matrix::Identity(ks, ks) + lambda * a_ * s_;
		Matrix w = b.partialPivLu().solve(Matrix::Identity(ks, ks));
		Matrix wl = s_ * w;  // S (I + lambda A S)^{-1}
		const double trA = 1.0 + trG0_ - lambda * (wl.array() * q_.transpose().array()).sum();
		Vector c = wl * ug_;
		const double betaG = gg_ - lambda * ug_.dot(c);
		const double betaGbeta = gGg_ - 2.0 * lambda * c.dot(tv_) +
		                         lambda * lambda * c.dot(q_ * c);
		double rss = yty_ - 2.0 * betaG + betaGbeta;
		if (rss < 0.0) rss = 0.0;
		return GcvParts{rss, trA};
	}

private:
	const Matrix& s_;
	double yty_;
	double trG0_;
	Matrix a_, q_;
	Vector ug_, tv_;
	double gg_, gGg_;
};

GamFit finishFit(const GamSpec& spec, Assembled&& a, const Vector& y,
                 const std::vector<PenaltySlot>& slots, double gcvValue) {
	const Eigen::Index n = y.size();
	const Eigen::Index k = a.x.cols();
	const double ybar = y.mean();
	Vector yc = y.array() - ybar;

	Matrix normal = Matrix::Zero(k, k);
	normal.selfadjointView<Eigen::Lower>().rankUpdate(a.x.transpose());
	normal = normal.selfadjointView<Eigen::Lower>();
	normal += totalPenalty(slots, k);

	double jitter = 0.0;
	Matrix l = factorWithFloor(normal, &jitter, "fitGam normal equations");
	Vector beta = a.x.transpose() * yc;
	l.triangularView<Eigen::Lower>().solveInPlace(beta);
	l.transpose().triangularView<Eigen::Upper>().solveInPlace(beta);

	GamFit fit;
	fit.spec = spec;
	fit.intercept = ybar;
	fit.centering = std::move(a.centering);
	fit.jitterApplied = jitter;
	fit.gcv = gcvValue;
	fit.lambdas.resize(spec.terms.size());
	for (std::size_t t = 0; t < spec.terms.size(); ++t) {
		fit.coefs.push_back(beta.segment(a.offsets[t], a.sizes[t]));
		fit.lambdas[t].resize(spec.terms[t].penalties.size());
	}
	for (const PenaltySlot& slot : slots) {
		fit.lambdas[slot.term][slot.penalty] = slot.lambda;
	}
	fit.fitted = Vector::Constant(n, ybar) + a.x * beta;
	fit.residuals = y - fit.fitted;
	fit.residualScale = n > 1 ? std::sqrt(fit.residuals.squaredNorm() / static_cast<double>(n - 1))
	                          : 0.0;
	return fit;
}

GamFit fitImpl(const GamSpec& spec, const FeatureTable& covariates, const Vector& y,
               const std::vector<std::vector<double>>* fixedLambdas) {
	spec.validate();
	if (y.size() != covariates.rows) {
		throw std::invalid_argument("fitGam: y length does not match covariate rows");
	}
	if (y.size() < 2) {
		throw std::invalid_argument("fitGam: need at least 2 observations");
	}
	if (!y.allFinite()) {
		throw std::invalid_argument("fitGam: non-finite response values");
	}
	Assembled a = assembleDesign(spec, covariates);
	const Eigen::Index n = y.size();
	const Eigen::Index k = a.x.cols();

	std::vector<PenaltySlot> slots;
	for (std::size_t t = 0; t < spec.terms.size(); ++t) {
		const GamTerm& term = spec.terms[t];
		for (std::size_t p = 0; p < term.penalties.size(); ++p) {
			if (term.penalties[p].rows() != a.sizes[t]) {
				throw std::invalid_argument("fitGam: penalty size mismatch in term '" + term.name + "'");
			}
			double init;
			if (fixedLambdas) {
				init = fixedLambdas->at(t).at(p);
			} else {
				// Start mid-grid.
				init = term.lambdaGrid[term.lambdaGrid.size() / 2];
			}
			slots.push_back(PenaltySlot{t, p, a.offsets[t], &term.penalties[p], init});
		}
	}

	double gcvValue = std::numeric_limits<double>::quiet_NaN();
	if (!fixedLambdas) {
		const double ybar = y.mean();
		Vector yc = y.array() - ybar;
		Matrix g = Matrix::Zero(k, k);
		g.selfadjointView<Eigen::Lower>().rankUpdate(a.x.transpose());
		g = g.selfadjointView<Eigen::Lower>();
		Vector xty = a.x.transpose() * yc;
		const double yty = yc.squaredNorm();

		double lastGcv = std::numeric_limits<double>::infinity();
		for (int sweep = 0; sweep < 5; ++sweep) {
			double current = lastGcv;
			for (std::size_t si = 0; si < slots.size(); ++si) {
				Matrix c = g + totalPenalty(slots, k);
				c.block(slots[si].offset, slots[si].offset, slots[si].s->rows(), slots[si].s->cols()) -=
				    slots[si].lambda * *slots[si].s;
				SlotScanner scanner(g, c, xty, yty, slots[si]);
				double best = std::numeric_limits<double>::infinity();
				double bestLambda = slots[si].lambda;
				for (double lambda : spec.terms[slots[si].term].lambdaGrid) {
					const GcvParts parts = scanner.at(lambda);
					if (parts.trA >= static_cast<double>(n)) continue;  // saturated
					const double score = static_cast<double>(n) * parts.rss /
					                     ((n - parts.trA) * (n - parts.trA));
					if (score < best) {
						best = score;
						bestLambda = lambda;
					}
				}
				if (!std::isfinite(best)) {
					throw std::runtime_error("fitGam: every smoothing candidate is saturated for term '" +
					                         spec.terms[slots[si].term].name + "'");
				}
				slots[si].lambda = bestLambda;
				current = best;
			}
			if (std::abs(lastGcv - current) < 1e-7) {
				lastGcv = current;
				break;
			}
			lastGcv = current;
		}
		gcvValue = lastGcv;
	}
	return finishFit(spec, std::move(a), y, slots, gcvValue);
}

}  // namespace

GamFit fitGam(const GamSpec& spec, const FeatureTable& covariates, const Vector& y) {
	return fitImpl(spec, covariates, y, nullptr);
}

GamFit fitGamAtLambda(const GamSpec& spec, const FeatureTable& covariates, const Vector& y,
                      const std::vector<std::vector<double>>& lambdas) {
	return fitImpl(spec, covariates, y, &lambdas);
}

double gcvScore(const Vector& y, const Matrix& x, const Matrix& penalty) {
	const Eigen::Index n = y.size();
	Matrix normal = x.transpose() * x + penalty;
	double jitter = 0.0;
	Matrix l = choleskyWithJitter(normal, &jitter, "gcvScore");
	Matrix inv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(x.cols(), x.cols()));
	l.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
	Matrix xtx = x.transpose() * x;
	const double trA = (inv.array() * xtx.transpose().array()).sum();
	if (trA >= static_cast<double>(n)) {
		throw std::invalid_argument("gcvScore: saturated fit, tr(A) = " + std::to_string(trA) +
		                            " >= n = " + std::to_string(n));
	}
	Vector beta = inv * (x.transpose() * y);
	const double rss = (y - x * beta).squaredNorm();
	return static_cast<double>(n) * rss / ((n - trA) * (n - trA));
}

Vector GamFit::predict(const FeatureTable& covariates) const {
	Vector out = Vector::Constant(covariates.rows, intercept);
	for (std::size_t t = 0; t < spec.terms.size(); ++t) {
		Matrix block = spec.terms[t].build(covariates);
		block.rowwise() -= centering[t].transpose();
		out += block * coefs[t];
	}
	return out;
}

std::vector<Vector> GamFit::termContributions(const FeatureTable& covariates) const {
	std::vector<Vector> out;
	for (std::size_t t = 0; t < spec.terms.size(); ++t) {
		Matrix block = spec.terms[t].build(covariates);
		block.rowwise() -= centering[t].transpose();
		out.push_back(block * coefs[t]);
	}
	return out;
}

}  // namespace mtload
