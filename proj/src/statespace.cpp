#include "mtload/statespace.hpp"

#include "mtload/rng.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace mtload {

VetsLevelModel etsLevelSmooth(const Vector& y, double alpha, std::optional<double> initialLevel) {
	if (!(alpha > 0.0 && alpha <= 1.0)) {
		throw std::invalid_argument("etsLevelSmooth: alpha must lie in (0, 1]");
	}
	if (y.size() < 1) {
		throw std::invalid_argument("etsLevelSmooth: empty series");
	}
	if (!y.allFinite()) {
		throw std::invalid_argument("etsLevelSmooth: non-finite observations");
	}
	VetsLevelModel m;
	m.alpha = alpha;
	if (initialLevel) {
		m.initialLevel = *initialLevel;
	} else {
		const Eigen::Index head = std::min<Eigen::Index>(24, y.size());
		m.initialLevel = y.head(head).mean();
	}
	m.levels.resize(y.size());
	m.residuals.resize(y.size());
	double level = m.initialLevel;
	for (Eigen::Index t = 0; t < y.size(); ++t) {
		const double eps = y[t] - level;
		m.residuals[t] = eps;
		level += alpha * eps;
		m.levels[t] = level;
	}
	return m;
}

Vector etsLevelForecast(const VetsLevelModel& model, Eigen::Index h) {
	if (h < 1) throw std::invalid_argument("etsLevelForecast: horizon must be >= 1");
	return Vector::Constant(h, model.finalLevel());
}

Vector VetsModel::seasonalAt(Eigen::Index h) const {
	// Forecast step h reads the last fitted seasonal state of its phase:
	// s_{T+h-m*ceil(h/m)}.
	const Eigen::Index t = levels.rows();
	const Eigen::Index ceilHm = (h + period - 1) / period;
	const Eigen::Index idx = t + h - static_cast<Eigen::Index>(period) * ceilHm;  // 1-based
	if (idx >= 1) return seasonal.row(idx - 1).transpose();
	return initialSeasonal.row(((idx - 1) % period + period) % period).transpose();
}

VetsModel evaluateVets(const Matrix& panel, int period, double alpha, double gamma) {
	const Eigen::Index t = panel.rows();
	const Eigen::Index n = panel.cols();
	const Eigen::Index m = period;
	VetsModel model;
	model.alpha = alpha;
	model.gamma = gamma;
	model.period = period;
	model.initialLevel = panel.topRows(m).colwise().mean().transpose();
	model.initialSeasonal = panel.topRows(m).rowwise() - model.initialLevel.transpose();
	// Center the first-cycle deviations so seasonal states sum to zero per series.
	model.initialSeasonal.rowwise() -= model.initialSeasonal.colwise().mean().eval();

	model.levels.resize(t, n);
	model.seasonal.resize(t, n);
	model.residuals.resize(t, n);
	Vector level = model.initialLevel;
	for (Eigen::Index i = 0; i < t; ++i) {
		Vector sPrev = (i >= m) ? Vector(model.seasonal.row(i - m).transpose())
		                        : Vector(model.initialSeasonal.row(i).transpose());
		Vector eps = panel.row(i).transpose() - level - sPrev;
		model.residuals.row(i) = eps;
		level += alpha * eps;
		model.levels.row(i) = level;
		model.seasonal.row(i) = sPrev + gamma * eps;
	}
	model.sigma = estimateCovariance(model.residuals, "state").sigma;
	return model;
}

namespace {

double vetsTrace(const Matrix& panel, int period, double alpha, double gamma) {
	return evaluateVets(panel, period, alpha, gamma).sigma.trace();
}

// Golden-section refinement of f over [lo, hi] around a bracketing start.
double goldenSection(const std::function<double(double)>& f, double lo, double hi) {
	const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
	double a = lo, b = hi;
	double x1 = b - phi * (b - a);
	double x2 = a + phi * (b - a);
	double f1 = f(x1), f2 = f(x2);
	for (int it = 0; it < 40 && (b - a) > 1e-5; ++it) {
		if (f1 < f2) {
			b = x2; x2 = x1; f2 = f1;
			x1 = b - phi * (b - a);
			f1 = f(x1);
		} else {
			a = x1; x1 = x2; f1 = f2;
			x2 = a + phi * (b - a);
			f2 = f(x2);
		}
	}
	return f1 < f2 ? x1 : x2;
}

}  // namespace

VetsModel fitVets(const Matrix& panel, int period) {
	if (period < 1) throw std::invalid_argument("fitVets: period must be >= 1");
	if (panel.rows() < 2 * period) {
		throw std::invalid_argument("fitVets: need at least 2*m = " + std::to_string(2 * period) +
		                            " rows, got " + std::to_string(panel.rows()));
	}
	const double lo = 0.001, hi = 0.999;
	double bestAlpha = lo, bestGamma = lo;
	double bestTrace = std::numeric_limits<double>::infinity();
	for (int i = 0; i < 20; ++i) {
		const double a = lo + (hi - lo) * (i + 0.5) / 20.0;
		for (int j = 0; j < 20; ++j) {
			const double g = lo + (hi - lo) * (j + 0.5) / 20.0;
			const double tr = vetsTrace(panel, period, a, g);
			if (tr < bestTrace) {
				bestTrace = tr;
				bestAlpha = a;
				bestGamma = g;
			}
		}
	}
	const double gridAlpha = bestAlpha;
	const double gridGamma = bestGamma;
	const double cell = (hi - lo) / 20.0;
	for (int pass = 0; pass < 2; ++pass) {
		bestAlpha = goldenSection(
		    [&](double a) { return vetsTrace(panel, period, a, bestGamma); },
		    std::max(lo, bestAlpha - cell), std::min(hi, bestAlpha + cell));
		bestGamma = goldenSection(
		    [&](double g) { return vetsTrace(panel, period, bestAlpha, g); },
		    std::max(lo, bestGamma - cell), std::min(hi, bestGamma + cell));
	}
	if (vetsTrace(panel, period, bestAlpha, bestGamma) > bestTrace) {
		// Keep the grid optimum when refinement did not improve on it.
		bestAlpha = gridAlpha;
		bestGamma = gridGamma;
	}
	return evaluateVets(panel, period, bestAlpha, bestGamma);
}

Matrix vetsForecast(const VetsModel& model, Eigen::Index h) {
	if (h < 1) throw std::invalid_argument("vetsForecast: horizon must be >= 1");
	Matrix out(h, model.nSeries());
	const Vector lT = model.finalLevel();
	for (Eigen::Index step = 1; step <= h; ++step) {
		out.row(step - 1) = lT.transpose() + model.seasonalAt(step).transpose();
	}
	return out;
}

VetsSimulation vetsSimulate(const VetsModel& model, Eigen::Index h, const Matrix& sigma,
                            Eigen::Index nSims, std::uint64_t seed) {
	if (h < 1 || nSims < 1) {
		throw std::invalid_argument("vetsSimulate: horizon and nSims must be >= 1");
	}
	const Eigen::Index n = model.nSeries();
	if (sigma.rows() != n || sigma.cols() != n) {
		throw std::invalid_argument("vetsSimulate: covariance dimension mismatch");
	}
	const Matrix l = psdFactor(sigma);
	const Eigen::Index m = model.period;
	const Eigen::Index t = model.levels.rows();

	VetsSimulation sim;
	sim.observations.sims.reserve(nSims);
	sim.levels.sims.reserve(nSims);
	for (Eigen::Index s = 0; s < nSims; ++s) {
		Matrix obs(h, n), lev(h, n);
		Vector level = model.finalLevel();
		// Ring of the m latest seasonal states, continued along the simulated path.
		Matrix ring(m, n);
		for (Eigen::Index step = 1; step <= m; ++step) {
			const Eigen::Index idx = t - m + step - 1;  // 0-based fitted index
			ring.row(step - 1) = (idx >= 0) ? model.seasonal.row(idx)
			                                : model.initialSeasonal.row(((idx % m) + m) % m);
		}
		for (Eigen::Index step = 1; step <= h; ++step) {
			const Eigen::Index phase = (step - 1) % m;
			const Vector eps = l * rng::normalVector(seed, static_cast<std::uint64_t>(s),
			                                         static_cast<std::uint64_t>(step), n);
			const Vector y = level + ring.row(phase).transpose() + eps;
			level += model.alpha * eps;
			ring.row(phase) += model.gamma * eps.transpose();
			obs.row(step - 1) = y;
			lev.row(step - 1) = level;
		}
		sim.observations.sims.push_back(std::move(obs));
		sim.levels.sims.push_back(std::move(lev));
	}
	return sim;
}

}  // namespace mtload
