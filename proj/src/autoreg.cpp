#include "mtload/autoreg.hpp"

#include "mtload/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <set>
#include <stdexcept>

namespace mtload {

VarModel fitVar(const Matrix& panel, const std::vector<int>& lags) {
	if (lags.empty()) throw std::invalid_argument("fitVar: empty lag set");
	const int maxLag = *std::max_element(lags.begin(), lags.end());
	const Eigen::Index t = panel.rows();
	const Eigen::Index n = panel.cols();
	const Eigen::Index rows = t - maxLag;
	const Eigen::Index k = n * static_cast<Eigen::Index>(lags.size());
	if (rows <= k) {
		throw std::invalid_argument("fitVar: " + std::to_string(rows) +
		                            " usable rows cannot identify " + std::to_string(k) +
		                            " coefficients per equation");
	}
	Matrix z(rows, k);
	for (std::size_t j = 0; j < lags.size(); ++j) {
		z.middleCols(static_cast<Eigen::Index>(j) * n, n) =
		    panel.middleRows(maxLag - lags[j], rows);
	}
	Matrix y = panel.bottomRows(rows);

	Eigen::ColPivHouseholderQR<Matrix> qr(z);
	if (qr.rank() < k) {
		throw std::runtime_error("fitVar: rank-deficient regressor matrix (rank " +
		                         std::to_string(qr.rank()) + " of " + std::to_string(k) + ")");
	}
	Matrix b = qr.solve(y);  // k x n

	VarModel model;
	model.lags = lags;
	for (std::size_t j = 0; j < lags.size(); ++j) {
		model.coefs.push_back(b.middleRows(static_cast<Eigen::Index>(j) * n, n).transpose());
	}
	model.residuals = y - z * b;
	model.sigma = estimateCovariance(model.residuals, "state").sigma;
	return model;
}

namespace {

constexpr double kValueGuard = 1e12;

void guardFinite(double v, const char* what) {
	if (!std::isfinite(v) || std::abs(v) > kValueGuard) {
		throw std::runtime_error(std::string(what) + ": simulated value exceeded +/-1e12; unstable fit");
	}
}

}  // namespace

Matrix varForecast(const VarModel& model, const Matrix& history, Eigen::Index h) {
	const Eigen::Index n = history.cols();
	const int maxLag = *std::max_element(model.lags.begin(), model.lags.end());
	if (history.rows() < maxLag) {
		throw std::invalid_argument("varForecast: history shorter than the largest lag");
	}
	Matrix out(h, n);
	for (Eigen::Index step = 1; step <= h; ++step) {
		Vector pred = Vector::Zero(n);
		for (std::size_t j = 0; j < model.lags.size(); ++j) {
			const Eigen::Index back = step - model.lags[j];  // >0: simulated, <=0: realized
			const Vector value = (back >= 1)
			                         ? Vector(out.row(back - 1).transpose())
			                         : Vector(history.row(history.rows() + back - 1).transpose());
			pred += model.coefs[j] * value;
		}
		out.row(step - 1) = pred;
		guardFinite(pred.cwiseAbs().maxCoeff(), "varForecast");
	}
	return out;
}

TrajectoryEnsemble varSimulate(const VarModel& model, const Matrix& history, Eigen::Index h,
                               Eigen::Index nSims, std::uint64_t seed) {
	const Eigen::Index n = history.cols();
	if (model.sigma.rows() != n) {
		throw std::invalid_argument("varSimulate: covariance dimension does not match series count");
	}
	const Matrix l = psdFactor(model.sigma);
	TrajectoryEnsemble ens;
	ens.sims.reserve(nSims);
	for (Eigen::Index s = 0; s < nSims; ++s) {
		Matrix traj(h, n);
		for (Eigen::Index step = 1; step <= h; ++step) {
			Vector pred = l * rng::normalVector(seed, static_cast<std::uint64_t>(s),
			                                    static_cast<std::uint64_t>(step), n);
			for (std::size_t j = 0; j < model.lags.size(); ++j) {
				const Eigen::Index back = step - model.lags[j];
				const Vector value = (back >= 1)
				                         ? Vector(traj.row(back - 1).transpose())
				                         : Vector(history.row(history.rows() + back - 1).transpose());
				pred += model.coefs[j] * value;
			}
			traj.row(step - 1) = pred;
			guardFinite(pred.cwiseAbs().maxCoeff(), "varSimulate");
		}
		ens.sims.push_back(std::move(traj));
	}
	return ens;
}

namespace {

// All lag correlations c_j = sum_t y[t-j] * resid[t] for j = 1..pMax in one
// FFT cross-correlation; resid is nonzero on [pMax, T) only.
std::vector<double> lagCorrelations(const Vector& y, const Vector& resid, int pMax) {
	const Eigen::Index t = y.size();
	std::size_t m = 1;
	while (m < static_cast<std::size_t>(t + pMax + 1)) m <<= 1;
	std::vector<double> a(m, 0.0), b(m, 0.0);
	for (Eigen::Index i = 0; i < t; ++i) a[static_cast<std::size_t>(i)] = y[i];
	for (Eigen::Index i = pMax; i < t; ++i) b[static_cast<std::size_t>(i)] = resid[i];
	Eigen::FFT<double> fft;
	std::vector<std::complex<double>> fa, fb;
	fft.fwd(fa, a);
	fft.fwd(fb, b);
	for (std::size_t i = 0; i < fa.size(); ++i) fa[i] = std::conj(fa[i]) * fb[i];
	std::vector<double> cc;
	fft.inv(cc, fa);
	std::vector<double> out(static_cast<std::size_t>(pMax) + 1, 0.0);
	for (int j = 1; j <= pMax; ++j) out[static_cast<std::size_t>(j)] = cc[static_cast<std::size_t>(j)];
	return out;
}

double softThreshold(double z, double lambda) {
	if (z > lambda) return z - lambda;
	if (z < -lambda) return z + lambda;
	return 0.0;
}

}  // namespace

PostLassoArModel fitPostLassoAr(const Vector& y, int pMax, PostLassoDiagnostics* diagnostics) {
	if (pMax < 1) throw std::invalid_argument("fitPostLassoAr: pMax must be >= 1");
	const Eigen::Index t = y.size();
	if (t <= pMax + 10) {
		throw std::invalid_argument("fitPostLassoAr: need series length > pMax + 10 (length " +
		                            std::to_string(t) + ", pMax " + std::to_string(pMax) + ")");
	}
	if (!y.allFinite()) throw std::invalid_argument("fitPostLassoAr: non-finite values");
	const Eigen::Index n = t - pMax;

	PostLassoArModel model;
	model.pMax = pMax;

	// Column scales (no centering; the regression carries no intercept).
	Vector scale(pMax + 1);
	scale[0] = 0.0;
	bool anyUsable = false;
	for (int j = 1; j <= pMax; ++j) {
		const double ss = y.segment(pMax - j, n).squaredNorm() / static_cast<double>(n);
		scale[j] = std::sqrt(ss);
		if (scale[j] > 0.0) anyUsable = true;
	}
	Vector response = y.tail(n);
	const double rss0 = response.squaredNorm();
	if (!anyUsable || rss0 == 0.0) {
		model.sigma2 = 0.0;
		if (diagnostics) {
			diagnostics->lambdaMax = 0.0;
			diagnostics->pathSupports.assign(1, {});
			diagnostics->lassoRss = rss0;
			diagnostics->refitRss = rss0;
		}
		return model;
	}

	// resid lives on the full index range; only [pMax, T) entries are used.
	Vector resid = Vector::Zero(t);
	resid.tail(n) = response;

	std::vector<double> corr = lagCorrelations(y, resid, pMax);
	double lambdaMax = 0.0;
	for (int j = 1; j <= pMax; ++j) {
		if (scale[j] > 0.0) lambdaMax = std::max(lambdaMax, std::abs(corr[j] / scale[j]) / n);
	}

	const int pathPoints = 50;
	std::vector<double> path(pathPoints);
	for (int i = 0; i < pathPoints; ++i) {
		path[i] = lambdaMax * std::pow(1e-3, static_cast<double>(i) / (pathPoints - 1));
	}

	Vector beta = Vector::Zero(pMax + 1);  // scaled coefficients, index = lag
	std::vector<int> active;
	const double tol = 1e-7 * std::max(1.0, std::sqrt(rss0 / n));
	const double kktSlack = 1e-8 * std::max(lambdaMax, 1e-300);

	auto exactCorr = [&](int j) {
		return y.segment(pMax - j, n).dot(resid.tail(n)) / (scale[j] * n);
	};
	auto cdSweep = [&](double lambda) {
		double maxDelta = 0.0;
		for (int j : active) {
			const double old = beta[j];
			const double z = old + exactCorr(j);
			const double next = softThreshold(z, lambda);
			if (next != old) {
				// resid -= (next - old) * scaled column
				resid.tail(n) -= ((next - old) / scale[j]) * y.segment(pMax - j, n);
				beta[j] = next;
				maxDelta = std::max(maxDelta, std::abs(next - old));
			}
		}
		return maxDelta;
	};

	struct PathPoint {
		std::vector<int> support;
		double lassoRss;
	};
	std::vector<PathPoint> points;

	for (int i = 0; i < pathPoints; ++i) {
		const double lambda = path[i];
		for (int guard = 0; guard < 1000; ++guard) {
			int inner = 0;
			while (cdSweep(lambda) > tol && ++inner < 10000) {
			}
			// Full optimality pass over inactive lags.
			corr = lagCorrelations(y, resid, pMax);
			bool violated = false;
			for (int j = 1; j <= pMax; ++j) {
				if (scale[j] == 0.0 || beta[j] != 0.0) continue;
				if (std::abs(corr[j] / scale[j]) / n > lambda + kktSlack) {
					if (std::find(active.begin(), active.end(), j) == active.end()) active.push_back(j);
					violated = true;
				}
			}
			if (!violated) break;
		}
		active.erase(std::remove_if(active.begin(), active.end(),
		                            [&](int j) { return beta[j] == 0.0; }),
		             active.end());
		PathPoint pt;
		pt.support = active;
		std::sort(pt.support.begin(), pt.support.end());
		pt.lassoRss = resid.tail(n).squaredNorm();
		points.push_back(std::move(pt));
		if (static_cast<Eigen::Index>(active.size()) * 2 >= n) break;  // |S| <= n/2 cap
	}

	// BIC over the distinct supports, each refit by OLS on the raw columns.
	auto refit = [&](const std::vector<int>& support, double* rssOut) {
		const Eigen::Index k = static_cast<Eigen::Index>(support.size());
		if (k == 0) {
			*rssOut = rss0;
			return Vector();
		}
		Matrix gram(k, k);
		Vector rhs(k);
		for (Eigen::Index a = 0; a < k; ++a) {
			const auto colA = y.segment(pMax - support[static_cast<std::size_t>(a)], n);
			rhs[a] = colA.dot(response);
			for (Eigen::Index b = a; b < k; ++b) {
				gram(a, b) = gram(b, a) =
				    colA.dot(y.segment(pMax - support[static_cast<std::size_t>(b)], n));
			}
		}
		Vector phi = gram.ldlt().solve(rhs);
		double rss = rss0 - 2.0 * phi.dot(rhs) + phi.dot(gram * phi);
		*rssOut = std::max(rss, 0.0);
		return phi;
	};

	double bestBic = std::numeric_limits<double>::infinity();
	std::vector<int> bestSupport;
	Vector bestPhi;
	double bestRss = rss0;
	double bestLassoRss = rss0;
	std::set<std::vector<int>> seen;
	for (const PathPoint& pt : points) {
		if (!seen.insert(pt.support).second) continue;
		double rss = 0.0;
		Vector phi = refit(pt.support, &rss);
		const double safeRss = std::max(rss, 1e-300);
		const double bic = n * std::log(safeRss / n) +
		                   static_cast<double>(pt.support.size()) * std::log(static_cast<double>(n));
		if (bic < bestBic) {
			bestBic = bic;
			bestSupport = pt.support;
			bestPhi = phi;
			bestRss = rss;
			bestLassoRss = pt.lassoRss;
		}
	}

	model.lags = bestSupport;
	model.coefs = bestPhi;
	model.sigma2 = bestRss / static_cast<double>(n);
	if (diagnostics) {
		diagnostics->lambdaMax = lambdaMax;
		for (const PathPoint& pt : points) diagnostics->pathSupports.push_back(pt.support);
		diagnostics->lassoRss = bestLassoRss;
		diagnostics->refitRss = bestRss;
	}
	return model;
}

double postLassoPredict(const PostLassoArModel& model,
                        const std::function<double(int)>& lagValue) {
	double pred = 0.0;
	for (std::size_t j = 0; j < model.lags.size(); ++j) {
		pred += model.coefs[static_cast<Eigen::Index>(j)] * lagValue(model.lags[j]);
	}
	return pred;
}

TrajectoryEnsemble arSimulate(const std::vector<PostLassoArModel>& models, const Matrix& history,
                              Eigen::Index h, const Matrix& sigma, Eigen::Index nSims,
                              std::uint64_t seed) {
	const Eigen::Index n = history.cols();
	if (static_cast<Eigen::Index>(models.size()) != n) {
		throw std::invalid_argument("arSimulate: one model per history series required");
	}
	if (sigma.rows() != n || sigma.cols() != n) {
		throw std::invalid_argument("arSimulate: covariance dimension does not match series count");
	}
	for (const PostLassoArModel& m : models) {
		if (history.rows() < m.pMax) {
			throw std::invalid_argument("arSimulate: history shorter than a model's pMax");
		}
	}
	const Matrix l = psdFactor(sigma);
	TrajectoryEnsemble ens;
	ens.sims.reserve(nSims);
	for (Eigen::Index s = 0; s < nSims; ++s) {
		Matrix traj(h, n);
		for (Eigen::Index step = 1; step <= h; ++step) {
			Vector eps = l * rng::normalVector(seed, static_cast<std::uint64_t>(s),
			                                   static_cast<std::uint64_t>(step), n);
			for (Eigen::Index i = 0; i < n; ++i) {
				const PostLassoArModel& m = models[static_cast<std::size_t>(i)];
				double pred = eps[i];
				for (std::size_t j = 0; j < m.lags.size(); ++j) {
					const Eigen::Index back = step - m.lags[j];
					const double value = (back >= 1) ? traj(back - 1, i)
					                                 : history(history.rows() + back - 1, i);
					pred += m.coefs[static_cast<Eigen::Index>(j)] * value;
				}
				guardFinite(pred, "arSimulate");
				traj(step - 1, i) = pred;
			}
		}
		ens.sims.push_back(std::move(traj));
	}
	return ens;
}

}  // namespace mtload
