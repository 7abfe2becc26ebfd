#include "mtload/pipeline.hpp"

#include "mtload/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mtload {

std::string stateModelName(StateModelKind kind) {
	switch (kind) {
		case StateModelKind::Var: return "VAR";
		case StateModelKind::Vecm: return "VECM";
		case StateModelKind::Vets: return "VETS";
	}
	throw std::logic_error("stateModelName: unknown kind");
}

StateModelKind parseStateModel(const std::string& name) {
	std::string upper = name;
	std::transform(upper.begin(), upper.end(), upper.begin(),
	               [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
	if (upper == "VAR") return StateModelKind::Var;
	if (upper == "VECM") return StateModelKind::Vecm;
	if (upper == "VETS") return StateModelKind::Vets;
	throw std::invalid_argument("parseStateModel: unknown state model '" + name + "'");
}

void PipelineConfig::validate() const {
	if (!(tempAlphaFast > 0.0 && tempAlphaFast <= 1.0) ||
	    !(tempAlphaSlow > 0.0 && tempAlphaSlow <= 1.0)) {
		throw std::invalid_argument("PipelineConfig: smoothing parameters must lie in (0, 1]");
	}
	if (pMaxTemp < 1 || pMaxLoad < 1) {
		throw std::invalid_argument("PipelineConfig: AR lag caps must be positive");
	}
	if (stateLags.empty()) {
		throw std::invalid_argument("PipelineConfig: empty state lag set");
	}
	for (int lag : stateLags) {
		if (lag < 1) throw std::invalid_argument("PipelineConfig: state lags must be >= 1");
	}
	if (vetsPeriod < 1) throw std::invalid_argument("PipelineConfig: VETS period must be >= 1");
	if (nSims < 1) throw std::invalid_argument("PipelineConfig: need at least one simulation");
	if (horizonHours < 168 || horizonHours % 168 != 0) {
		throw std::invalid_argument("PipelineConfig: horizon must be a positive number of weeks");
	}
	if (inSampleHours < 1) throw std::invalid_argument("PipelineConfig: empty in-sample window");
	if (outlierWindow < 3 || outlierWindow % 2 == 0) {
		throw std::invalid_argument("PipelineConfig: outlier window must be odd and >= 3");
	}
	if (!(outlierThreshold > 0.0)) {
		throw std::invalid_argument("PipelineConfig: outlier threshold must be positive");
	}
	if (probabilities.empty()) {
		throw std::invalid_argument("PipelineConfig: empty probability grid");
	}
	for (double p : probabilities) {
		if (!(p > 0.0 && p < 1.0)) {
			throw std::invalid_argument("PipelineConfig: probabilities must lie in (0, 1)");
		}
	}
}

// ---------------------------------------------------------------------------
// Covariate tables and GAM term catalogs
// ---------------------------------------------------------------------------

namespace {

FeatureTable calendarTable(const TimeGrid& grid, const HolidayCalendar& holidays,
                           const std::string& country) {
	const CalendarFeatures f = calendarFeatures(grid, holidays, country);
	const Eigen::Index n = grid.length;
	Vector hour(n), year(n), winter(n);
	Vector mon = Vector::Zero(n), tueThu = Vector::Zero(n), fri = Vector::Zero(n),
	       sat = Vector::Zero(n), sun = Vector::Zero(n), hol = Vector::Zero(n);
	for (Eigen::Index i = 0; i < n; ++i) {
		hour[i] = f.hourOfDay[static_cast<std::size_t>(i)];
		year[i] = f.yearPosition[static_cast<std::size_t>(i)];
		winter[i] = f.isWinterPeriod[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
		if (f.isHoliday[static_cast<std::size_t>(i)]) {
			hol[i] = 1.0;
			continue;
		}
		switch (f.dayOfWeek[static_cast<std::size_t>(i)]) {
			case 0: mon[i] = 1.0; break;
			case 1:
			case 2:
			case 3: tueThu[i] = 1.0; break;
			case 4: fri[i] = 1.0; break;
			case 5: sat[i] = 1.0; break;
			default: sun[i] = 1.0; break;
		}
	}
	FeatureTable t;
	t.set("hour", std::move(hour));
	t.set("yearpos", std::move(year));
	t.set("winter", std::move(winter));
	t.set("day_mon", std::move(mon));
	t.set("day_tue_thu", std::move(tueThu));
	t.set("day_fri", std::move(fri));
	t.set("day_sat", std::move(sat));
	t.set("day_sun", std::move(sun));
	t.set("day_holiday", std::move(hol));
	return t;
}

struct TempDomain {
	double fastLo, fastHi, slowLo, slowHi;
};

// Guards degenerate (constant-covariate) domains.
void widenIfFlat(double* lo, double* hi) {
	if (*hi - *lo < 1e-6) {
		*lo -= 0.5;
		*hi += 0.5;
	}
}

}  // namespace

GamSpec tempGamSpec() {
	const std::vector<double> grid = defaultLambdaGrid();
	const BasisSpec hour{24, 0.0, 24.0, true, 2};
	const BasisSpec year{16, 0.0, 1.0, true, 2};
	const BasisSpec hour8{8, 0.0, 24.0, true, 2};
	const BasisSpec year8{8, 0.0, 1.0, true, 2};
	GamSpec s;
	s.terms.push_back(splineTerm("hour", "hour", hour, grid));
	s.terms.push_back(splineTerm("year", "yearpos", year, grid));
	s.terms.push_back(tensorTerm("hour_x_year", {"hour", "yearpos"}, {hour8, year8}, grid));
	return s;
}

// Stage-(ii)/(iii) catalog. Calendar-driven terms come first, stochastic-
// covariate terms (smoothed temperatures, weekly state) last, so horizon
// evaluation can reuse the calendar part across simulations.
GamSpec loadGamSpec(double fastLo, double fastHi, double slowLo, double slowHi, bool withState,
                    ClampCounter clamps) {
	const std::vector<double> grid = defaultLambdaGrid();
	const BasisSpec hour24{24, 0.0, 24.0, true, 2};
	const BasisSpec hour12{12, 0.0, 24.0, true, 2};
	const BasisSpec hour8{8, 0.0, 24.0, true, 2};
	const BasisSpec hour6{6, 0.0, 24.0, true, 2};
	const BasisSpec year16{16, 0.0, 1.0, true, 2};
	const BasisSpec year8{8, 0.0, 1.0, true, 2};
	widenIfFlat(&fastLo, &fastHi);
	widenIfFlat(&slowLo, &slowHi);
	const BasisSpec fast10{10, fastLo, fastHi, false, 2};
	const BasisSpec fast8{8, fastLo, fastHi, false, 2};
	const BasisSpec slow10{10, slowLo, slowHi, false, 2};

	GamSpec s;
	s.terms.push_back(scaledSplineTerm("hour_mon", "day_mon", "hour", hour24, grid));
	s.terms.push_back(scaledSplineTerm("hour_tue_thu", "day_tue_thu", "hour", hour24, grid));
	s.terms.push_back(scaledSplineTerm("hour_fri", "day_fri", "hour", hour24, grid));
	s.terms.push_back(scaledSplineTerm("hour_sat", "day_sat", "hour", hour24, grid));
	s.terms.push_back(scaledSplineTerm("hour_sun", "day_sun", "hour", hour24, grid));
	s.terms.push_back(scaledSplineTerm("hour_holiday", "day_holiday", "hour", hour24, grid));
	s.terms.push_back(splineTerm("year", "yearpos", year16, grid));
	s.terms.push_back(tensorTerm("hour_x_year", {"hour", "yearpos"}, {hour8, year8}, grid));
	s.terms.push_back(scaledSplineTerm("winter_x_hour", "winter", "hour", hour8, grid));
	s.terms.push_back(splineTerm("temp_fast", "temp_fast", fast10, grid, clamps));
	s.terms.push_back(splineTerm("temp_slow", "temp_slow", slow10, grid, clamps));
	s.terms.push_back(
	    tensorTerm("temp_fast_x_hour", {"temp_fast", "hour"}, {fast8, hour6}, grid, clamps));
	if (withState) {
		s.terms.push_back(scaledSplineTerm("state_x_hour", "state", "hour", hour12, grid));
	}
	return s;
}

namespace {

bool isStochasticTerm(const std::string& name) {
	return name.rfind("temp_", 0) == 0 || name.rfind("state", 0) == 0;
}

// Per-series AR innovation panel (rows t = pMax..T-1) for the joint Eq.-style
// covariance across series.
Matrix arInnovations(const Matrix& residuals, const std::vector<PostLassoArModel>& models) {
	const Eigen::Index t = residuals.rows();
	const Eigen::Index n = residuals.cols();
	int pMax = 0;
	for (const auto& m : models) pMax = std::max(pMax, m.pMax);
	Matrix innov(t - pMax, n);
	for (Eigen::Index c = 0; c < n; ++c) {
		const PostLassoArModel& m = models[static_cast<std::size_t>(c)];
		for (Eigen::Index i = pMax; i < t; ++i) {
			double pred = 0.0;
			for (std::size_t j = 0; j < m.lags.size(); ++j) {
				pred += m.coefs[static_cast<Eigen::Index>(j)] * residuals(i - m.lags[j], c);
			}
			innov(i - pMax, c) = residuals(i, c) - pred;
		}
	}
	return innov;
}

std::uint64_t stageSeed(std::uint64_t base, std::uint64_t stage) {
	return rng::deriveSeed(base, stage);
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage (i): temperature
// ---------------------------------------------------------------------------

TempStage fitTempStage(const HourlyPanel& temps, const PipelineConfig& config) {
	const Eigen::Index n = temps.values.cols();
	const Eigen::Index t = temps.values.rows();
	if (n < 1 || t < 2) throw std::invalid_argument("fitTempStage: empty temperature panel");

	TempStage stage;
	const double alphas[2] = {config.tempAlphaFast, config.tempAlphaSlow};
	const char* suffix[2] = {"_fast", "_slow"};
	stage.inSample.resize(t, 2 * n);
	for (Eigen::Index c = 0; c < n; ++c) {
		for (int a = 0; a < 2; ++a) {
			const VetsLevelModel sm = etsLevelSmooth(temps.values.col(c), alphas[a]);
			stage.seriesNames.push_back(temps.seriesNames[static_cast<std::size_t>(c)] + suffix[a]);
			stage.alphas.push_back(alphas[a]);
			stage.finalLevels.push_back(sm.finalLevel());
			stage.inSample.col(2 * c + a) = sm.levels;
		}
	}
	for (Eigen::Index i = 0; i < 2 * n; ++i) {
		stage.domainLo.push_back(stage.inSample.col(i).minCoeff());
		stage.domainHi.push_back(stage.inSample.col(i).maxCoeff());
	}

	const FeatureTable features = calendarTable(temps.grid, HolidayCalendar(), "");
	const GamSpec spec = tempGamSpec();
	stage.residuals.resize(t, 2 * n);
	for (Eigen::Index i = 0; i < 2 * n; ++i) {
		stage.gams.push_back(fitGam(spec, features, stage.inSample.col(i)));
		stage.residuals.col(i) = stage.gams.back().residuals;
		stage.ars.push_back(fitPostLassoAr(stage.residuals.col(i), config.pMaxTemp));
	}
	stage.cov = estimateCovariance(arInnovations(stage.residuals, stage.ars), "temperature");
	return stage;
}

void simulateTempStage(TempStage& stage, const HolidayCalendar&, const PipelineConfig& config,
                       const TimeGrid& horizonGrid, std::uint64_t seed) {
	const Eigen::Index m = static_cast<Eigen::Index>(stage.gams.size());
	const FeatureTable features = calendarTable(horizonGrid, HolidayCalendar(), "");
	Matrix gamPoint(horizonGrid.length, m);
	for (Eigen::Index i = 0; i < m; ++i) {
		gamPoint.col(i) = stage.gams[static_cast<std::size_t>(i)].predict(features);
	}
	// The point forecast carries the deterministic (zero-noise) continuation of
	// the residual AR models, so a zero-covariance ensemble collapses onto it.
	stage.pointForecast =
	    gamPoint +
	    arSimulate(stage.ars, stage.residuals, horizonGrid.length, Matrix::Zero(m, m), 1, seed)
	        .sims.front();
	Matrix sigma = config.forceZeroCovariance ? Matrix::Zero(m, m).eval() : stage.cov.sigma;
	TrajectoryEnsemble dev =
	    arSimulate(stage.ars, stage.residuals, horizonGrid.length, sigma, config.nSims, seed);
	stage.ensemble.sims.clear();
	stage.ensemble.sims.reserve(static_cast<std::size_t>(config.nSims));
	for (Eigen::Index s = 0; s < config.nSims; ++s) {
		stage.ensemble.sims.push_back(gamPoint + dev.sims[static_cast<std::size_t>(s)]);
	}
	stage.ensemble.origin = horizonGrid.start - 1;
	stage.ensemble.seriesNames = stage.seriesNames;
}

// ---------------------------------------------------------------------------
// Weekly aggregation and interpolation
// ---------------------------------------------------------------------------

Matrix aggregatePeakResiduals(const Matrix& residuals, const TimeGrid& grid,
                              std::vector<HourStamp>* anchors) {
	if (residuals.rows() != grid.length) {
		throw std::invalid_argument("aggregatePeakResiduals: panel not aligned to the grid");
	}
	Eigen::Index firstMonday = -1;
	for (Eigen::Index i = 0; i < std::min<Eigen::Index>(grid.length, 168); ++i) {
		if (weekdayMon0(grid.at(i)) == 0 && toCivil(grid.at(i)).hour == 0) {
			firstMonday = i;
			break;
		}
	}
	if (firstMonday < 0 || grid.length - firstMonday < 168) {
		throw std::invalid_argument("aggregatePeakResiduals: no complete Monday-aligned week");
	}
	const Eigen::Index weeks = (grid.length - firstMonday) / 168;
	const Eigen::Index n = residuals.cols();
	Matrix weekly(weeks, n);
	if (anchors) anchors->clear();
	for (Eigen::Index w = 0; w < weeks; ++w) {
		const Eigen::Index base = firstMonday + w * 168;
		Vector acc = Vector::Zero(n);
		for (int day = 0; day < 5; ++day) {
			for (int hour = 8; hour <= 19; ++hour) {
				acc += residuals.row(base + day * 24 + hour).transpose();
			}
		}
		weekly.row(w) = acc.transpose() / 60.0;
		if (anchors) anchors->push_back(grid.at(base + 2 * 24 + 13));  // Wednesday 13:00
	}
	return weekly;
}

Matrix interpolateState(const Matrix& weekly, const std::vector<HourStamp>& anchors,
                        const TimeGrid& grid) {
	const Eigen::Index w = weekly.rows();
	if (w < 1 || static_cast<std::size_t>(w) != anchors.size()) {
		throw std::invalid_argument("interpolateState: need one anchor per weekly row");
	}
	for (std::size_t i = 1; i < anchors.size(); ++i) {
		if (anchors[i] <= anchors[i - 1]) {
			throw std::invalid_argument("interpolateState: anchors must increase");
		}
	}
	Matrix out(grid.length, weekly.cols());
	Eigen::Index seg = 0;
	for (Eigen::Index i = 0; i < grid.length; ++i) {
		const HourStamp h = grid.at(i);
		if (h <= anchors.front()) {
			out.row(i) = weekly.row(0);
			continue;
		}
		if (h >= anchors.back()) {
			out.row(i) = weekly.row(w - 1);
			continue;
		}
		while (anchors[static_cast<std::size_t>(seg) + 1] < h) ++seg;
		const double span = static_cast<double>(anchors[static_cast<std::size_t>(seg) + 1] -
		                                        anchors[static_cast<std::size_t>(seg)]);
		const double frac = static_cast<double>(h - anchors[static_cast<std::size_t>(seg)]) / span;
		out.row(i) = (1.0 - frac) * weekly.row(seg) + frac * weekly.row(seg + 1);
	}
	return out;
}

// ---------------------------------------------------------------------------
// Stage (ii): socio-economic / political state
// ---------------------------------------------------------------------------

StateStage fitStateStage(const HourlyPanel& load, const HolidayCalendar& holidays,
                         const TempStage& temp, const PipelineConfig& config,
                         const TimeGrid& inSampleGrid) {
	const Eigen::Index n = load.values.cols();
	StateStage stage;
	stage.kind = config.stateModel;

	Matrix residuals(inSampleGrid.length, n);
	for (Eigen::Index c = 0; c < n; ++c) {
		FeatureTable features =
		    calendarTable(inSampleGrid, holidays, load.seriesNames[static_cast<std::size_t>(c)]);
		features.set("temp_fast", temp.inSample.col(2 * c));
		features.set("temp_slow", temp.inSample.col(2 * c + 1));
		const GamSpec spec = loadGamSpec(
		    temp.domainLo[static_cast<std::size_t>(2 * c)], temp.domainHi[static_cast<std::size_t>(2 * c)],
		    temp.domainLo[static_cast<std::size_t>(2 * c + 1)],
		    temp.domainHi[static_cast<std::size_t>(2 * c + 1)], false, nullptr);
		stage.gams.push_back(fitGam(spec, features, load.values.col(c)));
		residuals.col(c) = stage.gams.back().residuals;
	}

	stage.weekly = aggregatePeakResiduals(residuals, inSampleGrid, &stage.anchors);
	switch (stage.kind) {
		case StateModelKind::Var:
			stage.var = fitVar(stage.weekly, config.stateLags);
			stage.sigma = stage.var.sigma;
			stage.inSample = interpolateState(stage.weekly, stage.anchors, inSampleGrid);
			break;
		case StateModelKind::Vecm:
			// Error-correction form with the single short-run difference lag.
			stage.vecm = fitVecm(stage.weekly, {1}, config.vecmRank);
			stage.sigma = stage.vecm.sigma;
			stage.inSample = interpolateState(stage.weekly, stage.anchors, inSampleGrid);
			break;
		case StateModelKind::Vets:
			stage.vets = fitVets(stage.weekly, config.vetsPeriod);
			stage.sigma = stage.vets.sigma;
			// The covariate is the level component, seasonal excluded.
			stage.inSample = interpolateState(stage.vets.levels, stage.anchors, inSampleGrid);
			break;
	}
	if (config.forceZeroCovariance) stage.sigma.setZero();
	return stage;
}

void simulateStateStage(StateStage& stage, const PipelineConfig& config,
                        const TimeGrid& horizonGrid, std::uint64_t seed) {
	const Eigen::Index weeks = horizonGrid.length / 168;
	const Eigen::Index n = stage.weekly.cols();

	Matrix lastFit(1, n);
	Matrix pointWeekly(weeks, n);
	switch (stage.kind) {
		case StateModelKind::Var: {
			VarModel m = stage.var;
			m.sigma = stage.sigma;
			stage.weeklySims = varSimulate(m, stage.weekly, weeks, config.nSims, seed);
			pointWeekly = varForecast(stage.var, stage.weekly, weeks);
			lastFit = stage.weekly.bottomRows(1);
			break;
		}
		case StateModelKind::Vecm: {
			VecmModel m = stage.vecm;
			m.sigma = stage.sigma;
			stage.weeklySims = vecmSimulate(m, stage.weekly, weeks, config.nSims, seed);
			pointWeekly = vecmForecast(stage.vecm, stage.weekly, weeks);
			lastFit = stage.weekly.bottomRows(1);
			break;
		}
		case StateModelKind::Vets: {
			stage.weeklySims = vetsSimulate(stage.vets, weeks, stage.sigma, config.nSims, seed).levels;
			pointWeekly.rowwise() = stage.vets.finalLevel().transpose();
			lastFit = stage.vets.levels.bottomRows(1);
			break;
		}
	}

	// Weekly anchors continue at one-week spacing; the last fitted anchor is
	// kept so the first forecast hours interpolate away from the fitted state.
	std::vector<HourStamp> extAnchors;
	extAnchors.push_back(stage.anchors.back());
	for (Eigen::Index w = 0; w < weeks; ++w) {
		extAnchors.push_back(stage.anchors.back() + 168 * (w + 1));
	}
	auto toHourly = [&](const Matrix& weekly) {
		Matrix ext(weeks + 1, n);
		ext.row(0) = lastFit.row(0);
		ext.bottomRows(weeks) = weekly;
		return interpolateState(ext, extAnchors, horizonGrid);
	};
	stage.hourly.sims.clear();
	stage.hourly.sims.reserve(static_cast<std::size_t>(config.nSims));
	for (Eigen::Index s = 0; s < config.nSims; ++s) {
		stage.hourly.sims.push_back(toHourly(stage.weeklySims.sims[static_cast<std::size_t>(s)]));
	}
	stage.hourly.origin = horizonGrid.start - 1;
	stage.pointForecast = toHourly(pointWeekly);
}

// ---------------------------------------------------------------------------
// Stage (iii): load
// ---------------------------------------------------------------------------

ForecastProduct fitLoadStage(const HourlyPanel& load, const HolidayCalendar& holidays,
                             const TempStage& temp, const StateStage& state,
                             const PipelineConfig& config, const TimeGrid& inSampleGrid) {
	const Eigen::Index n = load.values.cols();
	ForecastProduct product;
	ClampCounter clamps = std::make_shared<long>(0);
	product.residuals.resize(inSampleGrid.length, n);
	for (Eigen::Index c = 0; c < n; ++c) {
		FeatureTable features =
		    calendarTable(inSampleGrid, holidays, load.seriesNames[static_cast<std::size_t>(c)]);
		features.set("temp_fast", temp.inSample.col(2 * c));
		features.set("temp_slow", temp.inSample.col(2 * c + 1));
		features.set("state", state.inSample.col(c));
		const GamSpec spec = loadGamSpec(
		    temp.domainLo[static_cast<std::size_t>(2 * c)], temp.domainHi[static_cast<std::size_t>(2 * c)],
		    temp.domainLo[static_cast<std::size_t>(2 * c + 1)],
		    temp.domainHi[static_cast<std::size_t>(2 * c + 1)], true, clamps);
		product.gams.push_back(fitGam(spec, features, load.values.col(c)));
		product.residuals.col(c) = product.gams.back().residuals;
		product.ars.push_back(fitPostLassoAr(product.residuals.col(c), config.pMaxLoad));
	}
	product.cov = estimateCovariance(arInnovations(product.residuals, product.ars), "load");
	product.horizonClamps = *clamps;
	return product;
}

void simulateLoadStage(ForecastProduct& product, const Experiment& exp, std::uint64_t seed) {
	const PipelineConfig& config = exp.config;
	const TimeGrid& horizonGrid = exp.horizonGrid;
	const Eigen::Index h = horizonGrid.length;
	const Eigen::Index n = static_cast<Eigen::Index>(exp.countries.size());

	Matrix sigma = config.forceZeroCovariance ? Matrix::Zero(n, n).eval() : product.cov.sigma;
	const Matrix detAr =
	    arSimulate(product.ars, product.residuals, h, Matrix::Zero(n, n), 1, seed).sims.front();
	product.arDeviations = arSimulate(product.ars, product.residuals, h, sigma, config.nSims, seed);
	product.arDeviations.origin = horizonGrid.start - 1;
	product.arDeviations.seriesNames = exp.countries;

	product.load.sims.assign(static_cast<std::size_t>(config.nSims), Matrix(h, n));
	product.load.origin = horizonGrid.start - 1;
	product.load.seriesNames = exp.countries;
	product.pointForecast.resize(h, n);

	for (Eigen::Index c = 0; c < n; ++c) {
		const GamFit& fit = product.gams[static_cast<std::size_t>(c)];
		FeatureTable features =
		    calendarTable(horizonGrid, exp.holidays, exp.countries[static_cast<std::size_t>(c)]);

		// Calendar-driven terms are identical across simulations: accumulate
		// them once, in the same order the full prediction would.
		Vector base = Vector::Constant(h, fit.intercept);
		std::vector<std::size_t> stochastic;
		features.set("temp_fast", Vector::Zero(h));
		features.set("temp_slow", Vector::Zero(h));
		features.set("state", Vector::Zero(h));
		for (std::size_t t = 0; t < fit.spec.terms.size(); ++t) {
			if (isStochasticTerm(fit.spec.terms[t].name)) {
				stochastic.push_back(t);
				continue;
			}
			Matrix block = fit.spec.terms[t].build(features);
			block.rowwise() -= fit.centering[t].transpose();
			base += block * fit.coefs[t];
		}

		auto stochasticPart = [&](const Vector& tempFast, const Vector& tempSlow,
		                          const Vector& stateCov) {
			features.set("temp_fast", tempFast);
			features.set("temp_slow", tempSlow);
			features.set("state", stateCov);
			Vector out = Vector::Zero(h);
			for (std::size_t t : stochastic) {
				Matrix block = fit.spec.terms[t].build(features);
				block.rowwise() -= fit.centering[t].transpose();
				out += block * fit.coefs[t];
			}
			return out;
		};

		// Deterministic path: point covariates plus the zero-noise AR
		// continuation, so a zero-covariance ensemble collapses onto it.
		product.pointForecast.col(c) =
		    base + stochasticPart(exp.temp.pointForecast.col(2 * c),
		                          exp.temp.pointForecast.col(2 * c + 1),
		                          exp.state.pointForecast.col(c)) +
		    detAr.col(c);
		for (Eigen::Index s = 0; s < config.nSims; ++s) {
			const Matrix& tempSim = exp.temp.ensemble.sims[static_cast<std::size_t>(s)];
			const Matrix& stateSim = exp.state.hourly.sims[static_cast<std::size_t>(s)];
			product.load.sims[static_cast<std::size_t>(s)].col(c) =
			    base + stochasticPart(tempSim.col(2 * c), tempSim.col(2 * c + 1), stateSim.col(c)) +
			    product.arDeviations.sims[static_cast<std::size_t>(s)].col(c);
		}
	}
	product.quantiles = ensembleQuantiles(product.load, config.probabilities);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

namespace {

HourlyPanel slicePanel(const HourlyPanel& panel, const TimeGrid& window,
                       const std::vector<std::string>& series, const char* what) {
	const std::int64_t start = panel.grid.index(window.start);
	const std::int64_t last = panel.grid.index(window.at(window.length - 1));
	if (start < 0 || last < 0) {
		throw std::invalid_argument(std::string(what) + " panel does not cover [" +
		                            formatHourStamp(window.start) + ", " +
		                            formatHourStamp(window.at(window.length - 1)) + "]");
	}
	HourlyPanel out;
	out.grid = window;
	out.seriesNames = series;
	out.values.resize(window.length, static_cast<Eigen::Index>(series.size()));
	for (std::size_t c = 0; c < series.size(); ++c) {
		out.values.col(static_cast<Eigen::Index>(c)) =
		    panel.values.col(panel.seriesIndex(series[c])).segment(start, window.length);
	}
	return out;
}

}  // namespace

Experiment fitExperiment(const DataStore& data, const PipelineConfig& config, HourStamp origin,
                         std::uint64_t seed) {
	config.validate();
	Experiment exp;
	exp.config = config;
	exp.origin = origin;
	exp.seed = seed;
	exp.holidays = data.holidays;
	exp.countries = config.countries.empty() ? data.load.seriesNames : config.countries;
	exp.inSampleGrid = buildHourlyGrid(origin - config.inSampleHours + 1, config.inSampleHours);
	exp.horizonGrid = buildHourlyGrid(origin + 1, config.horizonHours);

	HourlyPanel loadIn = slicePanel(data.load, exp.inSampleGrid, exp.countries, "load");
	const HourlyPanel tempIn =
	    slicePanel(data.temperature, exp.inSampleGrid, exp.countries, "temperature");
	auto adjusted = adjustOutliers(loadIn, config.outlierWindow, config.outlierThreshold);
	loadIn = std::move(adjusted.first);
	exp.outliers = std::move(adjusted.second);

	exp.temp = fitTempStage(tempIn, config);
	exp.state = fitStateStage(loadIn, exp.holidays, exp.temp, config, exp.inSampleGrid);
	exp.product = fitLoadStage(loadIn, exp.holidays, exp.temp, exp.state, config, exp.inSampleGrid);
	return exp;
}

void simulateExperiment(Experiment& exp) {
	simulateTempStage(exp.temp, exp.holidays, exp.config, exp.horizonGrid, stageSeed(exp.seed, 1));
	simulateStateStage(exp.state, exp.config, exp.horizonGrid, stageSeed(exp.seed, 2));
	simulateLoadStage(exp.product, exp, stageSeed(exp.seed, 3));
}

Experiment runExperiment(const DataStore& data, const PipelineConfig& config, HourStamp origin,
                         std::uint64_t seed) {
	Experiment exp = fitExperiment(data, config, origin, seed);
	simulateExperiment(exp);

	const std::int64_t horizonStart = data.load.grid.index(exp.horizonGrid.start);
	const std::int64_t horizonLast = data.load.grid.index(exp.horizonGrid.at(exp.horizonGrid.length - 1));
	if (horizonStart >= 0 && horizonLast >= 0) {
		const HourlyPanel actualPanel = slicePanel(data.load, exp.horizonGrid, exp.countries, "load");
		exp.product.scores = scoreEnsemble(exp.product.load, exp.product.quantiles,
		                                   actualPanel.values, groupByHourOfDay(exp.origin));
		exp.product.coverageByHour = coverageTable(exp.product.quantiles, actualPanel.values,
		                                           groupByHourOfDay(exp.origin));
		exp.product.coverageEdgeWeeks = coverageTable(exp.product.quantiles, actualPanel.values,
		                                              groupByEdgeWeeks(exp.horizonGrid.length));
		exp.product.scored = true;
	}
	return exp;
}

Experiment runExperiment(const DataStore& data, const PipelineConfig& config, HourStamp origin) {
	return runExperiment(data, config, origin, config.masterSeed);
}

// ---------------------------------------------------------------------------
// Rolling study
// ---------------------------------------------------------------------------

namespace {

HourStamp nextMonthStart(HourStamp at) {
	CivilTime c = toCivil(at);
	c.day = 1;
	c.hour = 9;
	HourStamp candidate = toHourStamp(c);
	while (candidate < at) {
		c.month += 1;
		if (c.month > 12) {
			c.month = 1;
			c.year += 1;
		}
		candidate = toHourStamp(c);
	}
	return candidate;
}

HourStamp monthAfter(HourStamp monthStart) {
	return nextMonthStart(monthStart + 1);
}

void accumulateCoverage(std::map<std::string, std::pair<Matrix, std::vector<long>>>& acc,
                        const std::string& model, const CoverageTable& table) {
	auto it = acc.find(model);
	if (it == acc.end()) {
		Matrix hits = table.frequency;
		for (Eigen::Index g = 0; g < hits.cols(); ++g) {
			hits.col(g) *= static_cast<double>(table.cellCounts[static_cast<std::size_t>(g)]);
		}
		acc.emplace(model, std::make_pair(hits, table.cellCounts));
		return;
	}
	for (Eigen::Index g = 0; g < it->second.first.cols(); ++g) {
		it->second.first.col(g) +=
		    table.frequency.col(g) * static_cast<double>(table.cellCounts[static_cast<std::size_t>(g)]);
		it->second.second[static_cast<std::size_t>(g)] += table.cellCounts[static_cast<std::size_t>(g)];
	}
}

CoverageTable finalizeCoverage(const std::pair<Matrix, std::vector<long>>& acc,
                               const CoverageTable& shape) {
	CoverageTable out;
	out.probabilities = shape.probabilities;
	out.groups = shape.groups;
	out.frequency = acc.first;
	out.cellCounts = acc.second;
	for (Eigen::Index g = 0; g < out.frequency.cols(); ++g) {
		if (out.cellCounts[static_cast<std::size_t>(g)] > 0) {
			out.frequency.col(g) /= static_cast<double>(out.cellCounts[static_cast<std::size_t>(g)]);
		}
	}
	return out;
}

}  // namespace

StudyReport rollingStudy(const DataStore& data, const PipelineConfig& config, int experiments,
                         std::ostream* log) {
	config.validate();
	if (experiments < 1) throw std::invalid_argument("rollingStudy: need at least one experiment");

	StudyReport report;
	report.countries = config.countries.empty() ? data.load.seriesNames : config.countries;
	report.probabilities = config.probabilities;
	for (StateModelKind kind : config.studyModels) report.models.push_back(stateModelName(kind));
	if (report.models.empty()) throw std::invalid_argument("rollingStudy: no state models configured");

	// Origins: month starts (09:00) with a full in-sample window before and a
	// scored horizon after.
	const HourStamp earliest = data.load.grid.start + config.inSampleHours - 1;
	HourStamp origin = nextMonthStart(earliest);
	while (static_cast<int>(report.origins.size()) < experiments) {
		if (data.load.grid.index(origin + config.horizonHours) < 0 ||
		    data.temperature.grid.index(origin) < 0 ||
		    data.temperature.grid.index(origin - config.inSampleHours + 1) < 0) {
			break;
		}
		report.origins.push_back(origin);
		origin = monthAfter(origin);
	}
	if (report.origins.empty()) {
		throw std::invalid_argument("rollingStudy: data span admits no scored experiment");
	}
	if (static_cast<int>(report.origins.size()) < experiments && log) {
		*log << "rollingStudy: only " << report.origins.size() << " of " << experiments
		     << " requested experiments fit the data span\n";
	}

	const Eigen::Index n = static_cast<Eigen::Index>(report.countries.size());
	const Eigen::Index ne = static_cast<Eigen::Index>(report.origins.size());
	std::map<std::string, std::pair<Matrix, std::vector<long>>> hourAcc, edgeAcc;
	std::map<std::string, CoverageTable> hourShape, edgeShape;
	for (std::size_t m = 0; m < report.models.size(); ++m) {
		const std::string& model = report.models[m];
		report.crpsByExperiment[model] = Matrix::Zero(ne, n);
		report.meanPinball[model] =
		    Matrix::Zero(static_cast<Eigen::Index>(config.probabilities.size()), n);
		for (Eigen::Index k = 0; k < ne; ++k) {
			PipelineConfig cfg = config;
			cfg.stateModel = config.studyModels[m];
			const Experiment exp =
			    runExperiment(data, cfg, report.origins[static_cast<std::size_t>(k)],
			                  rng::deriveSeed(config.masterSeed, static_cast<std::uint64_t>(k)));
			if (!exp.product.scored) {
				throw std::runtime_error("rollingStudy: experiment could not be scored");
			}
			report.crpsByExperiment[model].row(k) = exp.product.scores.meanCrps.transpose();
			report.meanPinball[model] += exp.product.scores.meanPinball;
			accumulateCoverage(hourAcc, model, exp.product.coverageByHour);
			accumulateCoverage(edgeAcc, model, exp.product.coverageEdgeWeeks);
			hourShape[model] = exp.product.coverageByHour;
			edgeShape[model] = exp.product.coverageEdgeWeeks;
			if (log) {
				*log << "rollingStudy: " << model << " experiment " << (k + 1) << "/" << ne
				     << " done (origin " << formatHourStamp(report.origins[static_cast<std::size_t>(k)])
				     << ")\n";
			}
		}
		report.meanCrps[model] = report.crpsByExperiment[model].colwise().mean().transpose();
		report.meanPinball[model] /= static_cast<double>(ne);
		report.coverageByHour[model] = finalizeCoverage(hourAcc[model], hourShape[model]);
		report.coverageEdgeWeeks[model] = finalizeCoverage(edgeAcc[model], edgeShape[model]);
	}
	return report;
}

void writeStudyReports(const std::string& dir, const StudyReport& report) {
	{
		std::ofstream out(dir + "/scores.csv");
		if (!out) throw std::runtime_error("writeStudyReports: cannot open " + dir + "/scores.csv");
		out << "model,series,group,metric,value\n";
		for (const std::string& model : report.models) {
			const Vector& crps = report.meanCrps.at(model);
			for (Eigen::Index c = 0; c < crps.size(); ++c) {
				out << model << ',' << report.countries[static_cast<std::size_t>(c)] << ",,crps,"
				    << crps[c] << '\n';
			}
			const Matrix& pin = report.meanPinball.at(model);
			for (std::size_t p = 0; p < report.probabilities.size(); ++p) {
				for (Eigen::Index c = 0; c < pin.cols(); ++c) {
					out << model << ',' << report.countries[static_cast<std::size_t>(c)]
					    << ",,pinball_" << report.probabilities[p] << ','
					    << pin(static_cast<Eigen::Index>(p), c) << '\n';
				}
			}
			const Matrix& byExp = report.crpsByExperiment.at(model);
			for (Eigen::Index k = 0; k < byExp.rows(); ++k) {
				for (Eigen::Index c = 0; c < byExp.cols(); ++c) {
					out << model << ',' << report.countries[static_cast<std::size_t>(c)]
					    << ",experiment_" << (k + 1) << ",crps," << byExp(k, c) << '\n';
				}
			}
		}
	}
	for (const std::string& model : report.models) {
		writeCoverageCsv(dir + "/coverage_hour_" + model + ".csv", model,
		                 report.coverageByHour.at(model));
		writeCoverageCsv(dir + "/coverage_weeks_" + model + ".csv", model,
		                 report.coverageEdgeWeeks.at(model));
	}
}

// ---------------------------------------------------------------------------
// Scenario analysis
// ---------------------------------------------------------------------------

StageSelection selectExtreme(const TrajectoryEnsemble& ens, Eigen::Index series) {
	const Eigen::Index m = ens.nSims();
	const Eigen::Index h = ens.horizon();
	if (m < 1 || h < 1) throw std::invalid_argument("selectExtreme: empty ensemble");

	std::vector<double> cell(static_cast<std::size_t>(m));
	Vector q05(h), q95(h);
	for (Eigen::Index step = 0; step < h; ++step) {
		for (Eigen::Index s = 0; s < m; ++s) {
			cell[static_cast<std::size_t>(s)] = ens.sims[static_cast<std::size_t>(s)](step, series);
		}
		q05[step] = quantileType7(cell, 0.05);
		q95[step] = quantileType7(cell, 0.95);
	}

	StageSelection sel;
	double bestUnder = -1.0, bestOver = -1.0;
	std::vector<std::pair<double, Eigen::Index>> sums;
	for (Eigen::Index s = 0; s < m; ++s) {
		const Matrix& traj = ens.sims[static_cast<std::size_t>(s)];
		double under = 0.0, over = 0.0, total = 0.0;
		for (Eigen::Index step = 0; step < h; ++step) {
			const double x = traj(step, series);
			under += std::max(q05[step] - x, 0.0);
			over += std::max(x - q95[step], 0.0);
			total += x;
		}
		if (under > bestUnder) {
			bestUnder = under;
			sel.minIndex = s;
		}
		if (over > bestOver) {
			bestOver = over;
			sel.maxIndex = s;
		}
		sums.emplace_back(total, s);
	}
	sel.minScore = bestUnder;
	sel.maxScore = bestOver;
	std::sort(sums.begin(), sums.end());
	sel.mediumIndex = sums[static_cast<std::size_t>((m - 1) / 2)].second;
	return sel;
}

ScenarioSelection selectExtremeTrajectories(const Experiment& exp, const std::string& country) {
	Eigen::Index c = -1;
	for (std::size_t i = 0; i < exp.countries.size(); ++i) {
		if (exp.countries[i] == country) c = static_cast<Eigen::Index>(i);
	}
	if (c < 0) {
		throw std::invalid_argument("selectExtremeTrajectories: unknown country '" + country + "'");
	}
	ScenarioSelection sel;
	sel.temperature = selectExtreme(exp.temp.ensemble, 2 * c);  // fast-smoothed series
	sel.state = selectExtreme(exp.state.hourly, c);
	sel.ar = selectExtreme(exp.product.arDeviations, c);
	return sel;
}

ScenarioDecomposition decomposeScenario(const Experiment& exp, const std::string& country,
                                        Eigen::Index tempSim, Eigen::Index stateSim,
                                        Eigen::Index arSim) {
	Eigen::Index c = -1;
	for (std::size_t i = 0; i < exp.countries.size(); ++i) {
		if (exp.countries[i] == country) c = static_cast<Eigen::Index>(i);
	}
	if (c < 0) throw std::invalid_argument("decomposeScenario: unknown country '" + country + "'");
	const Eigen::Index m = exp.config.nSims;
	if (tempSim < 0 || tempSim >= m || stateSim < 0 || stateSim >= m || arSim < 0 || arSim >= m) {
		throw std::invalid_argument("decomposeScenario: simulation index out of range");
	}

	const GamFit& fit = exp.product.gams[static_cast<std::size_t>(c)];
	FeatureTable features = calendarTable(exp.horizonGrid, exp.holidays, country);
	features.set("temp_fast", exp.temp.ensemble.sims[static_cast<std::size_t>(tempSim)].col(2 * c));
	features.set("temp_slow",
	             exp.temp.ensemble.sims[static_cast<std::size_t>(tempSim)].col(2 * c + 1));
	features.set("state", exp.state.hourly.sims[static_cast<std::size_t>(stateSim)].col(c));

	const std::vector<Vector> contributions = fit.termContributions(features);
	ScenarioDecomposition d;
	d.country = country;
	d.intercept = fit.intercept;
	const Eigen::Index h = exp.horizonGrid.length;
	d.components.resize(h, static_cast<Eigen::Index>(contributions.size()) + 1);
	for (std::size_t t = 0; t < contributions.size(); ++t) {
		d.componentNames.push_back(fit.spec.terms[t].name);
		d.components.col(static_cast<Eigen::Index>(t)) = contributions[t];
	}
	d.componentNames.push_back("autoregressive");
	d.components.col(d.components.cols() - 1) =
	    exp.product.arDeviations.sims[static_cast<std::size_t>(arSim)].col(c);
	d.scenarioTotal = d.components.rowwise().sum();
	d.pointForecast = exp.product.pointForecast.col(c).array() - fit.intercept;
	return d;
}

void writeScenarioCsv(const std::string& path, const Experiment& exp,
                      const ScenarioDecomposition& d) {
	std::ofstream out(path);
	if (!out) throw std::runtime_error("writeScenarioCsv: cannot open " + path);
	out.precision(12);
	out << "timestamp";
	for (const std::string& name : d.componentNames) out << ',' << name;
	out << ",scenario_total,point_forecast\n";
	for (Eigen::Index i = 0; i < d.components.rows(); ++i) {
		out << formatHourStamp(exp.horizonGrid.at(i));
		for (Eigen::Index t = 0; t < d.components.cols(); ++t) out << ',' << d.components(i, t);
		out << ',' << d.scenarioTotal[i] << ',' << d.pointForecast[i] << '\n';
	}
}

}  // namespace mtload
