#pragma once

#include "mtload/autoreg.hpp"
#include "mtload/cointegration.hpp"
#include "mtload/ensemble.hpp"
#include "mtload/gam.hpp"
#include "mtload/ingest.hpp"
#include "mtload/scoring.hpp"
#include "mtload/statespace.hpp"
#include "mtload/timebase.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mtload {

enum class StateModelKind { Var, Vecm, Vets };

std::string stateModelName(StateModelKind kind);
StateModelKind parseStateModel(const std::string& name);

// Everything the three-stage forecaster needs to know; defaults are the
// production constants (52-week horizon, 4-year window, hourly resolution).
struct PipelineConfig {
	std::vector<std::string> countries;  // empty: every series in the load panel
	StateModelKind stateModel = StateModelKind::Var;
	std::vector<StateModelKind> studyModels = {StateModelKind::Var, StateModelKind::Vecm,
	                                           StateModelKind::Vets};
	double tempAlphaFast = 1.0 / 24.0;          // daily-scale temperature smoothing
	double tempAlphaSlow = 1.0 / (14.0 * 24.0); // two-week-scale smoothing
	int pMaxTemp = 4 * 24 * 7;
	int pMaxLoad = 8 * 24 * 7;
	std::vector<int> stateLags = {1, 2};
	int vecmRank = -1;                          // -1: series count minus one
	int vetsPeriod = 52;
	Eigen::Index nSims = 200;
	Eigen::Index horizonHours = 168 * 52;
	Eigen::Index inSampleHours = 4 * 365 * 24;
	int outlierWindow = 169;
	double outlierThreshold = 8.0;
	std::vector<double> probabilities = {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5,
	                                     0.6,  0.7,  0.8, 0.9, 0.95, 0.99};
	std::uint64_t masterSeed = 20240901;
	// Diagnostic switch: zero innovation covariance in every stochastic stage,
	// collapsing the ensemble onto the point forecast.
	bool forceZeroCovariance = false;

	void validate() const;
};

PipelineConfig loadPipelineConfig(const std::string& path);
void savePipelineConfig(const std::string& path, const PipelineConfig& config);

// GAM term catalogs. The calendar-driven terms precede the stochastic
// (temperature/state) terms so horizon evaluation can split them.
GamSpec tempGamSpec();
GamSpec loadGamSpec(double fastLo, double fastHi, double slowLo, double slowHi, bool withState,
                    ClampCounter clamps);

struct DataStore {
	HourlyPanel load;
	HourlyPanel temperature;
	HolidayCalendar holidays;
};

// Stage (i): per country, two exponentially smoothed temperature series (fast
// and slow), each explained by a seasonal GAM whose residuals carry a sparse
// AR model; innovations are jointly Gaussian across all 2n series.
struct TempStage {
	std::vector<std::string> seriesNames;  // 2 per country: fast then slow
	std::vector<double> alphas;
	std::vector<double> finalLevels;       // smoother state at the origin
	std::vector<double> domainLo;          // in-sample range per series, spline domains
	std::vector<double> domainHi;
	std::vector<GamFit> gams;
	std::vector<PostLassoArModel> ars;
	ErrorCovariance cov;
	Matrix inSample;        // in-sample smoothed values (hours x 2n), stage-(ii/iii) covariates
	Matrix residuals;       // GAM residuals (hours x 2n), AR simulation history
	Matrix pointForecast;   // horizon x 2n
	TrajectoryEnsemble ensemble;
};

// Stage (ii): weekly working-hours residual aggregate, one multivariate state
// model, and the hourly interpolation used as a stage-(iii) covariate.
struct StateStage {
	StateModelKind kind = StateModelKind::Var;
	std::vector<GamFit> gams;            // per country, calendar + temperature only
	Matrix weekly;                       // weeks x countries
	std::vector<HourStamp> anchors;      // Wednesday 13:00 per in-sample week
	VarModel var;
	VecmModel vecm;
	VetsModel vets;
	Matrix sigma;
	Matrix inSample;                     // hours x countries hourly covariate
	TrajectoryEnsemble weeklySims;       // horizon weeks x countries
	TrajectoryEnsemble hourly;           // horizon hours x countries
	Matrix pointForecast;                // horizon hours x countries
};

// Stage (iii) output: the load ensemble plus everything the decomposition and
// scoring need.
struct ForecastProduct {
	TrajectoryEnsemble load;
	QuantileGrid quantiles;
	Matrix pointForecast;                // horizon x countries
	std::vector<GamFit> gams;            // per country, full covariate set
	std::vector<PostLassoArModel> ars;
	ErrorCovariance cov;
	Matrix residuals;                    // in-sample GAM residuals, AR history
	TrajectoryEnsemble arDeviations;
	long horizonClamps = 0;
	bool scored = false;
	ScoreReport scores;
	CoverageTable coverageByHour;
	CoverageTable coverageEdgeWeeks;
};

struct Experiment {
	PipelineConfig config;
	HourStamp origin = 0;
	std::uint64_t seed = 0;
	TimeGrid inSampleGrid;
	TimeGrid horizonGrid;
	std::vector<std::string> countries;
	HolidayCalendar holidays;
	OutlierReport outliers;
	TempStage temp;
	StateStage state;
	ForecastProduct product;
};

// ---- stage operations (in-sample panels already sliced to inSampleGrid) ----

TempStage fitTempStage(const HourlyPanel& temps, const PipelineConfig& config);
void simulateTempStage(TempStage& stage, const HolidayCalendar& holidays,
                       const PipelineConfig& config, const TimeGrid& horizonGrid,
                       std::uint64_t seed);

// Weekly mean of hours 8..19 on Monday..Friday, complete Monday-aligned weeks
// only; anchors (when requested) mark each week's Wednesday 13:00.
Matrix aggregatePeakResiduals(const Matrix& residuals, const TimeGrid& grid,
                              std::vector<HourStamp>* anchors = nullptr);

// Piecewise-linear in time between weekly anchors, constant outside them.
Matrix interpolateState(const Matrix& weekly, const std::vector<HourStamp>& anchors,
                        const TimeGrid& grid);

StateStage fitStateStage(const HourlyPanel& load, const HolidayCalendar& holidays,
                         const TempStage& temp, const PipelineConfig& config,
                         const TimeGrid& inSampleGrid);
void simulateStateStage(StateStage& stage, const PipelineConfig& config,
                        const TimeGrid& horizonGrid, std::uint64_t seed);

ForecastProduct fitLoadStage(const HourlyPanel& load, const HolidayCalendar& holidays,
                             const TempStage& temp, const StateStage& state,
                             const PipelineConfig& config, const TimeGrid& inSampleGrid);
void simulateLoadStage(ForecastProduct& product, const Experiment& exp, std::uint64_t seed);

// Slices the in-sample window, adjusts outliers, and fits all three stages
// without simulating.
Experiment fitExperiment(const DataStore& data, const PipelineConfig& config, HourStamp origin,
                         std::uint64_t seed);

// Fit + simulate + (when actuals cover the horizon) score.
Experiment runExperiment(const DataStore& data, const PipelineConfig& config, HourStamp origin,
                         std::uint64_t seed);
Experiment runExperiment(const DataStore& data, const PipelineConfig& config, HourStamp origin);

// Reads a store directory holding load.csv, temp.csv and holidays.csv.
DataStore loadDataStore(const std::string& dir);

// ---- rolling study ----

struct StudyReport {
	std::vector<std::string> models;
	std::vector<std::string> countries;
	std::vector<HourStamp> origins;
	std::vector<double> probabilities;
	std::map<std::string, Matrix> crpsByExperiment;  // model -> experiments x countries
	std::map<std::string, Vector> meanCrps;          // model -> per country
	std::map<std::string, Matrix> meanPinball;       // model -> probabilities x countries
	std::map<std::string, CoverageTable> coverageByHour;
	std::map<std::string, CoverageTable> coverageEdgeWeeks;
};

// Experiments at consecutive month starts (09:00); runs as many as the data
// span allows, up to `experiments`, warning on the log stream when fewer fit.
StudyReport rollingStudy(const DataStore& data, const PipelineConfig& config, int experiments,
                         std::ostream* log = nullptr);
void writeStudyReports(const std::string& dir, const StudyReport& report);

// ---- scenario analysis ----

struct StageSelection {
	Eigen::Index minIndex = 0;     // largest summed drop below the 5% quantile
	Eigen::Index maxIndex = 0;     // largest summed exceedance of the 95% quantile
	Eigen::Index mediumIndex = 0;  // median of the per-trajectory sums
	double minScore = 0.0;
	double maxScore = 0.0;
};

StageSelection selectExtreme(const TrajectoryEnsemble& ens, Eigen::Index series);

struct ScenarioSelection {
	StageSelection temperature;  // on the country's fast-smoothed series
	StageSelection state;
	StageSelection ar;
};

ScenarioSelection selectExtremeTrajectories(const Experiment& exp, const std::string& country);

struct ScenarioDecomposition {
	std::string country;
	std::vector<std::string> componentNames;  // GAM terms, then "autoregressive"
	Matrix components;                        // horizon x components
	Vector scenarioTotal;                     // intercept-reduced sum of components
	Vector pointForecast;                     // intercept-reduced deterministic path
	double intercept = 0.0;
};

ScenarioDecomposition decomposeScenario(const Experiment& exp, const std::string& country,
                                        Eigen::Index tempSim, Eigen::Index stateSim,
                                        Eigen::Index arSim);

void writeScenarioCsv(const std::string& path, const Experiment& exp,
                      const ScenarioDecomposition& decomposition);

// ---- fit bundle persistence (CLI fit/forecast/scenario split) ----

void saveExperimentFit(const std::string& dir, const Experiment& exp);
Experiment loadExperimentFit(const std::string& dir);

// Re-runs the stochastic part of a loaded fit (deterministic given the seed).
void simulateExperiment(Experiment& exp);

}  // namespace mtload
