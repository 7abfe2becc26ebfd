#include "mtload/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mtload {

namespace {

using nlohmann::json;

json toJson(const Vector& v) {
	json out = json::array();
	for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
	return out;
}

json toJson(const Matrix& m) {
	json out = json::array();
	for (Eigen::Index i = 0; i < m.rows(); ++i) {
		json row = json::array();
		for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
		out.push_back(std::move(row));
	}
	return out;
}

Vector vectorFromJson(const json& j) {
	Vector v(static_cast<Eigen::Index>(j.size()));
	for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
	return v;
}

Matrix matrixFromJson(const json& j) {
	if (j.empty()) return Matrix(0, 0);
	Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
	for (std::size_t i = 0; i < j.size(); ++i) {
		for (std::size_t k = 0; k < j[i].size(); ++k) {
			m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
		}
	}
	return m;
}

json configToJson(const PipelineConfig& c) {
	json j;
	j["countries"] = c.countries;
	j["state_model"] = stateModelName(c.stateModel);
	json models = json::array();
	for (StateModelKind k : c.studyModels) models.push_back(stateModelName(k));
	j["study_models"] = std::move(models);
	j["temp_alpha_fast"] = c.tempAlphaFast;
	j["temp_alpha_slow"] = c.tempAlphaSlow;
	j["p_max_temp"] = c.pMaxTemp;
	j["p_max_load"] = c.pMaxLoad;
	j["state_lags"] = c.stateLags;
	j["vecm_rank"] = c.vecmRank;
	j["vets_period"] = c.vetsPeriod;
	j["n_sims"] = c.nSims;
	j["horizon_hours"] = c.horizonHours;
	j["in_sample_hours"] = c.inSampleHours;
	j["outlier_window"] = c.outlierWindow;
	j["outlier_threshold"] = c.outlierThreshold;
	j["probabilities"] = c.probabilities;
	j["master_seed"] = c.masterSeed;
	j["force_zero_covariance"] = c.forceZeroCovariance;
	return j;
}

PipelineConfig configFromJson(const json& j) {
	PipelineConfig c;
	if (j.contains("countries")) c.countries = j["countries"].get<std::vector<std::string>>();
	if (j.contains("state_model")) c.stateModel = parseStateModel(j["state_model"].get<std::string>());
	if (j.contains("study_models")) {
		c.studyModels.clear();
		for (const auto& name : j["study_models"]) {
			c.studyModels.push_back(parseStateModel(name.get<std::string>()));
		}
	}
	if (j.contains("temp_alpha_fast")) c.tempAlphaFast = j["temp_alpha_fast"].get<double>();
	if (j.contains("temp_alpha_slow")) c.tempAlphaSlow = j["temp_alpha_slow"].get<double>();
	if (j.contains("p_max_temp")) c.pMaxTemp = j["p_max_temp"].get<int>();
	if (j.contains("p_max_load")) c.pMaxLoad = j["p_max_load"].get<int>();
	if (j.contains("state_lags")) c.stateLags = j["state_lags"].get<std::vector<int>>();
	if (j.contains("vecm_rank")) c.vecmRank = j["vecm_rank"].get<int>();
	if (j.contains("vets_period")) c.vetsPeriod = j["vets_period"].get<int>();
	if (j.contains("n_sims")) c.nSims = j["n_sims"].get<Eigen::Index>();
	if (j.contains("horizon_hours")) c.horizonHours = j["horizon_hours"].get<Eigen::Index>();
	if (j.contains("in_sample_hours")) c.inSampleHours = j["in_sample_hours"].get<Eigen::Index>();
	if (j.contains("outlier_window")) c.outlierWindow = j["outlier_window"].get<int>();
	if (j.contains("outlier_threshold")) c.outlierThreshold = j["outlier_threshold"].get<double>();
	if (j.contains("probabilities")) c.probabilities = j["probabilities"].get<std::vector<double>>();
	if (j.contains("master_seed")) c.masterSeed = j["master_seed"].get<std::uint64_t>();
	if (j.contains("force_zero_covariance")) {
		c.forceZeroCovariance = j["force_zero_covariance"].get<bool>();
	}
	c.validate();
	return c;
}

// GAM fits travel without their term builders; the catalog tag plus the
// temperature-domain bounds are enough to rebuild the spec.
json gamToJson(const GamFit& fit) {
	json j;
	j["intercept"] = fit.intercept;
	json coefs = json::array(), centering = json::array();
	for (const Vector& v : fit.coefs) coefs.push_back(toJson(v));
	for (const Vector& v : fit.centering) centering.push_back(toJson(v));
	j["coefs"] = std::move(coefs);
	j["centering"] = std::move(centering);
	j["lambdas"] = fit.lambdas;
	j["residual_scale"] = fit.residualScale;
	j["gcv"] = fit.gcv;
	j["jitter"] = fit.jitterApplied;
	return j;
}

GamFit gamFromJson(const json& j, GamSpec spec) {
	GamFit fit;
	fit.spec = std::move(spec);
	fit.intercept = j["intercept"].get<double>();
	for (const auto& v : j["coefs"]) fit.coefs.push_back(vectorFromJson(v));
	for (const auto& v : j["centering"]) fit.centering.push_back(vectorFromJson(v));
	fit.lambdas = j["lambdas"].get<std::vector<std::vector<double>>>();
	fit.residualScale = j["residual_scale"].get<double>();
	fit.gcv = j["gcv"].get<double>();
	fit.jitterApplied = j["jitter"].get<double>();
	if (fit.coefs.size() != fit.spec.terms.size()) {
		throw std::runtime_error("fit bundle: coefficient count does not match the term catalog");
	}
	return fit;
}

json arToJson(const PostLassoArModel& m) {
	json j;
	j["p_max"] = m.pMax;
	j["lags"] = m.lags;
	j["coefs"] = toJson(m.coefs);
	j["sigma2"] = m.sigma2;
	return j;
}

PostLassoArModel arFromJson(const json& j) {
	PostLassoArModel m;
	m.pMax = j["p_max"].get<int>();
	m.lags = j["lags"].get<std::vector<int>>();
	m.coefs = vectorFromJson(j["coefs"]);
	m.sigma2 = j["sigma2"].get<double>();
	return m;
}

json covToJson(const ErrorCovariance& c) {
	json j;
	j["sigma"] = toJson(c.sigma);
	j["jitter"] = c.jitterApplied;
	j["source"] = c.source;
	return j;
}

ErrorCovariance covFromJson(const json& j) {
	ErrorCovariance c;
	c.sigma = matrixFromJson(j["sigma"]);
	c.jitterApplied = j["jitter"].get<double>();
	c.source = j["source"].get<std::string>();
	return c;
}

json varToJson(const VarModel& m) {
	json j;
	j["lags"] = m.lags;
	json coefs = json::array();
	for (const Matrix& c : m.coefs) coefs.push_back(toJson(c));
	j["coefs"] = std::move(coefs);
	j["sigma"] = toJson(m.sigma);
	return j;
}

VarModel varFromJson(const json& j) {
	VarModel m;
	m.lags = j["lags"].get<std::vector<int>>();
	for (const auto& c : j["coefs"]) m.coefs.push_back(matrixFromJson(c));
	m.sigma = matrixFromJson(j["sigma"]);
	return m;
}

json vecmToJson(const VecmModel& m) {
	json j;
	j["lags"] = m.lags;
	j["rank"] = m.rank;
	j["alpha"] = toJson(m.alpha);
	j["beta"] = toJson(m.beta);
	json gammas = json::array();
	for (const Matrix& g : m.gammas) gammas.push_back(toJson(g));
	j["gammas"] = std::move(gammas);
	j["sigma"] = toJson(m.sigma);
	j["eigenvalues"] = m.eigenvalues;
	return j;
}

VecmModel vecmFromJson(const json& j) {
	VecmModel m;
	m.lags = j["lags"].get<std::vector<int>>();
	m.rank = j["rank"].get<int>();
	m.alpha = matrixFromJson(j["alpha"]);
	m.beta = matrixFromJson(j["beta"]);
	for (const auto& g : j["gammas"]) m.gammas.push_back(matrixFromJson(g));
	m.sigma = matrixFromJson(j["sigma"]);
	m.eigenvalues = j["eigenvalues"].get<std::vector<double>>();
	return m;
}

json vetsToJson(const VetsModel& m) {
	json j;
	j["alpha"] = m.alpha;
	j["gamma"] = m.gamma;
	j["period"] = m.period;
	j["initial_level"] = toJson(m.initialLevel);
	j["initial_seasonal"] = toJson(m.initialSeasonal);
	j["levels"] = toJson(m.levels);
	j["seasonal"] = toJson(m.seasonal);
	j["sigma"] = toJson(m.sigma);
	return j;
}

VetsModel vetsFromJson(const json& j) {
	VetsModel m;
	m.alpha = j["alpha"].get<double>();
	m.gamma = j["gamma"].get<double>();
	m.period = j["period"].get<int>();
	m.initialLevel = vectorFromJson(j["initial_level"]);
	m.initialSeasonal = matrixFromJson(j["initial_seasonal"]);
	m.levels = matrixFromJson(j["levels"]);
	m.seasonal = matrixFromJson(j["seasonal"]);
	m.sigma = matrixFromJson(j["sigma"]);
	return m;
}

}  // namespace

PipelineConfig loadPipelineConfig(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw std::runtime_error("loadPipelineConfig: cannot open " + path);
	json j;
	in >> j;
	return configFromJson(j);
}

void savePipelineConfig(const std::string& path, const PipelineConfig& config) {
	std::ofstream out(path);
	if (!out) throw std::runtime_error("savePipelineConfig: cannot open " + path);
	out << configToJson(config).dump(2) << '\n';
}

DataStore loadDataStore(const std::string& dir) {
	DataStore data;
	data.load = readPanelCsv(dir + "/load.csv");
	data.temperature = readPanelCsv(dir + "/temp.csv");
	const std::string holidays = dir + "/holidays.csv";
	if (std::filesystem::exists(holidays)) {
		data.holidays = loadHolidayCalendar(holidays);
	}
	return data;
}

void saveExperimentFit(const std::string& dir, const Experiment& exp) {
	std::filesystem::create_directories(dir);
	json j;
	j["config"] = configToJson(exp.config);
	j["origin"] = exp.origin;
	j["seed"] = exp.seed;
	j["countries"] = exp.countries;
	json holidays = json::array();
	for (const auto& e : exp.holidays.entries()) {
		const CivilTime c = toCivil(e.dayIndex * 24);
		holidays.push_back({{"country", e.country},
		                    {"year", c.year},
		                    {"month", c.month},
		                    {"day", c.day},
		                    {"label", e.label}});
	}
	j["holidays"] = std::move(holidays);

	json temp;
	temp["series_names"] = exp.temp.seriesNames;
	temp["alphas"] = exp.temp.alphas;
	temp["final_levels"] = exp.temp.finalLevels;
	temp["domain_lo"] = exp.temp.domainLo;
	temp["domain_hi"] = exp.temp.domainHi;
	json tempGams = json::array(), tempArs = json::array();
	for (const GamFit& g : exp.temp.gams) tempGams.push_back(gamToJson(g));
	for (const PostLassoArModel& a : exp.temp.ars) tempArs.push_back(arToJson(a));
	temp["gams"] = std::move(tempGams);
	temp["ars"] = std::move(tempArs);
	temp["cov"] = covToJson(exp.temp.cov);
	temp["residuals"] = toJson(exp.temp.residuals);
	temp["in_sample"] = toJson(exp.temp.inSample);
	j["temp"] = std::move(temp);

	json state;
	state["kind"] = stateModelName(exp.state.kind);
	state["weekly"] = toJson(exp.state.weekly);
	state["anchors"] = exp.state.anchors;
	state["sigma"] = toJson(exp.state.sigma);
	switch (exp.state.kind) {
		case StateModelKind::Var: state["var"] = varToJson(exp.state.var); break;
		case StateModelKind::Vecm: state["vecm"] = vecmToJson(exp.state.vecm); break;
		case StateModelKind::Vets: state["vets"] = vetsToJson(exp.state.vets); break;
	}
	j["state"] = std::move(state);

	json load;
	json loadGams = json::array(), loadArs = json::array();
	for (const GamFit& g : exp.product.gams) loadGams.push_back(gamToJson(g));
	for (const PostLassoArModel& a : exp.product.ars) loadArs.push_back(arToJson(a));
	load["gams"] = std::move(loadGams);
	load["ars"] = std::move(loadArs);
	load["cov"] = covToJson(exp.product.cov);
	load["residuals"] = toJson(exp.product.residuals);
	j["load"] = std::move(load);

	std::ofstream out(dir + "/fit.json");
	if (!out) throw std::runtime_error("saveExperimentFit: cannot open " + dir + "/fit.json");
	out << j.dump() << '\n';
}

Experiment loadExperimentFit(const std::string& dir) {
	std::ifstream in(dir + "/fit.json");
	if (!in) throw std::runtime_error("loadExperimentFit: cannot open " + dir + "/fit.json");
	json j;
	in >> j;

	Experiment exp;
	exp.config = configFromJson(j["config"]);
	exp.origin = j["origin"].get<HourStamp>();
	exp.seed = j["seed"].get<std::uint64_t>();
	exp.countries = j["countries"].get<std::vector<std::string>>();
	exp.inSampleGrid =
	    buildHourlyGrid(exp.origin - exp.config.inSampleHours + 1, exp.config.inSampleHours);
	exp.horizonGrid = buildHourlyGrid(exp.origin + 1, exp.config.horizonHours);
	for (const auto& e : j["holidays"]) {
		exp.holidays.add(e["country"].get<std::string>(), e["year"].get<int>(),
		                 e["month"].get<int>(), e["day"].get<int>(), e["label"].get<std::string>());
	}

	const json& temp = j["temp"];
	exp.temp.seriesNames = temp["series_names"].get<std::vector<std::string>>();
	exp.temp.alphas = temp["alphas"].get<std::vector<double>>();
	exp.temp.finalLevels = temp["final_levels"].get<std::vector<double>>();
	exp.temp.domainLo = temp["domain_lo"].get<std::vector<double>>();
	exp.temp.domainHi = temp["domain_hi"].get<std::vector<double>>();
	const GamSpec tempSpec = tempGamSpec();
	for (const auto& g : temp["gams"]) exp.temp.gams.push_back(gamFromJson(g, tempSpec));
	for (const auto& a : temp["ars"]) exp.temp.ars.push_back(arFromJson(a));
	exp.temp.cov = covFromJson(temp["cov"]);
	exp.temp.residuals = matrixFromJson(temp["residuals"]);
	exp.temp.inSample = matrixFromJson(temp["in_sample"]);

	const json& state = j["state"];
	exp.state.kind = parseStateModel(state["kind"].get<std::string>());
	exp.state.weekly = matrixFromJson(state["weekly"]);
	exp.state.anchors = state["anchors"].get<std::vector<HourStamp>>();
	exp.state.sigma = matrixFromJson(state["sigma"]);
	switch (exp.state.kind) {
		case StateModelKind::Var: exp.state.var = varFromJson(state["var"]); break;
		case StateModelKind::Vecm: exp.state.vecm = vecmFromJson(state["vecm"]); break;
		case StateModelKind::Vets: exp.state.vets = vetsFromJson(state["vets"]); break;
	}

	const json& load = j["load"];
	for (std::size_t c = 0; c < exp.countries.size(); ++c) {
		const GamSpec spec = loadGamSpec(exp.temp.domainLo[2 * c], exp.temp.domainHi[2 * c],
		                                 exp.temp.domainLo[2 * c + 1], exp.temp.domainHi[2 * c + 1],
		                                 true, nullptr);
		exp.product.gams.push_back(gamFromJson(load["gams"][c], spec));
	}
	for (const auto& a : load["ars"]) exp.product.ars.push_back(arFromJson(a));
	exp.product.cov = covFromJson(load["cov"]);
	exp.product.residuals = matrixFromJson(load["residuals"]);
	return exp;
}

}  // namespace mtload
