#include "mtload/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mtload;

namespace {

PipelineConfig readConfig(const std::string& path) {
	if (path.empty()) return PipelineConfig{};
	return loadPipelineConfig(path);
}

void copyHolidays(const std::string& src, const std::string& dst) {
	const HolidayCalendar cal = loadHolidayCalendar(src);
	std::ofstream out(dst);
	if (!out) throw std::runtime_error("cannot open " + dst);
	out << "country,date,label\n";
	for (const auto& e : cal.entries()) {
		const CivilTime c = toCivil(e.dayIndex * 24);
		char date[16];
		std::snprintf(date, sizeof(date), "%04d-%02d-%02d", c.year, c.month, c.day);
		out << e.country << ',' << date << ',' << e.label << '\n';
	}
}

int runIngest(const std::string& loadCsv, const std::string& tempCsv, const std::string& holidays,
              const std::string& outDir) {
	fs::create_directories(outDir);
	const HourlyPanel load = readPanelCsv(loadCsv);
	const HourlyPanel temp = readPanelCsv(tempCsv);
	writePanelCsv(outDir + "/load.csv", load);
	writePanelCsv(outDir + "/temp.csv", temp);
	if (!holidays.empty()) copyHolidays(holidays, outDir + "/holidays.csv");
	std::cout << "ingested " << load.seriesNames.size() << " load series ("
	          << load.grid.length << " hours) and " << temp.seriesNames.size()
	          << " temperature series into " << outDir << "\n";
	return 0;
}

int runFit(const std::string& store, const std::string& configPath, const std::string& originText,
           const std::string& outDir) {
	const DataStore data = loadDataStore(store);
	const PipelineConfig config = readConfig(configPath);
	const HourStamp origin = parseHourStamp(originText);
	const Experiment exp = fitExperiment(data, config, origin, config.masterSeed);
	const std::string dir = outDir.empty() ? store + "/fit" : outDir;
	saveExperimentFit(dir, exp);
	writeOutlierCsv(dir + "/outliers.csv", exp.outliers);
	std::cout << "fitted " << exp.countries.size() << " series at origin "
	          << formatHourStamp(origin) << "; bundle written to " << dir << "\n";
	return 0;
}

int runForecast(const std::string& fitDir, long sims, const std::string& outDir) {
	Experiment exp = loadExperimentFit(fitDir);
	if (sims > 0) exp.config.nSims = sims;
	simulateExperiment(exp);
	fs::create_directories(outDir);
	writeEnsembleCsv(outDir + "/ensemble.csv", exp.product.load);
	writeQuantileCsv(outDir + "/quantiles.csv", exp.product.quantiles);
	std::cout << "simulated " << exp.config.nSims << " trajectories over "
	          << exp.horizonGrid.length << " hours; wrote " << outDir << "/ensemble.csv and "
	          << outDir << "/quantiles.csv\n";
	return 0;
}

int runStudy(const std::string& store, const std::string& configPath, int experiments,
             const std::string& outDir) {
	const DataStore data = loadDataStore(store);
	const PipelineConfig config = readConfig(configPath);
	fs::create_directories(outDir);
	const StudyReport report = rollingStudy(data, config, experiments, &std::cerr);
	writeStudyReports(outDir, report);
	std::cout << "study finished: " << report.origins.size() << " experiments x "
	          << report.models.size() << " state models; reports in " << outDir << "\n";
	return 0;
}

int runScenario(const std::string& fitDir, const std::string& country, const std::string& outDir) {
	Experiment exp = loadExperimentFit(fitDir);
	simulateExperiment(exp);
	const ScenarioSelection sel = selectExtremeTrajectories(exp, country);
	fs::create_directories(outDir);

	// The headline stress case: coldest temperature path, highest state path,
	// highest autoregressive path.
	const ScenarioDecomposition extreme =
	    decomposeScenario(exp, country, sel.temperature.minIndex, sel.state.maxIndex,
	                      sel.ar.maxIndex);
	writeScenarioCsv(outDir + "/scenario_extreme.csv", exp, extreme);
	const ScenarioDecomposition medium =
	    decomposeScenario(exp, country, sel.temperature.mediumIndex, sel.state.mediumIndex,
	                      sel.ar.mediumIndex);
	writeScenarioCsv(outDir + "/scenario_medium.csv", exp, medium);

	std::ofstream out(outDir + "/selection.csv");
	out << "stage,min_index,max_index,medium_index,min_score,max_score\n";
	out << "temperature," << sel.temperature.minIndex << ',' << sel.temperature.maxIndex << ','
	    << sel.temperature.mediumIndex << ',' << sel.temperature.minScore << ','
	    << sel.temperature.maxScore << '\n';
	out << "state," << sel.state.minIndex << ',' << sel.state.maxIndex << ','
	    << sel.state.mediumIndex << ',' << sel.state.minScore << ',' << sel.state.maxScore << '\n';
	out << "autoregressive," << sel.ar.minIndex << ',' << sel.ar.maxIndex << ','
	    << sel.ar.mediumIndex << ',' << sel.ar.minScore << ',' << sel.ar.maxScore << '\n';
	std::cout << "scenario decomposition for " << country << " written to " << outDir << "\n";
	return 0;
}

}  // namespace

int main(int argc, char** argv) {
	CLI::App app{"Probabilistic mid-term hourly electricity load forecasting"};
	app.require_subcommand(1);

	std::string loadCsv, tempCsv, holidays, store, configPath, origin, fitDir, outDir, country;
	std::string productDir;
	long sims = 0;
	int experiments = 1;

	CLI::App* ingest = app.add_subcommand("ingest", "Normalize raw CSVs into a data store");
	ingest->add_option("--load", loadCsv, "hourly load CSV")->required();
	ingest->add_option("--temp", tempCsv, "hourly temperature CSV")->required();
	ingest->add_option("--holidays", holidays, "holiday list (CSV or JSON)");
	ingest->add_option("--out", outDir, "store directory")->required();

	CLI::App* fit = app.add_subcommand("fit", "Fit all three stages at a forecast origin");
	fit->add_option("--store", store, "data store directory")->required();
	fit->add_option("--config", configPath, "JSON configuration");
	fit->add_option("--origin", origin, "forecast origin timestamp")->required();
	fit->add_option("--out", outDir, "fit bundle directory (default <store>/fit)");

	CLI::App* forecast = app.add_subcommand("forecast", "Simulate trajectories from a fit bundle");
	forecast->add_option("--store", store, "data store directory (unused, kept for symmetry)");
	forecast->add_option("--fit", fitDir, "fit bundle directory")->required();
	forecast->add_option("--sims", sims, "number of trajectories (default from the fit)");
	forecast->add_option("--out", outDir, "output directory")->required();

	CLI::App* study = app.add_subcommand("study", "Rolling multi-origin evaluation study");
	study->add_option("--store", store, "data store directory")->required();
	study->add_option("--config", configPath, "JSON configuration");
	study->add_option("--experiments", experiments, "number of monthly origins")->required();
	study->add_option("--out", outDir, "output directory")->required();

	CLI::App* scenario = app.add_subcommand("scenario", "Extreme-trajectory decomposition");
	scenario->add_option("--fit", fitDir, "fit bundle directory")->required();
	scenario->add_option("--product", productDir, "forecast product directory (optional)");
	scenario->add_option("--country", country, "series to decompose")->required();
	scenario->add_option("--out", outDir, "output directory")->required();

	CLI11_PARSE(app, argc, argv);

	try {
		if (*ingest) return runIngest(loadCsv, tempCsv, holidays, outDir);
		if (*fit) return runFit(store, configPath, origin, outDir);
		if (*forecast) return runForecast(fitDir, sims, outDir);
		if (*study) return runStudy(store, configPath, experiments, outDir);
		if (*scenario) return runScenario(fitDir, country, outDir);
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 0;
}
