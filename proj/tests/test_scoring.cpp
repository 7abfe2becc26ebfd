#include "mtload/scoring.hpp"

#include "mtload/timebase.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

using namespace mtload;

TEST_CASE("pinball loss hand values") {
	// Under-forecast at the median: 0.5 * (14 - 10).
	CHECK(pinballLoss(0.5, 10.0, 14.0) == doctest::Approx(2.0));
	// Under-forecast at the 90th percentile: 0.9 * (10 - 0).
	CHECK(pinballLoss(0.9, 0.0, 10.0) == doctest::Approx(9.0));
	// Over-forecast at the 90th percentile: 0.1 * (10 - 0).
	CHECK(pinballLoss(0.9, 10.0, 0.0) == doctest::Approx(1.0));
	CHECK(pinballLoss(0.25, 3.0, 3.0) == doctest::Approx(0.0));
	CHECK_THROWS(pinballLoss(0.0, 1.0, 1.0));
	CHECK_THROWS(pinballLoss(1.0, 1.0, 1.0));
}

TEST_CASE("crps hand value for a two-member ensemble") {
	// mean |x - 1| = 1, spread term (1/(2*4)) * 4 = 0.5.
	CHECK(crpsEnsemble({0.0, 2.0}, 1.0) == doctest::Approx(0.5));
	// Degenerate ensemble reduces to absolute error.
	CHECK(crpsEnsemble({3.0, 3.0, 3.0}, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("sorted crps agrees with the O(m^2) definition") {
	std::mt19937_64 gen(31);
	std::normal_distribution<double> dist;
	for (const int m : {1, 2, 17, 201, 500}) {
		std::vector<double> x(m);
		for (double& v : x) v = dist(gen) * 2.0 + 0.3;
		const double y = dist(gen);
		double absSum = 0.0, pairSum = 0.0;
		for (int i = 0; i < m; ++i) {
			absSum += std::abs(x[i] - y);
			for (int j = 0; j < m; ++j) pairSum += std::abs(x[i] - x[j]);
		}
		const double brute = absSum / m - pairSum / (2.0 * m * m);
		CHECK(crpsEnsemble(x, y) == doctest::Approx(brute).epsilon(1e-10));
	}
}

TEST_CASE("crps approximates twice the mean pinball loss over dense quantiles") {
	std::mt19937_64 gen(47);
	std::normal_distribution<double> dist;
	const int m = 400;
	std::vector<double> x(m);
	for (double& v : x) v = dist(gen);
	const double y = 0.7;
	const double crps = crpsEnsemble(x, y);
	double pinballMean = 0.0;
	int count = 0;
	std::vector<double> sorted = x;
	std::sort(sorted.begin(), sorted.end());
	for (double q = 0.01; q < 0.995; q += 0.01) {
		const double pos = (m - 1) * q;
		const auto lo = static_cast<std::size_t>(pos);
		const double frac = pos - static_cast<double>(lo);
		const double quant = sorted[lo] + frac * (sorted[std::min<std::size_t>(lo + 1, m - 1)] - sorted[lo]);
		pinballMean += pinballLoss(q, quant, y);
		++count;
	}
	pinballMean /= count;
	CHECK(std::abs(2.0 * pinballMean - crps) / crps < 0.02);
}

namespace {

TrajectoryEnsemble makeEnsemble(int nSims, int horizon, int nSeries, std::uint64_t seed) {
	std::mt19937_64 gen(seed);
	std::normal_distribution<double> dist;
	TrajectoryEnsemble ens;
	for (int j = 0; j < nSeries; ++j) ens.seriesNames.push_back("s" + std::to_string(j));
	for (int s = 0; s < nSims; ++s) {
		Matrix m(horizon, nSeries);
		for (int i = 0; i < horizon; ++i)
			for (int j = 0; j < nSeries; ++j) m(i, j) = dist(gen);
		ens.sims.push_back(m);
	}
	return ens;
}

}  // namespace

TEST_CASE("score report averages per-cell scores and buckets groups") {
	const TrajectoryEnsemble ens = makeEnsemble(30, 6, 2, 3);
	const std::vector<double> probs{0.25, 0.75};
	const QuantileGrid grid = ensembleQuantiles(ens, probs);
	Matrix actuals(6, 2);
	std::mt19937_64 gen(4);
	std::normal_distribution<double> dist;
	for (int i = 0; i < 6; ++i)
		for (int j = 0; j < 2; ++j) actuals(i, j) = dist(gen);

	const GroupKey parity = [](Eigen::Index step) {
		return (step % 2 == 0) ? std::string("even") : std::string("odd");
	};
	const ScoreReport report = scoreEnsemble(ens, grid, actuals, parity);
	REQUIRE(report.meanCrps.size() == 2);
	REQUIRE(report.meanPinball.rows() == 2);
	REQUIRE(report.meanPinball.cols() == 2);

	for (int j = 0; j < 2; ++j) {
		double crpsSum = 0.0;
		for (int i = 0; i < 6; ++i) {
			std::vector<double> cell;
			for (const Matrix& m : ens.sims) cell.push_back(m(i, j));
			crpsSum += crpsEnsemble(cell, actuals(i, j));
		}
		CHECK(report.meanCrps[j] == doctest::Approx(crpsSum / 6.0));
		for (std::size_t p = 0; p < probs.size(); ++p) {
			double pin = 0.0;
			for (int i = 0; i < 6; ++i) pin += pinballLoss(probs[p], grid.values[p](i, j), actuals(i, j));
			CHECK(report.meanPinball(static_cast<Eigen::Index>(p), j) == doctest::Approx(pin / 6.0));
		}
	}
	REQUIRE(report.groupCrps.count("even") == 1);
	REQUIRE(report.groupCrps.count("odd") == 1);
	CHECK(report.groupCounts.at("even") == 3);
	CHECK(report.groupCounts.at("odd") == 3);
	// Group means recombine to the overall mean.
	for (int j = 0; j < 2; ++j) {
		const double combined = 0.5 * (report.groupCrps.at("even")[j] + report.groupCrps.at("odd")[j]);
		CHECK(combined == doctest::Approx(report.meanCrps[j]));
	}
}

TEST_CASE("coverage frequencies are calibrated for a well-specified ensemble") {
	// Actuals drawn from the same distribution as the ensemble members: the
	// p-quantile should cover about a fraction p of the actuals.
	const int horizon = 4000;
	const TrajectoryEnsemble ens = makeEnsemble(120, horizon, 3, 11);
	const std::vector<double> probs{0.1, 0.5, 0.9};
	const QuantileGrid grid = ensembleQuantiles(ens, probs);
	std::mt19937_64 gen(99);
	std::normal_distribution<double> dist;
	Matrix actuals(horizon, 3);
	for (int i = 0; i < horizon; ++i)
		for (int j = 0; j < 3; ++j) actuals(i, j) = dist(gen);
	const CoverageTable table = coverageTable(grid, actuals, nullptr);
	REQUIRE(table.groups.size() == 1);
	CHECK(table.cellCounts[0] == horizon * 3);
	for (std::size_t p = 0; p < probs.size(); ++p) {
		CHECK(std::abs(table.frequency(static_cast<Eigen::Index>(p), 0) - probs[p]) < 0.03);
	}
}

TEST_CASE("hour-of-day grouping labels follow the civil clock") {
	const HourStamp origin = toHourStamp({2021, 6, 1, 9});
	const GroupKey key = groupByHourOfDay(origin);
	// Step 0 is the first forecast hour: origin + 1.
	CHECK(key(0) == "hour_10");
	CHECK(key(13) == "hour_23");
	CHECK(key(14) == "hour_00");
	CHECK(key(38) == "hour_00");
}

TEST_CASE("edge-week grouping marks the first and last two weeks") {
	const Eigen::Index horizon = 8736;
	const GroupKey key = groupByEdgeWeeks(horizon);
	CHECK(key(0) == "first_two_weeks");
	CHECK(key(335) == "first_two_weeks");
	CHECK(key(336) == "");
	CHECK(key(horizon - 337) == "");
	CHECK(key(horizon - 336) == "last_two_weeks");
	CHECK(key(horizon - 1) == "last_two_weeks");
}

TEST_CASE("score and coverage csv files have the documented shape") {
	const TrajectoryEnsemble ens = makeEnsemble(12, 4, 1, 8);
	const QuantileGrid grid = ensembleQuantiles(ens, {0.5});
	Matrix actuals = Matrix::Zero(4, 1);
	const ScoreReport report = scoreEnsemble(ens, grid, actuals, nullptr);
	const CoverageTable table = coverageTable(grid, actuals, nullptr);
	const std::string p1 = "test_scores_tmp.csv", p2 = "test_coverage_tmp.csv";
	writeScoreCsv(p1, "var", report);
	writeCoverageCsv(p2, "var", table);
	{
		std::FILE* f = std::fopen(p1.c_str(), "r");
		REQUIRE(f != nullptr);
		char line[256];
		REQUIRE(std::fgets(line, sizeof(line), f) != nullptr);
		CHECK(std::string(line).rfind("model,series,group,metric,value", 0) == 0);
		std::fclose(f);
	}
	{
		std::FILE* f = std::fopen(p2.c_str(), "r");
		REQUIRE(f != nullptr);
		char line[256];
		REQUIRE(std::fgets(line, sizeof(line), f) != nullptr);
		CHECK(std::string(line).rfind("model,group,probability,frequency,cells", 0) == 0);
		std::fclose(f);
	}
	std::remove(p1.c_str());
	std::remove(p2.c_str());
}
