#include "mtload/ensemble.hpp"

#include <doctest.h>

#include <cstdio>
#include <numeric>
#include <random>

using namespace mtload;

TEST_CASE("residual covariance uses the uncentered second moment") {
	Matrix resid(2, 2);
	resid << 1, -1,
	         -1, 1;
	const ErrorCovariance cov = estimateCovariance(resid, "unit");
	Matrix expected(2, 2);
	expected << 2, -2,
	            -2, 2;
	CHECK((cov.sigma - expected).cwiseAbs().maxCoeff() == 0.0);
	CHECK(cov.source == "unit");

	// The sample mean is deliberately not subtracted: a constant residual
	// panel still reports a nonzero covariance.
	Matrix constant = Matrix::Ones(5, 1) * 3.0;
	CHECK(estimateCovariance(constant).sigma(0, 0) == doctest::Approx(45.0 / 4.0));
}

TEST_CASE("diagonal shrinkage interpolates toward the variance diagonal") {
	Matrix resid(3, 2);
	resid << 1, 2, -1, 0.5, 0.25, -2;
	const ErrorCovariance cov = estimateCovariance(resid);
	const ErrorCovariance half = shrinkDiagonal(cov, 0.5);
	CHECK(half.sigma(0, 0) == doctest::Approx(cov.sigma(0, 0)));
	CHECK(half.sigma(0, 1) == doctest::Approx(0.5 * cov.sigma(0, 1)));
	const ErrorCovariance full = shrinkDiagonal(cov, 1.0);
	CHECK(full.sigma(1, 0) == 0.0);
}

TEST_CASE("psd factor maps zero to zero and repairs rounding-level deficiency") {
	const Matrix zero = Matrix::Zero(3, 3);
	double jitter = -1.0;
	const Matrix l0 = psdFactor(zero, &jitter);
	CHECK(l0.cwiseAbs().maxCoeff() == 0.0);
	CHECK(jitter == 0.0);

	// Indefinite by about -5e-13: jitter escalation must rescue the factor.
	Matrix nearPsd(2, 2);
	nearPsd << 1.0, 1.0,
	           1.0, 1.0 - 1e-12;
	const Matrix l = psdFactor(nearPsd, &jitter);
	CHECK(l.allFinite());
	CHECK(jitter > 0.0);
	CHECK(((l * l.transpose()) - nearPsd).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("type-7 quantiles interpolate order statistics") {
	std::vector<double> ranks(200);
	std::iota(ranks.begin(), ranks.end(), 1.0);
	std::shuffle(ranks.begin(), ranks.end(), std::mt19937_64(5));
	CHECK(quantileType7(ranks, 0.5) == doctest::Approx(100.5));
	CHECK(quantileType7(ranks, 0.01) == doctest::Approx(1.0 + 0.01 * 199.0));
	CHECK(quantileType7({10.0, 20.0}, 0.25) == doctest::Approx(12.5));
	CHECK(quantileType7({7.0}, 0.9) == doctest::Approx(7.0));
}

TEST_CASE("ensemble quantiles match the per-cell scalar routine") {
	std::mt19937_64 gen(9);
	std::normal_distribution<double> dist;
	TrajectoryEnsemble ens;
	ens.seriesNames = {"a", "b"};
	for (int s = 0; s < 25; ++s) {
		Matrix m(4, 2);
		for (int i = 0; i < 4; ++i)
			for (int j = 0; j < 2; ++j) m(i, j) = dist(gen);
		ens.sims.push_back(m);
	}
	const std::vector<double> probs{0.1, 0.5, 0.9};
	const QuantileGrid grid = ensembleQuantiles(ens, probs);
	REQUIRE(grid.values.size() == 3);
	for (std::size_t p = 0; p < probs.size(); ++p) {
		for (int i = 0; i < 4; ++i) {
			for (int j = 0; j < 2; ++j) {
				std::vector<double> cell;
				for (const Matrix& m : ens.sims) cell.push_back(m(i, j));
				CHECK(grid.values[p](i, j) == doctest::Approx(quantileType7(cell, probs[p])));
			}
		}
	}
	CHECK(grid.seriesNames == ens.seriesNames);
}

TEST_CASE("error sampling is a pure function of (seed, sim, step)") {
	Matrix resid(40, 2);
	std::mt19937_64 gen(13);
	std::normal_distribution<double> dist;
	for (int i = 0; i < 40; ++i) {
		const double u = dist(gen), v = dist(gen);
		resid(i, 0) = u;
		resid(i, 1) = 0.8 * u + 0.6 * v;
	}
	const ErrorCovariance cov = estimateCovariance(resid);
	const auto few = sampleErrors(cov, 6, 3, 42);
	const auto many = sampleErrors(cov, 6, 8, 42);
	REQUIRE(few.size() == 3);
	REQUIRE(many.size() == 8);
	for (int s = 0; s < 3; ++s) {
		CHECK((few[s] - many[s]).cwiseAbs().maxCoeff() == 0.0);
	}
	const auto other = sampleErrors(cov, 6, 3, 43);
	CHECK((few[0] - other[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("sampled errors reproduce the target covariance") {
	Matrix sigmaSeed(2, 2);
	sigmaSeed << 4.0, 1.2,
	             1.2, 1.0;
	ErrorCovariance cov;
	cov.sigma = sigmaSeed;
	const auto draws = sampleErrors(cov, 400, 50, 7);
	Matrix acc = Matrix::Zero(2, 2);
	long n = 0;
	for (const Matrix& m : draws) {
		for (Eigen::Index i = 0; i < m.rows(); ++i) {
			acc += m.row(i).transpose() * m.row(i);
			++n;
		}
	}
	acc /= static_cast<double>(n);
	CHECK((acc - sigmaSeed).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("trajectory csv round-trips exactly") {
	TrajectoryEnsemble ens;
	ens.origin = 1234;
	ens.seriesNames = {"FR", "DE"};
	std::mt19937_64 gen(21);
	std::normal_distribution<double> dist;
	for (int s = 0; s < 3; ++s) {
		Matrix m(5, 2);
		for (int i = 0; i < 5; ++i)
			for (int j = 0; j < 2; ++j) m(i, j) = dist(gen);
		ens.sims.push_back(m);
	}
	const std::string path = "test_ensemble_tmp.csv";
	writeEnsembleCsv(path, ens);
	const TrajectoryEnsemble back = readEnsembleCsv(path);
	REQUIRE(back.nSims() == 3);
	CHECK(back.origin == ens.origin);
	CHECK(back.seriesNames == ens.seriesNames);
	for (int s = 0; s < 3; ++s) {
		CHECK((back.sims[s] - ens.sims[s]).cwiseAbs().maxCoeff() < 1e-9);
	}
	std::remove(path.c_str());
}
