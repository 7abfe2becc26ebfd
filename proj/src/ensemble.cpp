#include "mtload/ensemble.hpp"

#include "mtload/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace mtload {

ErrorCovariance estimateCovariance(const Matrix& residuals, const std::string& source) {
	const Eigen::Index t = residuals.rows();
	if (t < 2) {
		throw std::invalid_argument("estimateCovariance: need at least 2 residual rows, got " +
		                            std::to_string(t));
	}
	Matrix sigma = residuals.transpose() * residuals / static_cast<double>(t - 1);
	sigma = 0.5 * (sigma + sigma.transpose()).eval();
	return ErrorCovariance{std::move(sigma), 0.0, source};
}

ErrorCovariance shrinkDiagonal(const ErrorCovariance& cov, double weight) {
	if (weight < 0.0 || weight > 1.0) {
		throw std::invalid_argument("shrinkDiagonal: weight must be in [0,1]");
	}
	ErrorCovariance out = cov;
	Matrix diag = cov.sigma.diagonal().asDiagonal();
	out.sigma = (1.0 - weight) * cov.sigma + weight * diag;
	return out;
}

Matrix psdFactor(const Matrix& sigma, double* jitterApplied) {
	if (jitterApplied) *jitterApplied = 0.0;
	if (sigma.isZero(0.0)) {
		return Matrix::Zero(sigma.rows(), sigma.cols());
	}
	return choleskyWithJitter(sigma, jitterApplied, "covariance");
}

std::vector<Matrix> sampleErrors(const ErrorCovariance& cov, Eigen::Index steps,
                                 Eigen::Index nSims, std::uint64_t seed) {
	if (nSims < 1 || steps < 1) {
		throw std::invalid_argument("sampleErrors: steps and nSims must be >= 1");
	}
	const Eigen::Index n = cov.sigma.rows();
	const Matrix l = psdFactor(cov.sigma);
	std::vector<Matrix> draws(static_cast<std::size_t>(nSims));
	for (Eigen::Index s = 0; s < nSims; ++s) {
		Matrix m(steps, n);
		for (Eigen::Index h = 0; h < steps; ++h) {
			m.row(h) = (l * rng::normalVector(seed, static_cast<std::uint64_t>(s),
			                                  static_cast<std::uint64_t>(h), n))
			               .transpose();
		}
		draws[static_cast<std::size_t>(s)] = std::move(m);
	}
	return draws;
}

double quantileType7(std::vector<double> values, double p) {
	if (values.empty()) {
		throw std::invalid_argument("quantileType7: empty sample");
	}
	std::sort(values.begin(), values.end());
	const double h = (static_cast<double>(values.size()) - 1.0) * p;
	const std::size_t lo = static_cast<std::size_t>(std::floor(h));
	if (lo + 1 >= values.size()) return values.back();
	const double frac = h - static_cast<double>(lo);
	return values[lo] + frac * (values[lo + 1] - values[lo]);
}

QuantileGrid ensembleQuantiles(const TrajectoryEnsemble& ens,
                               const std::vector<double>& probabilities) {
	for (std::size_t i = 0; i < probabilities.size(); ++i) {
		if (probabilities[i] <= 0.0 || probabilities[i] >= 1.0) {
			throw std::invalid_argument("ensembleQuantiles: probabilities must lie in (0,1)");
		}
		if (i > 0 && probabilities[i] < probabilities[i - 1]) {
			throw std::invalid_argument("ensembleQuantiles: probabilities must be sorted");
		}
	}
	QuantileGrid grid;
	grid.probabilities = probabilities;
	grid.origin = ens.origin;
	grid.seriesNames = ens.seriesNames;
	const Eigen::Index h = ens.horizon();
	const Eigen::Index ns = ens.nSeries();
	const Eigen::Index m = ens.nSims();
	grid.values.assign(probabilities.size(), Matrix::Zero(h, ns));
	std::vector<double> cell(static_cast<std::size_t>(m));
	for (Eigen::Index r = 0; r < h; ++r) {
		for (Eigen::Index c = 0; c < ns; ++c) {
			for (Eigen::Index s = 0; s < m; ++s) {
				cell[static_cast<std::size_t>(s)] = ens.sims[static_cast<std::size_t>(s)](r, c);
			}
			std::sort(cell.begin(), cell.end());
			for (std::size_t q = 0; q < probabilities.size(); ++q) {
				const double hp = (static_cast<double>(m) - 1.0) * probabilities[q];
				const std::size_t lo = static_cast<std::size_t>(std::floor(hp));
				double v;
				if (lo + 1 >= cell.size()) {
					v = cell.back();
				} else {
					v = cell[lo] + (hp - static_cast<double>(lo)) * (cell[lo + 1] - cell[lo]);
				}
				grid.values[q](r, c) = v;
			}
		}
	}
	return grid;
}

namespace {

void writeRows(std::ofstream& out, const std::vector<std::string>& names, HourStamp origin,
               const Matrix& m, const std::string& tag) {
	for (Eigen::Index c = 0; c < m.cols(); ++c) {
		const std::string& name = names[static_cast<std::size_t>(c)];
		for (Eigen::Index r = 0; r < m.rows(); ++r) {
			out << name << ',' << r << ',' << formatHourStamp(origin + r) << ',' << tag << ','
			    << m(r, c) << '\n';
		}
	}
}

}  // namespace

void writeEnsembleCsv(const std::string& path, const TrajectoryEnsemble& ens) {
	std::ofstream out(path);
	if (!out) throw std::runtime_error("cannot write file: " + path);
	out.precision(12);
	out << "series,horizon_index,timestamp,sim_or_prob,value\n";
	for (Eigen::Index s = 0; s < ens.nSims(); ++s) {
		writeRows(out, ens.seriesNames, ens.origin, ens.sims[static_cast<std::size_t>(s)],
		          std::to_string(s));
	}
}

void writeQuantileCsv(const std::string& path, const QuantileGrid& grid) {
	std::ofstream out(path);
	if (!out) throw std::runtime_error("cannot write file: " + path);
	out.precision(12);
	out << "series,horizon_index,timestamp,sim_or_prob,value\n";
	char buf[32];
	for (std::size_t q = 0; q < grid.probabilities.size(); ++q) {
		std::snprintf(buf, sizeof(buf), "%g", grid.probabilities[q]);
		writeRows(out, grid.seriesNames, grid.origin, grid.values[q], buf);
	}
}

TrajectoryEnsemble readEnsembleCsv(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw std::runtime_error("cannot open file: " + path);
	std::string line;
	std::getline(in, line);  // header
	TrajectoryEnsemble ens;
	std::map<std::string, Eigen::Index> seriesIndex;
	struct Cell { Eigen::Index sim, row, col; double value; };
	std::vector<Cell> cells;
	Eigen::Index maxSim = -1, maxRow = -1;
	bool originSet = false;
	while (std::getline(in, line)) {
		if (line.empty()) continue;
		std::vector<std::string> f;
		std::string cur;
		for (char ch : line) {
			if (ch == ',') { f.push_back(cur); cur.clear(); }
			else if (ch != '\r') cur += ch;
		}
		f.push_back(cur);
		if (f.size() != 5) throw std::runtime_error("ensemble csv: malformed row in " + path);
		auto [it, inserted] = seriesIndex.try_emplace(f[0], static_cast<Eigen::Index>(seriesIndex.size()));
		if (inserted) ens.seriesNames.push_back(f[0]);
		const Eigen::Index row = std::stoll(f[1]);
		const Eigen::Index sim = std::stoll(f[3]);
		if (!originSet && row == 0) {
			ens.origin = parseHourStamp(f[2]);
			originSet = true;
		}
		cells.push_back(Cell{sim, row, it->second, std::stod(f[4])});
		maxSim = std::max(maxSim, sim);
		maxRow = std::max(maxRow, row);
	}
	ens.sims.assign(static_cast<std::size_t>(maxSim + 1),
	                Matrix::Zero(maxRow + 1, static_cast<Eigen::Index>(ens.seriesNames.size())));
	for (const Cell& c : cells) {
		ens.sims[static_cast<std::size_t>(c.sim)](c.row, c.col) = c.value;
	}
	return ens;
}

}  // namespace mtload
