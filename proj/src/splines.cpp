#include "mtload/splines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtload {

void BasisSpec::validate() const {
	if (k < 4) {
		throw std::invalid_argument("BasisSpec: cubic basis needs k >= 4, got " + std::to_string(k));
	}
	if (!(lo < hi)) {
		throw std::invalid_argument("BasisSpec: domain must satisfy lo < hi");
	}
	if (penaltyOrder < 1) {
		throw std::invalid_argument("BasisSpec: penalty order must be >= 1");
	}
	if (k < penaltyOrder + 1) {
		throw std::invalid_argument("BasisSpec: need k >= p + 1 (k = " + std::to_string(k) +
		                            ", p = " + std::to_string(penaltyOrder) + ")");
	}
}

double cubicCardinal(double u) {
	if (u <= 0.0 || u >= 4.0) return 0.0;
	if (u < 1.0) return u * u * u / 6.0;
	if (u < 2.0) {
		const double v = u - 1.0;
		return (1.0 + 3.0 * v + 3.0 * v * v - 3.0 * v * v * v) / 6.0;
	}
	if (u < 3.0) {
		const double v = u - 2.0;
		return (4.0 - 6.0 * v * v + 3.0 * v * v * v) / 6.0;
	}
	const double v = u - 3.0;
	return (1.0 - v) * (1.0 - v) * (1.0 - v) / 6.0;
}

Matrix bsplineDesign(const Vector& x, const BasisSpec& spec) {
	spec.validate();
	const Eigen::Index n = x.size();
	Matrix design = Matrix::Zero(n, spec.k);
	const double span = spec.hi - spec.lo;

	if (spec.cyclic) {
		const double h = span / spec.k;
		for (Eigen::Index i = 0; i < n; ++i) {
			double u = std::fmod((x[i] - spec.lo) / h, static_cast<double>(spec.k));
			if (u < 0.0) u += spec.k;
			// Basis j is nonzero when (u - j) mod k lies in (0, 4).
			const int base = static_cast<int>(std::floor(u));
			for (int off = 0; off < 4; ++off) {
				const int j = ((base - off) % spec.k + spec.k) % spec.k;
				double d = u - (base - off);
				design(i, j) = cubicCardinal(d);
			}
		}
	} else {
		const double h = span / (spec.k - 3);
		const double tol = 1e-9 * span;
		for (Eigen::Index i = 0; i < n; ++i) {
			double xi = x[i];
			if (xi < spec.lo - tol || xi > spec.hi + tol) {
				throw std::invalid_argument("bsplineDesign: value " + std::to_string(xi) +
				                            " outside domain [" + std::to_string(spec.lo) + ", " +
				                            std::to_string(spec.hi) + "]");
			}
			xi = std::min(std::max(xi, spec.lo), spec.hi);
			const double u = (xi - spec.lo) / h;
			// Basis j covers [lo + (j-3)h, lo + (j+1)h]; 4 bases overlap each cell.
			int cell = static_cast<int>(std::floor(u));
			if (cell > spec.k - 4) cell = spec.k - 4;
			for (int off = 0; off < 4; ++off) {
				const int j = cell + off;
				design(i, j) = cubicCardinal(u - (j - 3));
			}
		}
	}
	return design;
}

Matrix differenceMatrix(const BasisSpec& spec) {
	spec.validate();
	const int k = spec.k;
	const int p = spec.penaltyOrder;
	// Binomial coefficients of (1 - B)^p.
	std::vector<double> coef(p + 1);
	for (int j = 0; j <= p; ++j) {
		double c = 1.0;
		for (int i = 0; i < j; ++i) c = c * (p - i) / (i + 1);
		coef[j] = ((j % 2) ? -1.0 : 1.0) * c;
	}
	if (spec.cyclic) {
		Matrix d = Matrix::Zero(k, k);
		for (int i = 0; i < k; ++i) {
			for (int j = 0; j <= p; ++j) {
				d(i, ((i - j) % k + k) % k) += coef[j];
			}
		}
		return d;
	}
	Matrix d = Matrix::Zero(k - p, k);
	for (int i = 0; i < k - p; ++i) {
		for (int j = 0; j <= p; ++j) {
			d(i, i + p - j) += coef[j];
		}
	}
	return d;
}

Matrix differencePenalty(const BasisSpec& spec) {
	const Matrix d = differenceMatrix(spec);
	Matrix s = d.transpose() * d;
	return 0.5 * (s + s.transpose());
}

TensorProduct tensorDesign(const std::vector<Matrix>& designs,
                           const std::vector<Matrix>& penalties) {
	if (designs.empty() || designs.size() != penalties.size()) {
		throw std::invalid_argument("tensorDesign: need matching non-empty design and penalty lists");
	}
	const Eigen::Index rows = designs.front().rows();
	Eigen::Index cols = 1;
	for (const Matrix& m : designs) {
		if (m.rows() != rows) {
			throw std::invalid_argument("tensorDesign: marginal designs have mismatched row counts");
		}
		cols *= m.cols();
	}

	TensorProduct out;
	out.design = Matrix::Ones(rows, 1);
	for (const Matrix& m : designs) {
		Matrix next(rows, out.design.cols() * m.cols());
		for (Eigen::Index r = 0; r < rows; ++r) {
			Eigen::Index c = 0;
			for (Eigen::Index a = 0; a < out.design.cols(); ++a) {
				for (Eigen::Index b = 0; b < m.cols(); ++b) {
					next(r, c++) = out.design(r, a) * m(r, b);
				}
			}
		}
		out.design = std::move(next);
	}

	for (std::size_t j = 0; j < penalties.size(); ++j) {
		Eigen::Index pre = 1, post = 1;
		for (std::size_t a = 0; a < j; ++a) pre *= designs[a].cols();
		for (std::size_t a = j + 1; a < designs.size(); ++a) post *= designs[a].cols();
		const Matrix& s = penalties[j];
		const Eigen::Index kj = s.rows();
		Matrix embedded = Matrix::Zero(pre * kj * post, pre * kj * post);
		for (Eigen::Index a = 0; a < pre; ++a) {
			for (Eigen::Index r = 0; r < kj; ++r) {
				for (Eigen::Index c = 0; c < kj; ++c) {
					if (s(r, c) == 0.0) continue;
					for (Eigen::Index b = 0; b < post; ++b) {
						embedded(a * kj * post + r * post + b, a * kj * post + c * post + b) = s(r, c);
					}
				}
			}
		}
		out.penalties.push_back(std::move(embedded));
	}
	return out;
}

}  // namespace mtload
