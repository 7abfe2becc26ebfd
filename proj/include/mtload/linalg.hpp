#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mtload {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Cholesky factorization with diagonal jitter escalation. Starts at
// 1e-10 * trace(A)/n and escalates by x10 up to 4 times before giving up.
// On success returns the lower factor L with A + jitter*I = L L^T and
// records the jitter that was needed.
inline Matrix choleskyWithJitter(const Matrix& a, double* jitterApplied = nullptr,
                                 const std::string& context = "matrix") {
	if (a.rows() != a.cols()) {
		throw std::invalid_argument(context + ": Cholesky of non-square matrix");
	}
	const Eigen::Index n = a.rows();
	double jitter = 0.0;
	double base = 1e-10 * a.trace() / static_cast<double>(n);
	if (base <= 0.0) base = 1e-14;
	for (int attempt = 0; attempt <= 4; ++attempt) {
		Matrix trial = a;
		if (jitter > 0.0) trial.diagonal().array() += jitter;
		Eigen::LLT<Matrix> llt(trial);
		if (llt.info() == Eigen::Success) {
			if (jitterApplied) *jitterApplied = jitter;
			return llt.matrixL();
		}
		jitter = (attempt == 0) ? base : jitter * 10.0;
	}
	Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
	throw std::runtime_error(context + ": not positive definite after jitter escalation (min eigenvalue " +
	                         std::to_string(eig.eigenvalues().minCoeff()) + ")");
}

inline bool allFinite(const Matrix& m) { return m.allFinite(); }

}  // namespace mtload
