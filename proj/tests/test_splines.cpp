#include "mtload/splines.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace mtload;

namespace {

// Independent Cox-de Boor recursion on the uniform extended knot vector
// t_i = lo + (i - 3) h, used as an oracle for the closed-form cardinal basis.
double deBoor(double x, int j, int degree, const std::vector<double>& t) {
	if (degree == 0) {
		return (x >= t[j] && x < t[j + 1]) ? 1.0 : 0.0;
	}
	double left = 0.0, right = 0.0;
	if (t[j + degree] > t[j]) {
		left = (x - t[j]) / (t[j + degree] - t[j]) * deBoor(x, j, degree - 1, t);
	}
	if (t[j + degree + 1] > t[j + 1]) {
		right = (t[j + degree + 1] - x) / (t[j + degree + 1] - t[j + 1]) *
		        deBoor(x, j + 1, degree - 1, t);
	}
	return left + right;
}

}  // namespace

TEST_CASE("cardinal cubic piece has the textbook shape") {
	CHECK(cubicCardinal(-0.5) == 0.0);
	CHECK(cubicCardinal(0.0) == 0.0);
	CHECK(cubicCardinal(4.0) == 0.0);
	CHECK(cubicCardinal(2.0) == doctest::Approx(2.0 / 3.0));
	CHECK(cubicCardinal(1.0) == doctest::Approx(1.0 / 6.0));
	CHECK(cubicCardinal(3.0) == doctest::Approx(1.0 / 6.0));
	// Symmetry about u = 2.
	for (double u = 0.1; u < 2.0; u += 0.17) {
		CHECK(cubicCardinal(u) == doctest::Approx(cubicCardinal(4.0 - u)).epsilon(1e-12));
	}
}

TEST_CASE("spec validation rejects degenerate bases") {
	BasisSpec bad{3, 0.0, 1.0, false, 2};
	CHECK_THROWS(bad.validate());
	BasisSpec flipped{8, 1.0, 0.0, false, 2};
	CHECK_THROWS(flipped.validate());
	BasisSpec order0{8, 0.0, 1.0, false, 0};
	CHECK_THROWS(order0.validate());
	BasisSpec ok{8, 0.0, 1.0, true, 2};
	CHECK_NOTHROW(ok.validate());
}

TEST_CASE("open basis matches a Cox-de Boor oracle and sums to one") {
	const BasisSpec spec{9, -2.0, 5.0, false, 2};
	const double h = (spec.hi - spec.lo) / (spec.k - 3);
	std::vector<double> knots(spec.k + 4);
	for (int i = 0; i < spec.k + 4; ++i) knots[i] = spec.lo + (i - 3) * h;

	std::mt19937_64 gen(11);
	std::uniform_real_distribution<double> dist(spec.lo, spec.hi);
	Vector x(60);
	for (int i = 0; i < 58; ++i) x[i] = dist(gen);
	x[58] = spec.lo;
	x[59] = spec.hi - 1e-9;  // the closed right edge folds into the last cell

	const Matrix design = bsplineDesign(x, spec);
	REQUIRE(design.rows() == 60);
	REQUIRE(design.cols() == spec.k);
	for (Eigen::Index i = 0; i < x.size(); ++i) {
		CHECK(design.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
		for (int j = 0; j < spec.k; ++j) {
			CHECK(design(i, j) == doctest::Approx(deBoor(x[i], j, 3, knots)).epsilon(1e-10));
		}
	}
}

TEST_CASE("open basis rejects out-of-domain values") {
	const BasisSpec spec{6, 0.0, 1.0, false, 2};
	Vector x(1);
	x[0] = 1.5;
	CHECK_THROWS(bsplineDesign(x, spec));
	x[0] = -0.2;
	CHECK_THROWS(bsplineDesign(x, spec));
}

TEST_CASE("cyclic basis is periodic and shift-equivariant") {
	const BasisSpec spec{8, 0.0, 24.0, true, 2};
	const double h = 24.0 / spec.k;
	std::mt19937_64 gen(3);
	std::uniform_real_distribution<double> dist(0.0, 24.0);
	Vector x(40), xWrapped(40), xShifted(40);
	for (int i = 0; i < 40; ++i) {
		x[i] = dist(gen);
		xWrapped[i] = x[i] + 24.0 * ((i % 5) - 2);
		xShifted[i] = x[i] + h;
	}
	const Matrix d = bsplineDesign(x, spec);
	const Matrix dw = bsplineDesign(xWrapped, spec);
	const Matrix ds = bsplineDesign(xShifted, spec);
	CHECK((d - dw).cwiseAbs().maxCoeff() < 1e-9);
	// Advancing the covariate by one cell rotates the coefficients by one slot.
	for (Eigen::Index i = 0; i < x.size(); ++i) {
		CHECK(d.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
		for (int j = 0; j < spec.k; ++j) {
			CHECK(ds(i, (j + 1) % spec.k) == doctest::Approx(d(i, j)).epsilon(1e-10));
		}
	}
}

TEST_CASE("first-order open difference matrix is the signed adjacency stencil") {
	const BasisSpec spec{4, 0.0, 1.0, false, 1};
	const Matrix d = differenceMatrix(spec);
	Matrix expected(3, 4);
	expected << -1, 1, 0, 0,
	             0, -1, 1, 0,
	             0, 0, -1, 1;
	CHECK((d - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("penalty quadratic form equals the sum of squared differences") {
	std::mt19937_64 gen(17);
	std::normal_distribution<double> dist;
	for (const bool cyclic : {false, true}) {
		for (const int p : {1, 2, 3}) {
			const BasisSpec spec{7, 0.0, 1.0, cyclic, p};
			const Matrix s = differencePenalty(spec);
			CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
			Vector beta(spec.k);
			for (int i = 0; i < spec.k; ++i) beta[i] = dist(gen);
			double direct = 0.0;
			if (cyclic) {
				for (int i = 0; i < spec.k; ++i) {
					double diff = 0.0;
					double c = 1.0;
					for (int j = 0; j <= p; ++j) {
						diff += ((j % 2) ? -1.0 : 1.0) * c * beta[((i - j) % spec.k + spec.k) % spec.k];
						c = c * (p - j) / (j + 1);
					}
					direct += diff * diff;
				}
			} else {
				for (int i = 0; i < spec.k - p; ++i) {
					double diff = 0.0;
					double c = 1.0;
					for (int j = 0; j <= p; ++j) {
						diff += ((j % 2) ? -1.0 : 1.0) * c * beta[i + p - j];
						c = c * (p - j) / (j + 1);
					}
					direct += diff * diff;
				}
			}
			CHECK(beta.transpose() * s * beta == doctest::Approx(direct).epsilon(1e-10));
		}
	}
}

TEST_CASE("cyclic second-difference rows wrap across the seam") {
	const BasisSpec spec{4, 0.0, 1.0, true, 2};
	const Matrix s = differencePenalty(spec);
	// One wrapped row contributes (b1 - 2 b4 + b3)^2; probe it directly.
	Vector beta = Vector::Zero(4);
	beta[0] = 1.0;  // b1
	beta[3] = 1.0;  // b4
	beta[2] = 1.0;  // b3
	// With b2 = 0: differences are (b1-2b4+b3)=0, (b2-2b1+b4)=-1,
	// (b3-2b2+b1)=2, (b4-2b3+b2)=-1 -> total 6.
	CHECK(beta.transpose() * s * beta == doctest::Approx(6.0));
}

TEST_CASE("difference penalties have the expected rank") {
	for (const int p : {1, 2}) {
		const BasisSpec open{10, 0.0, 1.0, false, p};
		Eigen::FullPivLU<Matrix> lu(differencePenalty(open));
		lu.setThreshold(1e-9);
		CHECK(lu.rank() == open.k - p);
	}
	// The cyclic penalty annihilates constants only.
	const BasisSpec cyc{10, 0.0, 1.0, true, 2};
	Eigen::FullPivLU<Matrix> lu(differencePenalty(cyc));
	lu.setThreshold(1e-9);
	CHECK(lu.rank() == cyc.k - 1);
	const Matrix s = differencePenalty(cyc);
	CHECK((s * Vector::Ones(cyc.k)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tensor design is the row-wise Kronecker product") {
	Matrix a(2, 2), b(2, 3);
	a << 1, 2, 3, 4;
	b << 5, 6, 7, 8, 9, 10;
	Matrix sa = Matrix::Identity(2, 2), sb = Matrix::Identity(3, 3);
	const TensorProduct tp = tensorDesign({a, b}, {sa, sb});
	REQUIRE(tp.design.rows() == 2);
	REQUIRE(tp.design.cols() == 6);
	// First marginal varies slowest.
	Matrix expected(2, 6);
	expected << 5, 6, 7, 10, 12, 14,
	            24, 27, 30, 32, 36, 40;
	CHECK((tp.design - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tensor penalties embed each marginal with identities elsewhere") {
	const BasisSpec s1{5, 0.0, 1.0, false, 2};
	const BasisSpec s2{4, 0.0, 1.0, true, 2};
	std::mt19937_64 gen(23);
	std::uniform_real_distribution<double> dist(0.0, 1.0);
	Vector x1(12), x2(12);
	for (int i = 0; i < 12; ++i) {
		x1[i] = dist(gen);
		x2[i] = dist(gen);
	}
	const Matrix d1 = bsplineDesign(x1, s1);
	const Matrix d2 = bsplineDesign(x2, s2);
	const Matrix p1 = differencePenalty(s1);
	const Matrix p2 = differencePenalty(s2);
	const TensorProduct tp = tensorDesign({d1, d2}, {p1, p2});
	REQUIRE(tp.penalties.size() == 2);

	// Kronecker oracles: S1 (x) I and I (x) S2.
	const auto kron = [](const Matrix& l, const Matrix& r) {
		Matrix out(l.rows() * r.rows(), l.cols() * r.cols());
		for (Eigen::Index i = 0; i < l.rows(); ++i) {
			for (Eigen::Index j = 0; j < l.cols(); ++j) {
				out.block(i * r.rows(), j * r.cols(), r.rows(), r.cols()) = l(i, j) * r;
			}
		}
		return out;
	};
	CHECK((tp.penalties[0] - kron(p1, Matrix::Identity(s2.k, s2.k))).cwiseAbs().maxCoeff() < 1e-12);
	CHECK((tp.penalties[1] - kron(Matrix::Identity(s1.k, s1.k), p2)).cwiseAbs().maxCoeff() < 1e-12);

	// Partition of unity survives the product.
	for (Eigen::Index i = 0; i < 12; ++i) {
		CHECK(tp.design.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
	}
}
