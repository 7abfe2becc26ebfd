#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace mtload {

// Counter-based random number generation. Every draw is a pure function of
// (seed, stream, step, index), so simulations are bit-identical regardless
// of how trajectories are scheduled across threads.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t step, std::uint64_t index) {
	std::uint64_t h = splitmix64(seed);
	h = splitmix64(h ^ (stream + 0x165667b19e3779f9ULL));
	h = splitmix64(h ^ (step + 0x27d4eb2f165667c5ULL));
	h = splitmix64(h ^ (index + 0x9e3779b97f4a7c15ULL));
	return h;
}

// Uniform in (0, 1); never returns 0 or 1.
inline double uniform01(std::uint64_t bits) {
	return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Standard normal via Box-Muller on two counter-derived uniforms.
inline double standardNormal(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t step, std::uint64_t index) {
	const double u1 = uniform01(mix(seed, stream, step, 2 * index));
	const double u2 = uniform01(mix(seed, stream, step, 2 * index + 1));
	return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Eigen::VectorXd normalVector(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t step, Eigen::Index dim) {
	Eigen::VectorXd z(dim);
	for (Eigen::Index i = 0; i < dim; ++i) {
		z[i] = standardNormal(seed, stream, step, static_cast<std::uint64_t>(i));
	}
	return z;
}

// Derives a child seed, e.g. one per rolling-study experiment.
inline std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t key) {
	return splitmix64(splitmix64(master) ^ key);
}

}  // namespace rng
}  // namespace mtload
