#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

// Data-generating processes with a known conditional mean and known noise
// law, so oracle quantities (Err*, the decomposition terms, excess risks)
// are computable exactly.

namespace cvlab {

enum class XLaw {
  standard_normal,  // X ~ N(0, I_pxp)
};

using MeanFn = std::function<double(std::span<const double>)>;

// A regression DGP: X ~ x_law on R^p, Y | X ~ N(mu(X), noise_sd^2).
// Immutable after construction; safe to share across threads.
//
// noise_sd = 0 is permitted as a degenerate case (Y = mu(X) exactly); it is
// useful for oracle tests even though every preset uses noise_sd > 0.
struct Dgp {
  std::size_t p = 0;
  double noise_sd = 1.0;
  XLaw x_law = XLaw::standard_normal;
  MeanFn mu;
  std::string name;
};

// Validates p >= 1, noise_sd >= 0 (finite), mu non-null; throws
// Error(invalid_input) otherwise.
void validate(const Dgp& dgp);

// The indicator-sigmoid mean: 1{x1 > 0} / (1 + exp(-2 x2)).
// The indicator is strict, so mu = 0 on the x1 = 0 boundary.
// Requires dimension >= 2; throws Error(invalid_input) below that.
double mu_rt(std::span<const double> x);

// DGP presets. make_eq1_dgp is the indicator-sigmoid signal with standard
// normal features; make_zero_dgp has mu identically zero.
Dgp make_eq1_dgp(std::size_t p = 10, double noise_sd = 1.0);
Dgp make_zero_dgp(std::size_t p, double noise_sd = 1.0);

// Resolve a preset name ("eq1" or "zero"); throws Error(invalid_config) on
// unknown names.
Dgp dgp_preset(const std::string& name, std::size_t p, double noise_sd);

// A fixed design: n samples of (x in R^p, y). Row-major feature storage.
// Immutable by convention once filled; safe to share across threads.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t n, std::size_t p) : n_(n), p_(p), x_(n * p, 0.0), y_(n, 0.0) {}

  std::size_t n() const { return n_; }
  std::size_t p() const { return p_; }

  std::span<const double> row(std::size_t i) const { return {x_.data() + i * p_, p_}; }
  double x(std::size_t i, std::size_t j) const { return x_[i * p_ + j]; }
  double& x(std::size_t i, std::size_t j) { return x_[i * p_ + j]; }
  double y(std::size_t i) const { return y_[i]; }
  double& y(std::size_t i) { return y_[i]; }

  std::span<const double> responses() const { return y_; }
  const double* features_data() const { return x_.data(); }

  // Rows listed in `keep` (ascending), in that order.
  Dataset subset(std::span<const std::uint32_t> keep) const;

 private:
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  std::vector<double> x_;  // n * p, row-major
  std::vector<double> y_;
};

// n i.i.d. draws from the DGP. Per sample: p feature normals (in column
// order), then one noise normal; y = mu(x) + noise_sd * eps. Pure function
// of (dgp, n, seed).
Dataset sample_dataset(const Dgp& dgp, std::size_t n, std::uint64_t seed);

// Err* = E[(Y - mu(X))^2] = noise_sd^2 (homoskedastic Gaussian noise).
double true_err(const Dgp& dgp);

// Var[(Y - mu(X))^2] = 2 noise_sd^4 (fourth central moment of a Gaussian
// is 3 sigma^4).
double cv_star_asymptotic_variance(const Dgp& dgp);

// CSV with header x1,...,xp,y. Doubles are written in shortest
// round-trip-safe form; read(write(d)) reproduces d bit for bit.
void write_dataset_csv(const Dataset& data, std::ostream& out);
Dataset read_dataset_csv(std::istream& in);

}  // namespace cvlab
