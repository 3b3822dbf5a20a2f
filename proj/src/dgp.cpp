#include "cvlab/dgp.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "cvlab/csv.hpp"
#include "cvlab/error.hpp"
#include "cvlab/rng.hpp"

namespace cvlab {

void validate(const Dgp& dgp) {
  if (dgp.p < 1) throw Error(Errc::invalid_input, "dgp: p must be >= 1");
  if (!(dgp.noise_sd >= 0.0) || !std::isfinite(dgp.noise_sd)) {
    throw Error(Errc::invalid_input, "dgp: noise_sd must be finite and >= 0");
  }
  if (!dgp.mu) throw Error(Errc::invalid_input, "dgp: mu is not set");
}

double mu_rt(std::span<const double> x) {
  if (x.size() < 2) {
    throw Error(Errc::invalid_input, "mu_rt needs dimension >= 2");
  }
  if (!(x[0] > 0.0)) return 0.0;
  return 1.0 / (1.0 + std::exp(-2.0 * x[1]));
}

Dgp make_eq1_dgp(std::size_t p, double noise_sd) {
  if (p < 2) throw Error(Errc::invalid_input, "eq1 dgp needs p >= 2");
  Dgp dgp;
  dgp.p = p;
  dgp.noise_sd = noise_sd;
  dgp.x_law = XLaw::standard_normal;
  dgp.mu = [](std::span<const double> x) { return mu_rt(x); };
  dgp.name = "eq1";
  validate(dgp);
  return dgp;
}

Dgp make_zero_dgp(std::size_t p, double noise_sd) {
  Dgp dgp;
  dgp.p = p;
  dgp.noise_sd = noise_sd;
  dgp.x_law = XLaw::standard_normal;
  dgp.mu = [](std::span<const double>) { return 0.0; };
  dgp.name = "zero";
  validate(dgp);
  return dgp;
}

Dgp dgp_preset(const std::string& name, std::size_t p, double noise_sd) {
  if (name == "eq1") return make_eq1_dgp(p, noise_sd);
  if (name == "zero") return make_zero_dgp(p, noise_sd);
  throw Error(Errc::invalid_config, "unknown dgp preset '" + name + "' (expected eq1 or zero)");
}

Dataset Dataset::subset(std::span<const std::uint32_t> keep) const {
  Dataset out(keep.size(), p_);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const std::size_t src = keep[i];
    for (std::size_t j = 0; j < p_; ++j) out.x(i, j) = x(src, j);
    out.y(i) = y(src);
  }
  return out;
}

Dataset sample_dataset(const Dgp& dgp, std::size_t n, std::uint64_t seed) {
  validate(dgp);
  if (n < 1) throw Error(Errc::invalid_input, "sample_dataset: n must be >= 1");
  Dataset data(n, dgp.p);
  rng::Rng gen(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dgp.p; ++j) data.x(i, j) = gen.normal();
    const double eps = gen.normal();
    data.y(i) = dgp.mu(data.row(i)) + dgp.noise_sd * eps;
  }
  return data;
}

double true_err(const Dgp& dgp) {
  validate(dgp);
  return dgp.noise_sd * dgp.noise_sd;
}

double cv_star_asymptotic_variance(const Dgp& dgp) {
  validate(dgp);
  const double s2 = dgp.noise_sd * dgp.noise_sd;
  return 2.0 * s2 * s2;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.p(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) out << csv::format_double(data.x(i, j)) << ',';
    out << csv::format_double(data.y(i)) << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(Errc::schema_mismatch, "dataset csv: missing header");
  }
  const auto header = csv::split_fields(csv::strip_cr(line));
  if (header.size() < 2 || header.back() != "y") {
    throw Error(Errc::schema_mismatch, "dataset csv: header must be x1,...,xp,y");
  }
  const std::size_t p = header.size() - 1;
  for (std::size_t j = 0; j < p; ++j) {
    const std::string want = "x" + std::to_string(j + 1);
    if (header[j] != want) {
      throw Error(Errc::schema_mismatch, "dataset csv: expected column '" + want + "'");
    }
  }

  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto sv = csv::strip_cr(line);
    if (sv.empty()) continue;
    const auto fields = csv::split_fields(sv);
    if (fields.size() != p + 1) {
      throw Error(Errc::schema_mismatch, "dataset csv: row " + std::to_string(n + 2) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(p + 1));
    }
    for (std::size_t j = 0; j < p; ++j) xs.push_back(csv::parse_double(fields[j]));
    ys.push_back(csv::parse_double(fields[p]));
    ++n;
  }
  if (n == 0) throw Error(Errc::schema_mismatch, "dataset csv: no data rows");

  Dataset data(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) data.x(i, j) = xs[i * p + j];
    data.y(i) = ys[i];
  }
  return data;
}

}  // namespace cvlab
