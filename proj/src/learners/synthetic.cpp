#include <cmath>
#include <memory>

#include "cvlab/csv.hpp"
#include "cvlab/error.hpp"
#include "cvlab/kernels.hpp"
#include "cvlab/learners.hpp"
#include "cvlab/rng.hpp"

namespace cvlab {

Learner synthetic_learner(double gamma, double c, const Dgp& dgp) {
  validate(dgp);
  if (!(gamma > 0.25 && gamma < 0.5)) {
    throw Error(Errc::invalid_rate, "synthetic_learner: gamma must lie in (0.25, 0.5), got " +
                                        csv::format_double(gamma));
  }
  if (!(c >= 0.0) || !std::isfinite(c)) {
    throw Error(Errc::invalid_input, "synthetic_learner: c must be finite and >= 0");
  }
  if (dgp.x_law != XLaw::standard_normal) {
    throw Error(Errc::unsupported_law,
                "synthetic_learner: exactness needs standard normal features");
  }

  const MeanFn mu = dgp.mu;
  const std::size_t p = dgp.p;
  auto fit = [gamma, c, mu, p](const Dataset& data, std::uint64_t seed) -> FittedRule {
    if (data.n() < 1) throw Error(Errc::invalid_input, "synthetic fit: empty dataset");
    if (data.p() != p) throw Error(Errc::invalid_input, "synthetic fit: dimension mismatch");

    // Random unit direction from the fit seed; the training responses are
    // never read.
    rng::Rng gen(seed);
    auto u = std::make_shared<std::vector<double>>(p);
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (double& v : *u) {
        v = gen.normal();
        norm_sq += v * v;
      }
    } while (norm_sq == 0.0);
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (double& v : *u) v *= inv_norm;

    const double amplitude = c * std::pow(static_cast<double>(data.n()), -gamma);
    const std::size_t n = data.n();
    auto predict = [mu, u, amplitude, p](std::span<const double> x) -> double {
      if (x.size() != p) throw Error(Errc::invalid_input, "synthetic predict: dimension mismatch");
      return mu(x) + amplitude * kernels::active().dot(u->data(), x.data(), p);
    };
    return FittedRule(std::move(predict), n);
  };

  const std::string name = "synthetic-g" + csv::format_double(gamma) + "-c" + csv::format_double(c);
  return Learner(name, std::move(fit), DeclaredRate{gamma, c, c});
}

}  // namespace cvlab
