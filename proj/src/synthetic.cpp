#include "saga/synthetic.hpp"

#include "saga/errors.hpp"
#include "saga/random.hpp"

#include <cmath>
#include <numbers>

namespace saga {

void validate(const SyntheticSpec& spec) {
  if (spec.n_classes < 1) throw ValidationError("synth: n_classes must be >= 1");
  if (spec.windows_per_class < 1) throw ValidationError("synth: windows_per_class must be >= 1");
  if (spec.window_length < 4) throw ValidationError("synth: window_length must be >= 4");
  if (static_cast<int>(spec.periods.size()) != spec.n_classes)
    throw ValidationError("synth: periods must list one value per class");
  for (double p : spec.periods)
    if (!(p >= 4.0 && p <= spec.window_length))
      throw ValidationError("synth: period " + std::to_string(p) + " outside [4, window_length]");
  if (spec.noise < 0.0) throw ValidationError("synth: noise must be >= 0");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  SyntheticData data;
  data.set.window_length = spec.window_length;
  data.set.layout = default_layout();
  const Index len = spec.window_length;

  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp_dist(0.4, 0.8);
  std::uniform_real_distribution<double> lateral(-0.5, 0.5);
  std::uniform_real_distribution<double> vertical(0.6, 1.0);
  std::uniform_real_distribution<double> gyro_dir(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int c = 0; c < spec.n_classes; ++c) {
    const double period = spec.periods[static_cast<std::size_t>(c)];
    for (int i = 0; i < spec.windows_per_class; ++i) {
      Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)}));
      const double phase = phase_dist(rng);
      const double amp = amp_dist(rng);
      const Eigen::Vector3d acc_dir(lateral(rng), lateral(rng), vertical(rng));
      const Eigen::Vector3d gyro(gyro_dir(rng), gyro_dir(rng), gyro_dir(rng));

      Matrix values(len, 6);
      for (Index t = 0; t < len; ++t) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(t) / period + phase;
        const double s = std::sin(theta), co = std::cos(theta);
        values(t, 0) = amp * acc_dir(0) * s;
        values(t, 1) = amp * acc_dir(1) * s;
        values(t, 2) = 1.0 + amp * acc_dir(2) * s;
        for (Index k = 0; k < 3; ++k) values(t, 3 + k) = gyro(k) * co;
      }
      if (spec.noise > 0.0) values += Matrix::NullaryExpr(len, 6, [&]() { return spec.noise * noise(rng); });
      data.set.windows.push_back({std::move(values), c});
      data.periods.push_back(period);
    }
  }
  return data;
}

}  // namespace saga
