#pragma once

// Seeded generators of small labeled datasets.

#include <cstdint>
#include <string_view>
#include <vector>

#include "dsflow/dataset.hpp"

namespace dsflow {

enum class GeneratorKind { gaussian_mixture, swiss_roll, moons, rings };

std::string_view generator_name(GeneratorKind k);
GeneratorKind parse_generator(std::string_view name);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::gaussian_mixture;
  int n = 500;
  int k = 5;
  int dim = 2;
  // Mixture: class means on a circle of this radius in the first two
  // coordinates. Rings: radius of the outermost ring.
  double radius = 4.0;
  double sigma = 0.5;     // mixture component standard deviation
  double noise = 0.0;     // isotropic noise added by the other generators
  double rotation = 0.0;  // radians, applied to the mixture circle
  Vector center;          // shift of the whole dataset; empty means the origin
  std::vector<Vector> means;  // explicit mixture means, overriding the circle
  std::uint64_t seed = 0;
};

// Labels are drawn independently and uniformly over the k classes; class
// statistics are filled in. Throws ConfigError for invalid parameters.
DatasetState generate(const GeneratorSpec& spec);

// Swiss-roll helpers: the roll is (t cos t, t sin t) with t in [1.5 pi, 4.5 pi]
// (plus a uniform height coordinate in 3-D); classes split the arc length
// into k equal parts.
inline constexpr double kSwissRollTMin = 1.5 * 3.14159265358979323846;
inline constexpr double kSwissRollTMax = 4.5 * 3.14159265358979323846;
double swiss_roll_arc_length(double t);

}  // namespace dsflow
