#pragma once

#include <string>
#include <vector>

#include "hiore/model.hpp"

namespace hiore {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  std::string worst_input;
  int64_t checked_params = 0;
  double seconds = 0.0;
};

/// Central-difference checks of individual primitives (double precision).
std::vector<GradCheckCase> gradcheck_primitives(double eps);

/// Central-difference check of d(total loss)/d(theta) for every parameter
/// of a full pipeline instance on one synthetic sentence of length n.
/// Dynamic-strategy checks run with a teacher-forced graph: the argmax
/// edge structure is piecewise constant, so differencing across a bit
/// flip would not measure the gradient of anything.
GradCheckCase gradcheck_pipeline(const ModelConfig& cfg, const std::string& name, int n,
                                 double eps, uint64_t seed);

/// The per-configuration sweep run by the gradcheck command: full pipeline
/// under both strategies plus each ablation switch toggled off.
std::vector<GradCheckCase> gradcheck_suite(int n, double eps, uint64_t seed);

/// Micro configuration sized so the whole parameter set stays within the
/// checker's element budget.
ModelConfig gradcheck_config();

}  // namespace hiore
