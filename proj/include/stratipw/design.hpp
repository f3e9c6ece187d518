#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "stratipw/cohort.hpp"

namespace stratipw {

/// Declarative model specification: intercept + main effects + pairwise
/// interactions. The intercept is always included.
struct DesignSpec {
  std::vector<std::string> main_effects;
  std::vector<std::pair<std::string, std::string>> interactions;
};

struct DesignMatrix {
  Eigen::MatrixXd X;                // n x p, column 0 is the all-ones intercept
  std::vector<std::string> labels;  // "intercept", main effects, "a:b"
};

/// Throws SchemaError on unknown covariates or degenerate interaction pairs.
/// Rank deficiency is not checked here; the model fit detects it.
void validate_design(const Cohort& cohort, const DesignSpec& spec);

DesignMatrix build_design_matrix(const Cohort& cohort, const DesignSpec& spec);

}  // namespace stratipw
