#include "stratipw/design.hpp"

#include "stratipw/errors.hpp"

namespace stratipw {

void validate_design(const Cohort& cohort, const DesignSpec& spec) {
  for (const std::string& name : spec.main_effects)
    if (!cohort.has_column(name)) throw SchemaError("unknown covariate '" + name + "' in design");
  for (const auto& [a, b] : spec.interactions) {
    if (a == b)
      throw SchemaError("interaction term '" + a + ":" + b + "' must reference distinct covariates");
    if (!cohort.has_column(a)) throw SchemaError("unknown covariate '" + a + "' in design");
    if (!cohort.has_column(b)) throw SchemaError("unknown covariate '" + b + "' in design");
  }
}

DesignMatrix build_design_matrix(const Cohort& cohort, const DesignSpec& spec) {
  validate_design(cohort, spec);
  const auto n = static_cast<Eigen::Index>(cohort.size());
  const auto p = static_cast<Eigen::Index>(1 + spec.main_effects.size() + spec.interactions.size());

  DesignMatrix design;
  design.X.resize(n, p);
  design.X.col(0).setOnes();
  design.labels.push_back("intercept");

  Eigen::Index j = 1;
  for (const std::string& name : spec.main_effects) {
    const std::vector<double> col = cohort.column(name);
    design.X.col(j) = Eigen::Map<const Eigen::VectorXd>(col.data(), n);
    design.labels.push_back(name);
    ++j;
  }
  for (const auto& [a, b] : spec.interactions) {
    const std::vector<double> ca = cohort.column(a);
    const std::vector<double> cb = cohort.column(b);
    design.X.col(j) = Eigen::Map<const Eigen::VectorXd>(ca.data(), n).cwiseProduct(
        Eigen::Map<const Eigen::VectorXd>(cb.data(), n));
    design.labels.push_back(a + ":" + b);
    ++j;
  }
  return design;
}

}  // namespace stratipw
