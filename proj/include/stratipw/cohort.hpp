#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stratipw {

struct PatientRecord {
  std::string id;
  std::string stratum;
  int exposure = 0;                // Z in {0,1}
  std::vector<double> covariates;  // aligned with Cohort::covariate_names()
  std::optional<double> outcome;
};

/// Immutable patient-level dataset. Record order is preserved everywhere so
/// weight vectors align positionally with the cohort.
class Cohort {
 public:
  Cohort(std::vector<PatientRecord> patients, std::vector<std::string> covariate_names);

  std::size_t size() const { return patients_.size(); }
  const std::vector<PatientRecord>& patients() const { return patients_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }

  /// Distinct stratum labels in order of first appearance.
  const std::vector<std::string>& stratum_levels() const { return stratum_levels_; }

  bool has_covariate(const std::string& name) const;
  std::size_t covariate_index(const std::string& name) const;

  /// Column of covariate values; names of the form "stratum_<level>" resolve
  /// to the membership indicator of that stratum level.
  std::vector<double> column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  std::vector<int> exposures() const;
  std::vector<std::string> strata() const;

  bool has_outcomes() const;
  std::vector<std::string> missing_outcome_ids() const;
  std::vector<double> outcomes() const;  // throws ValidationError listing ids if any missing

  /// New cohort from the given row indices (duplicates allowed, order kept).
  Cohort subset(const std::vector<std::size_t>& rows) const;

 private:
  std::vector<PatientRecord> patients_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> stratum_levels_;
};

struct CsvSchema {
  std::optional<std::string> id_column;  // absent -> ids "1","2",... by row
  std::string exposure_column = "Z";
  std::string stratum_column = "stratum";
  std::vector<std::string> covariate_columns;  // empty -> all non-role columns
  std::optional<std::string> outcome_column;
  // Columns forced to indicator expansion even if the cells look numeric.
  // Columns where no cell parses as a number are expanded automatically.
  std::vector<std::string> categorical_columns;
};

/// Read an RFC-4180 CSV (header row required) into a validated Cohort.
/// Categorical covariates are expanded to 0/1 indicators named
/// "<column>_<level>", dropping the first level in sorted order as reference.
/// Every stratum must contain at least one exposed and one unexposed patient.
Cohort load_csv(const std::string& path, const CsvSchema& schema);

void write_csv(const Cohort& cohort, const std::string& path);

/// Partition by stratum; each part keeps original record ids and order.
std::map<std::string, Cohort> split_by_stratum(const Cohort& cohort);

/// Row indices of each stratum, in original order.
std::map<std::string, std::vector<std::size_t>> stratum_row_indices(const Cohort& cohort);

}  // namespace stratipw
