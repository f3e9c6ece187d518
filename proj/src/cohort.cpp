#include "stratipw/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "stratipw/errors.hpp"

namespace stratipw {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + cell.size() && std::isfinite(out);
}

// Minimal RFC-4180 reader: quoted fields, "" escapes, CRLF or LF line ends.
std::vector<std::vector<std::string>> parse_csv_text(const std::string& text,
                                                     const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;

  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty() || !row.empty()) end_row();
        break;
      default:
        field.push_back(c);
        row_has_content = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field in " + path);
  if (row_has_content || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

Cohort::Cohort(std::vector<PatientRecord> patients, std::vector<std::string> covariate_names)
    : patients_(std::move(patients)), covariate_names_(std::move(covariate_names)) {
  std::unordered_set<std::string> seen_names(covariate_names_.begin(), covariate_names_.end());
  if (seen_names.size() != covariate_names_.size())
    throw ValidationError("duplicate covariate names in cohort");
  if (patients_.empty()) throw ValidationError("cohort has no records");

  std::unordered_set<std::string> seen_strata;
  for (std::size_t i = 0; i < patients_.size(); ++i) {
    const PatientRecord& r = patients_[i];
    if (r.covariates.size() != covariate_names_.size())
      throw ValidationError("record '" + r.id + "' has " + std::to_string(r.covariates.size()) +
                            " covariate values, expected " +
                            std::to_string(covariate_names_.size()));
    if (r.exposure != 0 && r.exposure != 1)
      throw ValidationError("record '" + r.id + "' has exposure outside {0,1}");
    if (r.stratum.empty())
      throw ValidationError("record '" + r.id + "' has an empty stratum label");
    for (double v : r.covariates)
      if (!std::isfinite(v))
        throw ValidationError("record '" + r.id + "' has a non-finite covariate value");
    if (r.outcome && !std::isfinite(*r.outcome))
      throw ValidationError("record '" + r.id + "' has a non-finite outcome");
    if (seen_strata.insert(r.stratum).second) stratum_levels_.push_back(r.stratum);
  }
}

bool Cohort::has_covariate(const std::string& name) const {
  return std::find(covariate_names_.begin(), covariate_names_.end(), name) !=
         covariate_names_.end();
}

std::size_t Cohort::covariate_index(const std::string& name) const {
  auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end()) throw SchemaError("unknown covariate '" + name + "'");
  return static_cast<std::size_t>(it - covariate_names_.begin());
}

bool Cohort::has_column(const std::string& name) const {
  if (has_covariate(name)) return true;
  for (const std::string& level : stratum_levels_)
    if (name == "stratum_" + level) return true;
  return false;
}

std::vector<double> Cohort::column(const std::string& name) const {
  std::vector<double> out(patients_.size());
  if (has_covariate(name)) {
    const std::size_t j = covariate_index(name);
    for (std::size_t i = 0; i < patients_.size(); ++i) out[i] = patients_[i].covariates[j];
    return out;
  }
  for (const std::string& level : stratum_levels_) {
    if (name == "stratum_" + level) {
      for (std::size_t i = 0; i < patients_.size(); ++i)
        out[i] = patients_[i].stratum == level ? 1.0 : 0.0;
      return out;
    }
  }
  throw SchemaError("unknown covariate '" + name + "'");
}

std::vector<int> Cohort::exposures() const {
  std::vector<int> z(patients_.size());
  for (std::size_t i = 0; i < patients_.size(); ++i) z[i] = patients_[i].exposure;
  return z;
}

std::vector<std::string> Cohort::strata() const {
  std::vector<std::string> s(patients_.size());
  for (std::size_t i = 0; i < patients_.size(); ++i) s[i] = patients_[i].stratum;
  return s;
}

bool Cohort::has_outcomes() const {
  return std::all_of(patients_.begin(), patients_.end(),
                     [](const PatientRecord& r) { return r.outcome.has_value(); });
}

std::vector<std::string> Cohort::missing_outcome_ids() const {
  std::vector<std::string> ids;
  for (const PatientRecord& r : patients_)
    if (!r.outcome) ids.push_back(r.id);
  return ids;
}

std::vector<double> Cohort::outcomes() const {
  auto missing = missing_outcome_ids();
  if (!missing.empty()) {
    std::string msg = "missing outcomes for ids:";
    for (const std::string& id : missing) msg += " " + id;
    throw ValidationError(msg);
  }
  std::vector<double> y(patients_.size());
  for (std::size_t i = 0; i < patients_.size(); ++i) y[i] = *patients_[i].outcome;
  return y;
}

Cohort Cohort::subset(const std::vector<std::size_t>& rows) const {
  std::vector<PatientRecord> records;
  records.reserve(rows.size());
  for (std::size_t idx : rows) records.push_back(patients_.at(idx));
  return Cohort(std::move(records), covariate_names_);
}

Cohort load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto rows = parse_csv_text(buffer.str(), path);
  if (rows.empty()) throw ParseError("empty CSV file '" + path + "'");

  const std::vector<std::string>& header = rows.front();
  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t j = 0; j < header.size(); ++j) col_index[header[j]] = j;

  auto require_column = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end())
      throw SchemaError("missing column '" + name + "' in '" + path + "'");
    return it->second;
  };

  const std::size_t exposure_col = require_column(schema.exposure_column);
  const std::size_t stratum_col = require_column(schema.stratum_column);
  std::optional<std::size_t> id_col, outcome_col;
  if (schema.id_column) id_col = require_column(*schema.id_column);
  if (schema.outcome_column) outcome_col = require_column(*schema.outcome_column);

  std::vector<std::string> covariate_cols = schema.covariate_columns;
  if (covariate_cols.empty()) {
    std::set<std::size_t> taken{exposure_col, stratum_col};
    if (id_col) taken.insert(*id_col);
    if (outcome_col) taken.insert(*outcome_col);
    for (std::size_t j = 0; j < header.size(); ++j)
      if (!taken.count(j)) covariate_cols.push_back(header[j]);
    if (covariate_cols.empty())
      throw SchemaError("no covariate columns in '" + path + "'");
  } else {
    for (const std::string& c : covariate_cols) require_column(c);
  }

  const std::size_t n = rows.size() - 1;
  if (n == 0) throw ParseError("CSV '" + path + "' has a header but no data rows");
  for (std::size_t r = 1; r < rows.size(); ++r)
    if (rows[r].size() != header.size())
      throw ParseError("data row " + std::to_string(r) + " has " +
                       std::to_string(rows[r].size()) + " fields, expected " +
                       std::to_string(header.size()));

  auto cell = [&](std::size_t data_row, std::size_t col) -> const std::string& {
    return rows[data_row + 1][col];
  };

  // Classify each covariate column, then expand categoricals to indicators.
  std::vector<std::string> covariate_names;
  std::vector<std::vector<double>> columns;  // aligned with covariate_names
  const std::set<std::string> forced(schema.categorical_columns.begin(),
                                     schema.categorical_columns.end());

  for (const std::string& cname : covariate_cols) {
    const std::size_t col = col_index.at(cname);
    std::size_t numeric_cells = 0, first_bad_row = 0;
    std::vector<double> numeric(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& s = cell(i, col);
      if (s.empty())
        throw ValidationError("missing value in column '" + cname + "' at data row " +
                              std::to_string(i + 1));
      if (parse_double(s, numeric[i])) {
        ++numeric_cells;
      } else if (first_bad_row == 0) {
        first_bad_row = i + 1;
      }
    }
    const bool categorical = forced.count(cname) || numeric_cells == 0;
    if (!categorical) {
      if (numeric_cells != n)
        throw ParseError("non-numeric value '" + cell(first_bad_row - 1, col) +
                         "' in column '" + cname + "' at data row " +
                         std::to_string(first_bad_row));
      covariate_names.push_back(cname);
      columns.push_back(std::move(numeric));
      continue;
    }
    std::set<std::string> levels;
    for (std::size_t i = 0; i < n; ++i) levels.insert(cell(i, col));
    // First level in sorted order is the reference and gets no indicator.
    auto it = levels.begin();
    for (++it; it != levels.end(); ++it) {
      std::vector<double> indicator(n);
      for (std::size_t i = 0; i < n; ++i) indicator[i] = cell(i, col) == *it ? 1.0 : 0.0;
      covariate_names.push_back(cname + "_" + *it);
      columns.push_back(std::move(indicator));
    }
  }

  std::vector<PatientRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord& rec = records[i];
    rec.id = id_col ? cell(i, *id_col) : std::to_string(i + 1);
    rec.stratum = cell(i, stratum_col);
    if (rec.stratum.empty())
      throw ValidationError("missing stratum at data row " + std::to_string(i + 1));

    const std::string& zs = cell(i, exposure_col);
    double zv;
    if (!parse_double(zs, zv) || (zv != 0.0 && zv != 1.0))
      throw ValidationError("exposure value '" + zs + "' outside {0,1} at data row " +
                            std::to_string(i + 1));
    rec.exposure = static_cast<int>(zv);

    rec.covariates.resize(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) rec.covariates[j] = columns[j][i];

    if (outcome_col) {
      const std::string& ys = cell(i, *outcome_col);
      if (!ys.empty()) {
        double yv;
        if (!parse_double(ys, yv))
          throw ParseError("non-numeric outcome '" + ys + "' at data row " +
                           std::to_string(i + 1));
        rec.outcome = yv;
      }
    }
  }

  Cohort cohort(std::move(records), std::move(covariate_names));

  // Structural positivity: each stratum needs both arms represented.
  std::map<std::string, std::pair<std::size_t, std::size_t>> arm_counts;
  for (const PatientRecord& r : cohort.patients()) {
    auto& c = arm_counts[r.stratum];
    if (r.exposure == 1) ++c.second;
    else ++c.first;
  }
  for (const auto& [stratum, counts] : arm_counts) {
    if (counts.second == 0)
      throw StructuralPositivityError(stratum, "stratum '" + stratum + "' has no exposed patients");
    if (counts.first == 0)
      throw StructuralPositivityError(stratum,
                                      "stratum '" + stratum + "' has no unexposed patients");
  }
  return cohort;
}

void write_csv(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file '" + path + "'");

  const bool any_outcome = std::any_of(cohort.patients().begin(), cohort.patients().end(),
                                       [](const PatientRecord& r) { return r.outcome.has_value(); });
  out << "id,stratum,Z";
  for (const std::string& name : cohort.covariate_names()) out << "," << csv_quote(name);
  if (any_outcome) out << ",y";
  out << "\n";

  for (const PatientRecord& r : cohort.patients()) {
    out << csv_quote(r.id) << "," << csv_quote(r.stratum) << "," << r.exposure;
    for (double v : r.covariates) out << "," << format_double(v);
    if (any_outcome) {
      out << ",";
      if (r.outcome) out << format_double(*r.outcome);
    }
    out << "\n";
  }
}

std::map<std::string, std::vector<std::size_t>> stratum_row_indices(const Cohort& cohort) {
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    rows[cohort.patients()[i].stratum].push_back(i);
  return rows;
}

std::map<std::string, Cohort> split_by_stratum(const Cohort& cohort) {
  std::map<std::string, Cohort> parts;
  for (const auto& [stratum, rows] : stratum_row_indices(cohort))
    parts.emplace(stratum, cohort.subset(rows));
  return parts;
}

}  // namespace stratipw
