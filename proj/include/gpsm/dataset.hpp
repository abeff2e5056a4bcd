#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpsm {

using Index = std::ptrdiff_t;

/// Observational study data: N units with covariates X (N x K), a treatment
/// level W in 1..T and an observed outcome Y. Immutable once built.
///
/// Levels are always stored 1-based and contiguous; `level_labels()[w-1]` is
/// the label the level had in the source data.
class Dataset {
 public:
  /// Validates and takes ownership. Throws gpsm::Error (Data) when any
  /// invariant fails: length mismatch, label outside 1..T, empty level,
  /// non-finite value, or a flagged intercept column that is not all ones.
  Dataset(Eigen::MatrixXd covariates, std::vector<int> treatment,
          Eigen::VectorXd outcome, std::vector<std::string> covariate_names,
          int levels, bool has_intercept = false,
          std::vector<std::string> level_labels = {});

  Index size() const noexcept { return outcome_.size(); }
  Index covariate_count() const noexcept { return covariates_.cols(); }
  int levels() const noexcept { return levels_; }
  bool has_intercept() const noexcept { return has_intercept_; }

  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const std::vector<int>& treatment() const noexcept { return treatment_; }
  const Eigen::VectorXd& outcome() const noexcept { return outcome_; }
  const std::vector<std::string>& covariate_names() const noexcept {
    return covariate_names_;
  }
  const std::vector<std::string>& level_labels() const noexcept {
    return level_labels_;
  }

  /// Number of units per level; element w-1 holds N_w.
  std::vector<Index> arm_counts() const;

  /// Covariates without the intercept column (if flagged).
  Eigen::MatrixXd covariates_without_intercept() const;

  /// Copy with a leading constant-1 column flagged as intercept. Returns an
  /// identical copy when the intercept is already present.
  Dataset with_intercept() const;

  /// Copy with the outcome replaced (same length required).
  Dataset with_outcome(Eigen::VectorXd outcome) const;

 private:
  Eigen::MatrixXd covariates_;
  std::vector<int> treatment_;
  Eigen::VectorXd outcome_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> level_labels_;
  int levels_;
  bool has_intercept_;
};

/// Retained-unit flags over a dataset.
struct UnitMask {
  std::vector<bool> retained;

  static UnitMask all(Index n) { return UnitMask{std::vector<bool>(n, true)}; }
  Index count() const;
};

/// Per-level counts of retained units.
std::vector<Index> retained_counts(const Dataset& d, const UnitMask& m);

/// Subset in original order. Fails if the mask length differs from N or any
/// level loses all its units.
Dataset apply_mask(const Dataset& d, const UnitMask& m);

/// Rows of `d` in the given order (indices may repeat). Levels that vanish
/// raise the same error as apply_mask.
Dataset take_rows(const Dataset& d, const std::vector<Index>& rows);

struct CsvSchema {
  std::string treatment_column;
  std::string outcome_column;
  /// Empty means every column other than treatment and outcome.
  std::vector<std::string> covariate_columns;
  char delimiter = ',';
};

/// Reads a header-row CSV. Treatment labels of any text are re-encoded to
/// 1..T in order of first appearance. Lines starting with # are skipped.
Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset read_csv(std::istream& in, const CsvSchema& schema,
                 const std::string& source = "<stream>");

/// Writes covariates (intercept column included only if not flagged),
/// treatment (original labels) and outcome with 17 significant digits.
void save_csv(const Dataset& d, const std::string& path,
              const std::string& treatment_column = "treatment",
              const std::string& outcome_column = "outcome",
              char delimiter = ',');
void write_csv(const Dataset& d, std::ostream& out,
               const std::string& treatment_column = "treatment",
               const std::string& outcome_column = "outcome",
               char delimiter = ',');

}  // namespace gpsm
