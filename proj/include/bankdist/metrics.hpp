#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bankdist/panel.hpp"

namespace bankdist {

// Column-oriented sample for the regression kernel. NaN marks a missing
// value; rows with a missing used column are dropped listwise per fit.
struct Dataset {
  std::vector<std::string> unit;
  std::vector<long> time;
  std::map<std::string, std::vector<double>> cols;

  std::size_t n() const { return unit.size(); }
  const std::vector<double>& col(const std::string& name) const;
  void add_col(const std::string& name, std::vector<double> values);
};

// Converts the bank-year panel into regression columns, including the
// one-year lag of the fundamentals index per bank.
Dataset panel_dataset(const std::vector<BankYearRow>& rows);

struct FixedEffectSpec {
  bool unit = false;
  bool time = false;
  std::optional<std::string> extra;  // third grouping column (e.g. state)
};

struct RegressionSpec {
  std::string outcome;
  std::vector<std::string> regressors;
  std::vector<std::pair<std::string, std::string>> interactions;
  FixedEffectSpec fixed_effects;
  int dk_bandwidth = 0;
  bool include_intercept = true;
  std::optional<std::string> weight_col;
};

struct FitResult {
  std::vector<std::string> terms;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::MatrixXd cov;
  std::size_t n_obs = 0;
  double mean_dep_var = 0;
  double r_squared = 0;
  std::optional<double> auc_value;
  double resid_orthogonality = 0;        // ||X'e||_inf after absorption
  std::vector<std::string> dropped_terms;  // all-zero columns removed pre-fit
};

inline constexpr double kFeTolerance = 1e-10;
inline constexpr int kFeMaxIterations = 10000;

// OLS with fixed-effect absorption by alternating demeaning and
// Driscoll-Kraay covariance: h_t = sum_i x_it e_it, S = G_0 + sum_l w_l
// (G_l + G_l'), Bartlett w_l = 1 - l/(B+1), V = (X'X)^-1 S (X'X)^-1 scaled
// by n/(n-k). Throws RankDeficientError, InsufficientDataError,
// NonFiniteInputError.
FitResult fit_ols_dk(const Dataset& data, const RegressionSpec& spec);

// Exact Mann-Whitney statistic: P(score+ > score-) + P(tie)/2. Throws
// DataError when only one class is present.
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct FundamentalsOptions {
  int min_years = 3;
  int min_failures = 5;
  std::vector<std::string> features = {"surplus_to_equity", "noncore_funding",
                                       "liquid_assets_ratio", "deposits_to_assets"};
};

// Expanding-window failure prediction: for each year t the model is trained
// on (features at s, failure at s+1) pairs with s+1 <= t-1 only, then the
// index is the negated predicted failure probability (unclipped). Missing
// during burn-in. Fills row.fundamentals_index in place.
void fundamentals_index(std::vector<BankYearRow>& panel,
                        const FundamentalsOptions& options = {});

// Quantile group of the lagged fundamentals index (0 = weakest). Expanding
// historical cutpoints by default; full_sample pools every year. Throws
// DataError when the values are degenerate.
std::map<std::pair<std::string, int>, int> assign_quantile_groups(
    const std::vector<BankYearRow>& panel, int groups, bool full_sample = false);

enum class PassthroughVariant {
  Linear,             // run, lagged fundamentals, interaction
  StrongTercile,      // dummy: upper tercile of the historical distribution
  VeryStrongDecile,   // dummy: top decile
  NonfundamentalSplit,  // misinformation runs vs other runs
  AdverseSignal,      // interaction with a run on another bank in the city
};

struct PassthroughOptions {
  PassthroughVariant variant = PassthroughVariant::Linear;
  int dk_bandwidth = 3;
  bool full_sample_cutpoints = false;
  bool time_fe = false;
};

FitResult passthrough(const std::vector<BankYearRow>& panel,
                      const PassthroughOptions& options = {});

struct DecileResult {
  int decile = 0;  // 1..10, weakest first
  bool empty = false;  // no run observations in the decile
  std::optional<FitResult> fit;
};

// Failure = a + b Run within each decile of lagged fundamentals. Deciles are
// assigned by stable sort on (value, bank_id) so each holds floor(n/10) to
// ceil(n/10) rows. Throws DataError when all values coincide.
std::vector<DecileResult> decile_passthrough(const std::vector<BankYearRow>& panel,
                                             int dk_bandwidth = 3);

// --- Local projections -----------------------------------------------------

enum class LpTransform { Level, ScaledChange, SymmetricGrowth };
enum class LpBandwidthRule { Fixed, Ceil15H };

struct LpSpec {
  int h_min = 0;
  int h_max = 0;
  std::vector<std::string> shocks;
  int control_lags = 0;  // lags of shocks and of the outcome growth
  LpTransform transform = LpTransform::Level;
  std::optional<std::string> scale_col;  // divisor at t-1 for ScaledChange
  bool unit_fe = false;
  bool time_fe = false;
  bool include_intercept = true;
  LpBandwidthRule bw_rule = LpBandwidthRule::Fixed;
  int dk_bandwidth = 0;
  std::optional<std::string> season_col;  // seasonal dummies (e.g. quarter)
  std::size_t min_obs = 2;
};

struct LpResult {
  int horizon = 0;
  std::optional<FitResult> fit;  // missing when the horizon is underpopulated
};

std::vector<LpResult> local_projection(const Dataset& data,
                                       const std::string& outcome,
                                       const LpSpec& spec);

// --- Event study -----------------------------------------------------------

struct EventStudySpec {
  int h_min = -5;
  int h_max = 5;
  std::vector<std::string> event_types;       // mutually exclusive dummy columns
  std::vector<std::string> truncated_types;   // estimated only for h < 0
  int dk_bandwidth = 3;
};

struct EventStudyCell {
  int horizon = 0;
  std::string event_type;
  std::optional<double> estimate;  // absent for structurally truncated cells
  std::optional<double> se;
};

// No-intercept regression of the outcome at t+h on the event-type dummies
// plus year effects constrained to sum to zero, so each coefficient is that
// type's average outcome level at horizon h.
std::vector<EventStudyCell> event_study(const Dataset& data,
                                        const std::string& outcome,
                                        const EventStudySpec& spec);

// --- Crisis correlation ----------------------------------------------------

// Monthly state-panel regression of distress counts on crisis dummies with a
// three-year (36-month) DK bandwidth. Throws MissingSeriesError when a dummy
// column is absent.
FitResult crisis_correlation(const Dataset& state_month_counts,
                             const std::string& count_col,
                             const std::vector<std::string>& crisis_dummies,
                             int dk_bandwidth = 36);

// --- Output ----------------------------------------------------------------

struct TidyRow {
  std::string model;
  std::string term;
  double estimate = 0;
  double se = 0;
  std::size_t n = 0;
};

std::vector<TidyRow> tidy(const std::string& model, const FitResult& fit);
void save_tidy_csv(const std::string& path, const std::vector<TidyRow>& rows);

}  // namespace bankdist
