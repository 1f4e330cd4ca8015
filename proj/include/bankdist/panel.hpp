#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bankdist/entities.hpp"
#include "bankdist/episodes.hpp"

namespace bankdist {

// One balance-sheet call report. Liquid assets are assembled from the
// configurable line-item mapping below.
struct BalanceSheet {
  std::string bank_id;
  Date call_date;
  double assets = 0;
  double deposits = 0;
  double equity = 0;
  double surplus = 0;
  double loans = 0;
  double cash = 0;
  double due_from_banks = 0;
  double government_securities = 0;
  double oreo = 0;  // other real estate owned
};

struct LiquidMapping {
  bool cash = true;
  bool due_from_banks = true;
  bool government_securities = true;
};

struct BankYearRow {
  std::string bank_id;
  int year = 0;

  bool run = false;
  bool run_no_failure = false;
  bool run_with_failure = false;
  bool failure = false;
  bool suspension = false;
  bool nonfundamental_run = false;

  std::optional<double> surplus_to_equity;
  std::optional<double> noncore_funding;      // non-deposit non-equity funding / assets
  std::optional<double> liquid_assets_ratio;
  std::optional<double> deposits_to_assets;
  std::optional<double> asset_growth_3y;      // needs three prior observations

  std::optional<double> assets;
  std::optional<double> deposits;
  std::optional<double> loans;
  std::optional<double> liquid;
  std::optional<double> oreo;

  std::optional<double> fundamentals_index;   // filled by the metrics module

  std::string city_key;  // "<state_fips>:<canonical city>"
  int state_fips = 0;
  CharterType charter_type = CharterType::Unknown;

  // Covariates, attached by attach_covariates.
  std::optional<double> stock_market_return;
  std::optional<double> real_gdp_growth;
  std::optional<double> nb_failure_rate;
  std::optional<double> nb_run_rate;
  std::optional<double> business_failure_rate;
  std::optional<double> state_business_failure_rate;
  bool run_on_other_bank_in_city = false;
};

struct CovariateRow {
  int year = 0;
  std::optional<double> stock_market_return;  // Dec t-1 to Dec t
  std::optional<double> real_gdp_growth;
  std::optional<double> nb_failure_rate;
  std::optional<double> nb_run_rate;
  std::optional<double> business_failure_rate;
};

struct StateFailureRow {
  int state_fips = 0;
  int year = 0;
  long business_failures = 0;
  long establishments = 0;  // manufacturing establishments, the rate denominator
};

struct CityYearRow {
  std::string city_key;
  int year = 0;
  double total_loans = 0;
  double total_deposits = 0;
  double run_strong = 0;
  double run_intermediate = 0;
  double run_weak = 0;
  double run_wo_fail = 0;
  double fail_wo_run = 0;
  double fail_w_run = 0;
};

struct BankInfo {
  std::string city_key;
  int state_fips = 0;
  CharterType charter_type = CharterType::Unknown;
};

struct PanelOptions {
  // Latest call report on or before this month/day represents the year.
  int call_cutoff_month = 10;
  int call_cutoff_day = 1;
  LiquidMapping liquid;
};

struct PanelResult {
  std::vector<BankYearRow> rows;
  std::vector<std::string> warnings;  // missing balance sheets etc.
};

PanelResult build_panel(const std::vector<BalanceSheet>& balance_sheets,
                        const std::vector<DistressEpisode>& episodes,
                        const std::map<std::string, BankInfo>& bank_info = {},
                        const PanelOptions& options = {});

// g = (y_to - y_from) / (0.5 (y_to + y_from)), bounded in [-2, 2].
// Throws DataError when both sides are zero or either is negative.
double symmetric_growth(double y_from, double y_to);

enum class CityShockRescale {
  TercileWeight,  // divide by the city's asset share in the tercile
  MaxShare,       // divide each shock column by its sample maximum
};

struct CityShockOptions {
  CityShockRescale rescale = CityShockRescale::TercileWeight;
};

// Tercile of the lagged fundamentals index per bank-year: 0 weak, 1
// intermediate, 2 strong.
using TercileMap = std::map<std::pair<std::string, int>, int>;

std::vector<CityYearRow> city_shocks(const std::vector<BankYearRow>& panel,
                                     const TercileMap& terciles,
                                     const CityShockOptions& options = {});

struct AttachReport {
  std::vector<std::string> warnings;  // missing covariate years
};

AttachReport attach_covariates(std::vector<BankYearRow>& panel,
                               const std::vector<CovariateRow>& covariates,
                               const std::vector<StateFailureRow>& state_failures = {});

// --- I/O -------------------------------------------------------------------

std::vector<BalanceSheet> load_balance_sheets(const std::string& path);  // CSV
void save_balance_sheets(const std::string& path, const std::vector<BalanceSheet>& sheets);

std::vector<CovariateRow> load_covariates(const std::string& path);  // CSV
std::vector<StateFailureRow> load_state_failures(const std::string& path);  // CSV

void save_panel(const std::string& path, const std::vector<BankYearRow>& rows);
std::vector<BankYearRow> load_panel(const std::string& path);

void save_city_rows(const std::string& path, const std::vector<CityYearRow>& rows);

}  // namespace bankdist
