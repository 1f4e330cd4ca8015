#include "bankdist/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bankdist/errors.hpp"
#include "bankdist/util.hpp"

namespace bankdist {

namespace {

std::optional<double> ratio(double num, double denom) {
  if (denom <= 0.0 || !std::isfinite(num / denom)) return std::nullopt;
  return num / denom;
}

double liquid_assets(const BalanceSheet& b, const LiquidMapping& m) {
  double v = 0;
  if (m.cash) v += b.cash;
  if (m.due_from_banks) v += b.due_from_banks;
  if (m.government_securities) v += b.government_securities;
  return v;
}

}  // namespace

PanelResult build_panel(const std::vector<BalanceSheet>& balance_sheets,
                        const std::vector<DistressEpisode>& episodes,
                        const std::map<std::string, BankInfo>& bank_info,
                        const PanelOptions& options) {
  PanelResult result;

  // Calendar alignment: the latest call report dated on or before the
  // cutoff (default Oct 1) of year t stands in for year t. Later calls in
  // the same year are ignored rather than pulled forward.
  std::map<std::string, std::map<int, const BalanceSheet*>> aligned;
  for (const auto& b : balance_sheets) {
    const Date cutoff{b.call_date.year, options.call_cutoff_month,
                      options.call_cutoff_day};
    if (b.call_date > cutoff) continue;
    auto& slot = aligned[b.bank_id][b.call_date.year];
    if (!slot || b.call_date > slot->call_date) slot = &b;
  }

  // Episode flags per (bank, year).
  struct Flags {
    bool run = false, run_with_failure = false, failure = false,
         suspension = false, nonfundamental = false;
  };
  std::map<std::string, std::map<int, Flags>> flags;
  for (const auto& ep : episodes) {
    std::optional<int> run_year, failure_year, suspension_year;
    for (const auto& ev : ep.events) {
      const int y = ev.event_date.year;
      switch (ev.event_type) {
        case EventType::Run:
          if (!run_year) run_year = y;
          break;
        case EventType::Failure:
        case EventType::Receivership:
          if (!failure_year) failure_year = y;
          break;
        case EventType::Suspension:
        case EventType::PartialSuspension:
          if (!suspension_year) suspension_year = y;
          break;
        default: break;
      }
    }
    if (ep.has_failure && !failure_year) failure_year = ep.end_date.year;
    if (ep.has_suspension && !suspension_year) suspension_year = failure_year;
    if (run_year) {
      auto& f = flags[ep.bank_id][*run_year];
      f.run = true;
      if (ep.episode_type == EpisodeType::RunSuspensionFailure) {
        // Run-with-failure is attributed to the year of the run.
        f.run_with_failure = true;
      }
      if (ep.nonfundamental == TriState::Yes) f.nonfundamental = true;
    }
    if (failure_year) flags[ep.bank_id][*failure_year].failure = true;
    if (suspension_year) flags[ep.bank_id][*suspension_year].suspension = true;
  }

  std::set<std::string> banks;
  for (const auto& [bank, _] : aligned) banks.insert(bank);
  for (const auto& [bank, _] : flags) banks.insert(bank);

  for (const auto& bank : banks) {
    std::set<int> years;
    const auto ait = aligned.find(bank);
    if (ait != aligned.end()) {
      for (const auto& [y, _] : ait->second) years.insert(y);
    }
    const auto fit = flags.find(bank);
    if (fit != flags.end()) {
      for (const auto& [y, _] : fit->second) years.insert(y);
    }
    for (const int year : years) {
      BankYearRow row;
      row.bank_id = bank;
      row.year = year;
      if (const auto info = bank_info.find(bank); info != bank_info.end()) {
        row.city_key = info->second.city_key;
        row.state_fips = info->second.state_fips;
        row.charter_type = info->second.charter_type;
      }
      const BalanceSheet* sheet = nullptr;
      if (ait != aligned.end()) {
        if (const auto it = ait->second.find(year); it != ait->second.end()) {
          sheet = it->second;
        }
      }
      if (sheet) {
        row.assets = sheet->assets;
        row.deposits = sheet->deposits;
        row.loans = sheet->loans;
        row.oreo = sheet->oreo;
        row.liquid = liquid_assets(*sheet, options.liquid);
        row.surplus_to_equity = ratio(sheet->surplus, sheet->equity);
        row.noncore_funding =
            ratio(sheet->assets - sheet->deposits - sheet->equity, sheet->assets);
        row.liquid_assets_ratio = ratio(*row.liquid, sheet->assets);
        row.deposits_to_assets = ratio(sheet->deposits, sheet->assets);
        // Growth over three years, requiring an unbroken run of priors.
        bool have_priors = true;
        for (int back = 1; back <= 3; ++back) {
          if (!ait->second.count(year - back)) have_priors = false;
        }
        if (have_priors) {
          const double base = ait->second.at(year - 3)->assets;
          if (base > 0) row.asset_growth_3y = sheet->assets / base - 1.0;
        }
      } else {
        result.warnings.push_back("no balance sheet for " + bank + " in " +
                                  std::to_string(year));
      }
      if (fit != flags.end()) {
        if (const auto it = fit->second.find(year); it != fit->second.end()) {
          const Flags& f = it->second;
          row.run = f.run;
          row.run_with_failure = f.run_with_failure;
          row.run_no_failure = f.run && !f.run_with_failure;
          row.failure = f.failure;
          row.suspension = f.suspension || f.failure;
          row.nonfundamental_run = f.nonfundamental;
        }
      }
      result.rows.push_back(std::move(row));
    }
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const BankYearRow& a, const BankYearRow& b) {
              if (a.bank_id != b.bank_id) return a.bank_id < b.bank_id;
              return a.year < b.year;
            });
  return result;
}

double symmetric_growth(double y_from, double y_to) {
  if (y_from < 0 || y_to < 0) {
    throw DataError("symmetric growth needs nonnegative amounts");
  }
  if (y_from == 0 && y_to == 0) {
    throw DataError("symmetric growth undefined when both amounts are zero");
  }
  return (y_to - y_from) / (0.5 * (y_to + y_from));
}

std::vector<CityYearRow> city_shocks(const std::vector<BankYearRow>& panel,
                                     const TercileMap& terciles,
                                     const CityShockOptions& options) {
  std::map<std::pair<std::string, int>, std::vector<const BankYearRow*>> cells;
  for (const auto& row : panel) {
    if (row.city_key.empty() || !row.assets || *row.assets <= 0) continue;
    cells[{row.city_key, row.year}].push_back(&row);
  }
  std::vector<CityYearRow> out;
  for (const auto& [key, rows] : cells) {
    CityYearRow c;
    c.city_key = key.first;
    c.year = key.second;
    double total_assets = 0;
    for (const auto* r : rows) total_assets += *r->assets;
    double raw[3] = {0, 0, 0};
    double tercile_weight[3] = {0, 0, 0};
    for (const auto* r : rows) {
      const double w = *r->assets / total_assets;
      c.total_loans += r->loans.value_or(0);
      c.total_deposits += r->deposits.value_or(0);
      c.run_wo_fail += w * (r->run_no_failure ? 1 : 0);
      c.fail_wo_run += w * (r->failure && !r->run ? 1 : 0);
      c.fail_w_run += w * (r->run_with_failure ? 1 : 0);
      const auto t = terciles.find({r->bank_id, r->year});
      if (t != terciles.end() && t->second >= 0 && t->second < 3) {
        tercile_weight[t->second] += w;
        if (r->run) raw[t->second] += w;
      }
    }
    // Rescale so full exposure of a tercile reads 1; an empty tercile is 0.
    double shocks[3];
    for (int j = 0; j < 3; ++j) {
      shocks[j] = (options.rescale == CityShockRescale::TercileWeight &&
                   tercile_weight[j] > 0)
                      ? raw[j] / tercile_weight[j]
                      : raw[j];
    }
    c.run_weak = shocks[0];
    c.run_intermediate = shocks[1];
    c.run_strong = shocks[2];
    out.push_back(std::move(c));
  }
  if (options.rescale == CityShockRescale::MaxShare) {
    double mx[3] = {0, 0, 0};
    for (const auto& c : out) {
      mx[0] = std::max(mx[0], c.run_weak);
      mx[1] = std::max(mx[1], c.run_intermediate);
      mx[2] = std::max(mx[2], c.run_strong);
    }
    for (auto& c : out) {
      if (mx[0] > 0) c.run_weak /= mx[0];
      if (mx[1] > 0) c.run_intermediate /= mx[1];
      if (mx[2] > 0) c.run_strong /= mx[2];
    }
  }
  return out;
}

AttachReport attach_covariates(std::vector<BankYearRow>& panel,
                               const std::vector<CovariateRow>& covariates,
                               const std::vector<StateFailureRow>& state_failures) {
  AttachReport report;
  std::map<int, const CovariateRow*> by_year;
  for (const auto& c : covariates) by_year[c.year] = &c;
  std::map<std::pair<int, int>, double> state_rate;
  for (const auto& s : state_failures) {
    if (s.establishments <= 0) {
      throw DataError("state failure rate needs a positive establishment count (state " +
                      std::to_string(s.state_fips) + ", year " +
                      std::to_string(s.year) + ")");
    }
    state_rate[{s.state_fips, s.year}] =
        static_cast<double>(s.business_failures) / s.establishments;
  }

  // Runs on other banks in the same city, excluding the bank itself.
  std::map<std::pair<std::string, int>, int> city_runs;
  for (const auto& row : panel) {
    if (!row.city_key.empty() && row.run) ++city_runs[{row.city_key, row.year}];
  }

  std::set<int> missing_years;
  for (auto& row : panel) {
    const auto it = by_year.find(row.year);
    if (it != by_year.end()) {
      row.stock_market_return = it->second->stock_market_return;
      row.real_gdp_growth = it->second->real_gdp_growth;
      row.nb_failure_rate = it->second->nb_failure_rate;
      row.nb_run_rate = it->second->nb_run_rate;
      row.business_failure_rate = it->second->business_failure_rate;
    } else if (!covariates.empty()) {
      missing_years.insert(row.year);
    }
    if (const auto sr = state_rate.find({row.state_fips, row.year});
        sr != state_rate.end()) {
      row.state_business_failure_rate = sr->second;
    }
    if (!row.city_key.empty()) {
      const auto cr = city_runs.find({row.city_key, row.year});
      const int others = (cr != city_runs.end() ? cr->second : 0) - (row.run ? 1 : 0);
      row.run_on_other_bank_in_city = others > 0;
    }
  }
  for (const int y : missing_years) {
    report.warnings.push_back("no covariates for year " + std::to_string(y));
  }
  return report;
}

// --- I/O -------------------------------------------------------------------

namespace {

std::optional<double> opt_field(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string{};
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               std::size_t min_fields) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = parse_csv_line(line);
    if (fields.size() < min_fields) {
      throw DataError("short row at " + path + ":" + std::to_string(lineno));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

std::vector<BalanceSheet> load_balance_sheets(const std::string& path) {
  std::vector<BalanceSheet> out;
  for (const auto& f : read_csv(path, 11)) {
    BalanceSheet b;
    b.bank_id = f[0];
    const auto d = Date::parse(f[1]);
    if (!d) throw DataError("bad call_date '" + f[1] + "' in " + path);
    b.call_date = *d;
    b.assets = std::stod(f[2]);
    b.deposits = std::stod(f[3]);
    b.equity = std::stod(f[4]);
    b.surplus = std::stod(f[5]);
    b.loans = std::stod(f[6]);
    b.cash = std::stod(f[7]);
    b.due_from_banks = std::stod(f[8]);
    b.government_securities = std::stod(f[9]);
    b.oreo = std::stod(f[10]);
    out.push_back(std::move(b));
  }
  return out;
}

void save_balance_sheets(const std::string& path,
                         const std::vector<BalanceSheet>& sheets) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "bank_id,call_date,assets,deposits,equity,surplus,loans,cash,"
         "due_from_banks,government_securities,oreo\n";
  for (const auto& b : sheets) {
    out << csv_escape(b.bank_id) << ',' << b.call_date.to_iso() << ',' << fmt(b.assets)
        << ',' << fmt(b.deposits) << ',' << fmt(b.equity) << ',' << fmt(b.surplus)
        << ',' << fmt(b.loans) << ',' << fmt(b.cash) << ',' << fmt(b.due_from_banks)
        << ',' << fmt(b.government_securities) << ',' << fmt(b.oreo) << "\n";
  }
}

std::vector<CovariateRow> load_covariates(const std::string& path) {
  std::vector<CovariateRow> out;
  for (const auto& f : read_csv(path, 6)) {
    CovariateRow c;
    c.year = std::stoi(f[0]);
    c.stock_market_return = opt_field(f[1]);
    c.real_gdp_growth = opt_field(f[2]);
    c.nb_failure_rate = opt_field(f[3]);
    c.nb_run_rate = opt_field(f[4]);
    c.business_failure_rate = opt_field(f[5]);
    out.push_back(c);
  }
  return out;
}

std::vector<StateFailureRow> load_state_failures(const std::string& path) {
  std::vector<StateFailureRow> out;
  for (const auto& f : read_csv(path, 4)) {
    StateFailureRow s;
    s.state_fips = std::stoi(f[0]);
    s.year = std::stoi(f[1]);
    s.business_failures = std::stol(f[2]);
    s.establishments = std::stol(f[3]);
    out.push_back(s);
  }
  return out;
}

namespace {

const char* kPanelHeader =
    "bank_id,year,run,run_no_failure,run_with_failure,failure,suspension,"
    "nonfundamental_run,surplus_to_equity,noncore_funding,liquid_assets_ratio,"
    "deposits_to_assets,asset_growth_3y,assets,deposits,loans,liquid,oreo,"
    "fundamentals_index,city_key,state_fips,charter_type,stock_market_return,"
    "real_gdp_growth,nb_failure_rate,nb_run_rate,business_failure_rate,"
    "state_business_failure_rate,run_on_other_bank_in_city";

}  // namespace

void save_panel(const std::string& path, const std::vector<BankYearRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << kPanelHeader << "\n";
  for (const auto& r : rows) {
    out << csv_escape(r.bank_id) << ',' << r.year << ',' << (r.run ? 1 : 0) << ','
        << (r.run_no_failure ? 1 : 0) << ',' << (r.run_with_failure ? 1 : 0) << ','
        << (r.failure ? 1 : 0) << ',' << (r.suspension ? 1 : 0) << ','
        << (r.nonfundamental_run ? 1 : 0) << ',' << fmt_opt(r.surplus_to_equity)
        << ',' << fmt_opt(r.noncore_funding) << ',' << fmt_opt(r.liquid_assets_ratio)
        << ',' << fmt_opt(r.deposits_to_assets) << ',' << fmt_opt(r.asset_growth_3y)
        << ',' << fmt_opt(r.assets) << ',' << fmt_opt(r.deposits) << ','
        << fmt_opt(r.loans) << ',' << fmt_opt(r.liquid) << ',' << fmt_opt(r.oreo)
        << ',' << fmt_opt(r.fundamentals_index) << ',' << csv_escape(r.city_key)
        << ',' << r.state_fips << ',' << to_string(r.charter_type) << ','
        << fmt_opt(r.stock_market_return) << ',' << fmt_opt(r.real_gdp_growth) << ','
        << fmt_opt(r.nb_failure_rate) << ',' << fmt_opt(r.nb_run_rate) << ','
        << fmt_opt(r.business_failure_rate) << ','
        << fmt_opt(r.state_business_failure_rate) << ','
        << (r.run_on_other_bank_in_city ? 1 : 0) << "\n";
  }
}

std::vector<BankYearRow> load_panel(const std::string& path) {
  std::vector<BankYearRow> out;
  for (const auto& f : read_csv(path, 29)) {
    BankYearRow r;
    std::size_t i = 0;
    r.bank_id = f[i++];
    r.year = std::stoi(f[i++]);
    r.run = f[i++] == "1";
    r.run_no_failure = f[i++] == "1";
    r.run_with_failure = f[i++] == "1";
    r.failure = f[i++] == "1";
    r.suspension = f[i++] == "1";
    r.nonfundamental_run = f[i++] == "1";
    r.surplus_to_equity = opt_field(f[i++]);
    r.noncore_funding = opt_field(f[i++]);
    r.liquid_assets_ratio = opt_field(f[i++]);
    r.deposits_to_assets = opt_field(f[i++]);
    r.asset_growth_3y = opt_field(f[i++]);
    r.assets = opt_field(f[i++]);
    r.deposits = opt_field(f[i++]);
    r.loans = opt_field(f[i++]);
    r.liquid = opt_field(f[i++]);
    r.oreo = opt_field(f[i++]);
    r.fundamentals_index = opt_field(f[i++]);
    r.city_key = f[i++];
    r.state_fips = std::stoi(f[i++]);
    if (const auto ct = charter_type_from_string(f[i++])) r.charter_type = *ct;
    r.stock_market_return = opt_field(f[i++]);
    r.real_gdp_growth = opt_field(f[i++]);
    r.nb_failure_rate = opt_field(f[i++]);
    r.nb_run_rate = opt_field(f[i++]);
    r.business_failure_rate = opt_field(f[i++]);
    r.state_business_failure_rate = opt_field(f[i++]);
    r.run_on_other_bank_in_city = f[i++] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

void save_city_rows(const std::string& path, const std::vector<CityYearRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "city_key,year,total_loans,total_deposits,run_strong,run_intermediate,"
         "run_weak,run_wo_fail,fail_wo_run,fail_w_run\n";
  for (const auto& c : rows) {
    out << csv_escape(c.city_key) << ',' << c.year << ',' << fmt(c.total_loans) << ','
        << fmt(c.total_deposits) << ',' << fmt(c.run_strong) << ','
        << fmt(c.run_intermediate) << ',' << fmt(c.run_weak) << ','
        << fmt(c.run_wo_fail) << ',' << fmt(c.fail_wo_run) << ','
        << fmt(c.fail_w_run) << "\n";
  }
}

}  // namespace bankdist
