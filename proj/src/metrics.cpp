#include "bankdist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "bankdist/errors.hpp"
#include "bankdist/util.hpp"

namespace bankdist {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

const std::vector<double>& Dataset::col(const std::string& name) const {
  const auto it = cols.find(name);
  if (it == cols.end()) throw MissingSeriesError("no column '" + name + "'");
  return it->second;
}

void Dataset::add_col(const std::string& name, std::vector<double> values) {
  if (values.size() != n()) {
    throw DataError("column '" + name + "' length mismatch");
  }
  cols[name] = std::move(values);
}

Dataset panel_dataset(const std::vector<BankYearRow>& rows) {
  Dataset d;
  const std::size_t n = rows.size();
  d.unit.reserve(n);
  d.time.reserve(n);
  std::map<std::pair<std::string, int>, double> fund;
  for (const auto& r : rows) {
    d.unit.push_back(r.bank_id);
    d.time.push_back(r.year);
    if (r.fundamentals_index) fund[{r.bank_id, r.year}] = *r.fundamentals_index;
  }
  const auto flag = [&](auto member) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = (rows[i].*member) ? 1.0 : 0.0;
    return v;
  };
  const auto opt = [&](auto member) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& o = rows[i].*member;
      v[i] = o ? *o : kNaN;
    }
    return v;
  };
  d.cols["run"] = flag(&BankYearRow::run);
  d.cols["run_no_failure"] = flag(&BankYearRow::run_no_failure);
  d.cols["run_with_failure"] = flag(&BankYearRow::run_with_failure);
  d.cols["failure"] = flag(&BankYearRow::failure);
  d.cols["suspension"] = flag(&BankYearRow::suspension);
  d.cols["nonfundamental_run"] = flag(&BankYearRow::nonfundamental_run);
  d.cols["run_on_other_bank_in_city"] = flag(&BankYearRow::run_on_other_bank_in_city);
  d.cols["surplus_to_equity"] = opt(&BankYearRow::surplus_to_equity);
  d.cols["noncore_funding"] = opt(&BankYearRow::noncore_funding);
  d.cols["liquid_assets_ratio"] = opt(&BankYearRow::liquid_assets_ratio);
  d.cols["deposits_to_assets"] = opt(&BankYearRow::deposits_to_assets);
  d.cols["asset_growth_3y"] = opt(&BankYearRow::asset_growth_3y);
  d.cols["assets"] = opt(&BankYearRow::assets);
  d.cols["deposits"] = opt(&BankYearRow::deposits);
  d.cols["loans"] = opt(&BankYearRow::loans);
  d.cols["fundamentals_index"] = opt(&BankYearRow::fundamentals_index);
  d.cols["stock_market_return"] = opt(&BankYearRow::stock_market_return);
  d.cols["real_gdp_growth"] = opt(&BankYearRow::real_gdp_growth);
  d.cols["nb_failure_rate"] = opt(&BankYearRow::nb_failure_rate);
  d.cols["nb_run_rate"] = opt(&BankYearRow::nb_run_rate);
  d.cols["business_failure_rate"] = opt(&BankYearRow::business_failure_rate);
  d.cols["state_business_failure_rate"] = opt(&BankYearRow::state_business_failure_rate);
  std::vector<double> fund_lag(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = fund.find({rows[i].bank_id, rows[i].year - 1});
    if (it != fund.end()) fund_lag[i] = it->second;
  }
  d.cols["fund_lag"] = std::move(fund_lag);
  return d;
}

// --- OLS with fixed-effect absorption and Driscoll-Kraay covariance --------

namespace {

struct Design {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> terms;
  std::vector<std::string> dropped;
  std::vector<std::size_t> row_index;  // into the source dataset
  double mean_dep = 0;
};

// Collects finite rows for the used columns; +/-inf is a hard error, NaN is
// a missing value and drops the row.
Design build_design(const Dataset& data, const RegressionSpec& spec) {
  std::vector<std::pair<std::string, const std::vector<double>*>> term_cols;
  for (const auto& r : spec.regressors) term_cols.emplace_back(r, &data.col(r));
  std::vector<std::pair<std::string, std::pair<const std::vector<double>*,
                                               const std::vector<double>*>>>
      inter_cols;
  for (const auto& [a, b] : spec.interactions) {
    inter_cols.push_back({a + ":" + b, {&data.col(a), &data.col(b)}});
  }
  const auto& yv = data.col(spec.outcome);
  const std::vector<double>* wv =
      spec.weight_col ? &data.col(*spec.weight_col) : nullptr;
  const std::vector<double>* ev =
      spec.fixed_effects.extra ? &data.col(*spec.fixed_effects.extra) : nullptr;

  Design d;
  for (std::size_t i = 0; i < data.n(); ++i) {
    bool ok = true;
    const auto check = [&](double v) {
      if (std::isinf(v)) throw NonFiniteInputError("infinite value in regression input");
      if (std::isnan(v)) ok = false;
    };
    check(yv[i]);
    for (const auto& [_, c] : term_cols) check((*c)[i]);
    for (const auto& [_, cc] : inter_cols) {
      check((*cc.first)[i]);
      check((*cc.second)[i]);
    }
    if (wv) check((*wv)[i]);
    if (ev) check((*ev)[i]);
    if (ok) d.row_index.push_back(i);
  }
  const std::size_t n = d.row_index.size();
  if (n == 0) throw InsufficientDataError("no complete observations");

  const bool has_fe = spec.fixed_effects.unit || spec.fixed_effects.time ||
                      spec.fixed_effects.extra.has_value();
  const bool intercept = spec.include_intercept && !has_fe;

  std::vector<std::pair<std::string, Eigen::VectorXd>> built;
  if (intercept) built.emplace_back("(intercept)", Eigen::VectorXd::Ones(n));
  for (const auto& [name, c] : term_cols) {
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = (*c)[d.row_index[i]];
    built.emplace_back(name, std::move(v));
  }
  for (const auto& [name, cc] : inter_cols) {
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = (*cc.first)[d.row_index[i]] * (*cc.second)[d.row_index[i]];
    }
    // An interaction that never switches on is reported, not fatal.
    if (v.cwiseAbs().maxCoeff() == 0.0) {
      d.dropped.push_back(name);
      continue;
    }
    built.emplace_back(name, std::move(v));
  }

  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = yv[d.row_index[i]];
  d.mean_dep = d.y.mean();
  d.X.resize(n, static_cast<Eigen::Index>(built.size()));
  for (std::size_t j = 0; j < built.size(); ++j) {
    d.terms.push_back(built[j].first);
    d.X.col(static_cast<Eigen::Index>(j)) = built[j].second;
  }
  return d;
}

// Group labels for one fixed-effect dimension.
std::vector<int> group_codes(const Dataset& data, const Design& d,
                             int which, const std::optional<std::string>& extra) {
  std::map<std::string, int> smap;
  std::map<long, int> lmap;
  std::map<double, int> dmap;
  std::vector<int> codes(d.row_index.size());
  for (std::size_t i = 0; i < d.row_index.size(); ++i) {
    const std::size_t r = d.row_index[i];
    if (which == 0) {
      codes[i] = smap.emplace(data.unit[r], static_cast<int>(smap.size())).first->second;
    } else if (which == 1) {
      codes[i] = lmap.emplace(data.time[r], static_cast<int>(lmap.size())).first->second;
    } else {
      codes[i] = dmap.emplace(data.col(*extra)[r], static_cast<int>(dmap.size()))
                     .first->second;
    }
  }
  return codes;
}

// Alternating (weighted) demeaning of every column in M over the groupings.
void absorb_fixed_effects(Eigen::MatrixXd& M, const std::vector<std::vector<int>>& groups,
                          const Eigen::VectorXd& w) {
  if (groups.empty()) return;
  if (groups.size() == 1) {
    // One dimension needs a single exact pass.
  }
  const double total_w = w.sum();
  (void)total_w;
  for (int iter = 0; iter < kFeMaxIterations; ++iter) {
    double max_change = 0;
    for (const auto& codes : groups) {
      const int g = *std::max_element(codes.begin(), codes.end()) + 1;
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(g, M.cols());
      Eigen::VectorXd wsum = Eigen::VectorXd::Zero(g);
      for (std::size_t i = 0; i < codes.size(); ++i) {
        sums.row(codes[i]) += w[static_cast<Eigen::Index>(i)] *
                              M.row(static_cast<Eigen::Index>(i));
        wsum[codes[i]] += w[static_cast<Eigen::Index>(i)];
      }
      for (int j = 0; j < g; ++j) {
        if (wsum[j] > 0) sums.row(j) /= wsum[j];
      }
      for (std::size_t i = 0; i < codes.size(); ++i) {
        M.row(static_cast<Eigen::Index>(i)) -= sums.row(codes[i]);
      }
      max_change = std::max(max_change, sums.cwiseAbs().maxCoeff());
    }
    if (groups.size() == 1 || max_change < kFeTolerance) return;
  }
}

}  // namespace

FitResult fit_ols_dk(const Dataset& data, const RegressionSpec& spec) {
  Design d = build_design(data, spec);
  const Eigen::Index n = d.y.size();
  const Eigen::Index k = d.X.cols();
  if (k == 0) throw InsufficientDataError("no regressors survived");
  if (n < k + 1) {
    throw InsufficientDataError("need at least " + std::to_string(k + 1) +
                                " observations, have " + std::to_string(n));
  }
  // An identically zero plain regressor cannot be estimated.
  for (Eigen::Index j = 0; j < k; ++j) {
    if (d.X.col(j).cwiseAbs().maxCoeff() == 0.0) {
      throw RankDeficientError("column '" + d.terms[static_cast<std::size_t>(j)] +
                               "' is identically zero");
    }
  }

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (spec.weight_col) {
    const auto& wc = data.col(*spec.weight_col);
    for (Eigen::Index i = 0; i < n; ++i) {
      w[i] = wc[d.row_index[static_cast<std::size_t>(i)]];
      if (w[i] < 0) throw NonFiniteInputError("negative regression weight");
    }
  }

  std::vector<std::vector<int>> groups;
  if (spec.fixed_effects.unit) groups.push_back(group_codes(data, d, 0, std::nullopt));
  if (spec.fixed_effects.time) groups.push_back(group_codes(data, d, 1, std::nullopt));
  if (spec.fixed_effects.extra) {
    groups.push_back(group_codes(data, d, 2, spec.fixed_effects.extra));
  }
  Eigen::MatrixXd M(n, k + 1);
  M.col(0) = d.y;
  M.rightCols(k) = d.X;
  absorb_fixed_effects(M, groups, w);
  Eigen::VectorXd y = M.col(0);
  Eigen::MatrixXd X = M.rightCols(k);
  if (spec.weight_col) {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    y.array() *= sw.array();
    X.array().colwise() *= sw.array();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += d.terms[static_cast<std::size_t>(perm[j])];
    }
    throw RankDeficientError("collinear columns after absorption: " + cols);
  }
  Eigen::VectorXd beta = qr.solve(y);
  // One step of iterative refinement tightens the solve to the last ulp on
  // small well-conditioned designs.
  beta += qr.solve(y - X * beta);
  const Eigen::VectorXd e = y - X * beta;

  const Eigen::MatrixXd XtX = X.transpose() * X;
  const Eigen::MatrixXd XtX_inv = XtX.llt().solve(Eigen::MatrixXd::Identity(k, k));

  // Driscoll-Kraay: Bartlett-weighted HAC on the per-period score sums.
  std::map<long, Eigen::VectorXd> h_by_time;
  for (Eigen::Index i = 0; i < n; ++i) {
    const long t = data.time[d.row_index[static_cast<std::size_t>(i)]];
    auto [it, fresh] = h_by_time.try_emplace(t, Eigen::VectorXd::Zero(k));
    it->second += X.row(i).transpose() * e[i];
  }
  std::vector<Eigen::VectorXd> h;
  h.reserve(h_by_time.size());
  for (auto& [_, v] : h_by_time) h.push_back(std::move(v));
  const int T = static_cast<int>(h.size());
  const int B = std::min(spec.dk_bandwidth, T - 1);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k, k);
  for (int t = 0; t < T; ++t) S += h[t] * h[t].transpose();
  for (int l = 1; l <= B; ++l) {
    const double wl = 1.0 - static_cast<double>(l) / (spec.dk_bandwidth + 1);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(k, k);
    for (int t = l; t < T; ++t) G += h[t] * h[t - l].transpose();
    S += wl * (G + G.transpose());
  }
  const double ss = static_cast<double>(n) / static_cast<double>(n - k);
  const Eigen::MatrixXd V = ss * (XtX_inv * S * XtX_inv);

  FitResult out;
  out.terms = d.terms;
  out.dropped_terms = d.dropped;
  out.coef = beta;
  out.cov = V;
  out.se.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) out.se[j] = std::sqrt(std::max(V(j, j), 0.0));
  out.n_obs = static_cast<std::size_t>(n);
  out.mean_dep_var = d.mean_dep;
  const double sst = (y.array() - y.mean()).square().sum();
  out.r_squared = sst > 0 ? 1.0 - e.squaredNorm() / sst : 0.0;
  out.resid_orthogonality = (X.transpose() * e).cwiseAbs().maxCoeff();
  return out;
}

// --- AUC -------------------------------------------------------------------

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DataError("auc input length mismatch");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    (labels[i] ? pos : neg).push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) {
    throw DataError("auc needs both classes present");
  }
  std::sort(neg.begin(), neg.end());
  // Pairwise wins and ties, counted exactly in integers.
  unsigned long long wins = 0, ties = 0;
  for (const double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    wins += static_cast<unsigned long long>(lo - neg.begin());
    ties += static_cast<unsigned long long>(hi - lo);
  }
  const unsigned long long pairs =
      static_cast<unsigned long long>(pos.size()) * neg.size();
  return (2.0 * wins + ties) / (2.0 * pairs);
}

// --- Fundamentals index ----------------------------------------------------

void fundamentals_index(std::vector<BankYearRow>& panel,
                        const FundamentalsOptions& options) {
  const std::size_t nf = options.features.size();
  const auto feature = [&](const BankYearRow& r,
                           const std::string& name) -> std::optional<double> {
    if (name == "surplus_to_equity") return r.surplus_to_equity;
    if (name == "noncore_funding") return r.noncore_funding;
    if (name == "liquid_assets_ratio") return r.liquid_assets_ratio;
    if (name == "deposits_to_assets") return r.deposits_to_assets;
    if (name == "asset_growth_3y") return r.asset_growth_3y;
    throw ConfigError("unknown fundamentals feature '" + name + "'");
  };

  // Training pairs: features at s, failure outcome at s+1.
  struct Pair {
    int feature_year;  // s
    Eigen::VectorXd x;
    double failed;     // at s+1
  };
  std::map<std::string, std::map<int, const BankYearRow*>> by_bank;
  for (const auto& r : panel) by_bank[r.bank_id][r.year] = &r;
  std::vector<Pair> pairs;
  for (const auto& [bank, years] : by_bank) {
    for (const auto& [year, row] : years) {
      const auto next = years.find(year + 1);
      if (next == years.end()) continue;
      Eigen::VectorXd x(nf + 1);
      x[0] = 1.0;
      bool complete = true;
      for (std::size_t j = 0; j < nf; ++j) {
        const auto v = feature(*row, options.features[j]);
        if (!v) {
          complete = false;
          break;
        }
        x[static_cast<Eigen::Index>(j + 1)] = *v;
      }
      if (!complete) continue;
      pairs.push_back({year, std::move(x), next->second->failure ? 1.0 : 0.0});
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.feature_year < b.feature_year; });

  std::set<int> target_years;
  for (const auto& r : panel) target_years.insert(r.year);

  std::map<int, Eigen::VectorXd> beta_by_year;
  for (const int t : target_years) {
    // Only outcomes realized by t-1 may enter: s+1 <= t-1.
    std::vector<const Pair*> train;
    std::set<int> years_used;
    int failures = 0;
    for (const auto& p : pairs) {
      if (p.feature_year + 1 <= t - 1) {
        train.push_back(&p);
        years_used.insert(p.feature_year);
        if (p.failed > 0) ++failures;
      }
    }
    if (static_cast<int>(years_used.size()) < options.min_years ||
        failures < options.min_failures ||
        train.size() < nf + 2) {
      continue;  // burn-in
    }
    Eigen::MatrixXd X(train.size(), nf + 1);
    Eigen::VectorXd y(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = train[i]->x;
      y[static_cast<Eigen::Index>(i)] = train[i]->failed;
    }
    beta_by_year[t] = X.colPivHouseholderQr().solve(y);
  }

  for (auto& r : panel) {
    r.fundamentals_index.reset();
    const auto bit = beta_by_year.find(r.year);
    if (bit == beta_by_year.end()) continue;
    Eigen::VectorXd x(nf + 1);
    x[0] = 1.0;
    bool complete = true;
    for (std::size_t j = 0; j < nf; ++j) {
      const auto v = feature(r, options.features[j]);
      if (!v) {
        complete = false;
        break;
      }
      x[static_cast<Eigen::Index>(j + 1)] = *v;
    }
    if (!complete) continue;
    // Higher predicted failure probability means weaker fundamentals; the
    // prediction is left unclipped on purpose.
    r.fundamentals_index = -x.dot(bit->second);
  }
}

// --- Quantile groups -------------------------------------------------------

namespace {

struct LaggedValue {
  const BankYearRow* row;
  double value;  // fundamentals index at t-1
};

std::vector<LaggedValue> lagged_values(const std::vector<BankYearRow>& panel) {
  std::map<std::pair<std::string, int>, double> fund;
  for (const auto& r : panel) {
    if (r.fundamentals_index) fund[{r.bank_id, r.year}] = *r.fundamentals_index;
  }
  std::vector<LaggedValue> out;
  for (const auto& r : panel) {
    const auto it = fund.find({r.bank_id, r.year - 1});
    if (it != fund.end()) out.push_back({&r, it->second});
  }
  return out;
}

int group_of(double v, const std::vector<double>& cutpoints) {
  int g = 0;
  for (const double c : cutpoints) {
    if (v > c) ++g;
  }
  return g;
}

}  // namespace

std::map<std::pair<std::string, int>, int> assign_quantile_groups(
    const std::vector<BankYearRow>& panel, int groups, bool full_sample) {
  if (groups < 2) throw ConfigError("need at least two quantile groups");
  auto values = lagged_values(panel);
  if (values.empty()) return {};
  {
    const auto [mn, mx] = std::minmax_element(
        values.begin(), values.end(),
        [](const LaggedValue& a, const LaggedValue& b) { return a.value < b.value; });
    if (mn->value == mx->value) {
      throw DataError("quantile cutpoints collide: all index values identical");
    }
  }
  std::map<std::pair<std::string, int>, int> out;
  const auto cutpoints_of = [&](std::vector<double>& pool) {
    std::sort(pool.begin(), pool.end());
    std::vector<double> cuts;
    for (int g = 1; g < groups; ++g) {
      const std::size_t idx =
          std::min(pool.size() - 1, pool.size() * static_cast<std::size_t>(g) /
                                        static_cast<std::size_t>(groups));
      cuts.push_back(pool[idx]);
    }
    return cuts;
  };
  if (full_sample) {
    std::vector<double> pool;
    for (const auto& v : values) pool.push_back(v.value);
    const auto cuts = cutpoints_of(pool);
    for (const auto& v : values) {
      out[{v.row->bank_id, v.row->year}] =
          std::min(groups - 1, group_of(v.value, cuts));
    }
    return out;
  }
  // Expanding: cutpoints for year t come from the historical pool of lagged
  // values dated before t.
  std::map<int, std::vector<const LaggedValue*>> by_year;
  for (const auto& v : values) by_year[v.row->year].push_back(&v);
  std::vector<double> pool;
  for (const auto& [year, vs] : by_year) {
    if (pool.size() >= static_cast<std::size_t>(groups)) {
      std::vector<double> p = pool;
      const auto cuts = cutpoints_of(p);
      for (const auto* v : vs) {
        out[{v->row->bank_id, v->row->year}] =
            std::min(groups - 1, group_of(v->value, cuts));
      }
    }
    for (const auto* v : vs) pool.push_back(v->value);
  }
  return out;
}

// --- Pass-through regressions ----------------------------------------------

FitResult passthrough(const std::vector<BankYearRow>& panel,
                      const PassthroughOptions& options) {
  Dataset d = panel_dataset(panel);
  RegressionSpec spec;
  spec.outcome = "failure";
  spec.dk_bandwidth = options.dk_bandwidth;
  spec.fixed_effects.time = options.time_fe;
  switch (options.variant) {
    case PassthroughVariant::Linear:
      spec.regressors = {"run", "fund_lag"};
      spec.interactions = {{"run", "fund_lag"}};
      break;
    case PassthroughVariant::StrongTercile:
    case PassthroughVariant::VeryStrongDecile: {
      const int groups =
          options.variant == PassthroughVariant::StrongTercile ? 3 : 10;
      const auto assignment =
          assign_quantile_groups(panel, groups, options.full_sample_cutpoints);
      std::vector<double> dummy(panel.size(), kNaN);
      for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto it = assignment.find({panel[i].bank_id, panel[i].year});
        if (it != assignment.end()) {
          dummy[i] = it->second == groups - 1 ? 1.0 : 0.0;
        }
      }
      const char* name =
          options.variant == PassthroughVariant::StrongTercile ? "strong" : "very_strong";
      d.add_col(name, std::move(dummy));
      spec.regressors = {"run", name};
      spec.interactions = {{"run", name}};
      break;
    }
    case PassthroughVariant::NonfundamentalSplit: {
      std::vector<double> other(panel.size());
      for (std::size_t i = 0; i < panel.size(); ++i) {
        other[i] = panel[i].run && !panel[i].nonfundamental_run ? 1.0 : 0.0;
      }
      d.add_col("other_run", std::move(other));
      spec.regressors = {"nonfundamental_run", "other_run"};
      break;
    }
    case PassthroughVariant::AdverseSignal:
      spec.regressors = {"run", "run_on_other_bank_in_city"};
      spec.interactions = {{"run", "run_on_other_bank_in_city"}};
      break;
  }
  return fit_ols_dk(d, spec);
}

std::vector<DecileResult> decile_passthrough(const std::vector<BankYearRow>& panel,
                                             int dk_bandwidth) {
  auto values = lagged_values(panel);
  if (values.empty()) throw InsufficientDataError("no lagged index values");
  // Stable order on (value, bank_id, year) makes decile membership
  // deterministic under ties.
  std::stable_sort(values.begin(), values.end(),
                   [](const LaggedValue& a, const LaggedValue& b) {
                     if (a.value != b.value) return a.value < b.value;
                     if (a.row->bank_id != b.row->bank_id) {
                       return a.row->bank_id < b.row->bank_id;
                     }
                     return a.row->year < b.row->year;
                   });
  if (values.front().value == values.back().value) {
    throw DataError("decile cutpoints collide: all index values identical");
  }
  const std::size_t n = values.size();
  std::vector<DecileResult> out;
  std::size_t pos = 0;
  for (int dec = 0; dec < 10; ++dec) {
    const std::size_t size = n / 10 + (static_cast<std::size_t>(dec) < n % 10 ? 1 : 0);
    DecileResult res;
    res.decile = dec + 1;
    Dataset d;
    bool any_run = false;
    for (std::size_t i = pos; i < pos + size; ++i) {
      const auto* r = values[i].row;
      d.unit.push_back(r->bank_id);
      d.time.push_back(r->year);
      if (r->run) any_run = true;
    }
    std::vector<double> run, failure;
    for (std::size_t i = pos; i < pos + size; ++i) {
      run.push_back(values[i].row->run ? 1.0 : 0.0);
      failure.push_back(values[i].row->failure ? 1.0 : 0.0);
    }
    d.cols["run"] = std::move(run);
    d.cols["failure"] = std::move(failure);
    pos += size;
    if (size == 0 || !any_run) {
      res.empty = true;
      out.push_back(std::move(res));
      continue;
    }
    RegressionSpec spec;
    spec.outcome = "failure";
    spec.regressors = {"run"};
    spec.dk_bandwidth = dk_bandwidth;
    try {
      res.fit = fit_ols_dk(d, spec);
    } catch (const InsufficientDataError&) {
      res.empty = true;
    }
    out.push_back(std::move(res));
  }
  return out;
}

// --- Local projections -----------------------------------------------------

namespace {

double lp_outcome(const std::vector<double>& out, const std::optional<std::string>&,
                  const std::vector<double>* scale, LpTransform transform,
                  std::ptrdiff_t t, std::ptrdiff_t th, std::ptrdiff_t tm1) {
  switch (transform) {
    case LpTransform::Level:
      return out[th];
    case LpTransform::ScaledChange: {
      const double s = scale ? (*scale)[tm1] : 1.0;
      if (s == 0 || std::isnan(s)) return kNaN;
      return (out[th] - out[tm1]) / s;
    }
    case LpTransform::SymmetricGrowth: {
      const double a = out[tm1], b = out[th];
      if (std::isnan(a) || std::isnan(b) || (a == 0 && b == 0) || a < 0 || b < 0) {
        return kNaN;
      }
      return (b - a) / (0.5 * (a + b));
    }
  }
  return kNaN;
}

}  // namespace

std::vector<LpResult> local_projection(const Dataset& data,
                                       const std::string& outcome,
                                       const LpSpec& spec) {
  // Row lookup by (unit, time); horizons move along the time axis in steps
  // of one unit.
  std::map<std::pair<std::string, long>, std::size_t> index;
  for (std::size_t i = 0; i < data.n(); ++i) {
    index[{data.unit[i], data.time[i]}] = i;
  }
  const auto& out_col = data.col(outcome);
  const std::vector<double>* scale =
      spec.scale_col ? &data.col(*spec.scale_col) : nullptr;
  const std::vector<double>* season =
      spec.season_col ? &data.col(*spec.season_col) : nullptr;
  std::vector<const std::vector<double>*> shock_cols;
  for (const auto& s : spec.shocks) shock_cols.push_back(&data.col(s));

  std::set<double> season_levels;
  if (season) {
    for (const double v : *season) {
      if (!std::isnan(v)) season_levels.insert(v);
    }
  }

  std::vector<LpResult> results;
  for (int h = spec.h_min; h <= spec.h_max; ++h) {
    LpResult res;
    res.horizon = h;
    Dataset sub;
    std::vector<double> y;
    std::vector<std::vector<double>> xs(shock_cols.size());
    std::vector<std::vector<double>> shock_lags(shock_cols.size() *
                                                static_cast<std::size_t>(spec.control_lags));
    std::vector<std::vector<double>> out_lags(static_cast<std::size_t>(spec.control_lags));
    std::vector<std::vector<double>> season_dummies(
        season_levels.empty() ? 0 : season_levels.size() - 1);

    const bool needs_tm1 = spec.transform != LpTransform::Level;
    for (std::size_t i = 0; i < data.n(); ++i) {
      const auto& u = data.unit[i];
      const long t = data.time[i];
      const auto at = [&](long when) -> std::optional<std::size_t> {
        const auto it = index.find({u, when});
        if (it == index.end()) return std::nullopt;
        return it->second;
      };
      const auto th = at(t + h);
      if (!th) continue;
      std::optional<std::size_t> tm1;
      if (needs_tm1 || spec.control_lags > 0) {
        tm1 = at(t - 1);
        if (needs_tm1 && !tm1) continue;
      }
      const double yv = lp_outcome(out_col, spec.scale_col, scale, spec.transform,
                                   static_cast<std::ptrdiff_t>(i),
                                   static_cast<std::ptrdiff_t>(*th),
                                   needs_tm1 ? static_cast<std::ptrdiff_t>(*tm1) : 0);
      if (std::isnan(yv)) continue;

      bool ok = true;
      std::vector<double> shocks_here(shock_cols.size());
      for (std::size_t s = 0; s < shock_cols.size(); ++s) {
        shocks_here[s] = (*shock_cols[s])[i];
        if (std::isnan(shocks_here[s])) ok = false;
      }
      std::vector<double> lag_vals(shock_lags.size(), 0.0);
      std::vector<double> outlag_vals(out_lags.size(), 0.0);
      for (int l = 1; ok && l <= spec.control_lags; ++l) {
        const auto tl = at(t - l);
        const auto tl1 = at(t - l - 1);
        if (!tl || !tl1) {
          ok = false;
          break;
        }
        for (std::size_t s = 0; s < shock_cols.size(); ++s) {
          const double v = (*shock_cols[s])[*tl];
          if (std::isnan(v)) ok = false;
          lag_vals[(static_cast<std::size_t>(l) - 1) * shock_cols.size() + s] = v;
        }
        const double g = lp_outcome(out_col, spec.scale_col, scale, spec.transform,
                                    static_cast<std::ptrdiff_t>(*tl),
                                    static_cast<std::ptrdiff_t>(*tl),
                                    static_cast<std::ptrdiff_t>(*tl1));
        if (std::isnan(g)) ok = false;
        outlag_vals[static_cast<std::size_t>(l) - 1] = g;
      }
      if (!ok) continue;

      sub.unit.push_back(u);
      sub.time.push_back(t);
      y.push_back(yv);
      for (std::size_t s = 0; s < shock_cols.size(); ++s) xs[s].push_back(shocks_here[s]);
      for (std::size_t s = 0; s < shock_lags.size(); ++s) {
        shock_lags[s].push_back(lag_vals[s]);
      }
      for (std::size_t s = 0; s < out_lags.size(); ++s) {
        out_lags[s].push_back(outlag_vals[s]);
      }
      if (season) {
        std::size_t j = 0;
        for (auto it = season_levels.begin(); it != season_levels.end(); ++it) {
          if (it == season_levels.begin()) continue;  // base level
          season_dummies[j].push_back((*season)[i] == *it ? 1.0 : 0.0);
          ++j;
        }
      }
    }

    RegressionSpec rspec;
    rspec.include_intercept = spec.include_intercept;
    rspec.fixed_effects.unit = spec.unit_fe;
    rspec.fixed_effects.time = spec.time_fe;
    rspec.dk_bandwidth = spec.bw_rule == LpBandwidthRule::Ceil15H
                             ? std::max(1, static_cast<int>(std::ceil(1.5 * std::abs(h))))
                             : spec.dk_bandwidth;
    sub.cols["__y"] = std::move(y);
    rspec.outcome = "__y";
    for (std::size_t s = 0; s < shock_cols.size(); ++s) {
      sub.cols[spec.shocks[s]] = std::move(xs[s]);
      rspec.regressors.push_back(spec.shocks[s]);
    }
    for (int l = 1; l <= spec.control_lags; ++l) {
      for (std::size_t s = 0; s < shock_cols.size(); ++s) {
        const std::string name = spec.shocks[s] + "_lag" + std::to_string(l);
        sub.cols[name] =
            std::move(shock_lags[(static_cast<std::size_t>(l) - 1) * shock_cols.size() + s]);
        rspec.regressors.push_back(name);
      }
      const std::string name = "outcome_lag" + std::to_string(l);
      sub.cols[name] = std::move(out_lags[static_cast<std::size_t>(l) - 1]);
      rspec.regressors.push_back(name);
    }
    {
      std::size_t j = 0;
      for (auto it = season_levels.begin(); it != season_levels.end(); ++it) {
        if (it == season_levels.begin()) continue;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "season_%g", *it);
        sub.cols[buf] = std::move(season_dummies[j]);
        rspec.regressors.push_back(buf);
        ++j;
      }
    }

    if (sub.n() < std::max<std::size_t>(spec.min_obs, rspec.regressors.size() + 2)) {
      results.push_back(std::move(res));  // horizon underpopulated
      continue;
    }
    try {
      res.fit = fit_ols_dk(sub, rspec);
    } catch (const InsufficientDataError&) {
    } catch (const RankDeficientError&) {
    }
    results.push_back(std::move(res));
  }
  return results;
}

// --- Event study -----------------------------------------------------------

std::vector<EventStudyCell> event_study(const Dataset& data,
                                        const std::string& outcome,
                                        const EventStudySpec& spec) {
  if (spec.event_types.empty()) throw ConfigError("event_study needs event types");
  std::map<std::pair<std::string, long>, std::size_t> index;
  for (std::size_t i = 0; i < data.n(); ++i) index[{data.unit[i], data.time[i]}] = i;
  const auto& out_col = data.col(outcome);
  std::vector<const std::vector<double>*> type_cols;
  for (const auto& t : spec.event_types) type_cols.push_back(&data.col(t));
  const std::set<std::string> truncated(spec.truncated_types.begin(),
                                        spec.truncated_types.end());

  std::vector<EventStudyCell> cells;
  for (int h = spec.h_min; h <= spec.h_max; ++h) {
    // Failure-type outcomes do not exist after the event; those cells are
    // structurally missing rather than estimated.
    std::vector<std::string> active;
    for (const auto& t : spec.event_types) {
      if (h >= 0 && truncated.count(t)) continue;
      active.push_back(t);
    }
    Dataset sub;
    std::vector<double> y;
    std::vector<std::vector<double>> dummies(active.size());
    std::vector<long> obs_year;
    for (std::size_t i = 0; i < data.n(); ++i) {
      int which = -1;
      for (std::size_t t = 0; t < spec.event_types.size(); ++t) {
        if ((*type_cols[t])[i] == 1.0) {
          which = static_cast<int>(t);
          break;
        }
      }
      if (which < 0) continue;
      const auto it =
          std::find(active.begin(), active.end(), spec.event_types[static_cast<std::size_t>(which)]);
      if (it == active.end()) continue;
      const auto th = index.find({data.unit[i], data.time[i] + h});
      if (th == index.end()) continue;
      const double yv = out_col[th->second];
      if (std::isnan(yv)) continue;
      sub.unit.push_back(data.unit[i]);
      sub.time.push_back(data.time[i]);
      y.push_back(yv);
      obs_year.push_back(data.time[i] + h);
      for (std::size_t a = 0; a < active.size(); ++a) {
        dummies[a].push_back(active[a] == *it ? 1.0 : 0.0);
      }
    }
    if (y.size() >= active.size() + 1 && !active.empty()) {
      sub.cols["__y"] = y;
      RegressionSpec rspec;
      rspec.outcome = "__y";
      rspec.include_intercept = false;
      rspec.dk_bandwidth = spec.dk_bandwidth;
      for (std::size_t a = 0; a < active.size(); ++a) {
        sub.cols[active[a]] = dummies[a];
        rspec.regressors.push_back(active[a]);
      }
      // Year effects constrained to sum to zero (deviation coding) so the
      // event-type coefficients stay interpretable as average levels.
      std::set<long> years(obs_year.begin(), obs_year.end());
      if (years.size() > 1) {
        const long base = *years.rbegin();
        for (const long yy : years) {
          if (yy == base) continue;
          std::vector<double> col(y.size());
          for (std::size_t i = 0; i < y.size(); ++i) {
            col[i] = (obs_year[i] == yy ? 1.0 : 0.0) - (obs_year[i] == base ? 1.0 : 0.0);
          }
          sub.cols["year_" + std::to_string(yy)] = std::move(col);
          rspec.regressors.push_back("year_" + std::to_string(yy));
        }
      }
      try {
        const FitResult fit = fit_ols_dk(sub, rspec);
        for (const auto& t : spec.event_types) {
          EventStudyCell cell;
          cell.horizon = h;
          cell.event_type = t;
          const auto pos = std::find(fit.terms.begin(), fit.terms.end(), t);
          if (pos != fit.terms.end()) {
            const auto j = static_cast<Eigen::Index>(pos - fit.terms.begin());
            cell.estimate = fit.coef[j];
            cell.se = fit.se[j];
          }
          cells.push_back(std::move(cell));
        }
        continue;
      } catch (const InsufficientDataError&) {
      } catch (const RankDeficientError&) {
      }
    }
    for (const auto& t : spec.event_types) {
      cells.push_back({h, t, std::nullopt, std::nullopt});
    }
  }
  return cells;
}

// --- Crisis correlation ----------------------------------------------------

FitResult crisis_correlation(const Dataset& state_month_counts,
                             const std::string& count_col,
                             const std::vector<std::string>& crisis_dummies,
                             int dk_bandwidth) {
  for (const auto& c : crisis_dummies) {
    if (!state_month_counts.cols.count(c)) {
      throw MissingSeriesError("crisis series '" + c + "' is missing");
    }
  }
  RegressionSpec spec;
  spec.outcome = count_col;
  spec.regressors = crisis_dummies;
  spec.dk_bandwidth = dk_bandwidth;
  return fit_ols_dk(state_month_counts, spec);
}

// --- Output ----------------------------------------------------------------

std::vector<TidyRow> tidy(const std::string& model, const FitResult& fit) {
  std::vector<TidyRow> rows;
  for (std::size_t j = 0; j < fit.terms.size(); ++j) {
    rows.push_back({model, fit.terms[j], fit.coef[static_cast<Eigen::Index>(j)],
                    fit.se[static_cast<Eigen::Index>(j)], fit.n_obs});
  }
  return rows;
}

void save_tidy_csv(const std::string& path, const std::vector<TidyRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "model,term,estimate,se,n\n";
  char buf[64];
  for (const auto& r : rows) {
    out << csv_escape(r.model) << ',' << csv_escape(r.term) << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", r.estimate);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", r.se);
    out << buf << ',' << r.n << "\n";
  }
}

}  // namespace bankdist
