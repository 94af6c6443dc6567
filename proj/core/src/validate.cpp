#include "povmap/validate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"
#include "povmap/parallel.hpp"
#include "povmap/random.hpp"

namespace povmap::validate {

using nlohmann::json;

Metric parse_metric(std::string_view name) {
  if (name == "pearson2") return Metric::kPearson2;
  if (name == "ssres") return Metric::kSsres;
  throw UsageError("unknown metric '" + std::string(name) + "' (expected pearson2 or ssres)");
}

std::string_view metric_name(Metric m) { return m == Metric::kPearson2 ? "pearson2" : "ssres"; }

RSquared r_squared_both(std::span<const double> y_obs, std::span<const double> y_pred) {
  if (y_obs.size() != y_pred.size()) throw DataError("r_squared: length mismatch");
  if (y_obs.size() < 2) throw DataError("r_squared: need at least 2 values");
  const double n = static_cast<double>(y_obs.size());
  double mo = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < y_obs.size(); ++i) {
    mo += y_obs[i];
    mp += y_pred[i];
  }
  mo /= n;
  mp /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y_obs.size(); ++i) {
    const double a = y_obs[i] - mo, b = y_pred[i] - mp, e = y_obs[i] - y_pred[i];
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
    ss_res += e * e;
  }
  RSquared r;
  if (sxx == 0.0) {
    r.pearson_defined = false;
    r.ssres_defined = false;
    return r;
  }
  r.ssres = 1.0 - ss_res / sxx;
  if (syy == 0.0) {
    r.pearson_defined = false;
  } else {
    r.pearson2 = (sxy * sxy) / (sxx * syy);
  }
  return r;
}

double r_squared(std::span<const double> y_obs, std::span<const double> y_pred, Metric metric) {
  const RSquared r = r_squared_both(y_obs, y_pred);
  if (!r.ssres_defined) throw DataError("r_squared: observed values are constant");
  return r.value(metric);
}

std::string_view protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kKFold: return "kfold";
    case Protocol::kLoco: return "loco";
    case Protocol::kPooled: return "pooled";
  }
  return "kfold";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "kfold") return Protocol::kKFold;
  if (name == "loco") return Protocol::kLoco;
  if (name == "pooled") return Protocol::kPooled;
  throw UsageError("unknown protocol '" + std::string(name) + "' (expected kfold, loco or pooled)");
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("k must be at least 2");
  if (k > n) throw UsageError("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = pos % k;
  return fold;
}

namespace {

std::map<std::string, std::vector<std::size_t>> rows_by_country(std::span<const std::string> countries) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < countries.size(); ++i) out[countries[i]].push_back(i);
  return out;
}

}  // namespace

Plan plan_kfold(std::span<const std::string> countries, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("k must be at least 2");
  Plan plan;
  plan.protocol = Protocol::kKFold;
  plan.k = k;
  plan.seed = seed;
  for (const auto& [country, rows] : rows_by_country(countries)) {
    if (rows.size() < k) {
      plan.excluded.push_back(country + ": " + std::to_string(rows.size()) + " rows < k");
      continue;
    }
    const auto assign = fold_assignment(rows.size(), k, derive_seed(seed, country));
    for (std::size_t f = 0; f < k; ++f) {
      Fold fold;
      fold.unit = country;
      fold.index = plan.folds.size();
      for (std::size_t j = 0; j < rows.size(); ++j) (assign[j] == f ? fold.test : fold.train).push_back(rows[j]);
      plan.folds.push_back(std::move(fold));
    }
    plan.units.push_back(country);
  }
  if (plan.folds.empty()) throw UsageError("k = " + std::to_string(k) + " exceeds the rows of every country");
  return plan;
}

Plan plan_loco(std::span<const std::string> countries) {
  const auto groups = rows_by_country(countries);
  if (groups.size() < 2) throw UsageError("leave-one-country-out needs at least 2 countries");
  Plan plan;
  plan.protocol = Protocol::kLoco;
  for (const auto& [country, rows] : groups) {
    if (rows.size() < 2) {
      plan.excluded.push_back(country + ": fewer than 2 clusters");
      continue;
    }
    Fold fold;
    fold.unit = country;
    fold.index = plan.folds.size();
    fold.test = rows;
    for (std::size_t i = 0; i < countries.size(); ++i) {
      if (countries[i] != country) fold.train.push_back(i);
    }
    plan.folds.push_back(std::move(fold));
    plan.units.push_back(country);
  }
  return plan;
}

Plan plan_pooled(std::span<const std::string> countries, std::size_t k, std::uint64_t seed) {
  if (rows_by_country(countries).size() < 2) throw UsageError("pooled evaluation needs at least 2 countries");
  Plan plan;
  plan.protocol = Protocol::kPooled;
  plan.k = k;
  plan.seed = seed;
  const auto assign = fold_assignment(countries.size(), k, seed);
  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    fold.unit = "all";
    fold.index = f;
    for (std::size_t i = 0; i < countries.size(); ++i) (assign[i] == f ? fold.test : fold.train).push_back(i);
    plan.folds.push_back(std::move(fold));
  }
  plan.units.push_back("all");
  return plan;
}

Plan make_plan(Protocol protocol, std::span<const std::string> countries, std::size_t k, std::uint64_t seed) {
  switch (protocol) {
    case Protocol::kKFold: return plan_kfold(countries, k, seed);
    case Protocol::kLoco: return plan_loco(countries);
    case Protocol::kPooled: return plan_pooled(countries, k, seed);
  }
  throw UsageError("unknown protocol");
}

ValidationReport score(const Plan& plan, std::span<const std::string> row_ids, std::span<const std::string> countries,
                       std::span<const double> y_obs, std::span<const double> predictions, Metric metric) {
  const std::size_t n = y_obs.size();
  if (row_ids.size() != n || countries.size() != n || predictions.size() != n) {
    throw DataError("score: row arrays differ in length");
  }
  ValidationReport rep;
  rep.protocol = plan.protocol == Protocol::kKFold ? "kfold-" + std::to_string(plan.k) : std::string(protocol_name(plan.protocol));
  rep.metric = metric;
  rep.seed = plan.seed;
  rep.row_ids.assign(row_ids.begin(), row_ids.end());
  rep.row_fold.assign(n, -1);
  rep.predictions.assign(n, 0.0);
  rep.excluded = plan.excluded;

  std::map<std::string, std::vector<std::size_t>> unit_rows;
  for (const auto& fold : plan.folds) {
    for (std::size_t i : fold.test) {
      if (rep.row_fold[i] != -1) throw DataError("score: row " + row_ids[i] + " tested twice");
      rep.row_fold[i] = static_cast<std::int64_t>(fold.index);
      rep.predictions[i] = predictions[i];
      unit_rows[fold.unit].push_back(i);
    }
  }
  double total = 0.0;
  for (const auto& unit : plan.units) {
    auto& rows = unit_rows[unit];
    std::sort(rows.begin(), rows.end());
    std::vector<double> obs, pred;
    for (std::size_t i : rows) {
      obs.push_back(y_obs[i]);
      pred.push_back(predictions[i]);
    }
    UnitScore s;
    s.unit = unit;
    s.n = rows.size();
    s.r2 = r_squared_both(obs, pred);
    if (!s.r2.ssres_defined) rep.flags.push_back(unit + ": observed IWI constant, R2 undefined");
    else if (!s.r2.pearson_defined) rep.flags.push_back(unit + ": predictions constant, pearson2 reported as 0");
    total += s.r2.value(metric);
    rep.units.push_back(std::move(s));
  }
  rep.mean = rep.units.empty() ? 0.0 : total / static_cast<double>(rep.units.size());
  return rep;
}

ValidationReport with_metric(ValidationReport report, Metric metric) {
  report.metric = metric;
  double total = 0.0;
  for (const auto& u : report.units) total += u.r2.value(metric);
  report.mean = report.units.empty() ? 0.0 : total / static_cast<double>(report.units.size());
  return report;
}

ValidationReport evaluate(const Plan& plan, std::span<const std::string> row_ids,
                          std::span<const std::string> countries, std::span<const double> y_obs,
                          const Trainer& trainer, Metric metric) {
  std::vector<std::vector<double>> fold_preds(plan.folds.size());
  parallel_for(plan.folds.size(), [&](std::size_t f) { fold_preds[f] = trainer(plan.folds[f]); });
  std::vector<double> predictions(y_obs.size(), 0.0);
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& test = plan.folds[f].test;
    if (fold_preds[f].size() != test.size()) throw DataError("trainer returned the wrong number of predictions");
    for (std::size_t j = 0; j < test.size(); ++j) predictions[test[j]] = fold_preds[f][j];
  }
  return score(plan, row_ids, countries, y_obs, predictions, metric);
}

ValidationReport kfold(std::span<const std::string> row_ids, std::span<const std::string> countries,
                       std::span<const double> y_obs, std::size_t k, std::uint64_t seed, const Trainer& trainer,
                       Metric metric) {
  return evaluate(plan_kfold(countries, k, seed), row_ids, countries, y_obs, trainer, metric);
}

ValidationReport leave_one_country_out(std::span<const std::string> row_ids, std::span<const std::string> countries,
                                       std::span<const double> y_obs, const Trainer& trainer, Metric metric) {
  return evaluate(plan_loco(countries), row_ids, countries, y_obs, trainer, metric);
}

ValidationReport pooled_eval(std::span<const std::string> row_ids, std::span<const std::string> countries,
                             std::span<const double> y_obs, std::size_t k, std::uint64_t seed,
                             const Trainer& trainer, Metric metric) {
  return evaluate(plan_pooled(countries, k, seed), row_ids, countries, y_obs, trainer, metric);
}

std::string format_report_json(const ValidationReport& r) {
  json units = json::array();
  for (const auto& u : r.units) {
    units.push_back({{"unit", u.unit},
                     {"n", u.n},
                     {"pearson2", u.r2.pearson2},
                     {"ssres", u.r2.ssres},
                     {"pearson_defined", u.r2.pearson_defined},
                     {"ssres_defined", u.r2.ssres_defined}});
  }
  json rows = json::array();
  for (std::size_t i = 0; i < r.row_ids.size(); ++i) {
    rows.push_back({{"id", r.row_ids[i]}, {"fold", r.row_fold[i]}, {"prediction", r.predictions[i]}});
  }
  json doc = {
      {"format", "povmap-validation-1"},
      {"protocol", r.protocol},
      {"metric", metric_name(r.metric)},
      {"seed", r.seed},
      {"mean", r.mean},
      {"units", units},
      {"rows", rows},
      {"excluded", r.excluded},
      {"flags", r.flags},
      // Published full-scale figures; they need restricted survey data and are
      // not reproducible here.
      {"reference",
       {{"note", "published full-scale results, context only"},
        {"single_country_mean", 0.8812},
        {"cross_country_mean", 0.856},
        {"pooled", 0.917},
        {"best_single_country", 0.9491}}},
  };
  return doc.dump(2) + "\n";
}

ValidationReport parse_report_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("validation report: ") + e.what());
  }
  try {
    ValidationReport r;
    r.protocol = doc.at("protocol").get<std::string>();
    r.metric = parse_metric(doc.at("metric").get<std::string>());
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.mean = doc.at("mean").get<double>();
    for (const auto& u : doc.at("units")) {
      UnitScore s;
      s.unit = u.at("unit").get<std::string>();
      s.n = u.at("n").get<std::size_t>();
      s.r2.pearson2 = u.at("pearson2").get<double>();
      s.r2.ssres = u.at("ssres").get<double>();
      s.r2.pearson_defined = u.at("pearson_defined").get<bool>();
      s.r2.ssres_defined = u.at("ssres_defined").get<bool>();
      r.units.push_back(std::move(s));
    }
    for (const auto& row : doc.at("rows")) {
      r.row_ids.push_back(row.at("id").get<std::string>());
      r.row_fold.push_back(row.at("fold").get<std::int64_t>());
      r.predictions.push_back(row.at("prediction").get<double>());
    }
    r.excluded = doc.at("excluded").get<std::vector<std::string>>();
    r.flags = doc.at("flags").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("validation report: ") + e.what());
  }
}

std::string format_report_csv(const ValidationReport& r) {
  std::ostringstream out;
  write_csv_row(out, {"unit", "n", "pearson2", "ssres", "value"});
  for (const auto& u : r.units) {
    write_csv_row(out, {u.unit, std::to_string(u.n), format_double(u.r2.pearson2), format_double(u.r2.ssres),
                        format_double(u.r2.value(r.metric))});
  }
  return out.str();
}

}  // namespace povmap::validate
