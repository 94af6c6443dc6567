#include "povmap/refine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "povmap/digest.hpp"
#include "povmap/error.hpp"
#include "povmap/parallel.hpp"
#include "povmap/random.hpp"

namespace povmap::refine {

using validate::Protocol;

void RefineData::validate() const {
  for (std::size_t i = 1; i < places.size(); ++i) {
    if (!(places[i - 1].place_id < places[i].place_id)) {
      throw DataError("refine data: place ids must be unique and sorted (" + places[i].place_id + ")");
    }
  }
  if (candidates.size() != clusters.size()) throw DataError("refine data: candidate sets misaligned with clusters");
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (candidates[i].cluster_id != clusters[i].cluster_id) {
      throw DataError("refine data: candidate set order differs at " + clusters[i].cluster_id);
    }
    for (const auto& c : candidates[i].candidates) {
      if (!place_index(c.place_id)) throw DataError("refine data: unknown candidate place " + c.place_id);
    }
  }
  for (const auto& p : places) {
    if (p.tile && *p.tile >= tiles.size()) throw DataError("refine data: tile index out of range for " + p.place_id);
  }
}

std::optional<std::size_t> RefineData::place_index(std::string_view place_id) const {
  auto it = std::lower_bound(places.begin(), places.end(), place_id,
                             [](const PlaceRecord& p, std::string_view id) { return p.place_id < id; });
  if (it == places.end() || it->place_id != place_id) return std::nullopt;
  return static_cast<std::size_t>(it - places.begin());
}

void RefineConfig::validate() const {
  if (iterations == 0) throw UsageError("refine: iterations must be >= 1");
  if (protocols.empty()) throw UsageError("refine: no validation protocol selected");
  if (k < 2) throw UsageError("refine: k must be >= 2");
  if (!(stop_tolerance >= 0.0)) throw UsageError("refine: stop tolerance must be >= 0");
  gbt.validate();
  arch.validate();
  for (const auto& o : overrides) {
    if (o.gbt) o.gbt->validate();
  }
}

const ProtocolState* RefineState::find(Protocol p) const {
  for (const auto& ps : protocols) {
    if (ps.protocol == p) return &ps;
  }
  return nullptr;
}

std::string_view estimator_name(Estimator e) {
  return e == Estimator::kSingleCountry ? "single-country" : "cross-country";
}

Estimator select_estimator(double single_score, double cross_score) {
  if (std::isnan(single_score) || std::isnan(cross_score)) throw DataError("select_estimator: missing score");
  return single_score > cross_score ? Estimator::kSingleCountry : Estimator::kCrossCountry;
}

namespace {

double clamp_iwi(double v) { return std::clamp(v, 0.0, 100.0); }

std::optional<double> unit_score(const ProtocolState* ps, const std::string& unit, validate::Metric metric) {
  if (!ps) return std::nullopt;
  for (const auto& u : ps->report.units) {
    if (u.unit == unit && u.r2.ssres_defined) return u.r2.value(metric);
  }
  return std::nullopt;
}

std::vector<EstimatorChoice> choose_estimators(const RefineState& state, const RefineData& data,
                                               validate::Metric metric) {
  std::set<std::string> countries;
  for (const auto& p : data.places) countries.insert(p.country);
  for (const auto& c : data.clusters) countries.insert(c.country);
  const ProtocolState* single = state.find(Protocol::kKFold);
  const ProtocolState* cross = state.find(Protocol::kLoco);
  std::vector<EstimatorChoice> out;
  for (const auto& c : countries) {
    EstimatorChoice ch;
    ch.country = c;
    ch.single_score = unit_score(single, c, metric);
    ch.cross_score = unit_score(cross, c, metric);
    if (ch.single_score && ch.cross_score) {
      ch.estimator = select_estimator(*ch.single_score, *ch.cross_score);
    } else {
      ch.estimator = ch.single_score ? Estimator::kSingleCountry : Estimator::kCrossCountry;
    }
    out.push_back(std::move(ch));
  }
  return out;
}

// Protocol that produces a country's estimates for the chosen estimator.
const ProtocolState* producer_for(const RefineState& state, Estimator e) {
  if (e == Estimator::kSingleCountry) {
    if (auto* p = state.find(Protocol::kKFold)) return p;
  }
  if (auto* p = state.find(Protocol::kLoco)) return p;
  if (auto* p = state.find(Protocol::kPooled)) return p;
  return state.protocols.empty() ? nullptr : &state.protocols.front();
}

// place index -> clusters that list it as a candidate
std::vector<std::vector<std::size_t>> listing_clusters(const RefineData& data) {
  std::vector<std::vector<std::size_t>> out(data.places.size());
  for (std::size_t i = 0; i < data.candidates.size(); ++i) {
    for (const auto& c : data.candidates[i].candidates) out[*data.place_index(c.place_id)].push_back(i);
  }
  return out;
}

// cluster index -> fold index that tests it, per protocol
std::vector<std::int64_t> test_fold_of(const ProtocolState& ps, std::size_t n_clusters) {
  std::vector<std::int64_t> out(n_clusters, -1);
  for (std::size_t f = 0; f < ps.folds.size(); ++f) {
    for (std::size_t i : ps.folds[f].fold.test) out[i] = static_cast<std::int64_t>(f);
  }
  return out;
}

bool fold_saw(const FoldState& fs, std::size_t cluster) {
  if (std::binary_search(fs.trained_clusters.begin(), fs.trained_clusters.end(), cluster)) return true;
  if (fs.search) {
    const auto& t = fs.search->touched_rows;
    if (std::binary_search(t.begin(), t.end(), cluster)) return true;
  }
  return false;
}

// Folds of `ps` whose out-of-fold estimate applies to place p. Empty when the
// place cannot be estimated without leakage.
std::vector<std::size_t> estimating_folds(const ProtocolState& ps, const std::vector<std::int64_t>& test_fold,
                                          const std::vector<std::size_t>& listing, const std::string& country) {
  std::set<std::size_t> folds;
  for (std::size_t c : listing) {
    if (test_fold[c] >= 0) folds.insert(static_cast<std::size_t>(test_fold[c]));
  }
  if (folds.empty()) {
    for (std::size_t f = 0; f < ps.folds.size(); ++f) {
      const auto& unit = ps.folds[f].fold.unit;
      if (unit == country || unit == "all") {
        folds.insert(f);
        break;
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t f : folds) {
    bool clean = true;
    for (std::size_t c : listing) clean = clean && !fold_saw(ps.folds[f], c);
    if (clean) out.push_back(f);
  }
  return out;
}

void train_image_model(RefineState& state, RefineData& data, const RefineConfig& config, std::size_t t) {
  state.choices = choose_estimators(state, data, config.metric);
  std::map<std::string, Estimator> by_country;
  for (const auto& c : state.choices) by_country[c.country] = c.estimator;
  const auto listing = listing_clusters(data);
  std::map<const ProtocolState*, std::vector<std::int64_t>> test_folds;
  for (const auto& ps : state.protocols) test_folds[&ps] = test_fold_of(ps, data.clusters.size());

  std::vector<LabelRecord> records;
  std::vector<std::size_t> excluded_multi;
  for (std::size_t p = 0; p < data.places.size(); ++p) {
    const PlaceRecord& place = data.places[p];
    if (!place.tile) continue;
    const ProtocolState* ps = producer_for(state, by_country[place.country]);
    if (!ps) continue;
    const auto folds = estimating_folds(*ps, test_folds[ps], listing[p], place.country);
    if (folds.size() != 1) {
      if (folds.size() > 1) excluded_multi.push_back(p);
      continue;
    }
    LabelRecord r;
    r.place = p;
    r.producer = ps->protocol;
    r.producer_fold = folds.front();
    r.prediction = clamp_iwi(ps->folds[folds.front()].model.predict(place.features.active()));
    records.push_back(r);
  }
  if (config.cnn_max_places && records.size() > config.cnn_max_places) {
    Rng rng(derive_seed(config.seed, "cnn-pool-" + std::to_string(t)));
    std::shuffle(records.begin(), records.end(), rng);
    records.resize(config.cnn_max_places);
    std::sort(records.begin(), records.end(), [](const LabelRecord& a, const LabelRecord& b) { return a.place < b.place; });
  }
  if (records.size() < 4) throw DataError("refine: fewer than 4 places can be labeled for the image model");

  std::vector<double> preds;
  for (const auto& r : records) preds.push_back(r.prediction);
  const imgcls::Labels labels = imgcls::make_labels(preds);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].label = labels.labels[i];

  const IterationOverride* ov = t < config.overrides.size() ? &config.overrides[t] : nullptr;
  imgcls::TrainConfig tc = ov && ov->cnn ? *ov->cnn : config.cnn;
  tc.seed = derive_seed(config.seed, "cnn-train-" + std::to_string(t));
  if (!state.cnn) {
    imgcls::ArchSpec arch = config.arch;
    if (ov && ov->fc_hidden) arch.fc_hidden = *ov->fc_hidden;
    state.cnn = imgcls::make_model(arch, derive_seed(config.seed, "cnn-init"));
  } else {
    const auto hidden = ov && ov->fc_hidden ? *ov->fc_hidden : config.arch.fc_hidden;
    state.cnn = imgcls::warm_start(*state.cnn, hidden, derive_seed(config.seed, "cnn-warm-" + std::to_string(t)));
  }
  std::vector<imgcls::Tile> tiles;
  std::vector<int> y;
  for (const auto& r : records) {
    tiles.push_back(data.tiles[*data.places[r.place].tile]);
    y.push_back(r.label);
  }
  const imgcls::TrainReport rep = imgcls::train_cls(*state.cnn, tiles, y, tc);
  state.cnn->thresholds = labels.thresholds;

  const auto probs = imgcls::forward_all(*state.cnn, data.tiles);
  constexpr std::array<double, 4> kUniform{0.25, 0.25, 0.25, 0.25};
  std::size_t untiled = 0;
  for (auto& place : data.places) {
    if (place.tile) {
      place.features.set_image_probs(std::span<const double, 4>(probs[*place.tile]));
    } else {
      place.features.set_image_probs(std::span<const double, 4>(kUniform));
      ++untiled;
    }
  }
  state.cnn_labels = std::move(records);
  std::ostringstream log;
  log << "iteration " << t << ": image model trained on " << state.cnn_labels.size() << " labels ("
      << excluded_multi.size() << " places excluded: listed by clusters in several folds; " << untiled
      << " places without tile use uniform probabilities)";
  if (labels.degenerate || !labels.warning.empty()) log << "; labels: " << labels.warning;
  state.audit_log.push_back(log.str());
  state.history.back().cnn_labels = state.cnn_labels.size();
  state.history.back().cnn_train_accuracy = rep.train_accuracy;
}

struct ClusterRow {
  bool ok = false;
  std::vector<double> x;
};

}  // namespace

void run_iteration(RefineState& state, RefineData& data, const RefineConfig& config) {
  config.validate();
  const std::size_t t = state.next_iteration;
  const std::size_t n_clusters = data.clusters.size();
  std::vector<std::string> ids, countries;
  std::vector<double> y_obs;
  for (const auto& c : data.clusters) {
    ids.push_back(c.cluster_id);
    countries.push_back(c.country);
    y_obs.push_back(c.iwi);
  }
  if (t == 0) {
    data.validate();
    state.protocols.clear();
    for (Protocol p : config.protocols) {
      ProtocolState ps;
      ps.protocol = p;
      ps.plan = validate::make_plan(p, countries, config.k, derive_seed(config.seed, "folds"));
      ps.candidate_pred.assign(n_clusters, {});
      ps.cluster_pred.assign(n_clusters, 0.0);
      ps.narrowed.assign(n_clusters, std::nullopt);
      state.protocols.push_back(std::move(ps));
    }
  }
  state.history.push_back({});
  state.history.back().iteration = t;
  if (t >= 2) train_image_model(state, data, config, t);

  const std::size_t width = data.places.empty() ? osm::kBaseFeatureCount : data.places.front().features.active_width();
  std::unordered_map<std::string, osm::FeatureVector> features;
  for (const auto& p : data.places) features.emplace(p.place_id, p.features);
  const IterationOverride* ov = t < config.overrides.size() ? &config.overrides[t] : nullptr;
  const bool search_now = config.search_budget > 0 &&
                          std::find(config.search_iterations.begin(), config.search_iterations.end(), t) !=
                              config.search_iterations.end();
  std::size_t narrowed_count = 0;

  for (std::size_t pi = 0; pi < state.protocols.size(); ++pi) {
    ProtocolState& ps = state.protocols[pi];
    const std::string pname(validate::protocol_name(ps.protocol));

    // Narrow with the previous iteration's out-of-fold candidate predictions.
    std::vector<clusters::CandidateSet> sets = data.candidates;
    for (std::size_t i = 0; i < n_clusters; ++i) {
      ps.narrowed[i].reset();
      if (t == 0 || ps.candidate_pred[i].empty()) continue;
      std::unordered_map<std::string, double> preds;
      for (std::size_t j = 0; j < sets[i].candidates.size(); ++j) preds[sets[i].candidates[j].place_id] = ps.candidate_pred[i][j];
      const auto res = clusters::narrow(sets[i], preds, data.clusters[i].iwi);
      if (!res.skipped) {
        ps.narrowed[i] = res.subset;
        sets[i].narrowed = res.subset;
        if (res.subset.size() < sets[i].candidates.size()) ++narrowed_count;
      }
    }
    const auto rows = clusters::training_rows(data.clusters, sets, features, width);
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < rows.rows.size(); ++r) row_of[rows.rows[r].cluster_id] = r;
    for (const auto& a : rows.audit) state.audit_log.push_back("iteration " + std::to_string(t) + ": " + pname + ": " + a);
    std::vector<ClusterRow> cluster_rows(n_clusters);
    for (std::size_t i = 0; i < n_clusters; ++i) {
      auto it = row_of.find(data.clusters[i].cluster_id);
      if (it != row_of.end()) cluster_rows[i] = {true, rows.rows[it->second].x};
    }

    std::vector<FoldState> previous = std::move(ps.folds);
    std::vector<FoldState> folds(ps.plan.folds.size());
    std::vector<std::vector<double>> new_candidate_pred(n_clusters);
    parallel_for(folds.size(), [&](std::size_t f) {
      FoldState& fs = folds[f];
      fs.fold = ps.plan.folds[f];
      std::vector<std::size_t> usable;
      for (std::size_t i : fs.fold.train) {
        if (cluster_rows[i].ok) usable.push_back(i);
      }
      std::vector<std::size_t> sample = usable;
      if (config.bootstrap && !usable.empty()) {
        Rng rng(derive_seed(config.seed, "bootstrap-" + std::to_string(t) + "-" + pname + "-" + std::to_string(f)));
        std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
        for (auto& s : sample) s = usable[pick(rng)];
      }
      if (config.inject_leak && config.inject_leak->protocol == ps.protocol && config.inject_leak->fold == f &&
          config.inject_leak->iteration == t) {
        for (std::size_t i : fs.fold.test) {
          if (cluster_rows[i].ok) {
            sample.push_back(i);
            break;
          }
        }
      }
      std::sort(sample.begin(), sample.end());
      if (sample.size() < 2) throw DataError("refine: " + pname + " fold " + std::to_string(f) + " has fewer than 2 training clusters");
      fs.trained_clusters = sample;
      fs.trained_clusters.erase(std::unique(fs.trained_clusters.begin(), fs.trained_clusters.end()),
                                fs.trained_clusters.end());

      std::vector<std::vector<double>> xs;
      std::vector<double> ys;
      for (std::size_t i : sample) {
        xs.push_back(cluster_rows[i].x);
        ys.push_back(data.clusters[i].iwi);
      }
      const gbt::Matrix x = gbt::Matrix::from_rows(xs);

      gbt::GbtConfig cfg = config.gbt;
      if (f < previous.size()) cfg = previous[f].config;
      if (search_now) {
        std::vector<std::vector<double>> ux;
        std::vector<double> uy;
        for (std::size_t i : usable) {
          ux.push_back(cluster_rows[i].x);
          uy.push_back(data.clusters[i].iwi);
        }
        std::vector<std::size_t> all(usable.size());
        std::iota(all.begin(), all.end(), 0);
        auto res = gbt::hyper_search(gbt::Matrix::from_rows(ux), uy, all, config.search_space, config.search_budget,
                                     derive_seed(config.seed, "search-" + std::to_string(t) + "-" + pname + "-" +
                                                                  std::to_string(f)),
                                     config.search_inner_k);
        for (auto& r : res.touched_rows) r = usable[r];
        cfg = res.best;
        fs.search = std::move(res);
      } else if (f < previous.size()) {
        fs.search = previous[f].search;
      }
      if (ov && ov->gbt) cfg = *ov->gbt;
      cfg.seed = derive_seed(config.seed, "gbt-" + std::to_string(t) + "-" + pname + "-" + std::to_string(f));
      fs.config = cfg;
      fs.model = gbt::train(x, ys, cfg);

      for (std::size_t i : fs.fold.test) {
        auto& out = new_candidate_pred[i];
        for (const auto& c : data.candidates[i].candidates) {
          out.push_back(clamp_iwi(fs.model.predict(features.at(c.place_id).active())));
        }
      }
    });
    ps.folds = std::move(folds);
    for (std::size_t i = 0; i < n_clusters; ++i) {
      const auto& cp = new_candidate_pred[i];
      ps.candidate_pred[i] = cp;
      if (cp.empty()) {
        ps.cluster_pred[i] = 0.0;
        continue;
      }
      double s = 0.0;
      for (double v : cp) s += v;
      ps.cluster_pred[i] = s / static_cast<double>(cp.size());
    }
    for (const auto& fs : ps.folds) {
      for (std::size_t i : fs.fold.test) {
        if (ps.candidate_pred[i].empty()) {
          state.audit_log.push_back("iteration " + std::to_string(t) + ": " + pname + ": cluster " +
                                    data.clusters[i].cluster_id + " has no candidates; scored as 0");
        }
      }
    }
    ps.report = validate::score(ps.plan, ids, countries, y_obs, ps.cluster_pred, config.metric);
    state.history.back().scores.emplace_back(pname, ps.report.mean);
  }
  state.history.back().active_width = width;
  state.history.back().narrowed_clusters = narrowed_count;
  state.next_iteration = t + 1;

  const AuditReport audit = leakage_audit(state, data);
  if (!audit.clean()) {
    for (const auto& v : audit.violations) state.audit_log.push_back("iteration " + std::to_string(t) + ": VIOLATION " + v);
    throw LeakageError("leakage audit failed with " + std::to_string(audit.violations.size()) +
                       " violation(s): " + audit.violations.front());
  }
  state.audit_log.push_back("iteration " + std::to_string(t) + ": leakage audit clean");
}

void run_refine(RefineState& state, RefineData& data, const RefineConfig& config,
                const IterationCallback& on_iteration) {
  config.validate();
  state = RefineState{};
  std::map<std::string, std::size_t> drops;
  for (std::size_t t = 0; t < config.iterations; ++t) {
    run_iteration(state, data, config);
    if (on_iteration) on_iteration(state, data);
    if (state.history.size() < 2) continue;
    const auto& prev = state.history[state.history.size() - 2].scores;
    const auto& cur = state.history.back().scores;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      auto& d = drops[cur[i].first];
      d = cur[i].second < prev[i].second - config.stop_tolerance ? d + 1 : 0;
      if (d >= config.stop_patience && !state.stopped) {
        state.stopped = true;
        state.stop_reason = cur[i].first + " R2 dropped by more than " + std::to_string(config.stop_tolerance) +
                            " on " + std::to_string(d) + " consecutive iterations";
      }
    }
    if (state.stopped) {
      state.audit_log.push_back("stopped after iteration " + std::to_string(t) + ": " + state.stop_reason);
      break;
    }
  }
}

AuditReport leakage_audit(const RefineState& state, const RefineData& data) {
  AuditReport rep;
  auto cluster_name = [&](std::size_t i) {
    return i < data.clusters.size() ? data.clusters[i].cluster_id : "#" + std::to_string(i);
  };
  for (const auto& ps : state.protocols) {
    const std::string pname(validate::protocol_name(ps.protocol));
    for (std::size_t f = 0; f < ps.folds.size(); ++f) {
      const FoldState& fs = ps.folds[f];
      const std::string where = pname + " fold " + std::to_string(f) + " (" + fs.fold.unit + ")";
      for (std::size_t i : fs.fold.test) {
        if (std::binary_search(fs.trained_clusters.begin(), fs.trained_clusters.end(), i)) {
          rep.violations.push_back("(a) " + where + " trained on held-out cluster " + cluster_name(i));
        }
      }
      if (ps.protocol == Protocol::kLoco) {
        for (std::size_t i : fs.trained_clusters) {
          if (i < data.clusters.size() && data.clusters[i].country == fs.fold.unit &&
              !std::binary_search(fs.fold.test.begin(), fs.fold.test.end(), i)) {
            rep.violations.push_back("(a) " + where + " trained on cluster " + cluster_name(i) +
                                     " of the held-out country");
          }
        }
      }
      if (fs.search) {
        for (std::size_t i : fs.search->touched_rows) {
          if (!std::binary_search(fs.fold.train.begin(), fs.fold.train.end(), i)) {
            rep.violations.push_back("(c) " + where + " hyperparameter search touched non-training cluster " +
                                     cluster_name(i));
          }
        }
      }
    }
  }
  if (!state.cnn_labels.empty()) {
    const auto listing = listing_clusters(data);
    for (const auto& r : state.cnn_labels) {
      const ProtocolState* ps = state.find(r.producer);
      if (!ps || r.producer_fold >= ps->folds.size()) {
        rep.violations.push_back("(b) label of " + data.places[r.place].place_id + " has no producing model");
        continue;
      }
      for (std::size_t c : listing[r.place]) {
        if (fold_saw(ps->folds[r.producer_fold], c)) {
          rep.violations.push_back("(b) label of " + data.places[r.place].place_id + " produced by " +
                                   std::string(validate::protocol_name(r.producer)) + " fold " +
                                   std::to_string(r.producer_fold) + ", which trained on cluster " + cluster_name(c));
        }
      }
    }
  }
  return rep;
}

std::string state_digest(const RefineState& state) {
  std::ostringstream out;
  out << state.next_iteration << '\n';
  for (const auto& ps : state.protocols) {
    out << validate::protocol_name(ps.protocol) << '\n' << validate::format_report_json(ps.report);
    for (const auto& fs : ps.folds) {
      out << gbt::model_to_json(fs.model);
      for (std::size_t i : fs.trained_clusters) out << i << ',';
      if (fs.search) {
        for (std::size_t i : fs.search->touched_rows) out << i << ';';
      }
      out << '\n';
    }
    for (const auto& n : ps.narrowed) {
      if (n) {
        for (const auto& id : *n) out << id << ',';
      }
      out << '|';
    }
  }
  if (state.cnn) out << imgcls::model_to_text(*state.cnn);
  for (const auto& r : state.cnn_labels) out << r.place << ',' << r.prediction << ',' << r.label << ';';
  for (const auto& line : state.audit_log) out << line << '\n';
  return sha256_hex(out.str());
}

std::vector<double> place_predictions(const RefineState& state, const RefineData& data) {
  const auto choices = state.choices.empty() ? choose_estimators(state, data, validate::Metric::kPearson2) : state.choices;
  std::map<std::string, Estimator> by_country;
  for (const auto& c : choices) by_country[c.country] = c.estimator;
  const auto listing = listing_clusters(data);
  std::map<const ProtocolState*, std::vector<std::int64_t>> test_folds;
  for (const auto& ps : state.protocols) test_folds[&ps] = test_fold_of(ps, data.clusters.size());

  std::vector<double> out(data.places.size(), 0.0);
  parallel_for(data.places.size(), [&](std::size_t p) {
    const PlaceRecord& place = data.places[p];
    const ProtocolState* ps = producer_for(state, by_country.at(place.country));
    if (!ps || ps->folds.empty()) return;
    std::set<std::size_t> folds;
    for (std::size_t c : listing[p]) {
      const auto f = test_folds.at(ps)[c];
      if (f >= 0) folds.insert(static_cast<std::size_t>(f));
    }
    if (folds.empty()) {
      for (std::size_t f = 0; f < ps->folds.size(); ++f) {
        if (ps->folds[f].fold.unit == place.country || ps->folds[f].fold.unit == "all") {
          folds.insert(f);
          break;
        }
      }
    }
    if (folds.empty()) folds.insert(0);
    double s = 0.0;
    for (std::size_t f : folds) s += clamp_iwi(ps->folds[f].model.predict(place.features.active()));
    out[p] = s / static_cast<double>(folds.size());
  });
  return out;
}

}  // namespace povmap::refine
