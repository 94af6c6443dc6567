#include "povmap/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/parallel.hpp"
#include "povmap/random.hpp"
#include "povmap/validate.hpp"

namespace povmap::gbt {

using nlohmann::json;

void GbtConfig::validate() const {
  auto fail = [](const std::string& what) { throw UsageError("gbt config: " + what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (n_estimators < 0) fail("n_estimators must be >= 0");
  if (max_depth < 0 || max_depth > 30) fail("max_depth must be in [0, 30]");
  if (!(min_child_weight >= 0.0)) fail("min_child_weight must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) fail("subsample must be in (0, 1]");
  if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0)) fail("colsample_bytree must be in (0, 1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
}

Matrix Matrix::from_rows(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols_) throw DataError("matrix rows differ in width");
    std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(r * m.cols_));
  }
  return m;
}

double Tree::predict(std::span<const double> x) const {
  std::int32_t i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double GbtModel::predict(std::span<const double> x) const {
  if (x.size() != n_features) {
    throw UsageError("gbt predict: expected " + std::to_string(n_features) + " features, got " +
                     std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const Tree& t : trees) sum += t.predict(x);
  return base + config.learning_rate * sum;
}

std::vector<double> GbtModel::predict_all(const Matrix& x) const {
  std::vector<double> out(x.rows());
  parallel_for(x.rows(), [&](std::size_t r) { out[r] = predict(x.row(r)); });
  return out;
}

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

double split_threshold(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return mid <= a ? b : mid;
}

std::optional<Split> best_split(std::span<const double> values, std::span<const double> g,
                                std::span<const double> h, const GbtConfig& config) {
  if (values.size() != g.size() || values.size() != h.size()) throw UsageError("best_split: length mismatch");
  if (values.size() < 2) throw UsageError("best_split: need at least 2 samples");
  double gt = 0.0, ht = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    gt += g[i];
    ht += h[i];
  }
  std::optional<Split> best;
  double gl = 0.0, hl = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    gl += g[i];
    hl += h[i];
    if (values[i + 1] == values[i]) continue;
    const double gr = gt - gl, hr = ht - hl;
    if (hl < config.min_child_weight || hr < config.min_child_weight) continue;
    const double gain = split_gain(gl, hl, gr, hr, config.lambda, config.gamma);
    if (gain > 0.0 && (!best || gain > best->gain)) {
      best = Split{split_threshold(values[i], values[i + 1]), gain, gl, hl};
    }
  }
  return best;
}

namespace {

struct ScanState {
  double g = 0.0, h = 0.0, prev = 0.0;
  bool seen = false;
};

struct Candidate {
  bool found = false;
  double gain = 0.0;
  double threshold = 0.0;
};

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GbtModel train(const Matrix& x, std::span<const double> y, const GbtConfig& config,
               std::span<const std::size_t> subset) {
  config.validate();
  if (y.size() != x.rows()) throw DataError("gbt train: " + std::to_string(x.rows()) + " rows but " +
                                            std::to_string(y.size()) + " targets");
  std::vector<std::size_t> rows;
  if (subset.empty()) {
    rows.resize(x.rows());
    std::iota(rows.begin(), rows.end(), 0);
  } else {
    rows.assign(subset.begin(), subset.end());
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    if (rows.back() >= x.rows()) throw UsageError("gbt train: subset row out of range");
  }
  const std::size_t n = rows.size(), d = x.cols();
  if (n < 2) throw DataError("gbt train: need at least 2 rows");
  for (std::size_t r : rows) {
    if (!std::isfinite(y[r])) throw DataError("gbt train: non-finite target in row " + std::to_string(r));
    for (std::size_t c = 0; c < d; ++c) {
      if (!std::isfinite(x.at(r, c))) throw DataError("gbt train: non-finite feature in row " + std::to_string(r));
    }
  }

  GbtModel model;
  model.n_features = d;
  model.config = config;
  for (std::size_t r : rows) model.base += y[r];
  model.base /= static_cast<double>(n);

  // Row positions 0..n-1 index into `rows`.
  std::vector<std::vector<std::uint32_t>> order(d);
  std::vector<std::vector<double>> sorted(d);
  parallel_for(d, [&](std::size_t c) {
    auto& o = order[c];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x.at(rows[a], c) < x.at(rows[b], c);
    });
    sorted[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) sorted[c][i] = x.at(rows[o[i]], c);
  });

  std::vector<double> yhat(n, model.base), grad(n), hess(n, 1.0);
  std::vector<std::int32_t> node_of(n);
  const std::size_t n_bag = config.subsample >= 1.0
                                ? n
                                : std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(config.subsample * n)),
                                                          1, n);
  const std::size_t n_cols =
      config.colsample_bytree >= 1.0
          ? d
          : std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(config.colsample_bytree * d)), 1,
                                    std::max<std::size_t>(d, 1));

  for (int t = 0; t < config.n_estimators; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    std::fill(node_of.begin(), node_of.end(), -1);
    if (n_bag == n) {
      std::fill(node_of.begin(), node_of.end(), 0);
    } else {
      for (std::size_t p : sample_without_replacement(n, n_bag, rng)) node_of[p] = 0;
    }
    std::vector<std::size_t> features;
    if (n_cols == d) {
      features.resize(d);
      std::iota(features.begin(), features.end(), 0);
    } else {
      features = sample_without_replacement(d, n_cols, rng);
    }
    for (std::size_t p = 0; p < n; ++p) grad[p] = yhat[p] - y[rows[p]];

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<double> node_g{0.0}, node_h{0.0};
    for (std::size_t p = 0; p < n; ++p) {
      if (node_of[p] == 0) {
        node_g[0] += grad[p];
        node_h[0] += hess[p];
      }
    }
    std::vector<std::int32_t> active{0};
    for (int depth = 0; depth < config.max_depth && !active.empty(); ++depth) {
      std::vector<std::int32_t> slot_of(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) slot_of[static_cast<std::size_t>(active[s])] = static_cast<std::int32_t>(s);

      std::vector<std::vector<Candidate>> per_feature(features.size());
      parallel_for(features.size(), [&](std::size_t fi) {
        const std::size_t c = features[fi];
        std::vector<ScanState> st(active.size());
        std::vector<Candidate> best(active.size());
        const auto& ord = order[c];
        const auto& vals = sorted[c];
        for (std::size_t i = 0; i < n; ++i) {
          const std::uint32_t p = ord[i];
          const std::int32_t node = node_of[p];
          if (node < 0) continue;
          const std::int32_t s = slot_of[static_cast<std::size_t>(node)];
          if (s < 0) continue;
          ScanState& ss = st[static_cast<std::size_t>(s)];
          const double v = vals[i];
          if (ss.seen && v != ss.prev) {
            const double gt = node_g[static_cast<std::size_t>(node)], ht = node_h[static_cast<std::size_t>(node)];
            const double hr = ht - ss.h;
            if (ss.h >= config.min_child_weight && hr >= config.min_child_weight) {
              const double gain = split_gain(ss.g, ss.h, gt - ss.g, hr, config.lambda, config.gamma);
              Candidate& b = best[static_cast<std::size_t>(s)];
              if (gain > 0.0 && (!b.found || gain > b.gain)) b = {true, gain, split_threshold(ss.prev, v)};
            }
          }
          ss.g += grad[p];
          ss.h += hess[p];
          ss.prev = v;
          ss.seen = true;
        }
        per_feature[fi] = std::move(best);
      });

      std::vector<std::int32_t> next;
      for (std::size_t s = 0; s < active.size(); ++s) {
        Candidate chosen;
        std::size_t chosen_feature = 0;
        for (std::size_t fi = 0; fi < features.size(); ++fi) {
          const Candidate& c = per_feature[fi][s];
          if (c.found && (!chosen.found || c.gain > chosen.gain)) {
            chosen = c;
            chosen_feature = features[fi];
          }
        }
        if (!chosen.found) continue;
        const auto parent = static_cast<std::size_t>(active[s]);
        const auto left = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes[parent].feature = static_cast<std::int32_t>(chosen_feature);
        tree.nodes[parent].threshold = chosen.threshold;
        tree.nodes[parent].left = left;
        tree.nodes[parent].right = left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        node_g.resize(tree.nodes.size(), 0.0);
        node_h.resize(tree.nodes.size(), 0.0);
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;
      // Route rows of split nodes; recompute child sums in row order.
      for (std::size_t p = 0; p < n; ++p) {
        const std::int32_t node = node_of[p];
        if (node < 0) continue;
        const Node& nd = tree.nodes[static_cast<std::size_t>(node)];
        if (nd.feature < 0) continue;
        const std::int32_t child = x.at(rows[p], static_cast<std::size_t>(nd.feature)) < nd.threshold ? nd.left : nd.right;
        node_of[p] = child;
        node_g[static_cast<std::size_t>(child)] += grad[p];
        node_h[static_cast<std::size_t>(child)] += hess[p];
      }
      active = std::move(next);
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (tree.nodes[i].feature < 0) tree.nodes[i].value = leaf_weight(node_g[i], node_h[i], config.lambda);
    }

    double sse = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      yhat[p] += config.learning_rate * tree.predict(x.row(rows[p]));
      const double e = yhat[p] - y[rows[p]];
      sse += e * e;
    }
    model.train_rmse.push_back(std::sqrt(sse / static_cast<double>(n)));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

namespace {

json config_json(const GbtConfig& c) {
  return {{"learning_rate", c.learning_rate},       {"n_estimators", c.n_estimators},
          {"max_depth", c.max_depth},               {"min_child_weight", c.min_child_weight},
          {"subsample", c.subsample},               {"colsample_bytree", c.colsample_bytree},
          {"lambda", c.lambda},                     {"gamma", c.gamma},
          {"seed", c.seed}};
}

GbtConfig config_from(const json& j) {
  GbtConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.n_estimators = j.at("n_estimators").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.min_child_weight = j.at("min_child_weight").get<double>();
  c.subsample = j.at("subsample").get<double>();
  c.colsample_bytree = j.at("colsample_bytree").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string model_to_json(const GbtModel& model) {
  json trees = json::array();
  for (const Tree& t : model.trees) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         value = json::array();
    for (const Node& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back(
        {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}});
  }
  json doc = {{"format", "povmap-gbt-1"},
              {"base", model.base},
              {"n_features", model.n_features},
              {"config", config_json(model.config)},
              {"train_rmse", model.train_rmse},
              {"trees", trees}};
  return doc.dump() + "\n";
}

GbtModel model_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "povmap-gbt-1") throw DataError("gbt model: unsupported format");
    GbtModel m;
    m.base = doc.at("base").get<double>();
    m.n_features = doc.at("n_features").get<std::size_t>();
    m.config = config_from(doc.at("config"));
    m.train_rmse = doc.at("train_rmse").get<std::vector<double>>();
    for (const json& t : doc.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<std::int32_t>>();
      const auto right = t.at("right").get<std::vector<std::int32_t>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const std::size_t k = feature.size();
      if (k == 0 || threshold.size() != k || left.size() != k || right.size() != k || value.size() != k) {
        throw DataError("gbt model: malformed tree arrays");
      }
      Tree tree;
      for (std::size_t i = 0; i < k; ++i) {
        if (feature[i] >= 0) {
          const auto in_range = [&](std::int32_t c) { return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(k); };
          if (!in_range(left[i]) || !in_range(right[i]) || static_cast<std::size_t>(feature[i]) >= m.n_features) {
            throw DataError("gbt model: node " + std::to_string(i) + " has invalid links");
          }
        }
        tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("gbt model: ") + e.what());
  }
}

void save_model(const GbtModel& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(model));
}

GbtModel load_model(const std::filesystem::path& path) { return model_from_json(read_text_file(path)); }

void SearchSpace::validate() const {
  for (const Range* r : {&learning_rate, &n_estimators, &max_depth, &min_child_weight, &subsample,
                         &colsample_bytree, &lambda}) {
    if (!(r->lo <= r->hi) || !std::isfinite(r->lo) || !std::isfinite(r->hi)) {
      throw UsageError("search space: empty or inverted range");
    }
  }
}

GbtConfig sample_config(const SearchSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  auto real = [&](const Range& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  auto integer = [&](const Range& r) {
    return static_cast<int>(std::uniform_int_distribution<long long>(std::llround(r.lo), std::llround(r.hi))(rng));
  };
  GbtConfig c;
  c.learning_rate = real(space.learning_rate);
  c.n_estimators = integer(space.n_estimators);
  c.max_depth = integer(space.max_depth);
  c.min_child_weight = real(space.min_child_weight);
  c.subsample = real(space.subsample);
  c.colsample_bytree = real(space.colsample_bytree);
  c.lambda = real(space.lambda);
  c.gamma = space.gamma;
  c.seed = derive_seed(seed, "model");
  return c;
}

SearchResult hyper_search(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                          const SearchSpace& space, std::size_t budget, std::uint64_t seed, std::size_t inner_k) {
  if (budget < 1) throw UsageError("hyper_search: budget must be >= 1");
  space.validate();
  SearchResult result;
  result.touched_rows.assign(rows.begin(), rows.end());
  std::sort(result.touched_rows.begin(), result.touched_rows.end());
  const auto& pool = result.touched_rows;
  if (pool.size() < 4) throw DataError("hyper_search: need at least 4 training rows");
  inner_k = std::min(inner_k, pool.size() / 2);
  const auto assign = validate::fold_assignment(pool.size(), inner_k, derive_seed(seed, "inner-folds"));

  std::vector<double> obs(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) obs[i] = y[pool[i]];

  for (std::size_t b = 0; b < budget; ++b) {
    const GbtConfig cfg = sample_config(space, derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<double> oof(pool.size(), 0.0);
    for (std::size_t f = 0; f < inner_k; ++f) {
      std::vector<std::size_t> train_rows;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (assign[i] != f) train_rows.push_back(pool[i]);
      }
      const GbtModel m = train(x, y, cfg, train_rows);
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (assign[i] == f) oof[i] = m.predict(x.row(pool[i]));
      }
    }
    const validate::RSquared r2 = validate::r_squared_both(obs, oof);
    const double score = r2.pearson_defined ? r2.pearson2 : 0.0;
    result.log.push_back({cfg, score});
    if (b == 0 || score > result.best_score) {
      result.best = cfg;
      result.best_score = score;
    }
  }
  return result;
}

}  // namespace povmap::gbt
