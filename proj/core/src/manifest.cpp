#include "povmap/manifest.hpp"

#include <json.hpp>

#include <set>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"

namespace povmap {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& node, std::string key) : node_(node), key_(std::move(key)) {
    if (!node_.is_object()) throw UsageError("manifest: " + where() + " must be an object");
  }

  std::string child(std::string_view name) const { return key_.empty() ? std::string(name) : key_ + "." + std::string(name); }
  std::string where() const { return key_.empty() ? "top level" : "'" + key_ + "'"; }

  bool has(const char* name) {
    seen_.insert(name);
    return node_.contains(name) && !node_[name].is_null();
  }
  const json& at(const char* name) {
    if (!has(name)) throw UsageError("manifest: missing key '" + child(name) + "'");
    return node_[name];
  }

  template <typename T>
  void get(const char* name, T& out) {
    if (!has(name)) return;
    try {
      out = node_[name].get<T>();
    } catch (const json::exception&) {
      throw UsageError("manifest: key '" + child(name) + "' has the wrong type");
    }
  }

  std::string string(const char* name, bool required) {
    if (!required && !has(name)) return {};
    const json& v = at(name);
    if (!v.is_string()) throw UsageError("manifest: key '" + child(name) + "' must be a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) throw UsageError("manifest: unknown key '" + child(it.key()) + "'");
    }
  }

 private:
  const json& node_;
  std::string key_;
  std::set<std::string> seen_;
};

void read_gbt(const json& node, const std::string& key, gbt::GbtConfig& c) {
  Reader r(node, key);
  r.get("learning_rate", c.learning_rate);
  r.get("n_estimators", c.n_estimators);
  r.get("max_depth", c.max_depth);
  r.get("min_child_weight", c.min_child_weight);
  r.get("subsample", c.subsample);
  r.get("colsample_bytree", c.colsample_bytree);
  r.get("lambda", c.lambda);
  r.get("gamma", c.gamma);
  r.finish();
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw UsageError("manifest: '" + key + "': " + e.what());
  }
}

void read_range(Reader& r, const char* name, gbt::Range& range) {
  if (!r.has(name)) return;
  std::vector<double> v;
  r.get(name, v);
  if (v.size() != 2) throw UsageError("manifest: key '" + r.child(name) + "' must be [lo, hi]");
  range = {v[0], v[1]};
}

void read_space(const json& node, const std::string& key, gbt::SearchSpace& s) {
  Reader r(node, key);
  read_range(r, "learning_rate", s.learning_rate);
  read_range(r, "n_estimators", s.n_estimators);
  read_range(r, "max_depth", s.max_depth);
  read_range(r, "min_child_weight", s.min_child_weight);
  read_range(r, "subsample", s.subsample);
  read_range(r, "colsample_bytree", s.colsample_bytree);
  read_range(r, "lambda", s.lambda);
  r.get("gamma", s.gamma);
  r.finish();
}

void read_train(const json& node, const std::string& key, imgcls::TrainConfig& t) {
  Reader r(node, key);
  r.get("batch_size", t.batch_size);
  r.get("epochs", t.epochs);
  r.get("max_steps", t.max_steps);
  r.get("learning_rate", t.learning_rate);
  r.get("learning_rate_low", t.learning_rate_low);
  r.get("plateau_factor", t.plateau_factor);
  r.get("plateau_patience", t.plateau_patience);
  r.get("validation_fraction", t.validation_fraction);
  r.get("augment", t.augment);
  r.finish();
}

void read_arch(const json& node, const std::string& key, imgcls::ArchSpec& a) {
  Reader r(node, key);
  r.get("input_size", a.input_size);
  r.get("in_channels", a.in_channels);
  if (r.has("convs")) {
    const json& convs = r.at("convs");
    if (!convs.is_array()) throw UsageError("manifest: key '" + r.child("convs") + "' must be an array");
    a.convs.clear();
    for (std::size_t i = 0; i < convs.size(); ++i) {
      Reader c(convs[i], r.child("convs") + "[" + std::to_string(i) + "]");
      imgcls::ConvSpec spec;
      c.get("channels", spec.channels);
      c.get("kernel", spec.kernel);
      c.get("stride", spec.stride);
      c.finish();
      a.convs.push_back(spec);
    }
  }
  r.get("fc_hidden", a.fc_hidden);
  r.get("dropout", a.dropout);
  r.finish();
  try {
    a.validate();
  } catch (const UsageError& e) {
    throw UsageError("manifest: '" + key + "': " + e.what());
  }
}

void read_refine(const json& node, refine::RefineConfig& c) {
  Reader r(node, "refine");
  r.get("iterations", c.iterations);
  if (r.has("protocols")) {
    std::vector<std::string> names;
    r.get("protocols", names);
    c.protocols.clear();
    for (const auto& n : names) {
      try {
        c.protocols.push_back(validate::parse_protocol(n));
      } catch (const UsageError& e) {
        throw UsageError("manifest: 'refine.protocols': " + std::string(e.what()));
      }
    }
  }
  r.get("k", c.k);
  if (r.has("metric")) c.metric = validate::parse_metric(r.string("metric", true));
  r.get("bootstrap", c.bootstrap);
  r.get("stop_tolerance", c.stop_tolerance);
  r.get("stop_patience", c.stop_patience);
  r.get("cnn_max_places", c.cnn_max_places);
  r.get("search_budget", c.search_budget);
  r.get("search_iterations", c.search_iterations);
  r.get("search_inner_k", c.search_inner_k);
  if (r.has("inject_leak")) {
    Reader l(r.at("inject_leak"), "refine.inject_leak");
    refine::LeakInjection leak;
    leak.protocol = validate::parse_protocol(l.string("protocol", true));
    l.get("fold", leak.fold);
    l.get("iteration", leak.iteration);
    l.finish();
    c.inject_leak = leak;
  }
  r.finish();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  const std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

std::vector<std::pair<std::string, std::filesystem::path>> Manifest::inputs() const {
  std::vector<std::pair<std::string, std::filesystem::path>> out;
  out.emplace_back("clusters", clusters);
  if (!households.empty()) out.emplace_back("households", households);
  if (!iwi_weights.empty()) out.emplace_back("iwi_weights", iwi_weights);
  for (std::size_t i = 0; i < countries.size(); ++i) {
    const auto& c = countries[i];
    const std::string k = "countries[" + std::to_string(i) + "].";
    out.emplace_back(k + "list_a", c.list_a);
    if (!c.list_b.empty()) out.emplace_back(k + "list_b", c.list_b);
    out.emplace_back(k + "population", c.population);
    if (!c.luminosity.empty()) out.emplace_back(k + "luminosity", c.luminosity);
    out.emplace_back(k + "ways", c.ways);
    out.emplace_back(k + "pois", c.pois);
    out.emplace_back(k + "buildings", c.buildings);
    if (!c.tiles.empty()) out.emplace_back(k + "tiles", c.tiles);
  }
  return out;
}

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir, bool check_paths) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("manifest: invalid JSON: ") + e.what());
  }
  Manifest m;
  Reader top(doc, "");
  if (!top.has("seed")) throw UsageError("manifest: missing key 'seed' (seeds must be explicit)");
  top.get("seed", m.seed);
  m.output_dir = resolve(base_dir, top.string("output_dir", true));
  m.clusters = resolve(base_dir, top.string("clusters", true));
  if (top.has("households")) m.households = resolve(base_dir, top.string("households", true));
  if (top.has("iwi_weights")) m.iwi_weights = resolve(base_dir, top.string("iwi_weights", true));

  const json& countries = top.at("countries");
  if (!countries.is_array() || countries.empty()) throw UsageError("manifest: 'countries' must be a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < countries.size(); ++i) {
    Reader c(countries[i], "countries[" + std::to_string(i) + "]");
    CountryInputs in;
    in.name = c.string("name", true);
    if (in.name.empty() || !names.insert(in.name).second) {
      throw UsageError("manifest: 'countries[" + std::to_string(i) + "].name' is empty or repeated");
    }
    auto path = [&](const char* key, bool required) {
      const std::string v = c.string(key, required);
      return v.empty() ? std::filesystem::path() : resolve(base_dir, v);
    };
    in.list_a = path("list_a", true);
    in.list_b = path("list_b", false);
    in.population = path("population", true);
    in.luminosity = path("luminosity", false);
    in.ways = path("ways", true);
    in.pois = path("pois", true);
    in.buildings = path("buildings", true);
    in.tiles = path("tiles", false);
    c.finish();
    m.countries.push_back(std::move(in));
  }

  refine::RefineConfig& rc = m.refine;
  rc.seed = m.seed;
  if (top.has("refine")) read_refine(doc["refine"], rc);
  if (top.has("gbt")) read_gbt(doc["gbt"], "gbt", rc.gbt);
  if (top.has("search_space")) read_space(doc["search_space"], "search_space", rc.search_space);
  if (top.has("cnn")) {
    Reader c(doc["cnn"], "cnn");
    if (c.has("arch")) read_arch(doc["cnn"]["arch"], "cnn.arch", rc.arch);
    if (c.has("train")) read_train(doc["cnn"]["train"], "cnn.train", rc.cnn);
    c.finish();
  }
  if (top.has("overrides")) {
    const json& ov = doc["overrides"];
    if (!ov.is_array()) throw UsageError("manifest: 'overrides' must be an array indexed by iteration");
    for (std::size_t i = 0; i < ov.size(); ++i) {
      refine::IterationOverride o;
      const std::string key = "overrides[" + std::to_string(i) + "]";
      if (!ov[i].is_null()) {
        Reader r(ov[i], key);
        if (r.has("gbt")) {
          o.gbt = rc.gbt;
          read_gbt(ov[i]["gbt"], key + ".gbt", *o.gbt);
        }
        if (r.has("cnn")) {
          o.cnn = rc.cnn;
          read_train(ov[i]["cnn"], key + ".cnn", *o.cnn);
        }
        if (r.has("fc_hidden")) {
          std::vector<std::size_t> h;
          r.get("fc_hidden", h);
          o.fc_hidden = h;
        }
        r.finish();
      }
      rc.overrides.push_back(std::move(o));
    }
  }
  top.finish();
  try {
    rc.validate();
  } catch (const UsageError& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }

  if (check_paths) {
    for (const auto& [key, p] : m.inputs()) {
      if (!std::filesystem::is_regular_file(p)) throw UsageError("manifest: " + key + ": file not found: " + p.string());
    }
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError("manifest not found: " + path.string());
  Manifest m = parse_manifest(read_text_file(path), path.parent_path(), true);
  m.path = path;
  return m;
}

}  // namespace povmap
