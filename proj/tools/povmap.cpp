#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "povmap/clusters.hpp"
#include "povmap/csv.hpp"
#include "povmap/digest.hpp"
#include "povmap/error.hpp"
#include "povmap/export.hpp"
#include "povmap/format.hpp"
#include "povmap/gbt.hpp"
#include "povmap/iwi.hpp"
#include "povmap/manifest.hpp"
#include "povmap/pipeline.hpp"
#include "povmap/random.hpp"
#include "povmap/refine.hpp"
#include "povmap/synth.hpp"
#include "povmap/validate.hpp"
#include "povmap/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace povmap;

namespace {

struct Options {
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<std::string> metric;
  std::optional<std::size_t> iterations;
  bool allow_partial = false;
  std::vector<std::string> formats{"csv", "geojson", "svg"};
  std::string spec;
};

void note(const std::string& line) { std::cerr << line << '\n'; }

/// Loads the manifest and applies command-line overrides.
Manifest open_manifest(const Options& o) {
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  Manifest m = load_manifest(o.manifest);
  if (!o.out.empty()) m.output_dir = o.out;
  if (o.seed) {
    m.seed = *o.seed;
    m.refine.seed = *o.seed;
  }
  if (o.k) m.refine.k = *o.k;
  if (o.metric) m.refine.metric = validate::parse_metric(*o.metric);
  if (o.iterations) m.refine.iterations = *o.iterations;
  m.refine.validate();
  return m;
}

/// Records version, seeds, options and input digests. No timestamps, so
/// reruns produce the same log.
void write_run_log(const fs::path& out_dir, const std::string& command, const Options& o,
                   const std::vector<std::pair<std::string, fs::path>>& inputs, std::uint64_t seed,
                   const std::vector<fs::path>& outputs) {
  json in = json::array();
  for (const auto& [key, path] : inputs) {
    in.push_back({{"key", key}, {"path", path.string()}, {"sha256", sha256_file(path)}});
  }
  json opts = {{"manifest", o.manifest}, {"allow_partial", o.allow_partial}};
  if (o.k) opts["k"] = *o.k;
  if (o.metric) opts["metric"] = *o.metric;
  if (o.iterations) opts["iterations"] = *o.iterations;
  if (o.seed) opts["seed"] = *o.seed;
  json outs = json::array();
  for (const auto& p : outputs) outs.push_back(fs::relative(p, out_dir).generic_string());
  const json log = {{"tool", "povmap"}, {"version", std::string(version())}, {"command", command},
                    {"seed", seed},     {"options", opts},                    {"inputs", in},
                    {"outputs", outs}};
  write_text_file(out_dir / "logs" / (command + ".json"), log.dump(2) + "\n");
}

std::string pad2(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

// --- iwi -------------------------------------------------------------------

int run_iwi(const Options& o) {
  const Manifest m = open_manifest(o);
  if (m.households.empty()) throw UsageError("manifest: missing key 'households' (required by iwi)");
  const auto weights = m.iwi_weights.empty() ? iwi::IwiWeights::reference() : iwi::IwiWeights::load(m.iwi_weights);
  const auto records = iwi::read_households(m.households);
  const auto result = iwi::cluster_iwi(records, weights);

  std::ostringstream out, rejected;
  write_csv_row(out, {"cluster_id", "iwi", "households", "imputed_households", "rejected_households"});
  for (const auto& c : result.clusters) {
    write_csv_row(out, {c.cluster_id, format_double(c.mean), std::to_string(c.households),
                        std::to_string(c.imputed_households), std::to_string(c.rejected)});
  }
  write_csv_row(rejected, {"household_id"});
  for (const auto& h : result.rejected_households) write_csv_row(rejected, {h});
  const fs::path dir = m.output_dir / "iwi";
  write_text_file(dir / "cluster_iwi.csv", out.str());
  write_text_file(dir / "rejected_households.csv", rejected.str());
  for (const auto& c : result.unscoreable_clusters) note("warning: cluster " + c + " has no scoreable household");
  note("iwi: " + std::to_string(result.clusters.size()) + " clusters, " +
       std::to_string(result.rejected_households.size()) + " households rejected (weights " + weights.version() + ")");
  write_run_log(m.output_dir, "iwi", o, m.inputs(), m.seed,
                {dir / "cluster_iwi.csv", dir / "rejected_households.csv"});
  return 0;
}

// --- places / features ---------------------------------------------------------

int run_places(const Options& o) {
  const Manifest m = open_manifest(o);
  std::vector<fs::path> outputs;
  for (const auto& in : m.countries) {
    const auto cd = pipeline::load_country(in);
    outputs.push_back(m.output_dir / "places" / (in.name + ".csv"));
    places::write_registry(cd.registry, outputs.back());
    note("places: " + in.name + ": " + std::to_string(cd.registry.size()) + " places (" +
         std::to_string(cd.merge.merged) + " list records merged)");
  }
  write_run_log(m.output_dir, "places", o, m.inputs(), m.seed, outputs);
  return 0;
}

int run_features(const Options& o) {
  const Manifest m = open_manifest(o);
  std::vector<fs::path> outputs;
  for (const auto& in : m.countries) {
    const auto cd = pipeline::load_country(in);
    const auto fvs = pipeline::registry_features(cd);
    std::vector<osm::FeatureRow> rows;
    for (std::size_t i = 0; i < fvs.size(); ++i) rows.push_back({cd.registry[i].place_id, cd.registry[i].location, fvs[i]});
    outputs.push_back(m.output_dir / "features" / (in.name + ".csv"));
    write_text_file(outputs.back(), osm::format_feature_table(rows));
    note("features: " + in.name + ": " + std::to_string(rows.size()) + " rows");
  }
  write_run_log(m.output_dir, "features", o, m.inputs(), m.seed, outputs);
  return 0;
}

// --- train ------------------------------------------------------------------

int run_train(const Options& o) {
  const Manifest m = open_manifest(o);
  auto loaded = pipeline::load(m);
  for (const auto& w : loaded.warnings) note("warning: " + w);
  const auto& data = loaded.data;
  std::unordered_map<std::string, osm::FeatureVector> features;
  for (const auto& p : data.places) features.emplace(p.place_id, p.features);
  const auto rows = clusters::training_rows(data.clusters, data.candidates, features, osm::kBaseFeatureCount);
  for (const auto& a : rows.audit) note("train: " + a);
  std::vector<std::vector<double>> xs;
  std::vector<double> y;
  for (const auto& r : rows.rows) {
    xs.push_back(r.x);
    y.push_back(r.y);
  }
  const gbt::Matrix x = gbt::Matrix::from_rows(xs);
  gbt::GbtConfig config = m.refine.gbt;
  const fs::path dir = m.output_dir / "train";
  std::vector<fs::path> outputs;
  if (m.refine.search_budget > 0) {
    std::vector<std::size_t> all(rows.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto res = gbt::hyper_search(x, y, all, m.refine.search_space, m.refine.search_budget,
                                       derive_seed(m.seed, "train-search"), m.refine.search_inner_k);
    config = res.best;
    std::ostringstream log;
    write_csv_row(log, {"learning_rate", "n_estimators", "max_depth", "min_child_weight", "subsample",
                        "colsample_bytree", "lambda", "score"});
    for (const auto& e : res.log) {
      const auto& c = e.config;
      write_csv_row(log, {format_double(c.learning_rate), std::to_string(c.n_estimators), std::to_string(c.max_depth),
                          format_double(c.min_child_weight), format_double(c.subsample),
                          format_double(c.colsample_bytree), format_double(c.lambda), format_double(e.score)});
    }
    outputs.push_back(dir / "search.csv");
    write_text_file(outputs.back(), log.str());
  }
  config.seed = derive_seed(m.seed, "train");
  const auto model = gbt::train(x, y, config);
  outputs.push_back(dir / "gbt.json");
  gbt::save_model(model, outputs.back());
  note("train: " + std::to_string(rows.rows.size()) + " clusters, final training RMSE " +
       format_double(model.train_rmse.empty() ? 0.0 : model.train_rmse.back()));
  write_run_log(m.output_dir, "train", o, m.inputs(), m.seed, outputs);
  return 0;
}

// --- refine -----------------------------------------------------------------

int run_refine_cmd(const Options& o) {
  const Manifest m = open_manifest(o);
  auto loaded = pipeline::load(m);
  for (const auto& w : loaded.warnings) note("warning: " + w);
  refine::RefineData& data = loaded.data;
  const fs::path dir = m.output_dir / "refine";
  fs::remove_all(dir);
  std::vector<fs::path> outputs;

  auto write_log = [&](const refine::RefineState& s) {
    std::string text;
    for (const auto& line : s.audit_log) text += line + '\n';
    write_text_file(dir / "audit.log", text);
  };
  refine::RefineState state;
  try {
    refine::run_refine(state, data, m.refine, [&](const refine::RefineState& s, const refine::RefineData& d) {
      const auto& h = s.history.back();
      std::string line = "refine: iteration " + std::to_string(h.iteration) + ":";
      for (const auto& [p, r2] : h.scores) line += " " + p + " " + format_double(std::round(r2 * 10000) / 10000);
      note(line);
      const fs::path it = dir / ("iter_" + pad2(h.iteration));
      refine::write_checkpoint(s, d, it);
      outputs.push_back(it);
      write_log(s);
    });
  } catch (const LeakageError&) {
    write_log(state);
    throw;
  }
  write_log(state);
  const auto preds = refine::place_predictions(state, data);
  write_text_file(dir / "place_predictions.csv", refine::format_place_predictions(data, preds));
  write_text_file(dir / "history.csv", refine::format_history(state));
  write_text_file(dir / "state_digest.txt", refine::state_digest(state) + "\n");
  outputs.insert(outputs.end(), {dir / "place_predictions.csv", dir / "history.csv", dir / "audit.log"});
  if (state.stopped) note("refine: stopped early: " + state.stop_reason);
  write_run_log(m.output_dir, "refine", o, m.inputs(), m.seed, outputs);
  return 0;
}

// --- validate ---------------------------------------------------------------

std::optional<fs::path> latest_checkpoint(const fs::path& refine_dir) {
  if (!fs::is_directory(refine_dir)) return std::nullopt;
  std::vector<fs::path> iters;
  for (const auto& e : fs::directory_iterator(refine_dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("iter_", 0) == 0) iters.push_back(e.path());
  }
  if (iters.empty()) return std::nullopt;
  std::sort(iters.begin(), iters.end());
  return iters.back();
}

int run_validate(const Options& o) {
  const Manifest m = open_manifest(o);
  const fs::path dir = m.output_dir / "validate";
  std::vector<validate::ValidationReport> reports;
  const auto checkpoint = latest_checkpoint(m.output_dir / "refine");
  bool fresh = !checkpoint;
  if (checkpoint) {
    for (auto p : m.refine.protocols) {
      const fs::path f = *checkpoint / ("report_" + std::string(validate::protocol_name(p)) + ".json");
      if (!fs::is_regular_file(f)) {
        fresh = true;
        break;
      }
      auto rep = validate::parse_report_json(read_text_file(f));
      if (p == validate::Protocol::kKFold && rep.protocol != "kfold-" + std::to_string(m.refine.k)) {
        fresh = true;
        break;
      }
      reports.push_back(validate::with_metric(std::move(rep), m.refine.metric));
    }
    if (!fresh) note("validate: scoring out-of-fold predictions from " + checkpoint->string());
  }
  if (fresh) {
    note("validate: no matching refinement checkpoint; running an iteration-0 evaluation");
    reports.clear();
    auto loaded = pipeline::load(m);
    for (const auto& w : loaded.warnings) note("warning: " + w);
    refine::RefineState state;
    refine::RefineConfig config = m.refine;
    config.iterations = 1;
    refine::run_iteration(state, loaded.data, config);
    for (const auto& ps : state.protocols) reports.push_back(ps.report);
  }
  std::vector<fs::path> outputs;
  std::ostringstream summary;
  write_csv_row(summary, {"protocol", "metric", "units", "mean"});
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const std::string name(validate::protocol_name(m.refine.protocols[i]));
    outputs.push_back(dir / ("report_" + name + ".json"));
    write_text_file(outputs.back(), validate::format_report_json(r));
    outputs.push_back(dir / ("report_" + name + ".csv"));
    write_text_file(outputs.back(), validate::format_report_csv(r));
    write_csv_row(summary, {r.protocol, std::string(validate::metric_name(r.metric)), std::to_string(r.units.size()),
                            format_double(r.mean)});
    note("validate: " + r.protocol + " mean " + std::string(validate::metric_name(r.metric)) + " " +
         format_double(std::round(r.mean * 10000) / 10000));
    for (const auto& f : r.flags) note("validate: " + r.protocol + ": " + f);
  }
  outputs.push_back(dir / "summary.csv");
  write_text_file(outputs.back(), summary.str());
  write_run_log(m.output_dir, "validate", o, m.inputs(), m.seed, outputs);
  return 0;
}

// --- export -----------------------------------------------------------------

int run_export(const Options& o) {
  const Manifest m = open_manifest(o);
  const fs::path preds_path = m.output_dir / "refine" / "place_predictions.csv";
  if (!fs::is_regular_file(preds_path)) throw UsageError("export: no predictions at " + preds_path.string() + "; run refine first");
  const CsvTable t = read_csv(preds_path);
  const std::size_t id = t.column("place_id"), iwi = t.column("iwi_pred");
  std::map<std::string, double> preds;
  for (const auto& row : t.rows) preds[row[id]] = parse_double(row[iwi], "iwi_pred");

  std::vector<exports::Format> formats;
  for (const auto& f : o.formats) formats.push_back(exports::parse_format(f));
  std::vector<places::PopulatedPlace> registry;
  for (const auto& in : m.countries) {
    auto cd = pipeline::load_country(in);
    registry.insert(registry.end(), cd.registry.begin(), cd.registry.end());
  }
  std::vector<std::string> missing;
  const auto rows = exports::join(registry, preds, o.allow_partial, &missing);
  if (!missing.empty()) note("export: " + std::to_string(missing.size()) + " places without prediction skipped");
  auto outputs = exports::export_maps(rows, formats, m.output_dir / "export");
  note("export: " + std::to_string(rows.size()) + " places written");
  auto inputs = m.inputs();
  inputs.emplace_back("predictions", preds_path);
  write_run_log(m.output_dir, "export", o, inputs, m.seed, outputs);
  return 0;
}

// --- synth ------------------------------------------------------------------

int run_synth(const Options& o) {
  if (o.spec.empty()) throw UsageError("synth: --spec is required");
  if (o.out.empty()) throw UsageError("synth: --out is required");
  if (!fs::is_regular_file(o.spec)) throw UsageError("synth: spec not found: " + o.spec);
  const std::string text = read_text_file(o.spec);
  auto spec = synth::parse_synth_spec(text);
  if (o.seed) spec.seed = *o.seed;
  json doc = json::parse(text);
  const std::string pipeline = doc.contains("pipeline") ? doc["pipeline"].dump() : "{}";
  const auto world = synth::generate(spec);
  const auto manifest = synth::write_world(world, o.out, pipeline);
  std::size_t places = 0, clusters = 0;
  for (const auto& c : world.countries) {
    places += c.truth.size();
    clusters += c.clusters.size();
  }
  note("synth: " + std::to_string(world.countries.size()) + " countries, " + std::to_string(places) +
       " listed places, " + std::to_string(clusters) + " clusters; manifest " + manifest.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"povmap: poverty mapping from geospatial features and imagery"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Pipeline manifest (JSON)");
    sub->add_option("--out", o.out, "Override the manifest's output directory");
    sub->add_option("--seed", o.seed, "Override the manifest seed");
  };
  auto protocol_flags = [&](CLI::App* sub) {
    sub->add_option("--k", o.k, "Folds for k-fold protocols")->check(CLI::Range(2, 1000));
    sub->add_option("--metric", o.metric, "R2 variant")->check(CLI::IsMember({"pearson2", "ssres"}));
  };

  auto* iwi_cmd = app.add_subcommand("iwi", "Household IWI scores aggregated per cluster");
  common(iwi_cmd);
  auto* places_cmd = app.add_subcommand("places", "Build the populated-place registry");
  common(places_cmd);
  auto* features_cmd = app.add_subcommand("features", "Extract feature vectors for registry places");
  common(features_cmd);
  auto* train_cmd = app.add_subcommand("train", "Fit one feature model on all clusters");
  common(train_cmd);
  auto* refine_cmd = app.add_subcommand("refine", "Run the co-training refinement loop");
  common(refine_cmd);
  protocol_flags(refine_cmd);
  refine_cmd->add_option("--iterations", o.iterations, "Number of iterations")->check(CLI::Range(1, 100));
  auto* validate_cmd = app.add_subcommand("validate", "Write validation reports");
  common(validate_cmd);
  protocol_flags(validate_cmd);
  auto* export_cmd = app.add_subcommand("export", "Export place predictions as CSV, GeoJSON and SVG");
  common(export_cmd);
  export_cmd->add_flag("--allow-partial", o.allow_partial, "Export even if some places lack a prediction");
  export_cmd->add_option("--format", o.formats, "Formats to write (csv, geojson, svg)")->delimiter(',');
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multi-country world");
  synth_cmd->add_option("--spec", o.spec, "Synthetic world spec (JSON)");
  synth_cmd->add_option("--out", o.out, "Directory for the generated world");
  synth_cmd->add_option("--seed", o.seed, "Override the spec seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*iwi_cmd) return run_iwi(o);
    if (*places_cmd) return run_places(o);
    if (*features_cmd) return run_features(o);
    if (*train_cmd) return run_train(o);
    if (*refine_cmd) return run_refine_cmd(o);
    if (*validate_cmd) return run_validate(o);
    if (*export_cmd) return run_export(o);
    if (*synth_cmd) return run_synth(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const LeakageError& e) {
    std::cerr << "leakage: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
