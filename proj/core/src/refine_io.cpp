#include <sstream>

#include "povmap/csv.hpp"
#include "povmap/format.hpp"
#include "povmap/refine.hpp"

namespace povmap::refine {

namespace {

std::string oof_csv(const ProtocolState& ps, const RefineData& data) {
  std::ostringstream out;
  write_csv_row(out, {"cluster_id", "country", "iwi_obs", "iwi_pred", "fold", "candidates", "narrowed"});
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    const std::int64_t fold = i < ps.report.row_fold.size() ? ps.report.row_fold[i] : -1;
    if (fold < 0) continue;
    const auto& c = data.clusters[i];
    write_csv_row(out, {c.cluster_id, c.country, format_double(c.iwi), format_double(ps.cluster_pred[i]),
                        std::to_string(fold), std::to_string(data.candidates[i].candidates.size()),
                        ps.narrowed[i] ? std::to_string(ps.narrowed[i]->size()) : ""});
  }
  return out.str();
}

std::string labels_csv(const RefineState& state, const RefineData& data) {
  std::ostringstream out;
  write_csv_row(out, {"place_id", "country", "iwi_pred", "label", "producer", "producer_fold"});
  for (const auto& r : state.cnn_labels) {
    const auto& p = data.places[r.place];
    write_csv_row(out, {p.place_id, p.country, format_double(r.prediction), std::to_string(r.label),
                        std::string(validate::protocol_name(r.producer)), std::to_string(r.producer_fold)});
  }
  return out.str();
}

std::string choices_csv(const RefineState& state) {
  std::ostringstream out;
  write_csv_row(out, {"country", "estimator", "single_score", "cross_score"});
  for (const auto& c : state.choices) {
    write_csv_row(out, {c.country, std::string(estimator_name(c.estimator)),
                        c.single_score ? format_double(*c.single_score) : "",
                        c.cross_score ? format_double(*c.cross_score) : ""});
  }
  return out.str();
}

}  // namespace

std::string format_place_predictions(const RefineData& data, const std::vector<double>& preds) {
  std::ostringstream out;
  write_csv_row(out, {"place_id", "country", "iwi_pred"});
  for (std::size_t i = 0; i < data.places.size(); ++i) {
    write_csv_row(out, {data.places[i].place_id, data.places[i].country, format_double(preds[i])});
  }
  return out.str();
}

void write_checkpoint(const RefineState& state, const RefineData& data, const std::filesystem::path& dir) {
  for (const auto& ps : state.protocols) {
    const std::string name(validate::protocol_name(ps.protocol));
    write_text_file(dir / ("report_" + name + ".json"), validate::format_report_json(ps.report));
    write_text_file(dir / ("report_" + name + ".csv"), validate::format_report_csv(ps.report));
    write_text_file(dir / ("oof_" + name + ".csv"), oof_csv(ps, data));
    for (std::size_t f = 0; f < ps.folds.size(); ++f) {
      gbt::save_model(ps.folds[f].model, dir / "models" / (name + "_fold" + std::to_string(f) + ".json"));
    }
  }
  if (state.cnn) {
    imgcls::save_model(*state.cnn, dir / "models" / "cnn.json");
    write_text_file(dir / "cnn_labels.csv", labels_csv(state, data));
  }
  if (!state.choices.empty()) write_text_file(dir / "estimators.csv", choices_csv(state));
  write_text_file(dir / "place_predictions.csv", format_place_predictions(data, place_predictions(state, data)));
  write_text_file(dir / "history.csv", format_history(state));
  std::string log;
  for (const auto& line : state.audit_log) log += line + '\n';
  write_text_file(dir / "audit.log", log);
}

std::string format_history(const RefineState& state) {
  std::ostringstream out;
  write_csv_row(out, {"iteration", "protocol", "r2", "active_width", "narrowed_clusters", "cnn_labels",
                      "cnn_train_accuracy"});
  for (const auto& h : state.history) {
    for (const auto& [protocol, r2] : h.scores) {
      write_csv_row(out, {std::to_string(h.iteration), protocol, format_double(r2), std::to_string(h.active_width),
                          std::to_string(h.narrowed_clusters), std::to_string(h.cnn_labels),
                          h.cnn_labels ? format_double(h.cnn_train_accuracy) : ""});
    }
  }
  return out.str();
}

}  // namespace povmap::refine
