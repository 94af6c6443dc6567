#include <json.hpp>

#include "povmap/base64.hpp"
#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/imgcls.hpp"

namespace povmap::imgcls {

using nlohmann::json;

namespace {

std::string blob(const std::vector<double>& v) {
  std::vector<float> f(v.begin(), v.end());
  return encode_floats(f);
}

std::vector<double> unblob(const json& j, std::size_t expected, const std::string& name) {
  const auto f = decode_floats(j.get<std::string>());
  if (f.size() != expected) throw DataError("cnn model: parameter " + name + " has the wrong length");
  return {f.begin(), f.end()};
}

}  // namespace

std::string model_to_text(const CnnModel& m) {
  json convs = json::array();
  for (const auto& c : m.arch.convs) convs.push_back({{"channels", c.channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  json params = json::object();
  for (const auto& p : m.parameters()) params[p.name] = blob(*p.values);
  for (std::size_t l = 0; l < m.conv.size(); ++l) {
    params["conv" + std::to_string(l) + ".running_mean"] = blob(m.conv[l].running_mean);
    params["conv" + std::to_string(l) + ".running_var"] = blob(m.conv[l].running_var);
  }
  const TrainConfig& t = m.train_config;
  json doc = {
      {"format", "povmap-cnn-1"},
      {"arch",
       {{"input_size", m.arch.input_size},
        {"in_channels", m.arch.in_channels},
        {"convs", convs},
        {"fc_hidden", m.arch.fc_hidden},
        {"dropout", m.arch.dropout}}},
      {"train",
       {{"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"max_steps", t.max_steps},
        {"learning_rate", t.learning_rate},
        {"learning_rate_low", t.learning_rate_low},
        {"plateau_factor", t.plateau_factor},
        {"plateau_patience", t.plateau_patience},
        {"validation_fraction", t.validation_fraction},
        {"augment", t.augment},
        {"seed", t.seed}}},
      {"warm_started", m.warm_started},
      {"thresholds", m.thresholds ? json::array({m.thresholds->t1, m.thresholds->t2, m.thresholds->t3}) : json()},
      {"params", params},
  };
  return doc.dump(1) + "\n";
}

CnnModel model_from_text(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "povmap-cnn-1") throw DataError("cnn model: unsupported format");
    const json& a = doc.at("arch");
    ArchSpec arch;
    arch.input_size = a.at("input_size").get<std::size_t>();
    arch.in_channels = a.at("in_channels").get<std::size_t>();
    arch.convs.clear();
    for (const json& c : a.at("convs")) {
      arch.convs.push_back({c.at("channels").get<std::size_t>(), c.at("kernel").get<std::size_t>(),
                            c.at("stride").get<std::size_t>()});
    }
    arch.fc_hidden = a.at("fc_hidden").get<std::vector<std::size_t>>();
    arch.dropout = a.at("dropout").get<double>();
    try {
      arch.validate();
    } catch (const UsageError& e) {
      throw DataError(std::string("cnn model: ") + e.what());
    }
    CnnModel m = make_model(arch, 0);
    const json& params = doc.at("params");
    for (auto& p : m.parameters()) *p.values = unblob(params.at(p.name), p.values->size(), p.name);
    for (std::size_t l = 0; l < m.conv.size(); ++l) {
      const std::string pre = "conv" + std::to_string(l);
      m.conv[l].running_mean = unblob(params.at(pre + ".running_mean"), m.conv[l].running_mean.size(), pre);
      m.conv[l].running_var = unblob(params.at(pre + ".running_var"), m.conv[l].running_var.size(), pre);
    }
    const json& t = doc.at("train");
    m.train_config.batch_size = t.at("batch_size").get<std::size_t>();
    m.train_config.epochs = t.at("epochs").get<std::size_t>();
    m.train_config.max_steps = t.at("max_steps").get<std::size_t>();
    m.train_config.learning_rate = t.at("learning_rate").get<double>();
    m.train_config.learning_rate_low = t.at("learning_rate_low").get<double>();
    m.train_config.plateau_factor = t.at("plateau_factor").get<double>();
    m.train_config.plateau_patience = t.at("plateau_patience").get<std::size_t>();
    m.train_config.validation_fraction = t.at("validation_fraction").get<double>();
    m.train_config.augment = t.at("augment").get<bool>();
    m.train_config.seed = t.at("seed").get<std::uint64_t>();
    m.warm_started = doc.at("warm_started").get<bool>();
    const json& th = doc.at("thresholds");
    if (!th.is_null()) {
      ClassThresholds c{th.at(0).get<double>(), th.at(1).get<double>(), th.at(2).get<double>()};
      c.validate();
      m.thresholds = c;
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("cnn model: ") + e.what());
  }
}

void save_model(const CnnModel& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_text(model));
}

CnnModel load_model(const std::filesystem::path& path) { return model_from_text(read_text_file(path)); }

}  // namespace povmap::imgcls
