#include "run_config.hpp"

#include <fstream>
#include <stdexcept>

namespace dgvc::cli {

using nlohmann::json;

json default_config() {
  const model::ModelConfig m;
  const train::TrainHyper t;
  const data::DatasetSpec d;
  return json{
      {"model",
       {{"arch", std::string(model::arch_name(m.arch))},
        {"frame_h", m.frame_h},
        {"frame_w", m.frame_w},
        {"frame_c", m.frame_c},
        {"frames", m.frames},
        {"dim_z", m.dim_z},
        {"dim_f", m.dim_f},
        {"hidden", m.hidden},
        {"mlp_hidden", m.mlp_hidden},
        {"conv_channels", m.conv_channels},
        {"alphabet_bound", m.alphabet_bound},
        {"flow_layers", m.flow_layers}}},
      {"train",
       {{"beta", t.beta},
        {"lambda", t.lambda},
        {"lr", t.lr},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"eps", t.eps},
        {"batch", t.batch},
        {"steps", t.steps},
        {"seed", t.seed},
        {"clip_norm", t.clip_norm},
        {"log_every", t.log_every},
        {"checkpoint_every", t.checkpoint_every}}},
      {"data",
       {{"dir", "data"},
        {"manifest", "data/manifest.txt"},
        {"train", d.train},
        {"test", d.test},
        {"seed", d.seed},
        {"split", "test"},
        {"limit", 0}}},
      {"paths",
       {{"checkpoint", "model.ckpt"},
        {"input", ""},
        {"output", ""},
        {"log", ""},
        {"work_dir", "sweep"}}},
      {"sweep", {{"betas", {0.003, 0.01, 0.03, 0.1, 0.3, 1.0}}}},
  };
}

namespace {

void merge_checked(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw std::invalid_argument("config: unknown key '" + key + "'");
    if (base[it.key()].is_object()) {
      merge_checked(base[it.key()], it.value(), key);
    } else {
      base[it.key()] = it.value();
    }
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value for '") + section + "." + key + "': " + e.what());
  }
}

}  // namespace

json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  json file;
  try {
    file = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  json config = default_config();
  merge_checked(config, file, "");
  return config;
}

void set_value(json& config, const std::string& dotted, const json& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) throw std::invalid_argument("override '" + dotted + "' must be section.key");
  const std::string section = dotted.substr(0, dot), key = dotted.substr(dot + 1);
  if (!config.contains(section) || !config[section].contains(key)) {
    throw std::invalid_argument("config: unknown key '" + dotted + "'");
  }
  config[section][key] = value;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' must be key=value");
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  set_value(config, assignment.substr(0, eq), value);
}

model::ModelConfig model_config(const json& j) {
  model::ModelConfig m;
  m.arch = model::parse_arch(get<std::string>(j, "model", "arch"));
  m.frame_h = get<std::uint16_t>(j, "model", "frame_h");
  m.frame_w = get<std::uint16_t>(j, "model", "frame_w");
  m.frame_c = get<std::uint16_t>(j, "model", "frame_c");
  m.frames = get<std::uint16_t>(j, "model", "frames");
  m.dim_z = get<std::uint16_t>(j, "model", "dim_z");
  m.dim_f = get<std::uint16_t>(j, "model", "dim_f");
  // The local-only variant has no global latent regardless of dim_f.
  if (m.arch == model::ArchVariant::LstmpL) m.dim_f = 0;
  m.hidden = get<std::uint16_t>(j, "model", "hidden");
  m.mlp_hidden = get<std::uint16_t>(j, "model", "mlp_hidden");
  m.conv_channels = get<std::vector<std::uint16_t>>(j, "model", "conv_channels");
  m.alphabet_bound = get<std::uint16_t>(j, "model", "alphabet_bound");
  m.flow_layers = get<std::uint8_t>(j, "model", "flow_layers");
  m.validate();
  return m;
}

train::TrainHyper train_hyper(const json& j) {
  train::TrainHyper t;
  t.beta = get<double>(j, "train", "beta");
  t.lambda = get<double>(j, "train", "lambda");
  t.lr = get<double>(j, "train", "lr");
  t.beta1 = get<double>(j, "train", "beta1");
  t.beta2 = get<double>(j, "train", "beta2");
  t.eps = get<double>(j, "train", "eps");
  t.batch = get<std::size_t>(j, "train", "batch");
  t.steps = get<std::size_t>(j, "train", "steps");
  t.seed = get<std::uint64_t>(j, "train", "seed");
  t.clip_norm = get<double>(j, "train", "clip_norm");
  t.log_every = get<std::size_t>(j, "train", "log_every");
  t.checkpoint_every = get<std::size_t>(j, "train", "checkpoint_every");
  t.validate();
  return t;
}

data::DatasetSpec dataset_spec(const json& j) {
  data::DatasetSpec d;
  d.train = get<std::size_t>(j, "data", "train");
  d.test = get<std::size_t>(j, "data", "test");
  d.seed = get<std::uint64_t>(j, "data", "seed");
  d.frames = get<std::uint16_t>(j, "model", "frames");
  d.height = get<std::uint16_t>(j, "model", "frame_h");
  d.width = get<std::uint16_t>(j, "model", "frame_w");
  return d;
}

std::vector<double> sweep_betas(const json& j) { return get<std::vector<double>>(j, "sweep", "betas"); }

std::string path_value(const json& j, const std::string& key) {
  if (key == "manifest" || key == "dir" || key == "split") return get<std::string>(j, "data", key.c_str());
  return get<std::string>(j, "paths", key.c_str());
}

}  // namespace dgvc::cli
