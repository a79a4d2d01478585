#include <sstream>
#include <stdexcept>

#include "merit/harness.hpp"

namespace merit::harness {

std::string to_string(RadarMode m) { return m == RadarMode::kAnt ? "ant" : "idx"; }

RadarMode radar_mode_from_string(const std::string& s) {
  if (s == "ant") return RadarMode::kAnt;
  if (s == "idx") return RadarMode::kIdx;
  throw std::invalid_argument("unknown radar mode: " + s);
}

namespace {

nlohmann::json fusion_to_json(const fusion::FusionConfig& f) {
  return {{"alpha", f.alpha},       {"batch", f.batch},   {"window_t", f.window_t},
          {"dropout", f.dropout},   {"lr_g", f.lr_g},     {"lr_d", f.lr_d},
          {"epochs", f.epochs},     {"seed", f.seed},     {"modality", fusion::to_string(f.modality)},
          {"enc_c1", f.enc_c1},     {"enc_c2", f.enc_c2}};
}

fusion::FusionConfig fusion_from_json(const nlohmann::json& j) {
  fusion::FusionConfig f;
  f.alpha = j.at("alpha");
  f.batch = j.at("batch");
  f.window_t = j.at("window_t");
  f.dropout = j.at("dropout");
  f.lr_g = j.at("lr_g");
  f.lr_d = j.at("lr_d");
  f.epochs = j.at("epochs");
  f.seed = j.at("seed");
  f.modality = fusion::modality_from_string(j.at("modality"));
  f.enc_c1 = j.at("enc_c1");
  f.enc_c2 = j.at("enc_c2");
  if (f.alpha < 0.0) throw std::invalid_argument("fusion.alpha must be >= 0");
  return f;
}

void flatten(const nlohmann::json& j, const std::string& prefix,
             std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = j.dump();
  }
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  return {{"dataset",
           {{"n_sessions", n_sessions}, {"duration_s", duration_s}, {"seed", seed}}},
          {"gen", gen.to_json()},
          {"prep",
           {{"window_t", window_t},
            {"stride", stride},
            {"fs_out", fs_out},
            {"range_lo_m", range_lo_m},
            {"range_hi_m", range_hi_m}}},
          {"ica",
           {{"enabled", ica_enabled},
            {"radar_mode", to_string(radar_mode)},
            {"steps", ica_steps},
            {"batch", ica_batch},
            {"lr", ica_lr}}},
          {"fusion", fusion_to_json(fusion)},
          {"out_dir", out_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  const auto& d = j.at("dataset");
  c.n_sessions = d.at("n_sessions");
  c.duration_s = d.at("duration_s");
  c.seed = d.at("seed");
  c.gen = synth::GenConfig::from_json(j.at("gen"));
  const auto& p = j.at("prep");
  c.window_t = p.at("window_t");
  c.stride = p.at("stride");
  c.fs_out = p.at("fs_out");
  c.range_lo_m = p.at("range_lo_m");
  c.range_hi_m = p.at("range_hi_m");
  const auto& i = j.at("ica");
  c.ica_enabled = i.at("enabled");
  c.radar_mode = radar_mode_from_string(i.at("radar_mode"));
  c.ica_steps = i.at("steps");
  c.ica_batch = i.at("batch");
  c.ica_lr = i.at("lr");
  c.fusion = fusion_from_json(j.at("fusion"));
  c.out_dir = j.at("out_dir");
  return c;
}

std::string ExperimentConfig::to_kv() const {
  std::map<std::string, std::string> flat;
  flatten(to_json(), "", flat);
  std::ostringstream os;
  for (const auto& [k, v] : flat) os << k << " = " << v << '\n';
  return os.str();
}

ExperimentConfig ExperimentConfig::from_kv(const std::string& text) {
  nlohmann::json j = ExperimentConfig{}.to_json();  // defaults; overrides applied on top
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t\r");
      std::size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");

    nlohmann::json* node = &j;
    std::size_t pos = 0;
    while (true) {
      std::size_t dot = key.find('.', pos);
      std::string part = key.substr(pos, dot - pos);
      if (dot == std::string::npos) {
        (*node)[part] = nlohmann::json::parse(val, nullptr, true);
        break;
      }
      node = &(*node)[part];
      pos = dot + 1;
    }
  }
  return from_json(j);
}

std::string ExperimentConfig::dataset_key() const {
  nlohmann::json j = to_json();
  std::string s = nlohmann::json{{"dataset", j["dataset"]}, {"gen", j["gen"]}}.dump();
  std::uint64_t h = fnv1a(s.data(), s.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::run_key() const {
  nlohmann::json j = to_json();
  j.erase("out_dir");
  std::string s = j.dump();
  std::uint64_t h = fnv1a(s.data(), s.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::dataset_dir() const { return out_dir + "/datasets/" + dataset_key(); }
std::string ExperimentConfig::run_dir() const { return out_dir + "/runs/" + run_key(); }

std::string ExperimentConfig::method_label() const {
  std::string s = fusion::to_string(fusion.modality);
  s += ica_enabled ? "+ica" : "-ica";
  s += "-" + to_string(radar_mode);
  return s;
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace merit::harness
