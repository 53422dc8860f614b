#include "pmgf/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pmgf/errors.hpp"

namespace pmgf {

using nlohmann::json;

void RunConfig::validate() const {
  require(synth.athletes >= 2, "synth.athletes must be at least 2");
  require(synth.trials >= 1, "synth.trials must be at least 1");
  require(synth.marker_noise_mm >= 0, "synth.marker_noise_mm must be non-negative");
  require(synth.left_handed_fraction >= 0 && synth.left_handed_fraction <= 1,
          "synth.left_handed_fraction must lie in [0, 1]");
  require(synth.raw_rate_hz > 0, "synth.raw_rate_hz must be positive");
  require(!cutoff_hz || *cutoff_hz > 0, "cutoff_hz must be positive");
  vae_config().validate();
  es_config().validate();
  fitness.validate();
  require(fitness.weights.size() == kFeatureCount, "fitness.weights needs 8 entries");
  require(interpolation_steps >= 2, "interpolation_steps must be at least 2");
  require(!radii.empty(), "radii must not be empty");
  for (double r : radii) require(r > 0, "radii must be positive");
}

VAEConfig RunConfig::vae_config() const {
  VAEConfig c = vae;
  c.seed = seed;
  return c;
}

ESConfig RunConfig::es_config() const {
  ESConfig c = es;
  c.seed = seed;
  return c;
}

namespace {

std::vector<std::string> paths_to_strings(const std::vector<std::filesystem::path>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.string());
  return out;
}

json to_json(const RunConfig& c) {
  json j;
  j["manifest"] = c.manifest.string();
  j["checkpoint"] = c.checkpoint.string();
  j["out_dir"] = c.out_dir.string();
  j["seed"] = c.seed;
  j["synth"] = {{"athletes", c.synth.athletes},
                {"trials", c.synth.trials},
                {"marker_noise_mm", c.synth.marker_noise_mm},
                {"left_handed_fraction", c.synth.left_handed_fraction},
                {"raw", c.synth.raw},
                {"raw_rate_hz", c.synth.raw_rate_hz}};
  j["cutoff_hz"] = c.cutoff_hz ? json(*c.cutoff_hz) : json("auto");
  j["vae"] = {{"model_dim", c.vae.model_dim},
              {"latent_dim", c.vae.latent_dim},
              {"encoder_layers", c.vae.encoder_layers},
              {"decoder_layers", c.vae.decoder_layers},
              {"attention_heads", c.vae.attention_heads},
              {"ff_dim", c.vae.ff_dim},
              {"lambda_kl", c.vae.lambda_kl},
              {"lambda_speed", c.vae.lambda_speed},
              {"learning_rate", c.vae.learning_rate},
              {"epochs", c.vae.epochs},
              {"batch_size", c.vae.batch_size}};
  j["es"] = {{"radius", c.es.radius},
             {"sigma", c.es.sigma},
             {"learning_rate", c.es.learning_rate},
             {"perturbations", c.es.perturbations},
             {"iterations", c.es.iterations}};
  j["fitness"] = {{"weights", c.fitness.weights}, {"nash_sensitivity", c.fitness.nash_sensitivity}};
  j["interpolation_steps"] = c.interpolation_steps;
  j["source_athlete"] = c.source_athlete;
  j["target_athlete"] = c.target_athlete;
  j["render"] = c.render;
  j["radii"] = c.radii;
  j["checkpoints"] = paths_to_strings(c.checkpoints);
  j["optimization_files"] = paths_to_strings(c.optimization_files);
  return j;
}

void reject_unknown(const json& reference, const json& candidate, const std::string& prefix) {
  for (auto it = candidate.begin(); it != candidate.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key())) throw ValidationError("unknown config key '" + key + "'");
    if (reference.at(it.key()).is_object()) {
      if (!it.value().is_object()) throw ValidationError("config key '" + key + "' must be an object");
      reject_unknown(reference.at(it.key()), it.value(), key);
    }
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.manifest = j.at("manifest").get<std::string>();
  c.checkpoint = j.at("checkpoint").get<std::string>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const json& s = j.at("synth");
  c.synth.athletes = s.at("athletes").get<int>();
  c.synth.trials = s.at("trials").get<int>();
  c.synth.marker_noise_mm = s.at("marker_noise_mm").get<double>();
  c.synth.left_handed_fraction = s.at("left_handed_fraction").get<double>();
  c.synth.raw = s.at("raw").get<bool>();
  c.synth.raw_rate_hz = s.at("raw_rate_hz").get<double>();
  const json& cut = j.at("cutoff_hz");
  if (cut.is_string()) {
    if (cut.get<std::string>() != "auto") throw ValidationError("cutoff_hz must be a number or \"auto\"");
  } else {
    c.cutoff_hz = cut.get<double>();
  }
  const json& v = j.at("vae");
  c.vae.model_dim = v.at("model_dim").get<int>();
  c.vae.latent_dim = v.at("latent_dim").get<int>();
  c.vae.encoder_layers = v.at("encoder_layers").get<int>();
  c.vae.decoder_layers = v.at("decoder_layers").get<int>();
  c.vae.attention_heads = v.at("attention_heads").get<int>();
  c.vae.ff_dim = v.at("ff_dim").get<int>();
  c.vae.lambda_kl = v.at("lambda_kl").get<double>();
  c.vae.lambda_speed = v.at("lambda_speed").get<double>();
  c.vae.learning_rate = v.at("learning_rate").get<double>();
  c.vae.epochs = v.at("epochs").get<int>();
  c.vae.batch_size = v.at("batch_size").get<int>();
  const json& e = j.at("es");
  c.es.radius = e.at("radius").get<double>();
  c.es.sigma = e.at("sigma").get<double>();
  c.es.learning_rate = e.at("learning_rate").get<double>();
  c.es.perturbations = e.at("perturbations").get<int>();
  c.es.iterations = e.at("iterations").get<int>();
  c.fitness.weights = j.at("fitness").at("weights").get<std::vector<double>>();
  c.fitness.nash_sensitivity = j.at("fitness").at("nash_sensitivity").get<double>();
  c.interpolation_steps = j.at("interpolation_steps").get<int>();
  c.source_athlete = j.at("source_athlete").get<std::string>();
  c.target_athlete = j.at("target_athlete").get<std::string>();
  c.render = j.at("render").get<bool>();
  c.radii = j.at("radii").get<std::vector<double>>();
  for (const auto& p : j.at("checkpoints")) c.checkpoints.emplace_back(p.get<std::string>());
  for (const auto& p : j.at("optimization_files")) c.optimization_files.emplace_back(p.get<std::string>());
  return c;
}

}  // namespace

std::string to_json_text(const RunConfig& c) { return to_json(c).dump(2); }

RunConfig merge_config(const RunConfig& base, const std::string& overlay_json) {
  try {
    const json overlay = json::parse(overlay_json);
    if (!overlay.is_object()) throw ValidationError("config must be a JSON object");
    json merged = to_json(base);
    reject_unknown(merged, overlay, "");
    merged.merge_patch(overlay);
    return from_json(merged);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return merge_config(base, ss.str());
}

void write_config(const std::filesystem::path& path, const RunConfig& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << to_json_text(c) << '\n';
}

}  // namespace pmgf
