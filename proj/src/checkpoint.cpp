#include "pmgf/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "pmgf/errors.hpp"

namespace pmgf {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

json config_json(const VAEConfig& c) {
  return {{"model_dim", c.model_dim},
          {"latent_dim", c.latent_dim},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"attention_heads", c.attention_heads},
          {"ff_dim", c.ff_dim},
          {"frames", c.frames},
          {"joints", c.joints},
          {"lambda_kl", c.lambda_kl},
          {"lambda_speed", c.lambda_speed},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

VAEConfig config_from(const json& j) {
  VAEConfig c;
  c.model_dim = j.at("model_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.attention_heads = j.at("attention_heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.frames = j.at("frames").get<int>();
  c.joints = j.at("joints").get<int>();
  c.lambda_kl = j.at("lambda_kl").get<double>();
  c.lambda_speed = j.at("lambda_speed").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string config_to_json(const VAEConfig& c) { return config_json(c).dump(); }

VAEConfig config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const VAE& model, const Scaler& scaler) {
  const json header = {{"config", config_json(model.config())},
                       {"scaler", {{"mean", scaler.mean}, {"std", scaler.std}}},
                       {"parameter_count", model.parameter_count()},
                       {"dtype", "float32"}};
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Written to a sibling file first so a crash never leaves a half-written
  // checkpoint under the final name.
  std::filesystem::path tmp = path;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t len = text.size();
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    const auto params = model.parameters();
    out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size_bytes()));
    if (!out) throw ValidationError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  const auto fail = [&](const std::string& why) { return ValidationError("corrupted checkpoint " + path.string() + ": " + why); };
  char magic[sizeof kCheckpointMagic];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw fail("bad magic");
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in) throw fail("truncated header");
  if (version != kCheckpointVersion) throw fail("unsupported version " + std::to_string(version));
  if (len > (1u << 24)) throw fail("implausible header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw fail("truncated header");

  VAEConfig config;
  Scaler scaler;
  std::size_t count = 0;
  try {
    const json h = json::parse(text);
    config = config_from(h.at("config"));
    scaler.mean = h.at("scaler").at("mean").get<std::vector<double>>();
    scaler.std = h.at("scaler").at("std").get<std::vector<double>>();
    count = h.at("parameter_count").get<std::size_t>();
    if (h.at("dtype").get<std::string>() != "float32") throw fail("unsupported dtype");
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  try {
    config.validate();
    scaler.validate();
  } catch (const ValidationError& e) {
    throw fail(e.what());
  }
  VAE model(config);
  if (model.parameter_count() != count) throw fail("parameter count does not match the model config");
  auto params = model.parameters();
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(params.size_bytes()));
  if (!in) throw fail("truncated parameters");
  if (in.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes");
  for (float v : params)
    if (!std::isfinite(v)) throw fail("non-finite parameter");
  return {std::move(model), std::move(scaler)};
}

void write_train_report(const std::filesystem::path& path, const TrainReport& r) {
  const json j = {{"config", config_json(r.config)},
                  {"recon", r.recon},
                  {"kl", r.kl},
                  {"speed", r.speed},
                  {"total", r.total},
                  {"joint_rmse_mm", r.joint_rmse_mm},
                  {"rmse_mm", r.rmse_mm},
                  {"wall_time_s", r.wall_time_s}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
}

}  // namespace pmgf
