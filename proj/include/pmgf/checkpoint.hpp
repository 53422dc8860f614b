#pragma once

#include <filesystem>
#include <string>

#include "pmgf/vae.hpp"

namespace pmgf {

// Layout: 8-byte magic "PMGFCKPT", u32 format version, u64 header length,
// JSON header (model config, scaler, parameter count, dtype), then the
// parameters as little-endian float32.
inline constexpr char kCheckpointMagic[8] = {'P', 'M', 'G', 'F', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  VAE model;
  Scaler scaler;
};

void save_checkpoint(const std::filesystem::path& path, const VAE& model, const Scaler& scaler);
// Throws ValidationError on a truncated, corrupted or mismatched file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const VAEConfig& c);
VAEConfig config_from_json(const std::string& text);

// Loss curves and reconstruction RMSE.
void write_train_report(const std::filesystem::path& path, const TrainReport& r);

}  // namespace pmgf
