#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "pmgf/checkpoint.hpp"
#include "pmgf/config.hpp"
#include "pmgf/errors.hpp"
#include "pmgf/motion_io.hpp"
#include "pmgf/preprocess.hpp"
#include "pmgf/synth.hpp"

using namespace pmgf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pmgf_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

VAEConfig tiny_config() {
  VAEConfig c;
  c.model_dim = 16;
  c.latent_dim = 8;
  c.encoder_layers = 1;
  c.decoder_layers = 2;
  c.attention_heads = 4;
  c.ff_dim = 24;
  c.lambda_kl = 0.25;
  c.epochs = 7;
  c.seed = 99;
  return c;
}

Scaler some_scaler() {
  Scaler s;
  for (std::size_t i = 0; i < s.mean.size(); ++i) {
    s.mean[i] = 0.1 * static_cast<double>(i) - 1.0 / 3.0;
    s.std[i] = 1.0 + std::sqrt(static_cast<double>(i));
  }
  return s;
}

}  // namespace

TEST_CASE("normalized sequence round trip is exact") {
  const auto cohort = make_cohort(2, 1, 17);
  MotionSequence seq = cohort[1].sequence;
  seq.ball_velocity_mph = 83.123456789012345;
  const fs::path dir = scratch("seq");
  write_sequence(dir / "s.motion", seq);
  const MotionSequence back = read_sequence(dir / "s.motion");
  CHECK(back == seq);
  CHECK(slurp(dir / "s.motion").rfind(kMotionMagic, 0) == 0);
}

TEST_CASE("raw capture round trip is exact") {
  RawCapture raw;
  raw.positions = JointPositions(37);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 500);
  for (auto& v : raw.positions.values()) v = n(rng);
  raw.sample_rate_hz = 240;
  raw.athlete_id = "L7";
  raw.trial_id = "L7_T3";
  raw.throwing_side = Side::kLeft;
  raw.ball_velocity_mph = 77.7;
  const fs::path dir = scratch("raw");
  write_raw_capture(dir / "r.motion", raw);
  const RawCapture back = read_raw_capture(dir / "r.motion");
  CHECK(back.positions == raw.positions);
  CHECK(back.sample_rate_hz == 240);
  CHECK(back.athlete_id == "L7");
  CHECK(back.trial_id == "L7_T3");
  CHECK(back.throwing_side == Side::kLeft);
  CHECK(back.ball_velocity_mph == 77.7);
}

TEST_CASE("malformed motion files are rejected") {
  const auto cohort = make_cohort(2, 1, 17);
  const fs::path dir = scratch("bad_motion");
  write_sequence(dir / "good.motion", cohort[0].sequence);
  const std::string good = slurp(dir / "good.motion");

  CHECK_THROWS_AS(read_sequence(dir / "missing.motion"), ValidationError);

  spit(dir / "magic.motion", "# not-a-motion\n" + good.substr(good.find('\n') + 1));
  CHECK_THROWS_AS(read_sequence(dir / "magic.motion"), ValidationError);

  spit(dir / "truncated.motion", good.substr(0, good.size() / 2));
  CHECK_THROWS_AS(read_sequence(dir / "truncated.motion"), ValidationError);

  std::string bad_value = good;
  const auto last_row = bad_value.rfind('\n', bad_value.size() - 2);
  bad_value.replace(last_row + 1, 3, "abc");
  spit(dir / "value.motion", bad_value);
  CHECK_THROWS_AS(read_sequence(dir / "value.motion"), ValidationError);

  std::string nan_value = good;
  nan_value.replace(last_row + 1, 3, "nan");
  spit(dir / "nan.motion", nan_value);
  CHECK_THROWS_AS(read_sequence(dir / "nan.motion"), ValidationError);

  std::string columns = good;
  const auto pos = columns.find("head_x");
  columns.replace(pos, 6, "hand_x");
  spit(dir / "columns.motion", columns);
  CHECK_THROWS_AS(read_sequence(dir / "columns.motion"), ValidationError);
}

TEST_CASE("manifest round trip and loading") {
  const auto cohort = make_cohort(3, 2, 23);
  const fs::path dir = scratch("manifest");
  write_cohort(dir, cohort);
  const Manifest m = read_manifest(dir / "manifest.json");
  CHECK(m.kind == "normalized");
  CHECK(m.athletes.size() == 3);
  CHECK(m.trial_count() == 6);
  REQUIRE(m.athletes[0].trials.size() == 2);
  CHECK(m.athletes[0].trials[0].ground_truth.has_value());

  write_manifest(dir / "copy.json", m);
  const Manifest again = read_manifest(dir / "copy.json");
  CHECK(again.athletes.size() == m.athletes.size());
  CHECK(again.athletes[2].athlete_id == m.athletes[2].athlete_id);
  CHECK(again.athletes[2].trials[1].file == m.athletes[2].trials[1].file);

  const auto seqs = load_sequences(dir / "manifest.json");
  REQUIRE(seqs.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(seqs[i] == cohort[i].sequence);

  spit(dir / "broken.json", "{\"kind\": \"normalized\", \"athletes\": [");
  CHECK_THROWS_AS(read_manifest(dir / "broken.json"), ValidationError);
  spit(dir / "kind.json", "{\"kind\": \"sideways\", \"athletes\": []}");
  CHECK_THROWS_AS(read_manifest(dir / "kind.json"), ValidationError);
  spit(dir / "dangling.json",
       "{\"kind\": \"normalized\", \"athletes\": [{\"athlete_id\": \"Z\", \"trials\": "
       "[{\"trial_id\": \"Z_T1\", \"file\": \"nowhere.motion\"}]}]}");
  CHECK_THROWS_AS(load_sequences(dir / "dangling.json"), ValidationError);
}

TEST_CASE("checkpoint round trip preserves weights, config and scaler") {
  const VAE model(tiny_config());
  const Scaler scaler = some_scaler();
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "m.ckpt", model, scaler);
  CHECK_FALSE(fs::exists(dir / "m.ckpt.part"));
  const Checkpoint c = load_checkpoint(dir / "m.ckpt");
  CHECK(c.model.config() == model.config());
  REQUIRE(c.model.parameter_count() == model.parameter_count());
  CHECK(std::equal(c.model.parameters().begin(), c.model.parameters().end(), model.parameters().begin()));
  CHECK(c.scaler.mean == scaler.mean);
  CHECK(c.scaler.std == scaler.std);

  LatentVector z = LatentVector::LinSpaced(8, -1.0, 1.0);
  CHECK(c.model.decode(z) == model.decode(z));

  save_checkpoint(dir / "m2.ckpt", c.model, c.scaler);
  CHECK(slurp(dir / "m.ckpt") == slurp(dir / "m2.ckpt"));
}

TEST_CASE("corrupted checkpoints raise validation errors") {
  const VAE model(tiny_config());
  const fs::path dir = scratch("ckpt_bad");
  save_checkpoint(dir / "m.ckpt", model, some_scaler());
  const std::string good = slurp(dir / "m.ckpt");

  auto expect_corrupt = [&](const std::string& bytes) {
    spit(dir / "bad.ckpt", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), ValidationError);
  };
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), ValidationError);
  expect_corrupt("");
  expect_corrupt(good.substr(0, 5));
  expect_corrupt("XXXXXXXX" + good.substr(8));
  std::string version = good;
  version[8] = 7;
  expect_corrupt(version);
  std::string huge_header = good;
  huge_header[12 + 7] = 0x7f;
  expect_corrupt(huge_header);
  std::string json = good;
  json[20] = '#';
  expect_corrupt(json);
  expect_corrupt(good.substr(0, good.size() - 4));
  expect_corrupt(good + "x");
  std::string nan_param = good;
  const float bad = std::nanf("");
  std::memcpy(nan_param.data() + nan_param.size() - 4, &bad, 4);
  expect_corrupt(nan_param);

  // A header whose architecture disagrees with the payload size.
  std::string dims = good;
  const auto pos = dims.find("\"model_dim\":16");
  REQUIRE(pos != std::string::npos);
  dims.replace(pos, 14, "\"model_dim\":32");
  expect_corrupt(dims);
}

TEST_CASE("model config json round trip") {
  const VAEConfig c = tiny_config();
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK_THROWS_AS(config_from_json("{\"model_dim\": 16"), ValidationError);
}

TEST_CASE("run config merge") {
  const RunConfig base;
  CHECK(base.vae.model_dim == 256);
  CHECK(base.es.radius == 3.0);
  CHECK_FALSE(base.cutoff_hz.has_value());

  const RunConfig m = merge_config(base, R"({"seed": 12, "vae": {"epochs": 5, "model_dim": 32},
                                            "es": {"radius": 2.5}, "cutoff_hz": 12.5,
                                            "radii": [1, 3], "synth": {"athletes": 4}})");
  CHECK(m.seed == 12);
  CHECK(m.vae.epochs == 5);
  CHECK(m.vae.model_dim == 32);
  CHECK(m.vae.ff_dim == base.vae.ff_dim);
  CHECK(m.es.radius == 2.5);
  CHECK(m.es.iterations == 20);
  CHECK(m.cutoff_hz == 12.5);
  CHECK(m.radii == std::vector<double>{1, 3});
  CHECK(m.synth.athletes == 4);
  CHECK(m.vae_config().seed == 12);
  CHECK(m.es_config().seed == 12);

  const RunConfig back = merge_config(m, R"({"cutoff_hz": "auto"})");
  CHECK_FALSE(back.cutoff_hz.has_value());
  CHECK(merge_config(base, to_json_text(m)).vae == m.vae);

  CHECK_THROWS_AS(merge_config(base, R"({"sead": 1})"), ValidationError);
  CHECK_THROWS_AS(merge_config(base, R"({"vae": {"modeldim": 1}})"), ValidationError);
  CHECK_THROWS_AS(merge_config(base, R"({"vae": {"model_dim": "big"}})"), ValidationError);
  CHECK_THROWS_AS(merge_config(base, "[1, 2]"), ValidationError);
  CHECK_THROWS_AS(merge_config(base, "{"), ValidationError);
  CHECK_THROWS_AS(merge_config(base, R"({"synth": {"athletes": 1}})").validate(), ValidationError);

  const fs::path dir = scratch("config");
  write_config(dir / "c.json", m);
  const RunConfig loaded = load_config(dir / "c.json");
  CHECK(to_json_text(loaded) == to_json_text(m));
  CHECK_THROWS_AS(load_config(dir / "absent.json"), ValidationError);
}
