#include "pmgf/motion_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pmgf/errors.hpp"

namespace pmgf {

namespace fs = std::filesystem;

std::string column_header() {
  static constexpr char kAxisNames[3] = {'x', 'y', 'z'};
  std::string out;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (std::size_t a = 0; a < kAxes; ++a) {
      if (!out.empty()) out += ',';
      out += kJointNames[j];
      out += '_';
      out += kAxisNames[a];
    }
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s, const fs::path& path, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

struct ParsedMotion {
  std::map<std::string, std::string> header;
  JointPositions positions;
};

void write_motion(const fs::path& path, const std::map<std::string, std::string>& header,
                  const std::vector<std::string>& key_order, const JointPositions& p) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << kMotionMagic << '\n';
  for (const auto& key : key_order) out << key << ": " << header.at(key) << '\n';
  out << "columns: " << column_header() << '\n';
  const auto v = p.values();
  for (std::size_t f = 0; f < p.frames(); ++f) {
    for (std::size_t c = 0; c < kCoordsPerFrame; ++c) {
      if (c) out << ',';
      out << format_double(v[f * kCoordsPerFrame + c]);
    }
    out << '\n';
  }
  if (!out) throw ValidationError("failed writing " + path.string());
}

ParsedMotion read_motion(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open motion file " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line.rfind(kMotionMagic, 0) != 0) {
    throw ValidationError(path.string() + ": missing '" + kMotionMagic + "' header");
  }
  ParsedMotion parsed;
  bool have_columns = false;
  while (!have_columns && std::getline(in, line)) {
    ++lineno;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 'key: value'");
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    while (!value.empty() && (value.front() == ' ')) value.erase(value.begin());
    while (!value.empty() && (value.back() == '\r' || value.back() == ' ')) value.pop_back();
    if (key == "columns") {
      if (value != column_header()) throw ValidationError(path.string() + ": unexpected column layout");
      have_columns = true;
    } else {
      parsed.header[key] = value;
    }
  }
  if (!have_columns) throw ValidationError(path.string() + ": missing columns line");
  for (const char* key : {"athlete_id", "trial_id", "throwing_side", "sample_rate_hz", "ball_velocity_mph", "frames"}) {
    if (!parsed.header.contains(key)) throw ValidationError(path.string() + ": missing header field " + key);
  }
  const double frames_d = parse_double(parsed.header["frames"], path, 0);
  require(frames_d >= 0 && frames_d == std::floor(frames_d), path.string() + ": frames must be a non-negative integer");
  const auto frames = static_cast<std::size_t>(frames_d);

  std::vector<double> values;
  values.reserve(frames * kCoordsPerFrame);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(parse_double(rest.substr(0, comma), path, lineno));
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (count != kCoordsPerFrame) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 45 columns, got " +
                            std::to_string(count));
    }
  }
  if (values.size() != frames * kCoordsPerFrame) {
    throw ValidationError(path.string() + ": header says " + std::to_string(frames) + " frames, body has " +
                          std::to_string(values.size() / kCoordsPerFrame));
  }
  parsed.positions = JointPositions(frames, std::move(values));
  return parsed;
}

}  // namespace

void write_raw_capture(const fs::path& path, const RawCapture& raw) {
  raw.validate();
  const std::map<std::string, std::string> header = {
      {"athlete_id", raw.athlete_id},
      {"trial_id", raw.trial_id},
      {"throwing_side", std::string(to_string(raw.throwing_side))},
      {"sample_rate_hz", format_double(raw.sample_rate_hz)},
      {"ball_velocity_mph", format_double(raw.ball_velocity_mph)},
      {"frames", std::to_string(raw.frames())}};
  write_motion(path, header, {"athlete_id", "trial_id", "throwing_side", "sample_rate_hz", "ball_velocity_mph", "frames"},
               raw.positions);
}

RawCapture read_raw_capture(const fs::path& path) {
  ParsedMotion p = read_motion(path);
  RawCapture raw;
  raw.athlete_id = p.header["athlete_id"];
  raw.trial_id = p.header["trial_id"];
  raw.throwing_side = side_from_string(p.header["throwing_side"]);
  raw.sample_rate_hz = parse_double(p.header["sample_rate_hz"], path, 0);
  raw.ball_velocity_mph = parse_double(p.header["ball_velocity_mph"], path, 0);
  raw.positions = std::move(p.positions);
  raw.validate();
  return raw;
}

void write_sequence(const fs::path& path, const MotionSequence& seq) {
  seq.validate();
  const std::map<std::string, std::string> header = {
      {"athlete_id", seq.athlete_id},
      {"trial_id", seq.trial_id},
      {"throwing_side", std::string(to_string(seq.throwing_side))},
      {"sample_rate_hz", format_double(1.0 / kFrameDtS)},
      {"ball_velocity_mph", format_double(seq.ball_velocity_mph)},
      {"frames", std::to_string(seq.positions.frames())},
      {"release_frame", std::to_string(seq.release_frame)}};
  write_motion(path, header,
               {"athlete_id", "trial_id", "throwing_side", "sample_rate_hz", "ball_velocity_mph", "frames", "release_frame"},
               seq.positions);
}

MotionSequence read_sequence(const fs::path& path) {
  ParsedMotion p = read_motion(path);
  if (!p.header.contains("release_frame")) throw ValidationError(path.string() + ": not a normalized sequence (no release_frame)");
  MotionSequence seq;
  seq.athlete_id = p.header["athlete_id"];
  seq.trial_id = p.header["trial_id"];
  seq.throwing_side = side_from_string(p.header["throwing_side"]);
  seq.ball_velocity_mph = parse_double(p.header["ball_velocity_mph"], path, 0);
  const double rf = parse_double(p.header["release_frame"], path, 0);
  require(rf >= 0 && rf == std::floor(rf), path.string() + ": release_frame must be a non-negative integer");
  seq.release_frame = static_cast<std::size_t>(rf);
  seq.positions = std::move(p.positions);
  seq.validate();
  return seq;
}

std::size_t Manifest::trial_count() const {
  std::size_t n = 0;
  for (const auto& a : athletes) n += a.trials.size();
  return n;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  nlohmann::json j;
  j["format"] = "pmgf-manifest";
  j["version"] = 1;
  j["kind"] = m.kind;
  j["athletes"] = nlohmann::json::array();
  for (const auto& a : m.athletes) {
    nlohmann::json ja;
    ja["athlete_id"] = a.athlete_id;
    ja["trials"] = nlohmann::json::array();
    for (const auto& t : a.trials) {
      nlohmann::json jt{{"trial_id", t.trial_id}, {"file", t.file.generic_string()}};
      if (t.ground_truth) jt["ground_truth"] = t.ground_truth->generic_string();
      ja["trials"].push_back(jt);
    }
    j["athletes"].push_back(ja);
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "pmgf-manifest") throw ValidationError(path.string() + ": not a pmgf manifest");
  if (j.value("version", 0) != 1) throw ValidationError(path.string() + ": unsupported manifest version");
  Manifest m;
  try {
    m.kind = j.at("kind").get<std::string>();
    for (const auto& ja : j.at("athletes")) {
      ManifestAthlete a;
      a.athlete_id = ja.at("athlete_id").get<std::string>();
      for (const auto& jt : ja.at("trials")) {
        ManifestTrial t;
        t.trial_id = jt.at("trial_id").get<std::string>();
        t.file = jt.at("file").get<std::string>();
        if (jt.contains("ground_truth")) t.ground_truth = fs::path(jt.at("ground_truth").get<std::string>());
        a.trials.push_back(std::move(t));
      }
      m.athletes.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return m;
}

std::vector<MotionSequence> load_sequences(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  require(m.kind == "normalized", manifest_path.string() + ": manifest does not list normalized sequences");
  const fs::path dir = manifest_path.parent_path();
  std::vector<MotionSequence> out;
  out.reserve(m.trial_count());
  for (const auto& a : m.athletes) {
    for (const auto& t : a.trials) out.push_back(read_sequence(dir / t.file));
  }
  return out;
}

}  // namespace pmgf
