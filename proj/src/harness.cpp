#include "pmgf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "pmgf/dtw.hpp"
#include "pmgf/errors.hpp"
#include "pmgf/preprocess.hpp"

namespace pmgf {

using nlohmann::json;

std::size_t DTWReport::monotone_count() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const PairSweep& p) { return p.monotone; }));
}

double DTWReport::monotone_fraction() const {
  return pairs.empty() ? 0.0 : static_cast<double>(monotone_count()) / static_cast<double>(pairs.size());
}

bool DTWReport::endpoints_exact() const {
  return std::all_of(pairs.begin(), pairs.end(),
                     [](const PairSweep& p) { return p.to_original.front() == 0.0 && p.to_target.back() == 0.0; });
}

DTWReport transfer_sweep(std::span<const std::string> athlete_ids, std::span<const LatentVector> representatives,
                         const VAE& model, const Scaler& scaler, int steps) {
  require(athlete_ids.size() == representatives.size(), "one representative latent per athlete");
  require(steps >= 2, "transfer sweep needs at least 2 steps");
  // Endpoints are decoded once and reused so that the alpha = 0 and 1 rows
  // compare a sequence with itself.
  Eigen::MatrixXd ends(model.config().latent_dim, static_cast<Eigen::Index>(representatives.size()));
  for (std::size_t i = 0; i < representatives.size(); ++i) ends.col(static_cast<Eigen::Index>(i)) = representatives[i];
  const std::vector<MotionSequence> decoded_ends = decode_motions(model, scaler, ends);

  DTWReport rep;
  for (std::size_t i = 0; i < representatives.size(); ++i) {
    for (std::size_t j = i + 1; j < representatives.size(); ++j) {
      std::vector<MotionSequence> frames = interpolation_sweep(model, scaler, representatives[i], representatives[j], steps);
      frames.front() = decoded_ends[i];
      frames.back() = decoded_ends[j];
      PairSweep ps;
      ps.original_id = athlete_ids[i];
      ps.target_id = athlete_ids[j];
      for (int k = 0; k < steps; ++k) {
        ps.alpha.push_back(k == steps - 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(steps - 1));
        ps.to_original.push_back(s_motion(frames[static_cast<std::size_t>(k)], decoded_ends[i]));
        ps.to_target.push_back(s_motion(frames[static_cast<std::size_t>(k)], decoded_ends[j]));
      }
      ps.monotone = true;
      for (int k = 1; k < steps; ++k) {
        const auto a = static_cast<std::size_t>(k);
        if (ps.to_original[a] < ps.to_original[a - 1] || ps.to_target[a] > ps.to_target[a - 1]) ps.monotone = false;
      }
      rep.pairs.push_back(std::move(ps));
    }
  }
  return rep;
}

std::vector<AthleteTrials> group_by_athlete(std::span<const MotionSequence> sequences) {
  std::vector<AthleteTrials> out;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto [it, fresh] = slot.emplace(sequences[i].athlete_id, out.size());
    if (fresh) out.push_back({sequences[i].athlete_id, {}, 0.0});
    out[it->second].trials.push_back(i);
  }
  for (auto& a : out) {
    double sum = 0.0;
    for (std::size_t i : a.trials) sum += sequences[i].ball_velocity_mph;
    a.mean_ball_velocity_mph = sum / static_cast<double>(a.trials.size());
  }
  return out;
}

std::vector<std::size_t> representative_trials(std::span<const MotionSequence> sequences) {
  std::vector<std::size_t> out;
  for (const auto& a : group_by_athlete(sequences)) {
    std::size_t best = a.trials.front();
    for (std::size_t i : a.trials) {
      const auto& s = sequences[i];
      const auto& b = sequences[best];
      if (s.ball_velocity_mph > b.ball_velocity_mph ||
          (s.ball_velocity_mph == b.ball_velocity_mph && s.trial_id < b.trial_id)) {
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

std::vector<AthleteTrials> lower_third_athletes(std::span<const MotionSequence> sequences) {
  std::vector<AthleteTrials> all = group_by_athlete(sequences);
  require(!all.empty(), "no athletes to select from");
  std::stable_sort(all.begin(), all.end(), [](const AthleteTrials& a, const AthleteTrials& b) {
    if (a.mean_ball_velocity_mph != b.mean_ball_velocity_mph) return a.mean_ball_velocity_mph < b.mean_ball_velocity_mph;
    return a.athlete_id < b.athlete_id;
  });
  all.resize(std::max<std::size_t>(1, all.size() / 3));
  return all;
}

namespace {

FeatureVector mean_features(std::span<const FeatureVector> fs) {
  FeatureVector m;
  for (const auto& f : fs)
    for (std::size_t k = 0; k < kFeatureCount; ++k) m[k] += f[k];
  for (std::size_t k = 0; k < kFeatureCount; ++k) m[k] /= static_cast<double>(fs.size());
  return m;
}

StatsReport run_stats(const ManipulationRun& run) {
  std::vector<FeatureVector> before, after;
  for (const auto& r : run.results) {
    before.push_back(mean_features(r.original_features));
    after.push_back(mean_features(r.optimized_features));
  }
  require(!run.results.empty(), "manipulation run has no athletes");
  return feature_stats(before, after, run.results.front().params.weights, run.model_id);
}

}  // namespace

ManipulationRun run_manipulation(const VAE& model, const Scaler& scaler, std::span<const MotionSequence> sequences,
                                 std::span<const AthleteTrials> athletes, const FitnessParams& params,
                                 const ESConfig& config, std::string model_id) {
  require(athletes.size() >= 2, "manipulation statistics need at least 2 athletes");
  ManipulationRun run;
  run.model_id = std::move(model_id);
  for (std::size_t k = 0; k < athletes.size(); ++k) {
    const AthleteTrials& a = athletes[k];
    std::vector<Eigen::MatrixXd> xs;
    std::vector<std::string> ids;
    for (std::size_t i : a.trials) {
      require(i < sequences.size(), "trial index out of range");
      xs.push_back(standardize(to_matrix(sequences[i]), scaler));
      ids.push_back(sequences[i].trial_id);
    }
    std::vector<LatentVector> zs;
    for (const auto& d : model.encode_batch(xs)) zs.push_back(d.mean);
    ESConfig c = config;
    c.seed = config.seed + 7919ULL * k;
    run.athlete_ids.push_back(a.athlete_id);
    run.trial_ids.push_back(std::move(ids));
    run.results.push_back(es_optimize(zs, model, scaler, params, c));
  }
  run.stats = run_stats(run);
  return run;
}

Eigen::VectorXd RadiusSweep::mean() const { return total_effect.colwise().mean().transpose(); }

Eigen::VectorXd RadiusSweep::sd() const {
  const Eigen::Index n = total_effect.rows();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(total_effect.cols());
  if (n < 2) return out;
  const Eigen::VectorXd m = mean();
  for (Eigen::Index c = 0; c < total_effect.cols(); ++c) {
    out(c) = std::sqrt((total_effect.col(c).array() - m(c)).square().sum() / static_cast<double>(n - 1));
  }
  return out;
}

RadiusSweep radius_sweep(std::span<const ModelInstance> models, std::span<const MotionSequence> sequences,
                         std::span<const AthleteTrials> athletes, std::span<const double> radii,
                         const FitnessParams& params, const ESConfig& config) {
  require(!models.empty() && !radii.empty(), "radius sweep needs models and radii");
  RadiusSweep s;
  s.radii.assign(radii.begin(), radii.end());
  s.total_effect.resize(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(radii.size()));
  for (std::size_t m = 0; m < models.size(); ++m) {
    s.model_ids.push_back(models[m].id);
    s.stats.emplace_back();
    for (std::size_t r = 0; r < radii.size(); ++r) {
      ESConfig c = config;
      c.radius = radii[r];
      const ManipulationRun run =
          run_manipulation(models[m].model, models[m].scaler, sequences, athletes, params, c, models[m].id);
      s.total_effect(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(r)) = run.stats.total_effect();
      s.stats.back().push_back(run.stats);
    }
  }
  return s;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out.precision(10);
  return out;
}

}  // namespace

void write_dtw_csv(const std::filesystem::path& path, const DTWReport& r) {
  auto out = open_out(path);
  out << "original,target,alpha,to_original,to_target,monotone\n";
  for (const auto& p : r.pairs) {
    for (std::size_t k = 0; k < p.alpha.size(); ++k) {
      out << p.original_id << ',' << p.target_id << ',' << p.alpha[k] << ',' << p.to_original[k] << ','
          << p.to_target[k] << ',' << (p.monotone ? 1 : 0) << '\n';
    }
  }
}

void write_stats_csv(const std::filesystem::path& path, std::span<const StatsReport> reports) {
  auto out = open_out(path);
  out << "feature,unit";
  for (const auto& r : reports) {
    out << ',' << r.model_id << ":mean_difference," << r.model_id << ":p_adjusted," << r.model_id << ":cohens_d";
  }
  out << '\n';
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    out << kFeatureNames[k] << ',' << kFeatureUnits[k];
    for (const auto& r : reports) {
      const FeatureStats& f = r.features[k];
      out << ',' << f.mean_difference << ',';
      if (f.degenerate) {
        out << "NA,NA";
      } else {
        out << f.p_adjusted << ',' << f.cohens_d;
      }
    }
    out << '\n';
  }
  out << "total_effect,d";
  for (const auto& r : reports) out << ",,," << r.total_effect();
  out << '\n';
}

void write_radius_csv(const std::filesystem::path& path, const RadiusSweep& s) {
  auto out = open_out(path);
  out << "model";
  for (double r : s.radii) out << ",r=" << r;
  out << '\n';
  for (Eigen::Index m = 0; m < s.total_effect.rows(); ++m) {
    out << s.model_ids[static_cast<std::size_t>(m)];
    for (Eigen::Index c = 0; c < s.total_effect.cols(); ++c) out << ',' << s.total_effect(m, c);
    out << '\n';
  }
  const Eigen::VectorXd mean = s.mean(), sd = s.sd();
  out << "mean";
  for (Eigen::Index c = 0; c < mean.size(); ++c) out << ',' << mean(c);
  out << "\nsd";
  for (Eigen::Index c = 0; c < sd.size(); ++c) out << ',' << sd(c);
  out << '\n';
}

namespace {

json features_json(const FeatureVector& f) {
  json j;
  for (std::size_t k = 0; k < kFeatureCount; ++k) j[std::string(kFeatureNames[k])] = f[k];
  return j;
}

FeatureVector features_from_json(const json& j) {
  FeatureVector f;
  for (std::size_t k = 0; k < kFeatureCount; ++k) f[k] = j.at(std::string(kFeatureNames[k])).get<double>();
  return f;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

void write_optimization_json(const std::filesystem::path& path, const ManipulationRun& run) {
  json j;
  j["model_id"] = run.model_id;
  json athletes = json::array();
  for (std::size_t a = 0; a < run.results.size(); ++a) {
    const OptimizationResult& r = run.results[a];
    json ja;
    ja["athlete_id"] = run.athlete_ids[a];
    ja["seed"] = r.config.seed;
    ja["radius"] = r.config.radius;
    ja["sigma"] = r.config.sigma;
    ja["learning_rate"] = r.config.learning_rate;
    ja["perturbations"] = r.config.perturbations;
    ja["iterations"] = r.config.iterations;
    ja["weights"] = r.params.weights;
    ja["nash_sensitivity"] = r.params.nash_sensitivity;
    ja["direction"] = vector_json(r.direction);
    ja["best_fitness"] = r.state.best_fitness;
    ja["mean_fitness"] = r.state.mean_fitness;
    ja["best_candidate_fitness"] = r.state.best_candidate_fitness;
    ja["average_candidate_fitness"] = r.state.average_candidate_fitness;
    ja["floored_evaluations"] = r.floored_evaluations;
    json trials = json::array();
    for (std::size_t t = 0; t < r.original_features.size(); ++t) {
      trials.push_back({{"trial_id", run.trial_ids[a][t]},
                        {"original", features_json(r.original_features[t])},
                        {"optimized", features_json(r.optimized_features[t])}});
    }
    ja["trials"] = std::move(trials);
    athletes.push_back(std::move(ja));
  }
  j["athletes"] = std::move(athletes);
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

ManipulationRun read_optimization_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  ManipulationRun run;
  try {
    json j;
    in >> j;
    run.model_id = j.at("model_id").get<std::string>();
    for (const auto& ja : j.at("athletes")) {
      OptimizationResult r;
      run.athlete_ids.push_back(ja.at("athlete_id").get<std::string>());
      r.config.seed = ja.at("seed").get<std::uint64_t>();
      r.config.radius = ja.at("radius").get<double>();
      r.config.sigma = ja.at("sigma").get<double>();
      r.config.learning_rate = ja.at("learning_rate").get<double>();
      r.config.perturbations = ja.at("perturbations").get<int>();
      r.config.iterations = ja.at("iterations").get<int>();
      r.params.weights = ja.at("weights").get<std::vector<double>>();
      r.params.nash_sensitivity = ja.at("nash_sensitivity").get<double>();
      const auto dir = ja.at("direction").get<std::vector<double>>();
      r.direction = Eigen::Map<const Eigen::VectorXd>(dir.data(), static_cast<Eigen::Index>(dir.size()));
      r.state.mean_direction = r.direction;
      r.state.iteration = r.config.iterations;
      r.state.best_fitness = ja.at("best_fitness").get<double>();
      r.state.mean_fitness = ja.at("mean_fitness").get<std::vector<double>>();
      r.state.best_candidate_fitness = ja.at("best_candidate_fitness").get<std::vector<double>>();
      r.state.average_candidate_fitness = ja.at("average_candidate_fitness").get<std::vector<double>>();
      r.floored_evaluations = ja.at("floored_evaluations").get<long>();
      std::vector<std::string> ids;
      for (const auto& t : ja.at("trials")) {
        ids.push_back(t.at("trial_id").get<std::string>());
        r.original_features.push_back(features_from_json(t.at("original")));
        r.optimized_features.push_back(features_from_json(t.at("optimized")));
      }
      require(!ids.empty(), "athlete " + run.athlete_ids.back() + " has no trials");
      run.trial_ids.push_back(std::move(ids));
      run.results.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed optimization file " + path.string() + ": " + e.what());
  }
  require(run.results.size() >= 2, "optimization file needs at least 2 athletes");
  run.stats = run_stats(run);
  return run;
}

}  // namespace pmgf
