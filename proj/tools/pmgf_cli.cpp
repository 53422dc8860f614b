#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmgf/checkpoint.hpp"
#include "pmgf/config.hpp"
#include "pmgf/errors.hpp"
#include "pmgf/features.hpp"
#include "pmgf/guidance.hpp"
#include "pmgf/harness.hpp"
#include "pmgf/motion_io.hpp"
#include "pmgf/preprocess.hpp"
#include "pmgf/render.hpp"
#include "pmgf/synth.hpp"

namespace fs = std::filesystem;
using namespace pmgf;

namespace {

constexpr const char* kOutRootEnv = "PMGF_OUT";

struct Overrides {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, manifest, checkpoint;
  std::optional<int> athletes, trials, epochs, batch, model_dim, ff_dim, heads, latent_dim, iterations, perturbations,
      steps;
  std::optional<double> noise, lr, radius, sigma, es_lr, cutoff;
  std::optional<bool> raw;
  std::optional<std::string> source, target;
  std::vector<std::string> checkpoints, optimizations;
  std::vector<double> radii;
  bool no_render = false;
  std::optional<std::string> resume;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (const char* root = std::getenv(kOutRootEnv); root && *root) c.out_dir = root;
  if (!o.config_file.empty()) c = load_config(o.config_file, c);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.manifest) c.manifest = *o.manifest;
  if (o.checkpoint) c.checkpoint = *o.checkpoint;
  if (o.athletes) c.synth.athletes = *o.athletes;
  if (o.trials) c.synth.trials = *o.trials;
  if (o.noise) c.synth.marker_noise_mm = *o.noise;
  if (o.raw) c.synth.raw = *o.raw;
  if (o.cutoff) c.cutoff_hz = *o.cutoff;
  if (o.epochs) c.vae.epochs = *o.epochs;
  if (o.batch) c.vae.batch_size = *o.batch;
  if (o.model_dim) c.vae.model_dim = *o.model_dim;
  if (o.ff_dim) c.vae.ff_dim = *o.ff_dim;
  if (o.heads) c.vae.attention_heads = *o.heads;
  if (o.latent_dim) c.vae.latent_dim = *o.latent_dim;
  if (o.lr) c.vae.learning_rate = *o.lr;
  if (o.radius) c.es.radius = *o.radius;
  if (o.sigma) c.es.sigma = *o.sigma;
  if (o.es_lr) c.es.learning_rate = *o.es_lr;
  if (o.iterations) c.es.iterations = *o.iterations;
  if (o.perturbations) c.es.perturbations = *o.perturbations;
  if (o.steps) c.interpolation_steps = *o.steps;
  if (o.source) c.source_athlete = *o.source;
  if (o.target) c.target_athlete = *o.target;
  if (!o.checkpoints.empty()) c.checkpoints.assign(o.checkpoints.begin(), o.checkpoints.end());
  if (!o.optimizations.empty()) c.optimization_files.assign(o.optimizations.begin(), o.optimizations.end());
  if (!o.radii.empty()) c.radii = o.radii;
  if (o.no_render) c.render = false;
  c.validate();
  return c;
}

fs::path prepare_out(const RunConfig& c, const std::string& command) {
  const fs::path dir = c.out_dir / command;
  fs::create_directories(dir);
  write_config(dir / "config.json", c);
  return dir;
}

// Normalized sequences from the manifest, canonicalized to right-handed.
std::vector<MotionSequence> load_corpus(const RunConfig& c) {
  require(!c.manifest.empty(), "a dataset manifest is required (--manifest)");
  std::vector<MotionSequence> seqs = load_sequences(c.manifest);
  require(!seqs.empty(), "manifest lists no trials");
  for (auto& s : seqs) s = to_right_handed(s);
  return seqs;
}

Checkpoint load_model(const RunConfig& c) {
  require(!c.checkpoint.empty(), "a model checkpoint is required (--checkpoint)");
  return load_checkpoint(c.checkpoint);
}

std::vector<Eigen::MatrixXd> standardized(std::span<const MotionSequence> seqs, const Scaler& s) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& q : seqs) out.push_back(standardize(to_matrix(q), s));
  return out;
}

Cutoff cutoff_of(const RunConfig& c) {
  if (c.cutoff_hz) return *c.cutoff_hz;
  return AutoCutoff{};
}

void cmd_synth(const RunConfig& c) {
  const fs::path dir = prepare_out(c, "synth");
  CohortOptions opts;
  opts.marker_noise_mm = c.synth.marker_noise_mm;
  opts.left_handed_fraction = c.synth.left_handed_fraction;
  const auto trials = make_cohort(c.synth.athletes, c.synth.trials, c.seed, opts);
  write_cohort(dir, trials);
  std::cout << "wrote " << trials.size() << " trials to " << (dir / "manifest.json").string() << '\n';
  if (c.synth.raw) {
    Manifest m;
    m.kind = "raw";
    const fs::path raw_dir = dir / "raw";
    fs::create_directories(raw_dir);
    for (const auto& t : trials) {
      const std::string& aid = t.sequence.athlete_id;
      if (m.athletes.empty() || m.athletes.back().athlete_id != aid) m.athletes.push_back({aid, {}});
      const std::string file = t.sequence.trial_id + ".motion";
      write_raw_capture(raw_dir / file, render_raw_capture(t, c.synth.raw_rate_hz, 1.5, 0.5));
      m.athletes.back().trials.push_back({t.sequence.trial_id, file, fs::path("..") / (t.sequence.trial_id + ".truth.json")});
    }
    write_manifest(raw_dir / "manifest.json", m);
    std::cout << "wrote raw captures to " << (raw_dir / "manifest.json").string() << '\n';
  }
}

void cmd_preprocess(const RunConfig& c) {
  require(!c.manifest.empty(), "a raw dataset manifest is required (--manifest)");
  const Manifest in = read_manifest(c.manifest);
  require(in.kind == "raw", "preprocess expects a manifest of raw captures");
  const fs::path dir = prepare_out(c, "preprocess");
  const fs::path base = c.manifest.parent_path();
  Manifest out;
  std::size_t count = 0;
  for (const auto& a : in.athletes) {
    out.athletes.push_back({a.athlete_id, {}});
    for (const auto& t : a.trials) {
      const MotionSequence seq = preprocess(read_raw_capture(base / t.file), cutoff_of(c));
      const std::string file = t.trial_id + ".motion";
      write_sequence(dir / file, seq);
      std::optional<fs::path> truth;
      if (t.ground_truth) truth = fs::relative(fs::absolute(base / *t.ground_truth), fs::absolute(dir));
      out.athletes.back().trials.push_back({t.trial_id, file, truth});
      ++count;
    }
  }
  write_manifest(dir / "manifest.json", out);
  std::cout << "preprocessed " << count << " captures into " << (dir / "manifest.json").string() << '\n';
}

void cmd_train(const RunConfig& c, const std::optional<std::string>& resume) {
  const auto seqs = load_corpus(c);
  std::optional<Checkpoint> init;
  if (resume) init = load_checkpoint(*resume);
  const Scaler scaler = init ? init->scaler : fit_scaler(seqs);
  const auto corpus = standardized(seqs, scaler);
  const fs::path dir = prepare_out(c, "train");
  TrainOptions opts;
  if (init) opts.initial = &init->model;
  const int every = std::max(1, c.vae.epochs / 20);
  opts.on_epoch = [&](int epoch, const LossTerms& t) {
    if (epoch % every == 0 || epoch + 1 == c.vae.epochs) {
      std::fprintf(stderr, "epoch %d total %.5f recon %.5f kl %.3f speed %.5f\n", epoch + 1, t.total, t.recon, t.kl,
                   t.speed);
    }
    return true;
  };
  auto [model, report] = train(corpus, scaler, c.vae_config(), opts);
  save_checkpoint(dir / "model.ckpt", model, scaler);
  write_train_report(dir / "train_report.json", report);
  std::ofstream curves(dir / "loss_curves.csv");
  curves << "epoch,total,recon,kl,speed\n";
  for (std::size_t e = 0; e < report.total.size(); ++e) {
    curves << e + 1 << ',' << report.total[e] << ',' << report.recon[e] << ',' << report.kl[e] << ',' << report.speed[e]
           << '\n';
  }
  std::cout << "trained " << report.total.size() << " epochs in " << report.wall_time_s << " s, reconstruction RMSE "
            << report.rmse_mm << " mm; checkpoint " << (dir / "model.ckpt").string() << '\n';
}

void cmd_features(const RunConfig& c) {
  const auto seqs = load_corpus(c);
  const fs::path dir = prepare_out(c, "features");
  std::vector<FeatureRow> rows;
  for (const auto& s : seqs) rows.push_back({s.trial_id, s.athlete_id, extract_features(s)});
  write_feature_csv(dir / "features.csv", rows);
  std::cout << "wrote features of " << rows.size() << " trials to " << (dir / "features.csv").string() << '\n';
}

LatentVector representative_latent(const std::vector<MotionSequence>& seqs, const std::string& athlete,
                                   const Checkpoint& ck) {
  const auto reps = representative_trials(seqs);
  for (std::size_t i : reps) {
    if (seqs[i].athlete_id == athlete) return ck.model.encode_mean(standardize(to_matrix(seqs[i]), ck.scaler));
  }
  throw ValidationError("athlete '" + athlete + "' is not in the dataset");
}

void cmd_interpolate(const RunConfig& c) {
  require(!c.source_athlete.empty() && !c.target_athlete.empty(), "--source and --target athletes are required");
  const auto seqs = load_corpus(c);
  const Checkpoint ck = load_model(c);
  const LatentVector zo = representative_latent(seqs, c.source_athlete, ck);
  const LatentVector zt = representative_latent(seqs, c.target_athlete, ck);
  const fs::path dir = prepare_out(c, "interpolate");
  const auto motions = interpolation_sweep(ck.model, ck.scaler, zo, zt, c.interpolation_steps);
  std::vector<FeatureRow> rows;
  std::vector<std::size_t> panel = {0, 50, kReleaseFrame, 100};
  for (std::size_t k = 0; k < motions.size(); ++k) {
    MotionSequence m = motions[k];
    char tag[32];
    std::snprintf(tag, sizeof tag, "alpha_%02zu", k);
    m.athlete_id = c.source_athlete + "->" + c.target_athlete;
    m.trial_id = tag;
    write_sequence(dir / (std::string(tag) + ".motion"), m);
    rows.push_back({m.trial_id, m.athlete_id, extract_features(m)});
    if (c.render) write_ppm(dir / (std::string(tag) + ".ppm"), render_panel(m, panel));
  }
  write_feature_csv(dir / "features.csv", rows);
  std::cout << "wrote " << motions.size() << " interpolated motions to " << dir.string() << '\n';
}

void cmd_optimize(const RunConfig& c) {
  const auto seqs = load_corpus(c);
  const Checkpoint ck = load_model(c);
  const auto athletes = lower_third_athletes(seqs);
  const fs::path dir = prepare_out(c, "optimize");
  std::cout << "optimizing " << athletes.size() << " lower-third athletes:";
  for (const auto& a : athletes) std::cout << ' ' << a.athlete_id;
  std::cout << std::endl;
  const ManipulationRun run =
      run_manipulation(ck.model, ck.scaler, seqs, athletes, c.fitness, c.es_config(), c.checkpoint.stem().string());
  write_optimization_json(dir / "optimization.json", run);
  write_stats_csv(dir / "stats.csv", std::span<const StatsReport>(&run.stats, 1));
  for (std::size_t a = 0; a < run.results.size(); ++a) {
    const auto& r = run.results[a];
    for (std::size_t t = 0; t < r.optimized_motions.size(); ++t) {
      MotionSequence m = r.optimized_motions[t];
      m.athlete_id = run.athlete_ids[a];
      m.trial_id = run.trial_ids[a][t] + "_optimized";
      write_sequence(dir / (m.trial_id + ".motion"), m);
      if (c.render && t == 0) {
        const std::size_t frames[] = {kReleaseFrame};
        write_ppm(dir / (run.trial_ids[a][t] + "_original.ppm"), render_panel(r.original_motions[t], frames));
        write_ppm(dir / (m.trial_id + ".ppm"), render_panel(m, frames));
      }
    }
  }
  std::cout << "total effect size " << run.stats.total_effect() << "; results in " << dir.string() << '\n';
}

void cmd_dtw_sweep(const RunConfig& c) {
  const auto seqs = load_corpus(c);
  const Checkpoint ck = load_model(c);
  const fs::path dir = prepare_out(c, "dtw-sweep");
  std::vector<std::string> ids;
  std::vector<LatentVector> zs;
  std::vector<std::string> labels;
  std::vector<LatentVector> all;
  for (std::size_t i : representative_trials(seqs)) {
    ids.push_back(seqs[i].athlete_id);
    zs.push_back(ck.model.encode_mean(standardize(to_matrix(seqs[i]), ck.scaler)));
  }
  const DTWReport rep = transfer_sweep(ids, zs, ck.model, ck.scaler, c.interpolation_steps);
  write_dtw_csv(dir / "dtw.csv", rep);
  if (c.render && zs.size() >= 2) {
    for (const auto& s : seqs) {
      all.push_back(ck.model.encode_mean(standardize(to_matrix(s), ck.scaler)));
      labels.push_back(s.athlete_id);
    }
    write_ppm(dir / "latent_scatter.ppm", latent_scatter(all, labels));
  }
  std::cout << rep.pair_count() << " pairs, " << rep.monotone_count() << " monotone ("
            << 100.0 * rep.monotone_fraction() << "%), endpoints " << (rep.endpoints_exact() ? "exact" : "NOT exact")
            << "; table " << (dir / "dtw.csv").string() << '\n';
}

void cmd_report(const RunConfig& c) {
  require(!c.optimization_files.empty() || !c.checkpoints.empty(),
          "report needs --optimization files and/or --checkpoints for a radius sweep");
  const fs::path dir = prepare_out(c, "report");
  if (!c.optimization_files.empty()) {
    std::vector<StatsReport> reports;
    for (const auto& p : c.optimization_files) {
      ManipulationRun run = read_optimization_json(p);
      if (run.model_id.empty()) run.model_id = p.parent_path().filename().string();
      run.stats.model_id = run.model_id;
      reports.push_back(run.stats);
    }
    write_stats_csv(dir / "table1.csv", reports);
    std::cout << "aggregated " << reports.size() << " runs into " << (dir / "table1.csv").string() << '\n';
  }
  if (!c.checkpoints.empty()) {
    const auto seqs = load_corpus(c);
    std::vector<ModelInstance> models;
    for (const auto& p : c.checkpoints) {
      Checkpoint ck = load_checkpoint(p);
      models.push_back({p.stem().string(), std::move(ck.model), std::move(ck.scaler)});
    }
    const auto athletes = lower_third_athletes(seqs);
    const RadiusSweep s = radius_sweep(models, seqs, athletes, c.radii, c.fitness, c.es_config());
    write_radius_csv(dir / "table2.csv", s);
    std::cout << "radius sweep over " << models.size() << " models written to " << (dir / "table2.csv").string() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion VAE guidance pipeline: synthetic data, training, latent interpolation and optimization"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_file, "JSON config applied on top of the defaults")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("--out", o.out, std::string("Output root (default $") + kOutRootEnv + " or ./pmgf-out)");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the resolved config and exit");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with ground-truth features");
  synth->add_option("--athletes", o.athletes, "Number of athletes");
  synth->add_option("--trials", o.trials, "Trials per athlete");
  synth->add_option("--noise", o.noise, "Marker noise SD in mm");
  synth->add_flag("--raw", o.raw, "Also write raw captures for the preprocess command");

  auto* pre = app.add_subcommand("preprocess", "Filter, segment and normalize raw captures");
  pre->add_option("--manifest", o.manifest, "Raw dataset manifest");
  pre->add_option("--cutoff", o.cutoff, "Fixed low-pass cutoff in Hz (default: residual analysis)");

  auto* tr = app.add_subcommand("train", "Train the motion VAE");
  tr->add_option("--manifest", o.manifest, "Normalized dataset manifest");
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--batch", o.batch);
  tr->add_option("--lr", o.lr);
  tr->add_option("--model-dim", o.model_dim);
  tr->add_option("--ff-dim", o.ff_dim);
  tr->add_option("--heads", o.heads);
  tr->add_option("--latent-dim", o.latent_dim);
  tr->add_option("--resume", o.resume, "Warm start from a checkpoint");

  auto* interp = app.add_subcommand("interpolate", "Blend two athletes' representative motions in latent space");
  interp->add_option("--manifest", o.manifest);
  interp->add_option("--checkpoint", o.checkpoint);
  interp->add_option("--source", o.source, "Original athlete id");
  interp->add_option("--target", o.target, "Target athlete id");
  interp->add_option("--steps", o.steps, "Number of alpha values including both ends");
  interp->add_flag("--no-render", o.no_render);

  auto* opt = app.add_subcommand("optimize", "Search latent directions for the lower-third velocity athletes");
  opt->add_option("--manifest", o.manifest);
  opt->add_option("--checkpoint", o.checkpoint);
  opt->add_option("--radius", o.radius);
  opt->add_option("--sigma", o.sigma);
  opt->add_option("--es-lr", o.es_lr);
  opt->add_option("--iterations", o.iterations);
  opt->add_option("--perturbations", o.perturbations);
  opt->add_flag("--no-render", o.no_render);

  auto* feat = app.add_subcommand("features", "Extract the eight features of every trial");
  feat->add_option("--manifest", o.manifest);

  auto* dtw = app.add_subcommand("dtw-sweep", "Pairwise style-transfer similarity sweep");
  dtw->add_option("--manifest", o.manifest);
  dtw->add_option("--checkpoint", o.checkpoint);
  dtw->add_option("--steps", o.steps);
  dtw->add_flag("--no-render", o.no_render);

  auto* rep = app.add_subcommand("report", "Aggregate optimization runs and run radius sweeps");
  rep->add_option("--optimization", o.optimizations, "optimization.json files, one per model");
  rep->add_option("--checkpoints", o.checkpoints, "Checkpoints for a radius sweep");
  rep->add_option("--manifest", o.manifest);
  rep->add_option("--radii", o.radii);
  rep->add_option("--iterations", o.iterations);
  rep->add_option("--perturbations", o.perturbations);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const RunConfig c = resolve(o);
    if (print_config) {
      std::cout << to_json_text(c) << '\n';
      return 0;
    }
    if (*synth) cmd_synth(c);
    if (*pre) cmd_preprocess(c);
    if (*tr) cmd_train(c, o.resume);
    if (*interp) cmd_interpolate(c);
    if (*opt) cmd_optimize(c);
    if (*feat) cmd_features(c);
    if (*dtw) cmd_dtw_sweep(c);
    if (*rep) cmd_report(c);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for more information.\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
