// raypath: street-canyon specular path sampling toolkit.
//
// Subcommands: generate, stats, train, eval, coverage, bench. Every run is
// fully determined by its flag set plus --seed; output CSVs carry the exact
// command line in a leading "# cmdline:" comment.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "raypath/errors.hpp"
#include "raypath/eval.hpp"
#include "raypath/format.hpp"
#include "raypath/nn.hpp"
#include "raypath/scenes.hpp"
#include "raypath/trainer.hpp"

namespace {

using namespace raypath;

std::string join_cmdline(int argc, char** argv) {
  std::ostringstream out;
  for (int i = 0; i < argc; ++i) {
    if (i) out << " ";
    out << argv[i];
  }
  return out.str();
}

void add_canyon_flags(CLI::App* cmd, CanyonParams& p) {
  cmd->add_option("--buildings", p.n_buildings_per_side, "Buildings per street side");
  cmd->add_option("--street-width", p.street_width, "Street width in meters");
  cmd->add_option("--len-min", p.footprint_len_min, "Min footprint length along the street");
  cmd->add_option("--len-max", p.footprint_len_max, "Max footprint length along the street");
  cmd->add_option("--depth-min", p.footprint_depth_min, "Min footprint depth");
  cmd->add_option("--depth-max", p.footprint_depth_max, "Max footprint depth");
  cmd->add_option("--height-min", p.height_min, "Min building height");
  cmd->add_option("--height-max", p.height_max, "Max building height");
  cmd->add_option("--keep-min", p.keep_min, "Lower bound of the per-scene keep probability");
  cmd->add_option("--keep-max", p.keep_max, "Upper bound of the per-scene keep probability");
  cmd->add_option("--tx-height-min", p.tx_height_min, "Min TX height");
  cmd->add_option("--tx-height-max", p.tx_height_max, "Max TX height");
  cmd->add_option("--rx-height-min", p.rx_height_min, "Min RX height");
  cmd->add_option("--rx-height-max", p.rx_height_max, "Max RX height");
  cmd->add_option("--ground", [&p](const std::vector<std::string>& vals) {
        if (vals[0] == "always") {
          p.include_ground = GroundMode::Always;
        } else if (vals[0] == "random") {
          p.include_ground = GroundMode::Random;
        } else {
          throw CLI::ValidationError("--ground must be 'always' or 'random'");
        }
        return true;
      },
      "Ground plane inclusion: always|random");
  cmd->add_option("--region", [&p](const std::vector<std::string>& vals) {
        if (vals[0] == "canyon") {
          p.sampling_region = SamplingRegion::Canyon;
        } else if (vals[0] == "whole") {
          p.sampling_region = SamplingRegion::Whole;
        } else {
          throw CLI::ValidationError("--region must be 'canyon' or 'whole'");
        }
        return true;
      },
      "TX/RX sampling region: canyon|whole");
}

void write_text(const std::string& path, const std::string& content) {
  if (path == "-" || path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(int argc, char** argv) {
  const std::string cmdline = join_cmdline(argc, argv);

  CLI::App app{"Generative specular-path sampling toolkit for street-canyon ray tracing"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Write procedurally generated scene files");
  CanyonParams gen_params;
  int gen_n = 1;
  std::string gen_out = "scene";
  std::uint64_t gen_seed = 0;
  bool gen_reject_inside = false;
  gen->add_option("--n", gen_n, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output path prefix");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_flag("--reject-inside", gen_reject_inside,
                "Resample TX/RX that fall inside a building");
  add_canyon_flags(gen, gen_params);

  // ---- stats ----
  auto* stats = app.add_subcommand("stats", "Candidate counts and valid fractions per order");
  CanyonParams stats_params;
  int stats_scenes = 100;
  int stats_k = 2;
  bool stats_no_repeat = false;
  std::uint64_t stats_seed = 0;
  std::uint64_t stats_budget = kDefaultEnumerationBudget;
  std::string stats_out = "-";
  stats->add_option("--scenes", stats_scenes, "Scenes to sample")->check(CLI::PositiveNumber);
  stats->add_option("--k", stats_k, "Max interaction order")->check(CLI::NonNegativeNumber);
  stats->add_flag("--no-repeat", stats_no_repeat, "Skip consecutive repeated objects");
  stats->add_option("--seed", stats_seed, "Random seed");
  stats->add_option("--budget", stats_budget, "Enumeration budget cap");
  stats->add_option("--out", stats_out, "Output CSV path ('-' = stdout)");
  add_canyon_flags(stats, stats_params);

  // ---- train ----
  auto* train = app.add_subcommand("train", "Train the flow-network path sampler");
  TrainConfig tc;
  std::string train_prefix = "run";
  std::string replay_mode = "weighted";
  double target_accuracy = -1.0, target_hit_rate = -1.0;
  bool no_buffer = false, no_mask = false;
  bool quiet = false;
  train->add_option("--k", tc.k, "Interaction order")->check(CLI::PositiveNumber);
  train->add_option("--d", tc.d, "Embedding size")->check(CLI::PositiveNumber);
  train->add_option("--batch", tc.batch, "Batch size B")->check(CLI::PositiveNumber);
  train->add_option("--alpha", tc.alpha, "Replay weight")->check(CLI::Range(0.0, 1.0));
  train->add_option("--epsilon", tc.epsilon, "Uniform exploration probability")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--lr", tc.lr, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--iterations", tc.iterations, "Training iterations")
      ->check(CLI::PositiveNumber);
  train->add_option("--val-every", tc.val_every, "Validation cadence");
  train->add_option("--val-scenes", tc.val_scenes, "Validation scene count");
  train->add_option("--m-val", tc.m_val, "Validation samples per scene M");
  train->add_flag("--symmetry", tc.symmetry_augment, "Augment with reversed candidates");
  train->add_flag("--no-buffer", no_buffer, "Disable the replay buffer");
  train->add_option("--buffer-capacity", tc.buffer_capacity, "Replay buffer capacity");
  train->add_flag("--no-mask", no_mask, "Disable action masking");
  train->add_flag("--distance-weights", tc.use_distance_weights,
                  "Weight sampling by inverse squared distance");
  train->add_option("--replay-mode", replay_mode, "weighted|probability");
  train->add_option("--seed", tc.seed, "Random seed");
  train->add_option("--budget", tc.enumeration_budget, "Validation enumeration budget");
  train->add_option("--out-prefix", train_prefix, "Prefix for metrics CSV and checkpoint");
  train->add_option("--target-accuracy", target_accuracy,
                    "Stop once a validation reaches this accuracy (with --target-hit-rate)");
  train->add_option("--target-hit-rate", target_hit_rate,
                    "Stop once a validation reaches this hit rate (with --target-accuracy)");
  train->add_flag("--quiet", quiet, "Suppress progress lines");
  add_canyon_flags(train, tc.canyon);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy / hit-rate report for a checkpoint");
  CanyonParams eval_params;
  std::string eval_ckpt;
  int eval_scenes = 100, eval_m = 10;
  std::uint64_t eval_seed = 0, eval_budget = kDefaultEnumerationBudget;
  std::string eval_out = "-";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("--scenes", eval_scenes, "Evaluation scene count")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--m", eval_m, "Samples per scene M");
  eval_cmd->add_option("--seed", eval_seed, "Random seed");
  eval_cmd->add_option("--budget", eval_budget, "Enumeration budget cap");
  eval_cmd->add_option("--out", eval_out, "Output path ('-' = stdout)");
  add_canyon_flags(eval_cmd, eval_params);

  // ---- coverage ----
  auto* cov = app.add_subcommand("coverage", "Coverage map or residuals between two maps");
  std::string cov_scene, cov_source = "exhaustive", cov_out = "-";
  std::vector<double> cov_tx;
  std::vector<std::string> cov_ckpts;
  GridSpec cov_grid;
  int cov_kmax = 1, cov_m = 10, cov_threads = 1;
  std::uint64_t cov_seed = 0, cov_budget = kDefaultEnumerationBudget;
  bool cov_residuals = false;
  std::string cov_gt, cov_pred;
  cov->add_option("--scene", cov_scene, "Scene OBJ file (uses its '# tx' unless --tx)");
  cov->add_option("--tx", cov_tx, "TX position override: x y z")->expected(3);
  cov->add_option("--source", cov_source, "exhaustive|model");
  cov->add_option("--checkpoints", cov_ckpts, "Checkpoints for K=1..k-max (model source)")
      ->delimiter(',');
  cov->add_option("--k-max", cov_kmax, "Max interaction order")->check(CLI::NonNegativeNumber);
  cov->add_option("--m", cov_m, "Model samples per order per cell");
  cov->add_option("--xmin", cov_grid.x_min, "Grid x min");
  cov->add_option("--xmax", cov_grid.x_max, "Grid x max");
  cov->add_option("--ymin", cov_grid.y_min, "Grid y min");
  cov->add_option("--ymax", cov_grid.y_max, "Grid y max");
  cov->add_option("--cell", cov_grid.cell_size, "Cell size in meters");
  cov->add_option("--height", cov_grid.height, "RX plane height");
  cov->add_option("--seed", cov_seed, "Random seed");
  cov->add_option("--budget", cov_budget, "Enumeration budget cap");
  cov->add_option("--threads", cov_threads, "Worker threads over grid cells");
  cov->add_flag("--residuals", cov_residuals, "Compute residual maps from two coverage CSVs");
  cov->add_option("--gt", cov_gt, "Ground-truth coverage CSV (--residuals)");
  cov->add_option("--pred", cov_pred, "Predicted coverage CSV (--residuals)");
  cov->add_option("--out", cov_out, "Output CSV path ('-' = stdout)");

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "Exhaustive vs sampled timing benchmark");
  CanyonParams bench_params;
  std::vector<int> bench_n{100}, bench_k{1}, bench_m{10};
  std::vector<std::string> bench_ckpts;
  int bench_repeats = 5;
  std::uint64_t bench_seed = 0, bench_budget = kDefaultEnumerationBudget;
  bool bench_no_exhaustive = false;
  std::string bench_out = "-";
  bench->add_option("--n", bench_n, "Target triangle counts")->delimiter(',');
  bench->add_option("--k", bench_k, "Interaction orders")->delimiter(',');
  bench->add_option("--m", bench_m, "Sample counts M")->delimiter(',');
  bench->add_option("--checkpoints", bench_ckpts, "Checkpoints matching --k order")
      ->delimiter(',');
  bench->add_option("--repeats", bench_repeats, "Timing repetitions")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Random seed");
  bench->add_option("--budget", bench_budget, "Enumeration budget cap");
  bench->add_flag("--no-exhaustive", bench_no_exhaustive, "Skip the exhaustive baseline");
  bench->add_option("--out", bench_out, "Output CSV path ('-' = stdout)");
  add_canyon_flags(bench, bench_params);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    gen_params.check();
    Rng root = Rng::seeded(gen_seed);
    for (int i = 0; i < gen_n; ++i) {
      Rng rng = root.derive(0x9e4eULL, static_cast<std::uint64_t>(i));
      const Scene scene = generate_canyon(gen_params, rng, gen_reject_inside);
      std::ostringstream name;
      name << gen_out << "_" << i << ".obj";
      write_scene(scene, name.str());
      std::cout << name.str() << " triangles=" << scene.object_count() << "\n";
    }
    return 0;
  }

  if (stats->parsed()) {
    stats_params.check();
    const SceneStats s =
        scene_stats(stats_params, stats_scenes, stats_k, stats_no_repeat, stats_seed, stats_budget);
    write_text(stats_out, scene_stats_csv(s, cmdline));
    return 0;
  }

  if (train->parsed()) {
    tc.use_buffer = !no_buffer;
    tc.use_mask = !no_mask;
    if (replay_mode == "weighted") {
      tc.replay_mode = ReplayMode::Weighted;
    } else if (replay_mode == "probability") {
      tc.replay_mode = ReplayMode::Probability;
    } else {
      throw BadFlag("--replay-mode must be 'weighted' or 'probability'");
    }
    tc.canyon.check();
    EarlyStop early;
    if (target_accuracy >= 0.0 || target_hit_rate >= 0.0) {
      early.min_accuracy = std::max(target_accuracy, 0.0);
      early.min_hit_rate = std::max(target_hit_rate, 0.0);
    }
    const std::string metrics_path = train_prefix + "_metrics.csv";
    const std::string ckpt_path = train_prefix + "_model.ckpt";
    const TrainArtifacts artifacts = run_training(tc, metrics_path, ckpt_path, cmdline, early,
                                                  quiet ? nullptr : &std::cerr);
    std::cout << "iterations," << artifacts.stopped_at << "\n";
    std::cout << "val_accuracy," << fmt_g17(artifacts.final_score.accuracy) << "\n";
    std::cout << "val_hit_rate," << fmt_g17(artifacts.final_score.hit_rate) << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    if (eval_m <= 0) throw BadFlag("--m must be a positive sample count");
    eval_params.check();
    const Checkpoint ckpt = load_checkpoint(eval_ckpt);
    Rng root = Rng::seeded(eval_seed);
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(eval_scenes));
    for (int i = 0; i < eval_scenes; ++i) {
      Rng rng = root.derive(0xe7a1ULL, static_cast<std::uint64_t>(i));
      scenes.push_back(generate_nonempty_canyon(eval_params, rng, /*reject_tx_rx_inside=*/true));
    }
    const ValidationScore score =
        validate(ckpt.model, scenes, eval_m, hash_combine(eval_seed, 0xe7a1ULL), eval_budget);
    std::ostringstream out;
    out << "# cmdline: " << cmdline << "\n";
    out << "metric,value\n";
    out << "accuracy," << fmt_g17(score.accuracy) << "\n";
    out << "hit_rate," << fmt_g17(score.hit_rate) << "\n";
    write_text(eval_out, out.str());
    return 0;
  }

  if (cov->parsed()) {
    if (cov_residuals) {
      if (cov_gt.empty() || cov_pred.empty()) {
        throw BadFlag("--residuals requires --gt and --pred coverage CSVs");
      }
      const CoverageGrid gt = coverage_from_csv(read_text(cov_gt));
      const CoverageGrid pred = coverage_from_csv(read_text(cov_pred));
      const ResidualMaps maps = residual_maps(gt, pred);
      write_text(cov_out, residuals_csv(maps, cmdline));
      return 0;
    }
    if (cov_scene.empty()) throw BadFlag("coverage requires --scene (or --residuals)");
    if (cov_grid.cell_size <= 0.0) throw BadFlag("--cell must be positive");
    if (cov_grid.x_max <= cov_grid.x_min || cov_grid.y_max <= cov_grid.y_min) {
      throw BadFlag("grid extents are empty or inverted");
    }
    const Scene scene = read_scene(cov_scene);
    Vec3 tx = scene.tx;
    if (!cov_tx.empty()) tx = Vec3{cov_tx[0], cov_tx[1], cov_tx[2]};

    CoverageOptions opts;
    opts.k_max = cov_kmax;
    opts.m = cov_m;
    opts.seed = cov_seed;
    opts.budget = cov_budget;
    opts.threads = cov_threads;
    std::vector<std::unique_ptr<Checkpoint>> owned;
    if (cov_source == "model") {
      opts.source = CoverageSource::Model;
      if (static_cast<int>(cov_ckpts.size()) != cov_kmax) {
        throw BadFlag("--checkpoints must list exactly k-max checkpoints (K=1..k-max)");
      }
      for (int k = 1; k <= cov_kmax; ++k) {
        owned.push_back(std::make_unique<Checkpoint>(
            load_checkpoint(cov_ckpts[static_cast<std::size_t>(k - 1)])));
        if (owned.back()->model.cfg.k != k) {
          throw BadFlag("checkpoint " + cov_ckpts[static_cast<std::size_t>(k - 1)] +
                        " was trained for K=" + std::to_string(owned.back()->model.cfg.k) +
                        ", expected K=" + std::to_string(k));
        }
        opts.models[k] = &owned.back()->model;
      }
    } else if (cov_source == "exhaustive") {
      opts.source = CoverageSource::Exhaustive;
    } else {
      throw BadFlag("--source must be 'exhaustive' or 'model'");
    }

    const CoverageGrid grid = coverage_map(scene.triangles, tx, cov_grid, opts);
    write_text(cov_out, coverage_csv(grid, cmdline));
    return 0;
  }

  if (bench->parsed()) {
    bench_params.check();
    if (!bench_ckpts.empty() && bench_ckpts.size() != bench_k.size()) {
      throw BadFlag("--checkpoints must match the --k list");
    }
    std::vector<std::unique_ptr<Checkpoint>> owned;
    std::map<int, const FlowModel*> models;
    for (std::size_t i = 0; i < bench_ckpts.size(); ++i) {
      owned.push_back(std::make_unique<Checkpoint>(load_checkpoint(bench_ckpts[i])));
      if (owned.back()->model.cfg.k != bench_k[i]) {
        throw BadFlag("checkpoint " + bench_ckpts[i] + " was trained for K=" +
                      std::to_string(owned.back()->model.cfg.k) + ", expected K=" +
                      std::to_string(bench_k[i]));
      }
      models[bench_k[i]] = &owned.back()->model;
    }
    const auto rows = run_benchmark(bench_params, bench_n, bench_k, bench_m, bench_repeats,
                                    models, bench_seed, bench_budget, !bench_no_exhaustive);
    write_text(bench_out, benchmark_csv(rows, cmdline));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const raypath::BadFlag& e) {
    std::cerr << "flag error: " << e.what() << "\n";
    return 2;
  } catch (const raypath::BudgetExceeded& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return 3;
  } catch (const raypath::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const raypath::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
