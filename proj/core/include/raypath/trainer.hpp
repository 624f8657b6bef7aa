#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "raypath/nn.hpp"
#include "raypath/sampler.hpp"
#include "raypath/scenes.hpp"

namespace raypath {

struct ReplayEntry {
  Scene scene;
  PathCandidate candidate;
};

// FIFO store of (scene, valid path) pairs; sampling is uniform with
// replacement. Every stored candidate must have reward 1 against its scene;
// with revalidation enabled (default in debug builds) push() checks this and
// throws PushInvalid.
class ReplayBuffer {
 public:
#ifdef NDEBUG
  static constexpr bool kRevalidateDefault = false;
#else
  static constexpr bool kRevalidateDefault = true;
#endif

  explicit ReplayBuffer(std::size_t capacity = 10000, bool revalidate_on_push = kRevalidateDefault)
      : capacity_(capacity), revalidate_(revalidate_on_push) {}

  void push(Scene scene, PathCandidate candidate);
  std::vector<const ReplayEntry*> sample(std::size_t n, Rng& rng) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<ReplayEntry>& entries() const { return entries_; }

  // Revalidates up to `count` uniformly drawn entries; throws PushInvalid if
  // any stored pair no longer has reward 1.
  void spot_check(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  bool revalidate_;
  std::deque<ReplayEntry> entries_;
};

enum class ReplayMode {
  Weighted,     // fresh batch + replay batch, alpha-weighted loss
  Probability,  // whole batch from the buffer with probability alpha
};

struct TrainConfig {
  int k = 1;
  int d = 128;
  int batch = 64;          // B
  double alpha = 0.5;      // replay weight
  double epsilon = 0.1;    // exploratory policy
  double lr = 1e-4;
  int iterations = 1000;
  int val_every = 1000;
  int val_scenes = 100;
  int m_val = 10;          // M samples per validation scene
  bool symmetry_augment = false;
  bool use_buffer = true;
  std::size_t buffer_capacity = 10000;
  bool use_mask = true;
  bool use_distance_weights = false;
  ReplayMode replay_mode = ReplayMode::Weighted;
  std::uint64_t seed = 0;
  std::uint64_t enumeration_budget = kDefaultEnumerationBudget;
  CanyonParams canyon;
};

struct TrainMetrics {
  int iteration = 0;
  double loss_new = 0.0;
  double loss_replay = 0.0;
  double batch_accuracy = 0.0;
  std::size_t buffer_size = 0;
  std::optional<double> val_accuracy;
  std::optional<double> val_hit_rate;
};

struct ValidationScore {
  double accuracy = 0.0;
  double hit_rate = 0.0;
};

// Greedy-policy validation (epsilon = 0, mask on, weights off): accuracy is
// the valid fraction of m samples per scene; hit rate is the discovered
// fraction of each scene's exhaustive valid-path set, averaged over scenes
// with at least one valid path.
ValidationScore validate(const FlowModel& model, std::span<const Scene> scenes, int m,
                         std::uint64_t seed,
                         std::uint64_t budget = kDefaultEnumerationBudget);
ValidationScore validate(const FlowModel& model, std::span<const Scene> scenes,
                         std::span<const std::vector<PathCandidate>> ground_truth, int m,
                         std::uint64_t seed);

// TX/RX swap plus index reversal; reward is preserved by reciprocity.
std::pair<Scene, PathCandidate> reverse_candidate(const Scene& scene,
                                                  const PathCandidate& candidate);

// Accumulates d(sum of per-trajectory flow-matching losses)/d(params),
// scaled by `weight`, for trajectories sharing one scene. Gradients flow
// through the flow head, state encoder, scene encoder, and object encoder.
void accumulate_gradients(const FlowModel& model, const Scene& scene,
                          std::span<const Trajectory> group, double weight,
                          FlowModelGrads& grads);

// Fused replay step: recomputes the stored candidate's flows and masks under
// the current parameters (one cached forward per visited state), accumulates
// the weighted gradients, and returns the pair's flow-matching loss.
double replay_gradients(const FlowModel& model, const Scene& scene,
                        const PathCandidate& candidate, bool use_mask, int reward, double weight,
                        FlowModelGrads& grads);

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  TrainMetrics train_iteration();
  ValidationScore validate_now();

  const TrainConfig& config() const { return cfg_; }
  const FlowModel& model() const { return model_; }
  FlowModel& model() { return model_; }
  const AdamState& opt_state() const { return opt_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const std::vector<Scene>& validation_scenes();
  int iteration() const { return iteration_; }

 private:
  TrainMetrics weighted_iteration(int it);
  TrainMetrics probability_iteration(int it);
  void ensure_validation_set();
  void insert_successes(const Scene& scene, std::span<const Trajectory> fresh);

  TrainConfig cfg_;
  Rng root_;
  FlowModel model_;
  AdamState opt_;
  ReplayBuffer buffer_;
  int iteration_ = 0;
  std::vector<Scene> val_scenes_;
  std::vector<std::vector<PathCandidate>> val_gt_;
  bool val_ready_ = false;
};

struct EarlyStop {
  double min_accuracy = -1.0;  // stop once a validation meets both bounds
  double min_hit_rate = -1.0;  // negative disables the bound
};

struct TrainArtifacts {
  std::vector<TrainMetrics> history;
  ValidationScore final_score;
  int stopped_at = 0;  // iterations actually run
};

// Full training driver: runs iterations, validates every val_every, writes
// the metrics CSV and periodic checkpoints, returns the final validation.
TrainArtifacts run_training(const TrainConfig& cfg, const std::string& metrics_path,
                            const std::string& checkpoint_path,
                            const std::string& cmdline_comment = "",
                            const EarlyStop& early = {}, std::ostream* log = nullptr);

std::string metrics_csv_header();
std::string metrics_csv_row(const TrainMetrics& m);

}  // namespace raypath
