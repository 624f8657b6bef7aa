#include "raypath/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "raypath/errors.hpp"
#include "raypath/format.hpp"

namespace raypath {

namespace {

// stream tags for substream derivation
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamScene = 2;
constexpr std::uint64_t kStreamSample = 3;
constexpr std::uint64_t kStreamReplay = 4;
constexpr std::uint64_t kStreamValScene = 5;
constexpr std::uint64_t kStreamValSample = 6;
constexpr std::uint64_t kStreamSpotCheck = 7;
constexpr std::uint64_t kStreamMode = 8;

void check_flows_finite(const Trajectory& traj) {
  for (const auto& flows : traj.step_flows) {
    for (double f : flows) {
      if (!(std::isfinite(f) && f > 0.0)) {
        throw Error("training produced a non-finite or non-positive flow");
      }
    }
  }
}

// Signed residuals of the flow-matching terms, one per visited state
// p_1..p_K (same quantities flow_matching_loss squares).
std::vector<double> signed_residuals(const Trajectory& traj) {
  const int k_order = traj.candidate.order();
  std::vector<double> res;
  res.reserve(static_cast<std::size_t>(k_order));
  for (int k = 1; k <= k_order; ++k) {
    const double edge =
        traj.step_flows[static_cast<std::size_t>(k - 1)]
                       [static_cast<std::size_t>(traj.chosen[static_cast<std::size_t>(k - 1)])];
    if (k < k_order) {
      const auto& flows = traj.step_flows[static_cast<std::size_t>(k)];
      const auto& mask = traj.step_masks[static_cast<std::size_t>(k)];
      const auto chosen = static_cast<std::size_t>(traj.chosen[static_cast<std::size_t>(k)]);
      double child_sum = 0.0;
      for (std::size_t i = 0; i < flows.size(); ++i) {
        if (mask[i] || i == chosen) child_sum += flows[i];
      }
      res.push_back(edge - child_sum);
    } else {
      res.push_back(edge - static_cast<double>(traj.reward));
    }
  }
  return res;
}

double mean_loss(std::span<const Trajectory> group) {
  if (group.empty()) return 0.0;
  double total = 0.0;
  for (const Trajectory& t : group) total += flow_matching_loss(t).loss;
  return total / static_cast<double>(group.size());
}

}  // namespace

void ReplayBuffer::push(Scene scene, PathCandidate candidate) {
  if (revalidate_) {
    if (validate(scene, candidate).reward != 1) {
      throw PushInvalid("replay buffer push: candidate does not revalidate to reward 1");
    }
  }
  entries_.push_back(ReplayEntry{std::move(scene), std::move(candidate)});
  while (entries_.size() > capacity_) entries_.pop_front();
}

std::vector<const ReplayEntry*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<const ReplayEntry*> out;
  if (entries_.empty()) return out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(&entries_[rng.uniform_index(entries_.size())]);
  }
  return out;
}

void ReplayBuffer::spot_check(std::size_t count, Rng& rng) const {
  for (std::size_t i = 0; i < count && !entries_.empty(); ++i) {
    const ReplayEntry& e = entries_[rng.uniform_index(entries_.size())];
    if (validate(e.scene, e.candidate).reward != 1) {
      throw PushInvalid("replay buffer spot check: stored pair fails revalidation");
    }
  }
}

std::pair<Scene, PathCandidate> reverse_candidate(const Scene& scene,
                                                  const PathCandidate& candidate) {
  Scene swapped = scene;
  std::swap(swapped.tx, swapped.rx);
  PathCandidate reversed = candidate;
  std::reverse(reversed.sequence.begin(), reversed.sequence.end());
  return {std::move(swapped), std::move(reversed)};
}

ValidationScore validate(const FlowModel& model, std::span<const Scene> scenes, int m,
                         std::uint64_t seed, std::uint64_t budget) {
  std::vector<std::vector<PathCandidate>> gt;
  gt.reserve(scenes.size());
  for (const Scene& s : scenes) {
    gt.push_back(enumerate_valid_paths(s, model.cfg.k, /*no_repeat=*/false, budget));
  }
  return validate(model, scenes, gt, m, seed);
}

ValidationScore validate(const FlowModel& model, std::span<const Scene> scenes,
                         std::span<const std::vector<PathCandidate>> ground_truth, int m,
                         std::uint64_t seed) {
  SampleOptions opts;
  opts.epsilon = 0.0;
  opts.use_mask = true;
  opts.use_distance_weights = false;

  Rng root = Rng::seeded(seed);
  std::size_t valid_samples = 0;
  double hit_sum = 0.0;
  std::size_t hit_scenes = 0;

  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const EncodedScene encoded(model, scenes[si]);
    StateFlowCache flow_cache;
    std::unordered_set<PathCandidate, PathCandidateHash> found;
    for (int j = 0; j < m; ++j) {
      Rng rng = root.derive(kStreamValSample, si, static_cast<std::uint64_t>(j));
      Trajectory traj = sample_trajectory(model, encoded, opts, rng, &flow_cache);
      if (traj.reward == 1) {
        ++valid_samples;
        found.insert(traj.candidate);
      }
    }
    const auto& gt = ground_truth[si];
    if (!gt.empty()) {
      std::size_t hits = 0;
      for (const PathCandidate& c : gt) hits += found.count(c);
      hit_sum += static_cast<double>(hits) / static_cast<double>(gt.size());
      ++hit_scenes;
    }
  }

  ValidationScore score;
  const std::size_t total = scenes.size() * static_cast<std::size_t>(m);
  score.accuracy = total > 0 ? static_cast<double>(valid_samples) / static_cast<double>(total) : 0.0;
  score.hit_rate = hit_scenes > 0 ? hit_sum / static_cast<double>(hit_scenes) : 0.0;
  return score;
}

namespace {

// One visited non-terminal state: forward caches plus the accumulated
// d(loss)/d(flow) rows awaiting the backward sweep. `rows` lists the object
// indices actually evaluated (empty = all objects, identity order); flows
// and dflow are indexed by position in `rows`.
struct StateNode {
  MlpCache state_cache;
  MlpCache head_cache;
  std::vector<double> flows;
  std::vector<double> dflow;
  std::vector<std::int32_t> prefix;
  std::vector<std::int32_t> rows;
};

// Cached forward pass over one scene plus the shared backward sweep through
// flow head, state encoder, scene mean, and object encoder.
class SceneBackward {
 public:
  SceneBackward(const FlowModel& model, const Scene& scene)
      : model_(model),
        canonical_(canonical_object_inputs(scene)),
        enc_(encode_scene(model, canonical_, &enc_cache_)),
        n_(canonical_.rows()) {}

  std::size_t object_count() const { return n_; }

  StateNode& node(const std::vector<std::int32_t>& prefix) {
    return node_impl(prefix, {});
  }

  // Evaluates the flow head only for `rows`; valid when the loss touches no
  // other flow of this state (e.g. the root state, whose flows enter the
  // loss solely through the traversed edge).
  StateNode& node_subset(const std::vector<std::int32_t>& prefix,
                         std::vector<std::int32_t> rows) {
    return node_impl(prefix, std::move(rows));
  }

  void backward(FlowModelGrads& grads) {
    const auto d = static_cast<std::size_t>(model_.cfg.d);
    const auto sd = static_cast<std::size_t>(model_.cfg.state_dim());
    Tensor d_embeddings = Tensor::zeros({n_, d});
    Tensor d_scene = Tensor::zeros({1, d});

    for (auto& [prefix, node] : nodes_) {
      bool any = false;
      for (double g : node.dflow) {
        if (g != 0.0) {
          any = true;
          break;
        }
      }
      if (!any) continue;

      const std::size_t rows = node.flows.size();
      Tensor dz = Tensor::zeros({rows, 1});
      for (std::size_t i = 0; i < rows; ++i) dz.data[i] = node.dflow[i] * node.flows[i];

      const Tensor d_input = mlp_backward(model_.flow_head, node.head_cache, dz, grads.flow_head);
      Tensor d_state = Tensor::zeros({1, sd});
      for (std::size_t i = 0; i < rows; ++i) {
        const double* r = d_input.row(i);
        const auto obj =
            node.rows.empty() ? i : static_cast<std::size_t>(node.rows[i]);
        for (std::size_t c = 0; c < d; ++c) d_embeddings.at(obj, c) += r[c];
        for (std::size_t c = 0; c < sd; ++c) d_state.data[c] += r[d + c];
        for (std::size_t c = 0; c < d; ++c) d_scene.data[c] += r[d + sd + c];
      }

      const Tensor d_state_in =
          mlp_backward(model_.state_encoder, node.state_cache, d_state, grads.state_encoder);
      for (std::size_t slot = 0; slot < prefix.size(); ++slot) {
        const auto obj = static_cast<std::size_t>(prefix[slot]);
        const double* src = d_state_in.data.data() + slot * d;
        for (std::size_t c = 0; c < d; ++c) d_embeddings.at(obj, c) += src[c];
      }
    }

    const Tensor d_mean =
        mlp_backward(model_.scene_encoder, enc_cache_.scene_cache, d_scene, grads.scene_encoder);
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t c = 0; c < d; ++c) d_embeddings.at(i, c) += d_mean.data[c] * inv_n;
    }
    mlp_backward(model_.object_encoder, enc_cache_.object_cache, d_embeddings,
                 grads.object_encoder);
  }

 private:
  StateNode& node_impl(const std::vector<std::int32_t>& prefix, std::vector<std::int32_t> rows) {
    auto it = nodes_.find(prefix);
    if (it != nodes_.end()) return it->second;
    StateNode node;
    node.prefix = prefix;
    node.rows = std::move(rows);
    PathCandidate partial = PathCandidate::empty(model_.cfg.k);
    std::copy(prefix.begin(), prefix.end(), partial.sequence.begin());
    const Tensor state = encode_state(model_, partial, enc_.object_embeddings, &node.state_cache);
    if (node.rows.empty()) {
      node.flows = compute_flows(model_, enc_.object_embeddings, state, enc_.scene_embedding,
                                 &node.head_cache);
    } else {
      const auto d = static_cast<std::size_t>(model_.cfg.d);
      Tensor sub = Tensor::zeros({node.rows.size(), d});
      for (std::size_t r = 0; r < node.rows.size(); ++r) {
        const double* src = enc_.object_embeddings.row(static_cast<std::size_t>(node.rows[r]));
        std::copy(src, src + d, sub.row(r));
      }
      node.flows = compute_flows(model_, sub, state, enc_.scene_embedding, &node.head_cache);
    }
    node.dflow.assign(node.flows.size(), 0.0);
    return nodes_.emplace(prefix, std::move(node)).first->second;
  }

  const FlowModel& model_;
  EncodeCache enc_cache_;
  Tensor canonical_;
  SceneEncoding enc_;
  std::size_t n_;
  std::map<std::vector<std::int32_t>, StateNode> nodes_;
};

}  // namespace

void accumulate_gradients(const FlowModel& model, const Scene& scene,
                          std::span<const Trajectory> group, double weight,
                          FlowModelGrads& grads) {
  if (group.empty() || weight == 0.0) return;
  const int k_order = model.cfg.k;
  SceneBackward ctx(model, scene);
  const std::size_t n = ctx.object_count();

  // Scatter d(loss)/d(flow) into the visited states.
  for (const Trajectory& traj : group) {
    const std::vector<double> res = signed_residuals(traj);
    for (int k = 1; k <= k_order; ++k) {
      const double e = res[static_cast<std::size_t>(k - 1)];
      if (e == 0.0) continue;
      const std::vector<std::int32_t> parent_prefix(traj.chosen.begin(),
                                                    traj.chosen.begin() + (k - 1));
      StateNode& parent = ctx.node(parent_prefix);
      parent.dflow[static_cast<std::size_t>(traj.chosen[static_cast<std::size_t>(k - 1)])] +=
          weight * 2.0 * e;
      if (k < k_order) {
        const std::vector<std::int32_t> child_prefix(traj.chosen.begin(),
                                                     traj.chosen.begin() + k);
        StateNode& child = ctx.node(child_prefix);
        const auto& mask = traj.step_masks[static_cast<std::size_t>(k)];
        const auto chosen = static_cast<std::size_t>(traj.chosen[static_cast<std::size_t>(k)]);
        for (std::size_t i = 0; i < n; ++i) {
          if (mask[i] || i == chosen) child.dflow[i] -= weight * 2.0 * e;
        }
      }
    }
  }
  ctx.backward(grads);
}

double replay_gradients(const FlowModel& model, const Scene& scene,
                        const PathCandidate& candidate, bool use_mask, int reward, double weight,
                        FlowModelGrads& grads) {
  if (!candidate.complete()) {
    throw IncompleteTrajectory("replay_gradients: candidate must be complete");
  }
  const int k_order = model.cfg.k;
  SceneBackward ctx(model, scene);
  const std::size_t n = ctx.object_count();
  const PreparedScene ps(scene);

  // Visited states are exactly the candidate's prefixes. The root state's
  // flows enter the loss only through the traversed edge, so the flow head
  // runs on that single row there; interior states need every child flow.
  std::vector<StateNode*> visited;
  std::vector<Mask> masks;
  for (int k = 0; k < k_order; ++k) {
    const std::vector<std::int32_t> prefix(candidate.sequence.begin(),
                                           candidate.sequence.begin() + k);
    StateNode& node = k == 0 ? ctx.node_subset(prefix, {candidate.sequence[0]})
                             : ctx.node(prefix);
    for (double f : node.flows) {
      if (!(std::isfinite(f) && f > 0.0)) {
        throw Error("training produced a non-finite or non-positive flow");
      }
    }
    visited.push_back(&node);
    Mask mask(n, 1);
    if (use_mask && k > 0) {
      PathCandidate partial = PathCandidate::empty(k_order);
      std::copy(prefix.begin(), prefix.end(), partial.sequence.begin());
      const Vec3 incoming =
          k == 1 ? scene.tx
                 : ps.tris[static_cast<std::size_t>(prefix[static_cast<std::size_t>(k - 2)])]
                       .centroid;
      mask = action_mask(ps, partial, std::optional<Vec3>(incoming));
    }
    masks.push_back(std::move(mask));
  }

  // position of the traversed edge within a node's evaluated rows
  auto edge_pos = [&](int k) {
    const auto action = static_cast<std::size_t>(candidate.sequence[static_cast<std::size_t>(k)]);
    return visited[static_cast<std::size_t>(k)]->rows.empty() ? action : std::size_t{0};
  };

  double loss = 0.0;
  for (int k = 1; k <= k_order; ++k) {
    const double edge = visited[static_cast<std::size_t>(k - 1)]->flows[edge_pos(k - 1)];
    double residual;
    if (k < k_order) {
      const auto chosen = static_cast<std::size_t>(candidate.sequence[static_cast<std::size_t>(k)]);
      const auto& flows = visited[static_cast<std::size_t>(k)]->flows;
      const auto& mask = masks[static_cast<std::size_t>(k)];
      double child_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] || i == chosen) child_sum += flows[i];
      }
      residual = edge - child_sum;
      if (weight != 0.0 && residual != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          if (mask[i] || i == chosen) {
            visited[static_cast<std::size_t>(k)]->dflow[i] -= weight * 2.0 * residual;
          }
        }
      }
    } else {
      residual = edge - static_cast<double>(reward);
    }
    if (weight != 0.0 && residual != 0.0) {
      visited[static_cast<std::size_t>(k - 1)]->dflow[edge_pos(k - 1)] += weight * 2.0 * residual;
    }
    loss += residual * residual;
  }

  if (weight != 0.0) ctx.backward(grads);
  return loss;
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg), root_(Rng::seeded(cfg.seed)),
                                           model_([&] {
                                             ModelConfig mc;
                                             mc.d = cfg.d;
                                             mc.k = cfg.k;
                                             Rng init = Rng::seeded(cfg.seed).derive(kStreamInit);
                                             return make_flow_model(mc, init);
                                           }()),
                                           opt_(make_adam_state(model_)),
                                           buffer_(cfg.buffer_capacity) {
  cfg_.canyon.check();
}

void Trainer::ensure_validation_set() {
  if (val_ready_) return;
  val_scenes_.reserve(static_cast<std::size_t>(cfg_.val_scenes));
  for (int i = 0; i < cfg_.val_scenes; ++i) {
    Rng rng = root_.derive(kStreamValScene, static_cast<std::uint64_t>(i));
    val_scenes_.push_back(
        generate_nonempty_canyon(cfg_.canyon, rng, /*reject_tx_rx_inside=*/true));
  }
  val_gt_.reserve(val_scenes_.size());
  for (const Scene& s : val_scenes_) {
    val_gt_.push_back(
        enumerate_valid_paths(s, cfg_.k, /*no_repeat=*/false, cfg_.enumeration_budget));
  }
  val_ready_ = true;
}

const std::vector<Scene>& Trainer::validation_scenes() {
  ensure_validation_set();
  return val_scenes_;
}

ValidationScore Trainer::validate_now() {
  ensure_validation_set();
  const std::uint64_t val_seed = hash_combine(cfg_.seed, kStreamValSample);
  return validate(model_, val_scenes_, val_gt_, cfg_.m_val, val_seed);
}

void Trainer::insert_successes(const Scene& scene, std::span<const Trajectory> fresh) {
  for (const Trajectory& traj : fresh) {
    if (traj.reward != 1 || traj.mask_fallback) continue;
    buffer_.push(scene, traj.candidate);
    if (cfg_.symmetry_augment) {
      auto [swapped, reversed] = reverse_candidate(scene, traj.candidate);
      if (validate(swapped, reversed).reward == 1) {
        buffer_.push(std::move(swapped), std::move(reversed));
      }
    }
  }
}

TrainMetrics Trainer::train_iteration() {
  const int it = iteration_++;
  if (cfg_.replay_mode == ReplayMode::Probability) return probability_iteration(it);
  return weighted_iteration(it);
}

TrainMetrics Trainer::weighted_iteration(int it) {
  TrainMetrics metrics;
  metrics.iteration = it;

  // (1) fresh scene, B sampled trajectories
  Rng scene_rng = root_.derive(kStreamScene, static_cast<std::uint64_t>(it));
  const Scene scene = generate_nonempty_canyon(cfg_.canyon, scene_rng);
  const EncodedScene encoded(model_, scene);

  SampleOptions opts;
  opts.epsilon = cfg_.epsilon;
  opts.use_mask = cfg_.use_mask;
  opts.use_distance_weights = cfg_.use_distance_weights;

  std::vector<Trajectory> fresh;
  fresh.reserve(static_cast<std::size_t>(cfg_.batch));
  StateFlowCache flow_cache;
  int valid_count = 0;
  for (int b = 0; b < cfg_.batch; ++b) {
    Rng rng = root_.derive(kStreamSample, static_cast<std::uint64_t>(it),
                           static_cast<std::uint64_t>(b));
    fresh.push_back(sample_trajectory(model_, encoded, opts, rng, &flow_cache));
    check_flows_finite(fresh.back());
    valid_count += fresh.back().reward;
  }
  metrics.batch_accuracy = static_cast<double>(valid_count) / static_cast<double>(cfg_.batch);

  // symmetry augmentation: learn the reversed candidates of this iteration's
  // successes against the tx/rx-swapped scene
  std::vector<Trajectory> reversed_group;
  Scene swapped_scene;
  if (cfg_.symmetry_augment) {
    bool have_encoded = false;
    std::optional<EncodedScene> swapped_encoded;
    for (const Trajectory& traj : fresh) {
      if (traj.reward != 1 || traj.mask_fallback) continue;
      auto [swapped, rev_cand] = reverse_candidate(scene, traj.candidate);
      if (validate(swapped, rev_cand).reward != 1) continue;
      if (!have_encoded) {
        swapped_scene = std::move(swapped);
        swapped_encoded.emplace(model_, swapped_scene);
        have_encoded = true;
      }
      reversed_group.push_back(
          replay_trajectory(model_, *swapped_encoded, rev_cand, cfg_.use_mask, 1));
    }
  }

  // (2) replay batch with flows recomputed under current parameters
  const bool have_replay = cfg_.use_buffer && buffer_.size() > 0;
  std::vector<const ReplayEntry*> replay_entries;
  if (have_replay) {
    Rng replay_rng = root_.derive(kStreamReplay, static_cast<std::uint64_t>(it));
    replay_entries = buffer_.sample(static_cast<std::size_t>(cfg_.batch), replay_rng);
  }

  // (3)+(4) weighted loss and one joint optimizer step
  FlowModelGrads grads = zero_grads(model_);
  const double new_weight = have_replay ? (1.0 - cfg_.alpha) : 1.0;
  const std::size_t new_count = fresh.size() + reversed_group.size();
  if (new_weight > 0.0) {
    const double w = new_weight / static_cast<double>(new_count);
    accumulate_gradients(model_, scene, fresh, w, grads);
    if (!reversed_group.empty()) {
      accumulate_gradients(model_, swapped_scene, reversed_group, w, grads);
    }
  }

  double replay_loss_total = 0.0;
  if (have_replay) {
    const double w = cfg_.alpha / static_cast<double>(replay_entries.size());
    for (const ReplayEntry* entry : replay_entries) {
      replay_loss_total +=
          replay_gradients(model_, entry->scene, entry->candidate, cfg_.use_mask, 1, w, grads);
    }
  }

  optimizer_step(model_, grads, opt_, cfg_.lr);

  // (5)+(6) store successes (and reversals) for replay
  insert_successes(scene, fresh);

  {
    double total = 0.0;
    for (const Trajectory& t : fresh) total += flow_matching_loss(t).loss;
    for (const Trajectory& t : reversed_group) total += flow_matching_loss(t).loss;
    metrics.loss_new = total / static_cast<double>(new_count);
  }
  metrics.loss_replay =
      have_replay ? replay_loss_total / static_cast<double>(replay_entries.size()) : 0.0;
  metrics.buffer_size = buffer_.size();
  return metrics;
}

TrainMetrics Trainer::probability_iteration(int it) {
  TrainMetrics metrics;
  metrics.iteration = it;

  SampleOptions opts;
  opts.epsilon = cfg_.epsilon;
  opts.use_mask = cfg_.use_mask;
  opts.use_distance_weights = cfg_.use_distance_weights;

  Rng mode_rng = root_.derive(kStreamMode, static_cast<std::uint64_t>(it));
  const bool from_buffer =
      cfg_.use_buffer && buffer_.size() > 0 && mode_rng.uniform() < cfg_.alpha;

  FlowModelGrads grads = zero_grads(model_);
  if (from_buffer) {
    Rng replay_rng = root_.derive(kStreamReplay, static_cast<std::uint64_t>(it));
    const auto entries = buffer_.sample(static_cast<std::size_t>(cfg_.batch), replay_rng);
    const double w = 1.0 / static_cast<double>(entries.size());
    double total = 0.0;
    for (const ReplayEntry* entry : entries) {
      total += replay_gradients(model_, entry->scene, entry->candidate, cfg_.use_mask, 1, w, grads);
    }
    metrics.loss_replay = total / static_cast<double>(entries.size());
    metrics.batch_accuracy = 1.0;  // replayed candidates all carry reward 1
  } else {
    Rng scene_rng = root_.derive(kStreamScene, static_cast<std::uint64_t>(it));
    const Scene scene = generate_nonempty_canyon(cfg_.canyon, scene_rng);
    const EncodedScene encoded(model_, scene);
    std::vector<Trajectory> fresh;
    fresh.reserve(static_cast<std::size_t>(cfg_.batch));
    StateFlowCache flow_cache;
    int valid_count = 0;
    for (int b = 0; b < cfg_.batch; ++b) {
      Rng rng = root_.derive(kStreamSample, static_cast<std::uint64_t>(it),
                             static_cast<std::uint64_t>(b));
      fresh.push_back(sample_trajectory(model_, encoded, opts, rng, &flow_cache));
      check_flows_finite(fresh.back());
      valid_count += fresh.back().reward;
    }
    metrics.batch_accuracy = static_cast<double>(valid_count) / static_cast<double>(cfg_.batch);
    accumulate_gradients(model_, scene, fresh, 1.0 / static_cast<double>(fresh.size()), grads);
    metrics.loss_new = mean_loss(fresh);
    insert_successes(scene, fresh);
  }

  optimizer_step(model_, grads, opt_, cfg_.lr);
  metrics.buffer_size = buffer_.size();
  return metrics;
}

std::string metrics_csv_header() {
  return "iteration,loss_new,loss_replay,batch_accuracy,buffer_size,val_accuracy,val_hit_rate";
}

std::string metrics_csv_row(const TrainMetrics& m) {
  std::ostringstream out;
  out << m.iteration << "," << fmt_g17(m.loss_new) << "," << fmt_g17(m.loss_replay) << ","
      << fmt_g17(m.batch_accuracy) << "," << m.buffer_size << ",";
  if (m.val_accuracy) out << fmt_g17(*m.val_accuracy);
  out << ",";
  if (m.val_hit_rate) out << fmt_g17(*m.val_hit_rate);
  return out.str();
}

TrainArtifacts run_training(const TrainConfig& cfg, const std::string& metrics_path,
                            const std::string& checkpoint_path,
                            const std::string& cmdline_comment, const EarlyStop& early,
                            std::ostream* log) {
  Trainer trainer(cfg);
  TrainArtifacts artifacts;

  std::ofstream csv(metrics_path, std::ios::binary);
  if (!csv) throw IoError("cannot open " + metrics_path + " for writing");
  if (!cmdline_comment.empty()) csv << "# cmdline: " << cmdline_comment << "\n";
  csv << metrics_csv_header() << "\n";

  const bool want_stop = early.min_accuracy >= 0.0 || early.min_hit_rate >= 0.0;
  bool stopped = false;
  Rng spot_rng = Rng::seeded(cfg.seed).derive(kStreamSpotCheck);

  for (int it = 0; it < cfg.iterations; ++it) {
    TrainMetrics m = trainer.train_iteration();
    const bool val_point = cfg.val_every > 0 && (it + 1) % cfg.val_every == 0;
    if (val_point) {
      const ValidationScore score = trainer.validate_now();
      m.val_accuracy = score.accuracy;
      m.val_hit_rate = score.hit_rate;
      trainer.buffer().spot_check(16, spot_rng);
      save_checkpoint(trainer.model(), &trainer.opt_state(), checkpoint_path);
      artifacts.final_score = score;
      if (log) {
        *log << "iter " << (it + 1) << " loss_new " << m.loss_new << " acc " << score.accuracy
             << " hit " << score.hit_rate << " buffer " << m.buffer_size << "\n";
      }
      if (want_stop && score.accuracy >= early.min_accuracy &&
          score.hit_rate >= early.min_hit_rate) {
        stopped = true;
      }
    }
    csv << metrics_csv_row(m) << "\n";
    artifacts.history.push_back(std::move(m));
    artifacts.stopped_at = it + 1;
    if (stopped) break;
  }

  if (!artifacts.history.empty() && !artifacts.history.back().val_accuracy) {
    const ValidationScore score = trainer.validate_now();
    artifacts.final_score = score;
    artifacts.history.back().val_accuracy = score.accuracy;
    artifacts.history.back().val_hit_rate = score.hit_rate;
    // rewrite the final row with the closing validation attached
    csv << "# final: val_accuracy=" << fmt_g17(score.accuracy)
        << " val_hit_rate=" << fmt_g17(score.hit_rate) << "\n";
  }
  save_checkpoint(trainer.model(), &trainer.opt_state(), checkpoint_path);
  csv.close();
  if (!csv) throw IoError("failed writing " + metrics_path);
  return artifacts;
}

}  // namespace raypath
