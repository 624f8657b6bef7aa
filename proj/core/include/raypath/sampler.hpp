#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "raypath/nn.hpp"
#include "raypath/rng.hpp"
#include "raypath/tracer.hpp"

namespace raypath {

struct SampleOptions {
  double epsilon = 0.1;             // probability of a uniform exploratory step
  bool use_mask = true;             // geometric action masking
  bool use_distance_weights = false;  // multiply flows by d^-2 weights before sampling
};

using Mask = std::vector<std::uint8_t>;  // 1 = action allowed

// Geometric action mask for the next selection. Rules:
//  - the previously chosen object is masked (no consecutive repeats);
//  - objects whose centroid lies strictly behind the previous reflecting
//    plane (on the opposite side from where the ray came) are masked.
// `last_point` is the approximate position the ray departed from before
// reaching the previously chosen object: tx when exactly one object is
// chosen, the previous-previous centroid otherwise, nothing at step 0.
// At step 0 every object is allowed.
Mask action_mask(const PreparedScene& ps, const PathCandidate& partial,
                 const std::optional<Vec3>& last_point);
Mask action_mask(const Scene& scene, const PathCandidate& partial,
                 const std::optional<Vec3>& last_point);

// Inverse-square distance weights over object centroids, normalized to sum
// to 1. `last_point` is the current approximate ray position (tx at step 0);
// on the last step the distance to the receiver is added. Distances are
// floored at 1e-6 * scene diameter.
std::vector<double> distance_weights(const PreparedScene& ps, const Vec3& last_point,
                                     const Vec3& rx, bool is_last_step);
std::vector<double> distance_weights(const Scene& scene, const Vec3& last_point, const Vec3& rx,
                                     bool is_last_step);

struct ActionChoice {
  int index = -1;
  bool used_uniform = false;   // epsilon branch fired
  bool mask_fallback = false;  // all actions were masked; mask lifted
};

// With probability epsilon: uniform over unmasked actions. Otherwise sample
// proportionally to flows (times weights when given) over unmasked actions.
// An all-false mask is lifted to uniform-over-all with the fallback flag set.
ActionChoice sample_action(const std::vector<double>& flows, const Mask& mask,
                           const std::vector<double>* weights, double epsilon, Rng& rng);

struct Trajectory {
  PathCandidate candidate;
  std::vector<std::vector<double>> step_flows;  // K vectors of N flows (all objects)
  std::vector<Mask> step_masks;                 // masks used at each step
  std::vector<std::int32_t> chosen;             // K selected indices
  int reward = 0;
  bool mask_fallback = false;
  bool used_uniform_any = false;
  std::optional<RayPath> path;  // present when reward == 1
};

// Per-scene precomputation shared by every trajectory sampled on the scene:
// canonical transform, object/scene embeddings, and the root-state flows
// (identical across trajectories since the empty candidate is unique).
struct EncodedScene {
  const Scene* scene = nullptr;
  PreparedScene prepared;
  Tensor canonical_inputs;  // N x 9
  SceneEncoding enc;
  std::vector<double> root_flows;

  EncodedScene(const FlowModel& model, const Scene& s);
};

// Memoizes per-state outgoing flows across trajectories sampled on one
// encoded scene (states repeat heavily within a batch). Entries are only
// valid for one (model, scene) pair.
struct StateFlowCache {
  std::map<std::vector<std::int32_t>, std::vector<double>> flows;
};

Trajectory sample_trajectory(const FlowModel& model, const EncodedScene& encoded,
                             const SampleOptions& opts, Rng& rng,
                             StateFlowCache* cache = nullptr);
Trajectory sample_trajectory(const FlowModel& model, const Scene& scene,
                             const SampleOptions& opts, Rng& rng);

struct FlowMatchingLoss {
  double loss = 0.0;
  std::vector<double> terms;  // squared residual per visited state p_1..p_K
};

// Flow-matching objective over the trajectory's visited states: for interior
// states the squared gap between the incoming edge flow and the sum of
// outgoing flows over allowed children; for the terminal state the squared
// gap between the incoming edge flow and the reward. The allowed-child set
// is the recorded mask plus the traversed action.
FlowMatchingLoss flow_matching_loss(const Trajectory& trajectory);

// Flows and masks for a fixed (scene, complete candidate) pair under the
// current model, as needed to replay stored experiences: identical formula
// to a freshly sampled trajectory, with the reward pinned by the caller.
Trajectory replay_trajectory(const FlowModel& model, const EncodedScene& encoded,
                             const PathCandidate& candidate, bool use_mask, int reward);

}  // namespace raypath
