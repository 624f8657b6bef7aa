#include "raypath/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "raypath/errors.hpp"

namespace raypath {

namespace {

// Approximate ray position after `count` selections: tx, then centroids.
Vec3 approx_position(const PreparedScene& ps, const std::vector<std::int32_t>& chosen,
                     int count) {
  if (count <= 0) return ps.scene->tx;
  return ps.tris[static_cast<std::size_t>(chosen[static_cast<std::size_t>(count - 1)])].centroid;
}

}  // namespace

Mask action_mask(const PreparedScene& ps, const PathCandidate& partial,
                 const std::optional<Vec3>& last_point) {
  const std::size_t n = ps.tris.size();
  Mask mask(n, 1);
  const int k = partial.chosen_count();
  if (k == 0) return mask;

  const auto prev = static_cast<std::size_t>(partial.sequence[static_cast<std::size_t>(k - 1)]);
  mask[prev] = 0;
  if (!last_point) return mask;

  const PreparedTriangle& plane = ps.tris[prev];
  const double sigma = dot(plane.normal, *last_point - plane.v0);
  if (sigma == 0.0) return mask;  // ray grazes the plane; no side information
  for (std::size_t i = 0; i < n; ++i) {
    if (i == prev) continue;
    const double side = dot(plane.normal, ps.tris[i].centroid - plane.v0);
    if (side * sigma < 0.0) mask[i] = 0;  // strictly behind the reflector
  }
  return mask;
}

Mask action_mask(const Scene& scene, const PathCandidate& partial,
                 const std::optional<Vec3>& last_point) {
  return action_mask(PreparedScene(scene), partial, last_point);
}

std::vector<double> distance_weights(const PreparedScene& ps, const Vec3& last_point,
                                     const Vec3& rx, bool is_last_step) {
  const std::size_t n = ps.tris.size();
  const double floor = 1e-6 * ps.diameter;
  std::vector<double> w(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = norm(ps.tris[i].centroid - last_point);
    if (is_last_step) d += norm(ps.tris[i].centroid - rx);
    d = std::max(d, floor);
    w[i] = 1.0 / (d * d);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> distance_weights(const Scene& scene, const Vec3& last_point, const Vec3& rx,
                                     bool is_last_step) {
  return distance_weights(PreparedScene(scene), last_point, rx, is_last_step);
}

ActionChoice sample_action(const std::vector<double>& flows, const Mask& mask,
                           const std::vector<double>* weights, double epsilon, Rng& rng) {
  const std::size_t n = flows.size();
  ActionChoice choice;

  std::size_t n_unmasked = 0;
  for (std::uint8_t m : mask) n_unmasked += m;
  Mask effective = mask;
  if (n_unmasked == 0) {
    std::fill(effective.begin(), effective.end(), std::uint8_t{1});
    n_unmasked = n;
    choice.mask_fallback = true;
  }

  if (choice.mask_fallback || (epsilon > 0.0 && rng.uniform() < epsilon)) {
    // uniform over the allowed set
    choice.used_uniform = !choice.mask_fallback;
    std::size_t pick = rng.uniform_index(n_unmasked);
    for (std::size_t i = 0; i < n; ++i) {
      if (!effective[i]) continue;
      if (pick == 0) {
        choice.index = static_cast<int>(i);
        break;
      }
      --pick;
    }
    return choice;
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!effective[i]) continue;
    total += flows[i] * (weights ? (*weights)[i] : 1.0);
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last_allowed = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!effective[i]) continue;
    last_allowed = static_cast<int>(i);
    acc += flows[i] * (weights ? (*weights)[i] : 1.0);
    if (u < acc) {
      choice.index = static_cast<int>(i);
      return choice;
    }
  }
  choice.index = last_allowed;  // u == total from rounding
  return choice;
}

EncodedScene::EncodedScene(const FlowModel& model, const Scene& s)
    : scene(&s), prepared(s), canonical_inputs(canonical_object_inputs(s)) {
  if (s.triangles.empty()) throw EmptyScene("EncodedScene: scene has no objects");
  enc = encode_scene(model, canonical_inputs);
  const Tensor root_state =
      encode_state(model, PathCandidate::empty(model.cfg.k), enc.object_embeddings);
  root_flows = compute_flows(model, enc.object_embeddings, root_state, enc.scene_embedding);
}

Trajectory sample_trajectory(const FlowModel& model, const EncodedScene& encoded,
                             const SampleOptions& opts, Rng& rng, StateFlowCache* cache) {
  const int k_order = model.cfg.k;
  const std::size_t n = encoded.prepared.tris.size();
  Trajectory traj;
  traj.candidate = PathCandidate::empty(k_order);
  traj.step_flows.reserve(static_cast<std::size_t>(k_order));
  traj.step_masks.reserve(static_cast<std::size_t>(k_order));

  for (int k = 0; k < k_order; ++k) {
    std::vector<double> flows;
    if (k == 0) {
      flows = encoded.root_flows;
    } else if (cache) {
      const std::vector<std::int32_t> prefix(traj.chosen.begin(), traj.chosen.end());
      auto it = cache->flows.find(prefix);
      if (it != cache->flows.end()) {
        flows = it->second;
      } else {
        const Tensor state = encode_state(model, traj.candidate, encoded.enc.object_embeddings);
        flows = compute_flows(model, encoded.enc.object_embeddings, state,
                              encoded.enc.scene_embedding);
        cache->flows.emplace(prefix, flows);
      }
    } else {
      const Tensor state = encode_state(model, traj.candidate, encoded.enc.object_embeddings);
      flows = compute_flows(model, encoded.enc.object_embeddings, state,
                            encoded.enc.scene_embedding);
    }

    Mask mask(n, 1);
    if (opts.use_mask && k > 0) {
      const std::optional<Vec3> incoming =
          std::optional<Vec3>(approx_position(encoded.prepared, traj.chosen, k - 1));
      mask = action_mask(encoded.prepared, traj.candidate, incoming);
    }

    std::vector<double> weights;
    const std::vector<double>* weights_ptr = nullptr;
    if (opts.use_distance_weights) {
      const Vec3 here = approx_position(encoded.prepared, traj.chosen, k);
      weights = distance_weights(encoded.prepared, here, encoded.scene->rx, k == k_order - 1);
      weights_ptr = &weights;
    }

    const ActionChoice choice = sample_action(flows, mask, weights_ptr, opts.epsilon, rng);
    if (choice.mask_fallback) {
      traj.mask_fallback = true;
      std::fill(mask.begin(), mask.end(), std::uint8_t{1});  // the lifted mask was used
    }
    traj.used_uniform_any = traj.used_uniform_any || choice.used_uniform;
    traj.candidate.sequence[static_cast<std::size_t>(k)] = choice.index;
    traj.chosen.push_back(choice.index);
    traj.step_flows.push_back(std::move(flows));
    traj.step_masks.push_back(std::move(mask));
  }

  ValidationResult result = validate(encoded.prepared, traj.candidate);
  traj.reward = result.reward;
  traj.path = std::move(result.path);
  return traj;
}

Trajectory sample_trajectory(const FlowModel& model, const Scene& scene,
                             const SampleOptions& opts, Rng& rng) {
  const EncodedScene encoded(model, scene);
  return sample_trajectory(model, encoded, opts, rng);
}

FlowMatchingLoss flow_matching_loss(const Trajectory& trajectory) {
  const int k_order = trajectory.candidate.order();
  if (!trajectory.candidate.complete() ||
      trajectory.step_flows.size() != static_cast<std::size_t>(k_order) ||
      trajectory.step_masks.size() != static_cast<std::size_t>(k_order) ||
      trajectory.chosen.size() != static_cast<std::size_t>(k_order)) {
    throw IncompleteTrajectory("flow_matching_loss: trajectory is incomplete");
  }

  FlowMatchingLoss out;
  for (int k = 1; k <= k_order; ++k) {
    const auto& parent_flows = trajectory.step_flows[static_cast<std::size_t>(k - 1)];
    const double edge =
        parent_flows[static_cast<std::size_t>(trajectory.chosen[static_cast<std::size_t>(k - 1)])];
    double residual;
    if (k < k_order) {
      const auto& flows = trajectory.step_flows[static_cast<std::size_t>(k)];
      const auto& mask = trajectory.step_masks[static_cast<std::size_t>(k)];
      const auto chosen = static_cast<std::size_t>(trajectory.chosen[static_cast<std::size_t>(k)]);
      double child_sum = 0.0;
      for (std::size_t i = 0; i < flows.size(); ++i) {
        if (mask[i] || i == chosen) child_sum += flows[i];
      }
      residual = edge - child_sum;
    } else {
      residual = edge - static_cast<double>(trajectory.reward);
    }
    out.terms.push_back(residual * residual);
    out.loss += residual * residual;
  }
  return out;
}

Trajectory replay_trajectory(const FlowModel& model, const EncodedScene& encoded,
                             const PathCandidate& candidate, bool use_mask, int reward) {
  if (!candidate.complete()) {
    throw IncompleteTrajectory("replay_trajectory: candidate must be complete");
  }
  const int k_order = model.cfg.k;
  const std::size_t n = encoded.prepared.tris.size();
  Trajectory traj;
  traj.candidate = PathCandidate::empty(k_order);
  traj.reward = reward;

  for (int k = 0; k < k_order; ++k) {
    std::vector<double> flows;
    if (k == 0) {
      flows = encoded.root_flows;
    } else {
      const Tensor state = encode_state(model, traj.candidate, encoded.enc.object_embeddings);
      flows = compute_flows(model, encoded.enc.object_embeddings, state,
                            encoded.enc.scene_embedding);
    }
    Mask mask(n, 1);
    if (use_mask && k > 0) {
      const std::optional<Vec3> incoming =
          std::optional<Vec3>(approx_position(encoded.prepared, traj.chosen, k - 1));
      mask = action_mask(encoded.prepared, traj.candidate, incoming);
    }
    const std::int32_t action = candidate.sequence[static_cast<std::size_t>(k)];
    traj.candidate.sequence[static_cast<std::size_t>(k)] = action;
    traj.chosen.push_back(action);
    traj.step_flows.push_back(std::move(flows));
    traj.step_masks.push_back(std::move(mask));
  }
  return traj;
}

}  // namespace raypath
