#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "raypath/rng.hpp"
#include "raypath/tracer.hpp"

namespace raypath {

enum class GroundMode { Always, Random };
enum class SamplingRegion { Canyon, Whole };

// Randomization knobs for the procedural street-canyon generator. Buildings
// are axis-aligned boxes flanking a street along the x axis, ground at z=0.
struct CanyonParams {
  int n_buildings_per_side = 5;
  double street_width = 20.0;        // meters
  double footprint_len_min = 8.0;    // building extent along the street
  double footprint_len_max = 16.0;
  double footprint_depth_min = 8.0;  // extent away from the street
  double footprint_depth_max = 14.0;
  double height_min = 10.0;
  double height_max = 40.0;
  double keep_min = 0.5;  // per-scene keep probability drawn from this range
  double keep_max = 1.0;
  GroundMode include_ground = GroundMode::Always;
  SamplingRegion sampling_region = SamplingRegion::Canyon;
  double tx_height_min = 2.0;
  double tx_height_max = 50.0;
  double rx_height_min = 1.0;
  double rx_height_max = 2.0;

  double building_gap = 4.0;  // spacing reserve between slot and footprint
  double margin = 5.0;        // ground / whole-region margin beyond buildings

  double slot_length() const { return footprint_len_max + building_gap; }
  double street_length() const { return n_buildings_per_side * slot_length(); }

  void check() const;  // throws BadFlag on inverted/nonpositive ranges
};

// One generated scene. `reject_tx_rx_inside` resamples tx/rx until neither
// falls inside a kept building (used for validation sets; training keeps
// degenerate placements).
Scene generate_canyon(const CanyonParams& params, Rng& rng, bool reject_tx_rx_inside = false);

// Convenience: guarantees at least one triangle by redrawing empty scenes
// from fresh substreams (all-buildings-removed + no-ground configurations).
Scene generate_nonempty_canyon(const CanyonParams& params, Rng& rng,
                               bool reject_tx_rx_inside = false);

struct SceneStatsRow {
  int k = 0;
  double mean_candidates = 0.0;
  double valid_fraction = 0.0;  // aggregate: total valid / total candidates
};

struct SceneStats {
  std::vector<SceneStatsRow> rows;  // k = 0..k_max
};

// Monte-Carlo scene statistics: mean candidate counts and exhaustive valid
// fractions per interaction order. k = 0 is line-of-sight.
SceneStats scene_stats(const CanyonParams& params, int n_scenes, int k_max, bool no_repeat,
                       std::uint64_t seed, std::uint64_t budget = kDefaultEnumerationBudget);

std::string scene_stats_csv(const SceneStats& stats, const std::string& cmdline_comment = "");

// Wavefront-OBJ subset with tx/rx directive comments:
//   # tx <x> <y> <z>
//   # rx <x> <y> <z>
//   v <x> <y> <z>      (doubles, 17 significant digits on write)
//   f <i> <j> <k>      (1-based, triangles only)
void write_scene(const Scene& scene, const std::string& path);
std::string scene_to_obj(const Scene& scene);
Scene read_scene(const std::string& path);
Scene scene_from_obj(const std::string& text);

}  // namespace raypath
