#pragma once

#include <array>
#include <string_view>

#include "evrptw/model.hpp"
#include "evrptw/ppo_config.hpp"

namespace evrptw::curriculum {

/// Training phases in increasing difficulty: A (capacity), B (+ battery),
/// C (+ time windows).
enum class PhaseId { A = 0, B = 1, C = 2 };

std::string_view to_string(PhaseId phase);
PhaseId phase_from_string(std::string_view s);

struct Schedule {
  int boundary_ab = 10;
  int boundary_bc = 20;
  bool enabled = true;  // false pins phase C from epoch 0 (flat PPO baseline)

  bool valid() const { return 0 < boundary_ab && boundary_ab < boundary_bc; }
};

/// A for k < boundary_ab, B for boundary_ab <= k < boundary_bc, C otherwise.
/// A disabled schedule always yields C.
PhaseId phase_for_epoch(int epoch, const Schedule& schedule);

ConstraintSet constraint_set(PhaseId phase);

/// Per-phase entropy bonus (0.02 / 0.01 / 0.005).
double phase_entropy(PhaseId phase);

/// Applies the phase overlay to `base`. Pinned fields survive; the clip range
/// and learning-rate bounds are never touched.
PPOConfig hyperparams_for_phase(PhaseId phase, const PPOConfig& base);

/// First epoch of `phase` and the number of epochs it lasts in a run of
/// `total_epochs` (the last phase absorbs the remainder; may be 0).
struct PhaseSpan {
  int first_epoch;
  int epochs;
};
PhaseSpan phase_span(PhaseId phase, const Schedule& schedule, int total_epochs);

/// One-hot encoding used by the policy's dynamic context.
std::array<double, 3> phase_one_hot(PhaseId phase);

}  // namespace evrptw::curriculum
