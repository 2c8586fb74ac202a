#include "evrptw/curriculum.hpp"

#include <algorithm>
#include <string>

#include "evrptw/error.hpp"

namespace evrptw {

bool PPOConfig::valid() const {
  return clip_eps > 0 && adv_clip > 0 && value_clip > 0 && gae_lambda >= 0 && gae_lambda <= 1 && gamma >= 0 &&
         gamma <= 1 && lr_peak > 0 && lr_floor >= 0 && lr_floor <= lr_peak && grad_norm_cap > 0 &&
         reward_scale > 0 && minibatch_instances > 0 && update_epochs > 0 && instances_per_epoch > 0 &&
         multistart >= 0 && threads >= 0;
}

namespace curriculum {

std::string_view to_string(PhaseId phase) {
  switch (phase) {
    case PhaseId::A: return "A";
    case PhaseId::B: return "B";
    case PhaseId::C: return "C";
  }
  return "?";
}

PhaseId phase_from_string(std::string_view s) {
  if (s == "A" || s == "a") return PhaseId::A;
  if (s == "B" || s == "b") return PhaseId::B;
  if (s == "C" || s == "c") return PhaseId::C;
  throw InvalidArgument("unknown phase '" + std::string(s) + "'");
}

PhaseId phase_for_epoch(int epoch, const Schedule& schedule) {
  if (epoch < 0) throw InvalidArgument("epoch must be non-negative");
  if (!schedule.enabled) return PhaseId::C;
  if (!schedule.valid()) throw InvalidArgument("schedule boundaries must satisfy 0 < ab < bc");
  if (epoch < schedule.boundary_ab) return PhaseId::A;
  if (epoch < schedule.boundary_bc) return PhaseId::B;
  return PhaseId::C;
}

ConstraintSet constraint_set(PhaseId phase) {
  switch (phase) {
    case PhaseId::A: return {true, false, false};
    case PhaseId::B: return {true, true, false};
    case PhaseId::C: return {true, true, true};
  }
  return ConstraintSet::full();
}

double phase_entropy(PhaseId phase) {
  switch (phase) {
    case PhaseId::A: return 0.02;
    case PhaseId::B: return 0.01;
    case PhaseId::C: return 0.005;
  }
  return 0.0;
}

PPOConfig hyperparams_for_phase(PhaseId phase, const PPOConfig& base) {
  PPOConfig out = base;
  if (!base.pin_entropy) out.entropy_coef = phase_entropy(phase);
  return out;
}

PhaseSpan phase_span(PhaseId phase, const Schedule& schedule, int total_epochs) {
  if (!schedule.enabled) {
    return phase == PhaseId::C ? PhaseSpan{0, total_epochs} : PhaseSpan{0, 0};
  }
  int first = 0;
  int last = 0;  // exclusive
  switch (phase) {
    case PhaseId::A: first = 0; last = schedule.boundary_ab; break;
    case PhaseId::B: first = schedule.boundary_ab; last = schedule.boundary_bc; break;
    case PhaseId::C: first = schedule.boundary_bc; last = total_epochs; break;
  }
  last = std::min(last, total_epochs);
  return {first, std::max(0, last - first)};
}

std::array<double, 3> phase_one_hot(PhaseId phase) {
  std::array<double, 3> v{0.0, 0.0, 0.0};
  v[static_cast<std::size_t>(phase)] = 1.0;
  return v;
}

}  // namespace curriculum
}  // namespace evrptw
