#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evrptw/curriculum.hpp"
#include "evrptw/instancegen.hpp"
#include "evrptw/policy.hpp"
#include "evrptw/ppo_config.hpp"

namespace evrptw::ppo {

/// All trajectories collected on one instance (one encoder pass per update).
struct BatchGroup {
  std::shared_ptr<const Instance> instance;
  std::vector<policy::Trajectory> trajectories;
};

/// Per-step values indexed [group][trajectory][step].
using StepValues = std::vector<std::vector<std::vector<double>>>;

struct Advantages {
  StepValues raw;         // GAE before normalization
  StepValues normalized;  // zero mean, unit variance over the batch, clamped to +-adv_clip
  StepValues returns;     // raw + recorded value
};

/// GAE(gamma, lambda) over rewards scaled by config.reward_scale against the
/// values recorded during collection. Throws InvalidArgument on an empty batch.
Advantages compute_advantages(std::span<const BatchGroup> batch, const PPOConfig& config);

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  int steps = 0;
};

/// Loss of one group on a tape, already divided by `normalizer` (the step
/// count of the minibatch):
///   -min(r A, clip(r, 1-eps, 1+eps) A)
///   + value_coef * max((V-R)^2, (V_old + clamp(V-V_old, +-value_clip) - R)^2)
///   - entropy_coef * H
struct GroupLoss {
  ad::Var total;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int clipped = 0;
};

GroupLoss group_loss(ad::Tape& tape, const policy::PolicyParams& params, const BatchGroup& group,
                     const std::vector<std::vector<double>>& advantages,
                     const std::vector<std::vector<double>>& returns, const PPOConfig& config, double normalizer);

struct AdamState {
  std::vector<ad::Mat> m;
  std::vector<ad::Mat> v;
  long step = 0;

  bool operator==(const AdamState&) const = default;
};

/// Learning rate for an optimizer step index.
using LearningRate = std::function<double(long global_step)>;

/// Runs config.update_epochs passes over the batch in shuffled minibatches of
/// config.minibatch_instances groups; per minibatch: loss, backward, global
/// gradient-norm cap, Adam step. Group gradients are computed in parallel
/// and summed in a fixed order, so results depend only on (seed, batch).
/// Throws NonFiniteLoss (parameters untouched for that minibatch) when the
/// loss or gradient is not finite.
LossStats ppo_update(policy::PolicyParams& params, AdamState& adam, std::span<const BatchGroup> batch,
                     const Advantages& advantages, const PPOConfig& config, const LearningRate& lr,
                     std::uint64_t seed, long& global_step);

/// Optimizer steps taken per training epoch.
int steps_per_epoch(const PPOConfig& config);

/// Cosine decay from lr_peak to lr_floor across the optimizer steps of the
/// given phase, restarting at lr_peak at each phase boundary.
double lr_schedule(long global_step, curriculum::PhaseId phase, const PPOConfig& config,
                   const curriculum::Schedule& schedule, int total_epochs);

// Training ------------------------------------------------------------------

struct TrainConfig {
  int n_customers = 10;
  int n_stations = 3;
  std::vector<gen::ClassSpec> classes = gen::all_classes();
  curriculum::Schedule schedule{};
  PPOConfig ppo{};
  policy::Dims dims{};
  int epochs = 30;
  std::uint64_t seed = 0;
};

/// Reads a training config JSON. Unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  curriculum::PhaseId phase = curriculum::PhaseId::A;
  bool phase_start = false;
  double mean_cost = 0.0;  // over instances with a feasible best-of-starts solution
  double feasibility_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double lr = 0.0;
  double wall_time = 0.0;
};

/// Append-only per-epoch log.
class TrainingJournal {
 public:
  void append(const EpochRecord& record);
  const std::vector<EpochRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// With include_timing=false the output is a pure function of (config,
  /// seed) and can be compared byte for byte.
  std::string to_csv(bool include_timing = true) const;
  std::string to_json(bool include_timing = true) const;
  static TrainingJournal from_json(const std::string& text);

 private:
  std::vector<EpochRecord> records_;
};

struct TrainState {
  policy::PolicyParams params;
  AdamState adam;
  TrainingJournal journal;
  int next_epoch = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoints + journal
  std::optional<TrainState> resume;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Curriculum training loop: per epoch resolve the phase, sample fresh
/// instances, collect sampled multi-start rollouts under the phase's
/// constraint set, and run PPO updates. Checkpoints are written at the end of
/// every phase and at the end of training when out_dir is set.
TrainState train(const TrainConfig& config, const TrainOptions& options = {});

/// The instances sampled for a training epoch.
std::vector<std::shared_ptr<const Instance>> epoch_instances(const TrainConfig& config, int epoch);

void save_train_state(const TrainState& state, const std::filesystem::path& dir);
TrainState load_train_state(const std::filesystem::path& dir);

}  // namespace evrptw::ppo
