#pragma once

#include <cstdint>

namespace evrptw {

/// PPO hyperparameters. Fields marked "overlay" are rewritten per curriculum
/// phase unless the matching pin flag is set.
struct PPOConfig {
  double clip_eps = 0.2;
  double value_clip = 0.2;
  double adv_clip = 5.0;  // applied after normalization
  double gamma = 1.0;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;  // overlay
  bool pin_entropy = false;
  double value_coef = 0.5;
  double lr_peak = 1e-4;
  double lr_floor = 1e-5;
  double grad_norm_cap = 1.0;
  double reward_scale = 0.01;  // critic targets are rewards * reward_scale
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int minibatch_instances = 8;  // instance groups per optimizer step
  int update_epochs = 2;
  int instances_per_epoch = 10000;
  int multistart = 0;  // starts per training instance; 0 means N
  int threads = 0;     // 0 means hardware concurrency

  bool valid() const;
};

}  // namespace evrptw
