#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "evrptw/error.hpp"
#include "evrptw/parallel.hpp"
#include "evrptw/ppo.hpp"
#include "evrptw/random.hpp"

namespace evrptw::ppo {

using ad::Mat;
using ad::Tape;
using ad::Var;

Advantages compute_advantages(std::span<const BatchGroup> batch, const PPOConfig& config) {
  Advantages out;
  std::size_t total_steps = 0;
  double sum = 0.0;
  for (const BatchGroup& g : batch) {
    auto& raw_g = out.raw.emplace_back();
    auto& ret_g = out.returns.emplace_back();
    for (const policy::Trajectory& t : g.trajectories) {
      const std::size_t n = t.steps.size();
      std::vector<double> adv(n, 0.0);
      std::vector<double> ret(n, 0.0);
      double next_adv = 0.0;
      double next_value = 0.0;  // terminal
      for (std::size_t i = n; i-- > 0;) {
        const policy::StepRecord& s = t.steps[i];
        const double delta = s.reward * config.reward_scale + config.gamma * next_value - s.value;
        next_adv = delta + config.gamma * config.gae_lambda * next_adv;
        adv[i] = next_adv;
        ret[i] = adv[i] + s.value;
        next_value = s.value;
      }
      for (double a : adv) sum += a;
      total_steps += n;
      raw_g.push_back(std::move(adv));
      ret_g.push_back(std::move(ret));
    }
  }
  if (total_steps == 0) throw InvalidArgument("compute_advantages on an empty batch");
  const double mean = sum / static_cast<double>(total_steps);
  double var = 0.0;
  for (const auto& g : out.raw) {
    for (const auto& t : g) {
      for (double a : t) var += (a - mean) * (a - mean);
    }
  }
  const double stddev = std::sqrt(var / static_cast<double>(total_steps));
  constexpr double kEps = 1e-8;
  out.normalized = out.raw;
  for (auto& g : out.normalized) {
    for (auto& t : g) {
      for (double& a : t) a = std::clamp((a - mean) / (stddev + kEps), -config.adv_clip, config.adv_clip);
    }
  }
  return out;
}

GroupLoss group_loss(Tape& tape, const policy::PolicyParams& params, const BatchGroup& group,
                     const std::vector<std::vector<double>>& advantages,
                     const std::vector<std::vector<double>>& returns, const PPOConfig& config, double normalizer) {
  GroupLoss out;
  const policy::EncodedGraph graph = policy::encode(tape, *group.instance, params);
  std::vector<Var> policy_terms;
  std::vector<Var> value_terms;
  std::vector<Var> entropy_terms;
  for (std::size_t t = 0; t < group.trajectories.size(); ++t) {
    const policy::Trajectory& traj = group.trajectories[t];
    if (traj.steps.empty()) continue;
    const policy::EpisodeGraph eg = policy::episode_graph(tape, graph, *group.instance, traj, params);
    for (std::size_t s = 0; s < traj.steps.size(); ++s) {
      const policy::StepRecord& rec = traj.steps[s];
      const double adv = advantages[t][s];
      const double ret = returns[t][s];
      Var ratio = tape.exp(tape.add_scalar(eg.log_probs[s], -rec.log_prob));
      Var surr1 = tape.scale(ratio, adv);
      Var surr2 = tape.scale(tape.clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps), adv);
      policy_terms.push_back(tape.scale(tape.minimum(surr1, surr2), -1.0));
      if (std::abs(tape.item(ratio) - 1.0) > config.clip_eps) ++out.clipped;

      Var v = eg.values[s];
      Var v_clipped =
          tape.add_scalar(tape.clamp(tape.add_scalar(v, -rec.value), -config.value_clip, config.value_clip), rec.value);
      Var l1 = tape.square(tape.add_scalar(v, -ret));
      Var l2 = tape.square(tape.add_scalar(v_clipped, -ret));
      value_terms.push_back(tape.maximum(l1, l2));
      entropy_terms.push_back(eg.entropies[s]);
    }
  }
  if (policy_terms.empty()) {
    out.total = tape.scalar(0.0);
    return out;
  }
  Var pl = tape.sum(tape.concat_cols(policy_terms));
  Var vl = tape.sum(tape.concat_cols(value_terms));
  Var en = tape.sum(tape.concat_cols(entropy_terms));
  out.policy_loss = tape.item(pl) / normalizer;
  out.value_loss = tape.item(vl) / normalizer;
  out.entropy = tape.item(en) / normalizer;
  Var total = tape.add(tape.add(pl, tape.scale(vl, config.value_coef)), tape.scale(en, -config.entropy_coef));
  out.total = tape.scale(total, 1.0 / normalizer);
  return out;
}

int steps_per_epoch(const PPOConfig& config) {
  const int minibatches = (config.instances_per_epoch + config.minibatch_instances - 1) / config.minibatch_instances;
  return config.update_epochs * minibatches;
}

double lr_schedule(long global_step, curriculum::PhaseId phase, const PPOConfig& config,
                   const curriculum::Schedule& schedule, int total_epochs) {
  const long per_epoch = steps_per_epoch(config);
  const curriculum::PhaseSpan span = curriculum::phase_span(phase, schedule, total_epochs);
  const long length = static_cast<long>(span.epochs) * per_epoch;
  if (length <= 1) return config.lr_peak;
  const long t = std::clamp(global_step - static_cast<long>(span.first_epoch) * per_epoch, 0L, length - 1);
  const double progress = static_cast<double>(t) / static_cast<double>(length - 1);
  return config.lr_floor + (config.lr_peak - config.lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

void adam_step(policy::PolicyParams& params, AdamState& adam, const ad::GradBuffer& grads, const PPOConfig& c,
               double lr) {
  if (adam.m.size() != params.tensors.size()) {
    adam.m.clear();
    adam.v.clear();
    for (const Mat& t : params.tensors) {
      adam.m.push_back(Mat::Zero(t.rows(), t.cols()));
      adam.v.push_back(Mat::Zero(t.rows(), t.cols()));
    }
  }
  ++adam.step;
  const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(adam.step));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (grads[i].size() == 0) continue;
    adam.m[i] = c.adam_beta1 * adam.m[i] + (1.0 - c.adam_beta1) * grads[i];
    adam.v[i] = c.adam_beta2 * adam.v[i] + (1.0 - c.adam_beta2) * grads[i].cwiseProduct(grads[i]);
    const Mat mhat = adam.m[i] / bc1;
    const Mat vhat = adam.v[i] / bc2;
    params.tensors[i] -= (lr * mhat.array() / (vhat.array().sqrt() + c.adam_eps)).matrix();
  }
}

}  // namespace

LossStats ppo_update(policy::PolicyParams& params, AdamState& adam, std::span<const BatchGroup> batch,
                     const Advantages& advantages, const PPOConfig& config, const LearningRate& lr,
                     std::uint64_t seed, long& global_step) {
  LossStats stats;
  std::vector<std::size_t> order(batch.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const int threads = resolve_threads(config.threads);
  const std::size_t mb = static_cast<std::size_t>(config.minibatch_instances);
  int minibatch_count = 0;
  long clipped = 0;

  for (int pass = 0; pass < config.update_epochs; ++pass) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(pass)}));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      double normalizer = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        for (const auto& t : batch[order[k]].trajectories) normalizer += static_cast<double>(t.steps.size());
      }
      if (normalizer == 0.0) continue;

      const std::size_t count = end - start;
      std::vector<ad::GradBuffer> grads(count);
      std::vector<GroupLoss> losses(count);
      std::vector<double> totals(count, 0.0);
      parallel_for(count, threads, [&](std::size_t k) {
        const std::size_t g = order[start + k];
        Tape tape(&params.tensors);
        losses[k] = group_loss(tape, params, batch[g], advantages.normalized[g], advantages.returns[g], config,
                               normalizer);
        totals[k] = tape.item(losses[k].total);
        tape.backward(losses[k].total, grads[k]);
      });

      ad::GradBuffer sum(params.tensors.size());
      double total = 0.0;
      GroupLoss agg;
      for (std::size_t k = 0; k < count; ++k) {
        total += totals[k];
        agg.policy_loss += losses[k].policy_loss;
        agg.value_loss += losses[k].value_loss;
        agg.entropy += losses[k].entropy;
        clipped += losses[k].clipped;
        grads[k].resize(params.tensors.size());
        for (std::size_t i = 0; i < sum.size(); ++i) {
          if (grads[k][i].size() == 0) continue;
          if (sum[i].size() == 0) {
            sum[i] = grads[k][i];
          } else {
            sum[i] += grads[k][i];
          }
        }
      }
      double sq = 0.0;
      for (const Mat& g : sum) {
        if (g.size() > 0) sq += g.squaredNorm();
      }
      const double norm = std::sqrt(sq);
      if (!std::isfinite(total) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss at optimizer step " << global_step << ": total=" << total
            << " policy=" << agg.policy_loss << " value=" << agg.value_loss << " entropy=" << agg.entropy
            << " grad_norm=" << norm;
        throw NonFiniteLoss(msg.str());
      }
      if (norm > config.grad_norm_cap) {
        const double s = config.grad_norm_cap / norm;
        for (Mat& g : sum) {
          if (g.size() > 0) g *= s;
        }
      }
      adam_step(params, adam, sum, config, lr(global_step));
      ++global_step;

      stats.policy_loss += agg.policy_loss;
      stats.value_loss += agg.value_loss;
      stats.entropy += agg.entropy;
      stats.total += total;
      stats.grad_norm += norm;
      stats.steps += static_cast<int>(normalizer);
      ++minibatch_count;
    }
  }
  if (minibatch_count > 0) {
    const double n = minibatch_count;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.total /= n;
    stats.grad_norm /= n;
    stats.clip_fraction = stats.steps > 0 ? static_cast<double>(clipped) / stats.steps : 0.0;
  }
  return stats;
}

}  // namespace evrptw::ppo
