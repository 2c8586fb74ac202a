#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evrptw/autodiff.hpp"
#include "evrptw/env.hpp"
#include "evrptw/model.hpp"

namespace evrptw::policy {

struct Dims {
  int hidden = 128;
  int heads = 8;
  int layers = 3;

  bool operator==(const Dims&) const = default;
};

inline constexpr int kContextSize = 7;
inline constexpr int kMaxNeighbors = 8;
inline constexpr double kLogitClip = 10.0;

/// Per-layer parameter slots (indices into PolicyParams::tensors).
struct LayerSlots {
  std::array<int, 3> query{};  // depot, customer, station
  int key = -1;
  int value = -1;
  int out = -1;
  int out_bias = -1;
  int distance_decay = -1;  // 1 x heads, local-branch distance bias scale
  int gate_w = -1;
  int gate_b = -1;
  int norm1_gain = -1;
  int norm1_bias = -1;
  int ff1_w = -1;
  int ff1_b = -1;
  int ff2_w = -1;
  int ff2_b = -1;
  int norm2_gain = -1;
  int norm2_bias = -1;
};

/// All learnable tensors of the encoder, FiLM conditioner, decoder and critic.
struct PolicyParams {
  Dims dims;
  std::vector<std::string> names;
  std::vector<ad::Mat> tensors;

  std::array<int, 3> embed_w{};  // depot, customer, station
  std::array<int, 3> embed_b{};
  std::vector<LayerSlots> layers;
  int film_gamma_w = -1;
  int film_gamma_b = -1;
  int film_beta_w = -1;
  int film_beta_b = -1;
  int dec_query = -1;
  int dec_key = -1;
  int value1_w = -1;
  int value1_b = -1;
  int value2_w = -1;
  int value2_b = -1;

  std::size_t parameter_count() const;
  bool all_finite() const;
  int index_of(const std::string& name) const;

  /// Flattened copy of every tensor (name order) and its inverse.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);

  bool operator==(const PolicyParams& other) const;
};

/// Deterministic fan-in uniform initialization: weights ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)), biases 0, layer-norm gains 1, distance decays 1.
/// Throws InvalidArgument unless hidden > 0, heads > 0, layers > 0 and
/// heads divides hidden.
PolicyParams init_params(std::uint64_t seed, const Dims& dims);

/// A PolicyParams with the right shapes and every entry zero.
PolicyParams zero_params(const Dims& dims);

/// Vehicle state fed to the FiLM generator and the critic: clock/T,
/// battery/Q_bat, remaining load fraction, fraction served, phase one-hot.
using DynamicContext = std::array<double, kContextSize>;

DynamicContext make_context(const env::EnvState& state);

/// Encoder options used by ablation tests.
struct EncodeOptions {
  std::optional<double> gate_override;  // force the global/local gate value
  bool local_only = false;              // skip the global branch entirely
};

struct EncodedGraph {
  ad::Var embeddings;  // (1+N+M) x H
  ad::Var summary;     // 1 x H mean pool
};

/// Per-type raw node features (depot: x,y; customer: x,y,q,e,l,s normalized;
/// station: x,y).
struct NodeFeatures {
  ad::Mat depot;
  ad::Mat customers;
  ad::Mat stations;
};
NodeFeatures node_features(const Instance& instance);

/// Local-branch neighbourhood: each node attends to itself and its
/// min(8, N+M) nearest other nodes (ties by id).
Eigen::ArrayXXd neighbor_mask(const Instance& instance);

EncodedGraph encode(ad::Tape& tape, const Instance& instance, const PolicyParams& params,
                    const EncodeOptions& options = {});

struct NodeEmbeddings {
  ad::Mat embeddings;
  Eigen::RowVectorXd summary;
};

/// Forward-only encoding.
NodeEmbeddings encode(const Instance& instance, const PolicyParams& params, const EncodeOptions& options = {});

struct DecodeOutput {
  ad::Var log_probs;  // 1 x (1+N+M), -inf where masked
  ad::Var entropy;
  ad::Var value;
};

/// One decoder step on the tape: FiLM-modulated node embeddings scored
/// against a projection of (current node || graph summary), clipped with
/// 10*tanh, masked softmax. Also evaluates the critic.
DecodeOutput decode_step(ad::Tape& tape, const EncodedGraph& graph, int position, const DynamicContext& context,
                         const env::Mask& mask, const PolicyParams& params);

/// Forward-only decoder step returning the action distribution (masked
/// entries exactly 0). Throws InvalidArgument for an all-false mask.
std::vector<double> decode_step(const NodeEmbeddings& graph, int position, const DynamicContext& context,
                                const env::Mask& mask, const PolicyParams& params);

double value_estimate(const NodeEmbeddings& graph, const DynamicContext& context, const PolicyParams& params);

enum class DecodeMode { Greedy, Sample };

struct StepRecord {
  int position = 0;
  env::Mask mask;
  DynamicContext context{};
  int action = -1;
  double log_prob = 0.0;
  double entropy = 0.0;
  double value = 0.0;
  double reward = 0.0;
};

struct Trajectory {
  std::uint64_t instance_digest = 0;
  ConstraintSet constraints;
  std::optional<int> start_customer;
  std::vector<StepRecord> steps;
  Solution solution;
  bool feasible = false;
  double total_reward = 0.0;
};

struct RolloutResult {
  Solution best;  // infeasible marker when no start succeeds
  std::vector<Trajectory> trajectories;
};

/// Runs `multistart` episodes, episode i forced to start at customer i+1
/// (multistart 0 means N). Sampling draws from per-episode substreams of
/// `seed`; greedy mode is fully deterministic. The best feasible solution
/// (lowest J, lexicographic tie-break) is returned.
RolloutResult rollout(std::shared_ptr<const Instance> instance, const PolicyParams& params,
                      const ConstraintSet& constraints, DecodeMode mode, int multistart, std::uint64_t seed = 0);

/// Tape nodes for one recorded trajectory under the current parameters.
struct EpisodeGraph {
  std::vector<ad::Var> log_probs;
  std::vector<ad::Var> entropies;
  std::vector<ad::Var> values;
};

/// Throws InvalidArgument when the trajectory was collected on a different
/// instance.
EpisodeGraph episode_graph(ad::Tape& tape, const EncodedGraph& graph, const Instance& instance,
                           const Trajectory& trajectory, const PolicyParams& params);

struct Evaluation {
  std::vector<double> log_probs;
  std::vector<double> entropies;
  std::vector<double> values;
};

Evaluation log_prob_and_entropy(const Trajectory& trajectory, const Instance& instance, const PolicyParams& params);

// Checkpoints ---------------------------------------------------------------

inline constexpr const char* kPolicyFormat = "evrptw-policy/1";

std::string params_to_json(const PolicyParams& params);
PolicyParams params_from_json(const std::string& text);
void save_params(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_params(const std::filesystem::path& path);

}  // namespace evrptw::policy
