#include "evrptw/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evrptw/error.hpp"
#include "evrptw/random.hpp"

namespace evrptw::policy {

using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

constexpr int kCustomerFeatures = 6;
constexpr int kPointFeatures = 2;

int add_tensor(PolicyParams& p, std::string name, Eigen::Index rows, Eigen::Index cols) {
  p.names.push_back(std::move(name));
  p.tensors.push_back(Mat::Zero(rows, cols));
  return static_cast<int>(p.tensors.size()) - 1;
}

// Builds names, shapes and slot indices with every entry zero.
PolicyParams layout(const Dims& d) {
  if (d.hidden <= 0 || d.heads <= 0 || d.layers <= 0) throw InvalidArgument("policy dims must be positive");
  if (d.hidden % d.heads != 0) {
    throw InvalidArgument("hidden size " + std::to_string(d.hidden) + " is not divisible by " +
                          std::to_string(d.heads) + " heads");
  }
  const int h = d.hidden;
  PolicyParams p;
  p.dims = d;
  const char* kinds[3] = {"depot", "customer", "station"};
  const int in_dims[3] = {kPointFeatures, kCustomerFeatures, kPointFeatures};
  for (int k = 0; k < 3; ++k) {
    p.embed_w[static_cast<std::size_t>(k)] = add_tensor(p, std::string("embed.") + kinds[k] + ".w", in_dims[k], h);
    p.embed_b[static_cast<std::size_t>(k)] = add_tensor(p, std::string("embed.") + kinds[k] + ".b", 1, h);
  }
  for (int l = 0; l < d.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerSlots s;
    for (int k = 0; k < 3; ++k) s.query[static_cast<std::size_t>(k)] = add_tensor(p, pre + "query." + kinds[k], h, h);
    s.key = add_tensor(p, pre + "key", h, h);
    s.value = add_tensor(p, pre + "value", h, h);
    s.out = add_tensor(p, pre + "out.w", h, h);
    s.out_bias = add_tensor(p, pre + "out.b", 1, h);
    s.distance_decay = add_tensor(p, pre + "distance_decay", 1, d.heads);
    s.gate_w = add_tensor(p, pre + "gate.w", 2 * h, 1);
    s.gate_b = add_tensor(p, pre + "gate.b", 1, 1);
    s.norm1_gain = add_tensor(p, pre + "norm1.gain", 1, h);
    s.norm1_bias = add_tensor(p, pre + "norm1.bias", 1, h);
    s.ff1_w = add_tensor(p, pre + "ff1.w", h, 2 * h);
    s.ff1_b = add_tensor(p, pre + "ff1.b", 1, 2 * h);
    s.ff2_w = add_tensor(p, pre + "ff2.w", 2 * h, h);
    s.ff2_b = add_tensor(p, pre + "ff2.b", 1, h);
    s.norm2_gain = add_tensor(p, pre + "norm2.gain", 1, h);
    s.norm2_bias = add_tensor(p, pre + "norm2.bias", 1, h);
    p.layers.push_back(s);
  }
  p.film_gamma_w = add_tensor(p, "film.gamma.w", kContextSize, h);
  p.film_gamma_b = add_tensor(p, "film.gamma.b", 1, h);
  p.film_beta_w = add_tensor(p, "film.beta.w", kContextSize, h);
  p.film_beta_b = add_tensor(p, "film.beta.b", 1, h);
  p.dec_query = add_tensor(p, "decoder.query", 2 * h, h);
  p.dec_key = add_tensor(p, "decoder.key", h, h);
  p.value1_w = add_tensor(p, "value.l1.w", h + kContextSize, h);
  p.value1_b = add_tensor(p, "value.l1.b", 1, h);
  p.value2_w = add_tensor(p, "value.l2.w", h, 1);
  p.value2_b = add_tensor(p, "value.l2.b", 1, 1);
  return p;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

const Mat& tensor(const PolicyParams& p, int idx) { return p.tensors[static_cast<std::size_t>(idx)]; }

}  // namespace

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for (const Mat& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

bool PolicyParams::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const Mat& t) { return t.allFinite(); });
}

int PolicyParams::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

Eigen::VectorXd PolicyParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const Mat& t : tensors) {
    flat.segment(at, t.size()) = Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
    at += t.size();
  }
  return flat;
}

void PolicyParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) throw InvalidArgument("flat parameter size mismatch");
  Eigen::Index at = 0;
  for (Mat& t : tensors) {
    Eigen::Map<Eigen::VectorXd>(t.data(), t.size()) = flat.segment(at, t.size());
    at += t.size();
  }
}

bool PolicyParams::operator==(const PolicyParams& other) const {
  if (!(dims == other.dims) || names != other.names || tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].rows() != other.tensors[i].rows() || tensors[i].cols() != other.tensors[i].cols()) return false;
    if (tensors[i] != other.tensors[i]) return false;
  }
  return true;
}

PolicyParams zero_params(const Dims& dims) { return layout(dims); }

PolicyParams init_params(std::uint64_t seed, const Dims& dims) {
  PolicyParams p = layout(dims);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const std::string& name = p.names[i];
    Mat& t = p.tensors[i];
    if (ends_with(name, ".gain")) {
      t.setOnes();
    } else if (ends_with(name, "distance_decay")) {
      t.setOnes();
    } else if (ends_with(name, ".b") || ends_with(name, ".bias")) {
      t.setZero();
    } else {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.rows()));
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, c) = rng.uniform(-bound, bound);
      }
    }
  }
  return p;
}

DynamicContext make_context(const env::EnvState& s) {
  const Instance& inst = s.inst();
  DynamicContext c{};
  c[0] = std::clamp(s.clock / inst.horizon(), 0.0, 1.0);
  c[1] = std::clamp(s.battery / inst.battery_capacity(), 0.0, 1.0);
  c[2] = std::clamp(static_cast<double>(inst.capacity() - s.load_used) / inst.capacity(), 0.0, 1.0);
  c[3] = static_cast<double>(s.served) / inst.n_customers();
  const int phase = !s.constraints.battery ? 0 : (!s.constraints.time_windows ? 1 : 2);
  c[static_cast<std::size_t>(4 + phase)] = 1.0;
  return c;
}

NodeFeatures node_features(const Instance& inst) {
  NodeFeatures f;
  const double horizon = inst.horizon();
  f.depot = Mat(1, kPointFeatures);
  f.depot << inst.node(0).x, inst.node(0).y;
  f.customers = Mat(inst.n_customers(), kCustomerFeatures);
  for (int i = 1; i <= inst.n_customers(); ++i) {
    const Node& n = inst.node(i);
    f.customers.row(i - 1) << n.x, n.y, static_cast<double>(n.demand) / inst.capacity(), n.tw_open / horizon,
        n.tw_close / horizon, n.service_time / horizon;
  }
  f.stations = Mat(inst.n_stations(), kPointFeatures);
  for (int s = 0; s < inst.n_stations(); ++s) {
    const Node& n = inst.node(inst.first_station() + s);
    f.stations.row(s) << n.x, n.y;
  }
  return f;
}

Eigen::ArrayXXd neighbor_mask(const Instance& inst) {
  const int n = inst.size();
  const int k = std::min(kMaxNeighbors, inst.n_customers() + inst.n_stations());
  Eigen::ArrayXXd m = Eigen::ArrayXXd::Zero(n, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (a == i || b == i) return a == i && b != i;
      return inst.dist(i, a) < inst.dist(i, b);
    });
    for (int r = 0; r <= k && r < n; ++r) m(i, order[static_cast<std::size_t>(r)]) = 1.0;
  }
  return m;
}

EncodedGraph encode(Tape& tape, const Instance& inst, const PolicyParams& p, const EncodeOptions& options) {
  const int h = p.dims.hidden;
  const int heads = p.dims.heads;
  const int dk = h / heads;
  const int n = inst.size();
  const NodeFeatures f = node_features(inst);

  std::vector<Var> blocks;
  blocks.push_back(tape.add_row(tape.matmul(tape.constant(f.depot), tape.param(p.embed_w[0])), tape.param(p.embed_b[0])));
  blocks.push_back(
      tape.add_row(tape.matmul(tape.constant(f.customers), tape.param(p.embed_w[1])), tape.param(p.embed_b[1])));
  if (inst.n_stations() > 0) {
    blocks.push_back(
        tape.add_row(tape.matmul(tape.constant(f.stations), tape.param(p.embed_w[2])), tape.param(p.embed_b[2])));
  }
  Var x = tape.concat_rows(blocks);

  std::array<std::vector<char>, 3> type_rows;
  for (auto& rows : type_rows) rows.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const int t = inst.is_depot(i) ? 0 : (inst.is_customer(i) ? 1 : 2);
    type_rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = 1;
  }
  Mat neg_dist(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) neg_dist(i, j) = -inst.dist(i, j);
  }
  const Eigen::ArrayXXd local_mask = neighbor_mask(inst);
  const Eigen::ArrayXXd full_mask = Eigen::ArrayXXd::Ones(n, n);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  for (const LayerSlots& s : p.layers) {
    // Query projection chosen by the querying node's type.
    Var q = tape.mask_rows(tape.matmul(x, tape.param(s.query[0])), type_rows[0]);
    for (int t = 1; t < 3; ++t) {
      q = tape.add(q, tape.mask_rows(tape.matmul(x, tape.param(s.query[static_cast<std::size_t>(t)])),
                                     type_rows[static_cast<std::size_t>(t)]));
    }
    Var k = tape.matmul(x, tape.param(s.key));
    Var v = tape.matmul(x, tape.param(s.value));

    std::vector<Var> local_heads;
    std::vector<Var> global_heads;
    for (int hd = 0; hd < heads; ++hd) {
      Var qh = tape.slice_cols(q, hd * dk, dk);
      Var kh = tape.slice_cols(k, hd * dk, dk);
      Var vh = tape.slice_cols(v, hd * dk, dk);
      Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dk);
      Var decay = tape.slice_cols(tape.param(s.distance_decay), hd, 1);
      Var local_scores = tape.add_scaled_const(scores, decay, neg_dist);
      local_heads.push_back(tape.matmul(tape.masked_softmax_rows(local_scores, local_mask), vh));
      if (!options.local_only) {
        global_heads.push_back(tape.matmul(tape.masked_softmax_rows(scores, full_mask), vh));
      }
    }
    Var local = tape.concat_cols(local_heads);
    Var fused = local;
    if (!options.local_only) {
      Var global = tape.concat_cols(global_heads);
      Var gate;
      if (options.gate_override) {
        gate = tape.constant(Mat::Constant(n, 1, *options.gate_override));
      } else {
        gate = tape.sigmoid(tape.add_row(tape.matmul(tape.concat_cols({local, global}), tape.param(s.gate_w)),
                                         tape.param(s.gate_b)));
      }
      Var keep_local = tape.add_scalar(tape.scale(gate, -1.0), 1.0);
      fused = tape.add(tape.mul_col(global, gate), tape.mul_col(local, keep_local));
    }
    Var attn = tape.add_row(tape.matmul(fused, tape.param(s.out)), tape.param(s.out_bias));
    Var h1 = tape.layer_norm_rows(tape.add(x, attn), tape.param(s.norm1_gain), tape.param(s.norm1_bias));
    Var ff = tape.relu(tape.add_row(tape.matmul(h1, tape.param(s.ff1_w)), tape.param(s.ff1_b)));
    ff = tape.add_row(tape.matmul(ff, tape.param(s.ff2_w)), tape.param(s.ff2_b));
    x = tape.layer_norm_rows(tape.add(h1, ff), tape.param(s.norm2_gain), tape.param(s.norm2_bias));
  }
  return {x, tape.mean_rows(x)};
}

NodeEmbeddings encode(const Instance& instance, const PolicyParams& params, const EncodeOptions& options) {
  Tape tape(&params.tensors);
  const EncodedGraph g = encode(tape, instance, params, options);
  return {tape.value(g.embeddings), tape.value(g.summary).row(0)};
}

namespace {

Mat context_row(const DynamicContext& c) {
  Mat m(1, kContextSize);
  for (int i = 0; i < kContextSize; ++i) m(0, i) = c[static_cast<std::size_t>(i)];
  return m;
}

bool any_allowed(const env::Mask& mask) {
  return std::any_of(mask.begin(), mask.end(), [](char c) { return c != 0; });
}

// Forward-only logits. scores_j = q . (ê_j W_k) with ê_j = gamma*e_j + beta,
// rearranged as e_j . (gamma * u) + beta . u where u = q W_k^T.
Eigen::RowVectorXd fast_logits(const NodeEmbeddings& g, int position, const DynamicContext& context,
                               const PolicyParams& p) {
  const int h = p.dims.hidden;
  const Mat c = context_row(context);
  const Eigen::RowVectorXd gamma =
      (c * tensor(p, p.film_gamma_w) + tensor(p, p.film_gamma_b)).row(0).array() + 1.0;
  const Eigen::RowVectorXd beta = (c * tensor(p, p.film_beta_w) + tensor(p, p.film_beta_b)).row(0);
  Eigen::RowVectorXd qin(2 * h);
  qin << g.embeddings.row(position), g.summary;
  const Eigen::RowVectorXd q = qin * tensor(p, p.dec_query);
  const Eigen::RowVectorXd u = q * tensor(p, p.dec_key).transpose();
  const Eigen::RowVectorXd gu = gamma.cwiseProduct(u);
  const double bu = beta.dot(u);
  Eigen::RowVectorXd scores = (g.embeddings * gu.transpose()).transpose().array() + bu;
  scores /= std::sqrt(static_cast<double>(h));
  return (kLogitClip * scores.array().tanh()).matrix();
}

std::vector<double> masked_log_probs(const Eigen::RowVectorXd& logits, const env::Mask& mask) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) mx = std::max(mx, logits(j));
  }
  double z = 0.0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) z += std::exp(logits(j) - mx);
  }
  const double lse = mx + std::log(z);
  std::vector<double> lp(static_cast<std::size_t>(logits.size()), -std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) lp[static_cast<std::size_t>(j)] = logits(j) - lse;
  }
  return lp;
}

}  // namespace

DecodeOutput decode_step(Tape& tape, const EncodedGraph& graph, int position, const DynamicContext& context,
                         const env::Mask& mask, const PolicyParams& p) {
  if (!any_allowed(mask)) throw InvalidArgument("decode_step with an all-false mask");
  const int h = p.dims.hidden;
  Var c = tape.constant(context_row(context));
  Var gamma = tape.add_scalar(tape.add_row(tape.matmul(c, tape.param(p.film_gamma_w)), tape.param(p.film_gamma_b)), 1.0);
  Var beta = tape.add_row(tape.matmul(c, tape.param(p.film_beta_w)), tape.param(p.film_beta_b));
  Var modulated = tape.add_row(tape.mul_row(graph.embeddings, gamma), beta);
  Var qin = tape.concat_cols({tape.row(graph.embeddings, position), graph.summary});
  Var q = tape.matmul(qin, tape.param(p.dec_query));
  Var keys = tape.matmul(modulated, tape.param(p.dec_key));
  Var scores = tape.scale(tape.matmul(q, tape.transpose(keys)), 1.0 / std::sqrt(static_cast<double>(h)));
  Var logits = tape.scale(tape.tanh(scores), kLogitClip);

  Var hidden = tape.relu(tape.add_row(tape.matmul(tape.concat_cols({graph.summary, c}), tape.param(p.value1_w)),
                                      tape.param(p.value1_b)));
  Var value = tape.add_row(tape.matmul(hidden, tape.param(p.value2_w)), tape.param(p.value2_b));
  return {tape.masked_log_softmax(logits, mask), tape.masked_entropy(logits, mask), value};
}

std::vector<double> decode_step(const NodeEmbeddings& graph, int position, const DynamicContext& context,
                                const env::Mask& mask, const PolicyParams& params) {
  if (!any_allowed(mask)) throw InvalidArgument("decode_step with an all-false mask");
  std::vector<double> lp = masked_log_probs(fast_logits(graph, position, context, params), mask);
  std::vector<double> probs(lp.size(), 0.0);
  for (std::size_t j = 0; j < lp.size(); ++j) {
    if (mask[j]) probs[j] = std::exp(lp[j]);
  }
  return probs;
}

double value_estimate(const NodeEmbeddings& graph, const DynamicContext& context, const PolicyParams& p) {
  const int h = p.dims.hidden;
  Eigen::RowVectorXd in(h + kContextSize);
  in.head(h) = graph.summary;
  for (int i = 0; i < kContextSize; ++i) in(h + i) = context[static_cast<std::size_t>(i)];
  const Eigen::RowVectorXd hidden = (in * tensor(p, p.value1_w) + tensor(p, p.value1_b)).cwiseMax(0.0);
  return (hidden * tensor(p, p.value2_w))(0, 0) + tensor(p, p.value2_b)(0, 0);
}

namespace {

Trajectory run_episode(const std::shared_ptr<const Instance>& instance, const NodeEmbeddings& graph,
                       const PolicyParams& params, const ConstraintSet& constraints, DecodeMode mode,
                       std::optional<int> start, Rng* rng) {
  Trajectory traj;
  traj.instance_digest = instance->digest();
  traj.constraints = constraints;
  traj.start_customer = start;
  env::EnvState state = env::reset(instance, constraints, start);
  while (!state.terminal) {
    env::Mask mask = env::feasible_actions(state);
    if (!any_allowed(mask)) {
      const env::StepOutcome out = env::mark_infeasible(state);
      traj.total_reward += out.reward;
      if (!traj.steps.empty()) traj.steps.back().reward += out.reward;
      break;
    }
    StepRecord rec;
    rec.position = state.position;
    rec.context = make_context(state);
    const std::vector<double> lp = masked_log_probs(fast_logits(graph, state.position, rec.context, params), mask);
    int action = -1;
    if (mode == DecodeMode::Greedy) {
      for (std::size_t j = 0; j < lp.size(); ++j) {
        if (mask[j] && (action < 0 || lp[j] > lp[static_cast<std::size_t>(action)])) action = static_cast<int>(j);
      }
    } else {
      std::vector<double> probs(lp.size(), 0.0);
      for (std::size_t j = 0; j < lp.size(); ++j) probs[j] = mask[j] ? std::exp(lp[j]) : 0.0;
      action = static_cast<int>(rng->categorical(probs));
    }
    double entropy = 0.0;
    for (std::size_t j = 0; j < lp.size(); ++j) {
      if (mask[j]) entropy -= std::exp(lp[j]) * lp[j];
    }
    rec.action = action;
    rec.log_prob = lp[static_cast<std::size_t>(action)];
    rec.entropy = entropy;
    rec.value = value_estimate(graph, rec.context, params);
    rec.mask = std::move(mask);
    const env::StepOutcome out = env::step(state, action);
    rec.reward = out.reward;
    traj.total_reward += out.reward;
    traj.steps.push_back(std::move(rec));
  }
  traj.solution = env::to_solution(state);
  traj.feasible = traj.solution.feasible;
  if (traj.feasible) {
    traj.solution = make_solution(*instance, traj.solution.routes, constraints);
  }
  return traj;
}

bool better(const Solution& a, const Solution& b) {
  if (!a.feasible) return false;
  if (!b.feasible) return true;
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.routes < b.routes;
}

}  // namespace

RolloutResult rollout(std::shared_ptr<const Instance> instance, const PolicyParams& params,
                      const ConstraintSet& constraints, DecodeMode mode, int multistart, std::uint64_t seed) {
  if (!instance) throw InvalidArgument("rollout needs an instance");
  const int n = instance->n_customers();
  if (multistart < 0 || multistart > n) throw InvalidArgument("multistart must be in [0, N]");
  const int starts = multistart == 0 ? n : multistart;
  const NodeEmbeddings graph = encode(*instance, params);
  RolloutResult result;
  result.best = infeasible_solution();
  for (int i = 0; i < starts; ++i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    Trajectory t = run_episode(instance, graph, params, constraints, mode, i + 1, &rng);
    if (better(t.solution, result.best)) result.best = t.solution;
    result.trajectories.push_back(std::move(t));
  }
  return result;
}

EpisodeGraph episode_graph(Tape& tape, const EncodedGraph& graph, const Instance& instance,
                           const Trajectory& trajectory, const PolicyParams& params) {
  if (trajectory.instance_digest != instance.digest()) {
    throw InvalidArgument("trajectory was collected on a different instance");
  }
  EpisodeGraph eg;
  for (const StepRecord& s : trajectory.steps) {
    if (s.action < 0 || s.action >= instance.size() || !s.mask[static_cast<std::size_t>(s.action)]) {
      throw InvalidArgument("trajectory step has an action outside its mask");
    }
    const DecodeOutput d = decode_step(tape, graph, s.position, s.context, s.mask, params);
    eg.log_probs.push_back(tape.pick(d.log_probs, 0, s.action));
    eg.entropies.push_back(d.entropy);
    eg.values.push_back(d.value);
  }
  return eg;
}

Evaluation log_prob_and_entropy(const Trajectory& trajectory, const Instance& instance, const PolicyParams& params) {
  Tape tape(&params.tensors);
  const EncodedGraph g = encode(tape, instance, params);
  const EpisodeGraph eg = episode_graph(tape, g, instance, trajectory, params);
  Evaluation ev;
  for (std::size_t i = 0; i < eg.log_probs.size(); ++i) {
    ev.log_probs.push_back(tape.item(eg.log_probs[i]));
    ev.entropies.push_back(tape.item(eg.entropies[i]));
    ev.values.push_back(tape.item(eg.values[i]));
  }
  return ev;
}

}  // namespace evrptw::policy
