#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "evrptw/error.hpp"
#include "evrptw/io.hpp"
#include "evrptw/parallel.hpp"
#include "evrptw/ppo.hpp"
#include "evrptw/random.hpp"
#include "json.hpp"

namespace evrptw::ppo {

using nlohmann::json;

namespace {

// Substream keys under the training seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kInstanceStream = 2;
constexpr std::uint64_t kRolloutStream = 3;
constexpr std::uint64_t kUpdateStream = 4;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + " must be an object");
  std::set<std::string> keys;
  for (const char* k : allowed) keys.insert(k);
  for (const auto& item : obj.items()) {
    if (!keys.contains(item.key())) throw FormatError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

json matrices_to_json(const std::vector<ad::Mat>& ms) {
  json arr = json::array();
  for (const ad::Mat& m : ms) {
    std::vector<double> data;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    arr.push_back(json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}});
  }
  return arr;
}

std::vector<ad::Mat> matrices_from_json(const json& arr) {
  std::vector<ad::Mat> out;
  for (const json& j : arr) {
    ad::Mat m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != m.size()) throw FormatError("optimizer state tensor size");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
    }
    out.push_back(std::move(m));
  }
  return out;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed training config: ") + e.what());
  }
  TrainConfig c;
  try {
    reject_unknown(doc, {"n_customers", "n_stations", "classes", "epochs", "seed", "schedule", "ppo", "dims"},
                   "training config");
    read_opt(doc, "n_customers", c.n_customers);
    read_opt(doc, "n_stations", c.n_stations);
    read_opt(doc, "epochs", c.epochs);
    read_opt(doc, "seed", c.seed);
    if (doc.contains("classes")) {
      c.classes.clear();
      for (const json& code : doc.at("classes")) c.classes.push_back(gen::ClassSpec::parse(code.get<std::string>()));
    }
    if (doc.contains("schedule")) {
      const json& s = doc.at("schedule");
      reject_unknown(s, {"boundary_ab", "boundary_bc", "enabled"}, "schedule");
      read_opt(s, "boundary_ab", c.schedule.boundary_ab);
      read_opt(s, "boundary_bc", c.schedule.boundary_bc);
      read_opt(s, "enabled", c.schedule.enabled);
    }
    if (doc.contains("dims")) {
      const json& d = doc.at("dims");
      reject_unknown(d, {"hidden", "heads", "layers"}, "dims");
      read_opt(d, "hidden", c.dims.hidden);
      read_opt(d, "heads", c.dims.heads);
      read_opt(d, "layers", c.dims.layers);
    }
    if (doc.contains("ppo")) {
      const json& p = doc.at("ppo");
      reject_unknown(p,
                     {"clip_eps", "value_clip", "adv_clip", "gamma", "gae_lambda", "entropy_coef", "pin_entropy",
                      "value_coef", "lr_peak", "lr_floor", "grad_norm_cap", "reward_scale", "adam_beta1",
                      "adam_beta2", "adam_eps", "minibatch_instances", "update_epochs", "instances_per_epoch",
                      "multistart", "threads"},
                     "ppo");
      PPOConfig& q = c.ppo;
      read_opt(p, "clip_eps", q.clip_eps);
      read_opt(p, "value_clip", q.value_clip);
      read_opt(p, "adv_clip", q.adv_clip);
      read_opt(p, "gamma", q.gamma);
      read_opt(p, "gae_lambda", q.gae_lambda);
      read_opt(p, "entropy_coef", q.entropy_coef);
      read_opt(p, "pin_entropy", q.pin_entropy);
      read_opt(p, "value_coef", q.value_coef);
      read_opt(p, "lr_peak", q.lr_peak);
      read_opt(p, "lr_floor", q.lr_floor);
      read_opt(p, "grad_norm_cap", q.grad_norm_cap);
      read_opt(p, "reward_scale", q.reward_scale);
      read_opt(p, "adam_beta1", q.adam_beta1);
      read_opt(p, "adam_beta2", q.adam_beta2);
      read_opt(p, "adam_eps", q.adam_eps);
      read_opt(p, "minibatch_instances", q.minibatch_instances);
      read_opt(p, "update_epochs", q.update_epochs);
      read_opt(p, "instances_per_epoch", q.instances_per_epoch);
      read_opt(p, "multistart", q.multistart);
      read_opt(p, "threads", q.threads);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad training config: ") + e.what());
  }
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json classes = json::array();
  for (const auto& cls : c.classes) classes.push_back(cls.code());
  const PPOConfig& q = c.ppo;
  json doc{{"n_customers", c.n_customers},
           {"n_stations", c.n_stations},
           {"classes", classes},
           {"epochs", c.epochs},
           {"seed", c.seed},
           {"schedule",
            {{"boundary_ab", c.schedule.boundary_ab},
             {"boundary_bc", c.schedule.boundary_bc},
             {"enabled", c.schedule.enabled}}},
           {"dims", {{"hidden", c.dims.hidden}, {"heads", c.dims.heads}, {"layers", c.dims.layers}}},
           {"ppo",
            {{"clip_eps", q.clip_eps},
             {"value_clip", q.value_clip},
             {"adv_clip", q.adv_clip},
             {"gamma", q.gamma},
             {"gae_lambda", q.gae_lambda},
             {"entropy_coef", q.entropy_coef},
             {"pin_entropy", q.pin_entropy},
             {"value_coef", q.value_coef},
             {"lr_peak", q.lr_peak},
             {"lr_floor", q.lr_floor},
             {"grad_norm_cap", q.grad_norm_cap},
             {"reward_scale", q.reward_scale},
             {"adam_beta1", q.adam_beta1},
             {"adam_beta2", q.adam_beta2},
             {"adam_eps", q.adam_eps},
             {"minibatch_instances", q.minibatch_instances},
             {"update_epochs", q.update_epochs},
             {"instances_per_epoch", q.instances_per_epoch},
             {"multistart", q.multistart},
             {"threads", q.threads}}}};
  return doc.dump(2) + "\n";
}

// Journal -------------------------------------------------------------------

void TrainingJournal::append(const EpochRecord& record) {
  if (!records_.empty() && record.epoch != records_.back().epoch + 1) {
    throw InvalidArgument("journal records must be appended in epoch order");
  }
  records_.push_back(record);
}

std::string TrainingJournal::to_csv(bool include_timing) const {
  std::ostringstream out;
  out << "epoch,phase,phase_start,mean_cost,feasibility_rate,policy_loss,value_loss,entropy,lr";
  if (include_timing) out << ",wall_time";
  out << "\n";
  for (const EpochRecord& r : records_) {
    out << r.epoch << ',' << curriculum::to_string(r.phase) << ',' << (r.phase_start ? 1 : 0) << ','
        << fmt(r.mean_cost) << ',' << fmt(r.feasibility_rate) << ',' << fmt(r.policy_loss) << ','
        << fmt(r.value_loss) << ',' << fmt(r.entropy) << ',' << fmt(r.lr);
    if (include_timing) out << ',' << fmt(r.wall_time);
    out << "\n";
  }
  return out.str();
}

std::string TrainingJournal::to_json(bool include_timing) const {
  json arr = json::array();
  for (const EpochRecord& r : records_) {
    json j{{"epoch", r.epoch},
           {"phase", std::string(curriculum::to_string(r.phase))},
           {"phase_start", r.phase_start},
           {"mean_cost", finite_or_null(r.mean_cost)},
           {"feasibility_rate", r.feasibility_rate},
           {"policy_loss", r.policy_loss},
           {"value_loss", r.value_loss},
           {"entropy", r.entropy},
           {"lr", r.lr}};
    if (include_timing) j["wall_time"] = r.wall_time;
    arr.push_back(std::move(j));
  }
  return json{{"records", arr}}.dump(2) + "\n";
}

TrainingJournal TrainingJournal::from_json(const std::string& text) {
  TrainingJournal journal;
  try {
    const json doc = json::parse(text);
    for (const json& j : doc.at("records")) {
      EpochRecord r;
      r.epoch = j.at("epoch").get<int>();
      r.phase = curriculum::phase_from_string(j.at("phase").get<std::string>());
      r.phase_start = j.at("phase_start").get<bool>();
      r.mean_cost = number_or_nan(j.at("mean_cost"));
      r.feasibility_rate = j.at("feasibility_rate").get<double>();
      r.policy_loss = j.at("policy_loss").get<double>();
      r.value_loss = j.at("value_loss").get<double>();
      r.entropy = j.at("entropy").get<double>();
      r.lr = j.at("lr").get<double>();
      r.wall_time = j.value("wall_time", 0.0);
      journal.append(r);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad journal: ") + e.what());
  }
  return journal;
}

// Training ------------------------------------------------------------------

std::vector<std::shared_ptr<const Instance>> epoch_instances(const TrainConfig& config, int epoch) {
  if (config.classes.empty()) throw InvalidArgument("training config has no instance classes");
  std::vector<std::shared_ptr<const Instance>> out;
  out.reserve(static_cast<std::size_t>(config.ppo.instances_per_epoch));
  for (int i = 0; i < config.ppo.instances_per_epoch; ++i) {
    gen::GenConfig g;
    g.n_customers = config.n_customers;
    g.n_stations = config.n_stations;
    g.class_spec = config.classes[static_cast<std::size_t>(i) % config.classes.size()];
    g.seed = derive_seed(config.seed,
                         {kInstanceStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i)});
    out.push_back(std::make_shared<const Instance>(gen::generate(g)));
  }
  return out;
}

namespace {

void validate(const TrainConfig& c) {
  if (c.n_customers < 1 || c.n_stations < 0) throw InvalidArgument("training needs N >= 1 and M >= 0");
  if (c.epochs < 1) throw InvalidArgument("epochs must be positive");
  if (!c.ppo.valid()) throw InvalidArgument("invalid PPO config");
  if (c.schedule.enabled && !c.schedule.valid()) throw InvalidArgument("invalid curriculum schedule");
  if (c.ppo.multistart > c.n_customers) throw InvalidArgument("multistart exceeds the customer count");
}

std::string checkpoint_name(curriculum::PhaseId phase) {
  return "policy_phase" + std::string(curriculum::to_string(phase)) + ".json";
}

}  // namespace

TrainState train(const TrainConfig& config, const TrainOptions& options) {
  validate(config);
  TrainState state;
  if (options.resume) {
    state = *options.resume;
    if (!(state.params.dims == config.dims)) throw InvalidArgument("resume state dims differ from the config");
  } else {
    state.params = init_params(derive_seed(config.seed, {kInitStream}), config.dims);
  }
  const int threads = resolve_threads(config.ppo.threads);
  long global_step = state.adam.step;

  if (options.out_dir) io::write_text(*options.out_dir / "config.json", train_config_to_json(config));

  for (int epoch = state.next_epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const curriculum::PhaseId phase = curriculum::phase_for_epoch(epoch, config.schedule);
    const PPOConfig cfg = curriculum::hyperparams_for_phase(phase, config.ppo);
    const ConstraintSet constraints = curriculum::constraint_set(phase);
    const auto instances = epoch_instances(config, epoch);

    std::vector<BatchGroup> batch(instances.size());
    parallel_for(instances.size(), threads, [&](std::size_t i) {
      const std::uint64_t seed =
          derive_seed(config.seed, {kRolloutStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i)});
      policy::RolloutResult r =
          policy::rollout(instances[i], state.params, constraints, policy::DecodeMode::Sample, cfg.multistart, seed);
      batch[i] = BatchGroup{instances[i], std::move(r.trajectories)};
    });

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.phase_start = epoch == 0 || curriculum::phase_for_epoch(epoch - 1, config.schedule) != phase;
    double cost_sum = 0.0;
    int feasible = 0;
    for (const BatchGroup& g : batch) {
      double best = std::numeric_limits<double>::infinity();
      for (const policy::Trajectory& t : g.trajectories) {
        if (t.feasible) best = std::min(best, t.solution.cost);
      }
      if (std::isfinite(best)) {
        cost_sum += best;
        ++feasible;
      }
    }
    rec.feasibility_rate = static_cast<double>(feasible) / static_cast<double>(batch.size());
    rec.mean_cost = feasible > 0 ? cost_sum / feasible : std::numeric_limits<double>::quiet_NaN();

    const Advantages adv = compute_advantages(batch, cfg);
    const LearningRate lr = [&](long step) {
      return lr_schedule(step, phase, cfg, config.schedule, config.epochs);
    };
    rec.lr = lr(global_step);
    const LossStats stats =
        ppo_update(state.params, state.adam, batch, adv, cfg, lr,
                   derive_seed(config.seed, {kUpdateStream, static_cast<std::uint64_t>(epoch)}), global_step);
    rec.policy_loss = stats.policy_loss;
    rec.value_loss = stats.value_loss;
    rec.entropy = stats.entropy;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.journal.append(rec);
    state.next_epoch = epoch + 1;
    if (options.on_epoch) options.on_epoch(rec);

    if (options.out_dir) {
      const bool last = epoch + 1 == config.epochs;
      const bool phase_end = last || curriculum::phase_for_epoch(epoch + 1, config.schedule) != phase;
      io::write_text(*options.out_dir / "journal.csv", state.journal.to_csv());
      io::write_text(*options.out_dir / "journal.json", state.journal.to_json());
      if (phase_end) {
        policy::save_params(state.params, *options.out_dir / checkpoint_name(phase));
        save_train_state(state, *options.out_dir / "state");
      }
      if (last) policy::save_params(state.params, *options.out_dir / "policy_final.json");
    }
  }
  return state;
}

void save_train_state(const TrainState& state, const std::filesystem::path& dir) {
  policy::save_params(state.params, dir / "params.json");
  json adam{{"step", state.adam.step}, {"m", matrices_to_json(state.adam.m)}, {"v", matrices_to_json(state.adam.v)}};
  io::write_text(dir / "optimizer.json", adam.dump() + "\n");
  io::write_text(dir / "journal.json", state.journal.to_json());
  io::write_text(dir / "progress.json", json{{"next_epoch", state.next_epoch}}.dump() + "\n");
}

TrainState load_train_state(const std::filesystem::path& dir) {
  TrainState state;
  state.params = policy::load_params(dir / "params.json");
  try {
    const json adam = json::parse(io::read_text(dir / "optimizer.json"));
    state.adam.step = adam.at("step").get<long>();
    state.adam.m = matrices_from_json(adam.at("m"));
    state.adam.v = matrices_from_json(adam.at("v"));
    state.next_epoch = json::parse(io::read_text(dir / "progress.json")).at("next_epoch").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad training state: ") + e.what());
  }
  state.journal = TrainingJournal::from_json(io::read_text(dir / "journal.json"));
  if (static_cast<int>(state.journal.size()) != state.next_epoch) {
    throw FormatError("training state journal length does not match its epoch counter");
  }
  return state;
}

}  // namespace evrptw::ppo
