#include "ptl/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "ptl/errors.hpp"

namespace ptl {

const char* trigger_kind_name(TriggerKind k) {
  switch (k) {
    case TriggerKind::npp: return "npp";
    case TriggerKind::sine: return "sine";
    case TriggerKind::sawtooth: return "sawtooth";
    case TriggerKind::random_pulse: return "random_pulse";
  }
  return "?";
}

TriggerKind trigger_kind_from_name(const std::string& name) {
  for (TriggerKind k : {TriggerKind::npp, TriggerKind::sine,
                        TriggerKind::sawtooth, TriggerKind::random_pulse})
    if (name == trigger_kind_name(k)) return k;
  throw ValidationError("unknown trigger kind: " + name);
}

const char* phase_policy_name(PhasePolicy p) {
  return p == PhasePolicy::fixed ? "fixed" : "uniform_random";
}

PhasePolicy phase_policy_from_name(const std::string& name) {
  if (name == "fixed") return PhasePolicy::fixed;
  if (name == "uniform_random") return PhasePolicy::uniform_random;
  throw ValidationError("unknown phase policy: " + name);
}

const char* optimizer_name(Optimizer o) {
  return o == Optimizer::sgd ? "sgd" : "adam";
}

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ValidationError("unknown optimizer: " + name);
}

namespace {

using nlohmann::json;

// pulls known keys out of a section and rejects leftovers
class Section {
public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_object())
      throw ValidationError("config: section '" + name_ + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) pending_[it.key()] = it.value();
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = pending_.find(key);
    if (it == pending_.end()) return; // keep default
    try {
      out = it->second.get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: bad value for '" + name_ + "." + key + "'");
    }
    pending_.erase(it);
  }

  void get_enum(const char* key, const std::function<void(const std::string&)>& set) {
    auto it = pending_.find(key);
    if (it == pending_.end()) return;
    if (!it->second.is_string())
      throw ValidationError("config: '" + name_ + "." + key + "' must be a string");
    set(it->second.get<std::string>());
    pending_.erase(it);
  }

  json take(const char* key) {
    auto it = pending_.find(key);
    if (it == pending_.end()) return json::object();
    json v = it->second;
    pending_.erase(it);
    return v;
  }

  void finish() const {
    if (!pending_.empty())
      throw ValidationError("config: unknown key '" + name_ + "." +
                            pending_.begin()->first + "'");
  }

private:
  std::string name_;
  std::map<std::string, json> pending_;
};

TriggerSpec parse_trigger(const json& j) {
  TriggerSpec t;
  Section s(j, "trigger");
  s.get_enum("kind", [&](const std::string& v) { t.kind = trigger_kind_from_name(v); });
  s.get("amplitude_fraction", t.amplitude_fraction);
  s.get("period_s", t.period_s);
  s.get("duty_cycle", t.duty_cycle);
  s.get_enum("phase_policy",
             [&](const std::string& v) { t.phase_policy = phase_policy_from_name(v); });
  s.get("fixed_phase_s", t.fixed_phase_s);
  s.get("random_phase_range", t.random_phase_range);
  s.get("seed", t.seed);
  s.finish();
  return t;
}

TrainConfig parse_train(const json& j) {
  TrainConfig t;
  Section s(j, "train");
  s.get("batch_size", t.batch_size);
  s.get("learning_rate", t.learning_rate);
  s.get("max_epochs", t.max_epochs);
  s.get("patience", t.patience);
  s.get("validation_fraction", t.validation_fraction);
  s.get_enum("optimizer",
             [&](const std::string& v) { t.optimizer = optimizer_from_name(v); });
  s.get("hidden_width", t.hidden_width);
  s.get("seed", t.seed);
  s.finish();
  return t;
}

AugmentSpec parse_augment(const json& j) {
  AugmentSpec a;
  Section s(j, "augment");
  s.get_enum("kind", [&](const std::string& v) { a.kind = augment_from_name(v); });
  s.get("magnitude", a.magnitude);
  s.get("seed", a.seed);
  s.finish();
  return a;
}

SyntheticSpec parse_synthetic(const json& j) {
  SyntheticSpec y;
  Section s(j, "synthetic");
  s.get("n_subjects", y.n_subjects);
  s.get("epochs_per_class", y.epochs_per_class);
  s.get("channels", y.channels);
  s.get("epoch_len", y.epoch_len);
  s.get("sampling_rate_hz", y.sampling_rate_hz);
  s.get("class_freqs_hz", y.class_freqs_hz);
  s.get("noise_sigma", y.noise_sigma);
  s.get("subject_mix_strength", y.subject_mix_strength);
  s.get("seed", y.seed);
  s.finish();
  return y;
}

} // namespace

FullConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("config: ") + ex.what());
  }
  FullConfig cfg;
  Section root(j, "root");
  ExperimentConfig& e = cfg.experiment;
  root.get_enum("strategy",
                [&](const std::string& v) { e.strategy = strategy_from_name(v); });
  root.get("poisoning_rate", e.poisoning_rate);
  root.get("target_class", e.target_class);
  root.get_enum("scenario",
                [&](const std::string& v) { e.scenario = scenario_from_name(v); });
  root.get_enum("model",
                [&](const std::string& v) { e.model_kind = model_kind_from_name(v); });
  root.get_enum("attacker_model", [&](const std::string& v) {
    e.attacker_model_kind = model_kind_from_name(v);
  });
  root.get_enum("alignment",
                [&](const std::string& v) { e.alignment = alignment_from_name(v); });
  root.get("seed", e.seed);
  root.get("repeats", e.repeats);
  root.get("undersample", e.undersample);
  root.get("finetune_label_fraction", e.finetune_label_fraction);
  root.get("la_k_labeled", e.la_k_labeled);
  e.trigger = parse_trigger(root.take("trigger"));
  e.train = parse_train(root.take("train"));
  e.augment_spec = parse_augment(root.take("augment"));
  cfg.synthetic = parse_synthetic(root.take("synthetic"));
  root.finish();
  return cfg;
}

FullConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const FullConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  json j;
  j["strategy"] = strategy_name(e.strategy);
  j["poisoning_rate"] = e.poisoning_rate;
  j["target_class"] = e.target_class;
  j["scenario"] = scenario_name(e.scenario);
  j["model"] = model_kind_name(e.model_kind);
  j["attacker_model"] = model_kind_name(e.attacker_model_kind);
  j["alignment"] = alignment_name(e.alignment);
  j["seed"] = e.seed;
  j["repeats"] = e.repeats;
  j["undersample"] = e.undersample;
  j["finetune_label_fraction"] = e.finetune_label_fraction;
  j["la_k_labeled"] = e.la_k_labeled;
  j["trigger"] = {{"kind", trigger_kind_name(e.trigger.kind)},
                  {"amplitude_fraction", e.trigger.amplitude_fraction},
                  {"period_s", e.trigger.period_s},
                  {"duty_cycle", e.trigger.duty_cycle},
                  {"phase_policy", phase_policy_name(e.trigger.phase_policy)},
                  {"fixed_phase_s", e.trigger.fixed_phase_s},
                  {"random_phase_range", e.trigger.random_phase_range},
                  {"seed", e.trigger.seed}};
  j["train"] = {{"batch_size", e.train.batch_size},
                {"learning_rate", e.train.learning_rate},
                {"max_epochs", e.train.max_epochs},
                {"patience", e.train.patience},
                {"validation_fraction", e.train.validation_fraction},
                {"optimizer", optimizer_name(e.train.optimizer)},
                {"hidden_width", e.train.hidden_width},
                {"seed", e.train.seed}};
  j["augment"] = {{"kind", augment_name(e.augment_spec.kind)},
                  {"magnitude", e.augment_spec.magnitude},
                  {"seed", e.augment_spec.seed}};
  j["synthetic"] = {{"n_subjects", cfg.synthetic.n_subjects},
                    {"epochs_per_class", cfg.synthetic.epochs_per_class},
                    {"channels", cfg.synthetic.channels},
                    {"epoch_len", cfg.synthetic.epoch_len},
                    {"sampling_rate_hz", cfg.synthetic.sampling_rate_hz},
                    {"class_freqs_hz", cfg.synthetic.class_freqs_hz},
                    {"noise_sigma", cfg.synthetic.noise_sigma},
                    {"subject_mix_strength", cfg.synthetic.subject_mix_strength},
                    {"seed", cfg.synthetic.seed}};
  return j.dump(2); // nlohmann objects iterate sorted; output is canonical
}

std::uint64_t config_hash(const FullConfig& cfg) {
  // FNV-1a over the canonical serialization
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_to_json(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace ptl
