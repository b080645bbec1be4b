#include "metarl/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "metarl/baselines/baselines.hpp"

namespace metarl::harness {

Method parse_method(const std::string& text) {
  if (text == "tesp") return Method::tesp;
  if (text == "maml") return Method::maml;
  if (text == "meta_sgd") return Method::meta_sgd;
  if (text == "adapt_sv") return Method::adapt_sv;
  throw std::invalid_argument("unknown method '" + text + "' (expected tesp, maml, meta_sgd or adapt_sv)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::tesp:
      return "tesp";
    case Method::maml:
      return "maml";
    case Method::meta_sgd:
      return "meta_sgd";
    case Method::adapt_sv:
      return "adapt_sv";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw std::invalid_argument("config: '" + key + "' expects true or false, got '" + text + "'");
}

template <typename T>
std::vector<T> to_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<T>(to_u64(key, item)));
  if (out.empty()) throw std::invalid_argument("config: '" + key + "' expects a comma-separated list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  return fmt::format("{}", fmt::join(values, ","));
}

std::string num(double v) { return fmt::format("{}", v); }

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_FIELD(sec, name, member)                                                      \
  Field {                                                                                  \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = to_u64(name, v); },     \
        [](const RunConfig& c) { return std::to_string(c.member); }                        \
  }
#define REAL_FIELD(sec, name, member)                                                      \
  Field {                                                                                  \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = to_double(name, v); },  \
        [](const RunConfig& c) { return num(c.member); }                                   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"run", "method", [](RunConfig& c, const std::string& v) { c.method = parse_method(trim(v)); },
       [](const RunConfig& c) { return method_name(c.method); }},
      {"run", "variant", [](RunConfig& c, const std::string& v) { c.variant = tesp::parse_variant(trim(v)); },
       [](const RunConfig& c) { return tesp::variant_name(c.variant); }},
      {"run", "env",
       [](RunConfig& c, const std::string& v) {
         envs::EnvId::parse(trim(v));
         c.env = trim(v);
       },
       [](const RunConfig& c) { return c.env; }},
      SIZE_FIELD("run", "seed", seed),
      {"run", "seeds", [](RunConfig& c, const std::string& v) { c.seeds = to_list<std::uint64_t>("seeds", v); },
       [](const RunConfig& c) { return join(c.seeds); }},
      {"run", "output", [](RunConfig& c, const std::string& v) { c.output = trim(v); },
       [](const RunConfig& c) { return c.output; }},
      SIZE_FIELD("run", "workers", workers),
      {"run", "deterministic_eval",
       [](RunConfig& c, const std::string& v) { c.deterministic_eval = to_bool("deterministic_eval", v); },
       [](const RunConfig& c) { return std::string(c.deterministic_eval ? "true" : "false"); }},
      {"run", "dump_episodes",
       [](RunConfig& c, const std::string& v) { c.dump_episodes = to_bool("dump_episodes", v); },
       [](const RunConfig& c) { return std::string(c.dump_episodes ? "true" : "false"); }},

      SIZE_FIELD("training", "meta_updates", meta_updates),
      SIZE_FIELD("training", "task_batch", task_batch),
      SIZE_FIELD("training", "eval_every", eval_every),
      SIZE_FIELD("training", "train_tasks", train_tasks),
      SIZE_FIELD("training", "eval_tasks", eval_tasks),

      SIZE_FIELD("adapt", "K", adapt.fast_updates),
      SIZE_FIELD("adapt", "N", adapt.episodes_per_round),
      SIZE_FIELD("adapt", "M", adapt.buffer_capacity),
      REAL_FIELD("adapt", "alpha_init", objective.alpha_init),
      REAL_FIELD("adapt", "maml_alpha", maml_alpha),

      REAL_FIELD("objective", "eta", objective.eta),
      REAL_FIELD("objective", "gamma", objective.gamma),
      REAL_FIELD("objective", "ppo_clip", objective.clip_eps),

      REAL_FIELD("optimizer", "lr", optimizer.lr),
      REAL_FIELD("optimizer", "beta1", optimizer.beta1),
      REAL_FIELD("optimizer", "beta2", optimizer.beta2),
      REAL_FIELD("optimizer", "eps", optimizer.eps),
      REAL_FIELD("optimizer", "alpha_max", optimizer.alpha_max),

      SIZE_FIELD("nets", "encoder_hidden", nets.encoder_hidden),
      SIZE_FIELD("nets", "embed_dim", nets.embed_dim),
      {"nets", "policy_hidden",
       [](RunConfig& c, const std::string& v) { c.nets.policy_hidden = to_list<std::size_t>("policy_hidden", v); },
       [](const RunConfig& c) { return join(c.nets.policy_hidden); }},

      SIZE_FIELD("env", "horizon", env_constants.horizon),
      REAL_FIELD("env", "dt", env_constants.dt),
      REAL_FIELD("env", "v_max", env_constants.v_max),
      REAL_FIELD("env", "omega_max", env_constants.omega_max),
      REAL_FIELD("env", "link_length", env_constants.link_length),
      REAL_FIELD("env", "c_ctrl", env_constants.c_ctrl),
      REAL_FIELD("env", "r1", env_constants.r1),
      REAL_FIELD("env", "r2", env_constants.r2),
  };
  return table;
}

#undef SIZE_FIELD
#undef REAL_FIELD

}  // namespace

void RunConfig::validate() const {
  envs::EnvId::parse(env);
  env_constants.validate();
  if (seeds.empty()) throw std::invalid_argument("config: seeds must not be empty");
  if (adapt.fast_updates < 1) throw std::invalid_argument("config: K must be >= 1");
  if (adapt.episodes_per_round < 2) throw std::invalid_argument("config: N must be >= 2");
  if (adapt.buffer_capacity < 1 || adapt.buffer_capacity >= adapt.episodes_per_round) {
    throw std::invalid_argument(fmt::format("config: M must satisfy 1 <= M < N (got M={}, N={})",
                                            adapt.buffer_capacity, adapt.episodes_per_round));
  }
  if (meta_updates < 1) throw std::invalid_argument("config: meta_updates must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
  if (train_tasks < 1 || eval_tasks < 1) throw std::invalid_argument("config: task counts must be >= 1");
  if (task_batch < 1 || task_batch > train_tasks) {
    throw std::invalid_argument(
        fmt::format("config: task_batch must be in [1, train_tasks] (got {} of {})", task_batch, train_tasks));
  }
  if (nets.embed_dim < 1 || nets.encoder_hidden < 1) throw std::invalid_argument("config: network sizes must be >= 1");
  for (std::size_t h : nets.policy_hidden) {
    if (h < 1) throw std::invalid_argument("config: policy_hidden widths must be >= 1");
  }
  if (!(objective.eta >= 0.0)) throw std::invalid_argument("config: eta must be >= 0");
  if (!(objective.gamma > 0.0 && objective.gamma <= 1.0)) throw std::invalid_argument("config: gamma must be in (0, 1]");
  if (!(objective.clip_eps > 0.0)) throw std::invalid_argument("config: ppo_clip must be > 0");
  if (!(optimizer.lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (!(optimizer.alpha_max >= 0.0)) throw std::invalid_argument("config: alpha_max must be >= 0");
  if (method != Method::tesp && variant != tesp::Variant::none) {
    throw std::invalid_argument("config: variant applies to method tesp only");
  }
  if (output.empty()) throw std::invalid_argument("config: output must not be empty");
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw std::invalid_argument("config: key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) {
      const Field* match = nullptr;
      for (const Field& f : fields()) {
        if (section == f.section && key == f.key) match = &f;
      }
      if (match == nullptr) throw std::invalid_argument("config: unknown key '" + key + "' in [" + section + "]");
      match->set(config, value.data());
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += fmt::format("{} = {}\n", f.key, f.get(config));
  }
  return out;
}

envs::Environment make_environment(const RunConfig& config) {
  return envs::Environment(envs::EnvId::parse(config.env), config.env_constants);
}

tesp::LearnerSpec make_learner_spec(const RunConfig& config) {
  const envs::Environment env = make_environment(config);
  switch (config.method) {
    case Method::tesp:
      return tesp::tesp_spec(env, config.nets, config.adapt, config.objective, config.variant);
    case Method::maml:
      return baselines::maml_spec(env, config.nets, config.adapt, config.objective, config.maml_alpha);
    case Method::meta_sgd:
      return baselines::meta_sgd_spec(env, config.nets, config.adapt, config.objective);
    case Method::adapt_sv:
      return baselines::adapt_sv_spec(env, config.nets, config.adapt, config.objective);
  }
  throw std::logic_error("unhandled method");
}

tesp::Learner make_learner(const RunConfig& config) {
  return tesp::Learner(make_learner_spec(config), make_environment(config));
}

}  // namespace metarl::harness
