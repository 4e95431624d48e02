#pragma once

// Experiment configuration: INI file with sections, command-line overrides,
// and a stable fingerprint of the effective settings.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "leasch/dqn.hpp"
#include "leasch/errors.hpp"
#include "leasch/sandbox.hpp"
#include "leasch/sched.hpp"
#include "leasch/simnr.hpp"

namespace leasch::config {

struct ExperimentConfig {
  sandbox::SandboxConfig sandbox;
  dqn::DqnHyperparams dqn;
  int episodes = 500;
  std::uint64_t train_seed = 1;

  simnr::CellConfig cell;
  std::vector<std::string> schedulers{"leasch"};
  std::vector<std::uint64_t> seeds;  // filled with 1..100 by default
  std::map<std::string, std::vector<std::uint64_t>> seed_overrides;
  std::string checkpoint;  // empty: <out>/checkpoint.json
  std::string out_dir = "out";
  int jobs = 1;
  int curve_units = 10;
  double pf_tau = 100.0;

  std::string checkpoint_path() const { return checkpoint.empty() ? out_dir + "/checkpoint.json" : checkpoint; }

  const std::vector<std::uint64_t>& seeds_for(const std::string& scheduler) const {
    auto it = seed_overrides.find(scheduler);
    return it == seed_overrides.end() ? seeds : it->second;
  }

  void validate() const {
    sandbox.validate();
    dqn.validate();
    cell.validate();
    if (sandbox.n_ue != cell.n_ue) throw ConfigError("sandbox and cell UE counts differ");
    if (episodes < 0) throw ConfigError("episodes must be >= 0");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (curve_units < 1) throw ConfigError("curve_units must be >= 1");
    if (!(pf_tau >= 1.0)) throw ConfigError("pf_tau must be >= 1");
    auto check_seeds = [](const std::vector<std::uint64_t>& s, const std::string& what) {
      if (s.empty()) throw ConfigError(what + " seed list is empty");
      if (std::set<std::uint64_t>(s.begin(), s.end()).size() != s.size()) {
        throw ConfigError(what + " seed list has duplicates");
      }
    };
    check_seeds(seeds, "evaluation");
    for (const auto& [name, s] : seed_overrides) check_seeds(s, name);
    for (const auto& s : schedulers) {
      bool known = false;
      for (const auto& n : sched::scheduler_names()) known = known || n == s;
      if (!known) throw ConfigError("unknown scheduler '" + s + "' (valid: rr, pf, bestcqi, leasch)");
    }
  }
};

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline std::uint64_t parse_u64(const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw ConfigError("not an integer: '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("not an integer: '" + s + "'");
  }
}

/// "N" means seeds 1..N; "a,b,c" is an explicit list.
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  if (text.find(',') == std::string::npos) {
    const auto n = parse_u64(text);
    if (n == 0) throw ConfigError("seed count must be positive");
    std::vector<std::uint64_t> s(n);
    for (std::uint64_t i = 0; i < n; ++i) s[i] = i + 1;
    return s;
  }
  std::vector<std::uint64_t> s;
  for (const auto& item : split_list(text)) s.push_back(parse_u64(item));
  return s;
}

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) out.push_back(static_cast<int>(parse_u64(item)));
  return out;
}

inline ExperimentConfig defaults() {
  ExperimentConfig c;
  c.seeds = parse_seeds("100");
  return c;
}

namespace detail {

using boost::property_tree::ptree;

template <typename T>
void read(const ptree& section, const std::string& key, T& target, std::set<std::string>& used) {
  if (auto v = section.get_child_optional(key)) {
    used.insert(key);
    try {
      target = v->get_value<T>();
    } catch (const boost::property_tree::ptree_error&) {
      throw ConfigError("bad value for '" + key + "': '" + v->data() + "'");
    }
  }
}

inline void reject_unknown(const std::string& name, const ptree& section, const std::set<std::string>& used) {
  for (const auto& [key, _] : section) {
    if (!used.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
  }
}

}  // namespace detail

inline ExperimentConfig load_ini(std::istream& in) {
  using detail::ptree;
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  ExperimentConfig c = defaults();
  for (const auto& [name, section] : tree) {
    std::set<std::string> used;
    if (section.empty() && !section.data().empty()) throw ConfigError("key '" + name + "' outside a section");
    if (name == "train") {
      detail::read(section, "episodes", c.episodes, used);
      detail::read(section, "seed", c.train_seed, used);
      detail::read(section, "checkpoint", c.checkpoint, used);
    } else if (name == "sandbox") {
      detail::read(section, "episode_length", c.sandbox.episode_length, used);
      detail::read(section, "penalty", c.sandbox.penalty, used);
      detail::read(section, "p_elig", c.sandbox.p_elig, used);
      detail::read(section, "channel_redraw_period", c.sandbox.channel_redraw_period, used);
    } else if (name == "dqn") {
      auto& h = c.dqn;
      detail::read(section, "lr", h.lr, used);
      detail::read(section, "gamma", h.gamma, used);
      detail::read(section, "minibatch", h.minibatch, used);
      detail::read(section, "target_period", h.target_period, used);
      detail::read(section, "smoothing", h.smoothing, used);
      detail::read(section, "eps_start", h.eps_start, used);
      detail::read(section, "eps_floor", h.eps_floor, used);
      detail::read(section, "eps_decay", h.eps_decay, used);
      detail::read(section, "grad_threshold", h.grad_threshold, used);
      detail::read(section, "replay_capacity", h.replay_capacity, used);
      std::string hidden;
      detail::read(section, "hidden", hidden, used);
      if (!hidden.empty()) h.hidden = parse_int_list(hidden);
    } else if (name == "cell") {
      auto& k = c.cell;
      bool has_bw = section.get_child_optional("bandwidth_mhz").has_value();
      bool has_rb = section.get_child_optional("n_rb").has_value();
      detail::read(section, "numerology", k.numerology, used);
      if (!has_bw && !has_rb && used.contains("numerology")) {
        const auto preset = simnr::CellConfig::preset(k.numerology);
        k.bandwidth_mhz = preset.bandwidth_mhz;
        k.n_rb = preset.n_rb;
      }
      detail::read(section, "bandwidth_mhz", k.bandwidth_mhz, used);
      detail::read(section, "n_rb", k.n_rb, used);
      detail::read(section, "rbg_size", k.rbg_size, used);
      detail::read(section, "n_ue", k.n_ue, used);
      detail::read(section, "frames", k.frames, used);
      detail::read(section, "coherence_s", k.coherence_s, used);
      detail::read(section, "bler", k.bler, used);
      detail::read(section, "harq_rtt", k.harq_rtt, used);
      detail::read(section, "max_retx", k.max_retx, used);
      detail::read(section, "full_buffer", k.full_buffer, used);
      detail::read(section, "p_buffer_on", k.p_buffer_on, used);
      detail::read(section, "custom_grid", k.custom_grid, used);
      detail::read(section, "tb_per_slot", k.tb_per_slot, used);
      c.sandbox.n_ue = k.n_ue;
    } else if (name == "eval") {
      std::string schedulers, seeds;
      detail::read(section, "schedulers", schedulers, used);
      detail::read(section, "seeds", seeds, used);
      detail::read(section, "out", c.out_dir, used);
      detail::read(section, "jobs", c.jobs, used);
      detail::read(section, "curve_units", c.curve_units, used);
      detail::read(section, "pf_tau", c.pf_tau, used);
      if (!schedulers.empty()) c.schedulers = split_list(schedulers);
      if (!seeds.empty()) c.seeds = parse_seeds(seeds);
      for (const auto& [key, value] : section) {
        if (key.rfind("seeds_", 0) == 0) {
          used.insert(key);
          c.seed_overrides[key.substr(6)] = parse_seeds(value.data());
        }
      }
    } else {
      throw ConfigError("unknown config section [" + name + "]");
    }
    detail::reject_unknown(name, section, used);
  }
  return c;
}

inline ExperimentConfig load_ini_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  return load_ini(in);
}

/// Everything that influences results; output location and parallelism do not.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& k = c.cell;
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [name, s] : c.seed_overrides) overrides[name] = s;
  return {{"train", {{"episodes", c.episodes}, {"seed", c.train_seed}}},
          {"sandbox",
           {{"n_ue", c.sandbox.n_ue},
            {"episode_length", c.sandbox.episode_length},
            {"penalty", c.sandbox.penalty},
            {"p_elig", c.sandbox.p_elig},
            {"channel_redraw_period", c.sandbox.channel_redraw_period}}},
          {"dqn", c.dqn},
          {"cell",
           {{"numerology", k.numerology},
            {"bandwidth_mhz", k.bandwidth_mhz},
            {"n_rb", k.n_rb},
            {"rbg_size", k.rbg_size},
            {"n_ue", k.n_ue},
            {"frames", k.frames},
            {"coherence_s", k.coherence_s},
            {"bler", k.bler},
            {"harq_rtt", k.harq_rtt},
            {"max_retx", k.max_retx},
            {"full_buffer", k.full_buffer},
            {"p_buffer_on", k.p_buffer_on},
            {"custom_grid", k.custom_grid},
            {"tb_per_slot", k.tb_per_slot}}},
          {"eval",
           {{"schedulers", c.schedulers},
            {"seeds", c.seeds},
            {"seed_overrides", overrides},
            {"curve_units", c.curve_units},
            {"pf_tau", c.pf_tau}}}};
}

/// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
inline std::string fingerprint(const ExperimentConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace leasch::config
