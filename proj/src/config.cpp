#include "quadnav/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

extern char** environ;

namespace quadnav::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

long long parse_int(const std::string& where, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0') bad(where, "expected integer, got '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& where, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  if (!v.empty() && v[0] == '-') bad(where, "expected non-negative integer, got '" + v + "'");
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0')
    bad(where, "expected non-negative integer, got '" + v + "'");
  return x;
}

double parse_double(const std::string& where, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (errno != 0 || end == v.c_str() || *end != '\0') bad(where, "expected number, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& where, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad(where, "expected true/false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply_kv(RunConfig& c, const std::string& section, const std::string& key,
              const std::string& value) {
  const std::string where = "[" + section + "] " + key;
  if (section == "run") {
    if (key == "task") {
      const auto t = world::task_from_name(value);
      if (!t) bad(where, "unknown task '" + value + "'");
      c.task = *t;
    } else if (key == "seed") {
      c.seed = parse_u64(where, value);
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else {
      bad(where, "unknown key");
    }
  } else if (section == "arch") {
    if (key == "image_size") c.image_size = static_cast<int>(parse_int(where, value));
    else if (key == "latent_dim") c.latent_dim = static_cast<int>(parse_int(where, value));
    else if (key == "use_pool") c.use_pool = parse_bool(where, value);
    else if (key == "pool_mode") c.pool_mode = value;
    else if (key == "extra_fc") c.extra_fc = parse_bool(where, value);
    else if (key == "hl_init") c.hl_init = value;
    else if (key == "hl_mode") c.hl_mode = value;
    else if (key == "flat_baseline") c.flat_baseline = parse_bool(where, value);
    else bad(where, "unknown key");
  } else if (section == "ars") {
    if (key == "num_directions") c.ars.num_directions = static_cast<int>(parse_int(where, value));
    else if (key == "top_k") c.ars.top_k = static_cast<int>(parse_int(where, value));
    else if (key == "step_size") c.ars.step_size = parse_double(where, value);
    else if (key == "noise_std") c.ars.noise_std = parse_double(where, value);
    else if (key == "episodes_per_eval")
      c.ars.episodes_per_eval = static_cast<int>(parse_int(where, value));
    else if (key == "iterations") c.iterations = static_cast<int>(parse_int(where, value));
    else if (key == "checkpoint_every") c.checkpoint_every = static_cast<int>(parse_int(where, value));
    else bad(where, "unknown key");
  } else if (section == "runner") {
    if (key == "workers") c.workers = static_cast<int>(parse_int(where, value));
    else if (key == "endpoints") c.endpoints = parse_list(value);
    else bad(where, "unknown key");
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' outside any section");
    if (!seen.insert(section + "." + key).second)
      throw ConfigError("duplicate key '" + key + "' in [" + section + "]");
    apply_kv(c, section, key, value);
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path, bool apply_env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config_text(ss.str());
  if (apply_env) apply_env_overrides(c);
  return c;
}

void apply_env_overrides(RunConfig& config) {
  static const char* kPrefix = "QUADNAV_";
  static const std::vector<std::string> kSections{"run", "arch", "ars", "runner"};
  for (char** env = environ; env && *env; ++env) {
    const std::string entry = *env;
    if (entry.rfind(kPrefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(std::strlen(kPrefix), eq - std::strlen(kPrefix));
    const std::string value = entry.substr(eq + 1);
    const auto us = name.find('_');
    if (us == std::string::npos)
      throw ConfigError("environment override " + entry.substr(0, eq) +
                        " must look like QUADNAV_SECTION_KEY");
    const std::string section = lower(name.substr(0, us));
    const std::string key = lower(name.substr(us + 1));
    if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
      throw ConfigError("environment override references unknown section: " + entry.substr(0, eq));
    apply_kv(config, section, key, value);
  }
  validate(config);
}

std::string canonical_text(const RunConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  out << "task = " << world::task_name(c.task) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "output_dir = " << c.output_dir << "\n";
  out << "\n[arch]\n";
  out << "image_size = " << c.image_size << "\n";
  out << "latent_dim = " << c.latent_dim << "\n";
  out << "use_pool = " << (c.use_pool ? "true" : "false") << "\n";
  out << "pool_mode = " << c.pool_mode << "\n";
  out << "extra_fc = " << (c.extra_fc ? "true" : "false") << "\n";
  out << "hl_init = " << c.hl_init << "\n";
  out << "hl_mode = " << c.hl_mode << "\n";
  out << "flat_baseline = " << (c.flat_baseline ? "true" : "false") << "\n";
  out << "\n[ars]\n";
  out << "num_directions = " << c.ars.num_directions << "\n";
  out << "top_k = " << c.ars.top_k << "\n";
  out << "step_size = " << fmt_double(c.ars.step_size) << "\n";
  out << "noise_std = " << fmt_double(c.ars.noise_std) << "\n";
  out << "episodes_per_eval = " << c.ars.episodes_per_eval << "\n";
  out << "iterations = " << c.iterations << "\n";
  out << "checkpoint_every = " << c.checkpoint_every << "\n";
  out << "\n[runner]\n";
  out << "workers = " << c.workers << "\n";
  out << "endpoints = ";
  for (std::size_t i = 0; i < c.endpoints.size(); ++i) {
    if (i) out << ",";
    out << c.endpoints[i];
  }
  out << "\n";
  return out.str();
}

void validate(const RunConfig& c) {
  if (c.image_size != 16 && c.image_size != 32)
    throw ConfigError("[arch] image_size must be 16 or 32");
  if (c.latent_dim != 1 && c.latent_dim != 2 && c.latent_dim != 4 && c.latent_dim != 8)
    throw ConfigError("[arch] latent_dim must be one of 1, 2, 4, 8");
  if (c.pool_mode != "max" && c.pool_mode != "mean")
    throw ConfigError("[arch] pool_mode must be max or mean");
  if (c.hl_init != "zeros" && c.hl_init != "uniform")
    throw ConfigError("[arch] hl_init must be zeros or uniform");
  if (!policy::hl_mode_from_name(c.hl_mode))
    throw ConfigError("[arch] hl_mode '" + c.hl_mode + "' is not recognized");
  if (c.ars.num_directions < 1) throw ConfigError("[ars] num_directions must be >= 1");
  if (c.ars.top_k < 1 || c.ars.top_k > c.ars.num_directions)
    throw ConfigError("[ars] need 1 <= top_k <= num_directions");
  if (!(c.ars.step_size > 0)) throw ConfigError("[ars] step_size must be > 0");
  if (!(c.ars.noise_std > 0)) throw ConfigError("[ars] noise_std must be > 0");
  if (c.ars.episodes_per_eval < 1) throw ConfigError("[ars] episodes_per_eval must be >= 1");
  if (c.iterations < 0) throw ConfigError("[ars] iterations must be >= 0");
  if (c.checkpoint_every < 1) throw ConfigError("[ars] checkpoint_every must be >= 1");
  if (c.workers < 1) throw ConfigError("[runner] workers must be >= 1");
  if (c.output_dir.empty()) throw ConfigError("[run] output_dir must not be empty");
}

policy::PolicySpec make_spec(const RunConfig& c) {
  policy::PolicySpec spec;
  spec.task = c.task;
  spec.arch.image_size = c.image_size;
  spec.arch.latent_dim = c.latent_dim;
  spec.arch.use_pool = c.use_pool;
  spec.arch.pool_mode = c.pool_mode == "max" ? nnet::PoolMode::Max : nnet::PoolMode::Mean;
  spec.arch.extra_fc = c.extra_fc;
  spec.arch.task_input_dim = policy::task_input_dim(c.task);
  spec.hl_mode = *policy::hl_mode_from_name(c.hl_mode);
  spec.flat_baseline = c.flat_baseline;
  return spec;
}

}  // namespace quadnav::config
