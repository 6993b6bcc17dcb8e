#include "run/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace cnf::run {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size(), errc::invalid_argument,
          "config: key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    require(used == v.size(), errc::invalid_argument, "trailing characters");
    return out;
  } catch (const std::exception&) {
    fail(errc::invalid_argument, "config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  fail(errc::invalid_argument, "config: key '" + key + "' expects a boolean, got '" + v + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define INT_FIELD(name)                                                               \
  {#name, Field{[](const RunConfig& c) { return std::to_string(c.name); },            \
                [](RunConfig& c, const std::string& v) { c.name = parse_int(#name, v); }}}
#define DBL_FIELD(name)                                                               \
  {#name, Field{[](const RunConfig& c) { return fmt_double(c.name); },                \
                [](RunConfig& c, const std::string& v) { c.name = parse_double(#name, v); }}}
#define STR_FIELD(name)                                                               \
  {#name, Field{[](const RunConfig& c) { return c.name; },                            \
                [](RunConfig& c, const std::string& v) { c.name = v; }}}
#define BOOL_FIELD(name)                                                              \
  {#name, Field{[](const RunConfig& c) { return std::string(c.name ? "1" : "0"); },   \
                [](RunConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      INT_FIELD(corpus_size),
      INT_FIELD(hr_height),
      INT_FIELD(hr_width),
      DBL_FIELD(grf_beta),
      INT_FIELD(scale),
      INT_FIELD(num_scales),
      INT_FIELD(steps_per_scale),
      INT_FIELD(hidden_channels),
      INT_FIELD(cond_channels),
      DBL_FIELD(lr0),
      DBL_FIELD(lr_decay),
      INT_FIELD(lr_decay_interval),
      DBL_FIELD(beta1),
      DBL_FIELD(beta2),
      DBL_FIELD(adam_eps),
      DBL_FIELD(ema_decay),
      INT_FIELD(epochs),
      INT_FIELD(batch_size),
      DBL_FIELD(perceptual_weight),
      DBL_FIELD(jitter),
      DBL_FIELD(grad_clip),
      BOOL_FIELD(actnorm_data_init),
      DBL_FIELD(tau),
      INT_FIELD(ensemble_n),
      STR_FIELD(eval_variants),
      INT_FIELD(map_limit),
      STR_FIELD(out_dir),
      STR_FIELD(manifest),
      STR_FIELD(checkpoint),
      STR_FIELD(checkpoint_perceptual),
      STR_FIELD(input_grid),
      STR_FIELD(resume_checkpoint),
      INT_FIELD(resume_epoch),
      {"seed", Field{[](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, const std::string& v) {
                       c.seed = static_cast<std::uint64_t>(parse_int("seed", v));
                     }}},
  };
  return table;
}

#undef INT_FIELD
#undef DBL_FIELD
#undef STR_FIELD
#undef BOOL_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields())
    if (name == key) return &field;
  return nullptr;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  require(f != nullptr, errc::unknown_key, "config: unknown key '" + key + "'");
  f->set(*this, value);
}

std::string RunConfig::get(const std::string& key) const {
  const Field* f = find_field(key);
  require(f != nullptr, errc::unknown_key, "config: unknown key '" + key + "'");
  return f->get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, field] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), errc::io_error, "config: cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, errc::invalid_argument,
            "config: line " + std::to_string(lineno) + " of " + path.string() +
                " is not 'key = value'");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::save_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), errc::io_error, "config: cannot open " + path.string() + " for writing");
  for (const auto& key : keys()) out << key << " = " << get(key) << "\n";
  require(out.good(), errc::io_error, "config: write failed for " + path.string());
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig cfg;
  cfg.scale_factor = scale;
  cfg.num_scales = num_scales;
  cfg.steps_per_scale = steps_per_scale;
  cfg.hidden_channels = hidden_channels;
  cfg.cond_channels = cond_channels;
  return cfg;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig cfg;
  cfg.lr0 = lr0;
  cfg.decay = lr_decay;
  cfg.decay_interval = lr_decay_interval;
  cfg.beta1 = beta1;
  cfg.beta2 = beta2;
  cfg.eps = adam_eps;
  cfg.ema_decay = ema_decay;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.perceptual_weight = perceptual_weight;
  cfg.perceptual_tau = tau;
  cfg.jitter = jitter;
  cfg.grad_clip = grad_clip;
  cfg.actnorm_data_init = actnorm_data_init;
  cfg.seed = seed;
  return cfg;
}

}  // namespace cnf::run
