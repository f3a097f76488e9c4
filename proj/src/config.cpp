#include "jaanet/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace jaanet {

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof())
    throw ConfigError(key, "invalid value '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key, "invalid boolean '" + text + "' for " + key);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, std::string text) {
  for (char& ch : text)
    if (ch == ',') ch = ' ';
  std::istringstream in(text);
  std::vector<T> out;
  for (std::string tok; in >> tok;) out.push_back(parse_number<T>(key, tok));
  return out;
}

template <typename T>
std::string show(const T& v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

template <typename T>
std::string show_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + show(v[i]);
  return s;
}

#define NUM_FIELD(name, member, type)                                                          \
  {                                                                                            \
    name, {                                                                                    \
      [](RunConfig& c, const std::string& v) { c.member = parse_number<type>(name, v); },      \
          [](const RunConfig& c) { return show(c.member); }                                    \
    }                                                                                          \
  }
#define BOOL_FIELD(name, member)                                                               \
  {                                                                                            \
    name, {                                                                                    \
      [](RunConfig& c, const std::string& v) { c.member = parse_bool(name, v); },              \
          [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }          \
    }                                                                                          \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      NUM_FIELD("network.l", network.l, int),
      NUM_FIELD("network.c", network.c, int),
      NUM_FIELD("network.d", network.d, int),
      NUM_FIELD("network.d_l", network.d_l, int),
      NUM_FIELD("network.n_align", network.n_align, int),
      NUM_FIELD("network.zeta", network.zeta, double),
      NUM_FIELD("network.xi", network.xi, double),
      NUM_FIELD("network.epsilon", network.epsilon, double),
      NUM_FIELD("network.lambda_align", network.lambda_align, double),
      {"network.au_ids",
       {[](RunConfig& c, const std::string& v) {
          c.network.au_ids = parse_list<int>("network.au_ids", v);
          c.network.n_au = static_cast<int>(c.network.au_ids.size());
        },
        [](const RunConfig& c) { return show_list(c.network.au_ids); }}},
      NUM_FIELD("train.epochs", train.epochs, int),
      NUM_FIELD("train.lr0", train.lr0, double),
      NUM_FIELD("train.lr_decay_factor", train.lr_decay_factor, double),
      NUM_FIELD("train.lr_decay_every", train.lr_decay_every, double),
      NUM_FIELD("train.momentum", train.momentum, double),
      NUM_FIELD("train.weight_decay", train.weight_decay, double),
      NUM_FIELD("train.batch_size", train.batch_size, int),
      NUM_FIELD("train.seed", train.seed, std::uint64_t),
      BOOL_FIELD("train.augment", train.augment),
      NUM_FIELD("train.eval_every", train.eval_every, int),
      BOOL_FIELD("train.save_checkpoints", train.save_checkpoints),
      {"train.variant",
       {[](RunConfig& c, const std::string& v) {
          try {
            c.train.variant = parse_variant(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError("train.variant", std::string(e.what()) + " (train.variant)");
          }
        },
        [](const RunConfig& c) { return to_string(c.train.variant); }}},
      {"data.manifest",
       {[](RunConfig& c, const std::string& v) { c.data.manifest = v; },
        [](const RunConfig& c) { return c.data.manifest; }}},
      NUM_FIELD("data.aligned_size", data.aligned_size, int),
      BOOL_FIELD("data.align", data.align),
      NUM_FIELD("data.n_folds", data.n_folds, int),
      NUM_FIELD("data.test_fold", data.test_fold, int),
      NUM_FIELD("synthetic.image_size", synthetic.image_size, int),
      NUM_FIELD("synthetic.samples", synthetic_samples, int),
      NUM_FIELD("synthetic.n_subjects", synthetic.n_subjects, int),
      NUM_FIELD("synthetic.max_rotation_deg", synthetic.max_rotation_deg, double),
      NUM_FIELD("synthetic.max_scale", synthetic.max_scale, double),
      NUM_FIELD("synthetic.max_shift", synthetic.max_shift, double),
      NUM_FIELD("synthetic.shape_jitter", synthetic.shape_jitter, double),
      NUM_FIELD("synthetic.pattern_strength", synthetic.pattern_strength, double),
      NUM_FIELD("synthetic.noise", synthetic.noise, double),
      {"synthetic.rates",
       {[](RunConfig& c, const std::string& v) {
          c.synthetic.rates = parse_list<double>("synthetic.rates", v);
        },
        [](const RunConfig& c) { return show_list(c.synthetic.rates); }}},
      NUM_FIELD("eval.threshold", eval.threshold, double),
      NUM_FIELD("eval.batch_size", eval.batch_size, int),
  };
  return table;
}

#undef NUM_FIELD
#undef BOOL_FIELD

}  // namespace

void RunConfig::finalize() {
  network.n_au = static_cast<int>(network.au_ids.size());
  synthetic.au_ids = network.au_ids;
  synthetic.n_align = network.n_align;
  auto check = [](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key, std::string(e.what()) + " (section " + key + ")");
    }
  };
  check("network", [&] { network.validate(); });
  check("train", [&] { train.validate(); });
  check("synthetic", [&] { synthetic.validate(); });
  if (data.aligned_size < network.l)
    throw ConfigError("data.aligned_size", "data.aligned_size must be at least network.l");
  if (data.n_folds <= 0) throw ConfigError("data.n_folds", "data.n_folds must be positive");
  if (data.test_fold >= data.n_folds)
    throw ConfigError("data.test_fold", "data.test_fold must be below data.n_folds");
  if (synthetic_samples <= 0)
    throw ConfigError("synthetic.samples", "synthetic.samples must be positive");
  if (!(eval.threshold > 0 && eval.threshold < 1))
    throw ConfigError("eval.threshold", "eval.threshold must lie in (0, 1)");
  if (eval.batch_size <= 0) throw ConfigError("eval.batch_size", "eval.batch_size must be positive");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError(key, "unknown configuration key '" + key + "'");
  it->second.set(config, value);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override '" + assignment + "' is not of the form key=value");
  set_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig load_run_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", std::string("cannot parse config: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty())
      throw ConfigError(section, "key '" + section + "' must sit inside a section");
    for (const auto& [key, value] : entries)
      set_value(config, section + "." + key, value.get_value<std::string>());
  }
  return config;
}

std::string to_ini(const RunConfig& config) {
  std::ostringstream out;
  std::string current;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    if (section != current) {
      out << (current.empty() ? "" : "\n") << "[" << section << "]\n";
      current = section;
    }
    out << key.substr(dot + 1) << " = " << field.get(config) << "\n";
  }
  return out.str();
}

}  // namespace jaanet
