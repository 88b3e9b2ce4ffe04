#include "spred/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fmt/format.h>

#include "spred/binary_io.hpp"
#include "spred/errors.hpp"

namespace spred {
namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key " + key + ": cannot parse '" + value + "' as " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) bad_value(key, text, std::is_floating_point_v<T> ? "a number" : "an integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  bad_value(key, text, "a boolean");
}

std::string show(double v) {
  std::string text = fmt::format("{}", v);
  if (std::isfinite(v) && text.find_first_of(".e") == std::string::npos) text += ".0";
  return text;
}
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string show(T v) requires std::is_integral_v<T> {
  return std::to_string(v);
}

#define SPRED_FIELD(SECTION, KEY, TYPE, EXPR)                                                     \
  Field {                                                                                         \
    SECTION, KEY, [](const RunConfig& c) { return show(static_cast<TYPE>(c.EXPR)); },              \
        [](RunConfig& c, const std::string& v) {                                                  \
          if constexpr (std::is_same_v<TYPE, bool>) {                                             \
            c.EXPR = parse_bool(std::string(SECTION) + "." + KEY, v);                             \
          } else {                                                                                \
            c.EXPR = parse_number<TYPE>(std::string(SECTION) + "." + KEY, v);                     \
          }                                                                                       \
        }                                                                                         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SPRED_FIELD("run", "seed", std::uint64_t, pipeline.seed),
      Field{"run", "out", [](const RunConfig& c) { return c.out.string(); },
            [](RunConfig& c, const std::string& v) { c.out = v; }},

      SPRED_FIELD("stream", "seen_domains", int, stream.seen_domains),
      SPRED_FIELD("stream", "unseen_domains", int, stream.unseen_domains),
      SPRED_FIELD("stream", "identities", int, stream.identities),
      SPRED_FIELD("stream", "samples_min", int, stream.samples_min),
      SPRED_FIELD("stream", "samples_max", int, stream.samples_max),
      SPRED_FIELD("stream", "channels", std::size_t, stream.channels),
      SPRED_FIELD("stream", "positions", std::size_t, stream.positions),
      SPRED_FIELD("stream", "label_rate", double, stream.label_rate),
      SPRED_FIELD("stream", "noise_ratio", double, stream.noise_ratio),
      SPRED_FIELD("stream", "pixel_noise", double, stream.pixel_noise),
      SPRED_FIELD("stream", "render_shift", double, stream.render_shift),
      SPRED_FIELD("stream", "nuisance_dims", std::size_t, stream.nuisance_dims),
      SPRED_FIELD("stream", "nuisance_std", double, stream.nuisance_std),
      SPRED_FIELD("stream", "style_mean_range", double, stream.style_mean_range),
      SPRED_FIELD("stream", "style_log_std_range", double, stream.style_log_std_range),

      SPRED_FIELD("hyperparams", "alpha", double, pipeline.hp.alpha),
      SPRED_FIELD("hyperparams", "T_p", double, pipeline.hp.T_p),
      SPRED_FIELD("hyperparams", "T_c", double, pipeline.hp.T_c),
      SPRED_FIELD("hyperparams", "T_o", double, pipeline.hp.T_o),
      SPRED_FIELD("hyperparams", "margin", double, pipeline.hp.margin),
      SPRED_FIELD("hyperparams", "delta", double, pipeline.hp.delta),
      SPRED_FIELD("hyperparams", "lr", double, pipeline.hp.lr),
      SPRED_FIELD("hyperparams", "temperature", double, pipeline.hp.temperature),

      Field{"clustering", "metric",
            [](const RunConfig& c) {
              return std::string(c.pipeline.clustering.metric == DistanceMetric::cosine ? "cosine" : "euclidean");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "cosine") {
                c.pipeline.clustering.metric = DistanceMetric::cosine;
              } else if (v == "euclidean") {
                c.pipeline.clustering.metric = DistanceMetric::euclidean;
              } else {
                bad_value("clustering.metric", v, "cosine or euclidean");
              }
            }},
      SPRED_FIELD("clustering", "eps", double, pipeline.clustering.eps),
      SPRED_FIELD("clustering", "min_pts", std::size_t, pipeline.clustering.min_pts),

      SPRED_FIELD("danet", "enabled", bool, pipeline.danet.enabled),
      SPRED_FIELD("danet", "bottleneck", std::size_t, pipeline.danet.bottleneck),
      SPRED_FIELD("danet", "depth", std::size_t, pipeline.danet.depth),
      SPRED_FIELD("danet", "nonlinear", bool, pipeline.danet.nonlinear),
      SPRED_FIELD("danet", "epochs", int, pipeline.danet.epochs),
      SPRED_FIELD("danet", "lr", double, pipeline.danet.lr),
      SPRED_FIELD("danet", "batch_size", std::size_t, pipeline.danet.batch_size),
      SPRED_FIELD("danet", "lr_decay", bool, pipeline.danet.lr_decay),

      SPRED_FIELD("trainer", "epochs_first", int, pipeline.trainer.epochs_first),
      SPRED_FIELD("trainer", "epochs_later", int, pipeline.trainer.epochs_later),
      SPRED_FIELD("trainer", "batch_identities", std::size_t, pipeline.trainer.batch_identities),
      SPRED_FIELD("trainer", "batch_instances", std::size_t, pipeline.trainer.batch_instances),
      SPRED_FIELD("trainer", "structure_on_pseudo", bool, pipeline.trainer.structure_on_pseudo),
      SPRED_FIELD("trainer", "triplet_on_pseudo", bool, pipeline.trainer.triplet_on_pseudo),
      SPRED_FIELD("trainer", "encoder_hidden", std::size_t, pipeline.trainer.encoder.hidden),
      SPRED_FIELD("trainer", "encoder_output", std::size_t, pipeline.trainer.encoder.output),
      SPRED_FIELD("trainer", "encoder_linear", bool, pipeline.trainer.encoder.linear),

      SPRED_FIELD("ablations", "no_dkcp", bool, pipeline.ablations.no_dkcp),
      SPRED_FIELD("ablations", "no_npl", bool, pipeline.ablations.no_npl),
      SPRED_FIELD("ablations", "no_ls", bool, pipeline.ablations.no_ls),
      SPRED_FIELD("ablations", "no_danet", bool, pipeline.ablations.no_danet),
      SPRED_FIELD("ablations", "labeled_only", bool, pipeline.ablations.labeled_only),

      SPRED_FIELD("eval", "dump_features", bool, dump_features),
  };
  return table;
}

#undef SPRED_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// 1-based line of `key` inside `[section]`, or 0 when not found.
int line_of(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string line, current;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.size() > 1 && t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
    } else if (current == section) {
      const auto eq = t.find('=');
      if (eq != std::string::npos && trim(t.substr(0, eq)) == key) return n;
    }
  }
  return 0;
}

}  // namespace

void RunConfig::validate() const {
  stream_config().validate();
  pipeline.validate();
  if (out.empty()) throw ConfigError("run.out must not be empty");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.section + "." + f.key);
  return keys;
}

void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  const Field* f = dot == std::string::npos ? nullptr
                                            : find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (f == nullptr) throw ConfigError("unknown config key " + dotted_key);
  f->set(config, value);
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  boost::property_tree::ptree tree;
  try {
    std::istringstream body(text);
    boost::property_tree::ini_parser::read_ini(body, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw ConfigError(source + ": key " + section + " appears outside any [section]");
    }
    for (const auto& [key, value] : body) {
      const std::string where = source + ":" + std::to_string(line_of(text, section, key));
      const Field* f = find_field(section, key);
      if (f == nullptr) throw ConfigError(where + ": unknown config key " + section + "." + key);
      try {
        f->set(config, value.get_value<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

std::string render_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

std::uint64_t config_hash(const RunConfig& config) { return io::fnv1a(render_config(config)); }

}  // namespace spred
