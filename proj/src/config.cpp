#include "muellertf/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "muellertf/io.hpp"

#ifndef MUELLERTF_VERSION
#define MUELLERTF_VERSION "0.0.0"
#endif
#ifndef MUELLERTF_GIT_REVISION
#define MUELLERTF_GIT_REVISION ""
#endif

namespace mtf {

namespace {

const std::vector<std::pair<Command, std::string>>& command_names() {
  static const std::vector<std::pair<Command, std::string>> names{
      {Command::TfSolve, "tf-solve"},
      {Command::ExteriorTf, "exterior-tf"},
      {Command::SommerfeldCheck, "sommerfeld-check"},
      {Command::MuellerSolve, "mueller-solve"},
      {Command::IonizationSweep, "ionization-sweep"},
      {Command::ScreenCompare, "screen-compare"},
      {Command::LemmaReport, "lemma-report"},
      {Command::SemiclassicsCheck, "semiclassics-check"},
  };
  return names;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text) {
  const std::string s = trim(text);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(x)) {
    throw ConfigError("not a finite number: '" + text + "'");
  }
  return x;
}

template <class T>
T parse_integer(const std::string& text) {
  const std::string s = trim(text);
  T x{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw ConfigError("not an integer: '" + text + "'");
  return x;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  const std::string s = trim(text);
  if (s.empty()) return out;
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const auto a = parse_integer<long>(s.substr(0, dots));
    const auto b = parse_integer<long>(s.substr(dots + 2));
    if (b < a || b - a > 10000) throw ConfigError("bad range '" + text + "'");
    for (long v = a; v <= b; ++v) out.push_back(static_cast<double>(v));
    return out;
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + io::format_double(v[i]);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

Field real(std::string sec, std::string key, double ExperimentConfig::*m) {
  return {std::move(sec), std::move(key), [m](const ExperimentConfig& c) { return io::format_double(c.*m); },
          [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_double(v); }};
}

Field real(std::string sec, std::string key, double MuellerOptions::*m) {
  return {std::move(sec), std::move(key), [m](const ExperimentConfig& c) { return io::format_double(c.mueller.*m); },
          [m](ExperimentConfig& c, const std::string& v) { c.mueller.*m = parse_double(v); }};
}

template <class T, class Owner>
Field integer(std::string sec, std::string key, T Owner::*m) {
  if constexpr (std::is_same_v<Owner, MuellerOptions>) {
    return {std::move(sec), std::move(key), [m](const ExperimentConfig& c) { return std::to_string(c.mueller.*m); },
            [m](ExperimentConfig& c, const std::string& v) { c.mueller.*m = parse_integer<T>(v); }};
  } else {
    return {std::move(sec), std::move(key), [m](const ExperimentConfig& c) { return std::to_string(c.*m); },
            [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_integer<T>(v); }};
  }
}

Field list(std::string sec, std::string key, std::vector<double> ExperimentConfig::*m) {
  return {std::move(sec), std::move(key), [m](const ExperimentConfig& c) { return format_list(c.*m); },
          [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_list(v); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  using M = MuellerOptions;
  static const std::vector<Field> f{
      {"experiment", "command", [](const C& c) { return to_string(c.command); },
       [](C& c, const std::string& v) { c.command = command_from_string(trim(v)); }},
      {"experiment", "out", [](const C& c) { return c.out.string(); },
       [](C& c, const std::string& v) { c.out = trim(v); }},
      integer("experiment", "seed", &C::seed),
      integer("experiment", "threads", &C::threads),
      real("grid", "r_min", &C::tf_r_min),
      real("grid", "r_max", &C::tf_r_max),
      integer("grid", "n", &C::tf_n),
      list("physics", "Z", &C::Z),
      real("physics", "N", &C::N),
      list("physics", "z", &C::z),
      list("physics", "r", &C::r),
      list("physics", "s", &C::s),
      list("physics", "lambda", &C::lambda),
      list("physics", "R", &C::R),
      list("physics", "radii", &C::radii),
      real("physics", "epsilon", &C::epsilon),
      real("physics", "window_lo", &C::window_lo),
      real("physics", "window_hi", &C::window_hi),
      integer("physics", "l_max", &M::l_max),
      integer("physics", "k_max", &M::k_max),
      real("mueller", "grid_r_min", &M::grid_r_min),
      real("mueller", "grid_r_max", &M::grid_r_max),
      integer("mueller", "grid_n", &M::grid_n),
      real("solver", "tol", &M::tol),
      integer("solver", "max_iter", &M::max_iter),
      real("solver", "n_floor", &M::n_floor),
      real("solver", "mu_tol", &M::mu_tol),
      real("solver", "dN", &M::dN),
      integer("solver", "flat_points", &M::flat_points),
      real("solver", "sweep_start", &M::sweep_start),
      real("solver", "sweep_max", &M::sweep_max),
  };
  return f;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key && (section.empty() || f.section == section)) return &f;
  }
  return nullptr;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid configuration: " + what);
}

bool all_of(const std::vector<double>& v, const std::function<bool(double)>& p) { return std::all_of(v.begin(), v.end(), p); }

}  // namespace

std::string to_string(Command c) {
  for (const auto& [k, name] : command_names()) {
    if (k == c) return name;
  }
  return "unknown";
}

Command command_from_string(const std::string& s) {
  for (const auto& [k, name] : command_names()) {
    if (name == s) return k;
  }
  throw ConfigError("unknown command '" + s + "'");
}

void ExperimentConfig::validate() const {
  require(!out.empty(), "out must be set");
  require(threads >= 1 && threads <= 256, "threads must lie in [1, 256]");
  require(tf_r_min > 0.0 && tf_r_max > tf_r_min && tf_n >= 16, "TF grid needs 0 < r_min < r_max and n >= 16");
  require(!Z.empty() && all_of(Z, [](double x) { return x > 0.0 && x <= 100.0; }), "Z must lie in (0, 100]");
  require(N >= 0.0, "N must be nonnegative");
  require(!z.empty(), "z must not be empty");
  require(!r.empty() && all_of(r, [](double x) { return x > 0.0; }), "r must be positive");
  require(!s.empty() && all_of(s, [](double x) { return x > 0.0; }), "s must be positive");
  require(!lambda.empty() && all_of(lambda, [](double x) { return x > 0.0 && x <= 0.5; }), "lambda must lie in (0, 1/2]");
  require(!R.empty() && all_of(R, [](double x) { return x > 0.0; }), "R must be positive");
  require(all_of(radii, [](double x) { return x > 0.0; }), "radii must be positive");
  require(epsilon > 0.0 && epsilon < 3.0, "epsilon must lie in (0, 3)");
  require(window_lo > 0.0 && window_hi > window_lo, "window needs 0 < window_lo < window_hi");
  try {
    mueller.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text) {
  if (trim(text).empty()) throw ConfigError("empty configuration");
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const Field* f = find_field(section, key);
      if (!f) throw ConfigError("unknown key [" + section + "] " + key);
      f->set(c, value.data());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const io::IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string to_ini(const ExperimentConfig& c) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

void apply_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  std::string key = trim(assignment.substr(0, eq));
  std::string section;
  if (const auto dot = key.find('.'); dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  }
  const Field* f = find_field(section, key);
  if (!f) throw ConfigError("unknown key '" + trim(assignment.substr(0, eq)) + "'");
  f->set(c, assignment.substr(eq + 1));
}

std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig placed = c;
  placed.out = ".";
  const std::string text = to_ini(placed);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("config_hash: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string code_version() {
  const std::string rev = MUELLERTF_GIT_REVISION;
  return rev.empty() ? std::string(MUELLERTF_VERSION) : std::string(MUELLERTF_VERSION) + "+" + rev;
}

}  // namespace mtf
