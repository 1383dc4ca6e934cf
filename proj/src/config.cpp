#include "spdebridge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "spdebridge/errors.hpp"

namespace spdebridge {

namespace {

const std::map<std::string, std::set<std::string>> kKeys = {
    {"model", {"J", "T"}},
    {"q", {"kind", "s", "scale"}},
    {"qtilde", {"kind", "eps", "a", "eta"}},
    {"run", {"seed", "samples", "grid_points", "N", "chi", "p"}},
    {"target", {"x", "y"}},
    {"fem", {"h", "eps"}},
    {"study", {"levels", "method", "conditioned"}},
    {"output", {"path", "format"}},
    {"oracle", {"tolerance"}},
};

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

// Drops a trailing "# ..." or "; ..." comment that follows whitespace and sits
// outside quotes.
std::string strip_comment(const std::string& s) {
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char ch = s[i];
    if (quote) {
      if (ch == quote) quote = 0;
    } else if (ch == '"' || ch == '\'') {
      quote = ch;
    } else if ((ch == '#' || ch == ';') && (i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1])))) {
      return s.substr(0, i);
    }
  }
  return s;
}

std::string unquote(std::string s) {
  s = trim(std::move(s));
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return s;
}

double parse_scalar(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  auto one = [&](std::string_view v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty()) {
      throw ConfigError(fmt::format("{}: '{}' is not a number", where, raw));
    }
    return out;
  };
  // a/b is accepted so mesh widths can be written as 1/64
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    return one(trim(s.substr(0, slash))) / one(trim(s.substr(slash + 1)));
  }
  return one(s);
}

std::uint64_t parse_unsigned(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  std::uint64_t out = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", where, raw));
  }
  return out;
}

std::vector<double> parse_list(const std::string& raw, const std::string& where) {
  std::string s = trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError(fmt::format("{}: unterminated list", where));
    s = s.substr(1, s.size() - 2);
  }
  std::vector<double> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(parse_scalar(s.substr(start, comma - start), where));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_bool(const std::string& raw, const std::string& where) {
  const std::string s = unquote(raw);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", where, raw));
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  RunConfig c;
  std::string q_kind = "white", qt_kind = "scaled_identity";
  for (const auto& [section, body] : tree) {
    const auto known = kKeys.find(section);
    if (known == kKeys.end()) {
      if (body.empty()) throw ConfigError(fmt::format("key '{}' outside any section", section));
      throw ConfigError(fmt::format("unknown section [{}]", section));
    }
    for (const auto& [key, node] : body) {
      if (!known->second.contains(key)) throw ConfigError(fmt::format("unknown key '{}' in [{}]", key, section));
      const std::string where = fmt::format("[{}] {}", section, key);
      const std::string v = trim(strip_comment(node.get_value<std::string>()));
      if (section == "model") {
        if (key == "J") c.J = parse_unsigned(v, where);
        else c.T = parse_scalar(v, where);
      } else if (section == "q") {
        if (key == "kind") q_kind = unquote(v);
        else if (key == "s") c.q.s = parse_scalar(v, where);
        else c.q.scale = parse_scalar(v, where);
      } else if (section == "qtilde") {
        if (key == "kind") qt_kind = unquote(v);
        else if (key == "eps") c.qtilde.eps = parse_scalar(v, where);
        else if (key == "a") c.qtilde.a = parse_scalar(v, where);
        else c.qtilde.eta = parse_scalar(v, where);
      } else if (section == "run") {
        if (key == "seed") c.seed = parse_unsigned(v, where);
        else if (key == "samples") c.samples = parse_unsigned(v, where);
        else if (key == "grid_points") c.grid_points = parse_unsigned(v, where);
        else if (key == "N") c.N = parse_unsigned(v, where);
        else if (key == "chi") c.chi = parse_scalar(v, where);
        else c.p = parse_scalar(v, where);
      } else if (section == "target") {
        (key == "x" ? c.x : c.y) = parse_list(v, where);
      } else if (section == "fem") {
        if (key == "h") c.h = parse_scalar(v, where);
        else c.fem_eps = parse_scalar(v, where);
      } else if (section == "study") {
        if (key == "levels") c.levels = parse_list(v, where);
        else if (key == "method") c.method = unquote(v);
        else c.conditioned = parse_bool(v, where);
      } else if (section == "output") {
        if (key == "path") c.output_path = unquote(v);
        else c.output_format = unquote(v);
      } else {
        c.oracle_tolerance = parse_scalar(v, where);
      }
    }
  }

  if (q_kind == "white") c.q.kind = CovarianceSpec::Kind::White;
  else if (q_kind == "power") c.q.kind = CovarianceSpec::Kind::Power;
  else throw ConfigError(fmt::format("[q] kind: unknown covariance '{}'", q_kind));
  if (qt_kind == "scaled_identity") c.qtilde.kind = ObservationSpec::Kind::ScaledIdentity;
  else if (qt_kind == "power") c.qtilde.kind = ObservationSpec::Kind::Power;
  else if (qt_kind == "zero") c.exact_observation = true;
  else throw ConfigError(fmt::format("[qtilde] kind: unknown observation noise '{}'", qt_kind));

  if (c.J < 1) throw ConfigError("[model] J must be >= 1");
  if (!(c.T > 0.0)) throw ConfigError("[model] T must be positive");
  if (c.grid_points < 2) throw ConfigError("[run] grid_points must be >= 2");
  if (!(c.p >= 1.0)) throw ConfigError("[run] p must be >= 1");
  if (c.N && (*c.N < 1 || *c.N > c.J)) throw ConfigError(fmt::format("[run] N = {} outside [1, J]", *c.N));
  if (c.x.size() > c.J || c.y.size() > c.J) throw ConfigError("[target] has more coefficients than J");
  if (c.method != "exact" && c.method != "mc") throw ConfigError(fmt::format("[study] method: '{}' is not exact or mc", c.method));
  if (c.output_format != "csv" && c.output_format != "json") {
    throw ConfigError(fmt::format("[output] format: '{}' is not csv or json", c.output_format));
  }
  if (!(c.fem_eps > 0.0)) throw ConfigError("[fem] eps must be positive");
  if (!(c.oracle_tolerance > 0.0)) throw ConfigError("[oracle] tolerance must be positive");
  try {
    c.q.validate();
    if (!c.exact_observation) c.qtilde.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path));
  return parse_config(in);
}

SpectralModel RunConfig::model() const {
  try {
    if (exact_observation) {
      return build_model(q, ObservationSpec::scaled_identity(1.0, qtilde.eta), J, T).without_observation_noise().with_eta(qtilde.eta);
    }
    return build_model(q, qtilde, J, T);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

BridgeTarget RunConfig::target() const {
  BridgeTarget t = BridgeTarget::zero(J);
  std::copy(x.begin(), x.end(), t.x.begin());
  std::copy(y.begin(), y.end(), t.y.begin());
  t.chi = chi;
  return t;
}

TimeGrid RunConfig::grid() const { return TimeGrid::uniform(T, grid_points); }

SpectralStudyConfig RunConfig::spectral_study() const {
  if (exact_observation) throw ConfigError("spectral studies need observation noise ([qtilde] kind = zero given)");
  SpectralStudyConfig s;
  s.covariance = q;
  s.observation = qtilde;
  s.J = J;
  s.T = T;
  if (!levels.empty()) {
    s.ladder.clear();
    for (double l : levels) {
      if (!(l >= 1.0) || l != std::floor(l)) throw ConfigError(fmt::format("[study] levels: N = {} is not a positive integer", l));
      s.ladder.push_back(static_cast<std::size_t>(l));
    }
  }
  s.grid_points = grid_points;
  s.method = method == "exact" ? SpectralStudyConfig::Method::Exact : SpectralStudyConfig::Method::MonteCarlo;
  s.conditioned = conditioned;
  s.samples = samples;
  s.seed = seed;
  s.p = p;
  s.x = x;
  s.y = y;
  s.chi = chi;
  return s;
}

FemStudyConfig RunConfig::fem_study() const {
  FemStudyConfig f;
  f.covariance = q;
  f.J = J;
  f.T = T;
  if (!levels.empty()) f.h = levels;
  f.grid_points = grid_points;
  if (conditioned) f.eps = fem_eps;
  f.samples = samples;
  f.seed = seed;
  f.p = p;
  f.x = x;
  f.y = y;
  f.chi = chi;
  return f;
}

}  // namespace spdebridge
