#include "ifhom/config.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ifhom/expr.hpp"

namespace ifhom {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
  }
  if (pos != v.size())
    throw std::invalid_argument("config key '" + key + "': trailing characters in '" + v + "'");
  return d;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long u;
  try {
    u = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an unsigned integer: '" + v + "'");
  }
  if (pos != v.size())
    throw std::invalid_argument("config key '" + key + "': trailing characters in '" + v + "'");
  return u;
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  int i;
  try {
    i = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an integer: '" + v + "'");
  }
  if (pos != v.size())
    throw std::invalid_argument("config key '" + key + "': trailing characters in '" + v + "'");
  return i;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw std::invalid_argument("config key '" + key + "': empty list entry");
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  bool saw_builtin = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key or value");
    }

    if (key == "field.builtin") {
      cfg.field.builtin = value;
      saw_builtin = true;
    } else if (key.rfind("field.param.", 0) == 0) {
      cfg.field.params[key.substr(12)] = parse_double(key, value);
    } else if (key == "field.dim") {
      cfg.field.dim = parse_int(key, value);
    } else if (key == "field.eta") {
      cfg.field.eta = parse_double(key, value);
    } else if (key.rfind("field.expr.", 0) == 0) {
      cfg.field.exprs[key.substr(11)] = value;
    } else if (key == "grid.resolution") {
      cfg.grid_resolution = parse_int(key, value);
    } else if (key == "grid.strip_halfwidth") {
      cfg.strip_halfwidth = parse_int(key, value);
    } else if (key == "sim.T") {
      cfg.sim_T = parse_double(key, value);
    } else if (key == "sim.dt") {
      cfg.sim_dt = parse_double(key, value);
    } else if (key == "sim.n") {
      cfg.sim_n = parse_u64(key, value);
    } else if (key == "sim.eps") {
      cfg.eps_list = parse_list(key, value);
    } else if (key == "sim.delta") {
      cfg.delta = parse_double(key, value);
    } else if (key == "sim.lambda") {
      cfg.lambda = parse_double(key, value);
    } else if (key == "sim.backend") {
      cfg.backend = value;
    } else if (key == "sim.blend") {
      cfg.blend = value;
    } else if (key == "run.seed") {
      cfg.seed = parse_u64(key, value);
    } else if (key == "run.threads") {
      cfg.threads = parse_int(key, value);
    } else if (key == "run.out") {
      cfg.out_dir = value;
    } else {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
    }
  }
  if (!cfg.field.exprs.empty() && saw_builtin) {
    throw std::invalid_argument("config selects both field.builtin and field.expr.*");
  }
  if (!cfg.field.exprs.empty()) cfg.field.builtin.clear();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  if (!cfg.field.builtin.empty()) {
    os << "field.builtin = " << cfg.field.builtin << '\n';
    for (const auto& [k, v] : cfg.field.params)
      os << "field.param." << k << " = " << format_double(v) << '\n';
  } else {
    os << "field.dim = " << cfg.field.dim << '\n';
    os << "field.eta = " << format_double(cfg.field.eta) << '\n';
    for (const auto& [k, v] : cfg.field.exprs) os << "field.expr." << k << " = " << v << '\n';
  }
  os << "grid.resolution = " << cfg.grid_resolution << '\n';
  os << "grid.strip_halfwidth = " << cfg.strip_halfwidth << '\n';
  os << "sim.T = " << format_double(cfg.sim_T) << '\n';
  os << "sim.dt = " << format_double(cfg.sim_dt) << '\n';
  os << "sim.n = " << cfg.sim_n << '\n';
  os << "sim.eps = ";
  for (std::size_t i = 0; i < cfg.eps_list.size(); ++i)
    os << (i ? "," : "") << format_double(cfg.eps_list[i]);
  os << '\n';
  os << "sim.delta = " << format_double(cfg.delta) << '\n';
  os << "sim.lambda = " << format_double(cfg.lambda) << '\n';
  os << "sim.backend = " << cfg.backend << '\n';
  os << "sim.blend = " << cfg.blend << '\n';
  os << "run.seed = " << cfg.seed << '\n';
  os << "run.threads = " << cfg.threads << '\n';
  os << "run.out = " << cfg.out_dir << '\n';
  return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string dump = dump_config(cfg);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

InterfaceDrift make_field(const FieldConfig& field) {
  if (!field.builtin.empty()) return builtin_field(field.builtin, field.params);

  const int d = field.dim;
  if (d < 2 || d > kMaxDim) throw std::invalid_argument("field.dim must be 2..4");
  if (!(field.eta > 0)) throw std::invalid_argument("field.eta must be positive");

  auto compile_group = [&](const std::string& group) {
    std::vector<Expr> comps;
    for (int i = 1; i <= d; ++i) {
      const std::string key = group + ".b" + std::to_string(i);
      auto it = field.exprs.find(key);
      comps.push_back(Expr::compile(it == field.exprs.end() ? "0" : it->second, d));
    }
    return comps;
  };
  for (const auto& [k, v] : field.exprs) {
    const std::size_t dot = k.find('.');
    const std::string group = k.substr(0, dot);
    bool ok = (group == "core" || group == "plus" || group == "minus") &&
              dot != std::string::npos && k.size() == dot + 3 && k[dot + 1] == 'b' &&
              k[dot + 2] >= '1' && k[dot + 2] <= '0' + d;
    if (!ok)
      throw std::invalid_argument("unknown drift expression key 'field.expr." + k + "'");
    (void)v;
  }

  auto make_eval = [d](std::vector<Expr> comps) {
    return [d, comps = std::move(comps)](const double* x, double* b) {
      for (int i = 0; i < d; ++i) b[i] = comps[static_cast<std::size_t>(i)].eval(x);
    };
  };
  PeriodicDrift plus(d, make_eval(compile_group("plus")), "expr_plus");
  PeriodicDrift minus(d, make_eval(compile_group("minus")), "expr_minus");
  InterfaceDrift out(d, field.eta, make_eval(compile_group("core")), std::move(plus),
                     std::move(minus), "expr");
  return out;
}

GridSpec make_grid(const RunConfig& cfg, const InterfaceDrift& field) {
  GridSpec spec = GridSpec::uniform(field.dim(), cfg.grid_resolution);
  spec.strip_halfwidth = cfg.strip_halfwidth > 0
                             ? cfg.strip_halfwidth
                             : static_cast<int>(std::ceil(field.eta() - 1e-12)) + 8;
  spec.validate(true);
  return spec;
}

}  // namespace ifhom
