#include "mpet/config.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mpet/error.hpp"

namespace mpet {

namespace {

namespace pt = boost::property_tree;

const std::set<std::string> kCommands{"convergence", "sweep", "orderrobust", "brain", "eigs"};

/// Typed access to one INI section that remembers the keys it consumed.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <class T>
  void get(const std::string& key, T& value) {
    seen_.insert(key);
    if (!tree_) return;
    const auto node = tree_->get_child_optional(key);
    if (!node) return;
    value = convert<T>(key, node->data());
  }

  void list(const std::string& key, std::vector<int>& value) {
    std::string text;
    get(key, text);
    if (text.empty()) return;
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(","));
    value.clear();
    for (auto& p : parts) value.push_back(convert<int>(key, boost::trim_copy(p)));
  }

  void variants(const std::string& key, std::vector<PreconditionerVariant>& value) {
    std::string text;
    get(key, text);
    if (text.empty()) return;
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(","));
    value.clear();
    for (auto& p : parts) value.push_back(variant(key, boost::trim_copy(p)));
  }

  void variant(const std::string& key, PreconditionerVariant& value) {
    std::string text;
    get(key, text);
    if (!text.empty()) value = variant(key, text);
  }

  void check_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_)
      if (!seen_.count(key)) throw ConfigError("unknown key [" + name_ + "] " + key);
  }

 private:
  template <class T>
  T convert(const std::string& key, const std::string& text) const {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      const std::string t = boost::to_lower_copy(boost::trim_copy(text));
      if (t == "true" || t == "1" || t == "yes") return true;
      if (t == "false" || t == "0" || t == "no") return false;
      throw ConfigError(where(key) + ": expected a boolean, got '" + text + "'");
    } else {
      std::istringstream is(text);
      T v{};
      if (!(is >> v) || !(is >> std::ws).eof())
        throw ConfigError(where(key) + ": cannot parse '" + text + "'");
      return v;
    }
  }

  PreconditionerVariant variant(const std::string& key, const std::string& text) const {
    try {
      return parse_variant(text);
    } catch (const Error& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join(const std::vector<PreconditionerVariant>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_string(v[i]);
  return s;
}

void check_orders(const std::vector<int>& orders, const std::string& section) {
  if (orders.empty()) throw ConfigError("[" + section + "] orders must not be empty");
  for (int l : orders)
    if (l < SpaceOrder::kMin || l > SpaceOrder::kMax)
      throw ConfigError("[" + section + "] order " + std::to_string(l) + " outside 1..3");
}

void check_nonempty(const std::vector<int>& v, const std::string& what) {
  if (v.empty()) throw ConfigError(what + " must not be empty");
}

void check_positive(const std::vector<int>& v, const std::string& what) {
  check_nonempty(v, what);
  for (int x : v)
    if (x < 1) throw ConfigError(what + " entries must be positive");
}

void check_solver(double tol, int maxit, double eta, const std::string& section) {
  if (!(tol > 0 && tol < 1)) throw ConfigError("[" + section + "] tol must lie in (0, 1)");
  if (maxit < 1) throw ConfigError("[" + section + "] maxit must be positive");
  if (!(eta > 0)) throw ConfigError("[" + section + "] eta must be positive");
}

}  // namespace

bool is_command(const std::string& name) { return kCommands.count(name) > 0; }

void RunConfig::validate() const {
  if (!is_command(command)) throw ConfigError("unknown command '" + command + "'");
  if (command == "sweep") {
    check_orders(sweep.orders, "sweep");
    check_nonempty(sweep.exponents, "[sweep] i");
    check_nonempty(sweep.lambda_exponents, "[sweep] lambda_exponents");
    if (sweep.variants.empty()) throw ConfigError("[sweep] variants must not be empty");
    if (sweep.n < 1) throw ConfigError("[sweep] n must be positive");
    check_solver(sweep.tol, sweep.maxit, sweep.eta, "sweep");
  } else if (command == "orderrobust") {
    check_orders(order_robust.orders, "orderrobust");
    check_positive(order_robust.meshes, "[orderrobust] meshes");
    if (!(order_robust.value > 0)) throw ConfigError("[orderrobust] value must be positive");
    if (!(order_robust.lambda > 0)) throw ConfigError("[orderrobust] lambda must be positive");
    check_solver(order_robust.tol, order_robust.maxit, order_robust.eta, "orderrobust");
  } else if (command == "convergence") {
    check_orders(convergence.orders, "convergence");
    check_positive(convergence.levels, "[convergence] levels");
    if (!(convergence.R > 0)) throw ConfigError("[convergence] R must be positive");
    if (convergence.alpha_p < 0 || convergence.xi < 0 || !(convergence.lambda > 0))
      throw ConfigError("[convergence] invalid parameters");
    check_solver(convergence.tol, convergence.maxit, convergence.eta, "convergence");
  } else if (command == "eigs") {
    check_orders(eigs.orders, "eigs");
    check_nonempty(eigs.exponents, "[eigs] i");
    check_positive(eigs.ratio_meshes, "[eigs] ratio_meshes");
    check_nonempty(eigs.ratio_exponents, "[eigs] ratio_i");
    check_positive(eigs.inf_sup_meshes, "[eigs] inf_sup_meshes");
    if (eigs.n < 1) throw ConfigError("[eigs] n must be positive");
    if (!(eigs.eta > 0)) throw ConfigError("[eigs] eta must be positive");
  } else if (command == "brain") {
    if (brain.order < SpaceOrder::kMin || brain.order > SpaceOrder::kMax)
      throw ConfigError("[brain] order outside 1..3");
    if (!(brain.tau > 0) || !(brain.T >= brain.tau)) throw ConfigError("[brain] need 0 < tau <= T");
    if (brain.n_radial < 1 || brain.n_angular < 3) throw ConfigError("[brain] invalid mesh resolution");
    if (std::abs(std::llround(brain.T / brain.tau) * brain.tau - brain.T) > 1e-9 * brain.T)
      throw ConfigError("[brain] T must be a multiple of tau");
    if (!(brain.r_outer > brain.r_inner && brain.r_inner > 0)) throw ConfigError("[brain] need 0 < r_inner < r_outer");
    if (!(brain.probe_fraction > 0 && brain.probe_fraction < 1))
      throw ConfigError("[brain] probe_fraction must lie in (0, 1)");
    if (brain_output_every < 1) throw ConfigError("[brain] output_every must be positive");
    if (!(window_half_width > 0)) throw ConfigError("[brain] window_half_width must be positive");
    check_solver(brain_tol, brain_maxit, 10.0, "brain");
  }
}

std::string RunConfig::resolved() const {
  std::ostringstream os;
  os.precision(12);
  os << "command=" << command;
  if (command == "sweep") {
    const auto& c = sweep;
    os << " sweep.mode=" << to_string(c.mode) << " sweep.n=" << c.n << " sweep.orders=" << join(c.orders)
       << " sweep.i=" << join(c.exponents) << " sweep.lambda_exponents=" << join(c.lambda_exponents)
       << " sweep.variants=" << join(c.variants) << " sweep.eta=" << c.eta << " sweep.tol=" << c.tol
       << " sweep.maxit=" << c.maxit << " sweep.local_recovery=" << (c.local_recovery ? "true" : "false");
  } else if (command == "orderrobust") {
    const auto& c = order_robust;
    os << " orderrobust.orders=" << join(c.orders) << " orderrobust.meshes=" << join(c.meshes)
       << " orderrobust.value=" << c.value << " orderrobust.lambda=" << c.lambda
       << " orderrobust.variant=" << to_string(c.variant) << " orderrobust.eta=" << c.eta
       << " orderrobust.tol=" << c.tol << " orderrobust.maxit=" << c.maxit;
  } else if (command == "convergence") {
    const auto& c = convergence;
    os << " convergence.orders=" << join(c.orders) << " convergence.levels=" << join(c.levels)
       << " convergence.lambda=" << c.lambda << " convergence.R=" << c.R << " convergence.alpha_p=" << c.alpha_p
       << " convergence.xi=" << c.xi << " convergence.variant=" << to_string(c.variant)
       << " convergence.eta=" << c.eta << " convergence.tol=" << c.tol << " convergence.maxit=" << c.maxit;
  } else if (command == "eigs") {
    const auto& c = eigs;
    os << " eigs.mode=" << to_string(c.mode) << " eigs.orders=" << join(c.orders) << " eigs.n=" << c.n
       << " eigs.i=" << join(c.exponents) << " eigs.ratio_meshes=" << join(c.ratio_meshes)
       << " eigs.ratio_i=" << join(c.ratio_exponents) << " eigs.inf_sup_meshes=" << join(c.inf_sup_meshes)
       << " eigs.eta=" << c.eta;
  } else if (command == "brain") {
    const auto& b = brain;
    os << " brain.r_inner=" << b.r_inner << " brain.r_outer=" << b.r_outer << " brain.n_radial=" << b.n_radial
       << " brain.n_angular=" << b.n_angular << " brain.order=" << b.order << " brain.tau=" << b.tau
       << " brain.T=" << b.T << " brain.probe_fraction=" << b.probe_fraction
       << " brain.long=" << (brain_long ? "true" : "false") << " brain.output_every=" << brain_output_every
       << " brain.variant=" << to_string(brain_variant) << " brain.tol=" << brain_tol
       << " brain.maxit=" << brain_maxit << " brain.window_half_width=" << window_half_width;
  }
  return os.str();
}

RunConfig parse_config(const std::string& command, std::istream& in) {
  if (!is_command(command)) throw ConfigError("unknown command '" + command + "'");
  const std::string text(std::istreambuf_iterator<char>(in), {});
  // read_ini drops sections without keys, so headers are checked on the raw text
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    boost::trim(line);
    if (line.size() > 1 && line.front() == '[' && line.back() == ']') {
      const std::string name = boost::trim_copy(line.substr(1, line.size() - 2));
      if (!is_command(name)) throw ConfigError("unknown section [" + name + "]");
    }
  }
  pt::ptree tree;
  try {
    std::istringstream body(text);
    pt::read_ini(body, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  for (const auto& [name, child] : tree) {
    if (!is_command(name)) throw ConfigError("unknown section [" + name + "]");
    if (!child.data().empty()) throw ConfigError("key '" + name + "' outside of a section");
  }
  RunConfig c;
  c.command = command;
  const auto node = tree.get_child_optional(command);
  Section s(node ? &*node : nullptr, command);

  if (command == "sweep") {
    std::string mode = to_string(c.sweep.mode);
    s.get("mode", mode);
    c.sweep.mode = parse_sweep_mode(mode);
    s.get("n", c.sweep.n);
    s.list("orders", c.sweep.orders);
    s.list("i", c.sweep.exponents);
    s.list("lambda_exponents", c.sweep.lambda_exponents);
    s.variants("variants", c.sweep.variants);
    s.get("eta", c.sweep.eta);
    s.get("tol", c.sweep.tol);
    s.get("maxit", c.sweep.maxit);
    s.get("local_recovery", c.sweep.local_recovery);
  } else if (command == "orderrobust") {
    s.list("orders", c.order_robust.orders);
    s.list("meshes", c.order_robust.meshes);
    s.get("value", c.order_robust.value);
    s.get("lambda", c.order_robust.lambda);
    s.variant("variant", c.order_robust.variant);
    s.get("eta", c.order_robust.eta);
    s.get("tol", c.order_robust.tol);
    s.get("maxit", c.order_robust.maxit);
  } else if (command == "convergence") {
    s.list("orders", c.convergence.orders);
    s.list("levels", c.convergence.levels);
    s.get("lambda", c.convergence.lambda);
    s.get("R", c.convergence.R);
    s.get("alpha_p", c.convergence.alpha_p);
    s.get("xi", c.convergence.xi);
    s.variant("variant", c.convergence.variant);
    s.get("eta", c.convergence.eta);
    s.get("tol", c.convergence.tol);
    s.get("maxit", c.convergence.maxit);
  } else if (command == "eigs") {
    std::string mode = to_string(c.eigs.mode);
    s.get("mode", mode);
    c.eigs.mode = parse_sweep_mode(mode);
    s.list("orders", c.eigs.orders);
    s.get("n", c.eigs.n);
    s.list("i", c.eigs.exponents);
    s.list("ratio_meshes", c.eigs.ratio_meshes);
    s.list("ratio_i", c.eigs.ratio_exponents);
    s.list("inf_sup_meshes", c.eigs.inf_sup_meshes);
    s.get("eta", c.eigs.eta);
  } else if (command == "brain") {
    s.get("long", c.brain_long);
    if (c.brain_long) {
      c.brain.tau = 0.125;
      c.brain.T = 2500.0;
    }
    s.get("r_inner", c.brain.r_inner);
    s.get("r_outer", c.brain.r_outer);
    s.get("n_radial", c.brain.n_radial);
    s.get("n_angular", c.brain.n_angular);
    s.get("order", c.brain.order);
    s.get("tau", c.brain.tau);
    s.get("T", c.brain.T);
    s.get("probe_fraction", c.brain.probe_fraction);
    s.get("output_every", c.brain_output_every);
    s.variant("variant", c.brain_variant);
    s.get("tol", c.brain_tol);
    s.get("maxit", c.brain_maxit);
    s.get("window_half_width", c.window_half_width);
  }
  s.check_unknown();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& command, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(command, in);
}

}  // namespace mpet
