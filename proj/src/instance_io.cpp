#include "lemons/instance_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace lemons {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Table {
 public:
  Table(std::map<std::string, Entry> entries, std::string source)
      : entries_(std::move(entries)), source_(std::move(source)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    if (auto it = entries_.find(key); it != entries_.end()) os << ":" << it->second.line;
    os << ": " << key << ": " << msg;
    throw ValidationError(os.str());
  }

  std::vector<double> numbers(const std::string& key) const {
    if (!has(key)) fail(key, "missing");
    std::vector<double> out;
    try {
      for (const auto& tok : split(entries_.at(key).value, ',')) out.push_back(parse_number(tok));
    } catch (const ValidationError& e) {
      fail(key, e.what());
    }
    return out;
  }

  std::vector<std::vector<double>> rows(const std::string& key) const {
    if (!has(key)) fail(key, "missing");
    std::vector<std::vector<double>> out;
    try {
      for (const auto& row : split(entries_.at(key).value, ';')) {
        std::vector<double> r;
        for (const auto& tok : split(row, ',')) r.push_back(parse_number(tok));
        out.push_back(std::move(r));
      }
    } catch (const ValidationError& e) {
      fail(key, e.what());
    }
    return out;
  }

  std::string text(const std::string& key) const { return has(key) ? entries_.at(key).value : std::string(); }

  PiecewisePoly piecewise(const std::string& prefix) const {
    std::vector<double> knots = numbers(prefix + ".breakpoints");
    std::vector<std::vector<double>> coeffs = rows(prefix + ".coefficients");
    if (knots.size() != coeffs.size() + 1)
      fail(prefix + ".coefficients", "need one coefficient list per breakpoint interval");
    std::vector<Poly> pieces;
    for (const auto& c : coeffs) pieces.emplace_back(Eigen::Map<const Eigen::VectorXd>(c.data(), c.size()));
    try {
      return PiecewisePoly(knots, pieces);
    } catch (const std::invalid_argument& e) {
      fail(prefix + ".breakpoints", e.what());
    }
  }

  ScalarFn scalar_fn(const std::string& prefix, FnKind kind, bool allow_zero = false) const {
    PiecewisePoly p = piecewise(prefix);
    try {
      return ScalarFn(std::move(p), kind, allow_zero);
    } catch (const ValidationError& e) {
      fail(prefix + ".coefficients", e.what());
    }
  }

  Eigen::VectorXd vector(const std::string& key) const {
    std::vector<double> v = numbers(key);
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

 private:
  std::map<std::string, Entry> entries_;
  std::string source_;
};

}  // namespace

double parse_number(const std::string& token) {
  std::string t = trim(token);
  auto slash = t.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    }
    std::string num = trim(t.substr(0, slash)), den = trim(t.substr(slash + 1));
    std::size_t u1 = 0, u2 = 0;
    double p = std::stod(num, &u1), q = std::stod(den, &u2);
    if (u1 != num.size() || u2 != den.size() || q == 0) throw std::invalid_argument(t);
    return p / q;
  } catch (const std::logic_error&) {
    throw ValidationError("bad number '" + t + "'");
  }
}

InstanceFile parse_instance(const std::string& text, const std::string& source) {
  std::map<std::string, Entry> entries;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << source << ":" << lineno << ": expected 'key = value'";
      throw ValidationError(os.str());
    }
    std::string key = trim(line.substr(0, eq));
    if (entries.count(key)) {
      std::ostringstream os;
      os << source << ":" << lineno << ": " << key << ": duplicate key";
      throw ValidationError(os.str());
    }
    entries[key] = {trim(line.substr(eq + 1)), lineno};
  }
  Table table(std::move(entries), source);

  InstanceFile out;
  out.name = table.has("name") ? table.text("name") : source;
  std::string regime = table.text("regime");
  if (!regime.empty() && regime != "gains-at-bottom" && regime != "gains-at-top" && regime != "multi-crossing")
    table.fail("regime", "unknown regime '" + regime + "'");
  const bool bottom = regime == "gains-at-bottom";

  if (table.has("density.breakpoints") || table.has("cost.breakpoints")) {
    ScalarFn f = table.scalar_fn("density", FnKind::Density);
    ScalarFn c = table.scalar_fn("cost", FnKind::Cost, bottom);
    try {
      out.market.emplace(std::move(f), std::move(c), bottom);
    } catch (const ValidationError& e) {
      table.fail("cost.coefficients", e.what());
    }
  }
  if (table.has("weight.breakpoints")) out.weight = table.scalar_fn("weight", FnKind::Weight).poly();
  if (table.has("atoms.types")) {
    AtomMarket atoms{table.vector("atoms.types"), table.vector("atoms.masses"), table.vector("atoms.costs")};
    try {
      atoms.validate();
    } catch (const ValidationError& e) {
      table.fail("atoms.types", e.what());
    }
    out.atoms = std::move(atoms);
  }
  if (table.has("signal.means")) {
    if (!out.atoms) table.fail("signal.means", "a reference signal requires atoms");
    out.signal_means = table.vector("signal.means");
    auto rows = table.rows("signal.masses");
    if (static_cast<Eigen::Index>(rows.size()) != out.atoms->size())
      table.fail("signal.masses", "need one row per atom");
    Eigen::MatrixXd m(out.atoms->size(), out.signal_means->size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != m.cols())
        table.fail("signal.masses", "need one mass per signal mean");
      for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    out.signal_masses = std::move(m);
  }
  if (!out.market && !out.atoms && !out.weight)
    table.fail("density.breakpoints", "file defines no primitives, atoms or weight");
  return out;
}

InstanceFile load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str(), path.string());
}

PiecewisePoly parse_weight_spec(const std::string& spec, const std::filesystem::path& base_dir) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw ValidationError("alpha: expected const:, poly: or piecewise: prefix");
  std::string kind = spec.substr(0, colon), rest = spec.substr(colon + 1);
  PiecewisePoly p;
  if (kind == "const") {
    p = PiecewisePoly::single(Poly({parse_number(rest)}));
  } else if (kind == "poly") {
    std::vector<double> c;
    for (const auto& tok : split(rest, ',')) c.push_back(parse_number(tok));
    if (c.empty()) throw ValidationError("alpha: empty polynomial");
    p = PiecewisePoly::single(Poly(Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()))));
  } else if (kind == "piecewise") {
    std::filesystem::path file = rest;
    if (file.is_relative() && !base_dir.empty() && !std::filesystem::exists(file)) file = base_dir / file;
    InstanceFile parsed = load_instance(file);
    if (!parsed.weight) throw ValidationError(file.string() + ": weight.breakpoints: missing");
    return *parsed.weight;
  } else {
    throw ValidationError("alpha: unknown kind '" + kind + "'");
  }
  try {
    return ScalarFn(std::move(p), FnKind::Weight).poly();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("alpha: ") + e.what());
  }
}

}  // namespace lemons
