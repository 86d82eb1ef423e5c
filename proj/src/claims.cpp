#include "fbmint/claims.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbmint/errors.hpp"

namespace fbmint {

double StockModel::price(double t, double b) const { return s0 * std::exp(mu * t + sigma * b); }

namespace {

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) out.push_back(item);
  return out;
}

double num(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad number '" + s + "' in claim " + key);
}

double mark(const std::string& s, const std::string& key) {
  const double m = num(s, key);
  if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("claim mark outside [0,1] in " + key);
  return m;
}

void need(const std::vector<std::string>& p, std::size_t n, const std::string& key) {
  if (p.size() != n) throw ConfigError("claim " + key + " expects " + std::to_string(n - 1) + " fields");
}

}  // namespace

ClaimSpec ClaimSpec::parse(const std::string& key, const StockModel& stock) {
  const auto p = split(key);
  if (p.empty()) throw ConfigError("empty claim key");
  ClaimSpec c;
  c.key = key;
  c.stock = stock;
  const std::string& k = p[0];
  if (k == "zero") {
    need(p, 1, key);
    c.kind = ClaimKind::terminal_adapted_process;
    c.payload = [](const std::vector<double>&) { return 0.0; };
  } else if (k == "european_call") {
    need(p, 3, key);
    c.kind = ClaimKind::functional_of_marks;
    c.on_stock = true;
    c.marks = {mark(p[1], key)};
    const double strike = num(p[2], key);
    c.payload = [strike](const std::vector<double>& x) { return std::max(x[0] - strike, 0.0); };
  } else if (k == "asian_mean") {
    need(p, 2, key);
    const double kk = num(p[1], key);
    if (!(kk >= 1.0) || kk != std::floor(kk)) throw ConfigError("asian_mean needs a positive integer count");
    c.kind = ClaimKind::functional_of_marks;
    c.on_stock = true;
    for (int i = 1; i <= static_cast<int>(kk); ++i) c.marks.push_back(i / kk);
    c.payload = [](const std::vector<double>& x) {
      double s = 0.0;
      for (double v : x) s += v;
      return s / static_cast<double>(x.size());
    };
  } else if (k == "digital" || k == "barrier") {
    need(p, 3, key);
    c.kind = ClaimKind::indicator;
    c.on_stock = true;
    c.marks = {mark(p[1], key)};
    const double level = num(p[2], key);
    c.payload = [level](const std::vector<double>& x) { return x[0] > level ? 1.0 : 0.0; };
    c.running_max = k == "barrier";
  } else if (k == "lookback_max") {
    need(p, 2, key);
    c.kind = ClaimKind::sup_functional;
    c.on_stock = true;
    c.marks = {mark(p[1], key)};
    c.running_max = true;
    c.payload = [](const std::vector<double>& x) { return x[0]; };
  } else if (k == "custom_marks") {
    if (p.size() < 3) throw ConfigError("custom_marks needs a function and at least one mark");
    for (std::size_t i = 2; i < p.size(); ++i) c.marks.push_back(mark(p[i], key));
    c.kind = ClaimKind::functional_of_marks;
    const std::string& fn = p[1];
    if (fn == "square") {
      c.payload = [](const std::vector<double>& x) { return x[0] * x[0]; };
    } else if (fn == "identity") {
      c.payload = [](const std::vector<double>& x) { return x[0]; };
    } else if (fn == "abs") {
      c.payload = [](const std::vector<double>& x) { return std::abs(x[0]); };
    } else if (fn == "step") {
      c.kind = ClaimKind::indicator;
      c.payload = [](const std::vector<double>& x) { return x[0] > 0.0 ? 1.0 : 0.0; };
    } else if (fn == "sum") {
      c.payload = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
      };
    } else if (fn == "sum_squares") {
      c.payload = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
      };
    } else if (fn == "product") {
      c.payload = [](const std::vector<double>& x) {
        double s = 1.0;
        for (double v : x) s *= v;
        return s;
      };
    } else {
      throw ConfigError("unknown custom_marks function '" + fn + "'");
    }
  } else {
    throw ConfigError("unknown claim key '" + k + "'");
  }
  if (c.kind == ClaimKind::indicator) {
    for (double m : c.marks)
      if (!(m < 1.0)) throw ConfigError("indicator claim " + key + " must be decided before time 1");
  }
  return c;
}

namespace {

// value at index i of the stopped claim, i = last grid index <= t
double value_at_index(const ClaimSpec& c, const FbmPath& path, std::size_t i) {
  const TimeGrid& g = path.grid;
  auto underlying = [&](std::size_t j) {
    return c.on_stock ? c.stock.price(g[j], path.values[j]) : path.values[j];
  };
  if (!c.payload) return 0.0;
  if (c.kind == ClaimKind::terminal_adapted_process) return c.payload({});
  if (c.running_max) {
    const std::size_t stop = std::min(i, g.last_at_or_before(c.marks[0]));
    double m = underlying(0);
    for (std::size_t j = 1; j <= stop; ++j) m = std::max(m, underlying(j));
    return c.payload({m});
  }
  std::vector<double> x;
  x.reserve(c.marks.size());
  for (double s : c.marks) x.push_back(underlying(std::min(i, g.last_at_or_before(s))));
  return c.payload(x);
}

}  // namespace

double claim_to_adapted_process(const ClaimSpec& claim, const FbmPath& path, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("claim time outside [0,1]");
  return value_at_index(claim, path, path.grid.last_at_or_before(t));
}

double claim_payoff(const ClaimSpec& claim, const FbmPath& path) {
  return value_at_index(claim, path, path.grid.size() - 1);
}

std::vector<double> claim_values_at(const ClaimSpec& claim, const FbmPath& path,
                                    const std::vector<std::size_t>& indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(value_at_index(claim, path, i));
  return out;
}

}  // namespace fbmint
