#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace msle {

using json = nlohmann::json;

// Fixed 17 significant digits, so every double round-trips bit for bit.
inline std::string format17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

enum class Relation { at_most, at_least, within };

// One checked quantity. `checks` names the identity or property under test.
struct Metric {
  std::string name, checks;
  double value = 0;
  Relation relation = Relation::at_most;
  double tolerance = 0, lo = 0, hi = 0;  // lo/hi used by `within`
  std::optional<std::pair<double, double>> ci;

  bool pass() const {
    switch (relation) {
      case Relation::at_most: return value <= tolerance;
      case Relation::at_least: return value >= tolerance;
      case Relation::within: return value >= lo && value <= hi;
    }
    return false;
  }
};

struct StatReport {
  std::string subcommand;
  std::optional<std::uint64_t> seed;
  json config = json::object();
  std::vector<Metric> metrics;
  json results = json::object();  // subcommand-specific payload

  Metric& add(std::string name, std::string checks, double v, Relation rel, double tol, double lo = 0,
              double hi = 0) {
    Metric m;
    m.name = std::move(name);
    m.checks = std::move(checks);
    m.value = v;
    m.relation = rel;
    m.tolerance = tol;
    m.lo = lo;
    m.hi = hi;
    return metrics.emplace_back(std::move(m));
  }
  Metric& at_most(std::string name, std::string checks, double v, double tol) {
    return add(std::move(name), std::move(checks), v, Relation::at_most, tol);
  }
  Metric& at_least(std::string name, std::string checks, double v, double tol) {
    return add(std::move(name), std::move(checks), v, Relation::at_least, tol);
  }
  Metric& within(std::string name, std::string checks, double v, double lo, double hi) {
    return add(std::move(name), std::move(checks), v, Relation::within, 0, lo, hi);
  }
  // Report-only value; it cannot fail.
  Metric& info(std::string name, double v) {
    return add(std::move(name), "", v, Relation::within, 0, -INFINITY, INFINITY);
  }

  bool pass() const {
    for (auto& m : metrics)
      if (!m.pass()) return false;
    return true;
  }

  json to_json() const {
    json j;
    j["subcommand"] = subcommand;
    if (seed) j["seed"] = *seed;
    j["config"] = config;
    json ms = json::array();
    for (auto& m : metrics) {
      json e{{"name", m.name}, {"value", m.value}, {"pass", m.pass()}};
      if (!m.checks.empty()) e["checks"] = m.checks;
      switch (m.relation) {
        case Relation::at_most: e["tolerance"] = {{"max", m.tolerance}}; break;
        case Relation::at_least: e["tolerance"] = {{"min", m.tolerance}}; break;
        case Relation::within:
          if (std::isfinite(m.lo) || std::isfinite(m.hi)) e["tolerance"] = {{"min", m.lo}, {"max", m.hi}};
          break;
      }
      if (m.ci) e["ci"] = {m.ci->first, m.ci->second};
      ms.push_back(std::move(e));
    }
    j["metrics"] = std::move(ms);
    j["results"] = results;
    j["pass"] = pass();
    return j;
  }
};

// Output directory: explicit flag, then $MSLE_OUTPUT_DIR, then the working directory.
inline std::filesystem::path output_dir(const std::string& flag) {
  std::filesystem::path p = flag;
  if (p.empty()) {
    const char* env = std::getenv("MSLE_OUTPUT_DIR");
    p = env && *env ? env : ".";
  }
  std::filesystem::create_directories(p);
  return p;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << format17(v[i]);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

// JSON with doubles spelled out to 17 significant digits.
inline std::string dump17(const json& j, int indent = 2, int depth = 0) {
  std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  std::string end(static_cast<std::size_t>(indent * depth), ' ');
  if (j.is_number_float()) {
    double x = j.get<double>();
    return std::isfinite(x) ? format17(x) : "null";
  }
  if (j.is_object()) {
    if (j.empty()) return "{}";
    std::string s = "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      s += (first ? "" : ",\n") + pad + json(it.key()).dump() + ": " + dump17(it.value(), indent, depth + 1);
      first = false;
    }
    return s + "\n" + end + "}";
  }
  if (j.is_array()) {
    if (j.empty()) return "[]";
    std::string s = "[\n";
    for (std::size_t i = 0; i < j.size(); ++i)
      s += (i ? ",\n" : "") + pad + dump17(j[i], indent, depth + 1);
    return s + "\n" + end + "]";
  }
  return j.dump();
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << dump17(j) << '\n';
}

// "x,y;x,y;..." -> complex points
inline std::vector<std::complex<double>> parse_points(const std::string& s) {
  std::vector<std::complex<double>> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto semi = s.find(';', pos);
    std::string item = s.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
    auto comma = item.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("point '" + item + "' is not x,y");
    std::size_t u = 0, v = 0;
    double x = std::stod(item.substr(0, comma), &u), y = std::stod(item.substr(comma + 1), &v);
    if (u != comma || v != item.size() - comma - 1)
      throw std::invalid_argument("point '" + item + "' is not x,y");
    out.emplace_back(x, y);
    if (semi == std::string::npos) break;
    pos = semi + 1;
  }
  return out;
}

}  // namespace msle
