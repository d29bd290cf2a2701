#pragma once

// Configuration, trajectory files and snapshots.
//
// Config files are flat "key = value" text; a "[section]" line prefixes the
// following keys with "section.". Short aliases (n, p, eps, ...) map onto
// the dotted keys.
//
// Snapshot layout (DWSNAP01):
//   DWSNAP01\n
//   dim\n points_per_axis\n half_length\n t\n p\n   (decimal text, 17 digits)
//   u values then v values, little-endian IEEE-754 binary64, row-major

#include <dwlab/admissibility.hpp>
#include <dwlab/solver.hpp>
#include <dwlab/verification.hpp>

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwlab {

namespace fs = std::filesystem;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

class RunConfig {
 public:
  static const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> a{
        {"n", "grid.dim"},          {"dim", "grid.dim"},        {"points", "grid.points"},
        {"L", "grid.half_length"},  {"half_length", "grid.half_length"},
        {"p", "model.p"},           {"s", "model.s"},           {"kappa", "model.kappa"},
        {"inv_gamma", "model.inv_gamma"},
        {"eps", "ic.amplitude"},    {"amplitude", "ic.amplitude"}, {"ic", "ic.kind"},
        {"width", "ic.width"},      {"T", "run.T"},             {"dt", "run.dt"},
        {"seed", "run.seed"},       {"out", "output.dir"},      {"input", "fit.input"}};
    return a;
  }

  static std::string canonical_key(const std::string& key) {
    const auto it = aliases().find(key);
    return it == aliases().end() ? key : it->second;
  }

  void set(const std::string& key, const std::string& value) { values_[canonical_key(trim(key))] = trim(value); }

  /// "key=value" override.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value, got '" + kv + "'");
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }

  void merge_text(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      set(key, line.substr(eq + 1));
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(canonical_key(key)) != 0; }

  std::string get_string(const std::string& key, const std::string& def) const {
    const auto it = values_.find(canonical_key(key));
    return it == values_.end() ? def : it->second;
  }

  double get_double(const std::string& key, double def) const {
    const auto it = values_.find(canonical_key(key));
    if (it == values_.end()) return def;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + it->first + "' is not a number: '" + it->second + "'");
    }
  }

  long long get_int(const std::string& key, long long def) const {
    const auto it = values_.find(canonical_key(key));
    if (it == values_.end()) return def;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + it->first + "' is not an integer: '" + it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool def) const {
    const std::string v = get_string(key, def ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + canonical_key(key) + "' is not a boolean: '" + v + "'");
  }

  /// Sorted key = value lines.
  std::string canonical_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  std::string hash() const { return fnv1a_hex(canonical_text()); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// norms.csv

inline constexpr const char* kNormsHeader = "t,l_alpha,l2_v,hs_dot_v,l2_u,linf_v,x_weighted_lalpha,x_weighted_hs";

inline std::string norms_csv_text(std::span<const NormRecord> recs) {
  std::string out = std::string(kNormsHeader) + "\n";
  for (const auto& r : recs) {
    out += format_double(r.t) + "," + format_double(r.l_alpha) + "," + format_double(r.l2_v) + "," +
           format_double(r.hs_dot_v) + "," + format_double(r.l2_u) + "," + format_double(r.linf_v) + "," +
           format_double(r.x_weighted_lalpha) + "," + format_double(r.x_weighted_hs) + "\n";
  }
  return out;
}

inline std::vector<NormRecord> parse_norms_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kNormsHeader) throw IoError("norms.csv: unexpected header");
  std::vector<NormRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::array<double, 8> v{};
    std::istringstream ls(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ls, cell, ',')) {
      if (i >= v.size()) throw IoError("norms.csv: too many columns");
      try {
        v[i++] = std::stod(cell);
      } catch (const std::exception&) {
        throw IoError("norms.csv: bad number '" + cell + "'");
      }
    }
    if (i != v.size()) throw IoError("norms.csv: expected 8 columns");
    out.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
  }
  return out;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

// ---------------------------------------------------------------------------
// Snapshots

inline constexpr const char* kSnapshotMagic = "DWSNAP01";

struct Snapshot {
  int dim = 1;
  int points_per_axis = 8;
  double half_length = 1.0;
  double t = 0.0;
  double p = 2.0;
  std::vector<double> u;
  std::vector<double> v;

  bool operator==(const Snapshot&) const = default;
};

inline Snapshot make_snapshot(const State& s, double p) {
  const Grid& g = *s.u.grid;
  return {g.dim(), g.points_per_axis(), g.half_length(), s.t, p, s.u.values, s.v.values};
}

inline State snapshot_state(const Snapshot& snap) {
  const auto grid = make_grid(snap.dim, snap.points_per_axis, snap.half_length);
  return {Field(grid, snap.u), Field(grid, snap.v), snap.t};
}

inline std::string encode_snapshot(const Snapshot& s) {
  const std::size_t nodes =
      s.dim == 1 ? static_cast<std::size_t>(s.points_per_axis) : static_cast<std::size_t>(s.points_per_axis) * s.points_per_axis;
  if (s.u.size() != nodes || s.v.size() != nodes) throw IoError("snapshot payload does not match its grid");
  std::string out = std::string(kSnapshotMagic) + "\n" + std::to_string(s.dim) + "\n" +
                    std::to_string(s.points_per_axis) + "\n" + format_double(s.half_length) + "\n" + format_double(s.t) +
                    "\n" + format_double(s.p) + "\n";
  out.reserve(out.size() + 16 * nodes);
  auto put = [&out](double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  };
  for (double x : s.u) put(x);
  for (double x : s.v) put(x);
  return out;
}

inline Snapshot decode_snapshot(const std::string& data) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) throw IoError("snapshot: truncated header");
    std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kSnapshotMagic) throw IoError("snapshot: bad magic");
  Snapshot s;
  try {
    s.dim = std::stoi(next_line());
    s.points_per_axis = std::stoi(next_line());
    s.half_length = std::stod(next_line());
    s.t = std::stod(next_line());
    s.p = std::stod(next_line());
  } catch (const std::logic_error&) {
    throw IoError("snapshot: malformed header value");
  }
  if (s.dim != 1 && s.dim != 2) throw IoError("snapshot: bad dimension");
  if (s.points_per_axis < 1) throw IoError("snapshot: bad point count");
  const std::size_t nodes =
      s.dim == 1 ? static_cast<std::size_t>(s.points_per_axis) : static_cast<std::size_t>(s.points_per_axis) * s.points_per_axis;
  if (data.size() - pos != 16 * nodes) throw IoError("snapshot: payload length mismatch");
  auto get = [&]() {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos++])) << (8 * b);
    return std::bit_cast<double>(bits);
  };
  s.u.resize(nodes);
  s.v.resize(nodes);
  for (auto& x : s.u) x = get();
  for (auto& x : s.v) x = get();
  return s;
}

inline void write_snapshot(const fs::path& path, const Snapshot& s) { write_text(path, encode_snapshot(s)); }
inline Snapshot read_snapshot(const fs::path& path) { return decode_snapshot(read_text(path)); }

// ---------------------------------------------------------------------------
// JSON views of reports

inline nlohmann::ordered_json to_json(const AdmissibleParams& a) {
  nlohmann::ordered_json j;
  j["n"] = a.n;
  j["p"] = a.p;
  j["alpha"] = a.alpha;
  j["beta_alpha"] = a.beta_alpha;
  j["delta_alpha"] = a.delta_alpha;
  j["s"] = a.s;
  j["kappa"] = a.kappa;
  j["r1"] = a.r1;
  j["r2"] = a.r2;
  j["gamma"] = a.gamma;
  j["m"] = a.m;
  j["d"] = a.d;
  j["omega0"] = {a.omega0_sigma1, a.omega0_sigma_alpha, a.omega0_sigma2};
  j["omega1"] = a.omega1;
  j["omega2"] = a.omega2;
  j["omega0_range_ok"] = a.omega0_range_ok;
  j["omega1_ok"] = a.omega1_ok;
  j["omega2_ok"] = a.omega2_ok;
  j["eps0"] = a.eps0 ? nlohmann::ordered_json(*a.eps0) : nlohmann::ordered_json(nullptr);
  return j;
}

inline nlohmann::ordered_json to_json(const ValidationReport& r) {
  nlohmann::ordered_json j;
  j["pass"] = r.ok();
  auto& arr = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) arr.push_back({{"name", c.name}, {"condition", c.condition}, {"slack", c.slack}, {"pass", c.pass}});
  return j;
}

inline nlohmann::ordered_json to_json(const DecayFit& f) {
  return {{"t_lo", f.t_lo},           {"t_hi", f.t_hi},         {"slope", f.slope},
          {"theoretical", f.theoretical}, {"deviation", f.deviation}, {"r_squared", f.r_squared},
          {"samples", f.samples}};
}

inline nlohmann::ordered_json to_json(const RatioReport& r) {
  nlohmann::ordered_json j{{"case", r.case_id}, {"max_ratio", r.max_ratio}, {"bounded", r.bounded_verdict},
                           {"note", r.note},     {"trend", r.ratio_trend}};
  if (r.max_ratio_refined > 0.0) {
    j["max_ratio_refined"] = r.max_ratio_refined;
    j["resolution_change"] = r.resolution_change;
    j["resolution_stable"] = r.resolution_stable;
  } else {
    j["fitted_c"] = r.fitted_c;
    j["rate"] = r.rate;
    j["lhs_slope"] = r.lhs_slope;
  }
  return j;
}

inline nlohmann::ordered_json to_json(const PicardReport& r) {
  return {{"iterates", r.iterates},         {"converged", r.converged},
          {"y_diffs", r.y_diffs},           {"ratios", r.ratios},
          {"quadrature_error", r.quadrature_error}, {"y_norm_linear", r.y_norm_linear}};
}

/// Write a JSON report that embeds the config hash.
inline void write_report(const fs::path& path, nlohmann::ordered_json body, const RunConfig& cfg) {
  body["config_hash"] = cfg.hash();
  write_text(path, body.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Trajectory output

/// norms.csv, meta.json (config, seed, hashes) and snapshot files.
inline void write_trajectory(const Trajectory& traj, const fs::path& dir, const RunConfig& cfg, std::uint64_t seed,
                             double p) {
  if (traj.records.empty()) throw std::invalid_argument("write_trajectory: empty trajectory");
  ensure_directory(dir);
  const std::string csv = norms_csv_text(traj.records);
  write_text(dir / "norms.csv", csv);

  nlohmann::ordered_json meta;
  meta["config"] = cfg.values();
  meta["config_hash"] = cfg.hash();
  meta["seed"] = seed;
  meta["norms_hash"] = fnv1a_hex(csv);
  meta["params"] = to_json(traj.params);
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  for (const auto& [k, v] : traj.meta) extra[k] = v;
  meta["run"] = extra;
  nlohmann::ordered_json snaps = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%04zu.dwsnap", i);
    write_snapshot(dir / name, make_snapshot(traj.snapshots[i].state, p));
    snaps.push_back({{"file", name}, {"t", traj.snapshots[i].t}});
  }
  meta["snapshots"] = snaps;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

struct LoadedRun {
  std::vector<NormRecord> records;
  nlohmann::json meta;
};

/// Read norms.csv and meta.json from a run directory, refusing pairs whose
/// recorded norms hash does not match the CSV on disk.
inline LoadedRun load_run(const fs::path& dir) {
  const std::string csv = read_text(dir / "norms.csv");
  LoadedRun run;
  try {
    run.meta = nlohmann::json::parse(read_text(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("meta.json: ") + e.what());
  }
  const std::string recorded = run.meta.value("norms_hash", std::string{});
  if (recorded != fnv1a_hex(csv)) {
    throw ConfigError("norms.csv does not match meta.json in '" + dir.string() + "' (hash mismatch)");
  }
  run.records = parse_norms_csv(csv);
  return run;
}

}  // namespace dwlab
