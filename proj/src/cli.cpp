#include "elastodyn/cli.hpp"

#include "elastodyn/random.hpp"
#include "elastodyn/scenarios.hpp"
#include "elastodyn/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

namespace elastodyn::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"mode", "seed", "threads"}},
      {"geometry", {"dim", "x", "y", "z", "t"}},
      {"material", {"lambda", "mu", "rho"}},
      {"scales",
       {"length", "time", "modulus", "density", "u_x", "u_y", "u_z", "s_xx", "s_yy", "s_zz", "s_xy",
        "s_yz", "s_xz", "fallback"}},
      {"network", {"hidden", "layers"}},
      {"training",
       {"stages", "batch_size", "n_collocation", "alpha", "lambda_data", "lambda_eqn", "mapping",
        "hard_bc", "initial_lambda", "initial_mu", "checkpoint_every"}},
      {"data",
       {"source", "path", "eval_path", "wave", "grid", "eval_grid", "boundary_fraction",
        "interior_fraction", "mu_values", "eval_mu"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string where(const RawConfig::Entry& e) { return "line " + std::to_string(e.line); }

// Typed accessors over RawConfig. Every failure names the line or the key.
class Reader {
 public:
  explicit Reader(const RawConfig& raw) : raw_(raw) {}

  bool has(const std::string& key) const { return raw_.has(key); }

  const RawConfig::Entry& need(const std::string& key, const std::string& why = "") const {
    if (!raw_.has(key)) {
      throw ConfigError("missing required key '" + key + "'" + (why.empty() ? "" : " (" + why + ")"));
    }
    return raw_.get(key);
  }

  double number(const std::string& key) const { return to_number(need(key), key); }
  std::optional<double> number_opt(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  long long integer(const std::string& key) const { return to_integer(need(key), key); }
  long long integer_or(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  bool boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& e = raw_.get(key);
    if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
    if (e.value == "false" || e.value == "no" || e.value == "0") return false;
    throw ConfigError(where(e) + ": '" + key + "' expects true or false, got '" + e.value + "'");
  }

  std::string text_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw_.get(key).value : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    const auto& e = need(key);
    std::vector<double> out;
    for (const auto& part : split(e.value, ',')) out.push_back(to_number({part, e.line}, key));
    return out;
  }

  std::pair<double, double> range(const std::string& key) const {
    const auto v = numbers(key);
    const auto& e = raw_.get(key);
    if (v.size() != 2 || !(v[0] < v[1])) {
      throw ConfigError(where(e) + ": '" + key + "' expects 'lo, hi' with lo < hi");
    }
    return {v[0], v[1]};
  }

  static double to_number(const RawConfig::Entry& e, const std::string& key) {
    double v = 0.0;
    const auto* first = e.value.data();
    const auto* last = first + e.value.size();
    if (first != last && *first == '+') ++first;  // from_chars rejects a leading '+'
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      throw ConfigError(where(e) + ": invalid number '" + e.value + "' for '" + key + "'");
    }
    return v;
  }

  static long long to_integer(const RawConfig::Entry& e, const std::string& key) {
    long long v = 0;
    const auto* first = e.value.data();
    const auto* last = first + e.value.size();
    if (first != last && *first == '+') ++first;  // from_chars rejects a leading '+'
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError(where(e) + ": invalid integer '" + e.value + "' for '" + key + "'");
    }
    return v;
  }

  const RawConfig& raw() const { return raw_; }

 private:
  const RawConfig& raw_;
};

data::PlaneWaveSpec parse_wave(const RawConfig::Entry& e, Dim dim) {
  // kind amplitude wavenumber axis polarization [sense [phase]]
  std::istringstream is(e.value);
  std::vector<std::string> tok;
  for (std::string s; is >> s;) tok.push_back(s);
  const auto bad = [&](const std::string& why) {
    return ConfigError(where(e) + ": bad wave '" + e.value + "': " + why);
  };
  if (tok.size() < 5 || tok.size() > 7) {
    throw bad("expected 'P|S amplitude wavenumber axis polarization [sense [phase]]'");
  }
  const auto axis = [&](const std::string& s) {
    const int n = spatial_dims(dim);
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z" && n == 3) return 2;
    throw bad("unknown axis '" + s + "'");
  };
  data::PlaneWaveSpec w;
  if (tok[0] == "P") {
    w.kind = data::WaveKind::P;
  } else if (tok[0] == "S") {
    w.kind = data::WaveKind::S;
  } else {
    throw bad("kind must be P or S");
  }
  w.amplitude = Reader::to_number({tok[1], e.line}, "wave");
  w.wavenumber = Reader::to_number({tok[2], e.line}, "wave");
  w.axis = axis(tok[3]);
  w.polarization = axis(tok[4]);
  if (tok.size() > 5) {
    const double s = Reader::to_number({tok[5], e.line}, "wave");
    if (s != 1.0 && s != -1.0) throw bad("sense must be +1 or -1");
    w.sense = static_cast<int>(s);
  }
  if (tok.size() > 6) w.phase = Reader::to_number({tok[6], e.line}, "wave");
  return w;
}

data::GridSpec grid_from(const Reader& r, const std::string& key, Dim dim) {
  const auto& e = r.need(key);
  try {
    return parse_grid(e.value, dim);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(where(e) + ": " + ex.what());
  }
}

std::vector<training::LrStage> parse_stages(const RawConfig::Entry& e) {
  std::vector<training::LrStage> stages;
  for (const auto& part : split(e.value, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw ConfigError(where(e) + ": stage '" + part + "' is not 'epochs:lr'");
    }
    training::LrStage st;
    st.epochs = static_cast<int>(Reader::to_integer({trim(part.substr(0, colon)), e.line}, "stages"));
    st.lr = Reader::to_number({trim(part.substr(colon + 1)), e.line}, "stages");
    stages.push_back(st);
  }
  return stages;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Training subset of a full reference: the requested boundary and interior
// fractions, or everything when neither is given.
data::ReferenceDataset pick(const data::ReferenceDataset& full, const Reader& r, std::uint64_t seed) {
  const auto fb = r.number_opt("data.boundary_fraction");
  const auto fi = r.number_opt("data.interior_fraction");
  if (!fb && !fi) return full;
  std::optional<data::ReferenceDataset> out;
  if (fb && *fb > 0.0) out = data::subsample_boundary(full, *fb, derive_seed(seed, 1));
  if (fi && *fi > 0.0) {
    auto part = data::subsample_interior(full, *fi, derive_seed(seed, 2));
    out = out ? data::concat(*out, part) : part;
  }
  if (!out) throw ConfigError("data fractions select no points");
  return *out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

RawConfig RawConfig::parse(std::istream& is) {
  RawConfig cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  const auto& keys = known_keys();
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty() || !keys.count(section)) {
        throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!keys.at(section).count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'" +
                        (section.empty() ? "" : " in [" + section + "]"));
    }
    if (value.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    auto& slot = cfg.values[full];
    if (!slot.empty() && full != "data.wave") {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(slot.front().line) + ")");
    }
    slot.push_back({value, lineno});
  }
  return cfg;
}

RawConfig RawConfig::load(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string() + ": cannot open config");
  try {
    return parse(is);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const RawConfig::Entry& RawConfig::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second.front();
}

// ---------------------------------------------------------------------------

void write_svg_plot(const fs::path& path, const std::string& title, const std::string& x_label,
                    const std::vector<Series>& series, bool log_y) {
  constexpr double W = 720, H = 440, L = 80, R = 170, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  const auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  const auto label = [&](double v) {
    std::ostringstream os;
    os << std::setprecision(3) << (log_y ? std::pow(10.0, v) : v);
    return os.str();
  };

  std::ofstream os(path);
  if (!os) throw std::runtime_error(path.string() + ": cannot write");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double yy = H - B - (H - T - B) * k / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">" << label(fy) << "</text>\n";
    const double fx = x0 + (x1 - x0) * k / 4.0;
    std::ostringstream xs;
    xs << std::setprecision(3) << fx;
    os << "<text x=\"" << px(fx) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << xs.str()
       << "</text>\n";
  }
  os << "<text x=\"" << L + (W - L - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
     << xml_escape(x_label) << (log_y ? " (log y)" : "") << "</text>\n";
  os << std::setprecision(6);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((log_y && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i])) continue;
      os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    os << "\"/>\n";
    const double ly = T + 16 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 36 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 42 << "\" y=\"" << ly << "\">" << xml_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
}

// ---------------------------------------------------------------------------

data::GridSpec parse_grid(const std::string& s, Dim dim) {
  const auto parts = split(s, ',');
  const std::size_t want = static_cast<std::size_t>(spatial_dims(dim)) + 1;
  if (parts.size() != want) {
    throw std::invalid_argument("grid '" + s + "' has " + std::to_string(parts.size()) + " entries, " +
                                std::to_string(want) + " expected for " + std::to_string(spatial_dims(dim)) +
                                "D (" + (dim == Dim::two ? "nx,ny,nt" : "nx,ny,nz,nt") + ")");
  }
  std::vector<int> n;
  for (const auto& p : parts) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc() || ptr != p.data() + p.size() || v < 1) {
      throw std::invalid_argument("grid entry '" + p + "' is not a positive integer");
    }
    n.push_back(v);
  }
  data::GridSpec g;
  g.nx = n[0];
  g.ny = n[1];
  if (dim == Dim::three) {
    g.nz = n[2];
    g.nt = n[3];
  } else {
    g.nt = n[2];
  }
  return g;
}

int effective_threads(int configured) {
  if (const char* env = std::getenv("ELASTODYN_THREADS")) {
    int v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v >= 1) return v;
    throw ConfigError("ELASTODYN_THREADS must be a positive integer, got '" + s + "'");
  }
  return std::max(1, configured);
}

RunPlan plan_from_config(const RawConfig& raw, const fs::path& base_dir) {
  const Reader r(raw);
  RunPlan plan;
  auto& c = plan.config;

  const auto& mode_e = r.need("mode");
  try {
    c.mode = training::parse_mode(mode_e.value);
  } catch (const std::exception&) {
    throw ConfigError(where(mode_e) + ": mode must be forward, inverse or surrogate, got '" + mode_e.value + "'");
  }
  const long long seed = r.integer("seed");
  if (seed < 0) throw ConfigError(where(raw.get("seed")) + ": seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  plan.threads = static_cast<int>(r.integer_or("threads", 1));
  if (plan.threads < 1) throw ConfigError(where(raw.get("threads")) + ": threads must be >= 1");

  const long long dim = r.integer_or("geometry.dim", 2);
  if (dim != 2 && dim != 3) throw ConfigError(where(raw.get("geometry.dim")) + ": dim must be 2 or 3");
  c.dim = dim == 2 ? Dim::two : Dim::three;
  data::Schema schema;
  schema.dim = c.dim;
  schema.with_mu = c.mode == training::Mode::surrogate;

  // Material: what each mode needs to know up front.
  MaterialParams m;
  m.rho = r.number("material.rho");
  const bool forward = c.mode == training::Mode::forward;
  const bool inverse = c.mode == training::Mode::inverse;
  const bool surrogate = c.mode == training::Mode::surrogate;
  m.lambda = forward || surrogate ? r.number("material.lambda") : r.number_or("material.lambda", 0.0);
  m.mu = forward ? r.number("material.mu") : r.number_or("material.mu", 0.0);
  if (inverse && r.has("material.lambda") && r.has("material.mu")) plan.truth = m;

  // Data.
  const auto& source = r.need("data.source");
  data::ReferenceDataset full;  // reference the scales are taken from
  if (source.value == "manufactured") {
    data::Geometry g;
    g.dim = c.dim;
    const char* axes[] = {"geometry.x", "geometry.y", "geometry.z"};
    for (int k = 0; k < spatial_dims(c.dim); ++k) {
      const auto [lo, hi] = r.range(axes[k]);
      g.lo[static_cast<std::size_t>(k)] = lo;
      g.hi[static_cast<std::size_t>(k)] = hi;
    }
    std::tie(g.t_lo, g.t_hi) = r.range("geometry.t");
    r.need("data.wave");
    std::vector<data::PlaneWaveSpec> waves;
    for (const auto& e : raw.values.at("data.wave")) waves.push_back(parse_wave(e, c.dim));
    const auto waves_for = [&](std::optional<double> mu) {
      auto ws = waves;
      for (auto& w : ws) {
        w.material = m;
        if (mu) w.material.mu = *mu;
        try {
          w.validate();
        } catch (const std::exception& ex) {
          throw ConfigError(std::string("invalid wave: ") + ex.what() +
                            (inverse ? " (manufactured inverse data needs material.lambda and material.mu)" : ""));
        }
      }
      return ws;
    };
    const auto grid = grid_from(r, "data.grid", c.dim);
    const auto eval_grid = r.has("data.eval_grid") ? grid_from(r, "data.eval_grid", c.dim) : grid;
    plan.eval_grid = eval_grid;
    if (surrogate) {
      const auto mus = r.numbers("data.mu_values");
      const double eval_mu = r.number("data.eval_mu");
      std::optional<data::ReferenceDataset> train;
      for (std::size_t i = 0; i < mus.size(); ++i) {
        const auto dense = data::manufactured(waves_for(mus[i]), g, grid, mus[i]);
        const auto part = pick(dense, r, derive_seed(c.seed, 20 + i));
        train = train ? data::concat(*train, part) : part;
        full = i == 0 ? dense : data::concat(full, dense);
      }
      plan.train = *train;
      plan.eval = data::manufactured(waves_for(eval_mu), g, eval_grid, eval_mu);
    } else {
      full = data::manufactured(waves_for(std::nullopt), g, grid);
      plan.train = pick(full, r, derive_seed(c.seed, 20));
      plan.eval = data::manufactured(waves_for(std::nullopt), g, eval_grid);
    }
  } else if (source.value == "csv") {
    const fs::path path = resolve(base_dir, r.need("data.path").value);
    full = data::load_csv(path, schema);
    plan.train = pick(full, r, derive_seed(c.seed, 20));
    plan.eval = r.has("data.eval_path") ? data::load_csv(resolve(base_dir, raw.get("data.eval_path").value), schema)
                                        : full;
  } else {
    throw ConfigError(where(source) + ": data.source must be manufactured or csv, got '" + source.value + "'");
  }

  // Scales.
  physics::ScaleOverrides ov;
  const std::string fallback = r.text_or("scales.fallback", "error");
  if (fallback == "sibling") {
    ov = scenarios::sibling_overrides(full);
  } else if (fallback != "error") {
    throw ConfigError(where(raw.get("scales.fallback")) + ": fallback must be error or sibling");
  }
  ov.length = r.number_opt("scales.length");
  ov.time = r.number_opt("scales.time");
  ov.modulus = r.number_opt("scales.modulus");
  ov.density = r.number_opt("scales.density");
  for (Field f : output_fields(c.dim)) {
    const std::string key = "scales." + std::string(field_name(f));
    if (r.has(key)) ov.fields[f] = r.number(key);
  }
  if (inverse && !plan.truth && !ov.modulus) r.need("scales.modulus", "inverse mode without known lambda and mu");
  try {
    plan.scales = physics::make_scales(full, ov, m);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string(ex.what()) + " (set it under [scales] or use fallback = sibling)");
  }

  // Network and training.
  c.hidden = static_cast<int>(r.integer_or("network.hidden", 64));
  c.layers = static_cast<int>(r.integer_or("network.layers", 4));
  if (r.has("training.stages")) c.stages = parse_stages(raw.get("training.stages"));
  if (r.has("training.batch_size") && raw.get("training.batch_size").value != "all") {
    const long long b = r.integer("training.batch_size");
    if (b < 1) throw ConfigError(where(raw.get("training.batch_size")) + ": batch_size must be >= 1 or 'all'");
    c.batch_size = static_cast<std::size_t>(b);
  } else {
    c.batch_size = static_cast<std::size_t>(plan.train.size());
  }
  c.n_collocation = static_cast<std::size_t>(r.integer_or("training.n_collocation", 500));
  c.weights = surrogate && c.dim == Dim::two ? physics::LossWeights::surrogate_2d()
                                             : physics::LossWeights::unit(c.dim);
  if (r.has("training.alpha")) {
    c.weights.alpha = r.numbers("training.alpha");
    if (c.weights.alpha.size() != residual_names(c.dim).size()) {
      throw ConfigError(where(raw.get("training.alpha")) + ": alpha needs " +
                        std::to_string(residual_names(c.dim).size()) + " values");
    }
  }
  c.weights.data = r.number_or("training.lambda_data", 1.0);
  c.weights.equation = r.number_or("training.lambda_eqn", 1.0);
  if (r.has("training.mapping")) {
    const auto& e = raw.get("training.mapping");
    try {
      c.mapping = training::parse_mapping(e.value);
    } catch (const std::exception&) {
      throw ConfigError(where(e) + ": mapping must be linear, sigmoid or tanh, got '" + e.value + "'");
    }
  }
  c.hard_bc = r.boolean_or("training.hard_bc", false);
  c.initial_extra = {r.number_or("training.initial_lambda", 0.0), r.number_or("training.initial_mu", 0.0)};
  c.checkpoint_every = static_cast<int>(r.integer_or("training.checkpoint_every", 100));
  c.material = m;
  try {
    c.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("invalid training settings: ") + ex.what());
  }

  plan.output_dir = resolve(base_dir, r.need("output.dir").value);
  return plan;
}

// ---------------------------------------------------------------------------

namespace {

training::Checkpoint make_checkpoint(const RunPlan& plan, const training::TrainablePack& pack, int epoch) {
  training::Checkpoint cp;
  cp.mode = plan.config.mode;
  cp.schema = plan.train.schema;
  cp.geometry = plan.eval.geometry;
  cp.scales = plan.scales;
  cp.material = plan.config.material;
  cp.pack = pack;
  cp.epoch = epoch;
  return cp;
}

data::ReferenceDataset with_fields(const data::ReferenceDataset& like, const Eigen::MatrixXd& fields) {
  data::ReferenceDataset ds = like;
  ds.fields = fields;
  ds.provenance = data::Provenance::imported;
  return ds;
}

// Displacement slice along x at the middle y (and z) row and middle instant.
void write_slice_svg(const fs::path& path, const RunPlan& plan, const Eigen::MatrixXd& pred) {
  const auto& g = *plan.eval_grid;
  const int jy = (g.ny - 1) / 2;
  const int jz = (g.nz - 1) / 2;
  const int jt = (g.nt - 1) / 2;
  const int base = ((jt * g.nz + jz) * g.ny + jy) * g.nx;
  std::vector<Series> series;
  const auto fields = output_fields(plan.config.dim);
  for (int j = 0; j < spatial_dims(plan.config.dim); ++j) {
    Series ref{std::string(field_name(fields[static_cast<std::size_t>(j)])) + " reference", {}, {}};
    Series pre{std::string(field_name(fields[static_cast<std::size_t>(j)])) + " predicted", {}, {}};
    for (int i = 0; i < g.nx; ++i) {
      const int row = base + i;
      ref.x.push_back(plan.eval.coords(row, 0));
      ref.y.push_back(plan.eval.fields(row, j));
      pre.x.push_back(plan.eval.coords(row, 0));
      pre.y.push_back(pred(row, j));
    }
    series.push_back(std::move(ref));
    series.push_back(std::move(pre));
  }
  std::ostringstream title;
  title << "displacement at y = " << plan.eval.coords(base, 1)
        << ", t = " << plan.eval.coords(base, plan.eval.schema.time_column());
  write_svg_plot(path, title.str(), "x", series, false);
}

}  // namespace

int cmd_train(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  RunPlan plan;
  try {
    const auto raw = RawConfig::load(config_path);
    plan = plan_from_config(raw, config_path.parent_path());
    plan.threads = effective_threads(plan.threads);
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    err << "config error: " << (what.rfind(config_path.string(), 0) == 0 ? "" : config_path.string() + ": ")
        << what << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  const fs::path dir = plan.output_dir;
  const fs::path checkpoint_path = dir / "checkpoint.txt";
  try {
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    err << "error: cannot create " << dir << ": " << e.what() << "\n";
    return kExitFailure;
  }

  out << "training " << training::mode_name(plan.config.mode) << " model on " << plan.train.size()
      << " samples for " << training::total_epochs(plan.config.stages) << " epochs\n";
  training::TrainHooks hooks;
  hooks.on_warning = [&](const std::string& w) { err << w << "\n"; };
  hooks.on_checkpoint = [&](int epoch, const training::TrainablePack& pack) {
    training::write_checkpoint(checkpoint_path, make_checkpoint(plan, pack, epoch));
  };

  training::TrainResult result;
  try {
    result = training::train(plan.config, plan.train, plan.scales, hooks);
  } catch (const training::DivergenceError& e) {
    training::write_checkpoint(checkpoint_path, make_checkpoint(plan, e.last_good(), e.epoch()));
    err << "error: training diverged at epoch " << e.epoch() << ", step " << e.step() << ": " << e.what()
        << "\nlast finite parameters saved to " << checkpoint_path.string() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  try {
    {
      std::ofstream hs(dir / "loss_history.csv");
      training::write_history_csv(hs, result.history, plan.config.dim, plan.config.mode);
      if (!hs) throw std::runtime_error("cannot write loss_history.csv");
    }
    if (!result.history.empty()) {
      std::vector<Series> curves{{"total", {}, {}}, {"data", {}, {}}, {"equation", {}, {}}};
      std::map<int, std::array<double, 4>> acc;  // per epoch sums and count
      for (const auto& h : result.history) {
        auto& a = acc[h.epoch];
        a[0] += h.loss.total;
        a[1] += h.loss.lambda_data * h.loss.data_total;
        a[2] += h.loss.lambda_eqn * h.loss.eqn_total;
        a[3] += 1.0;
      }
      for (const auto& [epoch, a] : acc) {
        for (int k = 0; k < 3; ++k) {
          curves[static_cast<std::size_t>(k)].x.push_back(epoch);
          curves[static_cast<std::size_t>(k)].y.push_back(a[static_cast<std::size_t>(k)] / a[3]);
        }
      }
      write_svg_plot(dir / "loss.svg", "training loss (epoch mean)", "epoch", curves, true);
    }

    const Eigen::MatrixXd pred =
        training::predict(result.pack, plan.eval.coords, plan.eval.schema, plan.scales, plan.threads);
    data::write_csv(dir / "reference.csv", plan.eval);
    data::write_csv(dir / "prediction.csv", with_fields(plan.eval, pred));
    if (plan.eval_grid) write_slice_svg(dir / "field_slice.svg", plan, pred);

    // The summary is computed from the files just written.
    const auto ref = data::load_csv(dir / "reference.csv", plan.eval.schema);
    const auto got = data::load_csv(dir / "prediction.csv", plan.eval.schema);

    std::ostringstream sm;
    sm << "mode: " << training::mode_name(plan.config.mode) << "\n";
    sm << "schema: " << plan.eval.schema.name() << "\n";
    sm << "seed: " << plan.config.seed << "\n";
    sm << "epochs: " << training::total_epochs(plan.config.stages) << "\n";
    sm << "steps: " << result.history.size() << "\n";
    sm << "train_samples: " << plan.train.size() << "\n";
    sm << "eval_samples: " << ref.size() << "\n";
    if (!result.history.empty()) {
      const auto& last = result.history.back().loss;
      sm << "final_loss_total: " << fmt(last.total) << "\n";
      sm << "final_loss_data: " << fmt(last.data_total) << "\n";
      sm << "final_loss_eqn: " << fmt(last.eqn_total) << "\n";
    }
    const auto fields = output_fields(plan.config.dim);
    for (int j = 0; j < static_cast<int>(fields.size()); ++j) {
      const Eigen::VectorXd p = got.fields.col(j);
      const Eigen::VectorXd q = ref.fields.col(j);
      sm << "nrmse_" << field_name(fields[static_cast<std::size_t>(j)]) << ": ";
      if (q.maxCoeff() > q.minCoeff()) {
        sm << fmt(data::nrmse({p.data(), static_cast<std::size_t>(p.size())},
                              {q.data(), static_cast<std::size_t>(q.size())}))
           << "\n";
      } else {
        sm << "undefined (constant reference)\n";
      }
    }
    if (result.recovered) {
      sm << "lambda: " << fmt(result.recovered->lambda) << "\n";
      sm << "mu: " << fmt(result.recovered->mu) << "\n";
      if (plan.truth) {
        sm << "lambda_rel_error: " << fmt(std::abs(result.recovered->lambda - plan.truth->lambda) / plan.truth->lambda)
           << "\n";
        sm << "mu_rel_error: " << fmt(std::abs(result.recovered->mu - plan.truth->mu) / plan.truth->mu) << "\n";
      }
    }
    for (const auto& w : result.warnings) sm << "warning: " << w.substr(w.rfind("warning: ", 0) == 0 ? 9 : 0) << "\n";
    {
      std::ofstream ss(dir / "summary.txt");
      ss << sm.str();
      if (!ss) throw std::runtime_error("cannot write summary.txt");
    }
    out << sm.str();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_predict(const PredictRequest& req, std::ostream& out, std::ostream& err) {
  try {
    const auto cp = training::read_checkpoint(req.checkpoint);
    if (cp.schema.with_mu && !req.mu) {
      err << "error: " << req.checkpoint.string()
          << " is a surrogate checkpoint; pass the material value with --mu <MPa>\n";
      return kExitFailure;
    }
    if (!cp.schema.with_mu && req.mu) {
      err << "error: --mu only applies to surrogate checkpoints\n";
      return kExitFailure;
    }
    if (cp.schema.dim == Dim::two && req.grid.nz != 1) {
      err << "error: grid has a z extent but the checkpoint is 2D\n";
      return kExitFailure;
    }
    const Eigen::MatrixXd xs = data::grid_points(cp.geometry, req.grid);
    data::ReferenceDataset ds;
    ds.schema = cp.schema;
    ds.geometry = cp.geometry;
    ds.coords.resize(xs.rows(), cp.schema.coord_count());
    ds.coords.leftCols(xs.cols()) = xs;
    if (cp.schema.with_mu) ds.coords.col(cp.schema.mu_column()).setConstant(*req.mu);
    ds.fields = training::predict(cp.pack, ds.coords, cp.schema, cp.scales, effective_threads(req.threads));
    ds.boundary = data::boundary_mask(ds.coords, ds.geometry);
    if (req.out.has_parent_path()) fs::create_directories(req.out.parent_path());
    data::write_csv(req.out, ds);
    out << "wrote " << ds.size() << " rows to " << req.out.string() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_verify(const std::string& level, bool inject_fault, std::ostream& out, std::ostream& err) {
  verify::FaultInjection fault;
  if (inject_fault) fault.inertia_factor = 1.01;
  std::vector<std::string> failed;
  const auto report = [&](const verify::CheckResult& r) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << std::endl;
    if (!r.passed) failed.push_back(r.name);
  };
  try {
    if (level == "quick") {
      for (const auto& r : verify::quick(fault)) report(r);
    } else if (level == "full") {
      verify::full(fault, report);
    } else {
      err << "error: --level must be quick or full\n";
      return kExitConfig;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  if (!failed.empty()) {
    err << "verification failed:";
    for (const auto& f : failed) err << " [" << f << "]";
    err << "\n";
    return kExitFailure;
  }
  out << "all checks passed\n";
  return kExitOk;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physics-informed networks for dynamic linear elasticity"};
  app.require_subcommand(1);

  std::string config;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config, "Run config (INI)")->required();

  PredictRequest pred;
  std::string grid;
  double mu = 0.0;
  auto* predict = app.add_subcommand("predict", "Evaluate a checkpoint on a regular grid");
  predict->add_option("--checkpoint", pred.checkpoint, "Checkpoint file")->required();
  predict->add_option("--grid", grid, "Grid nodes nx,ny[,nz],nt")->required();
  auto* mu_opt = predict->add_option("--mu", mu, "Shear modulus for surrogate checkpoints (MPa)");
  predict->add_option("--out", pred.out, "Output CSV")->required();
  predict->add_option("--threads", pred.threads, "Evaluation threads")->check(CLI::PositiveNumber);

  std::string level = "quick";
  bool fault = false;
  auto* verify = app.add_subcommand("verify", "Run the self-checks");
  verify->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  verify->add_flag("--inject-fault", fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*train) return cmd_train(config, out, err);
  if (*predict) {
    if (*mu_opt) pred.mu = mu;
    try {
      const auto cp = training::read_checkpoint(pred.checkpoint);
      pred.grid = parse_grid(grid, cp.schema.dim);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitFailure;
    }
    return cmd_predict(pred, out, err);
  }
  return cmd_verify(level, fault, out, err);
}

}  // namespace elastodyn::cli
