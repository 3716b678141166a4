#include "bozd/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bozd/families.hpp"
#include "bozd/operator_resolvent.hpp"
#include "bozd/quadrature.hpp"
#include "bozd/zd_limit.hpp"

namespace bozd::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Shortest round-trip representation.
std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

int line_of_key(std::string_view text, const std::string& key) {
  if (key.empty()) return 0;
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string_view::npos) return 0;
  return 1 + int(std::count(text.begin(), text.begin() + std::ptrdiff_t(pos), '\n'));
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Runs fn(k) for k < n on `threads` workers. The exception of the lowest
/// failing index is rethrown so failures do not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  std::vector<std::exception_ptr> errs(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < n;) {
      try {
        fn(k);
      } catch (...) {
        errs[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(threads, int(n)); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

bool uses_formula_grid(const std::string& c) { return c == "pi-u" || c == "zd-op"; }
bool is_zd(const std::string& c) {
  return c == "zd-op" || c == "zd-log" || c == "zd-branch" || c == "zd-compare";
}

// ---------------------------------------------------------------- parsing

struct Parser {
  std::string_view text;
  std::vector<Diagnostic> diags;

  void error(const std::string& field, const std::string& msg, ErrorKind k = ErrorKind::Validation) {
    diags.push_back({Diagnostic::Severity::Error, k, field, msg, line_of_key(text, leaf(field))});
  }
  void warn(const std::string& field, const std::string& msg) {
    diags.push_back({Diagnostic::Severity::Warning, ErrorKind::Validation, field, msg,
                     line_of_key(text, leaf(field))});
  }
  static std::string leaf(const std::string& field) {
    auto s = field.substr(field.find_last_of('.') + 1);
    return s.substr(0, s.find('['));
  }

  std::optional<double> number(const json& v, const std::string& field) {
    if (!v.is_number()) {
      error(field, "expected a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      error(field, "must be finite");
      return std::nullopt;
    }
    return d;
  }
  std::optional<int> integer(const json& v, const std::string& field) {
    if (!v.is_number_integer()) {
      error(field, "expected an integer");
      return std::nullopt;
    }
    return v.get<int>();
  }
  /// A number or a list of numbers.
  std::vector<double> numbers(const json& v, const std::string& field) {
    std::vector<double> out;
    if (v.is_array()) {
      for (std::size_t k = 0; k < v.size(); ++k)
        if (auto d = number(v[k], field + "[" + std::to_string(k) + "]")) out.push_back(*d);
    } else if (auto d = number(v, field)) {
      out.push_back(*d);
    }
    return out;
  }
  std::vector<int> integers(const json& v, const std::string& field) {
    std::vector<int> out;
    if (!v.is_array()) {
      error(field, "expected a list of integers");
      return out;
    }
    for (std::size_t k = 0; k < v.size(); ++k)
      if (auto d = integer(v[k], field + "[" + std::to_string(k) + "]")) out.push_back(*d);
    return out;
  }
};

std::vector<double> read_xu_csv(const fs::path& path, std::vector<double>& u) {
  std::ifstream is(path);
  if (!is) throw ValidationError("custom_sampled: cannot open " + path.string());
  std::vector<double> x;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double a, b;
    if (!(ls >> a >> b)) continue;  // header row
    x.push_back(a);
    u.push_back(b);
  }
  return x;
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return 2;
    case ErrorKind::RegimeRefusal: return 3;
    case ErrorKind::Numerical: return 4;
  }
  return 4;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"pi-u",   "zd-op",    "zd-log",    "zd-branch",
                                              "zd-compare", "bo-solve", "eps-sweep", "identity-suite"};
  return names;
}

const std::vector<std::string>& FamilyRegistry::names() {
  static const std::vector<std::string> n{"gaussian",    "lorentzian",     "sech2", "rational",
                                          "spike_train", "custom_sampled", "zero"};
  return n;
}

std::vector<std::string> FamilyRegistry::parameters(const std::string& f) {
  if (f == "gaussian") return {"a", "sigma", "center"};
  if (f == "lorentzian") return {"a"};
  if (f == "sech2") return {"a", "w"};
  if (f == "rational") return {"terms"};
  if (f == "spike_train") return {"base", "decay", "exponent", "count"};
  if (f == "custom_sampled") return {"path", "x", "u"};
  return {};
}

RealLineFunction FamilyRegistry::make(const json& spec, const fs::path& base_dir) {
  if (!spec.is_object() || !spec.contains("family") || !spec["family"].is_string())
    throw ValidationError("initial_data must be an object with a string \"family\"");
  const auto name = spec["family"].get<std::string>();
  auto num = [&](const char* key, double dflt) {
    if (!spec.contains(key)) return dflt;
    if (!spec[key].is_number()) throw ValidationError(std::string("initial_data.") + key + ": expected a number");
    return spec[key].get<double>();
  };
  if (name == "gaussian") return families::gaussian(num("a", 1.0), num("sigma", 1.0), num("center", 0.0));
  if (name == "lorentzian") return families::lorentzian(num("a", 1.0));
  if (name == "sech2") return families::sech2(num("a", 1.0), num("w", 1.0));
  if (name == "rational") {
    if (!spec.contains("terms") || !spec["terms"].is_array() || spec["terms"].empty())
      throw ValidationError("initial_data.terms: expected a non-empty list of {a, c, w}");
    std::vector<families::LorentzTerm> terms;
    for (const auto& t : spec["terms"]) {
      if (!t.is_object()) throw ValidationError("initial_data.terms: entries must be objects");
      terms.push_back({t.value("a", 1.0), t.value("c", 0.0), t.value("w", 1.0)});
    }
    return families::rational(terms);
  }
  if (name == "spike_train") {
    const double count = num("count", 3.0);
    if (count != std::floor(count)) throw ValidationError("initial_data.count: expected an integer");
    return families::spike_train(num("base", 1.0), num("decay", 1.0), num("exponent", 0.5), int(count));
  }
  if (name == "custom_sampled") {
    std::vector<double> x, u;
    if (spec.contains("path")) {
      fs::path p = spec["path"].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      x = read_xu_csv(p, u);
    } else if (spec.contains("x") && spec.contains("u")) {
      x = spec["x"].get<std::vector<double>>();
      u = spec["u"].get<std::vector<double>>();
    } else {
      throw ValidationError("initial_data: custom_sampled needs \"path\" or \"x\" and \"u\"");
    }
    return families::custom_sampled(std::move(x), std::move(u));
  }
  if (name == "zero") return families::zero();
  std::string known;
  for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("initial_data.family: unknown family \"" + name + "\" (known: " + known + ")");
}

std::string Diagnostic::str() const {
  std::ostringstream os;
  os << (severity == Severity::Error ? "error" : "warning");
  if (line > 0) os << " (line " << line << ")";
  if (!field.empty()) os << " [" << field << "]";
  os << ": " << message;
  return os.str();
}

bool LoadResult::ok() const {
  return config && std::none_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) {
           return d.severity == Diagnostic::Severity::Error;
         });
}

LoadResult parse_config(std::string_view text, std::string_view command, const fs::path& base_dir) {
  LoadResult res;
  Parser p{text, {}};
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + int(std::count(text.begin(), text.begin() + std::ptrdiff_t(byte), '\n'));
    res.diagnostics.push_back({Diagnostic::Severity::Error, ErrorKind::Validation, "",
                               std::string("malformed JSON: ") + e.what(), line});
    return res;
  }
  if (!doc.is_object()) {
    p.error("", "config must be a JSON object");
    res.diagnostics = p.diags;
    return res;
  }
  ExperimentConfig c;
  c.raw = doc;
  c.text = std::string(text);
  c.base_dir = base_dir;

  std::string cmd(command);
  if (doc.contains("command")) {
    if (!doc["command"].is_string()) {
      p.error("command", "expected a string");
    } else {
      const auto dc = doc["command"].get<std::string>();
      if (!cmd.empty() && dc != cmd)
        p.error("command", "config says \"" + dc + "\" but \"" + cmd + "\" was requested");
      if (cmd.empty()) cmd = dc;
    }
  }
  if (cmd.empty()) p.error("command", "no command given");
  else if (std::find(command_names().begin(), command_names().end(), cmd) == command_names().end())
    p.error("command", "unknown command \"" + cmd + "\"");
  c.command = cmd;

  static const std::set<std::string> known{"command", "initial_data", "t",        "z_points",
                                           "x_points", "eps",         "numerics", "identity",
                                           "output_dir", "seed",      "threads"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!known.count(it.key())) p.warn(it.key(), "unknown key ignored");

  if (doc.contains("initial_data")) {
    c.initial_data = doc["initial_data"];
    try {
      c.u0 = FamilyRegistry::make(c.initial_data, base_dir);
      const auto fam = c.initial_data["family"].get<std::string>();
      const auto params = FamilyRegistry::parameters(fam);
      for (auto it = c.initial_data.begin(); it != c.initial_data.end(); ++it)
        if (it.key() != "family" && std::find(params.begin(), params.end(), it.key()) == params.end())
          p.warn("initial_data." + it.key(), "unknown parameter for " + fam + " ignored");
    } catch (const Error& e) {
      p.error("initial_data", e.what());
    } catch (const json::exception& e) {
      p.error("initial_data", std::string("bad parameter: ") + e.what());
    }
  } else if (c.command != "identity-suite") {
    p.error("initial_data", "required");
  }

  if (doc.contains("t")) c.t = p.numbers(doc["t"], "t");
  if (doc.contains("eps")) c.eps = p.numbers(doc["eps"], "eps");

  if (doc.contains("z_points")) {
    const auto& zs = doc["z_points"];
    if (!zs.is_array()) {
      p.error("z_points", "expected a list of [re, im] pairs");
    } else {
      for (std::size_t k = 0; k < zs.size(); ++k) {
        const auto f = "z_points[" + std::to_string(k) + "]";
        const auto& z = zs[k];
        json re, im;
        if (z.is_array() && z.size() == 2) {
          re = z[0];
          im = z[1];
        } else if (z.is_object() && z.contains("re") && z.contains("im")) {
          re = z["re"];
          im = z["im"];
        } else {
          p.error(f, "expected [re, im] or {\"re\": .., \"im\": ..}");
          continue;
        }
        auto a = p.number(re, f), b = p.number(im, f);
        if (a && b) c.z_points.emplace_back(*a, *b);
      }
    }
  }

  if (doc.contains("x_points")) {
    const auto& xs = doc["x_points"];
    if (xs.is_object()) {
      auto from = xs.contains("from") ? p.number(xs["from"], "x_points.from") : std::nullopt;
      auto to = xs.contains("to") ? p.number(xs["to"], "x_points.to") : std::nullopt;
      auto count = xs.contains("count") ? p.integer(xs["count"], "x_points.count") : std::nullopt;
      const int cnt = count.value_or(0);
      if (!from || !to || !count) p.error("x_points", "range form needs from, to and count");
      else if (cnt < 2 || cnt > 100000) p.error("x_points.count", "must lie in 2..100000");
      else c.x_points = quad::linspace(*from, *to, cnt);
    } else {
      c.x_points = p.numbers(xs, "x_points");
    }
  }

  if (doc.contains("numerics")) {
    const auto& n = doc["numerics"];
    if (!n.is_object()) {
      p.error("numerics", "expected an object");
    } else {
      auto& nc = c.numerics;
      for (auto it = n.begin(); it != n.end(); ++it) {
        const auto key = it.key();
        const auto f = "numerics." + key;
        const auto& v = it.value();
        if (key == "xi_max") nc.xi_max = p.number(v, f);
        else if (key == "m") nc.m = p.integer(v, f).value_or(nc.m);
        else if (key == "window") nc.window = p.number(v, f).value_or(nc.window);
        else if (key == "order") nc.order = p.integer(v, f).value_or(nc.order);
        else if (key == "dt") nc.dt = p.number(v, f).value_or(nc.dt);
        else if (key == "n_modes") nc.n_modes = p.integer(v, f).value_or(nc.n_modes);
        else if (key == "L") nc.L = p.number(v, f);
        else if (key == "n_max") nc.n_max = p.integer(v, f).value_or(nc.n_max);
        else if (key == "integrator") {
          const auto s = v.is_string() ? v.get<std::string>() : "";
          if (s == "etdrk4") nc.integrator = Integrator::ETDRK4;
          else if (s == "strang") nc.integrator = Integrator::Strang;
          else p.error(f, "expected \"etdrk4\" or \"strang\"");
        } else if (key == "tolerances") {
          if (!v.is_object()) {
            p.error(f, "expected an object");
            continue;
          }
          auto& t = nc.tol;
          const std::pair<const char*, double*> fields[] = {
              {"quadrature", &t.quadrature}, {"consistency", &t.consistency}, {"tail", &t.tail},
              {"window", &t.window},         {"solve", &t.solve},             {"cross_pde", &t.cross_pde},
              {"cross_formula", &t.cross_formula}, {"root", &t.root},       {"simple", &t.simple},
              {"recon", &t.recon},           {"crit_scale", &t.crit_scale}};
          for (auto jt = v.begin(); jt != v.end(); ++jt) {
            bool hit = false;
            for (const auto& [name, ptr] : fields)
              if (jt.key() == name) {
                hit = true;
                if (auto d = p.number(jt.value(), f + "." + name)) {
                  if (*d <= 0.0) p.error(f + "." + name, "must be > 0");
                  else *ptr = *d;
                }
              }
            if (!hit) p.warn(f + "." + jt.key(), "unknown tolerance ignored");
          }
        } else {
          p.warn(f, "unknown numerics key ignored");
        }
      }
    }
  }

  if (doc.contains("identity")) {
    const auto& id = doc["identity"];
    if (!id.is_object()) {
      p.error("identity", "expected an object");
    } else {
      auto& ic = c.identity;
      if (id.contains("lemma_n")) ic.lemma_n = p.integers(id["lemma_n"], "identity.lemma_n");
      if (id.contains("region_n")) ic.region_n = p.integers(id["region_n"], "identity.region_n");
      if (id.contains("toeplitz_n")) ic.toeplitz_n = p.integers(id["toeplitz_n"], "identity.toeplitz_n");
      if (id.contains("qmc_n")) ic.qmc_n = p.integers(id["qmc_n"], "identity.qmc_n");
      if (id.contains("include_complex")) {
        if (id["include_complex"].is_boolean()) ic.include_complex = id["include_complex"].get<bool>();
        else p.error("identity.include_complex", "expected true or false");
      }
    }
  }

  if (doc.contains("output_dir")) {
    if (doc["output_dir"].is_string()) c.output_dir = doc["output_dir"].get<std::string>();
    else p.error("output_dir", "expected a string");
  }
  if (doc.contains("seed")) {
    if (doc["seed"].is_number_unsigned()) c.seed = doc["seed"].get<std::uint64_t>();
    else p.error("seed", "expected a non-negative integer");
  }
  if (doc.contains("threads")) c.threads = p.integer(doc["threads"], "threads").value_or(1);

  res.diagnostics = std::move(p.diags);
  res.config = std::move(c);
  return res;
}

LoadResult load_config(const fs::path& path, std::string_view command) {
  std::ifstream is(path);
  if (!is) {
    LoadResult r;
    r.diagnostics.push_back({Diagnostic::Severity::Error, ErrorKind::Validation, "",
                             "cannot read config file " + path.string(), 0});
    return r;
  }
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), command, path.parent_path());
}

std::vector<Diagnostic> validate(const ExperimentConfig& c) {
  Parser p{c.text, {}};
  const auto& cmd = c.command;
  const auto& n = c.numerics;

  if (std::find(command_names().begin(), command_names().end(), cmd) == command_names().end())
    p.error("command", "unknown command \"" + cmd + "\"");
  if (cmd != "identity-suite" && !c.u0) p.error("initial_data", "required");

  const bool needs_t = cmd != "identity-suite";
  if (needs_t && c.t.empty()) p.error("t", "required");
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const auto f = "t[" + std::to_string(k) + "]";
    if (!std::isfinite(c.t[k])) p.error(f, "must be finite");
    if (cmd == "zd-log" && c.t[k] == 0.0)
      p.error(f, "t = 0 is excluded for the log integral; the value is Pi u0(z)");
    if ((cmd == "bo-solve" || cmd == "eps-sweep") && c.t[k] < 0.0) p.error(f, "must be >= 0");
  }
  if (cmd == "eps-sweep" && c.t.size() > 1) p.warn("t", "eps-sweep uses the first time only");

  if (cmd == "pi-u" || cmd == "zd-op" || cmd == "zd-log") {
    if (c.z_points.empty()) p.error("z_points", "required");
    for (std::size_t k = 0; k < c.z_points.size(); ++k)
      if (!(c.z_points[k].imag() > 0.0))
        p.error("z_points[" + std::to_string(k) + "]", "Im z must be > 0");
  }
  if (cmd == "zd-branch" || cmd == "zd-compare") {
    if (c.x_points.empty()) p.error("x_points", "required");
  }

  if (cmd == "bo-solve" && c.eps.size() != 1) p.error("eps", "bo-solve takes exactly one eps");
  if (cmd == "eps-sweep") {
    if (c.eps.size() == 1) p.error("eps", "eps-sweep needs at least two values");
    for (std::size_t k = 1; k < c.eps.size(); ++k)
      if (!(c.eps[k] < c.eps[k - 1])) {
        p.warn("eps", "values are not strictly decreasing; monotonicity is judged in list order");
        break;
      }
  }
  for (std::size_t k = 0; k < c.eps.size(); ++k)
    if (!(c.eps[k] > 0.0)) p.error("eps[" + std::to_string(k) + "]", "must be > 0");

  if (uses_formula_grid(cmd)) {
    if (n.m < FrequencyGrid::kMinNodes || n.m > 8192) p.error("numerics.m", "must lie in 64..8192");
    else if (48.0 * double(n.m) * double(n.m) > FormulaNumerics{}.memory_cap_bytes)
      p.error("numerics.m", "dense storage above the 3 GiB cap");
    else if (n.m > 4096)
      p.warn("numerics.m", "dense solves above m = 4096 are slow");
    if (n.xi_max && !(*n.xi_max > 0.0)) p.error("numerics.xi_max", "must be > 0");
    if (n.order < 1 || n.order > 10) p.error("numerics.order", "must lie in 1..10");
    if (!(n.window > 0.0)) p.error("numerics.window", "must be > 0");
    if (n.n_max < 0 || n.n_max > 200) p.error("numerics.n_max", "must lie in 0..200");
  }
  if (cmd == "bo-solve" || cmd == "eps-sweep") {
    if (!(n.dt > 0.0 && n.dt <= 0.1)) p.error("numerics.dt", "must lie in (0, 0.1]");
    if (!is_pow2(n.n_modes) || n.n_modes < 16 || n.n_modes > (1 << 20))
      p.error("numerics.n_modes", "must be a power of two in 16..2^20");
    if (n.L && !(*n.L > 0.0)) p.error("numerics.L", "must be > 0");
  }
  if (c.threads < 1 || c.threads > 256) p.error("threads", "must lie in 1..256");

  if (cmd == "identity-suite") {
    for (int v : c.identity.lemma_n)
      if (v < 1 || v > 3) p.error("identity.lemma_n", "tensor checks need 1 <= n <= 3");
    for (int v : c.identity.region_n)
      if (v < 1 || v > 3) p.error("identity.region_n", "region checks need 1 <= n <= 3");
    for (int v : c.identity.toeplitz_n)
      if (v < 2 || v > 6) p.error("identity.toeplitz_n", "toeplitz checks need 2 <= n <= 6");
    for (int v : c.identity.qmc_n)
      if (v < 1 || v > 6) p.error("identity.qmc_n", "Monte Carlo checks need n <= 6");
  }

  // Output directory: the nearest existing ancestor must be a writable directory.
  {
    fs::path d = fs::absolute(c.output_dir.empty() ? fs::path(".") : fs::path(c.output_dir));
    std::error_code ec;
    if (fs::exists(d, ec) && !fs::is_directory(d, ec)) {
      p.error("output_dir", "exists and is not a directory");
    } else {
      while (!d.empty() && !fs::exists(d, ec) && d != d.root_path()) d = d.parent_path();
      if (!fs::is_directory(d, ec) || ::access(d.c_str(), W_OK) != 0)
        p.error("output_dir", "not writable: " + d.string());
    }
  }

  if (c.u0) {
    const auto& u0 = *c.u0;
    if (cmd == "zd-branch" && !u0.is_zero() && !u0.traits().c1_with_decay)
      p.error("initial_data", "branch formula requires C1 data with decay; " +
                                  u0.traits().description + " is not C1",
              ErrorKind::RegimeRefusal);
    if (cmd == "zd-compare" && !u0.is_zero() && !u0.traits().c1_with_decay)
      p.warn("initial_data", "data is not C1; the branch column is left empty");
    if (is_zd(cmd) && u0.growth() == GrowthClass::Linear) {
      const double C = u0.growth_constant(n.window);
      for (std::size_t k = 0; k < c.t.size(); ++k)
        if (!(2.0 * std::abs(c.t[k]) * C < 1.0)) {
          std::ostringstream os;
          os << "linear-growth data with C = " << C << ": 2|t|C = " << 2.0 * std::abs(c.t[k]) * C
             << " >= 1; the zero-dispersion formula is only established for |t| < 1/(2C) = "
             << 0.5 / C;
          p.error("t[" + std::to_string(k) + "]", os.str(), ErrorKind::RegimeRefusal);
        }
    }
    if ((cmd == "bo-solve" || cmd == "eps-sweep") && u0.growth() != GrowthClass::Bounded)
      p.warn("initial_data", "unbounded data on a periodic box; the edge check decides");
  }
  return p.diags;
}

std::string config_hash(const ExperimentConfig& c) {
  json canon = c.raw.is_object() ? c.raw : json::object();
  canon.erase("output_dir");
  canon.erase("threads");
  canon["command"] = c.command;
  canon["seed"] = c.seed;
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canon.dump());
  return os.str();
}

// ------------------------------------------------------------------ running

namespace {

struct Emitter {
  const ExperimentConfig& cfg;
  fs::path dir;
  std::string hash;
  std::vector<std::pair<std::string, std::string>> grid;
  std::vector<fs::path> artifacts;
  std::mutex mu;

  std::string header() const {
    std::ostringstream os;
    const auto& t = cfg.numerics.tol;
    os << "# bo-zdl " << kVersion << " command=" << cfg.command << '\n';
    os << "# config_hash=" << hash << " seed=" << cfg.seed << '\n';
    if (cfg.u0) os << "# initial_data=" << cfg.u0->traits().description << '\n';
    os << "# tolerances: quadrature=" << fmt(t.quadrature) << " consistency=" << fmt(t.consistency)
       << " tail=" << fmt(t.tail) << " window=" << fmt(t.window) << " solve=" << fmt(t.solve)
       << " cross_pde=" << fmt(t.cross_pde) << " cross_formula=" << fmt(t.cross_formula)
       << " root=" << fmt(t.root) << " simple=" << fmt(t.simple) << " recon=" << fmt(t.recon)
       << " crit_scale=" << fmt(t.crit_scale) << '\n';
    os << "# grid:";
    for (const auto& [k, v] : grid) os << ' ' << k << '=' << v;
    os << '\n';
    return os.str();
  }

  ojson provenance() const {
    ojson p;
    p["tool"] = std::string("bo-zdl ") + kVersion;
    p["command"] = cfg.command;
    p["config_hash"] = hash;
    p["seed"] = cfg.seed;
    if (cfg.u0) p["initial_data"] = cfg.u0->traits().description;
    const auto& t = cfg.numerics.tol;
    p["tolerances"] = {{"quadrature", t.quadrature}, {"consistency", t.consistency},
                       {"tail", t.tail},             {"window", t.window},
                       {"solve", t.solve},           {"cross_pde", t.cross_pde},
                       {"cross_formula", t.cross_formula}, {"root", t.root},
                       {"simple", t.simple},         {"recon", t.recon},
                       {"crit_scale", t.crit_scale}};
    ojson g = ojson::object();
    for (const auto& [k, v] : grid) g[k] = v;
    p["grid"] = g;
    return p;
  }

  void write(const std::string& name, const std::string& body) {
    std::lock_guard<std::mutex> lock(mu);
    const auto path = dir / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + path.string());
    os << body;
    artifacts.push_back(path);
  }
  void table(const std::string& name, const std::string& extra_header, const std::string& csv) {
    write(name, header() + extra_header + csv);
  }
  void json_file(const std::string& name, ojson body) {
    ojson doc;
    doc["provenance"] = provenance();
    for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
    write(name, doc.dump(2) + "\n");
  }
  void plot(const std::string& csv, const std::string& kind) {
    std::ostringstream os;
    os << "# Plot script for " << csv << "; run with python3 to write "
       << fs::path(csv).replace_extension(".png").string() << "\n"
       << "import os\nimport numpy as np\nimport matplotlib\nmatplotlib.use('Agg')\n"
       << "import matplotlib.pyplot as plt\n\n"
       << "here = os.path.dirname(os.path.abspath(__file__))\n"
       << "d = np.genfromtxt(os.path.join(here, '" << csv
       << "'), delimiter=',', names=True, comments='#', dtype=None, encoding='utf-8')\n"
       << "fig, ax = plt.subplots(figsize=(7, 4))\n";
    if (kind == "formula") {
      os << "k = np.arange(len(np.atleast_1d(d['re_val'])))\n"
         << "ax.plot(k, d['re_val'], 'o-', label='Re')\nax.plot(k, d['im_val'], 's-', label='Im')\n"
         << "ax.set_xlabel('z index')\n";
    } else if (kind == "profile") {
      os << "ax.plot(d['x'], d['zd_boundary'], '-', label='boundary reconstruction')\n"
         << "ax.plot(d['x'], d['zd_branch'], '.', label='branch sum')\nax.set_xlabel('x')\n";
    } else if (kind == "snapshot") {
      os << "ax.plot(d['x'], d['u'], '-')\nax.set_xlabel('x')\nax.set_ylabel('u')\n";
    } else if (kind == "sweep") {
      os << "for p in np.unique(d['phi_index']):\n"
         << "    s = d['phi_index'] == p\n"
         << "    ax.loglog(d['eps'][s], d['error'][s], 'o-', label='phi %d' % p)\n"
         << "ax.set_xlabel('eps')\nax.set_ylabel('pairing error')\n";
    }
    os << "ax.legend() if ax.get_legend_handles_labels()[0] else None\n"
       << "fig.tight_layout()\nfig.savefig(os.path.join(here, '"
       << fs::path(csv).replace_extension(".png").string() << "'), dpi=120)\n";
    write("plot_" + fs::path(csv).stem().string() + ".py", os.str());
  }
};

FormulaNumerics formula_numerics(const ExperimentConfig& c) {
  FormulaNumerics num;
  num.m = c.numerics.m;
  num.window = c.numerics.window;
  num.order = c.numerics.order;
  num.tol = c.numerics.tol;
  num.xi_max = c.numerics.xi_max ? *c.numerics.xi_max : suggest_xi_max(*c.u0);
  return num;
}

std::string t_suffix(std::size_t k) { return "_t" + std::to_string(k); }

void run_formula(const ExperimentConfig& c, Emitter& em, std::ostream* log) {
  const auto& u0 = *c.u0;
  std::optional<FormulaContext> ctx;
  if (uses_formula_grid(c.command)) {
    const auto num = formula_numerics(c);
    em.grid = {{"xi_max", fmt(num.xi_max)}, {"m", std::to_string(num.m)},
               {"window", fmt(num.window)}, {"order", std::to_string(num.order)}};
    ctx.emplace(u0, num);
  } else {
    em.grid = {{"quadrature", "adaptive-gk15"}};
  }
  const std::string stem = c.command == "pi-u" ? "pi_u" : c.command == "zd-op" ? "zd_op" : "zd_log";
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const double t = c.t[k];
    if (log) *log << c.command << ": t = " << t << ", " << c.z_points.size() << " points\n";
    std::vector<FormulaValue> rows(c.z_points.size());
    parallel_for(rows.size(), c.threads, [&](std::size_t i) {
      const UpperHalfPoint z(c.z_points[i]);
      if (c.command == "pi-u") {
        rows[i] = pi_u_explicit(*ctx, t, z);
      } else if (c.command == "zd-op") {
        rows[i] = zd_operator(*ctx, t, z);
      } else {
        const auto r = zd_log_integral(u0, t, z);
        rows[i] = {z.value(), r.value, r.error, 0.0, r.method};
      }
    });
    std::ostringstream csv;
    write_formula_csv(csv, rows);
    const auto name = stem + t_suffix(k) + ".csv";
    em.table(name, "# t=" + fmt(t) + "\n", csv.str());
    em.plot(name, "formula");

    if (c.command == "zd-op" && c.numerics.n_max > 0) {
      std::vector<std::string> lines(c.z_points.size());
      parallel_for(lines.size(), c.threads, [&](std::size_t i) {
        const UpperHalfPoint z(c.z_points[i]);
        std::ostringstream os;
        os << std::setprecision(17) << z.real() << ',' << z.imag() << ',';
        try {
          const auto r = neumann_zd(*ctx, t, z, c.numerics.n_max);
          os << r.value.real() << ',' << r.value.imag() << ',' << r.contraction << ','
             << r.observed_ratio << ",ok";
        } catch (const RegimeRefusal&) {
          os << "nan,nan," << 2.0 * std::abs(t) * sup_fz(u0, z) << ",nan,refused";
        }
        lines[i] = os.str();
      });
      std::string body = "re_z,im_z,re_val,im_val,contraction,observed_ratio,flag\n";
      for (const auto& l : lines) body += l + "\n";
      em.table("zd_neumann" + t_suffix(k) + ".csv",
               "# t=" + fmt(t) + " n_max=" + std::to_string(c.numerics.n_max) + "\n", body);
    }
  }
}

void run_profile(const ExperimentConfig& c, Emitter& em, std::ostream* log) {
  const auto& u0 = *c.u0;
  const auto& tol = c.numerics.tol;
  const bool compare = c.command == "zd-compare";
  const bool c1 = u0.is_zero() || u0.traits().c1_with_decay;
  const auto deltas = default_delta_schedule();
  em.grid = {{"n_x", std::to_string(c.x_points.size())},
             {"delta_max", fmt(deltas.front())},
             {"delta_min", fmt(deltas.back())},
             {"richardson_order", "2"}};
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const double t = c.t[k];
    if (log) *log << c.command << ": t = " << t << ", " << c.x_points.size() << " x samples\n";
    std::optional<CriticalSet> K;
    if (c1) K = critical_values(u0, t, tol);
    std::vector<ProfileRow> rows(c.x_points.size());
    parallel_for(rows.size(), c.threads, [&](std::size_t i) {
      ProfileRow& r = rows[i];
      r.x = c.x_points[i];
      r.zd_branch = std::nan("");
      r.zd_boundary = std::nan("");
      std::string flag;
      if (!c1) {
        flag = "no-branch";
      } else if (K->contains(r.x)) {
        flag = "critical";
      } else {
        try {
          const auto b = branch_roots(u0, t, r.x, tol);
          r.n_branches = int(b.roots.size());
          double s = 0.0;
          for (std::size_t q = 0; q < b.roots.size(); ++q) s += (q % 2 ? -1.0 : 1.0) * u0(b.roots[q]);
          r.zd_branch = s;
          flag = "ok";
        } catch (const NumericalFailure&) {
          flag = "near-critical";
        }
      }
      if (compare) {
        const auto v = zd_real_line(u0, t, r.x, deltas, 2);
        r.zd_boundary = v.value;
        if (v.warning) flag += "+richardson-warning";
      }
      r.flag = flag;
    });
    std::ostringstream csv;
    write_profile_csv(csv, rows);
    const auto stem = (compare ? "zd_compare" : "zd_branch") + t_suffix(k);
    em.table(stem + ".csv", "# t=" + fmt(t) + "\n", csv.str());
    em.plot(stem + ".csv", "profile");
    ojson body;
    body["t"] = t;
    body["critical_set"] = K ? ojson::parse(critical_set_json(*K)) : ojson(nullptr);
    if (!c1) body["note"] = "data is not C1; no critical set or branch values";
    em.json_file("critical_set" + t_suffix(k) + ".json", std::move(body));
  }
}

StepperConfig stepper_config(const ExperimentConfig& c) {
  StepperConfig s;
  s.dt = c.numerics.dt;
  s.integrator = c.numerics.integrator;
  return s;
}

void run_solve(const ExperimentConfig& c, Emitter& em, std::ostream* log) {
  const Box box{c.numerics.L.value_or(40.0), c.numerics.n_modes};
  const auto cfg = stepper_config(c);
  const double eps = c.eps.at(0);
  em.grid = {{"L", fmt(box.half_width)},
             {"n_modes", std::to_string(box.n_modes)},
             {"dt", fmt(cfg.dt)},
             {"integrator", cfg.integrator == Integrator::ETDRK4 ? "etdrk4" : "strang"},
             {"dealias", fmt(cfg.dealias)}};
  auto times = c.t;
  std::sort(times.begin(), times.end());
  auto state = initial_state(*c.u0, eps, box);
  const double l2_0 = l2_norm_sq(state);
  ojson summary = ojson::array();
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (log) *log << "bo-solve: advancing to t = " << times[k] << '\n';
    const auto rep = solve_to(state, times[k], cfg);
    state = rep.state;
    std::ostringstream csv;
    write_snapshot_csv(csv, state, cfg.dt);
    const auto name = "snapshot" + t_suffix(k) + ".csv";
    em.table(name, "", csv.str());
    em.plot(name, "snapshot");
    const double l2 = l2_norm_sq(state);
    const double drift = l2_0 > 0.0 ? std::abs(l2 - l2_0) / l2_0 : 0.0;
    summary.push_back({{"t", times[k]},
                       {"l2_sq", l2},
                       {"relative_drift", drift},
                       {"drift_per_unit_time", times[k] > 0.0 ? drift / times[k] : 0.0},
                       {"edge_max", rep.edge_max},
                       {"max_cfl", rep.max_cfl}});
  }
  ojson body;
  body["eps"] = eps;
  body["l2_sq_initial"] = l2_0;
  body["snapshots"] = summary;
  em.json_file("bo_solve.json", std::move(body));
}

void run_sweep(const ExperimentConfig& c, Emitter& em, std::ostream* log) {
  SweepOptions opt;
  opt.box = Box{c.numerics.L.value_or(20.0), c.numerics.n_modes};
  opt.stepper = stepper_config(c);
  opt.threads = c.threads;
  const auto eps = c.eps.empty() ? std::vector<double>{0.4, 0.2, 0.1, 0.05} : c.eps;
  const double t = c.t.at(0);
  em.grid = {{"L", fmt(opt.box.half_width)},
             {"n_modes", std::to_string(opt.box.n_modes)},
             {"dt", fmt(opt.stepper.dt)},
             {"reference_window", fmt(opt.reference_window)},
             {"reference_tol", fmt(opt.reference_tol)}};
  if (log) *log << "eps-sweep: t = " << t << ", " << eps.size() << " eps values\n";
  const auto phis = default_test_functions();
  const auto rows = eps_sweep(*c.u0, t, eps, phis, opt);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  em.table("eps_sweep.csv", "# t=" + fmt(t) + "\n", csv.str());
  em.plot("eps_sweep.csv", "sweep");

  ojson per_phi = ojson::array();
  bool all = true;
  for (std::size_t p = 0; p < phis.size(); ++p) {
    std::vector<double> err;
    for (double e : eps)
      for (const auto& r : rows)
        if (r.phi_index == int(p) && r.eps == e) err.push_back(r.error);
    bool dec = true;
    for (std::size_t k = 1; k < err.size(); ++k) dec = dec && err[k] < err[k - 1];
    const double ratio = err.front() > 0.0 ? err.back() / err.front() : 0.0;
    const bool pass = dec && ratio <= 0.25;
    all = all && pass;
    per_phi.push_back({{"phi_index", p},
                       {"phi", phis[p].traits().description},
                       {"errors", err},
                       {"strictly_decreasing", dec},
                       {"last_over_first", ratio},
                       {"pass", pass}});
  }
  ojson body;
  body["t"] = t;
  body["eps"] = eps;
  body["test_functions"] = per_phi;
  body["weak_convergence_pass"] = all;
  em.json_file("eps_sweep_summary.json", std::move(body));
}

void run_identity(const ExperimentConfig& c, Emitter& em, std::ostream* log) {
  identity::SuiteOptions opt;
  opt.lemma_n = c.identity.lemma_n;
  opt.region_n = c.identity.region_n;
  opt.toeplitz_n = c.identity.toeplitz_n;
  opt.qmc_n = c.identity.qmc_n;
  opt.include_complex = c.identity.include_complex;
  opt.threads = c.threads;
  opt.check.seed = c.seed;
  em.grid = {{"qmc_points", std::to_string(opt.check.qmc_points)},
             {"qmc_replicates", std::to_string(opt.check.qmc_replicates)},
             {"toeplitz_m", std::to_string(opt.toeplitz.m)},
             {"toeplitz_order", std::to_string(opt.toeplitz.order)}};
  if (log) *log << "identity-suite: running\n";
  const auto recs = identity::run_suite(opt);
  int pass = 0, fail = 0, inconclusive = 0;
  for (const auto& r : recs) {
    if (r.status == identity::Status::Pass) ++pass;
    else if (r.status == identity::Status::Fail) ++fail;
    else ++inconclusive;
  }
  ojson body;
  body["summary"] = {{"pass", pass}, {"fail", fail}, {"inconclusive", inconclusive}};
  body["records"] = ojson::parse(identity::report_json(recs));
  em.json_file("identity_report.json", std::move(body));
}

}  // namespace

RunResult run(const ExperimentConfig& c, std::ostream* log) {
  RunResult res;
  const auto diags = validate(c);
  bool validation = false, regime = false;
  std::string msg;
  for (const auto& d : diags) {
    if (log && d.severity == Diagnostic::Severity::Warning) *log << d.str() << '\n';
    if (d.severity != Diagnostic::Severity::Error) continue;
    (d.kind == ErrorKind::RegimeRefusal ? regime : validation) = true;
    msg += d.str() + "\n";
  }
  if (validation || regime) {
    res.exit_code = validation ? 2 : 3;
    res.message = msg;
    return res;
  }
  try {
    Emitter em{c, fs::path(c.output_dir), config_hash(c), {}, {}, {}};
    fs::create_directories(em.dir);
    const auto& cmd = c.command;
    if (cmd == "pi-u" || cmd == "zd-op" || cmd == "zd-log") run_formula(c, em, log);
    else if (cmd == "zd-branch" || cmd == "zd-compare") run_profile(c, em, log);
    else if (cmd == "bo-solve") run_solve(c, em, log);
    else if (cmd == "eps-sweep") run_sweep(c, em, log);
    else run_identity(c, em, log);
    res.artifacts = em.artifacts;
  } catch (const Error& e) {
    res.exit_code = exit_code(e.kind());
    res.message = e.what();
  } catch (const fs::filesystem_error& e) {
    res.exit_code = 2;
    res.message = e.what();
  }
  return res;
}

}  // namespace bozd::cli
