#include "qtomo/harness.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>

#include "qtomo/analysis.hpp"
#include "qtomo/error.hpp"
#include "qtomo/precision.hpp"
#include "qtomo/reconstruction.hpp"
#include "qtomo/simulation.hpp"

namespace qtomo {

using io::Json;
namespace fs = std::filesystem;

std::string_view version() {
  return QTOMO_VERSION;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& msg) {
  throw ConfigError(msg);
}

/// Reads one JSON object against a fixed key set, collecting the resolved
/// values (defaults included) into `out`.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_ + " must be an object");
  }

  bool has(const std::string& key) {
    allowed_.insert(key);
    return j_.contains(key);
  }

  double number(const std::string& key, std::optional<double> def, double lo = -kInf,
                double hi = kInf, bool open_lo = false) {
    double v = 0.0;
    if (has(key)) {
      const Json& x = j_.at(key);
      if (!x.is_number()) fail(at(key) + " must be a number");
      v = x.get<double>();
    } else if (def) {
      v = *def;
    } else {
      fail(at(key) + " is required");
    }
    if (!std::isfinite(v) || v < lo || v > hi || (open_lo && v == lo))
      fail(at(key) + " is out of range");
    out[key] = v;
    return v;
  }

  long long integer(const std::string& key, std::optional<long long> def, long long lo,
                    long long hi) {
    long long v = 0;
    if (has(key)) {
      const Json& x = j_.at(key);
      if (!x.is_number_integer()) fail(at(key) + " must be an integer");
      v = x.get<long long>();
    } else if (def) {
      v = *def;
    } else {
      fail(at(key) + " is required");
    }
    if (v < lo || v > hi)
      fail(at(key) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out[key] = v;
    return v;
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t def) {
    std::uint64_t v = def;
    if (has(key)) {
      const Json& x = j_.at(key);
      if (!x.is_number_unsigned()) fail(at(key) + " must be a non-negative integer");
      v = x.get<std::uint64_t>();
    }
    out[key] = v;
    return v;
  }

  std::string text(const std::string& key, std::optional<std::string> def,
                   std::initializer_list<const char*> choices = {}) {
    std::string v;
    if (has(key)) {
      const Json& x = j_.at(key);
      if (!x.is_string()) fail(at(key) + " must be a string");
      v = x.get<std::string>();
    } else if (def) {
      v = *def;
    } else {
      fail(at(key) + " is required");
    }
    if (choices.size() > 0) {
      bool ok = false;
      std::string list;
      for (const char* c : choices) {
        ok = ok || v == c;
        list += list.empty() ? c : std::string(", ") + c;
      }
      if (!ok) fail(at(key) + " must be one of: " + list);
    }
    out[key] = v;
    return v;
  }

  bool flag(const std::string& key, bool def) {
    bool v = def;
    if (has(key)) {
      const Json& x = j_.at(key);
      if (!x.is_boolean()) fail(at(key) + " must be true or false");
      v = x.get<bool>();
    }
    out[key] = v;
    return v;
  }

  /// Raw sub-document; the caller validates it and stores the result in out.
  const Json& child(const std::string& key) {
    if (!has(key)) fail(at(key) + " is required");
    return j_.at(key);
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void done() const {
    for (const auto& item : j_.items())
      if (!allowed_.count(item.key())) fail("unknown key " + at(item.key()));
  }

  Json out = Json::object();

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> allowed_;
};

// --- protocol specs -----------------------------------------------------------

/// Either "delta" (rad) or thickness + birefringence + wavelength.
void resolve_delta(Fields& f, const std::string& delta_key, const std::string& thickness_key) {
  const bool by_delta = f.has(delta_key);
  const bool by_thickness = f.has(thickness_key);
  if (by_delta == by_thickness)
    fail(f.at(delta_key) + ": give exactly one of \"" + delta_key + "\" or \"" + thickness_key +
         "\"");
  if (by_delta)
    f.number(delta_key, std::nullopt);
  else
    f.number(thickness_key, std::nullopt, 0.0);
}

Json resolve_protocol(const Json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.text(
      "kind", std::nullopt, {"named", "polyhedron", "b9", "b36", "single_plate", "b144", "file"});
  if (kind == "named") {
    f.text("name", std::nullopt, {"J4", "R4", "J16", "R16", "kosut8"});
  } else if (kind == "polyhedron") {
    f.text("solid", std::nullopt,
           {"tetrahedron", "cube", "octahedron", "dodecahedron", "icosahedron", "fullerene",
            "pentakis_dodecahedron"});
    f.integer("qubits", 1, 1, 6);
  } else if (kind == "b9" || kind == "b36" || kind == "single_plate") {
    resolve_delta(f, "delta", "thickness");
    const bool physical = f.out.contains("thickness");
    if (physical) {
      f.number("birefringence", std::nullopt, 0.0, kInf, true);
      f.number("wavelength", std::nullopt, 0.0, kInf, true);
    }
    if (kind == "single_plate") {
      f.integer("count", std::nullopt, 1, 100000);
      f.number("step_deg", std::nullopt);
      f.number("offset_deg", 0.0);
      f.text("analyzer", "V", {"H", "V"});
    }
  } else if (kind == "b144") {
    resolve_delta(f, "delta1", "h1");
    resolve_delta(f, "delta2", "h2");
    const bool physical = f.out.contains("h1") || f.out.contains("h2");
    if (physical) {
      if (!(f.out.contains("h1") && f.out.contains("h2")))
        fail(path + ": h1 and h2 must be given together");
      f.number("birefringence", std::nullopt, 0.0, kInf, true);
      f.number("wavelength", std::nullopt, 0.0, kInf, true);
    }
    f.flag("synchronized", false);
  } else {
    f.text("path", std::nullopt);
  }
  f.done();
  return f.out;
}

double plate_delta(const Json& spec, const std::string& delta_key, const std::string& thickness_key) {
  if (spec.contains(delta_key)) return spec.at(delta_key).get<double>();
  return WaveplateSpec::from_thickness(spec.at(thickness_key).get<double>(),
                                       spec.at("birefringence").get<double>(),
                                       spec.at("wavelength").get<double>(), 0.0)
      .delta;
}

Protocol protocol_from_resolved(const Json& spec, const fs::path& base) {
  const std::string kind = spec.at("kind");
  if (kind == "named") return named_protocol(spec.at("name"));
  if (kind == "polyhedron")
    return polyhedron_protocol(solid_from_name(spec.at("solid")), spec.at("qubits").get<int>());
  if (kind == "b9") return b9_protocol(plate_delta(spec, "delta", "thickness"));
  if (kind == "b36") return b36_protocol(plate_delta(spec, "delta", "thickness"));
  if (kind == "single_plate") {
    constexpr double deg = std::numbers::pi / 180.0;
    return single_plate_protocol(plate_delta(spec, "delta", "thickness"),
                                 spec.at("count").get<int>(),
                                 spec.at("step_deg").get<double>() * deg,
                                 spec.at("offset_deg").get<double>() * deg,
                                 analyzer_vector(spec.at("analyzer")));
  }
  if (kind == "b144")
    return b144_protocol(plate_delta(spec, "delta1", "h1"), plate_delta(spec, "delta2", "h2"),
                         spec.at("synchronized").get<bool>());
  const fs::path path = base / spec.at("path").get<std::string>();
  Json doc;
  try {
    doc = Json::parse(io::read_text(path));
  } catch (const Json::parse_error& e) {
    fail(path.string() + ": " + e.what());
  }
  try {
    return io::protocol_from_json(doc);
  } catch (const InvalidArgument& e) {
    fail(path.string() + ": " + e.what());
  }
}

// --- state specs --------------------------------------------------------------

Json resolve_state(const Json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.text("kind", std::nullopt, {"named", "pure", "density", "file"});
  if (kind == "named") {
    const std::string name = f.text("name", std::nullopt,
                                    {"ghz", "bell", "white_noise", "ghz_noise", "ququart_family"});
    const bool two_qubit = name == "bell" || name == "ququart_family";
    f.integer("qubits", two_qubit ? 2 : 1, two_qubit ? 2 : 1, two_qubit ? 2 : 10);
    if (name == "ghz_noise") f.number("noise_weight", std::nullopt, 0.0, 1.0);
    if (name == "bell") f.text("bell", "phi_plus", {"phi_plus", "phi_minus", "psi_plus", "psi_minus"});
    if (name == "ququart_family") {
      f.number("c1", std::nullopt);
      f.number("c2", std::nullopt);
      f.number("phase", 0.0);
      f.number("mixture", 0.0, 0.0, 1.0);
    }
  } else if (kind == "pure") {
    for (const char* key : {"re", "im"}) {
      const Json& v = f.child(key);
      if (!v.is_array() || v.empty()) fail(f.at(key) + " must be a non-empty array");
      for (const Json& x : v)
        if (!x.is_number()) fail(f.at(key) + " must hold numbers");
      f.out[key] = v;
    }
    if (f.out["re"].size() != f.out["im"].size()) fail(path + ": re and im lengths differ");
  } else if (kind == "density") {
    f.integer("dim", std::nullopt, 1, 1 << 12);
    f.out["re"] = f.child("re");
    f.out["im"] = f.child("im");
  } else {
    f.text("path", std::nullopt);
  }
  f.done();
  return f.out;
}

DensityMatrix state_from_resolved(const Json& spec, const fs::path& base) {
  const std::string kind = spec.at("kind");
  try {
    if (kind == "named") {
      NamedStateParams params;
      if (spec.contains("noise_weight")) params.noise_weight = spec.at("noise_weight");
      if (spec.contains("bell")) params.bell = spec.at("bell");
      if (spec.contains("c1")) params.c1 = spec.at("c1");
      if (spec.contains("c2")) params.c2 = spec.at("c2");
      if (spec.contains("phase")) params.phase = spec.at("phase");
      if (spec.contains("mixture")) params.mixture = spec.at("mixture");
      return named_state(spec.at("name"), spec.at("qubits").get<int>(), params);
    }
    if (kind == "pure") {
      const auto& re = spec.at("re");
      const auto& im = spec.at("im");
      CVector c(static_cast<Eigen::Index>(re.size()));
      for (std::size_t a = 0; a < re.size(); ++a)
        c(static_cast<Eigen::Index>(a)) = Complex(re[a].get<double>(), im[a].get<double>());
      if (!(c.norm() > 0.0)) fail("state amplitudes vanish");
      return density_from_pure(c / c.norm());
    }
    if (kind == "density") return io::density_from_json(spec);
    const fs::path path = base / spec.at("path").get<std::string>();
    Json doc;
    try {
      doc = Json::parse(io::read_text(path));
    } catch (const Json::parse_error& e) {
      fail(path.string() + ": " + e.what());
    }
    if (doc.contains("rank")) return io::purified_from_json(doc).density();
    return io::density_from_json(doc);
  } catch (const InvalidArgument& e) {
    fail(std::string("state: ") + e.what());
  }
}

// --- other blocks -------------------------------------------------------------

Json resolve_search(const Json& j, std::uint64_t seed) {
  Fields f(j, "search");
  f.integer("restarts", 100, 0, 1000000);
  f.unsigned64("seed", seed);
  f.integer("max_evaluations", 4000, 8, 100000000);
  f.number("intensity_margin", 0.0, 0.0, 0.5);
  f.integer("grid_points", 2000, 0, 10000000);
  f.integer("grid_seeds", 8, 0, 1000);
  f.done();
  return f.out;
}

MaxLossOptions search_options(const Json& s, int threads) {
  MaxLossOptions o;
  o.restarts = s.at("restarts");
  o.seed = s.at("seed");
  o.max_evaluations = s.at("max_evaluations");
  o.intensity_margin = s.at("intensity_margin");
  o.grid_points = s.at("grid_points");
  o.grid_seeds = s.at("grid_seeds");
  o.threads = threads;
  return o;
}

Json resolve_scan(const Json& j) {
  Fields f(j, "scan");
  const std::string type = f.text("type", std::nullopt, {"bloch", "delta_1d", "thickness_2d"});
  if (type == "bloch") {
    f.integer("points", 2000, 1, 100000000);
    f.flag("refine", false);
  } else if (type == "delta_1d") {
    f.number("lo", 0.0);
    f.number("hi", std::numbers::pi);
    if (f.out["hi"].get<double>() <= f.out["lo"].get<double>()) fail("scan.hi must exceed scan.lo");
    f.integer("points", 500, 2, 10000000);
    f.integer("grid_points", 400, 1, 10000000);
    f.integer("refine_restarts", 4, 0, 100000);
  } else {
    const ThicknessGrid g;
    f.number("h1_lo", g.h1_lo, 0.0);
    f.number("h1_hi", g.h1_hi, 0.0);
    f.number("h2_lo", g.h2_lo, 0.0);
    f.number("h2_hi", g.h2_hi, 0.0);
    f.integer("h1_points", g.h1_points, 1, 100000);
    f.integer("h2_points", g.h2_points, 1, 100000);
    f.number("birefringence", g.birefringence, 0.0, kInf, true);
    f.number("wavelength", g.wavelength, 0.0, kInf, true);
  }
  f.done();
  return f.out;
}

Json resolve_reconstruct(const Json& j) {
  Fields f(j, "reconstruct");
  f.text("counts", std::nullopt);
  if (f.has("rank")) {
    const Json& r = j.at("rank");
    if (r.is_string()) {
      if (r.get<std::string>() != "auto") fail("reconstruct.rank must be an integer or \"auto\"");
      f.out["rank"] = "auto";
    } else {
      f.integer("rank", 0, 0, 1 << 12);
    }
  } else {
    f.out["rank"] = 0;
  }
  f.integer("max_iterations", 10000, 0, 100000000);
  f.number("tolerance", 1e-10, 0.0, 1.0, true);
  f.number("significance", 0.05, 0.0, 1.0, true);
  f.flag("use_counts_exposures", true);
  f.done();
  return f.out;
}

Json resolve_bounds(const Json& j) {
  Fields f(j, "bounds");
  const long long dim = f.integer("dim", std::nullopt, 2, 1 << 20);
  f.integer("rank", dim, 1, dim);
  if (f.has("qubits")) f.integer("qubits", std::nullopt, 1, 300);
  f.done();
  return f.out;
}

Json resolve_distribution(const Json& j) {
  Fields f(j, "distribution");
  f.number("p_lo", 0.01, 0.0, 1.0, true);
  f.number("p_hi", 0.99, 0.0, 1.0, true);
  if (!(f.out["p_lo"].get<double>() < f.out["p_hi"].get<double>()) ||
      !(f.out["p_hi"].get<double>() < 1.0))
    fail("distribution: need 0 < p_lo < p_hi < 1");
  f.integer("cdf_points", 0, 0, 10000000);
  f.done();
  return f.out;
}

Json resolve_tolerances(const Json& j) {
  Fields f(j, "tolerances");
  f.number("max_nonconverged_fraction", 0.05, 0.0, 1.0);
  f.number("rank_tol", 1e-10, 0.0, 1.0, true);
  f.number("unity_tol", 1e-8, 0.0, 1.0, true);
  f.done();
  return f.out;
}

constexpr const char* kCommands[] = {"info", "scan", "simulate", "reconstruct", "bounds",
                                     "distribution"};

Json report_header(const RunConfig& c) {
  Json r;
  r["version"] = std::string(version());
  r["command"] = c.command;
  r["config"] = c.resolved;
  return r;
}

void write_json(const fs::path& path, const Json& j) {
  io::write_text(path, j.dump(2) + "\n");
}

Json ket_json(const CVector& c) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index a = 0; a < c.size(); ++a) {
    re.push_back(c(a).real());
    im.push_back(c(a).imag());
  }
  return {{"re", re}, {"im", im}};
}

// --- commands -----------------------------------------------------------------

Json cmd_info(const RunConfig& c) {
  const Json& cfg = c.resolved;
  const Protocol p = protocol_from_resolved(cfg.at("protocol"), c.base_dir);
  const ProtocolAnalysis a = analyze(p, cfg.at("tolerances").at("rank_tol").get<double>());
  Json r = report_header(c);
  r["label"] = p.label();
  const Json aj = io::to_json(a);
  for (const auto& item : aj.items()) r[item.key()] = item.value();
  r["K_reduced"] = io::number(reduced_condition_number(a));
  r["unity"] = io::to_json(unity_check(p, cfg.at("tolerances").at("unity_tol").get<double>()));
  if (cfg.contains("search")) {
    const MaxLossOptions o = search_options(cfg.at("search"), c.threads);
    const MaxLossResult hi = max_loss_search(p, o);
    const MaxLossResult lo = min_loss_search(p, o);
    r["max_loss"] = {{"L", hi.l_max}, {"state", ket_json(hi.argmax)}, {"restarts", hi.restarts}};
    r["min_loss"] = {{"L", lo.l_max}, {"state", ket_json(lo.argmax)}, {"restarts", lo.restarts}};
  }
  write_json(c.out_dir / "protocol.json", io::to_json(p));
  write_json(c.out_dir / "info.json", r);
  return r;
}

Json cmd_scan(const RunConfig& c) {
  const Json& cfg = c.resolved;
  const Json& s = cfg.at("scan");
  const std::string type = s.at("type");
  Json r = report_header(c);
  ScanField field;
  if (type == "bloch") {
    const Protocol p = protocol_from_resolved(cfg.at("protocol"), c.base_dir);
    if (p.dim() != 2) fail("scan.type bloch needs a single-qubit protocol");
    field = bloch_scan(p, s.at("points").get<int>(), c.threads);
    r["summary"] = io::scan_summary(field, 0);
    if (s.at("refine").get<bool>()) {
      const MaxLossOptions o = search_options(cfg.at("search"), c.threads);
      const MaxLossResult hi = max_loss_search(p, o);
      const MaxLossResult lo = min_loss_search(p, o);
      r["refined"] = {{"max", hi.l_max}, {"argmax", ket_json(hi.argmax)},
                      {"min", lo.l_max}, {"argmin", ket_json(lo.argmax)}};
    }
  } else if (type == "delta_1d") {
    field = delta_scan(s.at("lo"), s.at("hi"), s.at("points"), s.at("grid_points"), c.threads,
                       s.at("refine_restarts"));
    r["summary"] = io::scan_summary(field, 0);
    r["summary_max_L"] = io::scan_summary(field, 1);
  } else {
    ThicknessGrid g;
    g.h1_lo = s.at("h1_lo");
    g.h1_hi = s.at("h1_hi");
    g.h2_lo = s.at("h2_lo");
    g.h2_hi = s.at("h2_hi");
    g.h1_points = s.at("h1_points");
    g.h2_points = s.at("h2_points");
    g.birefringence = s.at("birefringence");
    g.wavelength = s.at("wavelength");
    field = thickness_scan(g, c.threads);
    r["summary"] = io::scan_summary(field, 0);
  }
  io::write_text(c.out_dir / "scan.csv", io::scan_csv(field));
  write_json(c.out_dir / "scan_summary.json", r);
  return r;
}

Json cmd_simulate(const RunConfig& c) {
  const Json& cfg = c.resolved;
  const Protocol p = protocol_from_resolved(cfg.at("protocol"), c.base_dir);
  const DensityMatrix rho = state_from_resolved(cfg.at("state"), c.base_dir);
  if (rho.dim() != p.dim()) fail("state dimension differs from protocol dimension");
  const double n = cfg.at("n");
  const int trials = cfg.at("trials");
  const TrialBatch batch = run_trials(p, rho, n, trials, c.seed, c.threads);
  const LossModel model = loss_model(p, rho, n);
  Json r = report_header(c);
  r["model"] = io::to_json(model);
  r["trials"] = batch.trials();
  r["non_converged"] = batch.non_converged();
  r["mean_loss"] = io::number(batch.mean_loss(true));
  r["variance_loss"] = io::number(batch.variance_loss(true));
  r["mean_ratio"] = io::number(batch.mean_loss(true) / model.mean());
  const int used = batch.trials() - batch.non_converged();
  const int bins = cfg.at("gof_bins").get<int>() > 0 ? cfg.at("gof_bins").get<int>()
                                                     : default_gof_bins(used);
  if (bins >= 2 && used >= 5 * bins)
    r["gof"] = io::to_json(gof_test(batch, model, bins));
  else
    r["gof"] = nullptr;
  io::write_text(c.out_dir / "batch.csv", io::batch_csv(batch));
  const Protocol pn = normalize_exposures(p, rho, n);
  io::write_text(c.out_dir / "counts.csv", io::counts_csv(pn, sample_counts(pn, rho, n, c.seed)));
  write_json(c.out_dir / "gof.json", r);
  const double limit = cfg.at("tolerances").at("max_nonconverged_fraction");
  if (batch.trials() > 0 &&
      static_cast<double>(batch.non_converged()) > limit * batch.trials())
    throw NumericalFailure(std::to_string(batch.non_converged()) + " of " +
                           std::to_string(batch.trials()) + " fits did not converge");
  return r;
}

Json cmd_reconstruct(const RunConfig& c) {
  const Json& cfg = c.resolved;
  const Json& rc = cfg.at("reconstruct");
  Protocol p = protocol_from_resolved(cfg.at("protocol"), c.base_dir);
  io::CountsTable table;
  try {
    table = io::parse_counts_csv(io::read_text(c.base_dir / rc.at("counts").get<std::string>()));
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  if (static_cast<int>(table.counts.size()) != p.size())
    fail("counts file has " + std::to_string(table.counts.size()) + " rows, protocol has " +
         std::to_string(p.size()));
  if (rc.at("use_counts_exposures").get<bool>())
    p = p.with_exposures(Eigen::Map<const RVector>(table.exposures.data(),
                                                   static_cast<Eigen::Index>(table.exposures.size())));
  const ProtocolAnalysis a = analyze(p, cfg.at("tolerances").at("rank_tol").get<double>());
  MLOptions o;
  o.max_iterations = rc.at("max_iterations");
  o.tolerance = rc.at("tolerance");

  Json r = report_header(c);
  std::vector<MLResult> fits;
  if (rc.at("rank").is_string()) {
    if (a.rank != p.dim() * p.dim()) throw IncompleteProtocol("maximum likelihood needs a complete protocol");
    fits = ml_rank_scan(p, table.counts, o);
  } else {
    o.rank = rc.at("rank");
    if (o.rank > p.dim()) fail("reconstruct.rank exceeds the protocol dimension");
    fits.push_back(ml_reconstruct(p, a, table.counts, o));
  }
  // The reported fit is the highest-likelihood one (the full-rank fit when a
  // rank scan is requested, unless a lower rank does at least as well).
  std::size_t best = 0;
  for (std::size_t i = 0; i < fits.size(); ++i)
    if (fits[i].log_likelihood > fits[best].log_likelihood) best = i;
  const Json ml = io::to_json(fits[best]);
  for (const auto& item : ml.items()) r[item.key()] = item.value();
  if (fits.size() > 1) {
    Json scan = Json::array();
    for (const auto& f : fits)
      scan.push_back({{"rank", f.rank},
                      {"loglik", io::number(f.log_likelihood)},
                      {"iterations", f.iterations},
                      {"converged", f.converged}});
    r["rank_scan"] = std::move(scan);
  }
  const PseudoInverseResult pi = pseudo_inverse_reconstruct(a, table.counts);
  r["pseudo_inverse"] = {{"rho", io::to_json(pi.rho_projected)},
                         {"purity_bound", pi.purity_bound}};
  r["adequacy"] = io::to_json(adequacy_test(a, table.counts, rc.at("significance")));
  r["analysis"] = io::to_json(a);
  if (cfg.contains("state")) {
    const DensityMatrix truth = state_from_resolved(cfg.at("state"), c.base_dir);
    if (truth.dim() != p.dim()) fail("state dimension differs from protocol dimension");
    const double f = fidelity(truth, fits[best].estimate);
    r["fidelity_to_truth"] = f;
    r["loss_to_truth"] = std::max(0.0, 1.0 - f);
  }
  write_json(c.out_dir / "ml.json", r);
  for (const auto& f : fits)
    if (!f.converged)
      throw NumericalFailure("maximum likelihood did not converge at rank " +
                             std::to_string(f.rank));
  return r;
}

Json cmd_bounds(const RunConfig& c) {
  const Json& b = c.resolved.at("bounds");
  const LossBounds lb = min_loss_bounds(b.at("dim"), b.at("rank"));
  Json r = report_header(c);
  r["nu"] = lb.nu;
  r["L_min_opt"] = lb.l_min_opt;
  r["polyhedron_floor"] =
      b.contains("qubits") ? Json(polyhedron_mixed_floor(b.at("qubits"))) : Json(nullptr);
  write_json(c.out_dir / "bounds.json", r);
  return r;
}

Json cmd_distribution(const RunConfig& c) {
  const Json& cfg = c.resolved;
  const Json& d = cfg.at("distribution");
  const Protocol p = protocol_from_resolved(cfg.at("protocol"), c.base_dir);
  const DensityMatrix rho = state_from_resolved(cfg.at("state"), c.base_dir);
  if (rho.dim() != p.dim()) fail("state dimension differs from protocol dimension");
  const LossModel model = loss_model(p, rho, cfg.at("n"));
  const double p_lo = d.at("p_lo"), p_hi = d.at("p_hi");
  Json r = report_header(c);
  r["model"] = io::to_json(model);
  r["moments"] = io::to_json(loss_moments(model));
  r["band"] = io::to_json(quantile_band(model, p_lo, p_hi));
  r["quantiles"] = {{"p_lo", p_lo},
                    {"loss_lo", loss_quantile(model, p_lo)},
                    {"p_hi", p_hi},
                    {"loss_hi", loss_quantile(model, p_hi)}};
  std::string dcsv = "j,d\n";
  for (Eigen::Index j = 0; j < model.d.size(); ++j)
    dcsv += std::to_string(j) + ',' + io::format_double(model.d(j)) + '\n';
  io::write_text(c.out_dir / "d.csv", dcsv);
  const int points = d.at("cdf_points");
  if (points > 0) {
    const double top = loss_quantile(model, 0.999);
    std::string csv = "loss,cdf\n";
    for (int i = 0; i < points; ++i) {
      const double x = points == 1 ? top : top * i / (points - 1);
      csv += io::format_double(x) + ',' + io::format_double(loss_cdf(model, x)) + '\n';
    }
    io::write_text(c.out_dir / "cdf.csv", csv);
  }
  write_json(c.out_dir / "distribution.json", r);
  return r;
}

}  // namespace

RunConfig resolve_config(const CommandLine& cli, const Json& doc, const fs::path& base_dir) {
  bool known = false;
  for (const char* name : kCommands) known = known || cli.command == name;
  if (!known) fail("unknown command '" + cli.command + "'");

  Fields f(doc, "config");
  if (f.has("command")) {
    const std::string named = f.text("command", std::nullopt);
    if (named != cli.command)
      fail("config.command is '" + named + "' but the command line asks for '" + cli.command + "'");
  }
  f.out["command"] = cli.command;

  RunConfig c;
  c.command = cli.command;
  c.base_dir = base_dir;
  c.seed = f.unsigned64("seed", 1);
  if (cli.seed) c.seed = *cli.seed;
  f.out["seed"] = c.seed;
  c.threads = static_cast<int>(f.integer("threads", 0, 0, 4096));
  if (cli.threads) {
    if (*cli.threads < 0) fail("--threads must be >= 0");
    c.threads = *cli.threads;
  }
  f.out["threads"] = c.threads;
  std::string out = f.text("out", std::string("qtomo_out"));
  if (cli.out) out = cli.out->string();
  f.out["out"] = out;
  c.out_dir = fs::path(out).is_absolute() || cli.out ? fs::path(out) : base_dir / out;

  const auto& cmd = c.command;
  const bool needs_protocol = cmd == "info" || cmd == "simulate" || cmd == "reconstruct" ||
                              cmd == "distribution";
  const bool needs_state = cmd == "simulate" || cmd == "distribution";
  if (f.has("protocol")) {
    f.out["protocol"] = resolve_protocol(doc.at("protocol"), "config.protocol");
  } else if (needs_protocol) {
    fail("config.protocol is required for " + cmd);
  }
  if (f.has("state")) {
    f.out["state"] = resolve_state(doc.at("state"), "config.state");
  } else if (needs_state) {
    fail("config.state is required for " + cmd);
  }
  f.number("n", 1e5, 0.0, kInf, true);
  f.integer("trials", 500, 0, 100000000);
  f.integer("gof_bins", 0, 0, 1000000);
  f.out["tolerances"] = resolve_tolerances(f.has("tolerances") ? doc.at("tolerances") : Json::object());
  if (f.has("search") || cmd == "scan")
    f.out["search"] = resolve_search(f.has("search") ? doc.at("search") : Json::object(), c.seed);

  if (f.has("scan")) {
    f.out["scan"] = resolve_scan(doc.at("scan"));
  } else if (cmd == "scan") {
    fail("config.scan is required for scan");
  }
  if (cmd == "scan" && f.out["scan"]["type"] == "bloch" && !f.out.contains("protocol"))
    fail("config.protocol is required for a bloch scan");
  if (f.has("reconstruct")) {
    f.out["reconstruct"] = resolve_reconstruct(doc.at("reconstruct"));
  } else if (cmd == "reconstruct") {
    fail("config.reconstruct is required for reconstruct");
  }
  if (f.has("bounds")) {
    f.out["bounds"] = resolve_bounds(doc.at("bounds"));
  } else if (cmd == "bounds") {
    fail("config.bounds is required for bounds");
  }
  if (f.has("distribution") || cmd == "distribution")
    f.out["distribution"] =
        resolve_distribution(f.has("distribution") ? doc.at("distribution") : Json::object());
  f.done();
  c.resolved = std::move(f.out);
  return c;
}

RunConfig load_config(const CommandLine& cli) {
  Json doc;
  try {
    doc = Json::parse(io::read_text(cli.config));
  } catch (const Json::parse_error& e) {
    fail(cli.config.string() + ": " + e.what());
  }
  return resolve_config(cli, doc, cli.config.parent_path());
}

Protocol build_protocol(const Json& spec, const fs::path& base_dir) {
  return protocol_from_resolved(resolve_protocol(spec, "protocol"), base_dir);
}

DensityMatrix build_state(const Json& spec, const fs::path& base_dir) {
  return state_from_resolved(resolve_state(spec, "state"), base_dir);
}

Json execute(const RunConfig& c) {
  if (c.command == "info") return cmd_info(c);
  if (c.command == "scan") return cmd_scan(c);
  if (c.command == "simulate") return cmd_simulate(c);
  if (c.command == "reconstruct") return cmd_reconstruct(c);
  if (c.command == "bounds") return cmd_bounds(c);
  if (c.command == "distribution") return cmd_distribution(c);
  fail("unknown command '" + c.command + "'");
}

int run(const CommandLine& cli, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig c = load_config(cli);
    const Json report = execute(c);
    out << report.dump(2) << "\n";
    return exit_ok;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return exit_config;
  } catch (const InvalidArgument& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const DimensionMismatch& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  }
}

}  // namespace qtomo
