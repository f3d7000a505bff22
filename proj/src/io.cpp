#include "qtomo/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qtomo/error.hpp"

namespace qtomo::io {

namespace {

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw InvalidArgument(std::string("missing key \"") + key + "\"");
  return j.at(key);
}

double as_double(const Json& j, const char* what) {
  if (!j.is_number()) throw InvalidArgument(std::string(what) + " must be a number");
  return j.get<double>();
}

int as_int(const Json& j, const char* what) {
  if (!j.is_number_integer()) throw InvalidArgument(std::string(what) + " must be an integer");
  return j.get<int>();
}

Json matrix_part(const CMatrix& m, bool imag) {
  Json rows = Json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    Json row = Json::array();
    for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(imag ? m(a, b).imag() : m(a, b).real());
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from(const Json& re, const Json& im, Eigen::Index rows, Eigen::Index cols) {
  if (!re.is_array() || !im.is_array() || static_cast<Eigen::Index>(re.size()) != rows ||
      static_cast<Eigen::Index>(im.size()) != rows)
    throw InvalidArgument("re/im must be arrays of " + std::to_string(rows) + " rows");
  CMatrix m(rows, cols);
  for (Eigen::Index a = 0; a < rows; ++a) {
    const Json& rr = re[static_cast<std::size_t>(a)];
    const Json& ir = im[static_cast<std::size_t>(a)];
    if (!rr.is_array() || !ir.is_array() || static_cast<Eigen::Index>(rr.size()) != cols ||
        static_cast<Eigen::Index>(ir.size()) != cols)
      throw InvalidArgument("re/im row " + std::to_string(a) + " must have " +
                            std::to_string(cols) + " entries");
    for (Eigen::Index b = 0; b < cols; ++b)
      m(a, b) = Complex(as_double(rr[static_cast<std::size_t>(b)], "re entry"),
                        as_double(ir[static_cast<std::size_t>(b)], "im entry"));
  }
  return m;
}

CVector vector_from(const Json& re, const Json& im, int dim) {
  if (!re.is_array() || !im.is_array() || static_cast<int>(re.size()) != dim ||
      static_cast<int>(im.size()) != dim)
    throw InvalidArgument("row re/im must have " + std::to_string(dim) + " entries");
  CVector v(dim);
  for (int a = 0; a < dim; ++a)
    v(a) = Complex(as_double(re[static_cast<std::size_t>(a)], "re entry"),
                   as_double(im[static_cast<std::size_t>(a)], "im entry"));
  return v;
}

Json vector_part(const CVector& v, bool imag) {
  Json out = Json::array();
  for (Eigen::Index a = 0; a < v.size(); ++a) out.push_back(imag ? v(a).imag() : v(a).real());
  return out;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
}

Json number(double x) {
  return std::isfinite(x) ? Json(x) : Json(nullptr);
}

Json to_json(const RVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

// --- states -------------------------------------------------------------------

Json to_json(const DensityMatrix& rho) {
  Json j;
  j["dim"] = rho.dim();
  j["re"] = matrix_part(rho.matrix(), false);
  j["im"] = matrix_part(rho.matrix(), true);
  return j;
}

DensityMatrix density_from_json(const Json& j) {
  const int dim = as_int(require(j, "dim"), "dim");
  if (dim < 1) throw InvalidArgument("dim must be >= 1");
  return DensityMatrix(matrix_from(require(j, "re"), require(j, "im"), dim, dim));
}

Json to_json(const PurifiedState& state) {
  Json j;
  j["dim"] = state.dim();
  j["rank"] = state.rank();
  j["re"] = matrix_part(state.amplitudes(), false);
  j["im"] = matrix_part(state.amplitudes(), true);
  return j;
}

PurifiedState purified_from_json(const Json& j) {
  const int dim = as_int(require(j, "dim"), "dim");
  const int rank = as_int(require(j, "rank"), "rank");
  if (dim < 1 || rank < 1 || rank > dim) throw InvalidArgument("need 1 <= rank <= dim");
  return PurifiedState(matrix_from(require(j, "re"), require(j, "im"), dim, rank));
}

// --- protocols ----------------------------------------------------------------

Json to_json(const Protocol& p) {
  Json rows = Json::array();
  for (const auto& row : p.rows()) {
    Json r;
    if (row.is_pure()) {
      r["re"] = vector_part(row.components.front().row, false);
      r["im"] = vector_part(row.components.front().row, true);
      if (row.components.front().weight != 1.0) r["weight"] = row.components.front().weight;
    } else {
      Json comps = Json::array();
      for (const auto& c : row.components)
        comps.push_back({{"weight", c.weight},
                         {"re", vector_part(c.row, false)},
                         {"im", vector_part(c.row, true)}});
      r["components"] = std::move(comps);
    }
    r["t"] = row.exposure;
    rows.push_back(std::move(r));
  }
  Json j;
  j["dim"] = p.dim();
  j["rows"] = std::move(rows);
  j["meta"] = {{"label", p.label()}, {"m", p.size()}};
  return j;
}

Protocol protocol_from_json(const Json& j) {
  const int dim = as_int(require(j, "dim"), "dim");
  if (dim < 1) throw InvalidArgument("dim must be >= 1");
  const Json& rows = require(j, "rows");
  if (!rows.is_array() || rows.empty()) throw InvalidArgument("rows must be a non-empty array");
  std::vector<ProtocolRow> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Json& r = rows[i];
    const std::string where = "row " + std::to_string(i) + ": ";
    try {
      ProtocolRow row;
      row.exposure = r.contains("t") ? as_double(r.at("t"), "t") : 1.0;
      if (!(row.exposure > 0.0) || !std::isfinite(row.exposure))
        throw InvalidArgument("exposure t must be positive");
      if (r.contains("components")) {
        for (const Json& c : r.at("components"))
          row.components.push_back({c.contains("weight") ? as_double(c.at("weight"), "weight") : 1.0,
                                    vector_from(require(c, "re"), require(c, "im"), dim)});
        if (row.components.empty()) throw InvalidArgument("components must be non-empty");
      } else {
        row.components.push_back({r.contains("weight") ? as_double(r.at("weight"), "weight") : 1.0,
                                  vector_from(require(r, "re"), require(r, "im"), dim)});
      }
      out.push_back(std::move(row));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + e.what());
    }
  }
  std::string label;
  if (j.contains("meta") && j.at("meta").is_object() && j.at("meta").contains("label") &&
      j.at("meta").at("label").is_string())
    label = j.at("meta").at("label").get<std::string>();
  return Protocol(dim, std::move(out), std::move(label));
}

// --- counts -------------------------------------------------------------------

std::string counts_csv(const Protocol& p, const std::vector<double>& counts) {
  if (static_cast<int>(counts.size()) != p.size())
    throw DimensionMismatch("counts length differs from protocol rows");
  std::string out = "row_id,t,k\n";
  for (int j = 0; j < p.size(); ++j) {
    out += std::to_string(j);
    out += ',';
    out += format_double(p.row(j).exposure);
    out += ',';
    out += format_double(counts[static_cast<std::size_t>(j)]);
    out += '\n';
  }
  return out;
}

CountsTable parse_counts_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  CountsTable t;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "row_id,t,k")
        throw InvalidArgument("counts line 1: header must be row_id,t,k");
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    const std::string where = "counts line " + std::to_string(lineno) + ": ";
    if (cells.size() != 3) throw InvalidArgument(where + "expected 3 fields");
    double values[3];
    for (int c = 0; c < 3; ++c) {
      std::size_t used = 0;
      try {
        values[c] = std::stod(cells[static_cast<std::size_t>(c)], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[static_cast<std::size_t>(c)].size())
        throw InvalidArgument(where + "field " + std::to_string(c + 1) + " is not a number");
    }
    if (values[0] != static_cast<double>(t.counts.size()))
      throw InvalidArgument(where + "row_id must be " + std::to_string(t.counts.size()));
    if (!(values[1] > 0.0) || !std::isfinite(values[1]))
      throw InvalidArgument(where + "t must be positive");
    if (!(values[2] >= 0.0) || !std::isfinite(values[2]))
      throw InvalidArgument(where + "k must be a non-negative count");
    t.exposures.push_back(values[1]);
    t.counts.push_back(values[2]);
  }
  if (!header) throw InvalidArgument("counts file is empty");
  if (t.counts.empty()) throw InvalidArgument("counts file has no rows");
  return t;
}

// --- reports ------------------------------------------------------------------

Json to_json(const ProtocolAnalysis& a) {
  Json j;
  j["q"] = a.rank;
  j["K"] = number(a.condition_number);
  j["K_full"] = number(a.condition_number_full);
  j["singular_values"] = to_json(a.singular_values);
  j["class"] = completeness_name(a.completeness);
  j["m"] = a.rows;
  j["s"] = a.dim;
  return j;
}

Json to_json(const UnityCheck& u) {
  Json j;
  j["holds"] = u.holds;
  j["intensity"] = u.intensity ? number(*u.intensity) : Json(nullptr);
  j["deviation"] = number(u.deviation);
  return j;
}

Json to_json(const AdequacyResult& a) {
  return {{"verdict", adequacy_name(a.verdict)},
          {"statistic", number(a.statistic)},
          {"dof", a.dof},
          {"p_value", number(a.p_value)}};
}

std::string scan_csv(const ScanField& f) {
  std::string out;
  for (const auto& n : f.coordinate_names) out += n + ',';
  for (const auto& n : f.value_names) out += n + ',';
  out += "singular\n";
  for (int i = 0; i < f.size(); ++i) {
    for (Eigen::Index c = 0; c < f.coordinates.cols(); ++c)
      out += format_double(f.coordinates(i, c)) + ',';
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) out += format_double(f.values(i, c)) + ',';
    out += f.singular[static_cast<std::size_t>(i)] ? "1\n" : "0\n";
  }
  return out;
}

Json scan_summary(const ScanField& f, int value_column) {
  const auto s = f.summary(value_column);
  auto point = [&](int i) {
    Json p;
    if (i < 0) return Json(nullptr);
    for (std::size_t c = 0; c < f.coordinate_names.size(); ++c)
      p[f.coordinate_names[c]] = f.coordinates(i, static_cast<Eigen::Index>(c));
    return p;
  };
  Json j;
  j["value"] = f.value_names.at(static_cast<std::size_t>(value_column));
  j["min"] = number(s.min);
  j["max"] = number(s.max);
  j["argmin"] = s.argmin;
  j["argmax"] = s.argmax;
  j["argmin_point"] = point(s.argmin);
  j["argmax_point"] = point(s.argmax);
  j["singular_points"] = f.singular_points();
  j["points"] = f.size();
  return j;
}

std::string batch_csv(const TrialBatch& b) {
  std::string out = "trial,loss,z,converged\n";
  for (int i = 0; i < b.trials(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out += std::to_string(i) + ',' + format_double(b.losses[k]) + ',' + format_double(b.z[k]) +
           ',' + (b.converged[k] ? "1" : "0") + '\n';
  }
  return out;
}

Json to_json(const GofResult& g) {
  return {{"statistic", number(g.statistic)},
          {"dof", g.dof},
          {"p_value", number(g.p_value)},
          {"bins", g.bins},
          {"used_trials", g.used_trials}};
}

Json to_json(const MLResult& r) {
  Json j;
  j["rho"] = to_json(r.estimate);
  j["loglik"] = number(r.log_likelihood);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["rank"] = r.rank;
  j["seed_loglik"] = number(r.seed_log_likelihood);
  j["intensity_scale"] = number(r.intensity_scale);
  j["purified"] = to_json(r.purified);
  return j;
}

Json to_json(const LossModel& m) {
  Json j;
  j["d"] = to_json(m.d);
  j["n"] = m.n;
  j["dim"] = m.dim;
  j["rank"] = m.rank;
  j["L"] = number(loss_L(m));
  j["mean_loss"] = number(m.mean());
  j["degenerate_rows"] = m.degenerate_rows;
  return j;
}

Json to_json(const LossMoments& m) {
  return {{"mean", number(m.mean)},
          {"variance", number(m.variance)},
          {"skewness", number(m.skewness)},
          {"excess_kurtosis", number(m.excess_kurtosis)}};
}

Json to_json(const QuantileBand& b) {
  return {{"fidelity_lo", number(b.fidelity_lo)},
          {"fidelity_hi", number(b.fidelity_hi)},
          {"z_lo", number(b.z_lo)},
          {"z_hi", number(b.z_hi)}};
}

}  // namespace qtomo::io
