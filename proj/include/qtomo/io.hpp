#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtomo/analysis.hpp"
#include "qtomo/precision.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/reconstruction.hpp"
#include "qtomo/simulation.hpp"
#include "qtomo/states.hpp"

namespace qtomo::io {

using Json = nlohmann::ordered_json;

/// 17 significant digits, enough to read back the same double. Non-finite
/// values print as inf, -inf, nan.
std::string format_double(double x);

std::string read_text(const std::filesystem::path& path);
/// Creates parent directories; replaces the file atomically enough for
/// single-writer use (write then rename).
void write_text(const std::filesystem::path& path, const std::string& text);

/// JSON has no infinities; they become null.
Json number(double x);

// --- states -------------------------------------------------------------------

/// {"dim", "re": [[...]], "im": [[...]]}
Json to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const Json& j);
/// {"dim", "rank", "re", "im"} with s x r nested arrays.
Json to_json(const PurifiedState& state);
PurifiedState purified_from_json(const Json& j);

// --- protocols ----------------------------------------------------------------

/// {"dim", "rows": [{"re", "im", "t"}], "meta": {"label", "m"}}. Mixed rows carry
/// "components": [{"weight", "re", "im"}] instead of "re"/"im".
Json to_json(const Protocol& p);
Protocol protocol_from_json(const Json& j);

// --- counts -------------------------------------------------------------------

struct CountsTable {
  std::vector<double> exposures;
  std::vector<double> counts;
};

/// Header `row_id,t,k`; row ids must run 0..m-1 in order.
std::string counts_csv(const Protocol& p, const std::vector<double>& counts);
/// Throws InvalidArgument naming the offending line.
CountsTable parse_counts_csv(const std::string& text);

// --- reports ------------------------------------------------------------------

/// {"q", "K", "singular_values", "class"} plus K_full and the dimensions.
Json to_json(const ProtocolAnalysis& a);
Json to_json(const UnityCheck& u);
Json to_json(const AdequacyResult& a);

/// Header: coordinate names, value names, singular (0/1).
std::string scan_csv(const ScanField& f);
/// {"min", "max", "argmin", "argmax", "singular_points"} for one value column;
/// argmin/argmax also list the point coordinates.
Json scan_summary(const ScanField& f, int value_column = 0);

/// Header `trial,loss,z,converged`.
std::string batch_csv(const TrialBatch& b);
Json to_json(const GofResult& g);

/// {"rho", "loglik", "iterations", "converged", "rank"} plus seed data.
Json to_json(const MLResult& r);

Json to_json(const LossModel& m);
Json to_json(const LossMoments& m);
Json to_json(const QuantileBand& b);

Json to_json(const RVector& v);

}  // namespace qtomo::io
