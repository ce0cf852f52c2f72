#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvlambda/fitting.hpp"
#include "nvlambda/pulse.hpp"
#include "nvlambda/tomography.hpp"

namespace nvlambda {

// Raised on file I/O and data-schema problems; messages carry the offending
// path and, for row-level errors, the 1-based line number.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Round-trip-exact, locale-independent decimal formatting.
std::string format_double(double v);

// --- CSV -------------------------------------------------------------------
// All writers emit a '# config_hash=...' comment, then a header row, then
// data rows.  Readers skip blank and comment lines and validate the header.

// Schema: tau_us,counts,weight
CurveData read_curve_csv(const std::string& path);
void write_curve_csv(const std::string& path, const CurveData& data,
                     const std::string& config_hash);

// Schema: record_id,projection,counts,shots  (projection in
// {X, Y, Z, NORM0, NORM1})
std::vector<TomoRecord> read_tomo_csv(const std::string& path);
void write_tomo_csv(const std::string& path,
                    const std::vector<TomoRecord>& records,
                    const std::string& config_hash);

// Schema: t_us,bx,by,bz,pl_rate
void write_trace_csv(const std::string& path, const SignalTrace& trace,
                     const std::string& config_hash);

// Generic two-column table for spectra, fidelity curves, and model curves.
void write_xy_csv(const std::string& path, const std::string& x_name,
                  const std::string& y_name, const std::vector<double>& x,
                  const std::vector<double>& y,
                  const std::string& config_hash);

// Posterior draws: chain,draw,<11 parameter columns>,log_density
void write_posterior_csv(const std::string& path,
                         const PosteriorArchive& archive,
                         const std::string& config_hash);

// JSON mirror of a SignalTrace: config_hash, t_us/bx/by/bz/pl_rate arrays,
// integrated_counts, has_readout, and final_state as 5x5 [re, im] pairs.
nlohmann::ordered_json trace_json(const SignalTrace& trace,
                                  const std::string& config_hash);

std::string projection_name(Projection p);
Projection parse_projection(const std::string& text);  // throws IoError

// --- JSON ------------------------------------------------------------------

// Serializes with 2-space indentation, keys in insertion order, and a
// trailing newline.  The caller is responsible for embedding config_hash.
void write_json_file(const std::string& path, const nlohmann::ordered_json& j);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace nvlambda
