#include "nvlambda/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nvlambda {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

double parse_field_double(const std::string& path, int line_no,
                          const std::string& field) {
  const std::string body = trim(field);
  char* after = nullptr;
  const double v = std::strtod(body.c_str(), &after);
  if (body.empty() || after != body.c_str() + body.size()) {
    throw IoError(path + ":" + std::to_string(line_no) +
                  ": expected a number, got '" + field + "'");
  }
  return v;
}

// Streams non-comment lines with their 1-based line numbers.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open '" + path + "'");
  }

  bool next(std::vector<std::string>* fields, int* line_no) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const std::string body = trim(line);
      if (body.empty() || body[0] == '#') continue;
      *fields = split_fields(line);
      *line_no = line_no_;
      return true;
    }
    return false;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

void expect_header(CsvReader& reader, const std::string& expected) {
  std::vector<std::string> fields;
  int line_no = 0;
  if (!reader.next(&fields, &line_no)) {
    throw IoError(reader.path() + ": empty file (missing header '" +
                  expected + "')");
  }
  std::string got;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) got += ",";
    got += trim(fields[i]);
  }
  if (got != expected) {
    throw IoError(reader.path() + ":" + std::to_string(line_no) +
                  ": expected header '" + expected + "', got '" + got + "'");
  }
}

void require_fields(const std::string& path, int line_no,
                    const std::vector<std::string>& fields,
                    std::size_t expected) {
  if (fields.size() != expected) {
    throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(expected) + " fields, got " +
                  std::to_string(fields.size()));
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: stable line endings
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Trim to the shortest representation that round-trips.
  for (int precision = 1; precision < 17; ++precision) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", precision, v);
    double back = 0.0;
    std::sscanf(shorter, "%lf", &back);
    if (back == v) return shorter;
  }
  return buf;
}

CurveData read_curve_csv(const std::string& path) {
  CsvReader reader(path);
  expect_header(reader, "tau_us,counts,weight");
  CurveData data;
  std::vector<std::string> fields;
  int line_no = 0;
  while (reader.next(&fields, &line_no)) {
    require_fields(path, line_no, fields, 3);
    data.tau.push_back(parse_field_double(path, line_no, fields[0]));
    data.counts.push_back(parse_field_double(path, line_no, fields[1]));
    const double w = parse_field_double(path, line_no, fields[2]);
    if (!(w > 0.0)) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": weight must be positive");
    }
    data.weight.push_back(w);
  }
  if (data.tau.empty()) {
    throw IoError(path + ": no data rows");
  }
  return data;
}

void write_curve_csv(const std::string& path, const CurveData& data,
                     const std::string& config_hash) {
  auto out = open_output(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "tau_us,counts,weight\n";
  for (std::size_t i = 0; i < data.tau.size(); ++i) {
    const double w = data.weight.empty() ? 1.0 : data.weight[i];
    out << format_double(data.tau[i]) << "," << format_double(data.counts[i])
        << "," << format_double(w) << "\n";
  }
}

std::string projection_name(Projection p) {
  switch (p) {
    case Projection::X: return "X";
    case Projection::Y: return "Y";
    case Projection::Z: return "Z";
    case Projection::Norm0: return "NORM0";
    case Projection::Norm1: return "NORM1";
  }
  throw std::logic_error("unknown projection");
}

Projection parse_projection(const std::string& text) {
  const std::string body = trim(text);
  if (body == "X") return Projection::X;
  if (body == "Y") return Projection::Y;
  if (body == "Z") return Projection::Z;
  if (body == "NORM0") return Projection::Norm0;
  if (body == "NORM1") return Projection::Norm1;
  throw IoError("unknown projection '" + body +
                "' (expected X, Y, Z, NORM0, or NORM1)");
}

std::vector<TomoRecord> read_tomo_csv(const std::string& path) {
  CsvReader reader(path);
  expect_header(reader, "record_id,projection,counts,shots");
  std::vector<TomoRecord> records;
  std::vector<std::string> fields;
  int line_no = 0;
  while (reader.next(&fields, &line_no)) {
    require_fields(path, line_no, fields, 4);
    TomoRecord rec;
    rec.id = trim(fields[0]);
    if (rec.id.empty()) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": empty record_id");
    }
    try {
      rec.projection = parse_projection(fields[1]);
    } catch (const IoError& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    rec.counts = parse_field_double(path, line_no, fields[2]);
    rec.shots = parse_field_double(path, line_no, fields[3]);
    if (!(rec.shots > 0.0)) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": shots must be positive");
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) {
    throw IoError(path + ": no data rows");
  }
  return records;
}

void write_tomo_csv(const std::string& path,
                    const std::vector<TomoRecord>& records,
                    const std::string& config_hash) {
  auto out = open_output(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "record_id,projection,counts,shots\n";
  for (const auto& rec : records) {
    out << rec.id << "," << projection_name(rec.projection) << ","
        << format_double(rec.counts) << "," << format_double(rec.shots)
        << "\n";
  }
}

void write_trace_csv(const std::string& path, const SignalTrace& trace,
                     const std::string& config_hash) {
  auto out = open_output(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "t_us,bx,by,bz,pl_rate\n";
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    out << format_double(trace.t[i]) << "," << format_double(trace.bloch[i].x)
        << "," << format_double(trace.bloch[i].y) << ","
        << format_double(trace.bloch[i].z) << "," << format_double(trace.pl[i])
        << "\n";
  }
}

nlohmann::ordered_json trace_json(const SignalTrace& trace,
                                  const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  j["t_us"] = trace.t;
  nlohmann::ordered_json bx = nlohmann::ordered_json::array();
  nlohmann::ordered_json by = nlohmann::ordered_json::array();
  nlohmann::ordered_json bz = nlohmann::ordered_json::array();
  for (const BlochVector& b : trace.bloch) {
    bx.push_back(b.x);
    by.push_back(b.y);
    bz.push_back(b.z);
  }
  j["bx"] = bx;
  j["by"] = by;
  j["bz"] = bz;
  j["pl_rate"] = trace.pl;
  j["integrated_counts"] = trace.integrated_counts;
  j["has_readout"] = trace.has_readout;
  nlohmann::ordered_json rho = nlohmann::ordered_json::array();
  for (int r = 0; r < 5; ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int c = 0; c < 5; ++c) {
      const auto v = trace.final_state.matrix()(r, c);
      row.push_back({v.real(), v.imag()});
    }
    rho.push_back(row);
  }
  j["final_state"] = rho;
  return j;
}

void write_xy_csv(const std::string& path, const std::string& x_name,
                  const std::string& y_name, const std::vector<double>& x,
                  const std::vector<double>& y,
                  const std::string& config_hash) {
  if (x.size() != y.size()) {
    throw IoError("write_xy_csv: column length mismatch");
  }
  auto out = open_output(path);
  out << "# config_hash=" << config_hash << "\n";
  out << x_name << "," << y_name << "\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    out << format_double(x[i]) << "," << format_double(y[i]) << "\n";
  }
}

void write_posterior_csv(const std::string& path,
                         const PosteriorArchive& archive,
                         const std::string& config_hash) {
  auto out = open_output(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "chain,draw,r,theta,phi,f0,contrast,eps_y,eps_z,v_x,v_z,phi_err,"
         "theta_err,log_density\n";
  for (std::size_t c = 0; c < archive.chains.size(); ++c) {
    for (std::size_t i = 0; i < archive.chains[c].size(); ++i) {
      const TomoVector v = tomo_pack(archive.chains[c][i]);
      out << c << "," << i;
      for (int j = 0; j < kTomoDim; ++j) out << "," << format_double(v[j]);
      out << "," << format_double(archive.log_density[c][i]) << "\n";
    }
  }
}

void write_json_file(const std::string& path,
                     const nlohmann::ordered_json& j) {
  auto out = open_output(path);
  out << j.dump(2) << "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_output(path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace nvlambda
