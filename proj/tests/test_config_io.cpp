// Config loading (units, precedence, validation, hashing) and CSV/JSON IO
// (round-trips, error reporting with file:line context).

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nvlambda/config.hpp"
#include "nvlambda/io.hpp"
#include "nvlambda/quantum.hpp"

namespace fs = std::filesystem;
using namespace nvlambda;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Unique scratch directory, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    std::mt19937_64 eng(std::random_device{}());
    path = fs::temp_directory_path() /
           ("nvlambda_test_" + std::to_string(eng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_SUITE("config_io") {

TEST_CASE("quantity parsing converts units by kind") {
  // Frequencies become angular (x 2*pi); rates stay plain inverse time.
  CHECK(parse_quantity("2.5 MHz", Quantity::Frequency) ==
        doctest::Approx(2.5 * kTwoPi).epsilon(1e-15));
  CHECK(parse_quantity("500 kHz", Quantity::Frequency) ==
        doctest::Approx(0.5 * kTwoPi).epsilon(1e-15));
  CHECK(parse_quantity("0.18 GHz", Quantity::Frequency) ==
        doctest::Approx(180.0 * kTwoPi).epsilon(1e-15));
  CHECK(parse_quantity("2.5 MHz", Quantity::Rate) == doctest::Approx(2.5));
  CHECK(parse_quantity("500 kHz", Quantity::Rate) == doctest::Approx(0.5));
  CHECK(parse_quantity("0.001 GHz", Quantity::Rate) == doctest::Approx(1.0));

  // Times normalize to microseconds.
  CHECK(parse_quantity("450 ns", Quantity::Time) == doctest::Approx(0.45));
  CHECK(parse_quantity("0.5 us", Quantity::Time) == doctest::Approx(0.5));
  CHECK(parse_quantity("2 ms", Quantity::Time) == doctest::Approx(2000.0));
  CHECK(parse_quantity("1 s", Quantity::Time) == doctest::Approx(1e6));

  // Angles normalize to radians.
  CHECK(parse_quantity("0.5 rad", Quantity::Angle) == doctest::Approx(0.5));
  CHECK(parse_quantity("90 deg", Quantity::Angle) ==
        doctest::Approx(std::acos(-1.0) / 2.0));
  CHECK(parse_quantity("250 mrad", Quantity::Angle) == doctest::Approx(0.25));

  // Suffix may touch the number; dimensionless values carry none.
  CHECK(parse_quantity("2.5MHz", Quantity::Frequency) ==
        doctest::Approx(2.5 * kTwoPi));
  CHECK(parse_quantity(" 3.25 ", Quantity::Dimensionless) ==
        doctest::Approx(3.25));
  CHECK(parse_quantity("-0.684 MHz", Quantity::Frequency) ==
        doctest::Approx(-0.684 * kTwoPi));
}

TEST_CASE("quantity parsing rejects malformed input") {
  CHECK_THROWS_AS(parse_quantity("", Quantity::Frequency), ConfigError);
  CHECK_THROWS_AS(parse_quantity("   ", Quantity::Dimensionless), ConfigError);
  CHECK_THROWS_WITH_AS(parse_quantity("abc MHz", Quantity::Frequency),
                       doctest::Contains("cannot parse number"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_quantity("nan MHz", Quantity::Frequency),
                       doctest::Contains("cannot parse number"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_quantity("5", Quantity::Frequency),
                       doctest::Contains("missing unit suffix"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_quantity("5 furlong", Quantity::Time),
                       doctest::Contains("unknown unit"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_quantity("5 MHz", Quantity::Dimensionless),
                       doctest::Contains("unexpected unit"), ConfigError);
  // A frequency suffix on a time is still unknown for that kind.
  CHECK_THROWS_WITH_AS(parse_quantity("5 MHz", Quantity::Time),
                       doctest::Contains("unknown unit"), ConfigError);
}

TEST_CASE("built-in defaults describe the reference datasets") {
  const RunConfig cfg = load_config(std::nullopt, std::nullopt);

  CHECK(cfg.seed == 0);
  CHECK(cfg.ramsey.params.amplitude == doctest::Approx(253.0));
  CHECK(cfg.ramsey.params.t2_star == doctest::Approx(1.13));
  CHECK(cfg.ramsey.params.delta_omega == doctest::Approx(7.52 * kTwoPi));
  CHECK(cfg.ramsey.params.omega_hf == doctest::Approx(2.19 * kTwoPi));
  CHECK(cfg.ramsey.params.tau0 == doctest::Approx(0.013));
  CHECK(cfg.ramsey.params.c1 == doctest::Approx(1.36));
  CHECK(cfg.ramsey.params.c2 == doctest::Approx(0.64));
  CHECK(cfg.ramsey.params.background == 0.0);
  CHECK(cfg.ramsey.tau_start == doctest::Approx(0.02));
  CHECK(cfg.ramsey.tau_stop == doctest::Approx(3.0));
  CHECK(cfg.ramsey.tau_step == doctest::Approx(0.01));
  CHECK(cfg.ramsey.shots == 1);
  CHECK(cfg.ramsey.synth.paired);

  CHECK(cfg.hahn.params.amplitude == doctest::Approx(538.0));
  CHECK(cfg.hahn.params.t2 == doctest::Approx(893.0));
  CHECK(cfg.hahn.tau_start == doctest::Approx(10.0));
  CHECK(cfg.hahn.tau_stop == doctest::Approx(2000.0));
  CHECK(cfg.hahn.tau_step == doctest::Approx(10.0));

  CHECK(cfg.spectrum.start == doctest::Approx(-15.0 * kTwoPi));
  CHECK(cfg.spectrum.stop == doctest::Approx(15.0 * kTwoPi));
  CHECK(cfg.spectrum.points == 201);

  CHECK(cfg.cpt.drive_time == doctest::Approx(0.5));
  CHECK(cfg.cpt.relax_time == doctest::Approx(0.45));
  CHECK(cfg.cpt.trace_points == 201);
  CHECK(cfg.cpt.state == "mixed");
  CHECK(cfg.rotation.duration == doctest::Approx(0.2));
  CHECK(cfg.rotation.state == "A");
  CHECK(cfg.tomo.hpd_mass == doctest::Approx(0.682));

  CHECK(cfg.hash.size() == 16);
  CHECK(cfg.hash.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("presets load into internal units") {
  const auto names = available_presets();
  for (const char* expected : {"cpt_init", "sigma_x", "sigma_y", "sigma_z"}) {
    CAPTURE(expected);
    CHECK(std::find(names.begin(), names.end(), expected) != names.end());
  }
  CHECK(preset_path("cpt_init").find("cpt_init.yaml") != std::string::npos);
  CHECK_THROWS_WITH_AS(preset_path("does_not_exist"),
                       doctest::Contains("sigma_x"), ConfigError);

  const RunConfig cfg = load_config(std::nullopt, std::string("cpt_init"));
  CHECK(cfg.model.excited_splitting == doctest::Approx(180.0 * kTwoPi));
  CHECK(cfg.model.laser_detuning == doctest::Approx(-0.684 * kTwoPi));
  CHECK(cfg.model.rabi_amplitude == doctest::Approx(46.507 * kTwoPi));
  CHECK(cfg.model.drive_theta == doctest::Approx(1.708));
  CHECK(cfg.model.drive_phi == doctest::Approx(0.395));
  CHECK(cfg.model.branch == DriveBranch::Both);
  // Decay rates are plain 1/us even though the file says "MHz".
  CHECK(cfg.rates.radiative == doctest::Approx(35.114));
  CHECK(cfg.rates.isc == doctest::Approx(37.0));
  CHECK(cfg.rates.singlet_decay == doctest::Approx(2.701));
  CHECK(cfg.rates.singlet_to_0g == doctest::Approx(1.0));
  CHECK(cfg.rates.ground_flip == doctest::Approx(0.373));
  CHECK(cfg.rates.dephasing == 0.0);
  REQUIRE(cfg.states.count("A") == 1);
  REQUIRE(cfg.states.count("B") == 1);
  CHECK(cfg.states.at("A").r == doctest::Approx(0.640));
  CHECK(cfg.states.at("A").theta == doctest::Approx(0.164));
  CHECK(cfg.states.at("B").phi == doctest::Approx(3.122));
}

TEST_CASE("preset directory honors the environment override") {
  TempDir dir;
  write_file(dir.file("custom.yaml"), "seed: 7\n");
  REQUIRE(setenv("NVLAMBDA_PRESET_DIR", dir.path.c_str(), 1) == 0);
  struct Restore {
    ~Restore() { unsetenv("NVLAMBDA_PRESET_DIR"); }
  } restore;

  const auto names = available_presets();
  REQUIRE(names.size() == 1);
  CHECK(names[0] == "custom");
  const RunConfig cfg = load_config(std::nullopt, std::string("custom"));
  CHECK(cfg.seed == 7);
  CHECK_THROWS_WITH_AS(preset_path("cpt_init"), doctest::Contains("custom"),
                       ConfigError);
}

TEST_CASE("merge precedence: preset < config file < overrides < seed flag") {
  TempDir dir;
  write_file(dir.file("run.yaml"),
             "seed: 11\n"
             "model:\n"
             "  rabi_amplitude: \"10 MHz\"\n"
             "ramsey:\n"
             "  shots: 250\n");

  // Config file overrides the preset value (46.507 MHz).
  RunConfig cfg =
      load_config(dir.file("run.yaml"), std::string("cpt_init"));
  CHECK(cfg.model.rabi_amplitude == doctest::Approx(10.0 * kTwoPi));
  CHECK(cfg.model.excited_splitting ==
        doctest::Approx(180.0 * kTwoPi));  // preset survives elsewhere
  CHECK(cfg.seed == 11);
  CHECK(cfg.ramsey.shots == 250);

  // Command-line overrides beat the file; the seed flag beats everything.
  cfg = load_config(dir.file("run.yaml"), std::string("cpt_init"),
                    {{"model.rabi_amplitude", "20 MHz"}, {"seed", "99"}},
                    std::uint64_t{1234});
  CHECK(cfg.model.rabi_amplitude == doctest::Approx(20.0 * kTwoPi));
  CHECK(cfg.seed == 1234);

  // Without the seed flag the override wins over the file.
  cfg = load_config(dir.file("run.yaml"), std::nullopt, {{"seed", "99"}});
  CHECK(cfg.seed == 99);
}

TEST_CASE("unknown keys and invalid values are rejected") {
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"model.bogus", "1"}}),
                       doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"model.rabi_amplitude", "10"}}),
                       doctest::Contains("missing unit suffix"), ConfigError);
  CHECK_THROWS_WITH_AS(
      load_config(std::nullopt, std::nullopt,
                  {{"spectrum.start", "10 MHz"}, {"spectrum.stop", "-1 MHz"}}),
      doctest::Contains("spectrum.stop must exceed spectrum.start"),
      ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"cpt.trace_points", "1"}}),
                       doctest::Contains(">= 2"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"ramsey.tau_step", "0 us"}}),
                       doctest::Contains("must be positive"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"ramsey.shots", "0"}}),
                       doctest::Contains(">= 1"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"tomo.hpd_mass", "1.5"}}),
                       doctest::Contains("(0, 1)"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"model.branch", "Q"}}),
                       doctest::Contains("model.branch"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"ramsey.paired", "maybe"}}),
                       doctest::Contains("expected a boolean"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"states.A.r", "1.5"}}),
                       doctest::Contains("[0, 1]"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"seed", "-3"}}),
                       doctest::Contains("nonnegative"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(std::nullopt, std::nullopt,
                                   {{"cpt.trace_points", "2.5"}}),
                       doctest::Contains("expected an integer"), ConfigError);
  CHECK_THROWS_AS(load_config(std::string("/nonexistent/nvlambda.yaml"),
                              std::nullopt),
                  ConfigError);

  TempDir dir;
  write_file(dir.file("bad.yaml"), "model:\n  rabi_amplitude:\n");
  CHECK_THROWS_WITH_AS(load_config(dir.file("bad.yaml"), std::nullopt),
                       doctest::Contains("has no value"), ConfigError);
}

TEST_CASE("config hash is stable and value-sensitive") {
  const RunConfig a = load_config(std::nullopt, std::string("cpt_init"));
  const RunConfig b = load_config(std::nullopt, std::string("cpt_init"));
  CHECK(a.hash == b.hash);
  CHECK(a.canonical_text() == b.canonical_text());

  const RunConfig c = load_config(std::nullopt, std::string("cpt_init"), {},
                                  std::uint64_t{5});
  CHECK(c.hash != a.hash);
  const RunConfig d = load_config(std::nullopt, std::string("cpt_init"),
                                  {{"model.dephasing", "1 MHz"}});
  CHECK(d.hash != a.hash);

  // Canonical text lists every resolved key once, in a stable order.
  const std::string text = a.canonical_text();
  CHECK(text.find("seed=0\n") != std::string::npos);
  CHECK(text.find("model.rabi_amplitude=") != std::string::npos);
  CHECK(text.find("states.A.r=") != std::string::npos);
  CHECK(text.find("fit.grid_points=400") != std::string::npos);
  CHECK(fnv1a64("") == 14695981039346656037ULL);  // FNV-1a offset basis
}

TEST_CASE("state names resolve to density matrices") {
  const RunConfig cfg = load_config(std::nullopt, std::string("cpt_init"));

  const DensityMatrix mixed = cfg.resolve_state("mixed");
  CHECK(mixed.population(kIdx0g) == doctest::Approx(0.5));
  CHECK(mixed.population(kIdxPlus1g) == doctest::Approx(0.5));
  CHECK(cfg.resolve_state("zero").population(kIdx0g) == doctest::Approx(1.0));
  CHECK(cfg.resolve_state("plus").population(kIdxPlus1g) ==
        doctest::Approx(1.0));

  const DensityMatrix a = cfg.resolve_state("A");
  const DensityMatrix want = from_bloch(0.640, 0.164, 2.526);
  CHECK((a.matrix() - want.matrix()).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_WITH_AS(cfg.resolve_state("nope"), doctest::Contains("B"),
                       ConfigError);
}

TEST_CASE("shortest round-trip double formatting") {
  const double values[] = {0.0,     1.0,       0.1,   1.0 / 3.0,
                           2.5e-17, 1234567.25, -0.75, 6.02214076e23,
                           5e-324,  -1.13};
  for (double v : values) {
    CAPTURE(v);
    const std::string text = format_double(v);
    CHECK(std::strtod(text.c_str(), nullptr) == v);
  }
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("curve CSV round-trip preserves values exactly") {
  TempDir dir;
  CurveData data;
  data.tau = {0.02, 1.0 / 3.0, 2.5, 1e-3};
  data.counts = {-198.1765188925925, 0.0, 3249.25, -52.5};
  data.weight = {1.0, 0.5, 2.0 / 3.0, 1e-6};
  const std::string path = dir.file("curve.csv");
  write_curve_csv(path, data, "deadbeefdeadbeef");

  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "# config_hash=deadbeefdeadbeef");
  CHECK(lines[1] == "tau_us,counts,weight");

  const CurveData back = read_curve_csv(path);
  REQUIRE(back.tau.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.tau[i] == data.tau[i]);
    CHECK(back.counts[i] == data.counts[i]);
    CHECK(back.weight[i] == data.weight[i]);
  }

  // Empty weights column defaults to 1.0 on write.
  CurveData no_weight;
  no_weight.tau = {1.0};
  no_weight.counts = {10.0};
  write_curve_csv(path, no_weight, "00");
  CHECK(read_curve_csv(path).weight == std::vector<double>{1.0});
}

TEST_CASE("curve CSV errors carry path and line context") {
  TempDir dir;
  const std::string path = dir.file("bad.csv");

  write_file(path, "");
  CHECK_THROWS_WITH_AS(read_curve_csv(path), doctest::Contains("empty file"),
                       IoError);

  write_file(path, "time,counts\n");
  CHECK_THROWS_WITH_AS(read_curve_csv(path),
                       doctest::Contains("expected header"), IoError);

  write_file(path, "tau_us,counts,weight\n");
  CHECK_THROWS_WITH_AS(read_curve_csv(path), doctest::Contains("no data rows"),
                       IoError);

  // Comments and blank lines do not advance the data; the error names the
  // physical line number of the offending row.
  write_file(path, "# comment\ntau_us,counts,weight\n\n1.0,2.0,oops\n");
  CHECK_THROWS_WITH_AS(read_curve_csv(path), doctest::Contains(":4:"),
                       IoError);

  write_file(path, "tau_us,counts,weight\n1.0,2.0\n");
  CHECK_THROWS_WITH_AS(read_curve_csv(path),
                       doctest::Contains("expected 3 fields"), IoError);

  write_file(path, "tau_us,counts,weight\n1.0,2.0,0\n");
  CHECK_THROWS_WITH_AS(read_curve_csv(path),
                       doctest::Contains("weight must be positive"), IoError);

  CHECK_THROWS_WITH_AS(read_curve_csv(dir.file("missing.csv")),
                       doctest::Contains("cannot open"), IoError);
}

TEST_CASE("tomography CSV round-trip and validation") {
  TempDir dir;
  const std::string path = dir.file("tomo.csv");

  std::vector<TomoRecord> records;
  const Projection projections[] = {Projection::X, Projection::Y,
                                    Projection::Z, Projection::Norm0,
                                    Projection::Norm1};
  for (int i = 0; i < 5; ++i) {
    TomoRecord rec;
    rec.id = "rec" + std::to_string(i);
    rec.projection = projections[i];
    rec.counts = 1000.5 * (i + 1);
    rec.shots = 3.0;
    records.push_back(rec);
  }
  write_tomo_csv(path, records, "cafe");

  const auto back = read_tomo_csv(path);
  REQUIRE(back.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(back[i].id == records[i].id);
    CHECK(back[i].projection == records[i].projection);
    CHECK(back[i].counts == records[i].counts);
    CHECK(back[i].shots == records[i].shots);
  }

  // Projection names round-trip through the parser.
  for (Projection p : projections) {
    CHECK(parse_projection(projection_name(p)) == p);
  }
  CHECK_THROWS_WITH_AS(parse_projection("W"),
                       doctest::Contains("unknown projection"), IoError);

  write_file(path, "record_id,projection,counts,shots\na,Q,1,1\n");
  CHECK_THROWS_WITH_AS(read_tomo_csv(path), doctest::Contains(":2:"), IoError);
  write_file(path, "record_id,projection,counts,shots\na,X,1,0\n");
  CHECK_THROWS_WITH_AS(read_tomo_csv(path),
                       doctest::Contains("shots must be positive"), IoError);
  write_file(path, "record_id,projection,counts,shots\n,X,1,1\n");
  CHECK_THROWS_WITH_AS(read_tomo_csv(path),
                       doctest::Contains("empty record_id"), IoError);
}

TEST_CASE("trace, xy, and posterior writers emit hash-stamped tables") {
  TempDir dir;

  SignalTrace trace;
  trace.t = {0.0, 0.1};
  trace.bloch = {{0.0, 0.0, 1.0}, {0.25, -0.5, 0.125}};
  trace.pl = {100.0, 90.5};
  write_trace_csv(dir.file("trace.csv"), trace, "aa");
  auto lines = read_lines(dir.file("trace.csv"));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "# config_hash=aa");
  CHECK(lines[1] == "t_us,bx,by,bz,pl_rate");
  CHECK(lines[3] == "0.1,0.25,-0.5,0.125,90.5");

  write_xy_csv(dir.file("xy.csv"), "delta", "counts", {1.0, 2.0}, {3.0, 4.0},
               "bb");
  lines = read_lines(dir.file("xy.csv"));
  REQUIRE(lines.size() == 4);
  CHECK(lines[1] == "delta,counts");
  CHECK(lines[2] == "1,3");
  CHECK_THROWS_AS(write_xy_csv(dir.file("xy.csv"), "x", "y", {1.0}, {}, "cc"),
                  IoError);

  PosteriorArchive archive;
  TomoParams p;
  p.r = 0.5;
  p.theta = 1.0;
  p.phi = 2.0;
  p.f0 = 1e5;
  p.contrast = 0.75;
  archive.chains = {{p, p}, {p}};
  archive.log_density = {{-1.0, -2.0}, {-3.0}};
  write_posterior_csv(dir.file("post.csv"), archive, "dd");
  lines = read_lines(dir.file("post.csv"));
  REQUIRE(lines.size() == 5);
  CHECK(lines[1] ==
        "chain,draw,r,theta,phi,f0,contrast,eps_y,eps_z,v_x,v_z,phi_err,"
        "theta_err,log_density");
  CHECK(lines[2].rfind("0,0,0.5,1,2,1e+05,0.75,", 0) == 0);
  CHECK(lines[4].rfind("1,0,", 0) == 0);
}

TEST_CASE("trace JSON mirrors the trace fields") {
  SignalTrace trace;
  trace.t = {0.0, 0.1, 0.2};
  trace.bloch = {{0.0, 0.0, 1.0}, {0.25, -0.5, 0.125}, {1.0, 0.0, 0.0}};
  trace.pl = {100.0, 90.5, 81.25};
  trace.integrated_counts = 271.75;
  trace.has_readout = true;
  trace.final_state = DensityMatrix::ground_mixture(0.75, 0.25);

  const nlohmann::ordered_json j = trace_json(trace, "feedc0de");
  CHECK(j["config_hash"] == "feedc0de");
  REQUIRE(j["t_us"].size() == 3);
  CHECK(j["t_us"][2] == 0.2);
  CHECK(j["bx"][1] == 0.25);
  CHECK(j["by"][1] == -0.5);
  CHECK(j["bz"][0] == 1.0);
  CHECK(j["pl_rate"][2] == 81.25);
  CHECK(j["integrated_counts"] == 271.75);
  CHECK(j["has_readout"] == true);
  REQUIRE(j["final_state"].size() == 5);
  REQUIRE(j["final_state"][0].size() == 5);
  const auto diag0 = j["final_state"][0][0];
  CHECK(diag0[0].get<double>() ==
        doctest::Approx(trace.final_state.matrix()(0, 0).real())
            .epsilon(1e-15));
  CHECK(diag0[1] == 0.0);

  // Keys appear in declaration order so runs diff cleanly.
  TempDir dir;
  write_json_file(dir.file("trace.json"), j);
  const std::string text = read_text_file(dir.file("trace.json"));
  CHECK(text.find("\"t_us\"") < text.find("\"bx\""));
  CHECK(text.find("\"pl_rate\"") < text.find("\"final_state\""));
  const auto parsed = nlohmann::ordered_json::parse(text);
  CHECK(parsed["bx"][2] == 1.0);
}

TEST_CASE("json and text file writers") {
  TempDir dir;
  nlohmann::ordered_json j;
  j["zeta"] = 1;
  j["alpha"] = {{"nested", true}};
  write_json_file(dir.file("out.json"), j);
  const std::string text = read_text_file(dir.file("out.json"));
  CHECK(text.back() == '\n');
  CHECK(text.find("\"zeta\"") < text.find("\"alpha\""));  // insertion order

  write_text_file(dir.file("note.txt"), "two\nlines\n");
  CHECK(read_text_file(dir.file("note.txt")) == "two\nlines\n");
  CHECK_THROWS_WITH_AS(read_text_file(dir.file("absent.txt")),
                       doctest::Contains("cannot open"), IoError);
}

}  // TEST_SUITE
