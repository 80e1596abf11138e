#include "fpt/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fpt/analytic.hpp"
#include "fpt/montecarlo.hpp"
#include "fpt/parallel.hpp"
#include "fpt/survival.hpp"

namespace fpt {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kCsvFormat = "fpt-csv/1";
constexpr const char* kSummaryFormat = "fpt-summary/1";

constexpr double kFlowTolerance = 1e-8;
constexpr double kLemma1Tolerance = 0.02;
constexpr double kLemma2Lag = 1e-4;
constexpr double kLemma2Tolerance = 5e-3;
constexpr double kJumpFinalGap = 5e-3;
constexpr double kJumpShrink = 3.0;
constexpr double kDiskTolerance = 0.01;
constexpr double kHalfplaneTolerance = 0.02;
constexpr double kHalfplaneFloor = 1e-4;
constexpr double kMassTolerance = 1e-3;
constexpr double kConservationTolerance = 1e-3;

/// Comma-separated file with the shared header block: format, command, effective scenario.
class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& command, const Scenario& scenario,
          const std::vector<std::string>& columns)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "# format: " << kCsvFormat << "\n# command: " << command << "\n# scenario: " << serialize_compact(scenario)
         << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  CsvFile& cell(double v) { return put(format_real(v)); }
  CsvFile& cell(int v) { return put(std::to_string(v)); }
  CsvFile& cell(const std::string& v) { return put(v); }
  void end() {
    out_ << "\n";
    first_ = true;
  }

 private:
  CsvFile& put(const std::string& text) {
    if (!first_) out_ << ",";
    out_ << text;
    first_ = false;
    return *this;
  }

  std::ofstream out_;
  bool first_ = true;
};

void write_summary(const fs::path& path, const std::string& command, const Scenario& scenario, const Json& results) {
  Json doc = {{"format", kSummaryFormat},
              {"command", command},
              {"scenario", Json::parse(serialize_compact(scenario))},
              {"results", results}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

Json rows_json(const std::vector<CheckRow>& rows) {
  Json j = Json::array();
  for (const CheckRow& r : rows)
    j.push_back({{"check", r.name}, {"value", r.value}, {"threshold", r.threshold}, {"pass", r.pass}, {"detail", r.detail}});
  return j;
}

void write_rows(const fs::path& path, const std::string& command, const Scenario& scenario,
                const std::vector<CheckRow>& rows) {
  CsvFile csv(path, command, scenario, {"check", "value", "threshold", "pass"});
  for (const CheckRow& r : rows) {
    csv.cell(r.name).cell(r.value).cell(r.threshold).cell(r.pass ? 1 : 0);
    csv.end();
  }
}

void print_rows(const std::vector<CheckRow>& rows, std::ostream& log) {
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %-14s %-14s %s\n", "check", "value", "threshold", "result");
  log << line;
  for (const CheckRow& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %-14.6g %-14.6g %s", r.name.c_str(), r.value, r.threshold,
                  r.pass ? "PASS" : "FAIL");
    log << line;
    if (!r.detail.empty()) log << "  " << r.detail;
    log << "\n";
  }
}

bool all_pass(const std::vector<CheckRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

void write_density(const fs::path& path, const std::string& command, const Scenario& scenario,
                   const DensitySolution& sol) {
  CsvFile csv(path, command, scenario, {"t", "node", "u", "y1", "y2", "p"});
  const int M = sol.coarse_nodes;
  for (int k = 0; k <= sol.steps(); ++k)
    for (int j = 0; j < M; ++j) {
      const Vec2 y = sol.node(k, j);
      csv.cell(sol.times[k]).cell(j).cell(kTwoPi * j / M).cell(y.x()).cell(y.y()).cell(sol.p(j, k));
      csv.end();
    }
}

void write_hits(const fs::path& path, const std::string& command, const Scenario& scenario, const McResult& mc) {
  CsvFile csv(path, command, scenario, {"path", "t", "u"});
  for (const McHit& h : mc.hits) {
    csv.cell(h.path).cell(h.time).cell(h.u);
    csv.end();
  }
}

McConfig mc_config(const Scenario& s) {
  McConfig cfg = s.montecarlo;
  cfg.horizon = s.horizon;
  return cfg;
}

Json solve_results(const DensitySolution& sol) {
  return {{"steps", sol.steps()},
          {"nodes", sol.coarse_nodes},
          {"fine_factor", sol.fine_factor},
          {"picard_iterations", sol.picard_iterations},
          {"picard_window", sol.picard_window},
          {"max_density", sol.p.maxCoeff()},
          {"min_density", sol.p.minCoeff()},
          {"fpt_cdf_at_horizon", FptCdfTable(sol)(sol.times.back())}};
}

Json mc_results(const McResult& mc) {
  return {{"paths", mc.paths},
          {"survivors", mc.survivors},
          {"hits", mc.hit_count()},
          {"ecdf_at_horizon", static_cast<double>(mc.hit_count()) / mc.paths},
          {"dkw_band_99", mc.dkw_band(0.01)}};
}

// ---------------------------------------------------------------------------
// validate

std::vector<double> sample_times(double T) { return {0.0, T / 3.0, 2.0 * T / 3.0, T}; }

std::vector<CheckRow> flow_rows(const MovingDomain& d) {
  const FlowMap& flow = d.flow();
  std::vector<Vec2> points{d.marker()};
  for (int i = 0; i < 8; ++i) points.push_back(d.boundary().point(kTwoPi * i / 8));
  const std::vector<double> ts = sample_times(d.horizon());
  double identity = 0.0, composition = 0.0, inversion = 0.0;
  for (const Vec2& x : points)
    for (std::size_t a = 0; a < ts.size(); ++a) {
      identity = std::max(identity, (flow.advance(x, ts[a], ts[a]) - x).norm());
      for (std::size_t b = a + 1; b < ts.size(); ++b) {
        const Vec2 y = flow.advance(x, ts[a], ts[b]);
        inversion = std::max(inversion, (flow.inverse(y, ts[b], ts[a]) - x).norm());
        for (std::size_t c = b + 1; c < ts.size(); ++c)
          composition = std::max(composition, (flow.advance(y, ts[b], ts[c]) - flow.advance(x, ts[a], ts[c])).norm());
      }
    }
  return {{"flow_identity", identity, kFlowTolerance, identity <= kFlowTolerance, ""},
          {"flow_composition", composition, kFlowTolerance, composition <= kFlowTolerance, ""},
          {"flow_inversion", inversion, kFlowTolerance, inversion <= kFlowTolerance, ""}};
}

CheckRow normals_row(const MovingDomain& d, int M) {
  int wrong = 0, total = 0;
  for (double t : sample_times(d.horizon())) {
    const BoundarySlice slice = d.boundary_at(t, M);
    for (int j = 0; j < slice.size(); ++j, ++total) {
      const Vec2 y = slice.nodes.col(j), n = slice.normals.col(j);
      if (d.contains(y + 1e-6 * n, t) || !d.contains(y - 1e-6 * n, t)) ++wrong;
    }
  }
  return {"normals_outward", static_cast<double>(wrong), 0.0, wrong == 0, std::to_string(total) + " nodes"};
}

// The chord-normal ratio is at most half the largest curvature on convex curves and equals it on
// circles; the value is reported as that ratio.
CheckRow lemma1_row(const MovingDomain& d, int M) {
  const bool circle = d.boundary().family() == ReferenceBoundary::Family::circle;
  double worst = circle ? 1.0 : 0.0;
  for (double t : {0.0, d.horizon()}) {
    const BoundarySlice slice = d.boundary_at(t, std::max(M, 32));
    const double ratio = lemma1_constant(slice) / (0.5 * slice.curvature.cwiseAbs().maxCoeff());
    if (circle)
      worst = std::abs(ratio - 1.0) > std::abs(worst - 1.0) ? ratio : worst;
    else
      worst = std::max(worst, ratio);
  }
  const bool pass = circle ? std::abs(worst - 1.0) <= kLemma1Tolerance : worst <= 1.0 + kLemma1Tolerance;
  return {"lemma1_constant", worst, 1.0 + kLemma1Tolerance, pass, circle ? "ratio to 1/(2R)" : "ratio to max curvature / 2"};
}

CheckRow lemma2_row(const MovingDomain& d) {
  double worst = 0.0;
  for (double t : {0.5 * d.horizon(), d.horizon()}) {
    const BoundarySlice slice = d.boundary_at(t, 8);
    for (int j = 0; j < slice.size(); ++j)
      worst = std::max(worst, std::abs(lemma2_integral(d, slice.nodes.col(j), t, t - kLemma2Lag) - 1.0));
  }
  return {"lemma2_integral", worst, kLemma2Tolerance, worst <= kLemma2Tolerance, "t - s = 1e-4"};
}

CheckRow jump_row(const MovingDomain& d) {
  const JumpRelation jr = jump_relation(d, 0.0, 0.5 * d.horizon(), {1e-2, 1e-3, 1e-4});
  bool pass = jr.gaps.back() <= kJumpFinalGap;
  for (std::size_t i = 1; i < jr.gaps.size(); ++i) pass = pass && jr.gaps[i] * kJumpShrink <= jr.gaps[i - 1];
  char detail[160];
  std::snprintf(detail, sizeof detail, "gaps %.3g %.3g %.3g", jr.gaps[0], jr.gaps[1], jr.gaps[2]);
  return {"jump_relation", jr.gaps.back(), kJumpFinalGap, pass, detail};
}

CheckRow disk_row(const Scenario& s, const DensitySolution& sol) {
  const double R = s.boundary.a();
  double worst = 0.0;
  for (int k = 1; k <= sol.steps(); ++k) {
    const double t = sol.times[k];
    if (t < 0.1 - 1e-12) continue;
    const double f = disk_fpt_density(R, t);
    for (int j = 0; j < sol.coarse_nodes; ++j) worst = std::max(worst, std::abs(kTwoPi * R * sol.p(j, k) - f) / f);
  }
  return {"disk_oracle", worst, kDiskTolerance, worst <= kDiskTolerance, "relative, t >= 0.1"};
}

CheckRow halfplane_row(const Scenario& s, const DensitySolution& sol) {
  const double line = s.boundary.center().y() - s.boundary.b();
  const Vec2 r0 = s.start();
  const double y0 = r0.y() - line;
  double worst = 0.0;
  int compared = 0;
  for (int k = 1; k <= sol.steps(); ++k)
    for (int j = 0; j < sol.coarse_nodes; ++j) {
      const Vec2 y = sol.node(k, j);
      if (std::abs(y.y() - line) > 1e-3) continue;
      const double oracle = halfplane_joint_density(y0, y.x() - r0.x(), sol.times[k]);
      if (oracle <= kHalfplaneFloor) continue;
      worst = std::max(worst, std::abs(sol.p(j, k) - oracle) / oracle);
      ++compared;
    }
  return {"halfplane_oracle", worst, kHalfplaneTolerance, compared > 0 && worst <= kHalfplaneTolerance,
          std::to_string(compared) + " nodes above 1e-4"};
}

// Mass balance needs smooth initial data: the scenario's bump, or a bump about the point source.
BumpSource balance_bump(const Scenario& s, const MovingDomain& d) {
  if (!s.source.is_point()) return s.source.as_bump();
  const Vec2 c = s.start();
  const double dist = d.project_reference(d.flow().inverse(c, 0.0, 0.0), true).distance;
  return BumpSource{c, std::max(8.0, std::ceil(2.0 / dist))};
}

std::vector<MassBalance> mass_balances(const Scenario& s, const MovingDomain& d, const SolverConfig& cfg) {
  const UFieldContext ctx = prepare_u_field(d, balance_bump(s, d), cfg);
  const int K = ctx.smooth->steps();
  std::vector<MassBalance> out;
  const int windows = std::min(10, K);
  for (int w = 0; w < windows; ++w) {
    const int a = K * w / windows, b = K * (w + 1) / windows;
    out.push_back(mass_balance(ctx.smooth->times[a], ctx.smooth->times[b], ctx));
  }
  out.push_back(mass_balance(0.0, ctx.smooth->times[K], ctx));
  return out;
}

CheckRow mass_row(const std::vector<MassBalance>& balances) {
  double worst = 0.0;
  for (const MassBalance& b : balances) worst = std::max(worst, b.abs_error);
  return {"mass_balance", worst, kMassTolerance, worst <= kMassTolerance, std::to_string(balances.size()) + " windows"};
}

std::vector<CheckRow> run_validation(const Scenario& s, std::vector<MassBalance>* balances) {
  const MovingDomain d = s.domain();
  std::vector<CheckRow> rows = flow_rows(d);
  rows.push_back(normals_row(d, s.solver.nodes));
  rows.push_back(lemma1_row(d, s.solver.nodes));
  rows.push_back(lemma2_row(d));
  rows.push_back(jump_row(d));
  if (s.oracle != OracleKind::none) {
    const DensitySolution sol = solve(d, s.source, s.solver);
    rows.push_back(s.oracle == OracleKind::disk ? disk_row(s, sol) : halfplane_row(s, sol));
  }
  const std::vector<MassBalance> mb = mass_balances(s, d, s.solver);
  rows.push_back(mass_row(mb));
  if (balances) *balances = mb;
  return rows;
}

// ---------------------------------------------------------------------------
// commands

int cmd_solve(const Scenario& s, const fs::path& out, std::ostream& log) {
  const DensitySolution sol = solve(s.domain(), s.source, s.solver);
  write_density(out / "density.csv", "solve", s, sol);
  write_summary(out / "solve.json", "solve", s, solve_results(sol));
  log << "solve: " << sol.steps() << " steps x " << sol.coarse_nodes << " nodes, P[tau <= T] = "
      << FptCdfTable(sol)(sol.times.back()) << "\n";
  return kExitOk;
}

int cmd_simulate(const Scenario& s, const fs::path& out, std::ostream& log) {
  const McResult mc = simulate(s.domain(), s.start(), mc_config(s));
  write_hits(out / "hits.csv", "simulate", s, mc);
  write_summary(out / "simulate.json", "simulate", s, mc_results(mc));
  log << "simulate: " << mc.hit_count() << " of " << mc.paths << " paths hit before T\n";
  return kExitOk;
}

int cmd_validate(const Scenario& s, const fs::path& out, std::ostream& log) {
  std::vector<MassBalance> balances;
  const std::vector<CheckRow> rows = run_validation(s, &balances);
  {
    CsvFile csv(out / "mass_balance.csv", "validate", s, {"t1", "t2", "delta", "flux", "dF", "abs_error"});
    for (const MassBalance& b : balances) {
      csv.cell(b.t1).cell(b.t2).cell(b.delta).cell(b.flux).cell(b.dF).cell(b.abs_error);
      csv.end();
    }
  }
  write_rows(out / "validate.csv", "validate", s, rows);
  write_summary(out / "validate.json", "validate", s, {{"checks", rows_json(rows)}, {"pass", all_pass(rows)}});
  print_rows(rows, log);
  return all_pass(rows) ? kExitOk : kExitValidation;
}

int cmd_compare(const Scenario& s, const fs::path& out, std::ostream& log) {
  const MovingDomain d = s.domain();
  const McResult mc = simulate(d, s.start(), mc_config(s));
  if (mc.hit_count() < 1000)
    throw TooFewHits("compare needs at least 1000 hits, got " + std::to_string(mc.hit_count()) + " from " +
                     std::to_string(mc.paths) + " paths");
  const DensitySolution sol = solve(d, s.source, s.solver);
  const FptCdfTable cdf(sol);
  const KsResult ks = ks_compare(mc, cdf);
  const SurvivalCurve curve = survival_curve(sol, s.survival_stride);

  double conservation = 0.0;
  {
    CsvFile csv(out / "survival.csv", "compare", s, {"t", "S", "CDF", "S+CDF"});
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
      const double total = curve.raw[i] + curve.cdf[i];
      conservation = std::max(conservation, std::abs(total - 1.0));
      csv.cell(curve.times[i]).cell(curve.raw[i]).cell(curve.cdf[i]).cell(total);
      csv.end();
    }
  }
  {
    CsvFile csv(out / "ks.csv", "compare", s, {"t", "mc_cdf", "solver_cdf"});
    for (double t : sol.times) {
      csv.cell(t).cell(mc.ecdf(t)).cell(cdf(t));
      csv.end();
    }
  }
  write_density(out / "density.csv", "compare", s, sol);
  write_hits(out / "hits.csv", "compare", s, mc);

  const std::vector<CheckRow> rows = {
      {"ks_statistic", ks.statistic, ks.threshold, ks.pass, std::to_string(ks.samples) + " paths, 99% DKW"},
      {"conservation", conservation, kConservationTolerance, conservation <= kConservationTolerance,
       std::to_string(curve.times.size()) + " times"}};
  write_rows(out / "compare.csv", "compare", s, rows);
  Json results = {{"solver", solve_results(sol)}, {"montecarlo", mc_results(mc)}, {"checks", rows_json(rows)},
                  {"pass", all_pass(rows)}};
  write_summary(out / "compare.json", "compare", s, results);
  print_rows(rows, log);
  return all_pass(rows) ? kExitOk : kExitValidation;
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", value);
  return buf;
}

std::vector<CheckRow> validation_rows(const Scenario& scenario, int threads) {
  Scenario s = scenario;
  s.solver.threads = resolve_threads(threads);
  return run_validation(s, nullptr);
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& log) {
  try {
    Scenario s = load_scenario(options.scenario);
    if (options.seed) s.montecarlo.seed = *options.seed;
    const int threads = resolve_threads(options.threads);
    s.solver.threads = threads;
    s.montecarlo.threads = threads;
    const fs::path out = options.out.empty() ? fs::path(s.output) : fs::path(options.out);
    fs::create_directories(out);
    log << command << " " << s.name << " -> " << out.string() << "\n";
    if (command == "solve") return cmd_solve(s, out, log);
    if (command == "simulate") return cmd_simulate(s, out, log);
    if (command == "validate") return cmd_validate(s, out, log);
    if (command == "compare") return cmd_compare(s, out, log);
    log << "error: unknown command \"" << command << "\"\n";
    return kExitConfig;
  } catch (const WindowTooLong& e) {
    log << "error: " << e.what() << "\n";  // the message names window-too-long
    return kExitDiverged;
  } catch (const SolverDiverged& e) {
    log << "error: solver-diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const IntegrationDiverged& e) {
    log << "error: solver-diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    log << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TooFewHits& e) {
    log << "error: too-few-hits: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace fpt
