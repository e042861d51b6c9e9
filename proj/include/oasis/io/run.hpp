#pragma once

// Subcommand orchestration: eigen, solve, sweep, blowup, annulus, selftest.
// Each run writes results.csv and meta.csv into the output directory, plus
// trace.csv with --trace and *.pgm with --heatmaps.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oasis/blowup.hpp"
#include "oasis/io/config.hpp"
#include "oasis/io/output.hpp"

namespace oasis::io {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kFailure = 1, kUnresolved = 2 };

namespace detail {

inline std::string num(double v) { return fmt17(v); }

struct Spectra {
  EigenResult omega;
  std::optional<EigenResult> oasis;
  std::optional<EigenResult> zero;  // unknowns where k vanishes
};

class Run {
 public:
  Run(const RunConfig& cfg, std::string cmd)
      : cfg_(cfg), cmd_(std::move(cmd)), hash_(config_hash(cfg)), out_(cfg.out),
        trace_({"run", "iteration", "value", "config_hash"}) {}

  int execute() {
    const auto t0 = std::chrono::steady_clock::now();
    const long checks0 = OrderingAudit::checks().load();
    const long viol0 = OrderingAudit::violations().load();
    require();
    std::filesystem::create_directories(out_);
    meta("config_hash", hash_);
    meta("subcommand", cmd_);
    meta("version", kVersion);
    int code = kOk;
    if (cmd_ == "eigen") code = eigen();
    else if (cmd_ == "solve") code = sweep(true);
    else if (cmd_ == "sweep") code = sweep(false);
    else if (cmd_ == "blowup") code = blowup();
    else if (cmd_ == "annulus") code = annulus();
    else if (cmd_ == "selftest") code = selftest();
    meta("ordering_checks", std::to_string(OrderingAudit::checks().load() - checks0));
    meta("ordering_violations", std::to_string(OrderingAudit::violations().load() - viol0));
    meta("workers", std::to_string(cfg_.workers));
    meta("wall_time_s",
         num(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()));
    CsvTable m({"key", "value"});
    for (auto& [k, v] : meta_) m.add({k, v});
    m.write(out_ / "meta.csv");
    if (cfg_.trace) trace_.write(out_ / "trace.csv");
    return code;
  }

 private:
  void meta(const std::string& k, const std::string& v) { meta_.emplace_back(k, v); }

  void require() {
    static const char* known[] = {"eigen", "solve", "sweep", "blowup", "annulus", "selftest"};
    if (std::find(std::begin(known), std::end(known), cmd_) == std::end(known))
      throw Error("cli", "VALIDATION_ERROR", "subcommand: unknown '" + cmd_ + "'");
    validate(cfg_);
    if (cmd_ == "selftest") return;
    if (!cfg_.domain) invalid("domain", "required");
    if (cmd_ == "solve" && !cfg_.mu) invalid("mu", "required for solve");
    if (cmd_ == "sweep" && cfg_.mu_grid.empty()) invalid("mu_grid", "empty");
    if (cmd_ == "blowup" || cmd_ == "annulus") {
      if (cfg_.reaction_kind() != KKind::K2) invalid("reaction", cmd_ + " needs a K2 reaction");
      if (!cfg_.mu) invalid("mu", "required for " + cmd_);
    }
    if (cfg_.mu_units == MuUnits::Window && cfg_.reaction_kind() != KKind::K2)
      invalid("mu_units", "window units need a K2 reaction");
  }

  void common_meta(const Grid2D& g) {
    meta("grid", std::to_string(g.nx()) + "x" + std::to_string(g.ny()));
    meta("h", num(g.h()));
    meta("domain", cfg_.domain->text);
    meta("oasis", cfg_.oasis ? cfg_.oasis->text : "");
    meta("operator", cfg_.operator_spec().describe());
    meta("reaction", to_string(cfg_.reaction_kind()));
    meta("p", num(cfg_.p));
    meta("tol_cmp", num(cfg_.tol_cmp));
    meta("tol_fix", num(cfg_.tol_fix));
    meta("tol_bracket", num(cfg_.tol_bracket));
  }

  EigenOptions eigen_options() const {
    EigenOptions o;
    o.tol_bracket = cfg_.tol_bracket;
    o.max_iter = cfg_.eigen_max_iter;
    return o;
  }

  MonotoneOptions mono_options() const {
    MonotoneOptions o;
    o.tol_fix = cfg_.tol_fix;
    o.tol_cmp = cfg_.tol_cmp;
    o.max_iter = cfg_.max_iter;
    return o;
  }

  BlowupOptions blowup_options() const {
    BlowupOptions o;
    o.d_probe = cfg_.d_probe;
    o.sat_tol = cfg_.sat_tol;
    o.tol_cmp = cfg_.tol_cmp;
    o.annulus.mono = mono_options();
    return o;
  }

  Spectra spectra(const LogisticProblem& P, bool with_oasis) {
    Spectra s;
    const EigenOptions eo = eigen_options();
    const bool k2 = with_oasis && cfg_.oasis;
    parallel_for(k2 ? 3 : 1, cfg_.workers, [&](int t) {
      if (t == 0) s.omega = principal_eigen(P.op(), eo);
      if (t == 1) {
        auto m = std::make_shared<const DomainMask>(build_mask(P.grid(), cfg_.oasis->spec));
        s.oasis = principal_eigen(DiscreteOperator(cfg_.operator_spec(), m), eo);
      }
      if (t == 2) s.zero = zero_set_eigen(P, eo);
    });
    meta("lambda_lo", num(s.omega.lambda_lo));
    meta("lambda_hi", num(s.omega.lambda_hi));
    if (s.oasis) {
      meta("lambda_oasis_lo", num(s.oasis->lambda_lo));
      meta("lambda_oasis_hi", num(s.oasis->lambda_hi));
      meta("lambda_zero_set_lo", num(s.zero->lambda_lo));
      meta("lambda_zero_set_hi", num(s.zero->lambda_hi));
    }
    return s;
  }

  double resolve_mu(double v, const Spectra* s) const {
    switch (cfg_.mu_units) {
      case MuUnits::Absolute: return v;
      case MuUnits::Lambda: return v * s->omega.lambda_est;
      case MuUnits::Window: {
        const double top = std::min(s->oasis->lambda_lo, s->zero->lambda_lo);
        return s->omega.lambda_hi + v * (top - s->omega.lambda_hi);
      }
    }
    return v;
  }

  [[noreturn]] static void invalid(const std::string& field, const std::string& msg) {
    throw Error("cli", "VALIDATION_ERROR", field + ": " + msg);
  }

  int eigen() {
    const Grid2D g = cfg_.grid();
    common_meta(g);
    const OperatorSpec spec = cfg_.operator_spec();
    std::vector<std::pair<std::string, DomainSpec>> doms{{"domain", cfg_.domain->spec}};
    if (cfg_.oasis) doms.emplace_back("oasis", cfg_.oasis->spec);
    std::vector<EigenResult> res(doms.size());
    std::vector<std::shared_ptr<const DomainMask>> masks(doms.size());
    const EigenOptions eo = eigen_options();
    parallel_for(static_cast<int>(doms.size()), cfg_.workers, [&](int t) {
      masks[t] = std::make_shared<const DomainMask>(build_mask(g, doms[t].second));
      res[t] = principal_eigen(DiscreteOperator(spec, masks[t]), eo);
    });
    CsvTable tab({"domain", "operator", "lambda_lo", "lambda_hi", "iterations", "residual",
                  "config_hash"});
    for (std::size_t t = 0; t < doms.size(); ++t) {
      const EigenResult& e = res[t];
      tab.add({doms[t].second.describe(), spec.describe(), num(e.lambda_lo), num(e.lambda_hi),
               std::to_string(e.iterations), num(e.residual), hash_});
      meta("eigen_status_" + doms[t].first, to_string(e.status));
      if (cfg_.heatmaps) emit_heatmap(e.phi, masks[t].get(), out_ / ("phi_" + doms[t].first + ".pgm"));
      if (cfg_.trace)
        for (std::size_t k = 0; k < e.history.size(); ++k)
          trace_.add({"eigen:" + doms[t].first, std::to_string(k + 1),
                      num(e.history[k].second - e.history[k].first), hash_});
    }
    tab.write(out_ / "results.csv");
    bool ok = true;
    for (const auto& e : res) ok = ok && e.status == EigenStatus::Converged;
    return ok ? kOk : kFailure;
  }

  struct PointRun {
    double mu = 0.0;
    Classification c;
    std::vector<std::vector<std::string>> trace;
  };

  int sweep(bool single) {
    const Grid2D g = cfg_.grid();
    common_meta(g);
    const OperatorSpec spec = cfg_.operator_spec();
    const LogisticProblem P0 = LogisticProblem::make(g, cfg_.domain->spec, spec, cfg_.reaction(0.0));
    const bool k2 = cfg_.reaction_kind() == KKind::K2;
    const Spectra S = spectra(P0, k2);
    std::vector<double> mus = single ? std::vector<double>{*cfg_.mu} : cfg_.mu_grid;
    for (double& m : mus) m = resolve_mu(m, &S);

    ClassifyOptions co;
    co.mono = mono_options();
    co.barriers.eigen = eigen_options();
    if (S.zero) co.barriers.zero_set_eigen = &*S.zero;
    std::vector<PointRun> pts(mus.size());
    parallel_for(static_cast<int>(mus.size()), cfg_.workers, [&](int t) {
      PointRun& pt = pts[t];
      pt.mu = mus[t];
      ClassifyOptions o = co;
      const std::string tag = "mu=" + num(pt.mu);
      if (cfg_.trace)
        o.mono.trace = [&pt, tag, this](int it, double step) {
          pt.trace.push_back({tag, std::to_string(it), num(step), hash_});
        };
      pt.c = classify_mu(P0.with_mu(pt.mu), S.omega, S.oasis ? &*S.oasis : nullptr, o);
    });

    std::vector<int> oasis_nodes;
    if (cfg_.oasis) oasis_nodes = build_mask(g, cfg_.oasis->spec).nodes();
    CsvTable tab({"mu", "status", "sup_norm", "sup_norm_oasis", "iterations", "residual",
                  "C_boundary_fit", "config_hash"});
    const std::string nan = "nan";
    int code = kOk;
    double mono_violation = 0.0;
    const Field* prev = nullptr;
    for (std::size_t t = 0; t < pts.size(); ++t) {
      const PointRun& pt = pts[t];
      const Classification& c = pt.c;
      if (c.verdict == Verdict::Unresolved) code = std::max<int>(code, kUnresolved);
      if (!c.agrees) {
        code = kFailure;
        std::cerr << "mu=" << num(pt.mu) << ": classification " << to_string(c.verdict)
                  << " disagrees with the pipeline (" << (c.pipeline_error.empty() ? "converged" : c.pipeline_error)
                  << ")\n";
      }
      for (auto& r : pt.trace) trace_.add(r);
      if (!c.pipeline_success || !c.report) {
        tab.add({num(pt.mu), to_string(c.verdict), nan, nan, nan, nan, nan, hash_});
        continue;
      }
      const MonotoneReport& rep = *c.report;
      const Field& u = rep.solution;
      std::string sup_oasis = nan;
      if (cfg_.oasis) {
        double m = 0.0;
        for (int n : oasis_nodes) m = std::max(m, u[n]);
        sup_oasis = num(m);
      }
      const double C = boundary_constant(u, Field(), P0.mask(), cfg_.domain->spec, cfg_.collar_width());
      tab.add({num(pt.mu), to_string(c.verdict), num(rep.sup), sup_oasis,
               std::to_string(rep.iterations), num(rep.residual), num(C), hash_});
      if (prev)
        for (int n : P0.mask().nodes())
          mono_violation = std::max(mono_violation, (*prev)[n] - u[n]);
      prev = &u;
      if (cfg_.heatmaps)
        emit_heatmap(u, &P0.mask(), out_ / (single ? std::string("u.pgm") : "u_" + std::to_string(t) + ".pgm"));
    }
    tab.write(out_ / "results.csv");
    if (!single) meta("mu_monotone_violation", num(mono_violation));
    if (!single && !cfg_.eps_seq.empty()) asymptotics(P0, S);
    return code;
  }

  void asymptotics(const LogisticProblem& P0, const Spectra& S) {
    if (cfg_.reaction_kind() == KKind::K1) {
      std::vector<double> eps;
      for (double f : cfg_.eps_seq) eps.push_back(f * S.omega.lambda_est);
      const LowTable t = asymptotics_low(P0, S.omega, eps, mono_options());
      CsvTable tab({"eps", "mu", "sup_norm", "distance_phi", "iterations", "config_hash"});
      for (const auto& r : t.rows)
        tab.add({num(r.eps), num(r.mu), num(r.sup), num(r.distance), std::to_string(r.iterations), hash_});
      tab.write(out_ / "asymptotics.csv");
      meta("asymptotics_sup_decreasing", t.sup_decreasing ? "true" : "false");
      meta("asymptotics_distance_decreasing", t.distance_decreasing ? "true" : "false");
      return;
    }
    const double l0 = S.oasis->lambda_lo;
    std::vector<double> eps;
    for (double f : cfg_.eps_seq) eps.push_back(f * l0);
    // minimal blow-up candidate at the lowest mu of the sequence
    ReactionSpec r = cfg_.reaction(l0 - eps.front());
    const BlowupResult mn = minimal_blowup(P0.grid(), cfg_.domain->spec, cfg_.operator_spec(), r,
                                           cfg_.data_sequence(), blowup_options());
    BarrierOptions bo;
    bo.eigen = eigen_options();
    bo.zero_set_eigen = &*S.zero;
    const HighTable t = asymptotics_high(P0, S.omega, *S.oasis, eps, &mn.minimal_candidate,
                                         mn.probe, mono_options(), bo);
    CsvTable tab({"eps", "mu", "resolved", "inf_oasis", "distance_oasis", "probe_distance",
                  "iterations", "config_hash"});
    for (const auto& row : t.rows)
      tab.add({num(row.eps), num(row.mu), row.resolved ? "true" : "false", num(row.inf_oasis),
               num(row.distance_oasis), num(row.probe_distance), std::to_string(row.iterations), hash_});
    tab.write(out_ / "asymptotics.csv");
    meta("asymptotics_inf_increasing", t.inf_increasing ? "true" : "false");
    meta("asymptotics_distance_decreasing", t.distance_decreasing ? "true" : "false");
    meta("asymptotics_probe_decreasing", t.probe_decreasing ? "true" : "false");
  }

  double problem_mu(const Grid2D& g) {
    if (cfg_.mu_units == MuUnits::Absolute) return *cfg_.mu;
    const LogisticProblem P0 = LogisticProblem::make(g, cfg_.domain->spec, cfg_.operator_spec(), cfg_.reaction(0.0));
    const Spectra S = spectra(P0, true);
    return resolve_mu(*cfg_.mu, &S);
  }

  int blowup() {
    const Grid2D g = cfg_.grid();
    common_meta(g);
    const double mu = problem_mu(g);
    meta("mu", num(mu));
    const ReactionSpec r = cfg_.reaction(mu);
    const OperatorSpec spec = cfg_.operator_spec();
    const BlowupOptions bo = blowup_options();
    std::vector<double> infl;
    for (double s : cfg_.inflations) infl.push_back(s * g.h());
    BlowupResult mn = minimal_blowup(g, cfg_.domain->spec, spec, r, cfg_.data_sequence(), bo);
    BlowupResult mx = maximal_blowup(g, cfg_.domain->spec, spec, r, infl, mn.data_sequence.back(), bo);
    CsvTable tab({"side", "parameter", "sup_probe", "saturation", "config_hash"});
    for (const auto& st : mn.steps)
      tab.add({"minimal", num(st.parameter), num(st.sup_probe), num(st.saturation), hash_});
    for (const auto& st : mx.steps)
      tab.add({"maximal", num(st.parameter), num(st.sup_probe), num(st.saturation), hash_});
    tab.write(out_ / "results.csv");
    meta("gap", num(mn.gap));
    meta("probe_nodes", std::to_string(mn.probe.size()));
    meta("minimal_saturation", num(mn.saturation));
    meta("minimal_saturated", mn.saturated ? "true" : "false");
    meta("minimal_C_fit", num(mn.steps.back().C_fit));
    meta("inner_growth", num(mn.inner_growth));
    meta("sandwich_excess", num(sandwich_excess(mn.minimal_candidate, mx.maximal_candidate, mx.probe)));
    meta("maximal_saturation", num(mx.saturation));
    if (cfg_.heatmaps) {
      auto m1 = build_mask(g, DomainSpec::difference(cfg_.domain->spec, r.oasis));
      emit_heatmap(mn.minimal_candidate, &m1, out_ / "minimal.pgm");
      const DomainSpec hole = infl.back() > 0.0 ? r.oasis.inflated(infl.back()) : r.oasis;
      auto m2 = build_mask(g, DomainSpec::difference(cfg_.domain->spec, hole));
      emit_heatmap(mx.maximal_candidate, &m2, out_ / "maximal.pgm");
    }
    return kOk;
  }

  int annulus() {
    const Grid2D g = cfg_.grid();
    common_meta(g);
    const double mu = problem_mu(g);
    meta("mu", num(mu));
    const ReactionSpec r = cfg_.reaction(mu);
    AnnulusOptions ao;
    ao.delta_seq = cfg_.delta_seq;
    ao.mono = mono_options();
    ao.eigen = eigen_options();
    if (cfg_.trace)
      ao.mono.trace = [this](int it, double step) {
        trace_.add({"annulus", std::to_string(it), num(step), hash_});
      };
    AnnulusSolver S(g, cfg_.domain->spec, r.oasis, cfg_.operator_spec(), r, 0.0, ao);
    const auto res = S.solve(cfg_.inner_value);
    CsvTable tab({"delta", "sup_norm", "config_hash"});
    for (const auto& [d, u] : res.by_delta) {
      double m = 0.0;
      for (int n : S.mask().nodes()) m = std::max(m, u[n]);
      tab.add({num(d), num(m), hash_});
    }
    tab.write(out_ / "results.csv");
    meta("C_fit", num(res.C_fit));
    meta("C_global", num(res.C_global));
    meta("supersolution_scale", num(res.M));
    meta("iterations", std::to_string(res.report.iterations));
    meta("residual", num(res.report.residual));
    meta("certified", res.report.certified() ? "true" : "false");
    if (cfg_.heatmaps) emit_heatmap(res.solution, &S.mask(), out_ / "annulus.pgm");
    return res.report.certified() ? kOk : kFailure;
  }

  // Quick end-to-end checks on small grids; independent of the config domain.
  int selftest() {
    CsvTable tab({"check", "value", "threshold", "pass", "config_hash"});
    bool all = true;
    auto row = [&](const std::string& name, double v, double thr) {
      const bool ok = v <= thr;
      all = all && ok;
      tab.add({name, num(v), num(thr), ok ? "true" : "false", hash_});
    };
    const Grid2D g = Grid2D::square(33);
    const DomainSpec sq = DomainSpec::rect({0, 0}, {1, 1});
    auto P = LogisticProblem::make(g, sq, OperatorSpec::laplacian(), ReactionSpec{});
    const EigenResult e = principal_eigen(P.op());
    const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
    row("eigen_square_relative_error", std::abs(e.lambda_est - exact) / exact, 0.03);

    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double hom = 0.0, sand = 0.0;
    const OperatorSpec pp = OperatorSpec::pucci_plus(1.0, 3.0);
    for (int k = 0; k < 200; ++k) {
      const SymMat2 M{U(rng), U(rng), U(rng)};
      const double t = 1.0 + 4.0 * std::abs(U(rng));
      const double f = evaluate(pp, {}, M);
      hom = std::max(hom, std::abs(evaluate(pp, {}, M * t) - t * f) / (1.0 + std::abs(t * f)));
      const double a = std::abs(U(rng)), c = std::abs(U(rng)), b = U(rng) * std::sqrt(a * c);
      const SymMat2 Q{a, b, c};
      const double d = evaluate(pp, {}, M + Q) - f;
      sand = std::max({sand, pp.lambda * Q.trace() - d - 1e-12, d - pp.Lambda * Q.trace() - 1e-12, 0.0});
    }
    row("operator_homogeneity", hom, 1e-12);
    row("operator_sandwich", sand, 1e-12);

    auto m17 = std::make_shared<const DomainMask>(build_mask(Grid2D::square(17), DomainSpec::disk({0.5, 0.5}, 0.45)));
    DiscreteOperator op(pp, m17);
    std::vector<double> u(op.size()), bv(op.cuts());
    for (double& x : u) x = U(rng);
    for (double& x : bv) x = U(rng);
    std::uniform_int_distribution<int> pick(0, op.size() - 1);
    const std::vector<double> base = op.apply(u, bv);
    double bad = 0.0;
    for (int k = 0; k < 200; ++k) {
      const int j = pick(rng);
      std::vector<double> v = u;
      v[j] += 0.1;
      const std::vector<double> raised = op.apply(v, bv);
      for (int i = 0; i < op.size(); ++i)
        bad = std::max(bad, i == j ? raised[i] - base[i] : base[i] - raised[i]);
    }
    row("discrete_monotonicity", bad, 1e-12);

    const long before = OrderingAudit::violations().load();
    auto Q = P.with_mu(2.0 * e.lambda_est);
    const MonotoneReport rep = monotone_solve(Q, build_barriers(Q, e));
    row("monotone_certified", rep.certified() ? 0.0 : 1.0, 0.0);
    row("ordering_violations", static_cast<double>(OrderingAudit::violations().load() - before), 0.0);
    tab.write(out_ / "results.csv");
    return all ? kOk : kFailure;
  }

  const RunConfig& cfg_;
  std::string cmd_;
  std::string hash_;
  std::filesystem::path out_;
  CsvTable trace_;
  std::vector<std::pair<std::string, std::string>> meta_;
};

}  // namespace detail

// Exit code 0 on success, 2 when some classification is UNRESOLVED, 1 on errors.
inline int run(const std::string& subcommand, const RunConfig& cfg, std::ostream& err = std::cerr) {
  try {
    return detail::Run(cfg, subcommand).execute();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kFailure;
}

}  // namespace oasis::io
