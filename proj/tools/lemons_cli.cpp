#include "lemons/instance_io.hpp"
#include "lemons/lp.hpp"
#include "lemons/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lemons;

namespace {

enum ExitCode { kOk = 0, kInputError = 1, kAssumption = 2, kCertificate = 3, kOracle = 4 };

struct Options {
  std::string command, instance, objective = "volume", alpha, out;
  double beta = 0.5, delta = 1e-3;
  int n = 2000, lp_n = 100;
  bool oracle_only = false;
};

/// Stops the pipeline; `code` becomes the exit status.
struct Abort {
  int code;
  std::string status, reason;
};

struct Failure {
  int code;
  std::string status, reason;
};

json interval(const Interval& i) { return json::array({i.lo, i.hi}); }

std::ofstream open_csv(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Abort{kInputError, "input-error", "cannot write " + path.string()};
  os << "# schema=1\n";
  return os;
}

class Pipeline {
 public:
  explicit Pipeline(Options opt) : opt_(std::move(opt)) {}

  int run() {
    out_ = opt_.out.empty() ? fs::path(std::getenv("LEMONS_OUT_DIR") ? std::getenv("LEMONS_OUT_DIR") : "lemons_out")
                            : fs::path(opt_.out);
    report_["command"] = opt_.command;
    report_["instance_arg"] = opt_.instance;
    int code = kOk;
    try {
      fs::create_directories(out_);
      load();
      dispatch();
    } catch (const Abort& a) {
      failures_.push_back({a.code, a.status, a.reason});
    } catch (const ValidationError& e) {
      failures_.push_back({kInputError, "input-error", e.what()});
    } catch (const std::exception& e) {
      failures_.push_back({kInputError, "error", e.what()});
    }
    if (!failures_.empty()) code = failures_.front().code;
    report_["status"] = failures_.empty() ? "ok" : failures_.front().status;
    report_["failure_reason"] = failures_.empty() ? json(nullptr) : json(failures_.front().reason);
    json all = json::array();
    for (const auto& f : failures_) all.push_back({{"status", f.status}, {"reason", f.reason}, {"exit_code", f.code}});
    report_["failures"] = all;
    report_["exit_code"] = code;
    write_report();
    std::cout << "status: " << report_["status"].get<std::string>();
    if (!failures_.empty()) std::cout << " (" << failures_.front().reason << ')';
    std::cout << "\nreport: " << (out_ / "report.json").string() << '\n';
    return code;
  }

 private:
  void load() {
    if (opt_.instance == "canonical" || opt_.instance == "CANON") {
      file_.name = "canonical";
      file_.market = canonical_instance();
    } else {
      if (!fs::exists(opt_.instance)) throw Abort{kInputError, "input-error", "instance file not found: " + opt_.instance};
      file_ = load_instance(opt_.instance);
      base_dir_ = fs::path(opt_.instance).parent_path();
    }
    if (opt_.n < 10 || opt_.n > 5000) throw Abort{kInputError, "input-error", "--n must lie in [10, 5000]"};
    if (opt_.lp_n < 2 || opt_.lp_n > 500) throw Abort{kInputError, "input-error", "--lp-n must lie in [2, 500]"};

    json obj;
    if (opt_.objective == "volume") {
      PiecewisePoly alpha = !opt_.alpha.empty() ? parse_weight_spec(opt_.alpha, base_dir_)
                            : file_.weight     ? *file_.weight
                                               : unit_volume().alpha;
      objective_ = VolumeObjective{alpha};
      obj = {{"kind", "volume"}, {"alpha", opt_.alpha.empty() ? (file_.weight ? "instance weight" : "const:1") : opt_.alpha}};
    } else if (opt_.objective == "price-surplus") {
      if (!(opt_.beta >= 0 && opt_.beta <= 1)) throw Abort{kInputError, "input-error", "--beta must lie in [0, 1]"};
      objective_ = PriceSurplusObjective{opt_.beta};
      obj = {{"kind", "price-surplus"}, {"beta", opt_.beta}};
    } else {
      throw Abort{kInputError, "input-error", "--objective must be volume or price-surplus"};
    }
    report_["objective"] = obj;

    json inst = {{"name", file_.name}};
    if (file_.market) {
      inst["kind"] = "continuum";
      try {
        const auto prof = find_crossings(*file_.market);
        inst["regime"] = to_string(prof.regime);
        inst["crossings"] = prof.crossings;
        if (prof.regime == Regime::GainsAtTop) inst["theta_star"] = prof.crossings.front();
      } catch (const DegenerateTangencyError& e) {
        report_["instance"] = inst;
        throw Abort{kAssumption, "assumption-failure", e.what()};
      }
    } else {
      inst["kind"] = "atoms";
      inst["types"] = std::vector<double>(file_.atoms->types.begin(), file_.atoms->types.end());
    }
    report_["instance"] = inst;
  }

  void dispatch() {
    const std::string& c = opt_.command;
    if (c == "oracle" || (c == "analyze" && (opt_.oracle_only || !file_.market))) {
      oracle();
      return;
    }
    if (c == "export-lp") {
      export_lp();
      return;
    }
    if (!file_.market) throw Abort{kInputError, "input-error", "command '" + c + "' needs continuum primitives"};
    construct();
    if (c == "build-signal") return;
    verify();
    if (c == "verify") return;
    certify();
    if (c == "certify") return;
    oracle();
  }

  void construct() {
    const auto& inst = *file_.market;
    try {
      plan_ = build_optimal_plan(inst, objective_);
    } catch (const EscapeError& e) {
      assumptions(std::nullopt);
      throw Abort{kAssumption, "assumption-failure", e.what()};
    } catch (const UnclassifiedRatioError& e) {
      assumptions(std::nullopt);
      throw Abort{kAssumption, "assumption-failure", e.what()};
    } catch (const NoBracketError& e) {
      assumptions(std::nullopt);
      throw Abort{kAssumption, "assumption-failure", e.what()};
    } catch (const DegenerateTangencyError& e) {
      throw Abort{kAssumption, "assumption-failure", e.what()};
    }
    validate_plan(*plan_, inst);

    json segs = json::array();
    for (const auto& s : plan_->segments)
      segs.push_back({{"kind", to_string(s.kind)}, {"types", interval(s.types)}, {"means", interval(s.means)}});
    report_["plan"] = {{"shape", plan_->shape}, {"params", plan_->params}, {"notes", plan_->notes}, {"segments", segs}};
    std::cout << "plan: " << plan_->shape << '\n';
    for (const auto& n : plan_->notes) std::cout << "note: " << n << '\n';

    auto plan_csv = open_csv(out_ / "plan.csv");
    plan_csv << "theta,x,kind\n";
    write_plan_csv(plan_csv, inst, *plan_);
    auto curves_csv = open_csv(out_ / "curves.csv");
    curves_csv << "label,x,a,slope,residual\n";
    int k = 0;
    for (const auto& s : plan_->segments)
      if (s.kind == SegmentKind::PoolCurve) write_curve_csv(curves_csv, inst, *s.curve, "pool" + std::to_string(k++));

    const auto it = plan_->params.find("theta_low");
    const auto rep = assumptions(it == plan_->params.end() ? std::nullopt : std::optional<double>(it->second));
    if (rep.regime == Regime::GainsAtTop && !rep.all())
      throw Abort{kAssumption, "assumption-failure", rep.notes.empty() ? "assumptions fail" : rep.notes.front()};
  }

  AssumptionReport assumptions(std::optional<double> theta_low) {
    const auto rep = check_assumptions(*file_.market, theta_low);
    report_["assumptions"] = {{"gains_at_top", rep.a1},
                              {"full_trade_infeasible", rep.a2},
                              {"single_cutoff", rep.a3},
                              {"notes", rep.notes}};
    return rep;
  }

  void verify() {
    const auto& inst = *file_.market;
    ds_ = discretize(*plan_, inst, opt_.n);
    const auto fr = check_feasibility(*ds_);
    const auto val = evaluate_objective(*ds_, objective_);
    plan_value_ = val.value;
    report_["verification"] = {{"n", opt_.n},
                               {"bp_residual", fr.bp_residual},
                               {"m_residual", fr.m_residual},
                               {"pm_residual", fr.pm_residual},
                               {"total_mass", fr.total_mass},
                               {"value", val.value},
                               {"theta_form", val.theta_form},
                               {"forms_consistent", val.consistent}};
    std::cout << "value: " << val.value << "  residuals bp/m/pm: " << fr.bp_residual << ' ' << fr.m_residual << ' '
              << fr.pm_residual << '\n';
    if (!fr.ok(1e-6)) failures_.push_back({kCertificate, "certificate-violation", "feasibility residual above 1e-6"});
  }

  void certify() {
    const auto* vol = std::get_if<VolumeObjective>(&objective_);
    if (!vol || (plan_->shape != "nam" && plan_->shape != "pool-reveal-pool")) {
      report_["certificate"] = {{"available", false},
                                {"reason", "certificates are built for weighted-volume reveal-pool and pool-reveal-pool plans"}};
      return;
    }
    const auto cert = build_dual_volume(*file_.market, vol->alpha, *plan_);
    const auto zp = verify_zp(cert, opt_.delta);
    const double gap = duality_gap(*plan_value_, cert);
    const auto slack = check_support_optimality(*ds_, cert);
    report_["certificate"] = {{"available", true},
                              {"C", cert.C()},
                              {"dual_value", cert.dual_value()},
                              {"duality_gap", gap},
                              {"zp_min_slack", zp.min_slack},
                              {"zp_argmin", json::array({zp.argmin_theta, zp.argmin_x})},
                              {"strip_delta", opt_.delta},
                              {"strip_certified", zp.strip_certified},
                              {"support_slack", slack.max_slack},
                              {"ode_residual", cert.ode_residual()},
                              {"max_abs_q", cert.max_abs_q()}};
    auto dual_csv = open_csv(out_ / "dual.csv");
    write_dual_csv(dual_csv, cert);
    std::cout << "dual: " << cert.dual_value() << "  gap: " << gap << "  zp min slack: " << zp.min_slack << '\n';
    if (!zp.ok(1e-7)) failures_.push_back({kCertificate, "certificate-violation", "dual constraint violated"});
    else if (std::abs(gap) > 1e-6) failures_.push_back({kCertificate, "certificate-violation", "duality gap above 1e-6"});
    else if (slack.max_slack > 1e-6)
      failures_.push_back({kCertificate, "certificate-violation", "complementary slackness above 1e-6"});
  }

  LpProblem lp_problem() const {
    return file_.market ? build_lp(*file_.market, objective_, opt_.lp_n) : build_lp(*file_.atoms, objective_);
  }

  void oracle() {
    const auto lp = lp_problem();
    const auto sol = solve_lp(lp);
    json o = {{"n", file_.market ? json(opt_.lp_n) : json(nullptr)},
              {"rows", lp.rows()},
              {"columns", lp.cols()},
              {"variables", lp.vars.size()},
              {"value", sol.value},
              {"dual_value", sol.dual_value},
              {"iterations", sol.iterations}};
    std::ofstream csv(out_ / "lp_solution.csv");
    write_lp_solution_csv(csv, lp, sol);
    std::cout << "lp value: " << sol.value << '\n';

    if (plan_value_) {
      const auto entry = compare(*plan_value_, sol.value, opt_.lp_n);
      o["plan_value"] = entry.plan_value;
      o["gap"] = entry.gap;
      o["tolerance"] = 5.0 / opt_.lp_n;
      o["flagged"] = entry.flagged;
      if (entry.flagged) failures_.push_back({kOracle, "oracle-disagreement", "LP value differs from the plan by more than 5/n"});
      else if (entry.gap > 1e-6)
        failures_.push_back({kOracle, "oracle-disagreement", "LP value exceeds the constructed plan"});
    }
    if (file_.atoms && file_.signal_means && file_.signal_masses) {
      const auto ds = atom_signal(*file_.atoms, *file_.signal_means, *file_.signal_masses);
      const auto fr = check_feasibility(ds);
      const double v = evaluate_objective(ds, objective_).value;
      o["reference_signal"] = {{"value", v},
                               {"bp_residual", fr.bp_residual},
                               {"m_residual", fr.m_residual},
                               {"pm_residual", fr.pm_residual}};
      std::cout << "reference signal value: " << v << '\n';
      if (v > sol.value + 1e-9) failures_.push_back({kOracle, "oracle-disagreement", "reference signal beats the LP optimum"});
    }
    report_["oracle"] = o;
  }

  void export_lp() {
    const auto lp = lp_problem();
    std::ofstream os(out_ / "problem.lp");
    write_lp(os, lp, file_.name.empty() ? "lemons" : file_.name);
    report_["export"] = {{"file", (out_ / "problem.lp").string()}, {"rows", lp.rows()}, {"variables", lp.vars.size()}};
  }

  void write_report() const {
    std::error_code ec;
    fs::create_directories(out_, ec);
    std::ofstream os(out_ / "report.json");
    os << report_.dump(2) << '\n';
  }

  Options opt_;
  fs::path out_, base_dir_;
  InstanceFile file_;
  Objective objective_ = unit_volume();
  std::optional<SignalPlan> plan_;
  std::optional<DiscreteSignal> ds_;
  std::optional<double> plan_value_;
  json report_ = json::object();
  std::vector<Failure> failures_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information design for lemons markets: optimal signals, certificates and LP oracle"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"analyze", "construct, verify, certify and cross-check with the LP oracle"},
      {"build-signal", "construct the optimal signal"},
      {"verify", "construct and check feasibility and value"},
      {"certify", "construct, verify and build the dual certificate"},
      {"oracle", "solve the discretized program"},
      {"export-lp", "write the discretized program in LP format"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("instance", opt.instance, "instance file, or 'canonical'")->required();
    sub->add_option("--objective", opt.objective, "volume | price-surplus")
        ->check(CLI::IsMember({"volume", "price-surplus"}));
    sub->add_option("--alpha", opt.alpha, "weight: const:<v>, poly:<c0,c1,...> or piecewise:<file>");
    sub->add_option("--beta", opt.beta, "price weight of the price/surplus objective")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--n", opt.n, "type cells for verification")->check(CLI::Range(10, 5000));
    sub->add_option("--lp-n", opt.lp_n, "type cells for the LP oracle")->check(CLI::Range(2, 500));
    sub->add_option("--delta", opt.delta, "half-width of the strip around the crossing skipped by the grid check");
    sub->add_option("--out", opt.out, "output directory (default: $LEMONS_OUT_DIR or ./lemons_out)");
    sub->add_flag("--oracle-only", opt.oracle_only, "skip the construction and run only the LP oracle");
    sub->callback([&opt, sub] { opt.command = sub->get_name(); });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInputError;
  }
  return Pipeline(opt).run();
}
