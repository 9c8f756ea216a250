#include "bagopf/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bagopf/casedata.hpp"
#include "bagopf/decomp.hpp"
#include "bagopf/error.hpp"
#include "bagopf/recover.hpp"
#include "bagopf/report.hpp"
#include "bagopf/sdr.hpp"

namespace bagopf {

namespace {

struct Pipeline {
  Network network;
  AdmittanceModel admittance;
  Decomposition decomp;
};

Pipeline load(const RunConfig& cfg) {
  Pipeline p;
  p.network = load_network(cfg.input, cfg.format);
  // Bags depend only on the topology, so decompose accepts any cost data.
  if (cfg.command != RunConfig::Command::decompose) p.network = aggregate_generators(p.network);
  p.admittance = build_admittance(p.network);
  p.decomp = cfg.full_lifting ? undecomposed(p.admittance) : decompose(p.network, p.admittance);
  return p;
}

const char* command_name(RunConfig::Command c) {
  switch (c) {
    case RunConfig::Command::solve: return "solve";
    case RunConfig::Command::decompose: return "decompose";
    case RunConfig::Command::relax_only: return "relax-only";
    case RunConfig::Command::verify: return "verify";
  }
  return "unknown";
}

Json header(const RunConfig& cfg, const Network& net) {
  Json j;
  j["schema"] = "bagopf-report";
  j["version"] = kReportVersion;
  j["command"] = command_name(cfg.command);
  j["case"] = {{"buses", net.bus_count()},
               {"generators", net.generators.size()},
               {"branches", net.branches.size()},
               {"base_mva", net.base_mva}};
  j["lifting"] = cfg.full_lifting ? "full" : "bags";
  return j;
}

Json options_json(const RunConfig& cfg) {
  return {{"mu", cfg.noa.mu},
          {"mu_auto", cfg.noa.mu_auto},
          {"eps_tol", cfg.noa.eps_tol},
          {"eps_rank", cfg.noa.eps_rank},
          {"max_iters", cfg.noa.max_iters},
          {"gap_tol", cfg.backend.rel_gap_tol}};
}

void emit(std::ostream& out, const Json& j) { out << j.dump(2) << '\n'; }

std::string fmt(double v, int prec = 8) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f) throw Error("write failed for " + path);
}

}  // namespace

void RunConfig::validate() const {
  noa.validate();
  backend.validate();
  if (!(verify_tol > 0.0)) throw ValidationError("verify tolerance must be positive");
  if (command == Command::verify && solution_in.empty()) {
    throw ValidationError("verify needs --solution");
  }
}

int cmd_decompose(const RunConfig& cfg, std::ostream& out) {
  const Pipeline p = load(cfg);
  const Json d = decomposition_json(p.decomp, p.network, cfg.show_bags || cfg.structured);
  if (cfg.structured) {
    Json j = header(cfg, p.network);
    j["decomposition"] = d;
    emit(out, j);
    return exit_ok;
  }
  out << "bags: " << d["bag_count"].get<std::size_t>() << '\n'
      << "max bag size: " << d["max_bag_size"].get<std::size_t>() << '\n'
      << "variables (complex scalars): " << d["variable_count"].get<std::size_t>() << '\n'
      << "undecomposed variables: " << d["undecomposed_variable_count"].get<std::size_t>()
      << '\n'
      << "links: " << d["link_count"].get<std::size_t>() << '\n';
  if (cfg.show_bags) {
    for (const auto& b : d["bags"]) {
      out << "bag " << b["index"].get<std::size_t>() << " center " << b["center"].get<int>()
          << ":";
      for (const auto& m : b["members"]) out << ' ' << m.get<int>();
      out << '\n';
    }
  }
  return exit_ok;
}

int cmd_relax_only(const RunConfig& cfg, std::ostream& out) {
  const Pipeline p = load(cfg);
  const SdrProgram sdr = assemble(p.network, p.admittance, p.decomp);
  const InitResult init = init_sdr(sdr, cfg.noa, InteriorPointBackend{}, cfg.backend);
  if (init.status != NoaStatus::converged) {
    const int code = init.status == NoaStatus::infeasible ? exit_infeasible : exit_not_converged;
    if (cfg.structured) {
      Json j = header(cfg, p.network);
      j["status"] = noa_status_name(init.status);
      j["solver_status"] = status_name(init.solve.status);
      emit(out, j);
    } else {
      out << "relaxation: " << status_name(init.solve.status);
      if (!init.solve.message.empty()) out << " (" << init.solve.message << ')';
      out << '\n';
    }
    return code;
  }
  const Json r = relaxation_json(init.iterate, p.decomp, cfg.noa.eps_rank);
  if (cfg.structured) {
    Json j = header(cfg, p.network);
    j["status"] = "solved";
    j["inexact"] = init.inexact;
    j["relaxation"] = r;
    emit(out, j);
    return exit_ok;
  }
  out << "lower bound: " << fmt(init.lower_bound, 10) << (init.inexact ? " (inexact)" : "")
      << '\n'
      << "bags: " << p.decomp.bags.size() << '\n'
      << "rank-one bags: " << r["rank_one_count"].get<std::size_t>() << '\n'
      << "rank-more-than-one bags: " << r["rank_deficient_count"].get<std::size_t>();
  if (r["rank_deficient_count"].get<std::size_t>() > 0) {
    out << ", largest size " << r["rank_deficient_largest_size"].get<std::size_t>()
        << " (smallest size " << r["rank_deficient_smallest_size"].get<std::size_t>() << ")";
  }
  out << '\n' << "max rank gap: " << fmt(r["max_rank_gap"].get<double>(), 3) << '\n';
  return exit_ok;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  const Pipeline p = load(cfg);
  const SdrProgram sdr = assemble(p.network, p.admittance, p.decomp);
  const NoaResult res = run(sdr, cfg.noa, InteriorPointBackend{}, cfg.backend);

  if (!cfg.trace_out.empty()) {
    std::ostringstream csv;
    write_trace_csv(res, csv);
    write_file(cfg.trace_out, csv.str());
  }

  const bool converged = res.status == NoaStatus::converged;
  Json recovery, feas;
  std::optional<VoltageSolution> sol;
  std::optional<FeasibilityReport> rep;
  if (converged) {
    sol = recover(res.final, p.decomp, p.network, p.admittance, cfg.noa.eps_rank);
    rep = verify(sol->v, p.network, p.admittance);
    recovery = {{"objective", sol->objective},
                {"magnitude_disagreement", sol->magnitude_disagreement},
                {"phase_disagreement", sol->phase_disagreement},
                {"outer_product_error", outer_product_error(sol->v, res.final.blocks, p.decomp)},
                {"warnings", sol->warnings}};
    feas = feasibility_json(*rep);
    if (!cfg.solution_out.empty()) {
      write_file(cfg.solution_out, solution_json(*sol, p.network, *rep).dump(2) + "\n");
    }
  }

  if (cfg.structured) {
    Json j = header(cfg, p.network);
    j["options"] = options_json(cfg);
    j["decomposition"] = decomposition_json(p.decomp, p.network, false);
    j["result"] = noa_json(res);
    j["trace"] = trace_json(res);
    if (converged) {
      j["recovery"] = recovery;
      j["verify"] = feas;
    }
    emit(out, j);
  } else {
    out << "status: " << noa_status_name(res.status) << '\n';
    if (!res.message.empty()) out << "message: " << res.message << '\n';
    if (res.status != NoaStatus::infeasible) {
      out << "lower bound: " << fmt(res.lower_bound, 10) << '\n'
          << "found value: " << fmt(res.found_value, 10) << '\n';
      if (res.got) out << "GOT: " << fmt(*res.got, 4) << '\n';
      else out << "absolute gap: " << fmt(res.found_value - res.lower_bound, 6) << '\n';
      out << "iterations: " << res.iterations << '\n' << "rank-one bags per iteration:";
      for (const auto& t : res.trace) out << ' ' << t.locked;
      out << " of " << p.decomp.bags.size() << '\n';
    }
    if (converged) {
      out << "recovered objective: " << fmt(sol->objective, 10) << '\n'
          << "stitch phase disagreement (rad): " << fmt(sol->phase_disagreement, 3) << '\n'
          << "verify worst relative violation: " << fmt(rep->worst, 3) << " ("
          << rep->worst_family << ")\n";
      for (const auto& w : sol->warnings) out << "warning: " << w << '\n';
    }
  }
  switch (res.status) {
    case NoaStatus::converged: return exit_ok;
    case NoaStatus::infeasible: return exit_infeasible;
    default: return exit_not_converged;
  }
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const Network net = aggregate_generators(load_network(cfg.input, cfg.format));
  const AdmittanceModel adm = build_admittance(net);
  std::ifstream f(cfg.solution_in, std::ios::binary);
  if (!f) throw ParseError("cannot open " + cfg.solution_in, std::size_t{0});
  Json doc;
  try {
    doc = Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), std::string("$"));
  }
  const Eigen::VectorXcd v = voltages_from_solution(doc, net);
  const FeasibilityReport rep = verify(v, net, adm);
  const double obj = objective_of(v, net, adm);
  const bool ok = rep.passes(cfg.verify_tol);
  if (cfg.structured) {
    Json j = header(cfg, net);
    j["objective"] = obj;
    j["tolerance"] = cfg.verify_tol;
    j["passed"] = ok;
    j["verify"] = feasibility_json(rep);
    emit(out, j);
  } else {
    out << "objective: " << fmt(obj, 10) << '\n';
    for (const auto& [fam, val] : rep.bound_violations) {
      out << fam << ": " << fmt(val, 3) << '\n';
    }
    out << "worst: " << fmt(rep.worst, 3) << " (" << rep.worst_family << ")\n"
        << (ok ? "PASSED" : "FAILED") << " at tolerance " << fmt(cfg.verify_tol, 3) << '\n';
  }
  return ok ? exit_ok : exit_not_converged;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string report = "text";
  double gap_tol = cfg.backend.rel_gap_tol;

  CLI::App app{"Decomposed semidefinite relaxation and rank-one penalty solver for AC OPF"};
  app.require_subcommand(1);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--input,-i", cfg.input, "case file")->required()->envname("BAGOPF_INPUT");
    sub->add_option("--format", cfg.format, "matpower or native (default: from extension)")
        ->check(CLI::IsMember({"matpower", "native"}))
        ->envname("BAGOPF_FORMAT");
    sub->add_option("--report", report, "text or structured")
        ->check(CLI::IsMember({"text", "structured"}))
        ->envname("BAGOPF_REPORT");
  };
  auto solver = [&](CLI::App* sub) {
    sub->add_option("--mu", cfg.noa.mu, "penalty weight")->envname("BAGOPF_MU");
    sub->add_flag("--mu-auto", cfg.noa.mu_auto, "calibrate mu from the relaxation")
        ->envname("BAGOPF_MU_AUTO");
    sub->add_option("--eps-tol", cfg.noa.eps_tol, "locking tolerance")
        ->envname("BAGOPF_EPS_TOL");
    sub->add_option("--eps-rank", cfg.noa.eps_rank, "rank-one threshold (relative)")
        ->envname("BAGOPF_EPS_RANK");
    sub->add_option("--max-iters", cfg.noa.max_iters, "penalty iterations")
        ->envname("BAGOPF_MAX_ITERS");
    sub->add_option("--gap-tol", gap_tol, "conic solver gap tolerance")
        ->envname("BAGOPF_GAP_TOL");
    sub->add_flag("--full-lifting", cfg.full_lifting, "one bag holding every bus")
        ->envname("BAGOPF_FULL_LIFTING");
  };

  CLI::App* solve = app.add_subcommand("solve", "relaxation plus penalty iterations");
  common(solve);
  solver(solve);
  solve->add_option("--trace-out", cfg.trace_out, "iteration trace CSV")
      ->envname("BAGOPF_TRACE_OUT");
  solve->add_option("--solution-out", cfg.solution_out, "solution export (JSON)")
      ->envname("BAGOPF_SOLUTION_OUT");

  CLI::App* dec = app.add_subcommand("decompose", "bag statistics");
  common(dec);
  dec->add_flag("--bags", cfg.show_bags, "list bag membership")->envname("BAGOPF_BAGS");

  CLI::App* relax = app.add_subcommand("relax-only", "relaxation lower bound and rank report");
  common(relax);
  solver(relax);

  CLI::App* ver = app.add_subcommand("verify", "check a solution export against the case");
  common(ver);
  ver->add_option("--solution", cfg.solution_in, "solution export to check")
      ->required()
      ->envname("BAGOPF_SOLUTION");
  ver->add_option("--tol", cfg.verify_tol, "worst relative violation allowed")
      ->envname("BAGOPF_TOL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? exit_ok : exit_usage;
  }

  if (solve->parsed()) cfg.command = RunConfig::Command::solve;
  else if (dec->parsed()) cfg.command = RunConfig::Command::decompose;
  else if (relax->parsed()) cfg.command = RunConfig::Command::relax_only;
  else cfg.command = RunConfig::Command::verify;
  cfg.structured = report == "structured";
  cfg.backend.abs_gap_tol = gap_tol;
  cfg.backend.rel_gap_tol = gap_tol;

  try {
    cfg.validate();
    switch (cfg.command) {
      case RunConfig::Command::solve: return cmd_solve(cfg, out);
      case RunConfig::Command::decompose: return cmd_decompose(cfg, out);
      case RunConfig::Command::relax_only: return cmd_relax_only(cfg, out);
      case RunConfig::Command::verify: return cmd_verify(cfg, out);
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const UnsupportedFeature& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_internal;
  }
  return exit_internal;
}

}  // namespace bagopf
