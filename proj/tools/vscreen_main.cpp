#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vscreen/batcher.hpp"
#include "vscreen/chem.hpp"
#include "vscreen/codec.hpp"
#include "vscreen/dock.hpp"
#include "vscreen/fep.hpp"
#include "vscreen/pipeline.hpp"
#include "vscreen/rng.hpp"
#include "vscreen/sched.hpp"
#include "vscreen/tune.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct GlobalOpts {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> trace;
};

int cmd_run(const std::string& config_path, const GlobalOpts& g) {
  vscreen::pipeline::CampaignConfig cfg = vscreen::pipeline::load_config_file(config_path);
  if (g.seed) cfg.master_seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (g.trace) cfg.trace_path = *g.trace;
  vscreen::pipeline::CampaignReport report = vscreen::pipeline::run_campaign(cfg);
  std::cout << report.to_json() << "\n";
  std::cerr << "report: " << cfg.report_path << "\nresults: " << cfg.results_tsv_path
            << "\ntrace: " << cfg.trace_path << "\n";
  return kExitOk;
}

int cmd_compress(const std::string& dict_path, const std::string& in_path,
                 const std::string& out_path) {
  vscreen::codec::Dictionary dict = vscreen::codec::load_dictionary_file(dict_path);
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw vscreen::pipeline::ConfigError("cannot open input: " + in_path);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw vscreen::pipeline::ConfigError("cannot open output: " + out_path);
  vscreen::codec::compress_stream(in, out, dict);
  return kExitOk;
}

int cmd_decompress(const std::string& dict_path, const std::string& in_path,
                   const std::string& out_path) {
  vscreen::codec::Dictionary dict = vscreen::codec::load_dictionary_file(dict_path);
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw vscreen::pipeline::ConfigError("cannot open input: " + in_path);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw vscreen::pipeline::ConfigError("cannot open output: " + out_path);
  vscreen::codec::decompress_stream(in, out, dict);
  return kExitOk;
}

int cmd_dock(const std::string& library, const std::string& pocket_path, int restarts,
             double diversity, std::size_t keep_top, double min_score, bool do_rescore,
             const std::string& out_path, const GlobalOpts& g) {
  vscreen::dock::Pocket pocket = vscreen::dock::load_pocket_file(pocket_path);
  auto records = vscreen::chem::read_library_file(library);
  std::uint64_t seed = g.seed.value_or(0);
  vscreen::Rng root(seed);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw vscreen::pipeline::ConfigError("cannot open output: " + out_path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    vscreen::chem::Ligand lig = vscreen::chem::make_ligand(records[i].id, records[i].smiles);
    vscreen::chem::Conformer conf =
        vscreen::chem::embed_3d(lig.graph, root.split(i).next_u64(), lig.id);
    vscreen::dock::TorsionTopology topo = vscreen::dock::torsion_topology(lig.graph);
    auto poses = vscreen::dock::dock(conf, topo, pocket, restarts, diversity,
                                     root.split(i).split(1).next_u64());
    poses = vscreen::dock::filter_poses(poses, keep_top, min_score);
    if (do_rescore) {
      for (auto& p : poses) {
        p.rescore = vscreen::dock::rescore(lig.graph, conf, topo, p, pocket);
      }
    }
    for (const auto& p : poses) out << vscreen::dock::pose_to_json(p) << "\n";
  }
  return kExitOk;
}

int cmd_sched_sim(const std::string& tasks_path, const std::string& workers_path,
                  const std::string& policy_path, const std::string& trace_path,
                  const GlobalOpts& g) {
  auto tasks = vscreen::sched::load_tasks_file(tasks_path);
  auto workers = vscreen::sched::load_workers_file(workers_path);
  vscreen::sched::AllocPolicy policy;
  if (!policy_path.empty()) policy = vscreen::sched::load_policy_file(policy_path);
  std::string out_path = g.trace ? *g.trace : trace_path;
  try {
    vscreen::sched::Trace trace =
        vscreen::sched::run_simulation(tasks, workers, policy, g.seed.value_or(0));
    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::binary);
      out << trace.to_jsonl();
    }
    std::cout << "makespan_s " << trace.makespan_s << "\nutil_cpu " << trace.util_cpu
              << "\nutil_accel " << trace.util_accel << "\nutil_memory " << trace.util_memory
              << "\n";
    return kExitOk;
  } catch (const vscreen::sched::StarvationError& e) {
    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::binary);
      out << e.trace().to_jsonl();
    }
    std::cerr << e.what() << "\n";
    for (const std::string& id : e.task_ids()) std::cerr << "starved: " << id << "\n";
    return kExitStage;
  }
}

int cmd_tune(const std::string& space_path, const std::string& objective, double budget,
             int evals, const std::string& out_path, const std::string& csv_path,
             const GlobalOpts& g) {
  vscreen::tune::KnobSpace space = vscreen::tune::load_space_file(space_path);
  std::uint64_t seed = g.seed.value_or(0);
  std::unique_ptr<vscreen::tune::Objective> obj;
  if (objective == "synthetic") {
    obj = std::make_unique<vscreen::tune::SyntheticSurface>(space, seed, 0.01);
  } else if (objective == "pipeline") {
    throw vscreen::pipeline::ConfigError(
        "pipeline objective needs a campaign context; use the python module or the synthetic "
        "surface here");
  } else {
    throw vscreen::pipeline::ConfigError("unknown objective: " + objective);
  }

  std::vector<vscreen::tune::Observation> history;
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw vscreen::pipeline::ConfigError("cannot open output: " + out_path);
  for (int i = 0; i < evals; ++i) {
    vscreen::tune::Config c = vscreen::tune::suggest_next(space, history, budget, seed);
    vscreen::tune::Observation o = vscreen::tune::evaluate(space, c, *obj);
    history.push_back(o);
    nlohmann::ordered_json j;
    j["eval"] = i;
    j["config"] = o.config;
    j["quality"] = o.quality;
    j["cost"] = o.cost;
    out << j.dump() << "\n";
  }
  auto front = vscreen::tune::pareto_front(history);
  std::cerr << "pareto front size " << front.size() << "\n";
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::binary);
    csv << "cost,quality,dominated\n";
    for (const auto& o : history) {
      bool on_front = false;
      for (const auto& f : front) {
        if (f.cost == o.cost && f.quality == o.quality) on_front = true;
      }
      csv << o.cost << ',' << o.quality << ',' << (on_front ? 0 : 1) << "\n";
    }
  }
  return kExitOk;
}

int cmd_fep(const std::string& library, double target_sem, int max_replicas, int lambda_states,
            long steps, const std::string& out_path, const GlobalOpts& g) {
  auto records = vscreen::chem::read_library_file(library);
  std::vector<vscreen::chem::Ligand> ligands;
  for (const auto& rec : records) {
    ligands.push_back(vscreen::chem::make_ligand(rec.id, rec.smiles));
  }
  auto pairs = vscreen::fep::pair_compounds(ligands);
  std::uint64_t seed = g.seed.value_or(0);
  vscreen::Rng root(seed);

  auto ligand_of = [&](const std::string& id) -> const vscreen::chem::Ligand& {
    for (const auto& l : ligands) {
      if (l.id == id) return l;
    }
    throw std::logic_error("unknown ligand " + id);
  };

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw vscreen::pipeline::ConfigError("cannot open output: " + out_path);
  out << "pair_id\tligand_a\tligand_b\tddg_kT\tsem_kT\treplicas\tflag\n";
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    vscreen::fep::AlchemicalModel model = vscreen::pipeline::toy_pair_model(
        ligand_of(pairs[pi].ligand_a), ligand_of(pairs[pi].ligand_b), lambda_states);
    auto estimator = [&](std::uint64_t s) {
      return vscreen::fep::awh_estimate(model, steps, s).delta_f;
    };
    vscreen::fep::FreeEnergyResult r = vscreen::fep::run_until_sem(
        estimator, target_sem, max_replicas, root.split(pi).next_u64());
    out.precision(10);
    out << "P" << pi << '\t' << pairs[pi].ligand_a << '\t' << pairs[pi].ligand_b << '\t'
        << r.estimate << '\t' << r.sem << '\t' << r.replicas << '\t'
        << (r.target_met ? "ok" : "target_not_met") << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vscreen: desk-scale virtual screening campaign runtime"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::uint64_t seed_raw = 0;
  int threads_raw = 0;
  std::string trace_raw;
  app.add_option("--seed", seed_raw, "master seed")->each([&](const std::string&) {
    g.seed = seed_raw;
  });
  app.add_option("--threads", threads_raw, "worker threads")->each([&](const std::string&) {
    g.threads = threads_raw;
  });
  app.add_option("--trace", trace_raw, "trace output path (JSONL)")
      ->each([&](const std::string&) { g.trace = trace_raw; });

  auto* run = app.add_subcommand("run", "run a campaign from a config file");
  std::string run_config;
  run->add_option("config", run_config, "campaign JSON")->required();

  auto* comp = app.add_subcommand("compress", "compress a SMILES library");
  std::string c_dict, c_in, c_out;
  comp->add_option("--dict", c_dict)->required();
  comp->add_option("--in", c_in)->required();
  comp->add_option("--out", c_out)->required();

  auto* decomp = app.add_subcommand("decompress", "decompress a SMILES library");
  std::string d_dict, d_in, d_out;
  decomp->add_option("--dict", d_dict)->required();
  decomp->add_option("--in", d_in)->required();
  decomp->add_option("--out", d_out)->required();

  auto* dk = app.add_subcommand("dock", "dock a library into a pocket");
  std::string dk_lib, dk_pocket, dk_out = "poses.jsonl";
  int dk_restarts = 4;
  double dk_div = 1.0, dk_min = -1e30;
  std::size_t dk_keep = 8;
  bool dk_rescore = false;
  dk->add_option("--library", dk_lib)->required();
  dk->add_option("--pocket", dk_pocket)->required();
  dk->add_option("--restarts", dk_restarts);
  dk->add_option("--diversity", dk_div);
  dk->add_option("--keep-top", dk_keep);
  dk->add_option("--min-score", dk_min);
  dk->add_flag("--rescore", dk_rescore);
  dk->add_option("--out", dk_out);

  auto* ss = app.add_subcommand("sched-sim", "simulate the sub-node task scheduler");
  std::string ss_tasks, ss_workers, ss_policy, ss_trace = "trace.jsonl";
  ss->add_option("--tasks", ss_tasks)->required();
  ss->add_option("--workers", ss_workers)->required();
  ss->add_option("--policy", ss_policy);
  ss->add_option("--trace-out", ss_trace);

  auto* tn = app.add_subcommand("tune", "autotune pipeline knobs");
  std::string tn_space, tn_obj = "synthetic", tn_out = "history.jsonl", tn_csv;
  double tn_budget = 1e30;
  int tn_evals = 50;
  tn->add_option("--space", tn_space)->required();
  tn->add_option("--objective", tn_obj)->check(CLI::IsMember({"synthetic", "pipeline"}));
  tn->add_option("--budget-cost", tn_budget);
  tn->add_option("--evals", tn_evals);
  tn->add_option("--out", tn_out);
  tn->add_option("--csv", tn_csv);

  auto* fp = app.add_subcommand("fep", "pair a library and estimate relative free energies");
  std::string fp_lib, fp_out = "fep_results.tsv";
  double fp_sem = 0.25;
  int fp_max = 16, fp_lambda = 3;
  long fp_steps = 20000;
  fp->add_option("--library", fp_lib)->required();
  fp->add_option("--target-sem", fp_sem);
  fp->add_option("--max-replicas", fp_max);
  fp->add_option("--lambda-states", fp_lambda);
  fp->add_option("--steps", fp_steps);
  fp->add_option("--out", fp_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, g);
    if (comp->parsed()) return cmd_compress(c_dict, c_in, c_out);
    if (decomp->parsed()) return cmd_decompress(d_dict, d_in, d_out);
    if (dk->parsed()) {
      return cmd_dock(dk_lib, dk_pocket, dk_restarts, dk_div, dk_keep, dk_min, dk_rescore,
                      dk_out, g);
    }
    if (ss->parsed()) return cmd_sched_sim(ss_tasks, ss_workers, ss_policy, ss_trace, g);
    if (tn->parsed()) return cmd_tune(tn_space, tn_obj, tn_budget, tn_evals, tn_out, tn_csv, g);
    if (fp->parsed()) {
      return cmd_fep(fp_lib, fp_sem, fp_max, fp_lambda, fp_steps, fp_out, g);
    }
  } catch (const vscreen::pipeline::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const vscreen::tune::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const vscreen::codec::BadFormat& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const vscreen::pipeline::StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitOk;
}
