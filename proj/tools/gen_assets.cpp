// Regenerates the committed data/ artifacts. Run from the repo root:
//   ./build/tools/gen_assets data
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "smiles_corpus.hpp"
#include "vscreen/batcher.hpp"
#include "vscreen/codec.hpp"
#include "vscreen/dock.hpp"
#include "vscreen/tune.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int main(int argc, char** argv) {
  fs::path out_dir = argc > 1 ? argv[1] : "data";
  fs::create_directories(out_dir);

  // 100-ligand sample library.
  {
    auto lines = vscreen::corpus::random_corpus(100, 42);
    std::ofstream out(out_dir / "sample_library_100.smi", std::ios::binary);
    out << "# 100-molecule sample library (SMILES<TAB>ID)\n";
    for (std::size_t i = 0; i < lines.size(); ++i) {
      out << lines[i] << '\t' << "MOL" << i << '\n';
    }
  }

  // Dictionary trained once on a separate generated sample, then shipped as
  // a versioned artifact (independent of any input file it compresses).
  {
    auto corpus = vscreen::corpus::random_corpus(2000, 7);
    vscreen::codec::Dictionary dict = vscreen::codec::train_dictionary(corpus, 128);
    vscreen::codec::save_dictionary_file(dict, (out_dir / "smiles.dict").string());
    std::cout << "dictionary entries: " << dict.size() << "\n";
  }

  // Pocket with the three site kinds.
  {
    vscreen::dock::Pocket p;
    p.bounds = {{-6, -6, -6}, {6, 6, 6}};
    p.clash_radius = 0.7;
    p.clash_penalty = 0.5;
    p.sites = {
        {{1.5, 0.5, -0.5}, 2.0, 1.5, vscreen::dock::SiteKind::Steric},
        {{-2.0, 1.0, 1.0}, 1.5, 1.2, vscreen::dock::SiteKind::Steric},
        {{0.0, -2.0, 2.0}, 1.0, 1.0, vscreen::dock::SiteKind::Steric},
        {{2.0, -1.0, 1.0}, 0.8, 1.0, vscreen::dock::SiteKind::HBond},
        {{-1.0, -1.0, -2.0}, 0.6, 1.5, vscreen::dock::SiteKind::Lipophilic},
    };
    std::ofstream out(out_dir / "pocket.json", std::ios::binary);
    out << vscreen::dock::pocket_to_json(p) << "\n";
  }

  // 11-knob space; cardinality 16*10*8*6*6*5*4*4*3*3*2 = 66,355,200.
  {
    vscreen::tune::KnobSpace space;
    auto grid = [](double lo, double hi, int n) {
      std::vector<double> v;
      for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
      return v;
    };
    auto counts = [](int lo, int n, int step = 1) {
      std::vector<double> v;
      for (int i = 0; i < n; ++i) v.push_back(lo + i * step);
      return v;
    };
    space.knobs = {
        {"restarts", counts(1, 16)},
        {"diversity_delta", grid(0.25, 2.5, 10)},
        {"keep_top", counts(1, 8)},
        {"min_score", grid(-5.0, 0.0, 6)},
        {"embed_iterations", counts(50, 6, 50)},
        {"ls_max_steps", counts(100, 5, 100)},
        {"batch_atom_classes", counts(1, 4)},
        {"batch_rotbond_classes", counts(1, 4)},
        {"rescore_weight", grid(0.5, 1.5, 3)},
        {"flush_age_s", grid(0.5, 2.0, 3)},
        {"grad_tol_exp", counts(-6, 2)},
    };
    space.validate();
    std::ofstream out(out_dir / "space.json", std::ios::binary);
    out << vscreen::tune::space_to_json(space) << "\n";
    double card = space.cardinality();
    std::cout << "knob space cardinality: " << std::fixed << card << "\n";
  }

  // Scheduler demo inputs.
  {
    ordered_json workers = ordered_json::array();
    for (int i = 0; i < 4; ++i) {
      workers.push_back({{"id", "node" + std::to_string(i)},
                         {"cpu_cores", 8},
                         {"accel_slots", 2},
                         {"memory", 64}});
    }
    std::ofstream out(out_dir / "cluster.json", std::ios::binary);
    out << workers.dump(2) << "\n";

    ordered_json policy = {{"enabled", true},
                           {"backlog_threshold_core_s", 200.0},
                           {"workers_per_alloc", 2},
                           {"worker_shape",
                            {{"cpu_cores", 8}, {"accel_slots", 2}, {"memory", 64}}},
                           {"walltime_s", 300.0},
                           {"max_queued", 2},
                           {"grant_delay_s", 15.0}};
    std::ofstream pout(out_dir / "policy.json", std::ios::binary);
    pout << policy.dump(2) << "\n";

    ordered_json tasks = ordered_json::array();
    for (int i = 0; i < 40; ++i) {
      ordered_json t = {{"id", "t" + std::to_string(i)},
                        {"cpu_cores", 1 + i % 4},
                        {"accel_slots", i % 3 == 0 ? 1 : 0},
                        {"memory", 4},
                        {"stage", i % 2 == 0 ? "dock" : "fep"},
                        {"duration_s", 1.0 + (i % 7)}};
      if (i >= 30) t["deps"] = {"t" + std::to_string(i - 30)};
      tasks.push_back(t);
    }
    std::ofstream tout(out_dir / "tasks_example.json", std::ios::binary);
    tout << tasks.dump(2) << "\n";
  }

  // Campaign over the sample library.
  {
    ordered_json cfg;
    cfg["library"] = "sample_library_100.smi";
    cfg["dictionary"] = "smiles.dict";
    cfg["pocket"] = "pocket.json";
    cfg["funnel"] = {{"keep_after_dock", 0.2}, {"keep_for_fep", 0.5}};
    cfg["knobs"] = {{"embed_iterations", 200}, {"restarts", 4},   {"diversity_delta", 1.0},
                    {"keep_top", 4},           {"min_score", -5.0}, {"ls_max_steps", 300}};
    cfg["cluster"] = ordered_json::array();
    for (int i = 0; i < 2; ++i) {
      cfg["cluster"].push_back({{"id", "node" + std::to_string(i)},
                                {"cpu_cores", 8},
                                {"accel_slots", 2},
                                {"memory", 64}});
    }
    cfg["policy"] = {{"enabled", false}};
    cfg["device"] = {{"memory_capacity", 4096.0},   {"mem_fixed", 256.0},
                     {"mem_per_atom", 2.0},         {"mem_per_rotbond", 8.0},
                     {"launch_overhead_s", 0.050},  {"service_time_per_class_s",
                                                     {0.002, 0.003, 0.004, 0.006, 0.008, 0.012}}};
    cfg["classes"] = ordered_json::array();
    const int atom_edges[4] = {1, 24, 48, 96};
    const int rot_edges[3] = {0, 6, 32};
    for (int ai = 0; ai < 3; ++ai) {
      for (int ri = 0; ri < 2; ++ri) {
        cfg["classes"].push_back({{"atom_lo", atom_edges[ai]},
                                  {"atom_hi", atom_edges[ai + 1]},
                                  {"rot_lo", rot_edges[ri]},
                                  {"rot_hi", rot_edges[ri + 1]}});
      }
    }
    cfg["dock_task_request"] = {{"cpu_cores", 1}, {"accel_slots", 1}, {"memory", 8}};
    cfg["fep_task_request"] = {{"cpu_cores", 2}, {"accel_slots", 0}, {"memory", 4}};
    cfg["fep"] = {{"target_sem", 0.2}, {"max_replicas", 12}, {"lambda_states", 3},
                  {"steps", 20000}};
    cfg["seed"] = 2024;
    cfg["threads"] = 4;
    cfg["top_n"] = 10;
    cfg["trace"] = "out/campaign_trace.jsonl";
    cfg["report"] = "out/campaign_report.json";
    cfg["results_tsv"] = "out/fep_results.tsv";
    std::ofstream out(out_dir / "campaign_100.json", std::ios::binary);
    out << cfg.dump(2) << "\n";
  }

  std::cout << "assets written to " << out_dir << "\n";
  return 0;
}
