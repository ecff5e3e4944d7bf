#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vscreen/batcher.hpp"
#include "vscreen/chem.hpp"
#include "vscreen/dock.hpp"
#include "vscreen/fep.hpp"
#include "vscreen/sched.hpp"

namespace vscreen::pipeline {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& msg)
      : std::runtime_error("[" + stage + "] " + msg), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageKnobs {
  int embed_iterations = 200;
  int restarts = 4;
  double diversity_delta = 1.0;
  std::size_t keep_top = 4;
  double min_score = -1e30;
  int ls_max_steps = 500;
};

struct CampaignConfig {
  std::string library_path;
  std::string dictionary_path;  // required for .smzc libraries
  std::string pocket_path;
  double keep_after_dock = 0.2;  // fraction of ranked ligands kept after docking
  double keep_for_fep = 0.5;     // fraction of those sent to free-energy evaluation
  StageKnobs knobs;
  std::vector<sched::WorkerSpec> cluster;
  sched::AllocPolicy policy;
  batcher::DeviceModel device;
  std::vector<batcher::SizeClass> classes;
  sched::Resources dock_task_request{1, 1, 0};
  sched::Resources fep_task_request{1, 0, 0};
  double fep_target_sem = 0.25;
  int fep_max_replicas = 16;
  int fep_lambda_states = 3;
  long fep_steps = 20000;
  std::uint64_t master_seed = 0;
  int threads = 1;
  int top_n = 10;
  std::string trace_path = "campaign_trace.jsonl";
  std::string report_path = "campaign_report.json";
  std::string results_tsv_path = "fep_results.tsv";
};

CampaignConfig load_config_file(const std::string& path);
CampaignConfig parse_config_json(const std::string& text, const std::string& base_dir);
std::string config_to_json(const CampaignConfig& config);

struct StageStats {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  double sim_seconds = 0.0;  // simulated cluster time; 0 for inline stages
  std::size_t tasks = 0;     // scheduler tasks this stage submitted
};

struct RankedLigand {
  std::string id;
  double score = 0.0;
  std::optional<double> delta_g;  // toy ABFE, kT; present for fep-stage ligands
};

struct PairResult {
  std::string pair_id;
  std::string ligand_a;
  std::string ligand_b;
  fep::FreeEnergyResult result;
};

struct CampaignReport {
  std::vector<StageStats> stages;
  std::vector<RankedLigand> ranked;  // top-N
  std::vector<PairResult> pairs;
  std::string trace_path;

  [[nodiscard]] std::string to_json() const;   // deterministic bytes
  [[nodiscard]] std::string results_tsv() const;
};

// Executes the funnel: parse -> embed -> dock (batched, as scheduler tasks)
// -> rescore -> filter -> rank -> pair -> fep; writes the trace JSONL, the
// report JSON and the fep results TSV. Identical config + seed produces
// byte-identical outputs.
CampaignReport run_campaign(const CampaignConfig& config);

// Descending score, ties ascending ligand id.
std::vector<std::pair<std::string, double>> rank_ligands(
    const std::map<std::string, double>& scores);

// Toy per-pair alchemical model: harmonic endpoints derived from ligand
// descriptors, log-linear stiffness interpolation. The analytic dF equals
// the offset difference plus half the stiffness log-ratio.
fep::AlchemicalModel toy_pair_model(const chem::Ligand& a, const chem::Ligand& b,
                                    int num_states);

}  // namespace vscreen::pipeline
