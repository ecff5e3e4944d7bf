#include "vscreen/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vscreen/codec.hpp"
#include "vscreen/rng.hpp"

namespace vscreen::pipeline {

namespace fs = std::filesystem;

namespace {

// Bounded fan-out with indexed writes; results land by index, so the
// outcome does not depend on thread interleaving.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
  int usable = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (usable == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(usable));
  for (int t = 0; t < usable; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).string();
}

sched::Resources resources_from_json(const nlohmann::json& j) {
  sched::Resources r;
  r.cpu_cores = j.value("cpu_cores", 0L);
  r.accel_slots = j.value("accel_slots", 0L);
  r.memory = j.value("memory", 0L);
  return r;
}

nlohmann::ordered_json resources_to_json(const sched::Resources& r) {
  return {{"cpu_cores", r.cpu_cores}, {"accel_slots", r.accel_slots}, {"memory", r.memory}};
}

}  // namespace

CampaignConfig parse_config_json(const std::string& text, const std::string& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad campaign JSON: ") + e.what());
  }
  CampaignConfig c;
  try {
    c.library_path = resolve(base_dir, j.at("library").get<std::string>());
    c.dictionary_path = resolve(base_dir, j.value("dictionary", std::string{}));
    c.pocket_path = resolve(base_dir, j.at("pocket").get<std::string>());
    const auto& funnel = j.at("funnel");
    c.keep_after_dock = funnel.at("keep_after_dock").get<double>();
    c.keep_for_fep = funnel.at("keep_for_fep").get<double>();
    if (j.contains("knobs")) {
      const auto& k = j["knobs"];
      c.knobs.embed_iterations = k.value("embed_iterations", c.knobs.embed_iterations);
      c.knobs.restarts = k.value("restarts", c.knobs.restarts);
      c.knobs.diversity_delta = k.value("diversity_delta", c.knobs.diversity_delta);
      c.knobs.keep_top = k.value("keep_top", c.knobs.keep_top);
      c.knobs.min_score = k.value("min_score", c.knobs.min_score);
      c.knobs.ls_max_steps = k.value("ls_max_steps", c.knobs.ls_max_steps);
    }
    for (const auto& jw : j.at("cluster")) {
      sched::WorkerSpec w;
      w.id = jw.at("id").get<std::string>();
      w.capacity = resources_from_json(jw);
      c.cluster.push_back(std::move(w));
    }
    if (j.contains("policy")) {
      const auto& jp = j["policy"];
      c.policy.enabled = jp.value("enabled", false);
      c.policy.backlog_threshold_core_s = jp.value("backlog_threshold_core_s", 0.0);
      c.policy.workers_per_alloc = jp.value("workers_per_alloc", 1);
      if (jp.contains("worker_shape")) {
        c.policy.worker_shape = resources_from_json(jp["worker_shape"]);
      }
      c.policy.walltime_s = jp.value("walltime_s", 3600.0);
      c.policy.max_queued = jp.value("max_queued", 1);
      c.policy.grant_delay_s = jp.value("grant_delay_s", 10.0);
    }
    const auto& jd = j.at("device");
    c.device.memory_capacity = jd.at("memory_capacity").get<double>();
    c.device.mem_fixed = jd.value("mem_fixed", 0.0);
    c.device.mem_per_atom = jd.at("mem_per_atom").get<double>();
    c.device.mem_per_rotbond = jd.at("mem_per_rotbond").get<double>();
    c.device.launch_overhead = jd.at("launch_overhead_s").get<double>();
    c.device.service_time_per_class =
        jd.at("service_time_per_class_s").get<std::vector<double>>();
    if (j.contains("classes")) {
      for (const auto& jc : j["classes"]) {
        batcher::SizeClass sc;
        sc.atom_lo = jc.at("atom_lo").get<int>();
        sc.atom_hi = jc.at("atom_hi").get<int>();
        sc.rot_lo = jc.at("rot_lo").get<int>();
        sc.rot_hi = jc.at("rot_hi").get<int>();
        c.classes.push_back(sc);
      }
    } else {
      c.classes = batcher::default_classes();
    }
    if (j.contains("dock_task_request")) {
      c.dock_task_request = resources_from_json(j["dock_task_request"]);
    }
    if (j.contains("fep_task_request")) {
      c.fep_task_request = resources_from_json(j["fep_task_request"]);
    }
    const auto& jf = j.at("fep");
    c.fep_target_sem = jf.at("target_sem").get<double>();
    c.fep_max_replicas = jf.value("max_replicas", c.fep_max_replicas);
    c.fep_lambda_states = jf.value("lambda_states", c.fep_lambda_states);
    c.fep_steps = jf.value("steps", c.fep_steps);
    c.master_seed = j.value("seed", 0ULL);
    c.threads = j.value("threads", 1);
    c.top_n = j.value("top_n", 10);
    // Output paths stay relative to the working directory, not the config.
    c.trace_path = j.value("trace", c.trace_path);
    c.report_path = j.value("report", c.report_path);
    c.results_tsv_path = j.value("results_tsv", c.results_tsv_path);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad campaign config: ") + e.what());
  }

  if (!(c.keep_after_dock > 0.0 && c.keep_after_dock <= 1.0)) {
    throw ConfigError("funnel.keep_after_dock must be in (0, 1]");
  }
  if (!(c.keep_for_fep > 0.0 && c.keep_for_fep <= 1.0)) {
    throw ConfigError("funnel.keep_for_fep must be in (0, 1]");
  }
  if (c.fep_target_sem <= 0.0) throw ConfigError("fep.target_sem must be > 0");
  if (c.fep_lambda_states < 2) throw ConfigError("fep.lambda_states must be >= 2");
  if (c.cluster.empty()) throw ConfigError("cluster must list at least one worker");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  for (const char* label : {"library", "pocket"}) {
    const std::string& p = label == std::string("library") ? c.library_path : c.pocket_path;
    if (!fs::exists(p)) throw ConfigError(std::string(label) + " file not found: " + p);
  }
  if (!c.dictionary_path.empty() && !fs::exists(c.dictionary_path)) {
    throw ConfigError("dictionary file not found: " + c.dictionary_path);
  }
  return c;
}

CampaignConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open campaign config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str(), fs::path(path).parent_path().string());
}

std::string config_to_json(const CampaignConfig& c) {
  nlohmann::ordered_json j;
  j["library"] = c.library_path;
  j["dictionary"] = c.dictionary_path;
  j["pocket"] = c.pocket_path;
  j["funnel"] = {{"keep_after_dock", c.keep_after_dock}, {"keep_for_fep", c.keep_for_fep}};
  j["knobs"] = {{"embed_iterations", c.knobs.embed_iterations},
                {"restarts", c.knobs.restarts},
                {"diversity_delta", c.knobs.diversity_delta},
                {"keep_top", c.knobs.keep_top},
                {"min_score", c.knobs.min_score},
                {"ls_max_steps", c.knobs.ls_max_steps}};
  j["cluster"] = nlohmann::ordered_json::array();
  for (const auto& w : c.cluster) {
    auto jw = resources_to_json(w.capacity);
    jw["id"] = w.id;
    j["cluster"].push_back(jw);
  }
  j["policy"] = {{"enabled", c.policy.enabled},
                 {"backlog_threshold_core_s", c.policy.backlog_threshold_core_s},
                 {"workers_per_alloc", c.policy.workers_per_alloc},
                 {"worker_shape", resources_to_json(c.policy.worker_shape)},
                 {"walltime_s", c.policy.walltime_s},
                 {"max_queued", c.policy.max_queued},
                 {"grant_delay_s", c.policy.grant_delay_s}};
  j["device"] = {{"memory_capacity", c.device.memory_capacity},
                 {"mem_fixed", c.device.mem_fixed},
                 {"mem_per_atom", c.device.mem_per_atom},
                 {"mem_per_rotbond", c.device.mem_per_rotbond},
                 {"launch_overhead_s", c.device.launch_overhead},
                 {"service_time_per_class_s", c.device.service_time_per_class}};
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& sc : c.classes) {
    j["classes"].push_back({{"atom_lo", sc.atom_lo},
                            {"atom_hi", sc.atom_hi},
                            {"rot_lo", sc.rot_lo},
                            {"rot_hi", sc.rot_hi}});
  }
  j["dock_task_request"] = resources_to_json(c.dock_task_request);
  j["fep_task_request"] = resources_to_json(c.fep_task_request);
  j["fep"] = {{"target_sem", c.fep_target_sem},
              {"max_replicas", c.fep_max_replicas},
              {"lambda_states", c.fep_lambda_states},
              {"steps", c.fep_steps}};
  j["seed"] = c.master_seed;
  j["threads"] = c.threads;
  j["top_n"] = c.top_n;
  j["trace"] = c.trace_path;
  j["report"] = c.report_path;
  j["results_tsv"] = c.results_tsv_path;
  return j.dump(2);
}

std::vector<std::pair<std::string, double>> rank_ligands(
    const std::map<std::string, double>& scores) {
  std::vector<std::pair<std::string, double>> out(scores.begin(), scores.end());
  // std::map iterates id-ascending; a stable sort on score keeps that order
  // among ties.
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

fep::AlchemicalModel toy_pair_model(const chem::Ligand& a, const chem::Ligand& b,
                                    int num_states) {
  double ka = 1.0 + 0.05 * a.rotatable_bonds;
  double kb = 1.0 + 0.05 * b.rotatable_bonds;
  double ca = -0.05 * a.heavy_atoms;
  double cb = -0.05 * b.heavy_atoms;
  std::vector<double> k, mu, c;
  for (int l = 0; l < num_states; ++l) {
    double t = static_cast<double>(l) / (num_states - 1);
    k.push_back(std::exp((1.0 - t) * std::log(ka) + t * std::log(kb)));
    mu.push_back(0.0);
    c.push_back((1.0 - t) * ca + t * cb);
  }
  return fep::harmonic_family(std::move(k), std::move(mu), std::move(c));
}

std::string CampaignReport::to_json() const {
  nlohmann::ordered_json j;
  j["stages"] = nlohmann::ordered_json::array();
  for (const StageStats& s : stages) {
    j["stages"].push_back({{"name", s.name},
                           {"in", s.in},
                           {"out", s.out},
                           {"sim_seconds", s.sim_seconds},
                           {"tasks", s.tasks}});
  }
  j["ranked"] = nlohmann::ordered_json::array();
  for (const RankedLigand& r : ranked) {
    nlohmann::ordered_json jr{{"id", r.id}, {"score", r.score}};
    if (r.delta_g) {
      jr["delta_g"] = *r.delta_g;
    } else {
      jr["delta_g"] = nullptr;
    }
    j["ranked"].push_back(jr);
  }
  j["pairs"] = nlohmann::ordered_json::array();
  for (const PairResult& p : pairs) {
    j["pairs"].push_back({{"pair_id", p.pair_id},
                          {"ligand_a", p.ligand_a},
                          {"ligand_b", p.ligand_b},
                          {"ddg_kT", p.result.estimate},
                          {"sem_kT", p.result.sem},
                          {"replicas", p.result.replicas},
                          {"target_met", p.result.target_met}});
  }
  j["trace_path"] = trace_path;
  return j.dump(2);
}

std::string CampaignReport::results_tsv() const {
  std::ostringstream out;
  out << "pair_id\tligand_a\tligand_b\tddg_kT\tsem_kT\treplicas\tflag\n";
  for (const PairResult& p : pairs) {
    out << p.pair_id << '\t' << p.ligand_a << '\t' << p.ligand_b << '\t';
    out.precision(10);
    out << p.result.estimate << '\t' << p.result.sem << '\t' << p.result.replicas << '\t'
        << (p.result.target_met ? "ok" : "target_not_met") << '\n';
  }
  return out.str();
}

namespace {

struct LigandWork {
  chem::Ligand ligand;
  chem::Conformer conformer;
  dock::TorsionTopology topo;
  std::vector<dock::Pose> poses;
  double score = 0.0;  // best surviving pose rescore
};

struct StageClock {
  std::string name;
  std::chrono::steady_clock::time_point start;
};

void ensure_parent_dir(const std::string& path) {
  fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) {
    ensure_parent_dir(path);
    out_.open(path, std::ios::binary);
    if (!out_) throw ConfigError("cannot open trace for writing: " + path);
  }
  void stage_start(const std::string& stage) {
    out_ << R"({"kind":"stage_start","stage":")" << stage << "\"}\n";
  }
  void stage_end(const std::string& stage) {
    out_ << R"({"kind":"stage_end","stage":")" << stage << "\"}\n";
  }
  void sched_events(const sched::Trace& trace) { out_ << trace.to_jsonl(); }

 private:
  std::ofstream out_;
};

}  // namespace

CampaignReport run_campaign(const CampaignConfig& cfg) {
  Rng master(cfg.master_seed);
  CampaignReport report;
  report.trace_path = cfg.trace_path;
  TraceWriter trace(cfg.trace_path);

  auto run_stage = [&](const std::string& name, auto&& body) {
    trace.stage_start(name);
    auto start = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      // Partial report for the stages that did complete.
      ensure_parent_dir(cfg.report_path);
      std::ofstream rep(cfg.report_path, std::ios::binary);
      if (rep) rep << report.to_json();
      throw StageError(name, e.what());
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "stage " << name << ": wall " << wall << " s\n";
    trace.stage_end(name);
  };

  // parse ------------------------------------------------------------------
  std::vector<LigandWork> work;
  run_stage("parse", [&] {
    std::vector<chem::LibraryRecord> records;
    if (cfg.library_path.size() >= 5 &&
        cfg.library_path.substr(cfg.library_path.size() - 5) == ".smzc") {
      if (cfg.dictionary_path.empty()) {
        throw ConfigError("compressed library needs a dictionary");
      }
      codec::Dictionary dict = codec::load_dictionary_file(cfg.dictionary_path);
      std::ifstream in(cfg.library_path, std::ios::binary);
      if (!in) throw ConfigError("cannot open library: " + cfg.library_path);
      std::ostringstream text;
      codec::decompress_stream(in, text, dict);
      std::istringstream lines(text.str());
      records = chem::read_library_records(lines);
    } else {
      records = chem::read_library_file(cfg.library_path);
    }
    std::size_t parsed = 0;
    std::vector<std::string> ids;
    for (const chem::LibraryRecord& rec : records) {
      try {
        LigandWork w;
        w.ligand = chem::make_ligand(rec.id, rec.smiles);
        work.push_back(std::move(w));
        ++parsed;
      } catch (const chem::ParseError& e) {
        std::cerr << "parse: skipping line " << rec.line_number << ": " << e.what() << "\n";
      }
    }
    for (const LigandWork& w : work) ids.push_back(w.ligand.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw ConfigError("duplicate ligand id in library");
    }
    report.stages.push_back({"parse", records.size(), parsed, 0.0, 0});
  });

  // embed ------------------------------------------------------------------
  run_stage("embed", [&] {
    Rng stage_rng = master.split(1);
    parallel_for(work.size(), cfg.threads, [&](std::size_t i) {
      std::uint64_t seed = stage_rng.split(i).next_u64();
      work[i].conformer =
          chem::embed_3d(work[i].ligand.graph, seed, work[i].ligand.id,
                         cfg.knobs.embed_iterations);
      work[i].topo = dock::torsion_topology(work[i].ligand.graph);
    });
    report.stages.push_back({"embed", work.size(), work.size(), 0.0, 0});
  });

  // dock -------------------------------------------------------------------
  dock::Pocket pocket;
  run_stage("dock", [&] {
    pocket = dock::load_pocket_file(cfg.pocket_path);
    std::size_t in_count = work.size();

    // Size-bucketed batching feeds the simulated cluster.
    batcher::BatchQueue queue(cfg.classes, cfg.device);
    std::vector<batcher::Batch> batches;
    std::vector<LigandWork> usable;
    usable.reserve(work.size());
    double now = 0.0;
    for (std::size_t i = 0; i < work.size(); ++i) {
      std::size_t cls;
      try {
        cls = batcher::size_class(work[i].ligand, cfg.classes);
      } catch (const batcher::OutOfRange& e) {
        std::cerr << "dock: " << e.what() << "\n";
        continue;
      }
      now += 0.001;  // simulated arrival spacing
      for (auto& b : queue.flush_aged(now)) batches.push_back(std::move(b));
      if (auto b = queue.enqueue(work[i].ligand.id, cls, now)) {
        batches.push_back(std::move(*b));
      }
      usable.push_back(std::move(work[i]));
    }
    for (auto& b : queue.flush_all()) batches.push_back(std::move(b));
    work = std::move(usable);

    std::vector<sched::Task> tasks;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      sched::Task t;
      t.id = "dock.b" + std::to_string(bi);
      t.request = cfg.dock_task_request;
      t.stage = "dock";
      t.duration_s = cfg.device.launch_overhead +
                     static_cast<double>(batches[bi].ligand_ids.size()) *
                         cfg.device.service_time(batches[bi].cls);
      tasks.push_back(std::move(t));
    }
    double sim_seconds = 0.0;
    if (!tasks.empty()) {
      sched::Trace st = sched::run_simulation(tasks, cfg.cluster, cfg.policy, cfg.master_seed);
      trace.sched_events(st);
      sim_seconds = st.makespan_s;
    }

    Rng stage_rng = master.split(2);
    parallel_for(work.size(), cfg.threads, [&](std::size_t i) {
      std::uint64_t seed = stage_rng.split(i).next_u64();
      work[i].poses = dock::dock(work[i].conformer, work[i].topo, pocket, cfg.knobs.restarts,
                                 cfg.knobs.diversity_delta, seed, cfg.knobs.ls_max_steps);
    });
    report.stages.push_back({"dock", in_count, work.size(), sim_seconds, batches.size()});
  });

  // rescore ----------------------------------------------------------------
  run_stage("rescore", [&] {
    parallel_for(work.size(), cfg.threads, [&](std::size_t i) {
      for (dock::Pose& p : work[i].poses) {
        p.rescore = dock::rescore(work[i].ligand.graph, work[i].conformer, work[i].topo, p,
                                  pocket);
      }
    });
    report.stages.push_back({"rescore", work.size(), work.size(), 0.0, 0});
  });

  // filter -----------------------------------------------------------------
  run_stage("filter", [&] {
    std::size_t in_count = work.size();
    std::vector<LigandWork> kept;
    for (LigandWork& w : work) {
      w.poses = dock::filter_poses(w.poses, cfg.knobs.keep_top, cfg.knobs.min_score);
      if (w.poses.empty()) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (const dock::Pose& p : w.poses) best = std::max(best, p.rescore.value_or(0.0));
      w.score = best;
      kept.push_back(std::move(w));
    }
    work = std::move(kept);
    report.stages.push_back({"filter", in_count, work.size(), 0.0, 0});
  });

  // rank -------------------------------------------------------------------
  run_stage("rank", [&] {
    std::size_t in_count = work.size();
    std::map<std::string, double> scores;
    for (const LigandWork& w : work) scores[w.ligand.id] = w.score;
    auto ranked = rank_ligands(scores);
    std::size_t keep = in_count == 0
                           ? 0
                           : std::max<std::size_t>(
                                 1, static_cast<std::size_t>(std::floor(
                                        cfg.keep_after_dock * static_cast<double>(in_count))));
    keep = std::min(keep, ranked.size());
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < work.size(); ++i) index_of[work[i].ligand.id] = i;
    std::vector<LigandWork> kept;
    for (std::size_t r = 0; r < keep; ++r) {
      kept.push_back(std::move(work[index_of.at(ranked[r].first)]));
    }
    work = std::move(kept);
    report.stages.push_back({"rank", in_count, work.size(), 0.0, 0});
  });

  // pair -------------------------------------------------------------------
  std::vector<fep::CompoundPair> pairs;
  std::vector<LigandWork> fep_set_storage;
  run_stage("pair", [&] {
    std::size_t in_count = work.size();
    std::size_t fep_count =
        in_count == 0 ? 0
                      : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                                     cfg.keep_for_fep *
                                                     static_cast<double>(in_count))));
    fep_count = std::min(fep_count, in_count);
    // work is already in rank order; the fep set is its top slice.
    fep_set_storage.assign(std::make_move_iterator(work.begin()),
                           std::make_move_iterator(work.begin() + static_cast<long>(fep_count)));
    work.erase(work.begin(), work.begin() + static_cast<long>(fep_count));
    if (fep_set_storage.size() >= 2) {
      std::vector<chem::Ligand> ligs;
      for (const LigandWork& w : fep_set_storage) ligs.push_back(w.ligand);
      pairs = fep::pair_compounds(ligs);
    }
    report.stages.push_back({"pair", in_count, fep_set_storage.size(), 0.0, 0});
  });

  // fep --------------------------------------------------------------------
  run_stage("fep", [&] {
    auto ligand_of = [&](const std::string& id) -> const chem::Ligand& {
      for (const LigandWork& w : fep_set_storage) {
        if (w.ligand.id == id) return w.ligand;
      }
      throw std::logic_error("pair references unknown ligand " + id);
    };

    Rng stage_rng = master.split(3);
    std::vector<PairResult> results(pairs.size());
    parallel_for(pairs.size(), cfg.threads, [&](std::size_t pi) {
      const fep::CompoundPair& pr = pairs[pi];
      fep::AlchemicalModel model =
          toy_pair_model(ligand_of(pr.ligand_a), ligand_of(pr.ligand_b), cfg.fep_lambda_states);
      auto estimator = [&](std::uint64_t s) {
        fep::AwhResult ar = fep::awh_estimate(model, cfg.fep_steps, s);
        return std::pair<double, int>(ar.delta_f, static_cast<int>(ar.stage_gammas.size()));
      };
      fep::FreeEnergyResult fr = fep::run_until_sem_detailed(
          estimator, cfg.fep_target_sem, cfg.fep_max_replicas,
          stage_rng.split(pi).next_u64());
      results[pi] = {"P" + std::to_string(pi), pr.ligand_a, pr.ligand_b, fr};
    });
    report.pairs = std::move(results);

    // Every replica is a scheduler task tagged stage=fep.
    std::vector<sched::Task> tasks;
    for (const PairResult& pr : report.pairs) {
      for (int r = 0; r < pr.result.replicas; ++r) {
        sched::Task t;
        t.id = pr.pair_id + ".r" + std::to_string(r);
        t.request = cfg.fep_task_request;
        t.stage = "fep";
        t.duration_s = static_cast<double>(cfg.fep_steps) * 1e-5;
        tasks.push_back(std::move(t));
      }
    }
    double sim_seconds = 0.0;
    if (!tasks.empty()) {
      sched::Trace st = sched::run_simulation(tasks, cfg.cluster, cfg.policy, cfg.master_seed);
      trace.sched_events(st);
      sim_seconds = st.makespan_s;
    }
    report.stages.push_back(
        {"fep", fep_set_storage.size(), fep_set_storage.size(), sim_seconds, tasks.size()});
  });

  // final ranking ----------------------------------------------------------
  run_stage("report", [&] {
    Rng stage_rng = master.split(4);
    std::map<std::string, double> abfe;
    for (std::size_t i = 0; i < fep_set_storage.size(); ++i) {
      const chem::Ligand& lig = fep_set_storage[i].ligand;
      Rng r = stage_rng.split(i);
      std::vector<double> ec, er, el;
      for (int s = 0; s < 200; ++s) {
        ec.push_back(-0.08 * lig.heavy_atoms - 0.02 * lig.rotatable_bonds + 0.5 * r.normal());
        er.push_back(-1.0 + 0.3 * r.normal());
        el.push_back(-0.03 * lig.heavy_atoms + 0.2 * r.normal());
      }
      abfe[lig.id] = fep::abfe_estimate(ec, er, el, -0.04 * lig.heavy_atoms, -0.5,
                                        -0.02 * lig.heavy_atoms);
    }

    // Fep-stage ligands rank first (by toy ABFE ascending), the rest of the
    // dock-ranked list follows by score.
    std::vector<RankedLigand> ranked;
    std::vector<std::pair<double, std::string>> by_dg;
    for (const auto& [id, dg] : abfe) by_dg.emplace_back(dg, id);
    std::sort(by_dg.begin(), by_dg.end());
    for (const auto& [dg, id] : by_dg) {
      const LigandWork* w = nullptr;
      for (const LigandWork& lw : fep_set_storage) {
        if (lw.ligand.id == id) w = &lw;
      }
      ranked.push_back({id, w->score, dg});
    }
    for (const LigandWork& w : work) {
      ranked.push_back({w.ligand.id, w.score, std::nullopt});
    }
    if (static_cast<int>(ranked.size()) > cfg.top_n) {
      ranked.resize(static_cast<std::size_t>(cfg.top_n));
    }
    report.ranked = std::move(ranked);

    ensure_parent_dir(cfg.results_tsv_path);
    std::ofstream tsv(cfg.results_tsv_path, std::ios::binary);
    if (!tsv) throw ConfigError("cannot write results tsv: " + cfg.results_tsv_path);
    tsv << report.results_tsv();
    ensure_parent_dir(cfg.report_path);
    std::ofstream rep(cfg.report_path, std::ios::binary);
    if (!rep) throw ConfigError("cannot write report: " + cfg.report_path);
    rep << report.to_json();
  });

  return report;
}

}  // namespace vscreen::pipeline
