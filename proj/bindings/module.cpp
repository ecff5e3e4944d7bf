#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "vscreen/batcher.hpp"
#include "vscreen/chem.hpp"
#include "vscreen/codec.hpp"
#include "vscreen/dock.hpp"
#include "vscreen/fep.hpp"
#include "vscreen/pipeline.hpp"
#include "vscreen/sched.hpp"
#include "vscreen/tune.hpp"

namespace py = pybind11;
using namespace vscreen;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return py::none();
    case nlohmann::json::value_t::boolean: return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer: return py::int_(j.get<long long>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case nlohmann::json::value_t::number_float: return py::float_(j.get<double>());
    case nlohmann::json::value_t::string: return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(json_to_py(v));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it) {
        out[py::str(it.key())] = json_to_py(it.value());
      }
      return out;
    }
    default: return py::none();
  }
}

py::dict graph_to_dict(const chem::MolecularGraph& g) {
  py::list atoms, bonds, ring_flags;
  for (const auto& a : g.atoms) atoms.append(py::make_tuple(a.element, a.aromatic));
  for (const auto& b : g.bonds) {
    bonds.append(py::make_tuple(b.a, b.b, static_cast<int>(b.order)));
  }
  for (bool f : g.ring_bond_flags) ring_flags.append(f);
  py::dict d;
  d["atoms"] = atoms;
  d["bonds"] = bonds;
  d["ring_bond_flags"] = ring_flags;
  return d;
}

std::vector<Vec3> coords_from_py(const std::vector<std::array<double, 3>>& pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({p[0], p[1], p[2]});
  return out;
}

py::list coords_to_py(const std::vector<Vec3>& pts) {
  py::list out;
  for (const Vec3& p : pts) out.append(py::make_tuple(p.x, p.y, p.z));
  return out;
}

}  // namespace

PYBIND11_MODULE(vscreen, m) {
  m.doc() = "Desk-scale virtual screening campaign runtime";

  // chem ---------------------------------------------------------------
  m.def(
      "parse_smiles",
      [](const std::string& text) { return graph_to_dict(chem::parse_smiles(text)); },
      py::arg("text"),
      "Parse a restricted-grammar SMILES line into a molecular graph dict.");
  m.def(
      "rotatable_bonds",
      [](const std::string& smiles) { return chem::rotatable_bonds(chem::parse_smiles(smiles)); },
      py::arg("smiles"));
  m.def(
      "embed_3d",
      [](const std::string& smiles, std::uint64_t seed) {
        chem::Conformer c = chem::embed_3d(chem::parse_smiles(smiles), seed);
        return coords_to_py(c.coords);
      },
      py::arg("smiles"), py::arg("seed") = 0,
      "Deterministic toy 3D embedding; returns a list of (x, y, z).");

  // codec --------------------------------------------------------------
  m.def(
      "train_dictionary",
      [](const std::vector<std::string>& corpus, std::size_t max_entries) {
        return codec::train_dictionary(corpus, max_entries).entries;
      },
      py::arg("corpus"), py::arg("max_entries") = 128);
  m.def(
      "compress_line",
      [](const std::string& line, const std::vector<std::string>& entries) {
        codec::Dictionary d;
        d.entries = entries;
        auto bytes = codec::compress_line(line, d);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("line"), py::arg("entries"));
  m.def(
      "decompress_line",
      [](const py::bytes& data, const std::vector<std::string>& entries) {
        codec::Dictionary d;
        d.entries = entries;
        std::string raw = data;
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        return codec::decompress_line(bytes, d);
      },
      py::arg("data"), py::arg("entries"));
  m.def("load_dictionary", [](const std::string& path) {
    return codec::load_dictionary_file(path).entries;
  });

  // dock ---------------------------------------------------------------
  m.def(
      "dock_smiles",
      [](const std::string& smiles, const std::string& pocket_json, int restarts,
         double diversity_delta, std::uint64_t seed) {
        chem::MolecularGraph g = chem::parse_smiles(smiles);
        chem::Conformer conf = chem::embed_3d(g, seed);
        dock::TorsionTopology topo = dock::torsion_topology(g);
        dock::Pocket pocket = dock::parse_pocket_json(pocket_json);
        auto poses = dock::dock(conf, topo, pocket, restarts, diversity_delta, seed);
        py::list out;
        for (const auto& p : poses) {
          out.append(json_to_py(nlohmann::json::parse(dock::pose_to_json(p))));
        }
        return out;
      },
      py::arg("smiles"), py::arg("pocket_json"), py::arg("restarts") = 4,
      py::arg("diversity_delta") = 1.0, py::arg("seed") = 0,
      "Embed, dock and return pose dicts sorted by geometric score.");
  m.def(
      "rmsd",
      [](const std::vector<std::array<double, 3>>& a, const std::vector<std::array<double, 3>>& b) {
        return dock::rmsd(coords_from_py(a), coords_from_py(b));
      },
      py::arg("a"), py::arg("b"));

  // batcher -------------------------------------------------------------
  m.def(
      "simulate_throughput",
      [](long n_items, double launch_overhead_s, double service_time_s) {
        batcher::DeviceModel dev;
        dev.launch_overhead = launch_overhead_s;
        dev.service_time_per_class = {service_time_s};
        return batcher::simulate_throughput(n_items, 0, dev);
      },
      py::arg("n_items"), py::arg("launch_overhead_s"), py::arg("service_time_s"));
  m.def(
      "target_batch_size",
      [](double memory_capacity, double mem_fixed, double mem_per_atom, double mem_per_rotbond,
         int atom_hi, int rot_hi) {
        batcher::DeviceModel dev;
        dev.memory_capacity = memory_capacity;
        dev.mem_fixed = mem_fixed;
        dev.mem_per_atom = mem_per_atom;
        dev.mem_per_rotbond = mem_per_rotbond;
        batcher::SizeClass cls{0, atom_hi, 0, rot_hi};
        return batcher::target_batch_size(cls, dev);
      },
      py::arg("memory_capacity"), py::arg("mem_fixed"), py::arg("mem_per_atom"),
      py::arg("mem_per_rotbond"), py::arg("atom_hi"), py::arg("rot_hi"));

  // sched ----------------------------------------------------------------
  m.def(
      "run_simulation",
      [](const std::string& tasks_json, const std::string& workers_json,
         const std::string& policy_json, std::uint64_t seed) {
        nlohmann::json jt = nlohmann::json::parse(tasks_json);
        std::vector<sched::Task> tasks;
        for (const auto& t : jt) {
          sched::Task task;
          task.id = t.at("id").get<std::string>();
          task.request.cpu_cores = t.value("cpu_cores", 0L);
          task.request.accel_slots = t.value("accel_slots", 0L);
          task.request.memory = t.value("memory", 0L);
          if (t.contains("deps")) task.deps = t["deps"].get<std::vector<std::string>>();
          task.stage = t.value("stage", "");
          task.duration_s = t.value("duration_s", 0.0);
          tasks.push_back(std::move(task));
        }
        nlohmann::json jw = nlohmann::json::parse(workers_json);
        std::vector<sched::WorkerSpec> workers;
        for (const auto& w : jw) {
          sched::WorkerSpec spec;
          spec.id = w.at("id").get<std::string>();
          spec.capacity.cpu_cores = w.value("cpu_cores", 0L);
          spec.capacity.accel_slots = w.value("accel_slots", 0L);
          spec.capacity.memory = w.value("memory", 0L);
          workers.push_back(std::move(spec));
        }
        sched::AllocPolicy policy;
        if (!policy_json.empty()) {
          nlohmann::json jp = nlohmann::json::parse(policy_json);
          policy.enabled = jp.value("enabled", false);
          policy.backlog_threshold_core_s = jp.value("backlog_threshold_core_s", 0.0);
          policy.workers_per_alloc = jp.value("workers_per_alloc", 1);
          if (jp.contains("worker_shape")) {
            policy.worker_shape.cpu_cores = jp["worker_shape"].value("cpu_cores", 0L);
            policy.worker_shape.accel_slots = jp["worker_shape"].value("accel_slots", 0L);
            policy.worker_shape.memory = jp["worker_shape"].value("memory", 0L);
          }
          policy.walltime_s = jp.value("walltime_s", 3600.0);
          policy.max_queued = jp.value("max_queued", 1);
          policy.grant_delay_s = jp.value("grant_delay_s", 10.0);
        }
        sched::Trace trace = sched::run_simulation(tasks, workers, policy, seed);
        py::dict out;
        out["makespan_s"] = trace.makespan_s;
        out["util_cpu"] = trace.util_cpu;
        out["util_accel"] = trace.util_accel;
        out["util_memory"] = trace.util_memory;
        out["events_jsonl"] = trace.to_jsonl();
        return out;
      },
      py::arg("tasks_json"), py::arg("workers_json"), py::arg("policy_json") = "",
      py::arg("seed") = 0,
      "Run the deterministic scheduler simulation over JSON-encoded inputs.");

  // fep ------------------------------------------------------------------
  m.def(
      "mcs",
      [](const std::string& smiles_a, const std::string& smiles_b) {
        fep::McsMapping mm = fep::mcs(chem::parse_smiles(smiles_a), chem::parse_smiles(smiles_b));
        py::dict d;
        d["atom_pairs"] = mm.atom_pairs;
        d["mapped_bonds"] = mm.mapped_bonds;
        d["mapped_atoms"] = mm.mapped_atoms();
        return d;
      },
      py::arg("smiles_a"), py::arg("smiles_b"),
      "Exact maximum common connected substructure between two molecules.");
  m.def(
      "awh_estimate",
      [](const std::vector<double>& stiffness, const std::vector<double>& center,
         const std::vector<double>& offset, long steps, std::uint64_t seed) {
        fep::AlchemicalModel model = fep::harmonic_family(stiffness, center, offset);
        fep::AwhResult r = fep::awh_estimate(model, steps, seed);
        py::dict d;
        d["delta_f"] = r.delta_f;
        d["stages"] = r.stage_gammas.size();
        d["steps_used"] = r.steps_used;
        return d;
      },
      py::arg("stiffness"), py::arg("center"), py::arg("offset"), py::arg("steps") = 20000,
      py::arg("seed") = 0);
  m.def(
      "run_until_sem",
      [](const std::function<double(std::uint64_t)>& estimator, double target_sem,
         int max_replicas, std::uint64_t seed) {
        fep::FreeEnergyResult r = fep::run_until_sem(estimator, target_sem, max_replicas, seed);
        py::dict d;
        d["estimate"] = r.estimate;
        d["sem"] = r.sem;
        d["replicas"] = r.replicas;
        d["target_met"] = r.target_met;
        return d;
      },
      py::arg("estimator"), py::arg("target_sem"), py::arg("max_replicas") = 64,
      py::arg("seed") = 0);
  m.def(
      "abfe_estimate",
      [](const std::vector<double>& ec, const std::vector<double>& er,
         const std::vector<double>& el, double sc, double sr, double sl) {
        return fep::abfe_estimate(ec, er, el, sc, sr, sl);
      },
      py::arg("complex_samples"), py::arg("receptor_samples"), py::arg("ligand_samples"),
      py::arg("solv_complex"), py::arg("solv_receptor"), py::arg("solv_ligand"));

  // tune -----------------------------------------------------------------
  m.def(
      "suggest_next",
      [](const std::string& space_json, const std::vector<py::dict>& history,
         double budget_cost, std::uint64_t seed) {
        nlohmann::json js = nlohmann::json::parse(space_json);
        tune::KnobSpace space;
        for (const auto& jk : js.at("knobs")) {
          space.knobs.push_back(
              {jk.at("name").get<std::string>(), jk.at("domain").get<std::vector<double>>()});
        }
        std::vector<tune::Observation> obs;
        for (const auto& h : history) {
          tune::Observation o;
          o.config = h["config"].cast<std::vector<double>>();
          o.quality = h["quality"].cast<double>();
          o.cost = h["cost"].cast<double>();
          obs.push_back(std::move(o));
        }
        return tune::suggest_next(space, obs, budget_cost, seed);
      },
      py::arg("space_json"), py::arg("history"), py::arg("budget_cost") = 1e30,
      py::arg("seed") = 0);
  m.def(
      "pareto_front",
      [](const std::vector<std::pair<double, double>>& points) {
        std::vector<tune::Observation> obs;
        for (const auto& [q, c] : points) obs.push_back({{}, q, c});
        auto front = tune::pareto_front(obs);
        std::vector<std::pair<double, double>> out;
        for (const auto& o : front) out.emplace_back(o.quality, o.cost);
        return out;
      },
      py::arg("points"), "Non-dominated (quality, cost) subset, sorted by cost.");

  // pipeline ---------------------------------------------------------------
  m.def(
      "run_campaign",
      [](const std::string& config_path) {
        pipeline::CampaignReport r = pipeline::run_campaign(pipeline::load_config_file(config_path));
        return json_to_py(nlohmann::json::parse(r.to_json()));
      },
      py::arg("config_path"), "Run a full campaign; returns the report as a dict.");
  m.def(
      "rank_ligands",
      [](const std::map<std::string, double>& scores) { return pipeline::rank_ligands(scores); },
      py::arg("scores"));

  m.attr("__version__") = "0.1.0";
}
