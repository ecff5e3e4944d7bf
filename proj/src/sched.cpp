#include "vscreen/sched.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace vscreen::sched {

StarvationError::StarvationError(std::vector<std::string> task_ids, Trace trace)
    : std::runtime_error("starvation: " + std::to_string(task_ids.size()) +
                         " task(s) can never run"),
      task_ids_(std::move(task_ids)),
      trace_(std::move(trace)) {}

std::string Trace::to_jsonl() const {
  std::ostringstream out;
  for (const TraceEvent& e : events) {
    nlohmann::ordered_json j;
    j["t_us"] = e.t_us;
    j["kind"] = e.kind;
    if (!e.task.empty()) j["task"] = e.task;
    if (!e.worker.empty()) j["worker"] = e.worker;
    if (!e.stage.empty()) j["stage"] = e.stage;
    if (!e.alloc.empty()) j["alloc"] = e.alloc;
    out << j.dump() << '\n';
  }
  return out.str();
}

void TaskSystem::submit(const std::vector<Task>& tasks) {
  for (const Task& t : tasks) {
    if (t.id.empty()) throw std::invalid_argument("task id must be non-empty");
    if (tasks_.count(t.id)) throw DuplicateId(t.id);
    if (!t.request.any_positive()) {
      throw std::invalid_argument("task " + t.id + " requests no resources");
    }
    if (t.request.cpu_cores < 0 || t.request.accel_slots < 0 || t.request.memory < 0) {
      throw std::invalid_argument("task " + t.id + " has a negative resource request");
    }
    if (t.duration_s < 0.0) {
      throw std::invalid_argument("task " + t.id + " has negative duration");
    }
    Entry e;
    e.task = t;
    e.order = order_.size();
    tasks_.emplace(t.id, std::move(e));
    order_.push_back(t.id);
  }
  // Wire dependencies after all ids of this submission are known.
  for (const Task& t : tasks) {
    Entry& e = tasks_.at(t.id);
    for (const std::string& dep : t.deps) {
      auto it = tasks_.find(dep);
      if (it == tasks_.end()) {
        throw std::invalid_argument("task " + t.id + " depends on unknown task " + dep);
      }
      if (!it->second.finished) ++e.unfinished_deps;
      it->second.dependents.push_back(t.id);
    }
  }
  check_acyclic();
}

void TaskSystem::check_acyclic() const {
  std::map<std::string, int> indegree;
  for (const auto& [id, e] : tasks_) indegree[id] = static_cast<int>(e.task.deps.size());
  std::vector<std::string> queue;
  for (const auto& [id, d] : indegree) {
    if (d == 0) queue.push_back(id);
  }
  std::size_t seen = 0;
  while (!queue.empty()) {
    std::string id = std::move(queue.back());
    queue.pop_back();
    ++seen;
    for (const std::string& dep : tasks_.at(id).dependents) {
      if (--indegree[dep] == 0) queue.push_back(dep);
    }
  }
  if (seen != tasks_.size()) throw CycleDetected();
}

const Task& TaskSystem::task(const std::string& id) const { return tasks_.at(id).task; }

std::vector<std::string> TaskSystem::ready() const {
  std::vector<std::string> out;
  for (const std::string& id : order_) {
    const Entry& e = tasks_.at(id);
    if (!e.started && e.unfinished_deps == 0) out.push_back(id);
  }
  return out;
}

void TaskSystem::mark_started(const std::string& id) { tasks_.at(id).started = true; }

std::vector<std::string> TaskSystem::mark_finished(const std::string& id) {
  Entry& e = tasks_.at(id);
  e.finished = true;
  std::vector<std::string> newly;
  for (const std::string& dep : e.dependents) {
    Entry& d = tasks_.at(dep);
    if (--d.unfinished_deps == 0 && !d.started) newly.push_back(dep);
  }
  std::sort(newly.begin(), newly.end(), [&](const std::string& a, const std::string& b) {
    return tasks_.at(a).order < tasks_.at(b).order;
  });
  return newly;
}

bool TaskSystem::finished(const std::string& id) const { return tasks_.at(id).finished; }
bool TaskSystem::started(const std::string& id) const { return tasks_.at(id).started; }

std::vector<std::string> TaskSystem::unfinished() const {
  std::vector<std::string> out;
  for (const std::string& id : order_) {
    if (!tasks_.at(id).finished) out.push_back(id);
  }
  return out;
}

std::size_t TaskSystem::unfinished_count() const {
  std::size_t n = 0;
  for (const auto& [id, e] : tasks_) {
    if (!e.finished) ++n;
  }
  return n;
}

double TaskSystem::backlog_core_seconds(const Resources* fits_shape) const {
  double total = 0.0;
  for (const auto& [id, e] : tasks_) {
    if (e.started) continue;
    if (fits_shape && !e.task.request.fits_in(*fits_shape)) continue;
    total += e.task.duration_s * static_cast<double>(e.task.request.cpu_cores);
  }
  return total;
}

namespace {

// Free capacity normalized by total capacity, summed over non-trivial dims.
double balance_metric(const WorkerState& w) {
  double m = 0.0;
  if (w.capacity.cpu_cores > 0) {
    m += static_cast<double>(w.free.cpu_cores) / static_cast<double>(w.capacity.cpu_cores);
  }
  if (w.capacity.accel_slots > 0) {
    m += static_cast<double>(w.free.accel_slots) / static_cast<double>(w.capacity.accel_slots);
  }
  if (w.capacity.memory > 0) {
    m += static_cast<double>(w.free.memory) / static_cast<double>(w.capacity.memory);
  }
  return m;
}

}  // namespace

std::vector<Assignment> schedule_tick(TaskSystem& tasks, std::vector<WorkerState>& workers) {
  std::vector<std::string> ready = tasks.ready();
  std::sort(ready.begin(), ready.end(), [&](const std::string& a, const std::string& b) {
    double da = tasks.task(a).duration_s;
    double db = tasks.task(b).duration_s;
    if (da != db) return da > db;  // longest first
    return a < b;
  });

  std::vector<Assignment> out;
  for (const std::string& id : ready) {
    const Resources& req = tasks.task(id).request;
    int best = -1;
    for (int i = 0; i < static_cast<int>(workers.size()); ++i) {
      WorkerState& w = workers[static_cast<std::size_t>(i)];
      if (w.draining || w.vanished_at >= 0) continue;
      if (!req.fits_in(w.free)) continue;
      if (best < 0) {
        best = i;
        continue;
      }
      WorkerState& bw = workers[static_cast<std::size_t>(best)];
      double mi = balance_metric(w);
      double mb = balance_metric(bw);
      if (mi > mb || (mi == mb && w.id < bw.id)) best = i;
    }
    if (best < 0) continue;
    WorkerState& w = workers[static_cast<std::size_t>(best)];
    w.free -= req;
    ++w.running;
    tasks.mark_started(id);
    out.push_back({id, w.id});
  }
  return out;
}

std::optional<Allocation> autoalloc_tick(const TaskSystem& tasks, const AllocPolicy& policy,
                                         int queued_allocations, int alloc_counter) {
  if (!policy.enabled) return std::nullopt;
  if (queued_allocations >= policy.max_queued) return std::nullopt;
  if (tasks.backlog_core_seconds(&policy.worker_shape) <= policy.backlog_threshold_core_s) {
    return std::nullopt;
  }
  Allocation a;
  a.id = "a" + std::to_string(alloc_counter);
  a.worker_count = policy.workers_per_alloc;
  a.worker_shape = policy.worker_shape;
  a.walltime_s = policy.walltime_s;
  a.state = AllocState::Queued;
  return a;
}

namespace {

struct PendingEvent {
  SimTime t;
  std::uint64_t seq;
  enum Kind { Finish, Grant, Expire } kind;
  std::string task;     // Finish
  std::string worker;   // Finish/Expire
  std::string alloc;    // Grant

  bool operator>(const PendingEvent& o) const {
    if (t != o.t) return t > o.t;
    return seq > o.seq;  // FIFO among equal times
  }
};

}  // namespace

Trace run_simulation(const std::vector<Task>& task_list, const std::vector<WorkerSpec>& specs,
                     const AllocPolicy& policy, std::uint64_t /*seed*/) {
  TaskSystem tasks(task_list);

  std::vector<WorkerState> workers;
  for (const WorkerSpec& s : specs) {
    workers.push_back({s.id, s.capacity, s.capacity, false, 0, 0, -1});
  }

  Trace trace;
  auto emit = [&](SimTime t, const char* kind, const std::string& task,
                  const std::string& worker, const std::string& stage,
                  const std::string& alloc) {
    trace.events.push_back({t, kind, task, worker, stage, alloc});
  };

  SimTime now = 0;
  for (const Task& t : task_list) emit(now, "submit", t.id, "", t.stage, "");
  for (const std::string& id : tasks.ready()) emit(now, "ready", id, "", tasks.task(id).stage, "");

  std::priority_queue<PendingEvent, std::vector<PendingEvent>, std::greater<>> heap;
  std::uint64_t seq = 0;
  int alloc_counter = 0;
  int queued_allocs = 0;
  std::map<std::string, Allocation> allocations;
  SimTime last_finish = 0;

  struct BusySpan {
    Resources request;
    SimTime start, end;
  };
  std::vector<BusySpan> busy;

  for (;;) {
    // Allocation request, then scheduling, at the current instant.
    if (auto a = autoalloc_tick(tasks, policy, queued_allocs, alloc_counter)) {
      ++alloc_counter;
      ++queued_allocs;
      allocations.emplace(a->id, *a);
      emit(now, "alloc_request", "", "", "", a->id);
      heap.push({now + to_us(policy.grant_delay_s), seq++, PendingEvent::Grant, "", "", a->id});
    }
    for (const Assignment& as : schedule_tick(tasks, workers)) {
      emit(now, "assign", as.task_id, as.worker_id, tasks.task(as.task_id).stage, "");
      emit(now, "start", as.task_id, as.worker_id, tasks.task(as.task_id).stage, "");
      SimTime dur = to_us(tasks.task(as.task_id).duration_s);
      heap.push({now + dur, seq++, PendingEvent::Finish, as.task_id, as.worker_id, ""});
      busy.push_back({tasks.task(as.task_id).request, now, now + dur});
    }

    if (heap.empty()) break;
    now = heap.top().t;
    while (!heap.empty() && heap.top().t == now) {
      PendingEvent ev = heap.top();
      heap.pop();
      switch (ev.kind) {
        case PendingEvent::Finish: {
          auto wit = std::find_if(workers.begin(), workers.end(),
                                  [&](const WorkerState& w) { return w.id == ev.worker; });
          wit->free += tasks.task(ev.task).request;
          --wit->running;
          emit(now, "finish", ev.task, ev.worker, tasks.task(ev.task).stage, "");
          last_finish = now;
          for (const std::string& id : tasks.mark_finished(ev.task)) {
            emit(now, "ready", id, "", tasks.task(id).stage, "");
          }
          if (wit->draining && wit->running == 0) {
            wit->vanished_at = now;
            emit(now, "worker_expire", "", wit->id, "", "");
          }
          break;
        }
        case PendingEvent::Grant: {
          Allocation& a = allocations.at(ev.alloc);
          a.state = AllocState::Granted;
          --queued_allocs;
          emit(now, "alloc_grant", "", "", "", a.id);
          for (int i = 0; i < a.worker_count; ++i) {
            std::string wid = a.id + ".w" + std::to_string(i);
            workers.push_back({wid, a.worker_shape, a.worker_shape, false, 0, now, -1});
            heap.push({now + to_us(a.walltime_s), seq++, PendingEvent::Expire, "", wid, ""});
          }
          break;
        }
        case PendingEvent::Expire: {
          auto wit = std::find_if(workers.begin(), workers.end(),
                                  [&](const WorkerState& w) { return w.id == ev.worker; });
          if (wit->vanished_at >= 0) break;
          wit->draining = true;
          if (wit->running == 0) {
            wit->vanished_at = now;
            emit(now, "worker_expire", "", wit->id, "", "");
          }
          break;
        }
      }
    }
  }

  trace.makespan_s = to_seconds(last_finish);

  // Utilization per dimension: executed work over available capacity-time
  // within [0, makespan].
  double busy_d[3] = {0, 0, 0};
  for (const BusySpan& b : busy) {
    double dur = to_seconds(b.end - b.start);
    busy_d[0] += dur * static_cast<double>(b.request.cpu_cores);
    busy_d[1] += dur * static_cast<double>(b.request.accel_slots);
    busy_d[2] += dur * static_cast<double>(b.request.memory);
  }
  double avail_d[3] = {0, 0, 0};
  for (const WorkerState& w : workers) {
    SimTime until = w.vanished_at >= 0 ? std::min(w.vanished_at, last_finish) : last_finish;
    SimTime from = std::min(w.spawned_at, last_finish);
    double span = to_seconds(std::max<SimTime>(0, until - from));
    avail_d[0] += span * static_cast<double>(w.capacity.cpu_cores);
    avail_d[1] += span * static_cast<double>(w.capacity.accel_slots);
    avail_d[2] += span * static_cast<double>(w.capacity.memory);
  }
  trace.util_cpu = avail_d[0] > 0 ? busy_d[0] / avail_d[0] : 0.0;
  trace.util_accel = avail_d[1] > 0 ? busy_d[1] / avail_d[1] : 0.0;
  trace.util_memory = avail_d[2] > 0 ? busy_d[2] / avail_d[2] : 0.0;

  if (tasks.unfinished_count() > 0) {
    throw StarvationError(tasks.unfinished(), std::move(trace));
  }
  return trace;
}

namespace {

Resources resources_from_json(const nlohmann::json& j) {
  Resources r;
  r.cpu_cores = j.value("cpu_cores", 0L);
  r.accel_slots = j.value("accel_slots", 0L);
  r.memory = j.value("memory", 0L);
  return r;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return nlohmann::json::parse(in);
}

}  // namespace

std::vector<Task> load_tasks_file(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  const nlohmann::json& arr = j.is_array() ? j : j.at("tasks");
  std::vector<Task> tasks;
  for (const auto& jt : arr) {
    Task t;
    t.id = jt.at("id").get<std::string>();
    t.request = resources_from_json(jt);
    if (jt.contains("deps")) t.deps = jt["deps"].get<std::vector<std::string>>();
    t.stage = jt.value("stage", "");
    t.duration_s = jt.value("duration_s", 0.0);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<WorkerSpec> load_workers_file(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  const nlohmann::json& arr = j.is_array() ? j : j.at("workers");
  std::vector<WorkerSpec> workers;
  for (const auto& jw : arr) {
    WorkerSpec w;
    w.id = jw.at("id").get<std::string>();
    w.capacity = resources_from_json(jw);
    workers.push_back(std::move(w));
  }
  return workers;
}

AllocPolicy load_policy_file(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  AllocPolicy p;
  p.enabled = j.value("enabled", false);
  p.backlog_threshold_core_s = j.value("backlog_threshold_core_s", 0.0);
  p.workers_per_alloc = j.value("workers_per_alloc", 1);
  if (j.contains("worker_shape")) p.worker_shape = resources_from_json(j["worker_shape"]);
  p.walltime_s = j.value("walltime_s", 3600.0);
  p.max_queued = j.value("max_queued", 1);
  p.grant_delay_s = j.value("grant_delay_s", 10.0);
  return p;
}

}  // namespace vscreen::sched
