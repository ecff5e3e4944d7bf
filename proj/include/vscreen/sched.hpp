#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vscreen::sched {

// Simulation time is integer microseconds so event ordering never depends
// on float rounding.
using SimTime = std::int64_t;

inline SimTime to_us(double seconds) {
  return static_cast<SimTime>(std::llround(seconds * 1e6));
}
inline double to_seconds(SimTime t) { return static_cast<double>(t) * 1e-6; }

struct Resources {
  long cpu_cores = 0;
  long accel_slots = 0;
  long memory = 0;

  [[nodiscard]] bool fits_in(const Resources& cap) const {
    return cpu_cores <= cap.cpu_cores && accel_slots <= cap.accel_slots && memory <= cap.memory;
  }
  [[nodiscard]] bool any_positive() const {
    return cpu_cores > 0 || accel_slots > 0 || memory > 0;
  }
  Resources& operator+=(const Resources& o) {
    cpu_cores += o.cpu_cores;
    accel_slots += o.accel_slots;
    memory += o.memory;
    return *this;
  }
  Resources& operator-=(const Resources& o) {
    cpu_cores -= o.cpu_cores;
    accel_slots -= o.accel_slots;
    memory -= o.memory;
    return *this;
  }
};

struct Task {
  std::string id;
  Resources request;
  std::vector<std::string> deps;
  std::string stage;
  double duration_s = 0.0;  // simulated service time
};

struct WorkerSpec {
  std::string id;
  Resources capacity;
};

enum class AllocState { Queued, Granted, Expired };

struct Allocation {
  std::string id;
  int worker_count = 1;
  Resources worker_shape;
  double walltime_s = 0.0;
  AllocState state = AllocState::Queued;
};

struct AllocPolicy {
  bool enabled = false;
  double backlog_threshold_core_s = 0.0;  // pending core-seconds that trigger a request
  int workers_per_alloc = 1;
  Resources worker_shape;
  double walltime_s = 3600.0;
  int max_queued = 1;
  double grant_delay_s = 10.0;  // simulated job-manager latency
};

struct TraceEvent {
  SimTime t_us = 0;
  std::string kind;  // submit ready assign start finish alloc_request alloc_grant worker_expire
  std::string task;
  std::string worker;
  std::string stage;
  std::string alloc;
};

struct Trace {
  std::vector<TraceEvent> events;
  double makespan_s = 0.0;
  double util_cpu = 0.0;
  double util_accel = 0.0;
  double util_memory = 0.0;

  [[nodiscard]] std::string to_jsonl() const;
};

class DuplicateId : public std::runtime_error {
 public:
  explicit DuplicateId(const std::string& id)
      : std::runtime_error("duplicate task id: " + id) {}
};

class CycleDetected : public std::runtime_error {
 public:
  CycleDetected() : std::runtime_error("task dependency cycle detected") {}
};

class StarvationError : public std::runtime_error {
 public:
  StarvationError(std::vector<std::string> task_ids, Trace trace);
  [[nodiscard]] const std::vector<std::string>& task_ids() const { return task_ids_; }
  [[nodiscard]] const Trace& trace() const { return trace_; }

 private:
  std::vector<std::string> task_ids_;
  Trace trace_;
};

// Registered task set with dependency bookkeeping. submit() is the spec's
// task-set handle: it validates ids and rejects cycles up front.
class TaskSystem {
 public:
  TaskSystem() = default;
  explicit TaskSystem(const std::vector<Task>& tasks) { submit(tasks); }

  void submit(const std::vector<Task>& tasks);

  [[nodiscard]] const Task& task(const std::string& id) const;
  [[nodiscard]] std::size_t size() const { return tasks_.size(); }

  // Unstarted tasks with every dependency finished, in submission order.
  [[nodiscard]] std::vector<std::string> ready() const;

  void mark_started(const std::string& id);
  // Returns tasks that became ready, in submission order.
  std::vector<std::string> mark_finished(const std::string& id);

  [[nodiscard]] bool finished(const std::string& id) const;
  [[nodiscard]] bool started(const std::string& id) const;
  [[nodiscard]] std::vector<std::string> unfinished() const;
  [[nodiscard]] std::size_t unfinished_count() const;

  // Core-seconds pending over unstarted tasks, optionally restricted to
  // tasks whose request fits a given shape.
  [[nodiscard]] double backlog_core_seconds(const Resources* fits_shape = nullptr) const;

 private:
  struct Entry {
    Task task;
    std::size_t order = 0;
    int unfinished_deps = 0;
    bool started = false;
    bool finished = false;
    std::vector<std::string> dependents;
  };
  std::map<std::string, Entry> tasks_;
  std::vector<std::string> order_;

  void check_acyclic() const;
};

struct WorkerState {
  std::string id;
  Resources capacity;
  Resources free;
  bool draining = false;  // walltime reached; finishes running tasks then vanishes
  int running = 0;
  SimTime spawned_at = 0;
  SimTime vanished_at = -1;  // -1 while alive
};

struct Assignment {
  std::string task_id;
  std::string worker_id;
};

// One scheduling pass: ready tasks longest-duration-first (ties: lowest id)
// onto the feasible worker with the most normalized free capacity (ties:
// lowest worker id). Work-conserving: afterwards no ready task fits any
// worker. Reservations are applied to `workers` and tasks marked started.
std::vector<Assignment> schedule_tick(TaskSystem& tasks, std::vector<WorkerState>& workers);

// Emits at most one allocation request per tick: backlog above threshold and
// fewer than max_queued outstanding requests. Backlog counts only tasks the
// policy's worker shape could ever run.
std::optional<Allocation> autoalloc_tick(const TaskSystem& tasks, const AllocPolicy& policy,
                                         int queued_allocations, int alloc_counter);

// Deterministic discrete-event simulation. The reference scheduler is fully
// deterministic; `seed` is accepted for interface stability and does not
// perturb the schedule. Throws StarvationError (with the partial trace) if
// unrunnable tasks remain when no further progress is possible.
Trace run_simulation(const std::vector<Task>& tasks, const std::vector<WorkerSpec>& workers,
                     const AllocPolicy& policy, std::uint64_t seed);

// JSON file formats for the CLI: tasks.json, cluster.json, policy.json.
std::vector<Task> load_tasks_file(const std::string& path);
std::vector<WorkerSpec> load_workers_file(const std::string& path);
AllocPolicy load_policy_file(const std::string& path);

}  // namespace vscreen::sched
