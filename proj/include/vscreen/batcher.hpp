#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vscreen/chem.hpp"

namespace vscreen::batcher {

// Abstract device model: memory footprint per item plus a fixed kernel
// launch overhead and a per-class service time.
struct DeviceModel {
  double memory_capacity = 0.0;
  double mem_fixed = 0.0;
  double mem_per_atom = 0.0;
  double mem_per_rotbond = 0.0;
  double launch_overhead = 0.0;                // seconds
  std::vector<double> service_time_per_class;  // seconds per item, indexed by class

  [[nodiscard]] double service_time(std::size_t cls) const {
    return cls < service_time_per_class.size() ? service_time_per_class[cls]
                                               : service_time_per_class.back();
  }
};

// Half-open descriptor ranges: atoms in [atom_lo, atom_hi), rotatable bonds
// in [rot_lo, rot_hi).
struct SizeClass {
  int atom_lo = 0, atom_hi = 0;
  int rot_lo = 0, rot_hi = 0;

  [[nodiscard]] bool contains(int atoms, int rotbonds) const {
    return atoms >= atom_lo && atoms < atom_hi && rotbonds >= rot_lo && rotbonds < rot_hi;
  }
};

class OutOfRange : public std::runtime_error {
 public:
  explicit OutOfRange(const std::string& msg) : std::runtime_error(msg) {}
};

class ItemTooLarge : public std::runtime_error {
 public:
  explicit ItemTooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

// Default grid: atoms {[1,20),[20,40),[40,80)} x rotbonds {[0,4),[4,12)}.
std::vector<SizeClass> default_classes();

std::size_t size_class(const chem::Ligand& ligand, std::span<const SizeClass> classes);

// floor((capacity - fixed) / worst-case item memory), minimum 1.
long target_batch_size(const SizeClass& cls, const DeviceModel& dev);

// n / (launch_overhead + n * service_time).
double simulate_throughput(long n_items, std::size_t cls, const DeviceModel& dev);

struct Batch {
  std::size_t cls = 0;
  std::vector<std::string> ligand_ids;  // FIFO within the class
};

// Per-class FIFO buffers flushed at the class target size; a timed flush
// (oldest entry older than max_age seconds) keeps rare classes moving.
class BatchQueue {
 public:
  BatchQueue(std::vector<SizeClass> classes, const DeviceModel& dev, double max_age = 1.0);

  // Returns a full batch when this enqueue reaches the class target.
  std::optional<Batch> enqueue(const std::string& ligand_id, std::size_t cls, double now);

  // Flushes every class whose oldest entry is older than max_age.
  std::vector<Batch> flush_aged(double now);

  // Drains everything; used at end of stream.
  std::vector<Batch> flush_all();

  [[nodiscard]] std::size_t buffered(std::size_t cls) const { return buffers_[cls].size(); }
  [[nodiscard]] long target(std::size_t cls) const { return targets_[cls]; }

 private:
  struct Entry {
    std::string id;
    double enqueued_at;
  };
  std::vector<SizeClass> classes_;
  std::vector<long> targets_;
  std::vector<std::deque<Entry>> buffers_;
  double max_age_;

  Batch drain(std::size_t cls);
};

}  // namespace vscreen::batcher
