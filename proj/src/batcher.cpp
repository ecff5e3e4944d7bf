#include "vscreen/batcher.hpp"

#include <cmath>

namespace vscreen::batcher {

std::vector<SizeClass> default_classes() {
  std::vector<SizeClass> classes;
  const int atom_edges[4] = {1, 20, 40, 80};
  const int rot_edges[3] = {0, 4, 12};
  for (int ai = 0; ai < 3; ++ai) {
    for (int ri = 0; ri < 2; ++ri) {
      classes.push_back({atom_edges[ai], atom_edges[ai + 1], rot_edges[ri], rot_edges[ri + 1]});
    }
  }
  return classes;
}

std::size_t size_class(const chem::Ligand& ligand, std::span<const SizeClass> classes) {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].contains(ligand.heavy_atoms, ligand.rotatable_bonds)) return i;
  }
  throw OutOfRange("ligand " + ligand.id + " (" + std::to_string(ligand.heavy_atoms) +
                   " atoms, " + std::to_string(ligand.rotatable_bonds) +
                   " rotatable bonds) fits no size class");
}

long target_batch_size(const SizeClass& cls, const DeviceModel& dev) {
  double item = dev.mem_per_atom * cls.atom_hi + dev.mem_per_rotbond * cls.rot_hi;
  double budget = dev.memory_capacity - dev.mem_fixed;
  if (item > budget) {
    throw ItemTooLarge("worst-case item memory " + std::to_string(item) +
                       " exceeds device budget " + std::to_string(budget));
  }
  if (item <= 0.0) return 1;
  auto n = static_cast<long>(std::floor(budget / item));
  return n < 1 ? 1 : n;
}

double simulate_throughput(long n_items, std::size_t cls, const DeviceModel& dev) {
  double n = static_cast<double>(n_items);
  return n / (dev.launch_overhead + n * dev.service_time(cls));
}

BatchQueue::BatchQueue(std::vector<SizeClass> classes, const DeviceModel& dev, double max_age)
    : classes_(std::move(classes)), max_age_(max_age) {
  targets_.reserve(classes_.size());
  for (const SizeClass& c : classes_) targets_.push_back(target_batch_size(c, dev));
  buffers_.resize(classes_.size());
}

Batch BatchQueue::drain(std::size_t cls) {
  Batch batch;
  batch.cls = cls;
  for (Entry& e : buffers_[cls]) batch.ligand_ids.push_back(std::move(e.id));
  buffers_[cls].clear();
  return batch;
}

std::optional<Batch> BatchQueue::enqueue(const std::string& ligand_id, std::size_t cls,
                                         double now) {
  if (cls >= classes_.size()) throw OutOfRange("class index out of range");
  buffers_[cls].push_back({ligand_id, now});
  if (static_cast<long>(buffers_[cls].size()) >= targets_[cls]) {
    return drain(cls);
  }
  return std::nullopt;
}

std::vector<Batch> BatchQueue::flush_aged(double now) {
  std::vector<Batch> out;
  for (std::size_t cls = 0; cls < buffers_.size(); ++cls) {
    if (!buffers_[cls].empty() && now - buffers_[cls].front().enqueued_at > max_age_) {
      out.push_back(drain(cls));
    }
  }
  return out;
}

std::vector<Batch> BatchQueue::flush_all() {
  std::vector<Batch> out;
  for (std::size_t cls = 0; cls < buffers_.size(); ++cls) {
    if (!buffers_[cls].empty()) out.push_back(drain(cls));
  }
  return out;
}

}  // namespace vscreen::batcher
