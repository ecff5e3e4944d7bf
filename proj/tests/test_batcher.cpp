#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vscreen/batcher.hpp"
#include "vscreen/rng.hpp"

using namespace vscreen;
using namespace vscreen::batcher;

namespace {

chem::Ligand ligand_with(int atoms, int rotbonds) {
  chem::Ligand l;
  l.id = "L";
  l.heavy_atoms = atoms;
  l.rotatable_bonds = rotbonds;
  return l;
}

}  // namespace

TEST_CASE("size_class containment and half-open boundaries") {
  std::vector<SizeClass> classes = {{1, 10, 0, 99}, {10, 20, 0, 99}};
  CHECK(size_class(ligand_with(3, 0), classes) == 0);
  CHECK(size_class(ligand_with(10, 0), classes) == 1);  // boundary goes right
  CHECK(size_class(ligand_with(19, 5), classes) == 1);
  CHECK_THROWS_AS(size_class(ligand_with(200, 0), classes), OutOfRange);

  // default grid partitions its space: every (atoms, rotbonds) point in
  // range lands in exactly one class
  auto defaults = default_classes();
  for (int atoms = 1; atoms < 80; ++atoms) {
    for (int rot = 0; rot < 12; ++rot) {
      int hits = 0;
      for (const SizeClass& c : defaults) hits += c.contains(atoms, rot) ? 1 : 0;
      CHECK(hits == 1);
    }
  }
}

TEST_CASE("target_batch_size arithmetic") {
  DeviceModel dev;
  dev.memory_capacity = 1000;
  dev.mem_fixed = 0;
  dev.mem_per_atom = 1;
  dev.mem_per_rotbond = 0;
  SizeClass cls{0, 100, 0, 10};  // worst case 100 units
  CHECK(target_batch_size(cls, dev) == 10);

  SizeClass too_big{0, 1001, 0, 0};
  CHECK_THROWS_AS(target_batch_size(too_big, dev), ItemTooLarge);

  DeviceModel tight;
  tight.memory_capacity = 150;
  tight.mem_fixed = 50;
  tight.mem_per_atom = 1;
  tight.mem_per_rotbond = 0;
  SizeClass exact{0, 100, 0, 0};  // capacity - fixed == one item
  CHECK(target_batch_size(exact, tight) == 1);
}

TEST_CASE("memory safety over random device models") {
  Rng rng(606);
  for (int iter = 0; iter < 500; ++iter) {
    Rng r = rng.split(static_cast<std::uint64_t>(iter));
    DeviceModel dev;
    dev.mem_fixed = r.uniform(0, 100);
    dev.mem_per_atom = r.uniform(0.1, 4.0);
    dev.mem_per_rotbond = r.uniform(0.0, 8.0);
    SizeClass cls;
    cls.atom_hi = 1 + static_cast<int>(r.next_below(80));
    cls.rot_hi = static_cast<int>(r.next_below(12));
    double item = dev.mem_per_atom * cls.atom_hi + dev.mem_per_rotbond * cls.rot_hi;
    dev.memory_capacity = dev.mem_fixed + item * r.uniform(1.0, 50.0);

    long n = target_batch_size(cls, dev);
    CHECK(n >= 1);
    CHECK(static_cast<double>(n) * item + dev.mem_fixed <=
          dev.memory_capacity + 1e-9 * dev.memory_capacity);
  }
}

TEST_CASE("simulate_throughput closed forms") {
  DeviceModel dev;
  dev.launch_overhead = 0.009;
  dev.service_time_per_class = {0.001};
  CHECK(simulate_throughput(1, 0, dev) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(simulate_throughput(10, 0, dev) == doctest::Approx(10.0 / 0.019).epsilon(1e-12));

  DeviceModel no_overhead;
  no_overhead.launch_overhead = 0.0;
  no_overhead.service_time_per_class = {0.002};
  for (long n : {1L, 5L, 100L}) {
    CHECK(simulate_throughput(n, 0, no_overhead) == doctest::Approx(500.0).epsilon(1e-12));
  }
}

TEST_CASE("throughput is monotone in n and batching wins") {
  Rng rng(707);
  for (int iter = 0; iter < 200; ++iter) {
    Rng r = rng.split(static_cast<std::uint64_t>(iter));
    DeviceModel dev;
    dev.launch_overhead = r.uniform(0.001, 0.1);
    dev.service_time_per_class = {r.uniform(0.0001, 0.01)};
    dev.memory_capacity = 1000;
    dev.mem_per_atom = r.uniform(0.5, 5.0);
    SizeClass cls{0, 1 + static_cast<int>(r.next_below(50)), 0, 0};

    double prev = 0.0;
    for (long n = 1; n <= 64; n *= 2) {
      double tp = simulate_throughput(n, 0, dev);
      CHECK(tp >= prev);
      prev = tp;
    }
    long target = target_batch_size(cls, dev);
    if (target > 1) {
      CHECK(simulate_throughput(target, 0, dev) > simulate_throughput(1, 0, dev));
    }
  }
}

TEST_CASE("batch queue flushes at target and preserves FIFO") {
  DeviceModel dev;
  dev.memory_capacity = 100;
  dev.mem_per_atom = 1;
  dev.service_time_per_class = {0.001};
  std::vector<SizeClass> classes = {{0, 20, 0, 99}, {20, 50, 0, 99}};  // targets 5 and 2
  BatchQueue queue(classes, dev);
  CHECK(queue.target(0) == 5);
  CHECK(queue.target(1) == 2);

  std::vector<Batch> flushed;
  for (int i = 0; i < 12; ++i) {
    // invariant: buffer stays below 2x target
    CHECK(queue.buffered(0) < 2 * static_cast<std::size_t>(queue.target(0)));
    auto b = queue.enqueue("m" + std::to_string(i), 0, 0.01 * i);
    if (b) flushed.push_back(std::move(*b));
  }
  REQUIRE(flushed.size() == 2);
  CHECK(flushed[0].ligand_ids ==
        std::vector<std::string>{"m0", "m1", "m2", "m3", "m4"});
  CHECK(flushed[1].ligand_ids ==
        std::vector<std::string>{"m5", "m6", "m7", "m8", "m9"});
  CHECK(queue.buffered(0) == 2);

  // timed flush drains the stale remainder
  auto aged = queue.flush_aged(10.0);
  REQUIRE(aged.size() == 1);
  CHECK(aged[0].ligand_ids == std::vector<std::string>{"m10", "m11"});

  // flush_all drains everything left
  queue.enqueue("x", 1, 0.0);
  auto rest = queue.flush_all();
  REQUIRE(rest.size() == 1);
  CHECK(rest[0].cls == 1);
}
