#include "vscreen/tune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "vscreen/rng.hpp"

namespace vscreen::tune {

double KnobSpace::cardinality() const {
  double card = 1.0;
  for (const Knob& k : knobs) card *= static_cast<double>(k.domain.size());
  return card;
}

void KnobSpace::validate() const {
  if (knobs.size() != 11) {
    throw InvalidConfig("knob space must have exactly 11 knobs, got " +
                        std::to_string(knobs.size()));
  }
  for (const Knob& k : knobs) {
    if (k.domain.empty()) throw InvalidConfig("knob " + k.name + " has an empty domain");
    if (!std::is_sorted(k.domain.begin(), k.domain.end())) {
      throw InvalidConfig("knob " + k.name + " domain must be ordered");
    }
  }
}

namespace {

std::size_t domain_index(const Knob& k, double value) {
  for (std::size_t i = 0; i < k.domain.size(); ++i) {
    if (k.domain[i] == value) return i;
  }
  throw InvalidConfig("value " + std::to_string(value) + " not in domain of knob " + k.name);
}

std::uint64_t config_key(const KnobSpace& space, const Config& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t k = 0; k < c.size(); ++k) {
    std::uint64_t idx = domain_index(space.knobs[k], c[k]);
    h = (h ^ (idx + 0x100)) * 0x100000001b3ull;
  }
  return h;
}

double sq(double v) { return v * v; }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace

void check_config(const KnobSpace& space, const Config& config) {
  if (config.size() != space.knobs.size()) {
    throw InvalidConfig("config has " + std::to_string(config.size()) + " values, space has " +
                        std::to_string(space.knobs.size()) + " knobs");
  }
  for (std::size_t k = 0; k < config.size(); ++k) domain_index(space.knobs[k], config[k]);
}

std::vector<double> normalize(const KnobSpace& space, const Config& config) {
  std::vector<double> z(config.size());
  for (std::size_t k = 0; k < config.size(); ++k) {
    std::size_t idx = domain_index(space.knobs[k], config[k]);
    std::size_t n = space.knobs[k].domain.size();
    z[k] = n > 1 ? static_cast<double>(idx) / static_cast<double>(n - 1) : 0.0;
  }
  return z;
}

SyntheticSurface::SyntheticSurface(const KnobSpace& space, std::uint64_t seed,
                                   double noise_sigma)
    : space_(space), seed_(seed), noise_sigma_(noise_sigma) {
  Rng rng = Rng(seed).split(0x5f);
  optimum_.resize(space.dims());
  for (std::size_t k = 0; k < space.dims(); ++k) {
    const auto& dom = space.knobs[k].domain;
    optimum_[k] = dom[rng.next_below(dom.size())];
  }
  opt_z_ = normalize(space, optimum_);
  quad_coeff_.resize(space.dims());
  cost_weight_.resize(space.dims());
  for (std::size_t k = 0; k < space.dims(); ++k) {
    quad_coeff_[k] = rng.uniform(1.0, 3.0);
    cost_weight_[k] = rng.uniform(0.1, 1.0);
  }
}

Observation SyntheticSurface::evaluate(const Config& config) {
  check_config(space_, config);
  std::vector<double> z = normalize(space_, config);
  double q = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) q += quad_coeff_[k] * sq(z[k] - opt_z_[k]);
  if (z.size() >= 2) q += interaction_ * (z[0] - opt_z_[0]) * (z[1] - opt_z_[1]);
  if (noise_sigma_ > 0.0) {
    // Noise keyed on the config so evaluate() is a deterministic function.
    Rng noise = Rng(seed_).split(config_key(space_, config));
    q += noise_sigma_ * noise.normal();
  }
  double cost = 1.0;
  for (std::size_t k = 0; k < z.size(); ++k) cost += cost_weight_[k] * z[k];
  return {config, q, cost};
}

Observation evaluate(const KnobSpace& space, const Config& config, Objective& objective) {
  check_config(space, config);
  return objective.evaluate(config);
}

namespace {

Config random_config(const KnobSpace& space, Rng& rng) {
  Config c(space.dims());
  for (std::size_t k = 0; k < space.dims(); ++k) {
    const auto& dom = space.knobs[k].domain;
    c[k] = dom[rng.next_below(dom.size())];
  }
  return c;
}

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += sq(a[i] - b[i]);
  return d;
}

struct Surrogate {
  const std::vector<std::vector<double>>& zs;
  const std::vector<double>& ys;
  double bandwidth;

  [[nodiscard]] double predict(const std::vector<double>& z) const {
    double wsum = 0.0, ysum = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      double w = std::exp(-sq_distance(z, zs[i]) / (2.0 * bandwidth * bandwidth));
      wsum += w;
      ysum += w * ys[i];
    }
    if (wsum < 1e-300) {
      // Too far from everything: fall back to the plain mean.
      return std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    }
    return ysum / wsum;
  }
};

}  // namespace

Config suggest_next(const KnobSpace& space, const std::vector<Observation>& history,
                    double budget_cost, std::uint64_t seed) {
  Rng rng = Rng(seed).split(history.size());

  std::vector<std::uint64_t> seen;
  seen.reserve(history.size());
  for (const Observation& o : history) seen.push_back(config_key(space, o.config));
  auto is_seen = [&](const Config& c) {
    std::uint64_t k = config_key(space, c);
    return std::find(seen.begin(), seen.end(), k) != seen.end();
  };
  bool exhausted = static_cast<double>(history.size()) >= space.cardinality();

  if (history.size() < 8) {
    Config c = random_config(space, rng);
    for (int attempt = 0; attempt < 256 && is_seen(c) && !exhausted; ++attempt) {
      c = random_config(space, rng);
    }
    return c;
  }

  std::vector<std::vector<double>> zs;
  zs.reserve(history.size());
  std::vector<double> qualities, costs;
  for (const Observation& o : history) {
    zs.push_back(normalize(space, o.config));
    qualities.push_back(o.quality);
    costs.push_back(o.cost);
  }

  // Bandwidth: median pairwise distance between history points.
  std::vector<double> dists;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    for (std::size_t j = i + 1; j < zs.size(); ++j) {
      dists.push_back(std::sqrt(sq_distance(zs[i], zs[j])));
    }
  }
  std::sort(dists.begin(), dists.end());
  double bw = dists.empty() ? 1.0 : dists[dists.size() / 2];
  if (bw < 1e-6) bw = 1e-6;

  Surrogate quality_model{zs, qualities, bw};
  Surrogate cost_model{zs, costs, bw};

  // Residual spread stands in for predictive uncertainty.
  double ss = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) ss += sq(qualities[i] - quality_model.predict(zs[i]));
  double sigma = std::sqrt(ss / static_cast<double>(zs.size()));

  double best_q = *std::min_element(qualities.begin(), qualities.end());

  constexpr int kCandidates = 1024;
  std::vector<Config> cands;
  cands.reserve(kCandidates);
  for (int i = 0; i < kCandidates; ++i) {
    Config c = random_config(space, rng);
    if (!exhausted && is_seen(c)) continue;
    cands.push_back(std::move(c));
  }
  if (cands.empty()) {
    // Tiny spaces: scan systematically for anything unseen.
    if (space.cardinality() <= 65536.0) {
      std::vector<std::size_t> idx(space.dims(), 0);
      for (;;) {
        Config c(space.dims());
        for (std::size_t k = 0; k < space.dims(); ++k) c[k] = space.knobs[k].domain[idx[k]];
        if (!is_seen(c)) {
          cands.push_back(std::move(c));
          break;
        }
        std::size_t k = 0;
        while (k < space.dims() && ++idx[k] == space.knobs[k].domain.size()) idx[k++] = 0;
        if (k == space.dims()) break;
      }
    }
    if (cands.empty()) cands.push_back(random_config(space, rng));  // space exhausted
  }

  std::vector<double> pred_cost(cands.size());
  std::vector<bool> within(cands.size());
  bool any_within = false;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    pred_cost[i] = cost_model.predict(normalize(space, cands[i]));
    within[i] = pred_cost[i] <= budget_cost;
    any_within = any_within || within[i];
  }
  if (!any_within) {
    // Constraint-first fallback: minimize predicted cost.
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      if (pred_cost[i] < pred_cost[best]) best = i;
    }
    return cands[best];
  }

  double best_ei = 0.0;
  int best_idx = -1;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (!within[i]) continue;
    std::vector<double> z = normalize(space, cands[i]);
    double mu = quality_model.predict(z);
    double ei;
    if (sigma < 1e-12) {
      ei = std::max(0.0, best_q - mu);
    } else {
      double gap = best_q - mu;
      double zed = gap / sigma;
      ei = gap * normal_cdf(zed) + sigma * normal_pdf(zed);
    }
    if (ei > best_ei) {
      best_ei = ei;
      best_idx = static_cast<int>(i);
    }
  }
  if (best_idx >= 0 && best_ei > 1e-15) return cands[static_cast<std::size_t>(best_idx)];

  // All EI vanished: explore the point farthest from everything observed.
  std::size_t best = 0;
  double best_min = -1.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (!within[i]) continue;
    std::vector<double> z = normalize(space, cands[i]);
    double mind = std::numeric_limits<double>::infinity();
    for (const auto& zi : zs) mind = std::min(mind, sq_distance(z, zi));
    if (mind > best_min) {
      best_min = mind;
      best = i;
    }
  }
  return cands[best];
}

std::vector<Observation> pareto_front(const std::vector<Observation>& history) {
  std::vector<Observation> sorted = history;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Observation& a, const Observation& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.quality < b.quality;
  });
  std::vector<Observation> front;
  double best_quality = std::numeric_limits<double>::infinity();
  for (const Observation& o : sorted) {
    if (!front.empty() && o.cost == front.back().cost && o.quality == front.back().quality) {
      continue;  // duplicate point
    }
    if (o.quality < best_quality) {
      front.push_back(o);
      best_quality = o.quality;
    }
  }
  return front;
}

KnobSpace load_space_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open knob space file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  KnobSpace space;
  for (const auto& jk : j.at("knobs")) {
    Knob k;
    k.name = jk.at("name").get<std::string>();
    k.domain = jk.at("domain").get<std::vector<double>>();
    space.knobs.push_back(std::move(k));
  }
  space.validate();
  return space;
}

std::string space_to_json(const KnobSpace& space) {
  nlohmann::ordered_json j;
  j["knobs"] = nlohmann::ordered_json::array();
  for (const Knob& k : space.knobs) {
    j["knobs"].push_back({{"name", k.name}, {"domain", k.domain}});
  }
  return j.dump(2);
}

}  // namespace vscreen::tune
