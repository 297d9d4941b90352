#include "sgrl/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "json_util.hpp"
#include "sgrl/io.hpp"
#include "sgrl/parallel.hpp"

namespace sgrl {

using detail::json;

ContactMode sample_contact_mode(const SceneSpec& spec, Rng& rng) {
  const int n = static_cast<int>(spec.support_set.size());
  const int max_arity = std::min(3, n);
  const int arity = 1 + uniform_index(rng, max_arity);
  // Uniform k-subset: partial Fisher-Yates over the support list.
  std::vector<int> pool = spec.support_set;
  for (int k = 0; k < arity; ++k) {
    const int pick = k + uniform_index(rng, n - k);
    std::swap(pool[k], pool[pick]);
  }
  ContactMode mode;
  mode.supports.assign(pool.begin(), pool.begin() + arity);
  std::sort(mode.supports.begin(), mode.supports.end());
  return mode;
}

bool sample_state_attempt(const SceneSpec& spec, std::uint64_t seed, long attempt,
                          const ALParams& al, StaticConfig* out, int* n_evals) {
  Rng rng = make_rng(seed, Stream::kModes, static_cast<std::uint64_t>(attempt));
  const ContactMode mode = sample_contact_mode(spec, rng);
  Vec6 s_bar;
  for (int k = 0; k < 6; ++k) s_bar(k) = uniform(rng, spec.box_lower(k), spec.box_upper(k));
  const ConstraintSpec cs = build_constraints(spec, mode);
  *n_evals = 0;
  NLPResult res;
  try {
    res = solve_proximal(cs, s_bar, al);
  } catch (const DegenerateGeometryError&) {
    *n_evals = 1;
    return false;
  }
  *n_evals = res.n_evals;
  if (!res.feasible) return false;
  StaticConfig config;
  unpack_decision(cs, res.z, &config.s, &config.mode);
  config.violation = res.violation;
  if (revalidate(spec, config) > al.tol_feas) return false;
  *out = std::move(config);
  return true;
}

StateDataset generate_states(const SceneSpec& spec, int count, std::uint64_t seed,
                             const SamplerOptions& options) {
  if (count < 1) throw ConfigError("sample count must be at least 1");
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  StateDataset ds;
  ds.scene_hash = scene_hash(spec);
  ds.seed = seed;
  const long budget = options.max_attempts_per_sample * count;
  const int chunk = std::max(1, options.chunk);

  struct Slot {
    bool ok = false;
    int evals = 0;
    StaticConfig config;
  };
  long next = 0;
  while (static_cast<int>(ds.samples.size()) < count && next < budget) {
    const long end = std::min(budget, next + chunk);
    std::vector<Slot> slots(end - next);
    parallel_for(next, end, options.workers, [&](long a) {
      Slot& slot = slots[a - next];
      slot.ok = sample_state_attempt(spec, seed, a, options.al, &slot.config, &slot.evals);
    });
    for (long a = next; a < end; ++a) {
      Slot& slot = slots[a - next];
      ++ds.stats.attempts;
      ds.stats.evals_total += slot.evals;
      if (slot.ok) {
        ds.samples.push_back(std::move(slot.config));
        if (static_cast<int>(ds.samples.size()) == count) break;
      }
    }
    next = end;
  }
  ds.complete = static_cast<int>(ds.samples.size()) == count;
  ds.stats.feasible = static_cast<long>(ds.samples.size());
  ds.stats.feasibility_rate =
      ds.stats.attempts > 0 ? double(ds.stats.feasible) / double(ds.stats.attempts) : 0.0;
  ds.stats.evals_per_sample =
      ds.stats.feasible > 0 ? double(ds.stats.evals_total) / double(ds.stats.feasible) : 0.0;
  ds.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ds;
}

int floor_id(const SceneSpec& spec) {
  for (const auto& sh : spec.shapes) {
    if (sh.kind == ShapeKind::kFloor) return sh.id;
  }
  return -1;
}

bool is_excluded_goal(const SceneSpec& spec, const ContactMode& mode, GoalFilter rule) {
  if (rule.exclude_on_table_only && mode.is_exactly(floor_id(spec))) return true;
  if (rule.exclude_robot_balance && mode.is_exactly(spec.robot_id())) return true;
  return false;
}

StateDataset filter_goals(const SceneSpec& spec, const StateDataset& ds, GoalFilter rule) {
  StateDataset out = ds;
  out.samples.clear();
  for (const auto& c : ds.samples) {
    if (!is_excluded_goal(spec, c.mode, rule)) out.samples.push_back(c);
  }
  return out;
}

void save_states(const StateDataset& ds, const std::string& path) {
  std::ostringstream os;
  json header;
  header["format"] = "sgrl.states";
  header["version"] = 1;
  header["scene_hash"] = ds.scene_hash;
  header["seed"] = ds.seed;
  header["count"] = ds.samples.size();
  header["complete"] = ds.complete;
  header["stats"] = {{"attempts", ds.stats.attempts},
                     {"feasible", ds.stats.feasible},
                     {"evals_total", ds.stats.evals_total},
                     {"feasibility_rate", ds.stats.feasibility_rate},
                     {"evals_per_sample", ds.stats.evals_per_sample}};
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    json rec = detail::config_to_json(ds.samples[i]);
    rec["index"] = i;
    os << rec.dump() << '\n';
  }
  write_text_file(path, os.str());
}

StateDataset load_states(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ConfigError("'" + path + "' is empty");
  const json header = detail::parse_line(lines.front(), path);
  detail::expect_format(header, "sgrl.states", path);
  StateDataset ds;
  try {
    ds.scene_hash = header.at("scene_hash").get<std::string>();
    ds.seed = header.at("seed").get<std::uint64_t>();
    ds.complete = header.at("complete").get<bool>();
    const auto& st = header.at("stats");
    ds.stats.attempts = st.at("attempts").get<long>();
    ds.stats.feasible = st.at("feasible").get<long>();
    ds.stats.evals_total = st.at("evals_total").get<long>();
    ds.stats.feasibility_rate = st.at("feasibility_rate").get<double>();
    ds.stats.evals_per_sample = st.at("evals_per_sample").get<double>();
    for (std::size_t k = 1; k < lines.size(); ++k) {
      ds.samples.push_back(detail::config_from_json(detail::parse_line(lines[k], path)));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed states file '" + path + "': " + e.what());
  }
  return ds;
}

}  // namespace sgrl
