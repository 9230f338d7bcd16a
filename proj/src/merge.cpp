#include "mergelaw/merge.hpp"

#include "mergelaw/kernels.hpp"
#include "mergelaw/rng.hpp"

namespace mergelaw {

namespace {

struct KernelSet {
  void (*task_delta)(std::span<const float>, std::span<const float>, std::span<double>);
  void (*dare)(std::span<const double>, std::span<double>, std::uint64_t, double);
  void (*ties_trim)(std::span<double>, double);
  void (*ties_elect_disjoint)(std::span<const std::span<double>>);
  void (*combine)(std::span<const float>, std::span<const std::span<const double>>, double, bool,
                  std::span<float>);
};

KernelSet kernels_for(Exec exec) {
  namespace ref = kernels::reference;
  namespace par = kernels::parallel;
  if (exec == Exec::Serial) {
    return {ref::task_delta, ref::dare, ref::ties_trim, ref::ties_elect_disjoint, ref::combine};
  }
  return {par::task_delta, par::dare, par::ties_trim, par::ties_elect_disjoint, par::combine};
}

// Psi applied in place to the deltas of one tensor across all experts.
void transform_tensor(const MergeRecipe& recipe, const std::string& tensor, std::span<const std::string> ids,
                      std::vector<std::vector<double>>& deltas, const KernelSet& ks) {
  switch (recipe.method) {
    case MergeMethod::Average:
    case MergeMethod::TaskArithmetic:
      return;
    case MergeMethod::Dare: {
      std::vector<double> scratch;
      for (std::size_t i = 0; i < deltas.size(); ++i) {
        scratch.resize(deltas[i].size());
        ks.dare(deltas[i], scratch, dare_stream(recipe.seed, ids[i], tensor), recipe.drop_rate);
        deltas[i].swap(scratch);
      }
      return;
    }
    case MergeMethod::Ties: {
      std::vector<std::span<double>> views;
      for (auto& d : deltas) {
        ks.ties_trim(d, recipe.density);
        views.emplace_back(d);
      }
      ks.ties_elect_disjoint(views);
      return;
    }
  }
}

}  // namespace

std::string_view method_name(MergeMethod m) {
  switch (m) {
    case MergeMethod::Average: return "average";
    case MergeMethod::TaskArithmetic: return "ta";
    case MergeMethod::Ties: return "ties";
    case MergeMethod::Dare: return "dare";
  }
  return "?";
}

std::optional<MergeMethod> parse_method(std::string_view s) {
  if (s == "average" || s == "avg") return MergeMethod::Average;
  if (s == "ta") return MergeMethod::TaskArithmetic;
  if (s == "ties") return MergeMethod::Ties;
  if (s == "dare") return MergeMethod::Dare;
  return std::nullopt;
}

MergeRecipe MergeRecipe::defaults(MergeMethod m) {
  MergeRecipe r;
  r.method = m;
  r.scale = m == MergeMethod::TaskArithmetic ? 0.8 : 1.0;
  r.density = 1.0;
  r.drop_rate = 0.2;
  return r;
}

void MergeRecipe::validate() const {
  if (!(scale > 0.0)) throw InputError("merge scale c must be > 0");
  if (method == MergeMethod::Dare && !(drop_rate >= 0.0 && drop_rate < 1.0)) {
    throw InputError("DARE drop rate p must be in [0, 1)");
  }
  if (method == MergeMethod::Ties && !(density > 0.0 && density <= 1.0)) {
    throw InputError("TIES density d must be in (0, 1]");
  }
}

std::uint64_t dare_stream(std::uint64_t seed, std::string_view source_id, std::string_view tensor) {
  return rng::stream_key({seed, rng::hash_string(source_id), rng::hash_string(tensor)});
}

TaskVector task_vector(const Checkpoint& base, const Checkpoint& expert, std::string source_id, Exec exec) {
  const Checkpoint experts[] = {expert};
  if (auto report = check_compatible(base, experts); !report.ok()) {
    throw InputError("expert '" + source_id + "' is incompatible with base: " + report.describe());
  }
  const auto ks = kernels_for(exec);
  TaskVector tv;
  tv.source_id = std::move(source_id);
  for (const auto& [name, t] : base.tensors()) {
    DeltaTensor d{t.shape, std::vector<double>(t.size())};
    ks.task_delta(expert.at(name).values, t.values, d.values);
    tv.deltas.emplace(name, std::move(d));
  }
  return tv;
}

std::vector<TaskVector> apply_recipe_transform(const MergeRecipe& recipe, std::span<const TaskVector> vectors,
                                               Exec exec) {
  recipe.validate();
  if (vectors.empty()) throw InputError("apply_recipe_transform needs at least one task vector");
  for (const auto& v : vectors) {
    if (v.deltas.size() != vectors[0].deltas.size()) throw InputError("task vectors have different key sets");
    for (const auto& [name, d] : vectors[0].deltas) {
      auto it = v.deltas.find(name);
      if (it == v.deltas.end() || it->second.shape != d.shape) {
        throw InputError("task vector '" + v.source_id + "' is incompatible on '" + name + "'");
      }
    }
  }

  const auto ks = kernels_for(exec);
  std::vector<TaskVector> out(vectors.begin(), vectors.end());
  std::vector<std::string> ids;
  for (const auto& v : vectors) ids.push_back(v.source_id);

  for (const auto& [name, _] : vectors[0].deltas) {
    std::vector<std::vector<double>> deltas;
    for (auto& v : out) deltas.push_back(std::move(v.deltas.at(name).values));
    transform_tensor(recipe, name, ids, deltas, ks);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].deltas.at(name).values = std::move(deltas[i]);
  }
  return out;
}

MergedModel merge(const Checkpoint& base, std::span<const Checkpoint> experts, const MergeRecipe& recipe,
                  std::vector<std::string> donor_ids, Exec exec) {
  recipe.validate();
  if (experts.empty()) throw InputError("merge needs at least one expert");
  if (donor_ids.empty()) {
    for (std::size_t i = 0; i < experts.size(); ++i) donor_ids.push_back(std::to_string(i));
  }
  if (donor_ids.size() != experts.size()) throw InputError("donor_ids and experts differ in length");
  if (auto report = check_compatible(base, experts); !report.ok()) {
    throw InputError("experts are incompatible with base:\n" + report.describe());
  }

  const auto ks = kernels_for(exec);
  MergedModel merged;
  merged.recipe = recipe;
  merged.checkpoint.metadata() = base.metadata();

  // One tensor at a time keeps peak memory at k double-precision copies of
  // the largest tensor.
  for (const auto& [name, t] : base.tensors()) {
    std::vector<std::vector<double>> deltas(experts.size(), std::vector<double>(t.size()));
    for (std::size_t i = 0; i < experts.size(); ++i) {
      ks.task_delta(experts[i].at(name).values, t.values, deltas[i]);
    }
    transform_tensor(recipe, name, donor_ids, deltas, ks);

    std::vector<std::span<const double>> views(deltas.begin(), deltas.end());
    std::vector<float> out(t.size());
    const bool disjoint_mean = recipe.method == MergeMethod::Ties && recipe.disjoint_mean;
    ks.combine(t.values, views, recipe.scale, disjoint_mean, out);
    merged.checkpoint.add(name, t.shape, std::move(out));
  }
  merged.donor_ids = std::move(donor_ids);
  return merged;
}

}  // namespace mergelaw
