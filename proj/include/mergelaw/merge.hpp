#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mergelaw/checkpoint.hpp"
#include "mergelaw/exec.hpp"

namespace mergelaw {

enum class MergeMethod { Average, TaskArithmetic, Ties, Dare };

std::string_view method_name(MergeMethod m);  // "average" | "ta" | "ties" | "dare"
std::optional<MergeMethod> parse_method(std::string_view s);

struct MergeRecipe {
  MergeMethod method = MergeMethod::Average;
  double scale = 1.0;      // total coefficient mass c; each expert gets c/k
  double density = 1.0;    // TIES trim density d in (0, 1]
  double drop_rate = 0.2;  // DARE drop probability p in [0, 1)
  std::uint64_t seed = 0;  // DARE mask seed
  // TIES only: divide by the per-position count of surviving entries instead
  // of k (the original TIES disjoint mean).
  bool disjoint_mean = false;

  // Table defaults: Average c=1, TA c=0.8, TIES c=1 d=1, DARE c=1 p=0.2.
  static MergeRecipe defaults(MergeMethod m);
  // Throws InputError on c <= 0, p outside [0,1), d outside (0,1].
  void validate() const;
};

struct DeltaTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

// expert - base, kept in double so base + delta reproduces the expert exactly.
struct TaskVector {
  std::string source_id;
  std::map<std::string, DeltaTensor> deltas;
};

struct MergedModel {
  Checkpoint checkpoint;
  MergeRecipe recipe;
  std::vector<std::string> donor_ids;

  std::size_t k() const { return donor_ids.size(); }
};

TaskVector task_vector(const Checkpoint& base, const Checkpoint& expert, std::string source_id,
                       Exec exec = Exec::Parallel);

// Applies the recipe's Psi to every vector. Identity for Average/TA.
std::vector<TaskVector> apply_recipe_transform(const MergeRecipe& recipe, std::span<const TaskVector> vectors,
                                               Exec exec = Exec::Parallel);

// Stream key for the DARE mask of one (seed, expert, tensor).
std::uint64_t dare_stream(std::uint64_t seed, std::string_view source_id, std::string_view tensor);

// theta = theta0 + (c/k) * sum_i Psi(v_i). donor_ids labels the experts (and
// keys DARE streams); when empty, experts are labelled "0", "1", ...
MergedModel merge(const Checkpoint& base, std::span<const Checkpoint> experts, const MergeRecipe& recipe,
                  std::vector<std::string> donor_ids = {}, Exec exec = Exec::Parallel);

}  // namespace mergelaw
