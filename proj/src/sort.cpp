#include "pemlab/sort.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pemlab/keys.hpp"
#include "pemlab/partition.hpp"

namespace pemlab {
namespace {

class DistributionSort {
 public:
  DistributionSort(Machine& m, const SortPlan& plan, KeyOrder less, SortStats* stats, std::size_t root_n,
                   int root_cores)
      : m_(m), plan_(plan), less_(less), stats_(stats), task_{root_n, root_cores, less} {}

  void run(CoreRange cores, MemRegion in, MemRegion out, bool in_is_scratch) {
    const std::size_t n = in.len;
    if (n == 0) return;
    if (n == 1) {
      m_.solo(cores.first, [&](int c) { m_.write(c, out[0], m_.read(c, in[0])); });
      return;
    }
    if (n <= task_.keys_per_core() || cores.count == 1) {
      seq_sort(m_, cores.first, in, out, less_, in_is_scratch);
      return;
    }

    Scratch scratch(m_);
    auto staged = m_.alloc(n);
    const double threshold = quality_threshold(n, plan_.x);
    const std::size_t z = splitters_for(n, cores.count);
    SortLevel level{n, cores.count, z + 1, 0, threshold, 0};
    BucketedRun run;
    for (;;) {
      if (level.attempts == plan_.retry_cap + 1)
        throw SortFailure("bucket-size gate rejected " + std::to_string(level.attempts) + " partitions at n=" +
                          std::to_string(n));
      ++level.attempts;
      if (stats_) ++stats_->partition_rounds;
      Scratch attempt(m_);
      const auto seed = CounterRng::mix(plan_.seed ^ CounterRng::mix(++draws_));
      const auto splitters = sample_splitters(m_, cores, in, plan_.x, seed, less_, z);
      run = partition_level(m_, cores, in, splitters, staged, task_);
      level.max_bucket = 0;
      for (std::size_t i = 0; i < run.buckets(); ++i) level.max_bucket = std::max(level.max_bucket, run.bucket_size(i));
      if (level.max_bucket < n && static_cast<double>(level.max_bucket) <= threshold) break;
      if (stats_) ++stats_->retries;
    }
    if (stats_) stats_->levels.push_back(level);

    std::vector<std::size_t> sizes(run.buckets());
    for (std::size_t i = 0; i < sizes.size(); ++i) sizes[i] = run.bucket_size(i);
    const auto groups = allocate_cores(cores, sizes);
    for (std::size_t i = 0; i < sizes.size(); ++i)
      run_bucket(groups[i], run.bucket(i), out.slice(run.bounds[i], sizes[i]));
  }

 private:
  void run_bucket(CoreRange cores, MemRegion in, MemRegion out) { run(cores, in, out, true); }

  // At least a few buckets per core keeps the per-core share even when the
  // sampling exponent alone would give fewer buckets than cores.
  std::size_t splitters_for(std::size_t n, int cores) const {
    std::size_t z = splitter_count(n, plan_.x);
    if (plan_.buckets_per_core > 0)
      z = std::max(z, static_cast<std::size_t>(plan_.buckets_per_core) * static_cast<std::size_t>(cores) - 1);
    const auto root = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    return std::clamp<std::size_t>(z, 1, std::max<std::size_t>(1, root));
  }

  Machine& m_;
  const SortPlan& plan_;
  KeyOrder less_;
  SortStats* stats_;
  PartitionTask task_;
  std::uint64_t draws_ = 0;
};

}  // namespace

void sample_sort(Machine& m, CoreRange cores, MemRegion in, MemRegion out, const SortPlan& plan, KeyOrder less,
                 SortStats* stats) {
  if (plan.x < 4) throw std::invalid_argument("sampling exponent must be >= 4");
  if (out.len < in.len) throw Fault("sort output too small");
  const std::size_t n = in.len;
  const auto need = m.config().M * static_cast<std::size_t>(cores.count);
  if (plan.check_preconditions && cores.count > 1 && n < need)
    throw PreconditionError("sort needs n >= M*p (n=" + std::to_string(n) + ", M*p=" + std::to_string(need) + ")");
  DistributionSort(m, plan, less, stats, n, cores.count).run(cores, in, out, false);
}

std::vector<Word> sort_keys(Machine& m, CoreRange cores, const std::vector<Word>& keys, const SortPlan& plan,
                            SortStats* stats) {
  const std::size_t n = keys.size();
  std::vector<Word> packed(n);
  for (std::size_t i = 0; i < n; ++i) packed[i] = keys::pack(keys[i], i);
  auto in = m.alloc(n);
  auto out = m.alloc(n);
  m.poke(in, packed);
  sample_sort(m, cores, in, out, plan, {}, stats);
  auto sorted = m.snapshot(out);
  for (auto& v : sorted) v = keys::key_of(v);
  return sorted;
}

}  // namespace pemlab
