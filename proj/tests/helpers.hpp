#pragma once

#include <vector>

#include "pemlab/machine.hpp"
#include "pemlab/rng.hpp"

namespace testutil {

inline pemlab::Machine machine(int p, std::size_t M, std::size_t B) {
  pemlab::MachineConfig cfg;
  cfg.p = p;
  cfg.M = M;
  cfg.B = B;
  return pemlab::Machine(cfg);
}

inline pemlab::MemRegion load(pemlab::Machine& m, const std::vector<pemlab::Word>& v) {
  auto r = m.alloc(v.size());
  m.poke(r, v);
  return r;
}

inline std::vector<pemlab::Word> random_words(std::size_t n, std::uint64_t seed, pemlab::Word range) {
  pemlab::CounterRng rng(seed);
  std::vector<pemlab::Word> v(n);
  for (auto& x : v) x = static_cast<pemlab::Word>(rng.below(static_cast<std::uint64_t>(range)));
  return v;
}

}  // namespace testutil
