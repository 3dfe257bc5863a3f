// Copyright 2026 The oaas-mini Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oaas/sim/random.h"

#include "oaas/common/hash.h"

namespace oaas::sim {

Rng RandomSource::Stream(std::string_view component, uint64_t entity) const {
  uint64_t h = SplitMix64(seed_ ^ Fnv1a64(component));
  h = SplitMix64(h ^ SplitMix64(entity + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

}  // namespace oaas::sim
