// Copyright (c) the camnoise authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "camnoise/rng.hpp"

namespace camnoise {

double Rng::normal(double mean, double stddev) {
  if (stddev <= 0.0) return mean;
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

double Rng::poisson(double mean) {
  if (mean <= 0.0) return 0.0;
  // poisson_distribution<long long> handles means far beyond int range.
  std::poisson_distribution<long long> dist(mean);
  return static_cast<double>(dist(engine_));
}

}  // namespace camnoise
