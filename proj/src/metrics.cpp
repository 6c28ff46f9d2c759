/*
 * Copyright 2026 The Meerkat Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "meerkat/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace meerkat {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string MetricsSeries::to_csv() const {
  std::ostringstream out;
  out << "round,global_loss,gap,up_bytes,down_bytes\n";
  for (const RoundRecord& row : rounds) {
    out << row.round << "," << format_double(row.global_loss) << ","
        << format_double(row.gap) << "," << row.up_bytes << "," << row.down_bytes
        << "\n";
  }
  return out.str();
}

}  // namespace meerkat
