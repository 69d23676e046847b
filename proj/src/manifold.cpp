// SPDX-License-Identifier: Apache-2.0
//
// clkl: covariance-domain near-field channel estimation for hybrid arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "clkl/manifold.hpp"

namespace clkl {

RVec centred_index(int elements) {
    if (elements < 2) throw std::invalid_argument("centred_index: need at least two elements");
    RVec m(elements);
    const double half = 0.5 * (elements - 1);
    for (int i = 0; i < elements; ++i) m[i] = i - half;
    return m;
}

ArrayConfig::ArrayConfig(double carrier_hz, int elements, double spacing_m)
    : carrier_hz_(carrier_hz), elements_(elements) {
    if (!(carrier_hz > 0.0)) throw std::invalid_argument("ArrayConfig: carrier must be positive");
    if (elements < 2) throw std::invalid_argument("ArrayConfig: need at least two elements");
    wavelength_ = kSpeedOfLight / carrier_hz;
    spacing_ = spacing_m > 0.0 ? spacing_m : 0.5 * wavelength_;
    centred_ = centred_index(elements);
}

}  // namespace clkl
