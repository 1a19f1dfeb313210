// Copyright (c) 2026 The shubert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "shubert/frontend.h"

#include <cmath>

namespace shubert {

void FrontendConfig::validate() const {
  SHUBERT_CHECK(!kernels.empty() && kernels.size() == strides.size(),
                "frontend: kernels and strides must be non-empty and paired");
  for (size_t i = 0; i < kernels.size(); ++i) {
    SHUBERT_CHECK(kernels[i] >= 1 && strides[i] >= 1,
                  "frontend: kernel and stride must be >= 1");
  }
  SHUBERT_CHECK(dim >= 1, "frontend: dim must be >= 1");
}

int FrontendConfig::hop() const {
  int h = 1;
  for (int s : strides) h *= s;
  return h;
}

int FrontendConfig::receptive_field() const {
  int rf = 1;
  int jump = 1;
  for (size_t i = 0; i < kernels.size(); ++i) {
    rf += (kernels[i] - 1) * jump;
    jump *= strides[i];
  }
  return rf;
}

void init_frontend(ParameterSet& params, const FrontendConfig& config,
                   std::mt19937_64& rng, const std::string& prefix) {
  config.validate();
  int cin = 1;
  for (size_t i = 0; i < config.kernels.size(); ++i) {
    const int fan_in = config.kernels[i] * cin;
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / fan_in));
    Matrix w(fan_in, config.dim);
    for (Index k = 0; k < w.size(); ++k) w.data()[k] = n(rng);
    const std::string p = prefix + ".conv" + std::to_string(i);
    params.add(p + ".weight", std::move(w));
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in),
                                             1.0 / std::sqrt(fan_in));
    Matrix b(1, config.dim);
    for (Index k = 0; k < b.size(); ++k) b.data()[k] = u(rng);
    params.add(p + ".bias", std::move(b));
    cin = config.dim;
  }
  params.add(prefix + ".ln.gamma", Matrix::Ones(1, config.dim));
  params.add(prefix + ".ln.beta", Matrix::Zero(1, config.dim));
}

Var encode_frames(Tape& tape, const Waveform& w, const FrontendConfig& config,
                  const ParameterSet& params, const std::string& prefix) {
  const int rf = config.receptive_field();
  SHUBERT_CHECK(w.size() >= rf, "frontend: waveform of " +
                                    std::to_string(w.size()) +
                                    " samples is shorter than the receptive "
                                    "field (" +
                                    std::to_string(rf) + ")");
  Matrix x = Eigen::Map<const Matrix>(w.samples.data(), w.size(), 1);
  Var h = tape.constant(std::move(x));
  for (size_t i = 0; i < config.kernels.size(); ++i) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    h = gelu(conv1d(h, tape.param(params.get(p + ".weight")),
                    tape.param(params.get(p + ".bias")), config.kernels[i],
                    config.strides[i]));
  }
  h = normalize_rows_moments(h, config.ln_eps);
  return add(mul(h, tape.param(params.get(prefix + ".ln.gamma"))),
             tape.param(params.get(prefix + ".ln.beta")));
}

FrameMatrix encode_frames(const Waveform& w, const FrontendConfig& config,
                          const ParameterSet& params,
                          const std::string& prefix) {
  Tape tape;
  Var h = encode_frames(tape, w, config, params, prefix);
  return {h.value(), static_cast<double>(w.sample_rate) / config.hop()};
}

}  // namespace shubert
