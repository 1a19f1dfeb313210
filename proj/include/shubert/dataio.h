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

// On-disk formats: raw f32 PCM, the JSON-lines example manifest, the label
// store and the codebook file.

#ifndef SHUBERT_DATAIO_H_
#define SHUBERT_DATAIO_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "shubert/mixsim.h"
#include "shubert/quantizer.h"

namespace shubert {

// Raw little-endian 32-bit float samples.
void write_pcm(const std::string& path, const Waveform& w);
Waveform read_pcm(const std::string& path, int sample_rate = 16000);

// Manifest record of one example. Audio paths are relative to the manifest
// directory.
nlohmann::json manifest_record(const MixtureExample& ex);

// Writes <dir>/audio/<id>_{clean,view_a,view_b,enrollment[,interferer]}.f32
// and returns the manifest record.
nlohmann::json write_example(const std::string& dir, const MixtureExample& ex);

// Reads manifest.jsonl in `dir` and loads the audio. Samples go through f32,
// so they equal the written values rounded to single precision.
std::vector<MixtureExample> read_manifest(const std::string& dir,
                                          int sample_rate = 16000);

// Label store: JSON lines {"id": ..., "labels": [...]}.
void write_label_store(const std::string& path, const LabelStore& labels);
LabelStore read_label_store(const std::string& path);

// Codebook: JSON header line followed by K*D raw little-endian f64 values.
void write_codebook(const std::string& path, const Codebook& cb);
Codebook read_codebook(const std::string& path);

// Key under which the interfering talker's labels are stored.
std::string interferer_key(const std::string& id);

// FNV-1a digest of a file's bytes as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace shubert

#endif  // SHUBERT_DATAIO_H_
