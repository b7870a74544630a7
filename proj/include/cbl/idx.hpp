/*
 * Copyright 2026 The cblab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace cbl {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// IDX image tensor: big-endian magic 0x00000803, big-endian u32 dims
/// (count, rows, cols), then raw u8 pixels. Each image is also exposed as a
/// unit-normalized f64 vector (divided by its own Euclidean norm).
struct IdxImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;              // row-major, count*rows*cols bytes
    std::vector<Eigen::VectorXd> unit_vectors;     // one flattened vector per image
};

/// IDX label vector: big-endian magic 0x00000801, big-endian u32 count,
/// then raw u8 labels.
struct IdxLabels {
    std::vector<std::uint8_t> labels;
};

IdxImages load_idx_images(const std::string& path);
IdxLabels load_idx_labels(const std::string& path);

/// Fixture writers (round-trip exact with the loaders).
void write_idx_images(const std::string& path, std::uint32_t rows, std::uint32_t cols,
                      const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

}  // namespace cbl
